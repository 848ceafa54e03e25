//! Buy–hold–sell Monte Carlo simulation, tail-risk metrics, causal feature
//! engineering, stability selection and local-projection impulse responses.
//!
//! The pipeline runs in stages: [`panel`] loads and cleans daily prices,
//! [`sim`] draws episodes, [`metrics`] summarizes them, [`features`] builds
//! weekly standardized tensors, [`selection`] picks stable macro features and
//! [`lp`] estimates impulse-response surfaces with simultaneous bands.

pub mod error;
pub mod features;
pub mod lp;
pub mod metrics;
pub mod panel;
pub mod report;
pub mod rng;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureId, FeatureTensor, TargetKind, TransformTag};
pub use lp::{IrfSurface, LpConfig, SurfaceRow};
pub use metrics::{Flavor, MetricSet, OverallRow, WeeklyMetricPanel};
pub use panel::{CleaningRules, PanelSet, TokenPanel, WeeklySeries};
pub use rng::{CounterRng, StreamKey};
pub use selection::{SelectedFeatures, SelectionConfig, StabilityReport};
pub use sim::{BasketPanel, EpisodeBatch, HorizonInterval, RiskFreeCurve, SimConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
