//! Run configuration: a JSON file naming the data, the baskets and every
//! stage parameter.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hodl_core::panel::CleaningRules;
use hodl_core::selection::Thresholds;
use hodl_core::sim::EpisodeFormat;
use hodl_core::{FeatureConfig, HorizonInterval, LpConfig, SelectionConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// A configuration problem, reported with exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Directory of `SYMBOL.csv` daily files.
    pub tokens: PathBuf,
    /// Directory of `SERIES.csv` daily macro files.
    pub macro_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fgi: Option<PathBuf>,
    pub riskfree: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationarity: Option<PathBuf>,
    pub output: PathBuf,
}

/// Basket membership: `"ALL"` for every cleaned token, or a symbol list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Members {
    All,
    Symbols(Vec<String>),
}

impl Serialize for Members {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Members::All => s.serialize_str("ALL"),
            Members::Symbols(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Members {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            List(Vec<String>),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "ALL" => Ok(Members::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "basket members must be \"ALL\" or a list of symbols, got {w:?}"
            ))),
            Raw::List(v) => Ok(Members::Symbols(v)),
        }
    }
}

mod interval_labels {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[HorizonInterval], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(HorizonInterval::label))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<HorizonInterval>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub simulate: u64,
    pub select: u64,
    pub irf: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            simulate: 42,
            select: 7,
            irf: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    pub bootstrap: usize,
    pub thresholds: Thresholds,
    pub grid_points: usize,
    pub grid_ratio: f64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        let d = SelectionConfig::default();
        SelectionSettings {
            bootstrap: d.replicates,
            thresholds: d.thresholds,
            grid_points: d.grid_points,
            grid_ratio: d.grid_ratio,
        }
    }
}

impl SelectionSettings {
    pub fn to_core(&self) -> SelectionConfig {
        SelectionConfig {
            replicates: self.bootstrap,
            grid_points: self.grid_points,
            grid_ratio: self.grid_ratio,
            thresholds: self.thresholds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrfSettings {
    pub lambda: f64,
    pub bootstrap: usize,
    pub level: f64,
    /// Foreign surface CSV to compare against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<PathBuf>,
}

impl Default for IrfSettings {
    fn default() -> Self {
        let d = LpConfig::default();
        IrfSettings {
            lambda: d.lambda,
            bootstrap: d.replicates,
            level: d.level,
            compare: None,
        }
    }
}

impl IrfSettings {
    pub fn to_core(&self) -> LpConfig {
        LpConfig {
            lambda: self.lambda,
            replicates: self.bootstrap,
            level: self.level,
        }
    }
}

fn default_intervals() -> Vec<HorizonInterval> {
    HorizonInterval::CANONICAL.to_vec()
}

fn default_horizons() -> Vec<u32> {
    hodl_core::features::HORIZONS.to_vec()
}

fn default_n() -> usize {
    10_000_000
}

fn default_fee() -> f64 {
    0.001
}

fn default_failures() -> usize {
    50
}

fn default_btc() -> Option<String> {
    Some("BTC".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub baskets: BTreeMap<String, Members>,
    #[serde(default = "default_intervals", with = "interval_labels")]
    pub intervals: Vec<HorizonInterval>,
    #[serde(default = "default_n")]
    pub n_per_interval: usize,
    #[serde(default = "default_fee")]
    pub fee: f64,
    #[serde(default = "default_failures")]
    pub max_consecutive_failures: usize,
    #[serde(default)]
    pub episode_format: EpisodeFormat,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<u32>,
    #[serde(default)]
    pub cleaning: CleaningRules,
    /// Token whose weekly log return enters as a macro series.
    #[serde(default = "default_btc")]
    pub btc_symbol: Option<String>,
    #[serde(default)]
    pub selection: SelectionSettings,
    #[serde(default)]
    pub irf: IrfSettings,
}

impl RunConfig {
    /// Parses a config file. Relative paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.tokens);
        fix(&mut self.paths.macro_dir);
        fix(&mut self.paths.riskfree);
        fix(&mut self.paths.output);
        for p in [&mut self.paths.fgi, &mut self.paths.stationarity, &mut self.irf.compare]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.paths;
        for (name, dir) in [("tokens", &p.tokens), ("macro_dir", &p.macro_dir)] {
            if !dir.is_dir() {
                return bad(format!("paths.{name}: {} is not a directory", dir.display()));
            }
        }
        let files = [
            ("riskfree", Some(&p.riskfree)),
            ("fgi", p.fgi.as_ref()),
            ("stationarity", p.stationarity.as_ref()),
            ("irf.compare", self.irf.compare.as_ref()),
        ];
        for (name, f) in files {
            if let Some(f) = f {
                if !f.is_file() {
                    return bad(format!("{name}: {} does not exist", f.display()));
                }
            }
        }
        if self.baskets.is_empty() {
            return bad("no baskets configured");
        }
        for (name, m) in &self.baskets {
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return bad(format!("basket name {name:?} is not usable as a file name"));
            }
            if let Members::Symbols(v) = m {
                if v.is_empty() {
                    return bad(format!("basket {name} has no symbols"));
                }
            }
        }
        if self.intervals.is_empty() {
            return bad("no intervals configured");
        }
        let mut seen = std::collections::BTreeSet::new();
        for iv in &self.intervals {
            if !seen.insert(iv.upper) {
                return bad(format!("two intervals share the upper bound {}", iv.upper));
            }
        }
        if self.n_per_interval == 0 {
            return bad("n_per_interval must be at least 1");
        }
        if !(0.0..1.0).contains(&self.fee) {
            return bad(format!("fee {} outside [0, 1)", self.fee));
        }
        if self.max_consecutive_failures == 0 {
            return bad("max_consecutive_failures must be positive");
        }
        if self.horizons.is_empty() {
            return bad("no horizons configured");
        }
        for h in &self.horizons {
            if !seen.contains(h) {
                return bad(format!("horizon {h} is not the upper bound of any configured interval"));
            }
        }
        self.cleaning.validate().map_err(|e| ConfigError(format!("cleaning: {e}")))?;
        let t = self.selection.thresholds;
        if !(0.0..=1.0).contains(&t.base) || !(0.0..=1.0).contains(&t.conditional) {
            return bad("selection thresholds must lie in [0, 1]");
        }
        if self.selection.bootstrap == 0 || self.selection.grid_points == 0 {
            return bad("selection.bootstrap and selection.grid_points must be positive");
        }
        if !(self.selection.grid_ratio > 0.0 && self.selection.grid_ratio < 1.0) {
            return bad("selection.grid_ratio must lie in (0, 1)");
        }
        if !(self.irf.lambda >= 0.0 && self.irf.lambda.is_finite()) {
            return bad("irf.lambda must be finite and non-negative");
        }
        if self.irf.bootstrap == 0 {
            return bad("irf.bootstrap must be positive");
        }
        if !(self.irf.level > 0.0 && self.irf.level < 1.0) {
            return bad("irf.level must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            horizons: self.horizons.clone(),
            ..FeatureConfig::default()
        }
    }

    /// Hash of every semantically meaningful field. The output directory is
    /// excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(paths) = v.get_mut("paths").and_then(|p| p.as_object_mut()) {
            paths.remove("output");
        }
        sha256_hex(v.to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        serde_json::from_str(
            r#"{
                "paths": {"tokens": "t", "macro_dir": "m", "riskfree": "r.csv", "output": "out"},
                "baskets": {"ALL": "ALL", "L1": ["BTC", "ETH"]},
                "intervals": ["1-30", "731-1095"],
                "horizons": [30, 1095]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_members_and_intervals() {
        let c = sample();
        assert_eq!(c.baskets["ALL"], Members::All);
        assert_eq!(c.baskets["L1"], Members::Symbols(vec!["BTC".into(), "ETH".into()]));
        assert_eq!(c.intervals[1], HorizonInterval { lower: 731, upper: 1095 });
        assert_eq!(c.seeds, Seeds::default());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = sample();
        let mut b = a.clone();
        b.paths.output = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seeds.irf += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_unknown_members_word() {
        let err = serde_json::from_str::<Members>(r#""SOME""#).unwrap_err();
        assert!(err.to_string().contains("ALL"));
    }
}
