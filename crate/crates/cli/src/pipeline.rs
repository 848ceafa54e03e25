//! Stage orchestration with hash-keyed resume.
//!
//! Every stage writes a fixed set of paths under the output directory. The
//! top-level `manifest.json` records, per stage, a key (hash of the stage's
//! parameters, its input files and the upstream stage's key and outputs) and
//! the sha256 of every file it wrote. A stage is skipped when its key is
//! unchanged and all recorded outputs are still on disk with the same hashes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hodl_core::lp::{compare_surfaces, rank_effects, read_surface_csv, surface_rows, write_surface_csv, AgreementSummary};
use hodl_core::metrics::{
    aggregate_overall, aggregate_weekly, read_json, write_json, write_overall_csv, write_weekly_csv,
};
use hodl_core::panel::{
    apply_cleaning_rules, btc_weekly_log_return, load_daily_series, load_panel_set, load_token_csv,
    weekly_align_macro, weekly_fgi_mean, write_token_csv,
};
use hodl_core::report::{emit_bubble_chart, ChartLayout};
use hodl_core::selection::select_features;
use hodl_core::sim::{simulate_batch, write_batch, EpisodeFormat, RejectionStats};
use hodl_core::features::{build_tensor, read_tensor, targets_from_weekly, write_tensor, StationarityTable};
use hodl_core::{
    lp, BasketPanel, EpisodeBatch, HorizonInterval, LpConfig, OverallRow, RiskFreeCurve, SelectedFeatures,
    SelectionConfig, SimConfig, StabilityReport, WeeklyMetricPanel, WeeklySeries,
};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{sha256_hex, ConfigError, Members, RunConfig, Seeds};
use crate::tables::{read_weekly_targets, write_weekly_macro, write_weekly_targets, BasketTargets};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Simulate,
    Metrics,
    Features,
    Select,
    Irf,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Simulate,
        Stage::Metrics,
        Stage::Features,
        Stage::Select,
        Stage::Irf,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Simulate => "simulate",
            Stage::Metrics => "metrics",
            Stage::Features => "features",
            Stage::Select => "select",
            Stage::Irf => "irf",
            Stage::Report => "report",
        }
    }

    fn upstream(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|s| *s == self).unwrap();
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }

    /// Paths, relative to the output directory, owned by this stage.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["clean_panels", "exclusions.json", "ingest_warnings.json"],
            Stage::Simulate => &["episodes"],
            Stage::Metrics => &[
                "metrics_overall.csv",
                "metrics_overall.json",
                "metrics_weekly.csv",
                "metrics_weekly.json",
                "weekly_targets.csv",
            ],
            Stage::Features => &["weekly_macro.csv", "tensor"],
            Stage::Select => &["stability_report.json", "selected_features.json"],
            Stage::Irf => &["irf_surface.csv", "irf_detail.json", "rankings.json", "agreement.json"],
            Stage::Report => &["report"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Stage { stage: Stage, error: anyhow::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Stage { .. } => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Stage { stage, error } => write!(f, "stage {stage} failed: {error:#}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub key: String,
    /// Relative path to sha256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub core_version: String,
    pub config_hash: String,
    pub seeds: Option<Seeds>,
    pub stages: BTreeMap<Stage, StageRecord>,
    pub updated_at: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureFiles {
    pub svg: String,
    pub csv: String,
}

/// What the report stage emitted. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub tool_version: String,
    pub core_version: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub metric_tables: Vec<String>,
    pub figures: Vec<FigureFiles>,
    pub irf_tables: Vec<String>,
    #[serde(skip)]
    pub stages: Vec<(Stage, StageStatus)>,
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

/// Files under `path` (or `path` itself), relative to `root`, sorted.
fn collect_files(root: &Path, path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        entries.sort();
        for e in entries {
            collect_files(root, &e, out)?;
        }
    } else if path.is_file() {
        out.push(path.strip_prefix(root)?.to_path_buf());
    }
    Ok(())
}

fn rel_key(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Hashes of every file under the given roots, keyed by relative path.
fn hash_tree(root: &Path, rels: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    for r in rels {
        collect_files(root, &root.join(r), &mut files)?;
    }
    files
        .into_iter()
        .map(|f| Ok((rel_key(&f), hash_file(&root.join(&f))?)))
        .collect()
}

fn hash_inputs(paths: &[Option<&Path>]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for p in paths.iter().flatten() {
        let mut files = Vec::new();
        collect_files(p, p, &mut files)?;
        for f in files {
            let stem = p.file_name().unwrap_or_default().to_string_lossy();
            let (full, name) = match f.as_os_str().is_empty() {
                true => (p.to_path_buf(), stem.into_owned()),
                false => (p.join(&f), format!("{stem}/{}", rel_key(&f))),
            };
            out.insert(name, hash_file(&full)?);
        }
    }
    Ok(out)
}

fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub struct Pipeline {
    pub config: RunConfig,
    pub out: PathBuf,
    manifest: Manifest,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> std::result::Result<Self, RunError> {
        config.validate()?;
        let out = config.paths.output.clone();
        fs::create_dir_all(&out)
            .map_err(|e| ConfigError(format!("cannot create output dir {}: {e}", out.display())))?;
        let path = out.join(MANIFEST);
        let mut manifest: Manifest = if path.is_file() {
            match read_json(&path) {
                Ok(m) => m,
                Err(e) => {
                    warn!("ignoring unreadable {}: {e}", path.display());
                    Manifest::default()
                }
            }
        } else {
            Manifest::default()
        };
        manifest.tool_version = TOOL_VERSION.into();
        manifest.core_version = hodl_core::VERSION.into();
        manifest.config_hash = config.hash();
        manifest.seeds = Some(config.seeds);
        Ok(Pipeline { config, out, manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn params(&self, stage: Stage) -> Result<serde_json::Value> {
        let c = &self.config;
        let p = &c.paths;
        Ok(match stage {
            Stage::Ingest => json!({
                "cleaning": c.cleaning,
                "inputs": hash_inputs(&[Some(&p.tokens)])?,
            }),
            Stage::Simulate => json!({
                "baskets": c.baskets,
                "intervals": c.intervals.iter().map(HorizonInterval::label).collect::<Vec<_>>(),
                "n": c.n_per_interval,
                "fee": c.fee,
                "max_consecutive_failures": c.max_consecutive_failures,
                "format": c.episode_format,
                "seed": c.seeds.simulate,
                "inputs": hash_inputs(&[Some(&p.riskfree)])?,
            }),
            Stage::Metrics => json!({}),
            Stage::Features => json!({
                "features": c.feature_config(),
                "btc_symbol": c.btc_symbol,
                "inputs": hash_inputs(&[Some(&p.macro_dir), p.fgi.as_deref(), p.stationarity.as_deref()])?,
            }),
            Stage::Select => json!({"selection": c.selection, "seed": c.seeds.select}),
            Stage::Irf => json!({
                "lambda": c.irf.lambda,
                "bootstrap": c.irf.bootstrap,
                "level": c.irf.level,
                "seed": c.seeds.irf,
                "inputs": hash_inputs(&[c.irf.compare.as_deref()])?,
            }),
            Stage::Report => json!({}),
        })
    }

    fn stage_key(&self, stage: Stage) -> Result<String> {
        let upstream = match stage.upstream() {
            Some(u) => {
                let rec = self
                    .manifest
                    .stages
                    .get(&u)
                    .ok_or_else(|| anyhow!("stage {u} has not completed; run it first"))?;
                json!({"key": rec.key, "outputs": rec.outputs})
            }
            None => serde_json::Value::Null,
        };
        let doc = json!({
            "stage": stage.name(),
            "core_version": hodl_core::VERSION,
            "params": self.params(stage)?,
            "upstream": upstream,
        });
        Ok(sha256_hex(doc.to_string().as_bytes()))
    }

    fn up_to_date(&self, stage: Stage, key: &str) -> bool {
        let Some(rec) = self.manifest.stages.get(&stage) else {
            return false;
        };
        if rec.key != key || rec.outputs.is_empty() {
            return false;
        }
        match hash_tree(&self.out, stage.outputs()) {
            Ok(now) => now == rec.outputs,
            Err(_) => false,
        }
    }

    fn save_manifest(&mut self) -> Result<()> {
        self.manifest.updated_at = Some(now_utc());
        write_json(&self.out.join(MANIFEST), &self.manifest)?;
        Ok(())
    }

    /// Runs one stage unless its recorded outputs are current.
    pub fn run_stage(&mut self, stage: Stage, force: bool) -> std::result::Result<StageStatus, RunError> {
        let fail = |error: anyhow::Error| RunError::Stage { stage, error };
        let key = self.stage_key(stage).map_err(fail)?;
        if !force && self.up_to_date(stage, &key) {
            info!("{stage}: outputs current, skipping");
            return Ok(StageStatus::Skipped);
        }
        info!("{stage}: running");
        // Later stages depend on this one; drop their records so they rerun.
        self.manifest.stages.retain(|s, _| *s < stage);
        for rel in stage.outputs() {
            let p = self.out.join(rel);
            if p.is_dir() {
                fs::remove_dir_all(&p).with_context(|| format!("removing {}", p.display())).map_err(fail)?;
            } else if p.is_file() {
                fs::remove_file(&p).with_context(|| format!("removing {}", p.display())).map_err(fail)?;
            }
        }
        let result = match stage {
            Stage::Ingest => ingest(&self.config, &self.out),
            Stage::Simulate => simulate(&self.config, &self.out),
            Stage::Metrics => metrics(&self.out),
            Stage::Features => features(&self.config, &self.out),
            Stage::Select => select(
                &self.out.join("tensor"),
                &self.out,
                &self.config.selection.to_core(),
                self.config.seeds.select,
            ),
            Stage::Irf => irf(
                &self.out.join("tensor"),
                &self.out.join("selected_features.json"),
                &self.out,
                &self.config.irf.to_core(),
                self.config.seeds.irf,
                self.config.irf.compare.as_deref(),
            ),
            Stage::Report => report(&self.config, &self.out).map(|_| ()),
        };
        result.map_err(fail)?;
        let outputs = hash_tree(&self.out, stage.outputs()).map_err(fail)?;
        self.manifest.stages.insert(stage, StageRecord { key, outputs });
        self.save_manifest().map_err(fail)?;
        Ok(StageStatus::Ran)
    }
}

/// Runs every stage in order, resuming from current outputs.
pub fn run_pipeline(config: RunConfig) -> std::result::Result<ReportBundle, RunError> {
    let mut p = Pipeline::new(config)?;
    let mut statuses = Vec::new();
    for stage in Stage::ALL {
        statuses.push((stage, p.run_stage(stage, false)?));
    }
    let path = p.out.join("report").join("bundle.json");
    let mut bundle: ReportBundle = read_json(&path).map_err(|e| RunError::Stage {
        stage: Stage::Report,
        error: e.into(),
    })?;
    bundle.stages = statuses;
    Ok(bundle)
}

fn ingest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let set = load_panel_set(&cfg.paths.tokens)?;
    let outcome = apply_cleaning_rules(&set, &cfg.cleaning);
    for w in &outcome.panels.warnings {
        warn!("ingest: {}{}", w.symbol.as_deref().map(|s| format!("{s}: ")).unwrap_or_default(), w.message);
    }
    if outcome.panels.is_empty() {
        bail!("no token survived cleaning ({} loaded, {} excluded)", set.len(), outcome.exclusions.len());
    }
    let dir = out.join("clean_panels");
    fs::create_dir_all(&dir)?;
    for p in &outcome.panels.panels {
        write_token_csv(&dir.join(format!("{}.csv", p.symbol)), p)?;
    }
    let excl: BTreeMap<&str, &str> = outcome.exclusions.iter().map(|(s, r)| (s.as_str(), r.as_str())).collect();
    write_json(&out.join("exclusions.json"), &excl)?;
    write_json(&out.join("ingest_warnings.json"), &outcome.panels.warnings)?;
    info!("ingest: kept {}, excluded {}", outcome.panels.len(), excl.len());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub basket: String,
    pub interval: String,
    pub file: String,
    pub requested: usize,
    pub accepted: usize,
    pub complete: bool,
    pub stats: RejectionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeManifest {
    pub seed: u64,
    pub config_hash: String,
    pub fee: f64,
    pub format: EpisodeFormat,
    pub batches: Vec<BatchEntry>,
}

fn basket_symbols(name: &str, members: &Members, available: &[String], out: &Path) -> Result<Vec<String>> {
    match members {
        Members::All => Ok(available.to_vec()),
        Members::Symbols(v) => {
            let excluded: BTreeMap<String, String> =
                read_json(&out.join("exclusions.json")).unwrap_or_default();
            for s in v {
                if !available.contains(s) {
                    match excluded.get(s) {
                        Some(r) => bail!("basket {name}: {s} was excluded during cleaning ({r})"),
                        None => bail!("basket {name}: no data for {s}"),
                    }
                }
            }
            Ok(v.clone())
        }
    }
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let set = load_panel_set(&out.join("clean_panels"))?;
    let available = set.symbols();
    let quotes = load_daily_series(&cfg.paths.riskfree)?;
    let dir = out.join("episodes");
    fs::create_dir_all(&dir)?;
    let mut entries = Vec::new();
    for (name, members) in &cfg.baskets {
        let symbols = basket_symbols(name, members, &available, out)?;
        let refs: Vec<_> = symbols.iter().map(|s| set.get(s).unwrap()).collect();
        let panel = BasketPanel::from_panels(name, &refs)?;
        let curve = RiskFreeCurve::from_annual_yields(&quotes, panel.start, panel.days())?;
        for iv in &cfg.intervals {
            let sim = SimConfig {
                fee: cfg.fee,
                max_consecutive_failures: cfg.max_consecutive_failures,
                ..SimConfig::new(name, *iv, cfg.n_per_interval, cfg.seeds.simulate)
            };
            let batch = simulate_batch(&sim, &panel, &curve).with_context(|| format!("basket {name}, interval {iv}"))?;
            if !batch.complete {
                warn!(
                    "simulate: {name} {iv} stopped early with {} of {} episodes",
                    batch.len(),
                    cfg.n_per_interval
                );
            }
            let file = format!("{name}_{}.{}", iv.label(), cfg.episode_format.extension());
            write_batch(&dir.join(&file), &batch, cfg.episode_format)?;
            info!("simulate: {name} {iv}: {} episodes", batch.len());
            entries.push(BatchEntry {
                basket: name.clone(),
                interval: iv.label(),
                file,
                requested: cfg.n_per_interval,
                accepted: batch.len(),
                complete: batch.complete,
                stats: batch.stats,
            });
        }
    }
    let manifest = EpisodeManifest {
        seed: cfg.seeds.simulate,
        config_hash: cfg.hash(),
        fee: cfg.fee,
        format: cfg.episode_format,
        batches: entries,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

/// Keeps only what the overall aggregation reads.
fn slim(b: EpisodeBatch) -> EpisodeBatch {
    EpisodeBatch {
        basket: b.basket,
        interval: b.interval,
        start: b.start,
        coin: b.coin,
        excess_return: b.excess_return,
        complete: b.complete,
        stats: b.stats,
        ..EpisodeBatch::default()
    }
}

fn metrics(out: &Path) -> Result<()> {
    let dir = out.join("episodes");
    let manifest: EpisodeManifest = read_json(&dir.join("manifest.json"))?;
    let mut by_basket: BTreeMap<&str, Vec<&BatchEntry>> = BTreeMap::new();
    for e in &manifest.batches {
        by_basket.entry(&e.basket).or_default().push(e);
    }
    let mut overall = Vec::new();
    let mut weekly: Vec<WeeklyMetricPanel> = Vec::new();
    let mut targets = BasketTargets::new();
    for (basket, entries) in by_basket {
        let mut batches = Vec::new();
        let mut panels = Vec::new();
        for e in entries {
            let mut b = hodl_core::sim::read_batch(&dir.join(&e.file))?;
            // CSV episode files carry no batch header.
            b.basket = e.basket.clone();
            b.interval = Some(e.interval.parse()?);
            if b.start.is_none() && !b.is_empty() {
                bail!("{}: episode file has no calendar start", e.file);
            }
            panels.push(aggregate_weekly(&b)?);
            batches.push(slim(b));
        }
        overall.extend(aggregate_overall(&batches)?);
        targets.insert(basket.to_string(), targets_from_weekly(&panels));
        weekly.extend(panels);
    }
    write_overall_csv(&out.join("metrics_overall.csv"), &overall)?;
    write_json(&out.join("metrics_overall.json"), &overall)?;
    write_weekly_csv(&out.join("metrics_weekly.csv"), &weekly)?;
    write_json(&out.join("metrics_weekly.json"), &weekly)?;
    write_weekly_targets(&out.join("weekly_targets.csv"), &targets)?;
    Ok(())
}

/// Weekly macro inputs: every daily series in the macro directory, the
/// sentiment index and the reference token's weekly log return.
fn weekly_macros(cfg: &RunConfig, out: &Path) -> Result<BTreeMap<String, WeeklySeries>> {
    let mut macros = BTreeMap::new();
    let mut files: Vec<PathBuf> = fs::read_dir(&cfg.paths.macro_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    for f in files {
        let name = f.file_stem().unwrap().to_string_lossy().into_owned();
        let s = weekly_align_macro(&load_daily_series(&f)?);
        if s.is_empty() {
            warn!("features: macro series {name} has no weekly observations");
            continue;
        }
        macros.insert(name, s);
    }
    if let Some(fgi) = &cfg.paths.fgi {
        macros.insert("FGI".to_string(), weekly_fgi_mean(&load_daily_series(fgi)?));
    }
    if let Some(sym) = &cfg.btc_symbol {
        let path = out.join("clean_panels").join(format!("{sym}.csv"));
        if path.is_file() {
            let (panel, _) = load_token_csv(&path)?;
            macros.insert(sym.clone(), btc_weekly_log_return(&panel)?);
        } else {
            warn!("features: {sym} is not among the cleaned tokens; its weekly return is left out");
        }
    }
    if macros.is_empty() {
        bail!("no macro series available");
    }
    Ok(macros)
}

fn features(cfg: &RunConfig, out: &Path) -> Result<()> {
    let macros = weekly_macros(cfg, out)?;
    write_weekly_macro(&out.join("weekly_macro.csv"), &macros)?;
    let targets = read_weekly_targets(&out.join("weekly_targets.csv"))?;
    let table = match &cfg.paths.stationarity {
        Some(p) => StationarityTable::from_csv(p)?,
        None => StationarityTable::default(),
    };
    let fc = cfg.feature_config();
    for (basket, t) in &targets {
        let tensor = build_tensor(basket, t, &macros, &table, &fc).with_context(|| format!("basket {basket}"))?;
        info!(
            "features: {basket}: {} weeks, t* = {}, {} features",
            tensor.rows(),
            tensor.meta.t_star,
            tensor.meta.features.len()
        );
        write_tensor(&out.join("tensor").join(basket), &tensor)?;
    }
    Ok(())
}

/// A tensor directory, or a directory of per-basket tensor directories.
pub fn tensor_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join("tensor_meta.json").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("tensor_meta.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no tensor_meta.json under {}", root.display());
    }
    Ok(dirs)
}

/// Stability selection for every tensor under `tensor_root`; writes
/// `stability_report.json` and `selected_features.json` into `out`.
pub fn select(tensor_root: &Path, out: &Path, cfg: &SelectionConfig, seed: u64) -> Result<()> {
    let mut reports: Vec<StabilityReport> = Vec::new();
    for dir in tensor_dirs(tensor_root)? {
        let tensor = read_tensor(&dir)?;
        let r = select_features(&tensor, cfg, seed).with_context(|| format!("basket {}", tensor.meta.basket))?;
        info!("select: {}: {} features selected", r.basket, r.union.len());
        reports.push(r);
    }
    let selected: Vec<SelectedFeatures> = reports.iter().map(StabilityReport::selected).collect();
    fs::create_dir_all(out)?;
    write_json(&out.join("stability_report.json"), &reports)?;
    write_json(&out.join("selected_features.json"), &selected)?;
    Ok(())
}

fn read_selected(path: &Path) -> Result<Vec<SelectedFeatures>> {
    let v: serde_json::Value = read_json(path)?;
    Ok(if v.is_array() {
        serde_json::from_value(v)?
    } else {
        vec![serde_json::from_value(v)?]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub reference: Option<String>,
    pub summary: Option<AgreementSummary>,
}

/// Local projections for every tensor under `tensor_root` using the union of
/// its selected features. With `compare`, the foreign surface is the first
/// argument of the agreement summary.
pub fn irf(
    tensor_root: &Path,
    features: &Path,
    out: &Path,
    cfg: &LpConfig,
    seed: u64,
    compare: Option<&Path>,
) -> Result<()> {
    let selected = read_selected(features)?;
    let mut surfaces = Vec::new();
    for dir in tensor_dirs(tensor_root)? {
        let tensor = read_tensor(&dir)?;
        let basket = &tensor.meta.basket;
        let sel = selected
            .iter()
            .find(|s| &s.basket == basket)
            .ok_or_else(|| anyhow!("{} has no selection for basket {basket}", features.display()))?;
        let s = lp::estimate_surface(&tensor, &sel.union, cfg, seed).with_context(|| format!("basket {basket}"))?;
        if s.ridge_replicates > 0 {
            warn!("irf: {basket}: {} bootstrap replicates needed the ridge", s.ridge_replicates);
        }
        surfaces.push(s);
    }
    let rows = surface_rows(&surfaces);
    fs::create_dir_all(out)?;
    write_surface_csv(&out.join("irf_surface.csv"), &rows)?;
    write_json(&out.join("irf_detail.json"), &surfaces)?;
    write_json(&out.join("rankings.json"), &rank_effects(&surfaces))?;
    let agreement = match compare {
        Some(p) => Agreement {
            reference: p.file_name().map(|s| s.to_string_lossy().into_owned()),
            summary: Some(compare_surfaces(&read_surface_csv(p)?, &rows)?),
        },
        None => Agreement {
            reference: None,
            summary: None,
        },
    };
    write_json(&out.join("agreement.json"), &agreement)?;
    Ok(())
}

fn report(cfg: &RunConfig, out: &Path) -> Result<ReportBundle> {
    let dir = out.join("report");
    fs::create_dir_all(&dir)?;
    let rows: Vec<OverallRow> = read_json(&out.join("metrics_overall.json"))?;
    let mut figures = Vec::new();
    for layout in [ChartLayout::TailRisk, ChartLayout::Upside] {
        let stem = layout.slug();
        emit_bubble_chart(&dir, stem, &rows, layout)?;
        figures.push(FigureFiles {
            svg: format!("report/{stem}.svg"),
            csv: format!("report/{stem}.csv"),
        });
    }
    write_overall_csv(&dir.join("metrics_overall.csv"), &rows)?;
    let surface = read_surface_csv(&out.join("irf_surface.csv"))?;
    let significant: Vec<_> = surface.iter().filter(|r| r.significant).cloned().collect();
    write_surface_csv(&dir.join("irf_significant.csv"), &significant)?;
    let bundle = ReportBundle {
        tool_version: TOOL_VERSION.into(),
        core_version: hodl_core::VERSION.into(),
        config_hash: cfg.hash(),
        seeds: cfg.seeds,
        metric_tables: vec!["report/metrics_overall.csv".into(), "metrics_weekly.csv".into()],
        figures,
        irf_tables: vec!["report/irf_significant.csv".into(), "irf_surface.csv".into()],
        stages: Vec::new(),
    };
    write_json(&dir.join("bundle.json"), &bundle)?;
    Ok(bundle)
}
