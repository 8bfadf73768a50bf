//! Batch runner: parses a model description, runs the selected analyses and
//! writes one report per analysis plus a summary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::Context;
use leafwise::derham::{self, IdentityCheck};
use leafwise::gysin::product_splitting_dims;
use leafwise::hochschild::{e1_to_e2, hh_report};
use leafwise::model::{Base, Component, Family, ModeWindow, Model, ModelSpec};
use leafwise::poisson::{self, HomologyKind};
use leafwise::specseq::verify_poisson_collapse;
use leafwise::symbols::{verify_traces_and_collapse, SymbolsConfig};
use leafwise::Error;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub mod render;

pub const SCHEMA_VERSION: &str = "leafwise-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Derham,
    Poisson,
    Gysin,
    Specseq,
    Hochschild,
    Symbols,
}

impl Analysis {
    pub const ALL: [Analysis; 6] = [
        Analysis::Derham,
        Analysis::Poisson,
        Analysis::Gysin,
        Analysis::Specseq,
        Analysis::Hochschild,
        Analysis::Symbols,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Derham => "derham",
            Analysis::Poisson => "poisson",
            Analysis::Gysin => "gysin",
            Analysis::Specseq => "specseq",
            Analysis::Hochschild => "hochschild",
            Analysis::Symbols => "symbols",
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Analysis {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        Analysis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            anyhow::anyhow!(
                "unknown analysis {s:?}; expected one of derham, poisson, gysin, specseq, hochschild, symbols, all"
            )
        })
    }
}

/// Parses a comma-separated analysis list; `all` expands to every analysis.
pub fn parse_analyses(list: &str) -> anyhow::Result<(Vec<Analysis>, bool)> {
    let mut out = Vec::new();
    let mut all = false;
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            all = true;
            out.extend(Analysis::ALL);
        } else {
            out.push(part.parse()?);
        }
    }
    out.sort();
    out.dedup();
    anyhow::ensure!(!out.is_empty(), "no analyses selected");
    Ok((out, all))
}

/// Parses `a:b` into an inclusive homogeneity range.
pub fn parse_range(s: &str) -> anyhow::Result<(i64, i64)> {
    let (a, b) = s.split_once(':').with_context(|| format!("expected a:b, got {s:?}"))?;
    let a: i64 = a.trim().parse().with_context(|| format!("bad lower end in {s:?}"))?;
    let b: i64 = b.trim().parse().with_context(|| format!("bad upper end in {s:?}"))?;
    anyhow::ensure!(a <= b, "empty range {s:?}");
    Ok((a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Markdown,
    Csv,
}

impl FromStr for Format {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            _ => anyhow::bail!("unknown format {s:?}; expected json, markdown or csv"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model_path: PathBuf,
    pub analyses: Vec<Analysis>,
    /// Unsupported analyses are skipped instead of rejected (set by `all`).
    pub skip_unsupported: bool,
    pub window: ModeWindow,
    pub depth: usize,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: Format,
    /// Replace the symbol product by a corrupted one (negative control).
    pub corrupt_composition: bool,
}

impl RunConfig {
    pub fn new(model_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            model_path: model_path.into(),
            analyses: Analysis::ALL.to_vec(),
            skip_unsupported: true,
            window: ModeWindow { bound: 2, l_min: -2, l_max: 2 },
            depth: 12,
            trials: 100,
            seed: 0,
            out_dir: out_dir.into(),
            format: Format::Json,
            corrupt_composition: false,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.analyses.is_empty(), "no analyses selected");
        anyhow::ensure!(self.window.bound >= 1, "the mode bound must be positive");
        anyhow::ensure!(self.window.l_min <= self.window.l_max, "empty homogeneity range");
        anyhow::ensure!(self.trials >= 1, "at least one trial is required");
        Ok(())
    }
}

/// Failures that map to distinct exit codes.
#[derive(Debug)]
pub enum RunError {
    /// Malformed or invalid model description.
    Spec(String),
    /// The model cannot carry a requested analysis.
    Capability(String),
    /// Anything else (I/O, truncation, internal).
    Other(anyhow::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Spec(m) => write!(f, "model spec error: {m}"),
            RunError::Capability(m) => write!(f, "capability error: {m}"),
            RunError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Spec(_) => 2,
            RunError::Capability(_) => 3,
            RunError::Other(_) => 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub schema_version: &'static str,
    pub analysis: Analysis,
    pub model: ModelSpec,
    /// Library operations that produced the numbers below.
    pub operations: Vec<&'static str>,
    pub parameters: Value,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub data: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisSummary {
    pub analysis: Analysis,
    /// "passed", "failed" or "skipped".
    pub outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_checks: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema_version: &'static str,
    pub model: ModelSpec,
    pub family: Family,
    /// "smooth" or "formal (non-Diophantine)".
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<derham::DiophantineCertificate>,
    pub parameters: Value,
    pub analyses: Vec<AnalysisSummary>,
    pub dimension_tables: serde_json::Map<String, Value>,
    pub identity_suites: serde_json::Map<String, Value>,
    /// Collapse of the Hochschild spectral sequence at the second page,
    /// when the symbol analysis ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collapse_certificate: Option<bool>,
    pub all_checks_passed: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// Nonzero exactly when an exact check failed.
    pub fn exit_code(&self) -> i32 {
        if self.summary.all_checks_passed {
            0
        } else {
            1
        }
    }
}

/// Reads and validates a model description, reporting the location of
/// syntax errors.
pub fn load_model(path: &Path) -> Result<(ModelSpec, Arc<Model>), RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Other(anyhow::anyhow!("cannot read {}: {e}", path.display())))?;
    let spec = ModelSpec::from_json(&text).map_err(|e| match e {
        Error::Parse { location, message } => RunError::Spec(format!("{}:{location}: {message}", path.display())),
        other => RunError::Spec(format!("{}: {other}", path.display())),
    })?;
    let model = Model::from_spec(&spec).map_err(|e| RunError::Spec(format!("{}: {e}", path.display())))?;
    Ok((spec, model))
}

struct Output {
    operations: Vec<&'static str>,
    checks: Vec<CheckOutcome>,
    data: Value,
    tables: Vec<(String, Value)>,
    suites: Vec<(String, Value)>,
    collapse: Option<bool>,
}

impl Output {
    fn new(operations: Vec<&'static str>) -> Output {
        Output {
            operations,
            checks: Vec::new(),
            data: json!({}),
            tables: Vec::new(),
            suites: Vec::new(),
            collapse: None,
        }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool) {
        self.checks.push(CheckOutcome { name: name.into(), passed });
    }

    fn identity(&mut self, prefix: &str, c: &IdentityCheck) {
        self.check(format!("{prefix}: {}", c.name), c.passed);
    }
}

fn to_value<T: Serialize>(x: &T) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn lift(e: Error) -> anyhow::Error {
    anyhow::Error::new(e)
}

/// The conic dual carrying the Poisson structure, built from the base when needed.
fn poisson_model(model: &Arc<Model>) -> leafwise::Result<Arc<Model>> {
    if model.xi_generator().is_some() && model.leaf_dim() == 2 && model.family() == Family::ConicDual {
        return Ok(model.clone());
    }
    match model.family() {
        Family::KroneckerTorus | Family::LieFrame => Model::conic_dual(model),
        _ => Model::conic_dual(&model.base_model()),
    }
}

fn torus_base(model: &Arc<Model>, what: &str) -> leafwise::Result<Arc<Model>> {
    let base = model.base_model();
    if base.family() != Family::KroneckerTorus {
        return Err(Error::UnsupportedModel(format!("{what} is available for Kronecker torus bases only")));
    }
    Ok(base)
}

fn run_derham(model: &Arc<Model>, cfg: &RunConfig) -> anyhow::Result<Output> {
    let mut out = Output::new(vec![
        "derham::cohomology_dims",
        "derham::basic_cohomology_dims",
        "derham::ordinary_derham_dims",
        "derham::verify_decomposition_identities",
    ]);
    let w = cfg.window;
    let leafwise = derham::cohomology_dims(model, Component::DF, &w).map_err(lift)?;
    let total = derham::cohomology_dims(model, Component::D, &w).map_err(lift)?;
    let basic = match model.family() {
        Family::KroneckerTorus | Family::LieFrame => Some(derham::basic_cohomology_dims(model, &w).map_err(lift)?),
        _ => None,
    };
    let ordinary = derham::ordinary_derham_dims(model).ok();
    let ids = derham::verify_decomposition_identities(model, cfg.trials.min(64), cfg.seed);
    for c in &ids.checks {
        out.identity("decomposition", c);
    }
    out.tables.push(("derham.leafwise".into(), to_value(&leafwise.dims)?));
    out.tables.push(("derham.total".into(), to_value(&total.dims)?));
    if let Some(b) = &basic {
        out.tables.push(("derham.basic".into(), to_value(&b.dims)?));
    }
    out.suites.push(("decomposition".into(), json!(ids.all_passed())));
    out.data = json!({
        "leafwise": leafwise,
        "total": total,
        "basic": basic,
        "ordinary_betti": ordinary,
        "identities": ids,
    });
    Ok(out)
}

fn run_poisson(model: &Arc<Model>, cfg: &RunConfig) -> anyhow::Result<Output> {
    let mut out = Output::new(vec![
        "poisson::verify_star_delta_identity",
        "poisson::verify_bracket_expansion",
        "poisson::homogeneous_poisson_dims",
        "poisson::verify_hom_can",
    ]);
    let x = poisson_model(model).map_err(lift)?;
    let w = cfg.window;
    let ids = poisson::verify_star_delta_identity(&x, &w).map_err(lift)?;
    for c in &ids.checks {
        out.identity("star and delta", c);
    }
    let bracket = poisson::verify_bracket_expansion(&x, cfg.trials.min(64), cfg.seed).map_err(lift)?;
    out.identity("bracket", &bracket);
    let top = x.num_generators() as i64;
    let dims: Vec<poisson::PoissonDim> = (0..=top)
        .flat_map(|k| (w.l_min..=w.l_max).map(move |l| (k, l)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, l)| poisson::homogeneous_poisson_dims(&x, HomologyKind::Delta, k, l, &w))
        .collect::<leafwise::Result<_>>()
        .map_err(lift)?;
    let hom_can = if x.base_model().family() == Family::KroneckerTorus {
        let r = poisson::verify_hom_can(&x, &w).map_err(lift)?;
        out.check("homogeneous homology matches the shifted cosphere cohomology", r.all_agree);
        out.check("homogeneous homology vanishes outside the cosphere range", r.vanishing_outside);
        Some(r)
    } else {
        None
    };
    out.tables.push(("poisson.delta_homology".into(), to_value(&dims)?));
    out.suites.push(("star_delta".into(), json!(ids.all_passed())));
    out.suites.push(("bracket".into(), json!(bracket.passed)));
    out.data = json!({
        "conic_family": x.family(),
        "identities": ids,
        "bracket": bracket,
        "delta_homology": dims,
        "hom_can": hom_can,
    });
    Ok(out)
}

fn run_gysin(model: &Arc<Model>, cfg: &RunConfig) -> anyhow::Result<Output> {
    let mut out = Output::new(vec!["gysin::product_splitting_dims"]);
    let base = torus_base(model, "the product splitting").map_err(lift)?;
    let w = ModeWindow::modes(cfg.window.bound);
    let q = base.codim() as i64;
    let tables: Vec<_> = (0..=q)
        .into_par_iter()
        .map(|h| product_splitting_dims(&base, 1, h, &w))
        .collect::<leafwise::Result<_>>()
        .map_err(lift)?;
    for t in &tables {
        out.check(format!("splitting at transverse degree {}", t.h), t.all_passed());
        for c in &t.maps {
            out.identity(&format!("maps at transverse degree {}", t.h), c);
        }
    }
    out.tables.push(("gysin.splitting".into(), to_value(&tables.iter().map(|t| &t.rows).collect::<Vec<_>>())?));
    out.data = json!({ "fiber": "S^1", "tables": tables });
    Ok(out)
}

fn run_specseq(model: &Arc<Model>, cfg: &RunConfig) -> anyhow::Result<Output> {
    let mut out =
        Output::new(vec!["specseq::poisson_filtration", "specseq::pages", "specseq::verify_poisson_collapse"]);
    let x = poisson_model(model).map_err(lift)?;
    let w = cfg.window;
    let reports: Vec<_> = (0..=x.num_generators() as i64)
        .into_par_iter()
        .map(|k| verify_poisson_collapse(&x, k, &w))
        .collect::<leafwise::Result<_>>()
        .map_err(lift)?;
    for r in &reports {
        out.check(format!("single-row collapse in degree {}", r.k), r.passed());
    }
    out.tables.push(("specseq.limit".into(), to_value(&reports)?));
    out.data = json!({ "collapse": reports });
    Ok(out)
}

fn run_hochschild(model: &Arc<Model>, cfg: &RunConfig) -> anyhow::Result<Output> {
    let mut out = Output::new(vec!["hochschild::hh_report", "hochschild::e1_to_e2"]);
    let base = torus_base(model, "the Hochschild prediction").map_err(lift)?;
    let rep = hh_report(&base, cfg.window.bound).map_err(lift)?;
    let p = base.leaf_dim() as i64;
    let ew =
        ModeWindow { bound: cfg.window.bound.min(1), l_min: cfg.window.l_min.min(-p), l_max: cfg.window.l_max.max(p) };
    let bridge = e1_to_e2(&base, &ew).map_err(lift)?;
    out.check("HH_k equals the antidiagonal sums of E^2", rep.consistent());
    out.check("E^2 from delta-homology equals the closed form", bridge.agree);
    out.tables.push(("hochschild.hh".into(), to_value(&rep.hh)?));
    out.tables.push(("hochschild.hp".into(), to_value(&rep.hp)?));
    out.tables.push(("hochschild.e2".into(), to_value(&rep.e2)?));
    out.data = json!({ "prediction": rep, "e1_to_e2": bridge });
    Ok(out)
}

fn run_symbols(model: &Arc<Model>, cfg: &RunConfig) -> anyhow::Result<Output> {
    let mut out = Output::new(vec![
        "symbols::compose",
        "symbols::residue_trace",
        "symbols::apply_derivation",
        "symbols::cocycle_evaluate",
        "symbols::verify_traces_and_collapse",
        "hochschild::hh_dims_assuming_collapse",
    ]);
    let base = torus_base(model, "the symbol calculus").map_err(lift)?;
    if !base.resonance_lattice().is_empty() {
        return Err(lift(Error::UnsupportedModel("the symbol calculus needs non-resonant frequencies".into())));
    }
    let sc = SymbolsConfig {
        trials: cfg.trials,
        depth: cfg.depth,
        seed: cfg.seed,
        mode_bound: cfg.window.bound,
        corrupt: cfg.corrupt_composition,
    };
    let rep = verify_traces_and_collapse(&base, &sc).map_err(lift)?;
    for c in &rep.checks {
        out.identity("symbols", c);
    }
    for r in &rep.independence {
        out.check(format!("cocycles of degree {} are independent", r.l), r.rank == r.cocycles);
    }
    out.check("tau_+ and tau_- span a space of dimension HH_0", rep.traces_match_hh0);
    out.check("cocycle counts match the predicted Hochschild dimensions", rep.collapse_certified);
    out.collapse = Some(rep.collapse_certified);
    out.tables.push(("symbols.independence".into(), to_value(&rep.independence)?));
    out.suites.push(("symbols".into(), json!(rep.checks.iter().all(|c| c.passed))));
    out.data = to_value(&rep)?;
    Ok(out)
}

fn run_one(a: Analysis, model: &Arc<Model>, cfg: &RunConfig) -> anyhow::Result<Output> {
    match a {
        Analysis::Derham => run_derham(model, cfg),
        Analysis::Poisson => run_poisson(model, cfg),
        Analysis::Gysin => run_gysin(model, cfg),
        Analysis::Specseq => run_specseq(model, cfg),
        Analysis::Hochschild => run_hochschild(model, cfg),
        Analysis::Symbols => run_symbols(model, cfg),
    }
}

fn capability_of(e: &anyhow::Error) -> Option<String> {
    match e.downcast_ref::<Error>() {
        Some(Error::UnsupportedModel(m)) => Some(m.clone()),
        _ => None,
    }
}

fn certificate(model: &Model) -> Option<derham::DiophantineCertificate> {
    match model.base_model().base() {
        Base::Torus(t) => derham::diophantine_certificate(&t.alpha).ok(),
        Base::Lie(_) => None,
    }
}

fn parameters(cfg: &RunConfig) -> Value {
    json!({
        "mode_bound": cfg.window.bound,
        "xi_range": [cfg.window.l_min, cfg.window.l_max],
        "depth": cfg.depth,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "corrupt_composition": cfg.corrupt_composition,
    })
}

/// Runs the configured analyses and writes the reports.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    cfg.validate().map_err(RunError::Other)?;
    let (spec, model) = load_model(&cfg.model_path)?;
    let results: Vec<(Analysis, anyhow::Result<Output>)> =
        cfg.analyses.par_iter().map(|&a| (a, run_one(a, &model, cfg))).collect();

    let cert = certificate(&model);
    let status = match &cert {
        Some(c) if !c.is_diophantine() => "formal (non-Diophantine)".to_string(),
        _ => "smooth".to_string(),
    };
    let params = parameters(cfg);
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| RunError::Other(anyhow::anyhow!("cannot create {}: {e}", cfg.out_dir.display())))?;

    let mut files = Vec::new();
    let mut analyses = Vec::new();
    let mut tables = serde_json::Map::new();
    let mut suites = serde_json::Map::new();
    let mut collapse = None;
    for (a, res) in results {
        let o = match res {
            Ok(o) => o,
            Err(e) => match capability_of(&e) {
                Some(reason) if cfg.skip_unsupported => {
                    analyses.push(AnalysisSummary {
                        analysis: a,
                        outcome: "skipped",
                        reason: Some(reason),
                        failed_checks: Vec::new(),
                        report: None,
                    });
                    continue;
                }
                Some(reason) => return Err(RunError::Capability(format!("{a}: {reason}"))),
                None => return Err(RunError::Other(e.context(format!("analysis {a} failed")))),
            },
        };
        let passed = o.checks.iter().all(|c| c.passed);
        let failed: Vec<String> = o.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        let report = AnalysisReport {
            schema_version: SCHEMA_VERSION,
            analysis: a,
            model: spec.clone(),
            operations: o.operations,
            parameters: params.clone(),
            passed,
            checks: o.checks,
            data: o.data,
        };
        let value = serde_json::to_value(&report).map_err(|e| RunError::Other(e.into()))?;
        files.extend(write_report(&cfg.out_dir, a.name(), &value, cfg.format)?);
        for (k, v) in o.tables {
            tables.insert(k, v);
        }
        for (k, v) in o.suites {
            suites.insert(k, v);
        }
        collapse = collapse.or(o.collapse);
        analyses.push(AnalysisSummary {
            analysis: a,
            outcome: if passed { "passed" } else { "failed" },
            reason: None,
            failed_checks: failed,
            report: Some(format!("{}.json", a.name())),
        });
    }
    let all_checks_passed = analyses.iter().all(|s| s.outcome != "failed");
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        model: spec,
        family: model.family(),
        status,
        certificate: cert,
        parameters: params,
        analyses,
        dimension_tables: tables,
        identity_suites: suites,
        collapse_certificate: collapse,
        all_checks_passed,
    };
    let value = serde_json::to_value(&summary).map_err(|e| RunError::Other(e.into()))?;
    files.extend(write_report(&cfg.out_dir, "summary", &value, cfg.format)?);
    Ok(RunOutcome { summary, files })
}

fn write_report(dir: &Path, stem: &str, value: &Value, format: Format) -> Result<Vec<PathBuf>, RunError> {
    let io = |p: &Path, e: std::io::Error| RunError::Other(anyhow::anyhow!("cannot write {}: {e}", p.display()));
    let mut written = Vec::new();
    let path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Other(e.into()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    written.push(path);
    let extra = match format {
        Format::Json => None,
        Format::Markdown => Some(("md", render::markdown(stem, value))),
        Format::Csv => Some(("csv", render::csv(value).map_err(RunError::Other)?)),
    };
    if let Some((ext, body)) = extra {
        let path = dir.join(format!("{stem}.{ext}"));
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
