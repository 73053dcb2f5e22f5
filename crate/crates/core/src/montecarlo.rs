//! Replicated size/power experiments.
//!
//! Each `(dgp, T, replication)` work item simulates one series from its own
//! child stream and applies every requested test to that same series. A
//! replication rejects when `p < nominal_level`. Counts are reduced in a
//! fixed order, so a table is bit-identical for any thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{simulate, DgpSpec, MeanParams, TimeSeries, VarianceParams};
use crate::error::{Error, Result};
use crate::linearity::{run_test, BootstrapConfig, Method, MIN_TEST_LEN};
use crate::rng::{child_stream, derive_key, domain};
use crate::transition::TransitionParams;

pub const MIN_REPLICATIONS: usize = 100;
pub const DEFAULT_REPLICATIONS: usize = 10_000;
pub const DEFAULT_NOMINAL_LEVEL: f64 = 0.05;
/// Fresh child seeds tried after a replication fails.
pub const RETRY_BUDGET: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDgp {
    pub label: String,
    pub spec: DgpSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp_grid: Vec<LabeledDgp>,
    pub sample_sizes: Vec<usize>,
    pub tests: Vec<Method>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_nominal")]
    pub nominal_level: f64,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub master_seed: u64,
    /// Place every active transition threshold at `T / 2` for each `T`.
    #[serde(default = "default_true")]
    pub midpoint_threshold: bool,
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_nominal() -> f64 {
    DEFAULT_NOMINAL_LEVEL
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::InvalidParameter(format!(
                "replications must be >= {MIN_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        // 1.0 is admitted as a degenerate "always reject" level
        if !(self.nominal_level > 0.0 && self.nominal_level <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "nominal level must lie in (0, 1], got {}",
                self.nominal_level
            )));
        }
        if let Some(&t) = self.sample_sizes.iter().find(|&&t| t < MIN_TEST_LEN) {
            return Err(Error::InvalidParameter(format!(
                "sample sizes must be >= {MIN_TEST_LEN}, got {t}"
            )));
        }
        if self.tests.iter().any(|m| m.is_bootstrap()) {
            self.bootstrap.validate()?;
        }
        for (i, d) in self.dgp_grid.iter().enumerate() {
            if self.dgp_grid[..i].iter().any(|o| o.label == d.label) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate dgp label '{}'",
                    d.label
                )));
            }
            for &t in &self.sample_sizes {
                d.spec.resized(t, self.midpoint_threshold).validate()?;
            }
        }
        Ok(())
    }
}

/// A test applied inside an experiment: maps a series and a per-replication
/// seed to a p-value.
pub trait Procedure: Sync {
    fn label(&self) -> String;
    fn p_value(&self, series: &TimeSeries, seed: u64) -> Result<f64>;
}

struct MethodProcedure {
    method: Method,
    bootstrap: BootstrapConfig,
}

impl Procedure for MethodProcedure {
    fn label(&self) -> String {
        self.method.name().to_string()
    }

    fn p_value(&self, series: &TimeSeries, seed: u64) -> Result<f64> {
        let cfg = BootstrapConfig {
            seed,
            ..self.bootstrap
        };
        Ok(run_test(self.method, series, &cfg)?.p_value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub dgp: String,
    pub sample_size: usize,
    pub test: String,
}

impl CellKey {
    pub fn new(dgp: impl Into<String>, sample_size: usize, test: impl Into<String>) -> Self {
        Self {
            dgp: dgp.into(),
            sample_size,
            test: test.into(),
        }
    }
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, T={}, {})", self.dgp, self.sample_size, self.test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStats {
    pub rejections: u64,
    pub replications_used: u64,
}

impl CellStats {
    pub fn rejection_rate(&self) -> f64 {
        self.rejections as f64 / self.replications_used as f64
    }

    /// Binomial standard error `sqrt(r (1 - r) / R)`.
    pub fn monte_carlo_se(&self) -> f64 {
        let r = self.rejection_rate();
        (r * (1.0 - r) / self.replications_used as f64).sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RejectionTable {
    cells: BTreeMap<CellKey, CellStats>,
}

const LONG_HEADER: [&str; 7] = [
    "dgp",
    "T",
    "test",
    "rejection_rate",
    "rejections",
    "replications",
    "monte_carlo_se",
];

impl RejectionTable {
    pub fn insert(&mut self, key: CellKey, stats: CellStats) {
        self.cells.insert(key, stats);
    }

    pub fn get(&self, dgp: &str, sample_size: usize, test: &str) -> Option<&CellStats> {
        self.cells.get(&CellKey::new(dgp, sample_size, test))
    }

    /// Rejection rate of a cell, or `None` when absent.
    pub fn rate(&self, dgp: &str, sample_size: usize, test: &str) -> Option<f64> {
        self.get(dgp, sample_size, test).map(CellStats::rejection_rate)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &CellStats)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// One row per cell.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(LONG_HEADER).expect("in-memory write");
        for (k, s) in &self.cells {
            w.write_record([
                k.dgp.clone(),
                k.sample_size.to_string(),
                k.test.clone(),
                s.rejection_rate().to_string(),
                s.rejections.to_string(),
                s.replications_used.to_string(),
                s.monte_carlo_se().to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
        if header.iter().ne(LONG_HEADER.iter().copied()) {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut table = Self::default();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let num = |i: usize| -> Result<u64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer '{}'", &rec[i])))
            };
            let key = CellKey::new(&rec[0], num(1)? as usize, &rec[2]);
            let stats = CellStats {
                rejections: num(4)?,
                replications_used: num(5)?,
            };
            let rate: f64 = rec[3]
                .parse()
                .map_err(|_| Error::Parse(format!("bad rate '{}'", &rec[3])))?;
            if stats.replications_used == 0 || rate != stats.rejection_rate() {
                return Err(Error::Parse(format!("inconsistent rate for {key}")));
            }
            table.insert(key, stats);
        }
        Ok(table)
    }
}

/// Run with the tests named in `cfg.tests`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RejectionTable> {
    let procs: Vec<MethodProcedure> = cfg
        .tests
        .iter()
        .map(|&method| MethodProcedure {
            method,
            bootstrap: cfg.bootstrap,
        })
        .collect();
    let refs: Vec<&dyn Procedure> = procs.iter().map(|p| p as &dyn Procedure).collect();
    run_with_procedures(cfg, &refs)
}

/// `run_experiment` on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<RejectionTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

/// Run arbitrary procedures over the grid of `cfg`; `cfg.tests` is ignored.
pub fn run_with_procedures(
    cfg: &ExperimentConfig,
    procs: &[&dyn Procedure],
) -> Result<RejectionTable> {
    cfg.validate()?;
    let reps = cfg.replications;
    let items: Vec<(usize, usize, usize)> = (0..cfg.dgp_grid.len())
        .flat_map(|d| (0..cfg.sample_sizes.len()).flat_map(move |s| (0..reps).map(move |r| (d, s, r))))
        .collect();

    let outcomes: Vec<Result<Vec<bool>>> = items
        .par_iter()
        .map(|&(d, s, r)| replicate(cfg, procs, d, s, r))
        .collect();

    let mut counts = vec![0u64; cfg.dgp_grid.len() * cfg.sample_sizes.len() * procs.len()];
    for (&(d, s, _), outcome) in items.iter().zip(outcomes) {
        let flags = outcome?;
        let base = (d * cfg.sample_sizes.len() + s) * procs.len();
        for (j, rejected) in flags.into_iter().enumerate() {
            counts[base + j] += rejected as u64;
        }
    }

    let mut table = RejectionTable::default();
    for (d, dgp) in cfg.dgp_grid.iter().enumerate() {
        for (s, &t) in cfg.sample_sizes.iter().enumerate() {
            for (j, p) in procs.iter().enumerate() {
                let base = (d * cfg.sample_sizes.len() + s) * procs.len();
                table.insert(
                    CellKey::new(&dgp.label, t, p.label()),
                    CellStats {
                        rejections: counts[base + j],
                        replications_used: reps as u64,
                    },
                );
            }
        }
    }
    Ok(table)
}

fn replicate(
    cfg: &ExperimentConfig,
    procs: &[&dyn Procedure],
    d: usize,
    s: usize,
    r: usize,
) -> Result<Vec<bool>> {
    let t = cfg.sample_sizes[s];
    let spec = cfg.dgp_grid[d].spec.resized(t, cfg.midpoint_threshold);
    let mut last_err = None;
    for attempt in 0..=RETRY_BUDGET {
        let path = [d as u64, t as u64, r as u64, attempt];
        let run = || -> Result<Vec<bool>> {
            let mut rng = child_stream(
                cfg.master_seed,
                &[domain::SIMULATE, path[0], path[1], path[2], path[3]],
            );
            let series = simulate(&spec, &mut rng)?;
            procs
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    let seed = derive_key(
                        cfg.master_seed,
                        &[domain::BOOTSTRAP, path[0], path[1], path[2], path[3], j as u64],
                    );
                    Ok(p.p_value(&series, seed)? < cfg.nominal_level)
                })
                .collect()
        };
        match run() {
            Ok(flags) => return Ok(flags),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::ReplicationFailed {
        cell: format!("{}, T={}, replication {}", cfg.dgp_grid[d].label, t, r),
        reason: last_err.map(|e| e.to_string()).unwrap_or_default(),
    })
}

// ---------------------------------------------------------------------------
// Presets and rendering
// ---------------------------------------------------------------------------

pub const PRESET_SAMPLE_SIZES: [usize; 4] = [100, 200, 400, 1000];
const TV_PAIRS: [(f64, f64); 4] = [(0.0, 0.3), (0.0, 0.6), (0.5, 0.3), (1.0, 0.3)];
const GAMMAS: [f64; 2] = [0.01, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetTable {
    /// AR(1), homoskedastic: `beta0` in {0.3, 0.9}.
    Table1,
    /// Time-varying AR mean, homoskedastic.
    Table2,
    /// AR(1) with ARCH(1) errors: `b0` in {0.3, 0.6, 0.9}.
    Table3,
    /// AR(1) with time-varying ARCH(1) errors.
    Table4,
}

impl PresetTable {
    pub const ALL: [PresetTable; 4] = [Self::Table1, Self::Table2, Self::Table3, Self::Table4];

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Self::Table1),
            2 => Ok(Self::Table2),
            3 => Ok(Self::Table3),
            4 => Ok(Self::Table4),
            _ => Err(Error::InvalidParameter(format!("no preset table {k}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Self::Table1 => 1,
            Self::Table2 => 2,
            Self::Table3 => 3,
            Self::Table4 => 4,
        }
    }

    fn row_groups(self) -> Vec<String> {
        match self {
            Self::Table1 => vec!["beta0=0.3".into(), "beta0=0.9".into()],
            Self::Table2 => TV_PAIRS
                .iter()
                .map(|(a, b)| format!("alpha1={a},beta1={b}"))
                .collect(),
            Self::Table3 => [0.3, 0.6, 0.9].iter().map(|b| format!("b0={b}")).collect(),
            Self::Table4 => TV_PAIRS.iter().map(|(a, b)| format!("a1={a},b1={b}")).collect(),
        }
    }

    fn column_groups(self) -> Vec<String> {
        match self {
            Self::Table1 | Self::Table3 => vec![String::new()],
            Self::Table2 | Self::Table4 => GAMMAS.iter().map(|g| format!("gamma={g}")).collect(),
        }
    }

    fn title(self) -> &'static str {
        match self {
            Self::Table1 => "Table 1: rejection frequencies under AR with homoskedastic error",
            Self::Table2 => "Table 2: rejection frequencies under time-varying AR with homoskedastic error",
            Self::Table3 => "Table 3: rejection frequencies under AR with ARCH error",
            Self::Table4 => "Table 4: rejection frequencies under AR with time-varying ARCH error",
        }
    }

    /// The parameter grid, all sample sizes and all five tests.
    pub fn grid(self) -> Vec<LabeledDgp> {
        // thresholds are placeholders; midpoint placement sets c = T/2
        let placeholder = 1000;
        let labeled = |label: String, spec: DgpSpec| LabeledDgp { label, spec };
        match self {
            Self::Table1 => [0.3, 0.9]
                .iter()
                .map(|&b| labeled(format!("beta0={b}"), DgpSpec::ar_homoskedastic(1.0, b, placeholder)))
                .collect(),
            Self::Table2 => TV_PAIRS
                .iter()
                .flat_map(|&(a1, b1)| {
                    GAMMAS.iter().map(move |&g| {
                        let mean = MeanParams {
                            alpha1: a1,
                            beta1: b1,
                            transition: TransitionParams { gamma: g, c: 500.0 },
                            ..MeanParams::ar(1.0, 0.3)
                        };
                        labeled(
                            format!("alpha1={a1},beta1={b1},gamma={g}"),
                            DgpSpec::tv_mean(mean, placeholder),
                        )
                    })
                })
                .collect(),
            Self::Table3 => [0.3, 0.6, 0.9]
                .iter()
                .map(|&b0| {
                    labeled(format!("b0={b0}"), DgpSpec::ar_arch(1.0, 0.3, 1.0, b0, placeholder))
                })
                .collect(),
            Self::Table4 => TV_PAIRS
                .iter()
                .flat_map(|&(a1, b1)| {
                    GAMMAS.iter().map(move |&g| {
                        let var = VarianceParams {
                            a1,
                            b1,
                            transition: TransitionParams { gamma: g, c: 500.0 },
                            ..VarianceParams::arch(1.0, 0.3)
                        };
                        labeled(
                            format!("a1={a1},b1={b1},gamma={g}"),
                            DgpSpec::tv_arch(1.0, 0.3, var, placeholder),
                        )
                    })
                })
                .collect(),
        }
    }

    pub fn config(self, replications: usize, bootstrap: BootstrapConfig, master_seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            dgp_grid: self.grid(),
            sample_sizes: PRESET_SAMPLE_SIZES.to_vec(),
            tests: Method::TABLE.to_vec(),
            replications,
            nominal_level: DEFAULT_NOMINAL_LEVEL,
            bootstrap,
            master_seed,
            midpoint_threshold: true,
        }
    }

    pub fn layout(self) -> LayoutSpec {
        LayoutSpec {
            title: self.title().to_string(),
            row_groups: self.row_groups(),
            column_groups: self.column_groups(),
            sample_sizes: PRESET_SAMPLE_SIZES.to_vec(),
            methods: Method::TABLE.iter().map(|m| m.name().to_string()).collect(),
        }
    }
}

/// Row/column arrangement of a rendered table. The dgp label of a cell is
/// `row` when the column group is empty and `row,group` otherwise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayoutSpec {
    pub title: String,
    pub row_groups: Vec<String>,
    pub column_groups: Vec<String>,
    pub sample_sizes: Vec<usize>,
    pub methods: Vec<String>,
}

impl LayoutSpec {
    /// Rows follow the grid order, one unnamed column group.
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            title: "Rejection frequencies".into(),
            row_groups: cfg.dgp_grid.iter().map(|d| d.label.clone()).collect(),
            column_groups: vec![String::new()],
            sample_sizes: cfg.sample_sizes.clone(),
            methods: cfg.tests.iter().map(|m| m.name().to_string()).collect(),
        }
    }

    fn dgp_label(row: &str, group: &str) -> String {
        if group.is_empty() {
            row.to_string()
        } else {
            format!("{row},{group}")
        }
    }

    fn column_headers(&self) -> Vec<String> {
        self.column_groups
            .iter()
            .flat_map(|g| {
                self.methods.iter().map(move |m| {
                    if g.is_empty() {
                        m.clone()
                    } else {
                        format!("{g}:{m}")
                    }
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Preset(PresetTable),
    Custom(LayoutSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// `params,T,<method columns>` with full-precision rates.
    pub csv: String,
    /// Aligned text, rates to three decimals.
    pub text: String,
}

pub fn summarize(table: &RejectionTable, layout: &Layout) -> Result<Summary> {
    let spec = match layout {
        Layout::Preset(p) => p.layout(),
        Layout::Custom(s) => s.clone(),
    };

    let mut missing = Vec::new();
    let mut rows: Vec<(String, usize, Vec<f64>)> = Vec::new();
    for row in &spec.row_groups {
        for &t in &spec.sample_sizes {
            let mut rates = Vec::new();
            for group in &spec.column_groups {
                let dgp = LayoutSpec::dgp_label(row, group);
                for m in &spec.methods {
                    match table.rate(&dgp, t, m) {
                        Some(r) => rates.push(r),
                        None => missing.push(CellKey::new(&dgp, t, m).to_string()),
                    }
                }
            }
            rows.push((row.clone(), t, rates));
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteTable { missing });
    }

    let headers = spec.column_headers();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["params".to_string(), "T".to_string()];
    header.extend(headers.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (row, t, rates) in &rows {
        let mut rec = vec![row.clone(), t.to_string()];
        rec.extend(rates.iter().map(|r| r.to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    let csv = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv");

    let width = headers.iter().map(|h| h.len()).max().unwrap_or(0).max(6) + 2;
    let label_width = spec
        .row_groups
        .iter()
        .map(|r| r.len())
        .chain(std::iter::once(8))
        .max()
        .unwrap_or(8)
        + 2;
    let mut text = String::new();
    writeln!(text, "{}", spec.title).unwrap();
    write!(text, "{:label_width$}", "").unwrap();
    for h in &headers {
        write!(text, "{h:>width$}").unwrap();
    }
    text.push('\n');
    let mut current = None;
    for (row, t, rates) in &rows {
        if current != Some(row) {
            writeln!(text, "{row}").unwrap();
            current = Some(row);
        }
        write!(text, "{:label_width$}", format!("T={t}")).unwrap();
        for r in rates {
            write!(text, "{:>width$}", format!("{r:.3}")).unwrap();
        }
        text.push('\n');
    }
    Ok(Summary { csv, text })
}
