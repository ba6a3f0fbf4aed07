//! Run configuration, reports and snapshot persistence.
//!
//! A run directory holds `report.json` (config echo, verdicts, certificates
//! and the snapshot manifest) and one `snapshot_NNN.csv` per recorded time.
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::characteristics::{
    blowup_bounds_general, lipschitz_constant_general, one_sided_lipschitz_certificate_general, BlowupInterval,
    BundleOptions, CharacteristicBundle,
};
use crate::classify::{
    admissibility_gate, certify_runtime_region, classify_initial_data, region_bounds, Admissibility, ClassSummary,
    RegionBounds, RegionCertificate, DEFAULT_TOL_REGION_EXACT,
};
use crate::error::{CarrollError, Result};
use crate::gamma3::{
    one_sided_lipschitz_certificate_gamma3, predict_blowup_gamma3, BlowupReport, Gamma3Solution, LipschitzCertificate,
    Verdict,
};
use crate::initial_data::{read_tabulated_csv, InitialData, PresetSpec};
use crate::reference::{self, predicted_blowup_lower_bound, Boundary, Grid1D, RunOptions, DEFAULT_BLOWUP_MARGIN, DEFAULT_CFL};
use crate::state::{eigen, from_riemann, make_params, Family, GammaParams, RiemannState};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_FILE: &str = "report.json";
pub const SNAPSHOT_HEADER: [&str; 7] = ["x", "sigma", "beta", "w1", "w2", "lambda1", "lambda2"];
pub const DEFAULT_NX: usize = 800;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Preset { name: String, params: BTreeMap<String, f64> },
    File { path: PathBuf },
}

impl DataSource {
    pub fn load(&self) -> Result<InitialData> {
        match self {
            DataSource::Preset { name, params } => {
                let mut spec = PresetSpec::new(name);
                for (k, v) in params {
                    spec = spec.with(k, *v);
                }
                spec.build()
            }
            DataSource::File { path } => read_tabulated_csv(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "exact3")]
    Exact3,
    #[serde(rename = "chars")]
    Characteristics,
    #[serde(rename = "grid")]
    Grid,
}

impl std::str::FromStr for SolverKind {
    type Err = CarrollError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact3" => Ok(SolverKind::Exact3),
            "chars" | "characteristics" => Ok(SolverKind::Characteristics),
            "grid" => Ok(SolverKind::Grid),
            other => Err(CarrollError::Config(format!("unknown solver {other:?}; expected exact3, chars or grid"))),
        }
    }
}

/// Sampling grid: cells for the grid solver, query points for the others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub cfl: f64,
    /// Defaults to the data's truncation interval.
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: DEFAULT_NX,
            cfl: DEFAULT_CFL,
            x_min: None,
            x_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub region: f64,
    pub blowup_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            region: DEFAULT_TOL_REGION_EXACT,
            blowup_margin: DEFAULT_BLOWUP_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gamma: f64,
    pub data: DataSource,
    pub solver: SolverKind,
    pub t_end: f64,
    /// Extra snapshot times in `(0, t_end)`; `0` and `t_end` are always recorded.
    pub snapshots: Vec<f64>,
    pub grid: GridSpec,
    pub out: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub allow_near_blowup: bool,
}

impl RunConfig {
    pub fn new(gamma: f64, data: DataSource) -> Self {
        Self {
            gamma,
            data,
            solver: SolverKind::Grid,
            t_end: 1.0,
            snapshots: Vec::new(),
            grid: GridSpec::default(),
            out: None,
            tolerances: Tolerances::default(),
            allow_near_blowup: false,
        }
    }

    pub fn params(&self) -> Result<GammaParams> {
        make_params(self.gamma).map_err(|e| CarrollError::Config(e.to_string()))
    }

    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<GammaParams> {
        let params = self.params()?;
        if self.solver == SolverKind::Exact3 && !params.is_gamma3() {
            return Err(CarrollError::Config(format!(
                "solver exact3 requires gamma = 3, got {}",
                self.gamma
            )));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(CarrollError::Config(format!("t_end={} must be finite and ≥ 0", self.t_end)));
        }
        if !(self.tolerances.region >= 0.0) {
            return Err(CarrollError::Config(format!("region tolerance {} must be ≥ 0", self.tolerances.region)));
        }
        if !(self.tolerances.blowup_margin >= 0.0 && self.tolerances.blowup_margin < 1.0) {
            return Err(CarrollError::Config(format!(
                "blow-up margin {} outside [0, 1)",
                self.tolerances.blowup_margin
            )));
        }
        Ok(params)
    }

    fn grid_for(&self, data: &InitialData) -> Result<Grid1D> {
        let (a, b) = data.truncation();
        Grid1D::new(
            self.grid.x_min.unwrap_or(a),
            self.grid.x_max.unwrap_or(b),
            self.grid.nx,
            self.grid.cfl,
        )
    }

    fn snapshot_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = std::iter::once(0.0)
            .chain(self.snapshots.iter().copied().filter(|&s| s > 0.0 && s < self.t_end))
            .chain(std::iter::once(self.t_end))
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Per-family earliest intervals for `γ < 3`; the full list is per sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralBlowupSummary {
    pub verdict: Verdict,
    pub bounds: RegionBounds,
    pub envelope: Option<[f64; 2]>,
    pub sharp_envelope: Option<[f64; 2]>,
    pub intervals_total: usize,
    pub earliest: Vec<BlowupInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlowupSection {
    Exact(BlowupReport),
    Bounds(GeneralBlowupSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotCertificate {
    pub t: f64,
    pub region: RegionCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Certificates {
    pub region: Vec<SnapshotCertificate>,
    pub lipschitz: Option<LipschitzCertificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub file: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub linf: f64,
    pub l1: f64,
}

/// Differences of one run against another at one time, per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDifferences {
    pub t: f64,
    pub fields: BTreeMap<String, Norms>,
}

impl FieldDifferences {
    pub fn max_linf(&self) -> f64 {
        self.fields.values().map(|n| n.linf).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub command: String,
    pub config: RunConfig,
    pub admissibility: Admissibility,
    pub classification: Option<ClassSummary>,
    pub blowup: Option<BlowupSection>,
    pub certificates: Certificates,
    pub snapshots: Vec<SnapshotEntry>,
    /// Grid solver at `γ = 3`: differences from the exact solution at `t_end`.
    pub exact_comparison: Option<FieldDifferences>,
    pub passed: bool,
}

fn blowup_section(data: &InitialData, params: &GammaParams) -> Result<BlowupSection> {
    if params.is_gamma3() {
        return Ok(BlowupSection::Exact(predict_blowup_gamma3(data)?));
    }
    let rep = blowup_bounds_general(data, params)?;
    let earliest = Family::BOTH.iter().filter_map(|&f| rep.earliest(f).copied()).collect();
    Ok(BlowupSection::Bounds(GeneralBlowupSummary {
        verdict: if rep.is_global() { Verdict::Global } else { Verdict::Blowup },
        bounds: rep.bounds,
        envelope: rep.envelope,
        sharp_envelope: rep.sharp_envelope,
        intervals_total: rep.intervals.len(),
        earliest,
    }))
}

/// Admissibility, classification and blow-up prediction; inadmissible data
/// is a verdict, not an error.
pub fn cmd_certify(config: &RunConfig) -> Result<RunReport> {
    let params = config.validate()?;
    let data = config.data.load()?;
    let bounds = region_bounds(&data, &params)?;
    let admissibility = admissibility_gate(&bounds, &params);
    let classification = Some(classify_initial_data(&data, &params)?);
    let blowup = if admissibility.admissible {
        Some(blowup_section(&data, &params)?)
    } else {
        None
    };
    let report = RunReport {
        tool_version: TOOL_VERSION.to_string(),
        command: "certify".into(),
        config: config.clone(),
        passed: admissibility.admissible,
        admissibility,
        classification,
        blowup,
        certificates: Certificates::default(),
        snapshots: Vec::new(),
        exact_comparison: None,
    };
    if let Some(dir) = &config.out {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join(REPORT_FILE), &to_json(&report)?)?;
    }
    Ok(report)
}

/// Runs the selected solver, writes snapshots and the report, and certifies
/// every snapshot. `passed` is false when any certificate fails.
pub fn cmd_simulate(config: &RunConfig) -> Result<RunReport> {
    let params = config.validate()?;
    let out = config
        .out
        .clone()
        .ok_or_else(|| CarrollError::Config("simulate needs an output directory".into()))?;
    let data = config.data.load()?;
    let bounds = region_bounds(&data, &params)?;
    let admissibility = admissibility_gate(&bounds, &params);
    admissibility.clone().into_result()?;
    let classification = Some(classify_initial_data(&data, &params)?);
    let blowup = Some(blowup_section(&data, &params)?);
    let grid = config.grid_for(&data)?;
    let xs = grid.centers();
    let times = config.snapshot_times();
    let t_end = config.t_end;

    if config.solver != SolverKind::Grid && !config.allow_near_blowup {
        if let Some(tb) = predicted_blowup_lower_bound(&data, &params)? {
            let limit = (1.0 - config.tolerances.blowup_margin) * tb;
            if t_end > limit {
                return Err(CarrollError::Horizon { t: t_end, horizon: limit });
            }
        }
    }

    let mut exact_comparison = None;
    let fields: Vec<Vec<RiemannState>> = match config.solver {
        SolverKind::Exact3 => {
            let sol = Gamma3Solution::new(&data)?;
            times.iter().map(|&t| sol.evaluate(t, &xs)).collect::<Result<_>>()?
        }
        SolverKind::Characteristics => {
            let bundle = CharacteristicBundle::build(&data, &params, t_end, BundleOptions::default())?;
            times.iter().map(|&t| bundle.field(t, &xs)).collect::<Result<_>>()?
        }
        SolverKind::Grid => {
            let opts = RunOptions {
                boundary: Boundary::FarfieldConstant,
                tol_region: config.tolerances.region,
                allow_near_blowup: config.allow_near_blowup,
                blowup_margin: config.tolerances.blowup_margin,
            };
            let sol = reference::run(&data, &grid, t_end, &times, &params, opts)?;
            if params.is_gamma3() {
                let exact = Gamma3Solution::new(&data)?;
                if t_end < exact.horizon() {
                    let e = exact.evaluate(t_end, &xs)?;
                    let last = sol.fields.last().expect("run records t_end");
                    exact_comparison = Some(field_differences(t_end, &xs, last, &xs, &e, &params)?);
                }
            }
            sol.fields
        }
    };

    let region: Vec<SnapshotCertificate> = times
        .iter()
        .zip(&fields)
        .map(|(&t, f)| SnapshotCertificate {
            t,
            region: certify_runtime_region(&xs, f, &bounds, &params, config.tolerances.region),
        })
        .collect();
    let lipschitz = if t_end > 0.0 {
        Some(match config.solver {
            SolverKind::Exact3 => one_sided_lipschitz_certificate_gamma3(&data, t_end, &xs)?,
            SolverKind::Characteristics => one_sided_lipschitz_certificate_general(&data, &params, t_end)?,
            SolverKind::Grid => discrete_lipschitz(&xs, fields.last().expect("t_end recorded"), &bounds, &params, t_end),
        })
    } else {
        None
    };

    fs::create_dir_all(&out)?;
    let mut snapshots = Vec::with_capacity(times.len());
    for (k, (&t, f)) in times.iter().zip(&fields).enumerate() {
        let file = format!("snapshot_{k:03}.csv");
        write_snapshot(&out.join(&file), &xs, f, &params)?;
        snapshots.push(SnapshotEntry { t, file, rows: xs.len() });
    }
    let passed = region.iter().all(|c| c.region.passed) && lipschitz.as_ref().is_none_or(|c| c.passed);
    let report = RunReport {
        tool_version: TOOL_VERSION.to_string(),
        command: "simulate".into(),
        config: config.clone(),
        admissibility,
        classification,
        blowup,
        certificates: Certificates { region, lipschitz },
        snapshots,
        exact_comparison,
        passed,
    };
    write_atomic(&out.join(REPORT_FILE), &to_json(&report)?)?;
    Ok(report)
}

/// One-sided Lipschitz check on forward differences of a grid snapshot.
pub fn discrete_lipschitz(
    xs: &[f64],
    field: &[RiemannState],
    bounds: &RegionBounds,
    params: &GammaParams,
    t: f64,
) -> LipschitzCertificate {
    let constant = if params.is_gamma3() {
        // sup(σ₀ + |β₀|)² over the box: σ + |β| = max(w₁, −w₂)
        bounds.M1.max(-bounds.m2).powi(2)
    } else {
        lipschitz_constant_general(bounds, params)
    };
    let bound = -constant / t;
    let mut cert = LipschitzCertificate {
        passed: true,
        t,
        constant,
        bound,
        min_derivative: [f64::INFINITY; 2],
        worst_x: f64::NAN,
        worst_family: Family::One,
        samples: xs.len().saturating_sub(1),
    };
    let mut worst = f64::INFINITY;
    for i in 0..xs.len().saturating_sub(1) {
        let h = xs[i + 1] - xs[i];
        for family in Family::BOTH {
            let d = (family.carried(field[i + 1]) - family.carried(field[i])) / h;
            let slot = &mut cert.min_derivative[family.index()];
            *slot = slot.min(d);
            if d < worst {
                worst = d;
                cert.worst_x = xs[i];
                cert.worst_family = family;
            }
        }
    }
    cert.passed = worst >= bound;
    cert
}

fn state_columns(rs: RiemannState, params: &GammaParams) -> Result<[f64; 6]> {
    let fs = from_riemann(rs, params)?;
    let e = eigen(fs, params)?;
    Ok([fs.sigma, fs.beta, rs.w1, rs.w2, e.lambda1, e.lambda2])
}

/// CSV with 12 significant digits.
pub fn write_snapshot(path: &Path, xs: &[f64], field: &[RiemannState], params: &GammaParams) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SNAPSHOT_HEADER)?;
    for (&x, &rs) in xs.iter().zip(field) {
        let cols = state_columns(rs, params)?;
        let row: Vec<String> = std::iter::once(x).chain(cols).map(|v| format!("{v:.11e}")).collect();
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CarrollError::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Rows of a snapshot: `x` followed by the six state columns.
pub fn read_snapshot(path: &Path) -> Result<Vec<[f64; 7]>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SNAPSHOT_HEADER {
        return Err(CarrollError::Data(format!(
            "{}: header {header:?} is not {SNAPSHOT_HEADER:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut row = [0.0; 7];
        for (slot, s) in row.iter_mut().zip(rec.iter()) {
            *slot = s
                .trim()
                .parse()
                .map_err(|_| CarrollError::Data(format!("{}: bad number {s:?}", path.display())))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes to `path.tmp` and renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// The parts of a stored report that comparisons rely on.
#[derive(Debug, Clone, Deserialize)]
pub struct StoredRun {
    pub config: RunConfig,
    pub snapshots: Vec<SnapshotEntry>,
    #[serde(skip)]
    pub dir: PathBuf,
}

pub fn load_run(dir: &Path) -> Result<StoredRun> {
    let text = fs::read(dir.join(REPORT_FILE))?;
    let mut run: StoredRun = serde_json::from_slice(&text)?;
    run.dir = dir.to_path_buf();
    Ok(run)
}

impl StoredRun {
    fn snapshot_at(&self, t: f64) -> Option<&SnapshotEntry> {
        self.snapshots.iter().find(|s| s.t == t)
    }

    fn rows(&self, entry: &SnapshotEntry) -> Result<Vec<[f64; 7]>> {
        read_snapshot(&self.dir.join(&entry.file))
    }

    /// Sample spacing of the final snapshot.
    fn dx(&self) -> Result<f64> {
        let last = self
            .snapshots
            .last()
            .ok_or_else(|| CarrollError::Data(format!("{}: run has no snapshots", self.dir.display())))?;
        let rows = self.rows(last)?;
        if rows.len() < 2 {
            return Err(CarrollError::Data(format!("{}: snapshot too short", self.dir.display())));
        }
        Ok((rows[rows.len() - 1][0] - rows[0][0]) / (rows.len() - 1) as f64)
    }
}

const FIELD_NAMES: [&str; 6] = ["sigma", "beta", "w1", "w2", "lambda1", "lambda2"];

fn interp_column(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let j = xs.partition_point(|&p| p <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    vs[j - 1] + (x - x0) / (x1 - x0) * (vs[j] - vs[j - 1])
}

/// Differences of `b` from `a` at `a`'s points inside `b`'s span; `b` is
/// interpolated linearly when the point sets differ.
fn row_differences(t: f64, a: &[[f64; 7]], b: &[[f64; 7]]) -> Result<FieldDifferences> {
    if a.len() < 2 || b.len() < 2 {
        return Err(CarrollError::Data("snapshots need at least two rows".into()));
    }
    let bx: Vec<f64> = b.iter().map(|r| r[0]).collect();
    let same_points = a.len() == b.len() && a.iter().zip(b).all(|(p, q)| p[0] == q[0]);
    let inside: Vec<&[f64; 7]> = a.iter().filter(|r| r[0] >= bx[0] && r[0] <= bx[bx.len() - 1]).collect();
    if inside.len() < 2 {
        return Err(CarrollError::Data("snapshots do not overlap".into()));
    }
    let mut fields = BTreeMap::new();
    for (c, name) in FIELD_NAMES.iter().enumerate() {
        let col = c + 1;
        let bv: Vec<f64> = b.iter().map(|r| r[col]).collect();
        let diffs: Vec<f64> = inside
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let other = if same_points { b[k][col] } else { interp_column(&bx, &bv, r[0]) };
                (r[col] - other).abs()
            })
            .collect();
        let linf = diffs.iter().copied().fold(0.0, f64::max);
        let l1 = diffs
            .windows(2)
            .zip(inside.windows(2))
            .map(|(d, r)| 0.5 * (d[0] + d[1]) * (r[1][0] - r[0][0]))
            .sum();
        fields.insert(name.to_string(), Norms { linf, l1 });
    }
    Ok(FieldDifferences { t, fields })
}

/// Per-field differences between two in-memory fields sampled at `xa` and `xb`.
pub fn field_differences(
    t: f64,
    xa: &[f64],
    a: &[RiemannState],
    xb: &[f64],
    b: &[RiemannState],
    params: &GammaParams,
) -> Result<FieldDifferences> {
    let rows = |xs: &[f64], f: &[RiemannState]| -> Result<Vec<[f64; 7]>> {
        xs.iter()
            .zip(f)
            .map(|(&x, &rs)| {
                let c = state_columns(rs, params)?;
                Ok([x, c[0], c[1], c[2], c[3], c[4], c[5]])
            })
            .collect()
    };
    row_differences(t, &rows(xa, a)?, &rows(xb, b)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    /// `"reference"` when errors are against a supplied reference run,
    /// `"self"` for successive differences of the runs themselves.
    pub basis: String,
    pub dx: Vec<f64>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: PathBuf,
    pub b: PathBuf,
    pub differences: Vec<FieldDifferences>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tool_version: String,
    pub pairs: Vec<PairComparison>,
    pub order: Option<OrderEstimate>,
}

fn same_problem(a: &RunConfig, b: &RunConfig) -> Result<()> {
    if a.gamma != b.gamma {
        return Err(CarrollError::Config(format!("gamma differs: {} vs {}", a.gamma, b.gamma)));
    }
    if a.data != b.data {
        return Err(CarrollError::Config("runs use different initial data".into()));
    }
    if a.t_end != b.t_end {
        return Err(CarrollError::Config(format!("horizons differ: {} vs {}", a.t_end, b.t_end)));
    }
    Ok(())
}

fn compare_pair(a: &StoredRun, b: &StoredRun) -> Result<PairComparison> {
    let mut differences = Vec::new();
    for ea in &a.snapshots {
        if let Some(eb) = b.snapshot_at(ea.t) {
            differences.push(row_differences(ea.t, &a.rows(ea)?, &b.rows(eb)?)?);
        }
    }
    Ok(PairComparison {
        a: a.dir.clone(),
        b: b.dir.clone(),
        differences,
    })
}

fn final_linf(p: &PairComparison) -> f64 {
    p.differences.last().map_or(f64::NAN, FieldDifferences::max_linf)
}

/// Compares runs of the same problem. With a reference every run is measured
/// against it; otherwise consecutive runs are paired. Three or more runs
/// yield observed orders `log(e_k/e_{k+1}) / log(dx_k/dx_{k+1})` from the
/// final-time `L∞` differences.
pub fn cmd_compare(runs: &[PathBuf], reference: Option<&Path>) -> Result<ComparisonReport> {
    let loaded: Vec<StoredRun> = runs.iter().map(|p| load_run(p)).collect::<Result<_>>()?;
    let reference = reference.map(load_run).transpose()?;
    let needed = if reference.is_some() { 1 } else { 2 };
    if loaded.len() < needed {
        return Err(CarrollError::Config(format!("compare needs at least {needed} runs")));
    }
    for r in loaded.iter().skip(1).chain(reference.iter()) {
        same_problem(&loaded[0].config, &r.config)?;
    }
    let pairs: Vec<PairComparison> = match &reference {
        Some(rf) => loaded.iter().map(|r| compare_pair(r, rf)).collect::<Result<_>>()?,
        None => loaded.windows(2).map(|w| compare_pair(&w[0], &w[1])).collect::<Result<_>>()?,
    };
    let order = if loaded.len() >= 3 {
        let dx: Vec<f64> = loaded.iter().map(StoredRun::dx).collect::<Result<_>>()?;
        let errors: Vec<f64> = pairs.iter().map(final_linf).collect();
        let (basis, steps): (&str, Vec<f64>) = match reference {
            Some(_) => ("reference", dx.clone()),
            None => ("self", dx[..dx.len() - 1].to_vec()),
        };
        let orders = errors
            .windows(2)
            .zip(steps.windows(2))
            .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
            .collect();
        Some(OrderEstimate {
            basis: basis.into(),
            dx,
            errors,
            orders,
        })
    } else {
        None
    };
    Ok(ComparisonReport {
        tool_version: TOOL_VERSION.to_string(),
        pairs,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset(name: &str) -> DataSource {
        DataSource::Preset {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    #[test]
    fn exact3_requires_gamma3() {
        let mut c = RunConfig::new(2.0, preset("constant"));
        c.solver = SolverKind::Exact3;
        assert!(matches!(c.validate(), Err(CarrollError::Config(_))));
        c.gamma = 3.0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn solver_names() {
        assert_eq!("exact3".parse::<SolverKind>().unwrap(), SolverKind::Exact3);
        assert_eq!("chars".parse::<SolverKind>().unwrap(), SolverKind::Characteristics);
        assert!("weno".parse::<SolverKind>().is_err());
        assert_eq!(serde_json::to_string(&SolverKind::Characteristics).unwrap(), "\"chars\"");
    }

    #[test]
    fn certify_constant_is_global() {
        let mut c = RunConfig::new(3.0, preset("constant"));
        c.data = DataSource::Preset {
            name: "constant".into(),
            params: BTreeMap::from([("sigma".to_string(), 2.0)]),
        };
        let r = cmd_certify(&c).unwrap();
        assert!(r.passed);
        match r.blowup {
            Some(BlowupSection::Exact(b)) => {
                assert_eq!(b.verdict, Verdict::Global);
                assert_eq!(b.t_star, None);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn snapshot_round_trip_keeps_twelve_digits() {
        let dir = tempfile::tempdir().unwrap();
        let p = make_params(2.0).unwrap();
        let xs = [0.0, 1.0 / 3.0];
        let f = [RiemannState::new(2.0, -1.0), RiemannState::new(std::f64::consts::PI, -1.0)];
        let path = dir.path().join("s.csv");
        write_snapshot(&path, &xs, &f, &p).unwrap();
        let rows = read_snapshot(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[1][0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((rows[1][3] - std::f64::consts::PI).abs() < 1e-11);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,sigma,beta,w1,w2,lambda1,lambda2\n"));
        assert!(!dir.path().join("s.csv.tmp").exists());
    }

    #[test]
    fn identical_rows_have_zero_difference() {
        let rows = vec![[0.0, 1.0, 0.5, 2.0, -1.0, -1.0, 1.0], [1.0, 1.1, 0.4, 2.1, -1.1, -0.9, 0.9]];
        let d = row_differences(1.0, &rows, &rows).unwrap();
        assert_eq!(d.max_linf(), 0.0);
        assert!(d.fields.values().all(|n| n.l1 == 0.0));
    }
}
