//! C¹ initial profiles `(σ₀, β₀)` on the real line.
//!
//! Data on ℝ is represented as an evaluable profile, a truncation interval
//! that is scanned for extrema, and the far-field limits at `±∞`. Presets are
//! analytic everywhere; tabulated data is a monotone cubic interpolant held
//! constant beyond its end samples.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CarrollError, Result};
use crate::state::{to_riemann, Family, FluidState, GammaParams, RiemannState};

pub const DEFAULT_X_MIN: f64 = -20.0;
pub const DEFAULT_X_MAX: f64 = 20.0;
pub const DEFAULT_SAMPLES: usize = 40_001;

/// Upper bound on `|Δ²f|/h²` accepted for tabulated profiles.
pub const DEFAULT_MAX_CURVATURE: f64 = 1e6;

/// Named preset and its parameters, as given on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl PresetSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn build(&self) -> Result<InitialData> {
        preset(&self.name, &self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Preset,
    Tabulated,
}

/// Limits of the data at `-∞` and `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    pub left: FluidState,
    pub right: FluidState,
}

#[derive(Debug, Clone)]
enum Profile {
    Constant { sigma: f64, beta: f64 },
    /// `β₀ = slope·arctan(x)`.
    Arctan { sigma: f64, slope: f64 },
    /// Constant `σ₀` and `β₀ = (mθ/2)·tanh(x)`, so that `w₁ ∈ (m, (1+θ)m)`
    /// and `w₂ ∈ (−(1+θ)m, −m)` when evaluated with the same `θ`.
    Remark { sigma: f64, amplitude: f64 },
    /// `β₀ = a·x·exp(−x²/s²)`.
    Gaussian { sigma: f64, a: f64, s: f64 },
    Tabulated { sigma: Pchip, beta: Pchip },
}

impl Profile {
    /// `(σ₀, σ₀ₓ, β₀, β₀ₓ)` at `x`.
    fn eval(&self, x: f64) -> (f64, f64, f64, f64) {
        match self {
            Profile::Constant { sigma, beta } => (*sigma, 0.0, *beta, 0.0),
            Profile::Arctan { sigma, slope } => {
                (*sigma, 0.0, slope * x.atan(), slope / (1.0 + x * x))
            }
            Profile::Remark { sigma, amplitude } => {
                let th = x.tanh();
                (*sigma, 0.0, amplitude * th, amplitude * (1.0 - th * th))
            }
            Profile::Gaussian { sigma, a, s } => {
                let g = (-(x * x) / (s * s)).exp();
                (*sigma, 0.0, a * x * g, a * g * (1.0 - 2.0 * x * x / (s * s)))
            }
            Profile::Tabulated { sigma, beta } => {
                let (s, sx) = sigma.eval(x);
                let (b, bx) = beta.eval(x);
                (s, sx, b, bx)
            }
        }
    }
}

/// Spatial derivatives of the data and of its Riemann invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeField {
    pub sigma_x: f64,
    pub beta_x: f64,
    pub w1_x: f64,
    pub w2_x: f64,
}

impl DerivativeField {
    /// `w_jₓ` for the invariant carried by `family`.
    pub fn invariant(&self, family: Family) -> f64 {
        match family {
            Family::One => self.w1_x,
            Family::Two => self.w2_x,
        }
    }
}

/// Immutable initial profile on ℝ.
#[derive(Debug, Clone)]
pub struct InitialData {
    kind: DataKind,
    label: String,
    profile: Profile,
    truncation: (f64, f64),
    samples: usize,
    farfield: FarField,
}

impl InitialData {
    pub fn kind(&self) -> DataKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn truncation(&self) -> (f64, f64) {
        self.truncation
    }

    pub fn farfield(&self) -> FarField {
        self.farfield
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    /// Spacing of the scan grid over the truncation interval.
    pub fn sample_spacing(&self) -> f64 {
        (self.truncation.1 - self.truncation.0) / (self.samples - 1) as f64
    }

    /// Uniform scan grid over the truncation interval, endpoints included.
    pub fn sample_points(&self) -> Vec<f64> {
        let (a, b) = self.truncation;
        let n = self.samples;
        (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect()
    }

    /// Same data scanned on a different grid.
    pub fn with_sampling(mut self, x_min: f64, x_max: f64, samples: usize) -> Result<Self> {
        if !(x_min < x_max) || samples < 2 {
            return Err(CarrollError::Data(format!(
                "bad truncation [{x_min}, {x_max}] with {samples} samples"
            )));
        }
        self.truncation = (x_min, x_max);
        self.samples = samples;
        self.validate()?;
        Ok(self)
    }

    pub fn state(&self, x: f64) -> FluidState {
        let (s, _, b, _) = self.profile.eval(x);
        FluidState::new(s, b)
    }

    pub fn riemann(&self, x: f64, params: &GammaParams) -> Result<RiemannState> {
        to_riemann(self.state(x), params)
    }

    pub fn derivative_field(&self, x: f64, params: &GammaParams) -> Result<DerivativeField> {
        derivative_field(self, x, params)
    }

    fn validate(&self) -> Result<()> {
        let check = |x: f64, st: FluidState| -> Result<()> {
            if !st.sigma.is_finite() || !st.beta.is_finite() {
                return Err(CarrollError::Data(format!("non-finite sample at x={x}")));
            }
            if st.sigma <= 0.0 {
                return Err(CarrollError::Data(format!(
                    "σ₀ must be positive, got σ₀({x})={}",
                    st.sigma
                )));
            }
            Ok(())
        };
        for x in self.sample_points() {
            check(x, self.state(x))?;
        }
        check(f64::NEG_INFINITY, self.farfield.left)?;
        check(f64::INFINITY, self.farfield.right)
    }
}

fn take(params: &BTreeMap<String, f64>, allowed: &[(&str, f64)]) -> Result<Vec<f64>> {
    for key in params.keys() {
        let known = allowed.iter().any(|(k, _)| k == key)
            || matches!(key.as_str(), "xmin" | "xmax" | "samples");
        if !known {
            return Err(CarrollError::Data(format!("unknown preset parameter '{key}'")));
        }
    }
    Ok(allowed
        .iter()
        .map(|(k, d)| params.get(*k).copied().unwrap_or(*d))
        .collect())
}

/// Builds one of the named presets.
///
/// | name | parameters (defaults) |
/// |------|-----------------------|
/// | `constant` | `sigma` (1), `beta` (0) |
/// | `arctan-compressive` | `sigma` (2), `eps` (0.1): `β₀ = eps·arctan x` |
/// | `arctan-rarefactive` | `sigma` (2), `eps` (0.1): `β₀ = −eps·arctan x` |
/// | `remark-family` | `m` (1), `theta` (0.5) |
/// | `gaussian-bump` | `sigma` (2), `a` (0.1), `s` (1): `β₀ = a·x·exp(−x²/s²)` |
///
/// Every preset also accepts `xmin`, `xmax` and `samples` for the scan grid.
pub fn preset(name: &str, params: &BTreeMap<String, f64>) -> Result<InitialData> {
    let (profile, farfield) = match name {
        "constant" => {
            let v = take(params, &[("sigma", 1.0), ("beta", 0.0)])?;
            let st = FluidState::new(v[0], v[1]);
            (
                Profile::Constant { sigma: v[0], beta: v[1] },
                FarField { left: st, right: st },
            )
        }
        "arctan-compressive" | "arctan-rarefactive" => {
            let v = take(params, &[("sigma", 2.0), ("eps", 0.1)])?;
            let slope = if name == "arctan-compressive" { v[1] } else { -v[1] };
            (
                Profile::Arctan { sigma: v[0], slope },
                FarField {
                    left: FluidState::new(v[0], -slope * FRAC_PI_2),
                    right: FluidState::new(v[0], slope * FRAC_PI_2),
                },
            )
        }
        "remark-family" => {
            let v = take(params, &[("m", 1.0), ("theta", 0.5)])?;
            let (m, theta) = (v[0], v[1]);
            if !(m > 0.0) || !(theta > 0.0 && theta <= 1.0) {
                return Err(CarrollError::Data(format!(
                    "remark-family needs m > 0 and θ ∈ (0, 1], got m={m}, θ={theta}"
                )));
            }
            // σ^θ = θ(w₁ − w₂)/2 = θm(2+θ)/2
            let sigma = (theta * m * (2.0 + theta) / 2.0).powf(1.0 / theta);
            let amplitude = m * theta / 2.0;
            (
                Profile::Remark { sigma, amplitude },
                FarField {
                    left: FluidState::new(sigma, -amplitude),
                    right: FluidState::new(sigma, amplitude),
                },
            )
        }
        "gaussian-bump" => {
            let v = take(params, &[("sigma", 2.0), ("a", 0.1), ("s", 1.0)])?;
            if !(v[2] > 0.0) {
                return Err(CarrollError::Data("gaussian-bump width s must be positive".into()));
            }
            let st = FluidState::new(v[0], 0.0);
            (
                Profile::Gaussian { sigma: v[0], a: v[1], s: v[2] },
                FarField { left: st, right: st },
            )
        }
        other => return Err(CarrollError::Data(format!("unknown preset '{other}'"))),
    };
    let x_min = params.get("xmin").copied().unwrap_or(DEFAULT_X_MIN);
    let x_max = params.get("xmax").copied().unwrap_or(DEFAULT_X_MAX);
    let samples = params.get("samples").map(|s| *s as usize).unwrap_or(DEFAULT_SAMPLES);
    if !(x_min < x_max) || samples < 2 {
        return Err(CarrollError::Data(format!(
            "bad truncation [{x_min}, {x_max}] with {samples} samples"
        )));
    }
    let data = InitialData {
        kind: DataKind::Preset,
        label: name.to_string(),
        profile,
        truncation: (x_min, x_max),
        samples,
        farfield,
    };
    data.validate()?;
    Ok(data)
}

/// Builds data from `(x, σ, β)` samples via monotone cubic interpolation.
pub fn ingest_tabulated(samples: &[(f64, f64, f64)]) -> Result<InitialData> {
    ingest_tabulated_with(samples, DEFAULT_MAX_CURVATURE)
}

pub fn ingest_tabulated_with(samples: &[(f64, f64, f64)], max_curvature: f64) -> Result<InitialData> {
    if samples.len() < 4 {
        return Err(CarrollError::Data(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    for (i, &(x, s, b)) in samples.iter().enumerate() {
        if !(x.is_finite() && s.is_finite() && b.is_finite()) {
            return Err(CarrollError::Data(format!("non-finite sample in row {i}")));
        }
        if s <= 0.0 {
            return Err(CarrollError::Data(format!("σ must be positive, got σ={s} at x={x}")));
        }
        if i > 0 && x <= samples[i - 1].0 {
            return Err(CarrollError::Data(format!("x must be strictly increasing at row {i}")));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|r| r.0).collect();
    let ss: Vec<f64> = samples.iter().map(|r| r.1).collect();
    let bs: Vec<f64> = samples.iter().map(|r| r.2).collect();
    for (name, ys) in [("sigma", &ss), ("beta", &bs)] {
        let worst = max_second_difference(&xs, ys);
        if worst > max_curvature {
            return Err(CarrollError::Data(format!(
                "{name} is not resolved as a C¹ profile: second difference {worst:e} exceeds {max_curvature:e}"
            )));
        }
    }
    let n = samples.len();
    let first = samples[0];
    let last = samples[n - 1];
    let data = InitialData {
        kind: DataKind::Tabulated,
        label: "tabulated".to_string(),
        profile: Profile::Tabulated {
            sigma: Pchip::new(xs.clone(), ss),
            beta: Pchip::new(xs, bs),
        },
        truncation: (first.0, last.0),
        samples: (8 * (n - 1) + 1).max(4001),
        farfield: FarField {
            left: FluidState::new(first.1, first.2),
            right: FluidState::new(last.1, last.2),
        },
    };
    data.validate()?;
    Ok(data)
}

/// Reads the `x,sigma,beta` CSV format.
pub fn read_tabulated_csv(path: &Path) -> Result<InitialData> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["x", "sigma", "beta"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(CarrollError::Data(format!(
            "expected header 'x,sigma,beta', found '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut vals = [0.0; 3];
        for (k, field) in record.iter().enumerate().take(3) {
            vals[k] = field.parse().map_err(|_| {
                CarrollError::Data(format!("row {}: cannot parse '{field}' as a number", i + 2))
            })?;
        }
        if record.len() != 3 {
            return Err(CarrollError::Data(format!("row {}: expected 3 fields", i + 2)));
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    ingest_tabulated(&rows)
}

pub fn derivative_field(data: &InitialData, x: f64, params: &GammaParams) -> Result<DerivativeField> {
    let (s, sx, _, bx) = data.profile.eval(x);
    if !(s > 0.0) {
        return Err(CarrollError::Liquescence { sigma: s });
    }
    // σ^{θ-1}σₓ
    let tail = ((params.theta() - 1.0) * s.ln()).exp() * sx;
    Ok(DerivativeField {
        sigma_x: sx,
        beta_x: bx,
        w1_x: bx + tail,
        w2_x: bx - tail,
    })
}

fn max_second_difference(xs: &[f64], ys: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 1..xs.len() - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        let d2 = 2.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0) / (h0 + h1);
        worst = worst.max(d2.abs());
    }
    worst
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes.
#[derive(Debug, Clone)]
struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Self { xs, ys, slopes }
    }

    /// Value and derivative; constant continuation outside the nodes.
    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return (self.ys[0], 0.0);
        }
        if x >= self.xs[n - 1] {
            return (self.ys[n - 1], 0.0);
        }
        let k = self.xs.partition_point(|&xi| xi <= x) - 1;
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (y0, y1, d0, d1) = (self.ys[k], self.ys[k + 1], self.slopes[k], self.slopes[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        let deriv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * h * d1)
            / h;
        (value, deriv)
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_params;

    fn build(name: &str, kv: &[(&str, f64)]) -> InitialData {
        let mut p = PresetSpec::new(name);
        for (k, v) in kv {
            p = p.with(k, *v);
        }
        p.build().unwrap()
    }

    #[test]
    fn derivative_examples() {
        let p3 = make_params(3.0).unwrap();
        let c = build("constant", &[("sigma", 2.0)]);
        let d = c.derivative_field(0.3, &p3).unwrap();
        assert_eq!((d.sigma_x, d.beta_x, d.w1_x, d.w2_x), (0.0, 0.0, 0.0, 0.0));

        let a = build("arctan-compressive", &[("sigma", 2.0), ("eps", 0.1)]);
        let d = a.derivative_field(0.0, &p3).unwrap();
        assert!((d.w1_x - 0.1).abs() < 1e-15 && (d.w2_x - 0.1).abs() < 1e-15);

        let g = build("gaussian-bump", &[("sigma", 2.0), ("a", 0.1), ("s", 1.0)]);
        assert!((g.derivative_field(0.0, &p3).unwrap().beta_x - 0.1).abs() < 1e-15);
    }

    #[test]
    fn preset_errors() {
        assert!(preset("nope", &BTreeMap::new()).is_err());
        let mut bad = BTreeMap::new();
        bad.insert("sigma".to_string(), -1.0);
        assert!(preset("constant", &bad).is_err());
        let mut unknown = BTreeMap::new();
        unknown.insert("sgima".to_string(), 1.0);
        assert!(preset("constant", &unknown).is_err());
    }

    #[test]
    fn farfield_limits() {
        let a = build("arctan-rarefactive", &[("sigma", 2.0), ("eps", 1.0)]);
        let ff = a.farfield();
        assert!((ff.left.beta - FRAC_PI_2).abs() < 1e-15);
        assert!((ff.right.beta + FRAC_PI_2).abs() < 1e-15);
        assert!((a.state(1e8).beta - ff.right.beta).abs() < 1e-7);
    }

    #[test]
    fn remark_family_realises_its_bounds() {
        let p = make_params(2.0).unwrap();
        let r = build("remark-family", &[("m", 1.0), ("theta", 0.5)]);
        let l = to_riemann(r.farfield().left, &p).unwrap();
        let rr = to_riemann(r.farfield().right, &p).unwrap();
        assert!((l.w1 - 1.0).abs() < 1e-14 && (l.w2 + 1.5).abs() < 1e-14);
        assert!((rr.w1 - 1.5).abs() < 1e-14 && (rr.w2 + 1.0).abs() < 1e-14);
    }

    #[test]
    fn tabulated_contract() {
        let four: Vec<_> = (0..4).map(|i| (i as f64, 2.0, 0.0)).collect();
        let d = ingest_tabulated(&four).unwrap();
        let p3 = make_params(3.0).unwrap();
        for x in [-5.0, 0.5, 1.7, 9.0] {
            assert_eq!(d.state(x), FluidState::new(2.0, 0.0));
            assert_eq!(d.derivative_field(x, &p3).unwrap().w1_x, 0.0);
        }
        assert!(ingest_tabulated(&four[..3]).is_err());
        let mut zero = four.clone();
        zero[2].1 = 0.0;
        assert!(ingest_tabulated(&zero).is_err());
        let mut unsorted = four.clone();
        unsorted.swap(1, 2);
        assert!(ingest_tabulated(&unsorted).is_err());
        let jump: Vec<_> = (0..200)
            .map(|i| {
                let x = i as f64 * 1e-3;
                (x, 2.0, if i < 100 { 0.0 } else { 5.0 })
            })
            .collect();
        assert!(ingest_tabulated(&jump).is_err());
    }

    #[test]
    fn pchip_reproduces_smooth_profile() {
        let rows: Vec<_> = (0..=400)
            .map(|i| {
                let x = -10.0 + 0.05 * i as f64;
                (x, 2.0, 0.1 * f64::atan(x))
            })
            .collect();
        let d = ingest_tabulated(&rows).unwrap();
        for x in [-3.33, -0.01, 0.0, 0.77, 4.2] {
            let (_, _, b, bx) = d.profile.eval(x);
            assert!((b - 0.1 * f64::atan(x)).abs() < 1e-5);
            assert!((bx - 0.1 / (1.0 + x * x)).abs() < 1e-3);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut body = String::from("x,sigma,beta\n");
        for i in 0..10 {
            body.push_str(&format!("{},{},{}\n", i as f64 * 0.5, 1.5, 0.01 * i as f64));
        }
        std::fs::write(&path, body).unwrap();
        let d = read_tabulated_csv(&path).unwrap();
        assert_eq!(d.kind(), DataKind::Tabulated);
        assert_eq!(d.truncation(), (0.0, 4.5));

        std::fs::write(&path, "x,s,b\n0,1,0\n").unwrap();
        assert!(read_tabulated_csv(&path).is_err());
    }
}
