//! Exact solution for `γ = 3`.
//!
//! Here `λ₁ = 1/w₂` and `λ₂ = 1/w₁`, so each invariant solves its own
//! inviscid Burgers-type equation `∂ₜw + (1/w)∂ₓw = 0`. Characteristics are
//! straight lines `x = x₀ + t/w(0,x₀)` and the derivative `α = wₓ` obeys
//! `1/α(t) = 1/α(0) − t/w²` along them, so a positive initial derivative
//! blows up exactly at `t* = w²/wₓ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{admissibility_gate, eigenvalue_envelope, region_bounds, EigenvalueEnvelope, RegionBounds};
use crate::error::{CarrollError, Result};
use crate::initial_data::InitialData;
use crate::state::{make_params, Family, GammaParams, RiemannState};

/// Relative gap under which the two families' blow-up times count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Global,
    Blowup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlowupFamily {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    Both,
}

/// Earliest blow-up along one family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyBlowup {
    pub family: Family,
    pub t_star: f64,
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub verdict: Verdict,
    /// `None` encodes `T* = +∞`.
    pub t_star: Option<f64>,
    pub t_star_interval: Option<[f64; 2]>,
    pub family: Option<BlowupFamily>,
    pub location_x0: Option<f64>,
    pub per_family: Vec<FamilyBlowup>,
}

impl BlowupReport {
    pub fn horizon(&self) -> f64 {
        self.t_star.unwrap_or(f64::INFINITY)
    }
}

fn gamma3_gate(data: &InitialData) -> Result<(GammaParams, RegionBounds, EigenvalueEnvelope)> {
    let params = make_params(3.0)?;
    let bounds = region_bounds(data, &params)?;
    admissibility_gate(&bounds, &params).into_result()?;
    let env = eigenvalue_envelope(&bounds, &params)?;
    Ok((params, bounds, env))
}

/// `w_j(0,x)²/w_jₓ(0,x)` where the derivative is positive.
fn blowup_time_at(data: &InitialData, params: &GammaParams, family: Family, x: f64) -> Option<f64> {
    let w = family.carried(data.riemann(x, params).ok()?);
    let wx = data.derivative_field(x, params).ok()?.invariant(family);
    (wx > 0.0).then(|| w * w / wx)
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

fn earliest_blowup(data: &InitialData, params: &GammaParams, family: Family) -> Option<FamilyBlowup> {
    let xs = data.sample_points();
    let times: Vec<Option<f64>> = xs.iter().map(|&x| blowup_time_at(data, params, family, x)).collect();
    let (k, _) = times
        .iter()
        .enumerate()
        .filter_map(|(k, t)| t.map(|t| (k, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    let lo = xs[k.saturating_sub(1)];
    let hi = xs[(k + 1).min(xs.len() - 1)];
    let objective = |x: f64| blowup_time_at(data, params, family, x).unwrap_or(f64::INFINITY);
    let polished = golden_section(lo, hi, objective);
    let x0 = if objective(polished) <= objective(xs[k]) { polished } else { xs[k] };
    Some(FamilyBlowup {
        family,
        t_star: objective(x0),
        x0,
    })
}

/// Predicts the first time the `γ = 3` solution stops being C¹.
///
/// The infimum is taken over points with positive invariant derivative; data
/// with `w₁ₓ, w₂ₓ ≤ 0` on the whole scan grid is reported as global.
pub fn predict_blowup_gamma3(data: &InitialData) -> Result<BlowupReport> {
    let (params, _, _) = gamma3_gate(data)?;
    let per_family: Vec<FamilyBlowup> = Family::BOTH
        .iter()
        .filter_map(|&f| earliest_blowup(data, &params, f))
        .collect();
    let Some(first) = per_family.iter().min_by(|a, b| a.t_star.total_cmp(&b.t_star)).copied() else {
        return Ok(BlowupReport {
            verdict: Verdict::Global,
            t_star: None,
            t_star_interval: None,
            family: None,
            location_x0: None,
            per_family,
        });
    };
    let family = if per_family.len() == 2
        && (per_family[0].t_star - per_family[1].t_star).abs() <= TIE_TOLERANCE * first.t_star
    {
        BlowupFamily::Both
    } else {
        match first.family {
            Family::One => BlowupFamily::One,
            Family::Two => BlowupFamily::Two,
        }
    };
    Ok(BlowupReport {
        verdict: Verdict::Blowup,
        t_star: Some(first.t_star),
        t_star_interval: Some([first.t_star, first.t_star]),
        family: Some(family),
        location_x0: Some(first.x0),
        per_family,
    })
}

/// Exact `γ = 3` solution operator for one initial profile.
#[derive(Debug, Clone)]
pub struct Gamma3Solution<'a> {
    data: &'a InitialData,
    params: GammaParams,
    bounds: RegionBounds,
    envelope: EigenvalueEnvelope,
    report: BlowupReport,
    fan_spacing: f64,
}

impl<'a> Gamma3Solution<'a> {
    pub fn new(data: &'a InitialData) -> Result<Self> {
        let (params, bounds, envelope) = gamma3_gate(data)?;
        let report = predict_blowup_gamma3(data)?;
        Ok(Self {
            data,
            params,
            bounds,
            envelope,
            report,
            fan_spacing: data.sample_spacing(),
        })
    }

    /// Spacing of the fan of characteristics used to bracket foot points.
    pub fn with_fan_spacing(mut self, h: f64) -> Self {
        assert!(h > 0.0 && h.is_finite());
        self.fan_spacing = h;
        self
    }

    pub fn params(&self) -> &GammaParams {
        &self.params
    }

    pub fn bounds(&self) -> &RegionBounds {
        &self.bounds
    }

    pub fn report(&self) -> &BlowupReport {
        &self.report
    }

    /// Predicted `T*`, `+∞` for global data.
    pub fn horizon(&self) -> f64 {
        self.report.horizon()
    }

    fn speed_range(&self, family: Family) -> (f64, f64) {
        match family {
            Family::One => self.envelope.lambda2_range(),
            Family::Two => self.envelope.lambda1_range(),
        }
    }

    fn initial(&self, x: f64) -> RiemannState {
        self.data
            .riemann(x, &self.params)
            .expect("admissible data has positive σ everywhere")
    }

    /// `w(t, x)` at sorted or unsorted query points, rejecting `t ≥ T*`.
    pub fn evaluate(&self, t: f64, xs: &[f64]) -> Result<Vec<RiemannState>> {
        let horizon = self.horizon();
        if t >= horizon {
            return Err(CarrollError::Horizon { t, horizon });
        }
        self.evaluate_by_bracketing(t, xs)
    }

    /// Same as [`evaluate`](Self::evaluate) but trusts only the fan of
    /// characteristics: fails once neighbouring characteristics have crossed.
    pub fn evaluate_by_bracketing(&self, t: f64, xs: &[f64]) -> Result<Vec<RiemannState>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(CarrollError::Precondition(format!("t={t} must be finite and ≥ 0")));
        }
        if t == 0.0 {
            return Ok(xs.iter().map(|&x| self.initial(x)).collect());
        }
        let w1 = self.foot_values(Family::One, t, xs)?;
        let w2 = self.foot_values(Family::Two, t, xs)?;
        Ok(w1.into_iter().zip(w2).map(|(a, b)| RiemannState::new(a, b)).collect())
    }

    /// Foot point `x₀` with `x = x₀ + t·λ(x₀)` along `family`.
    pub fn foot_point(&self, family: Family, t: f64, x: f64) -> Result<f64> {
        let fan = self.fan(family, t, x, x)?;
        Ok(fan.solve(x))
    }

    fn foot_values(&self, family: Family, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fan = self.fan(family, t, lo, hi)?;
        Ok(xs
            .par_iter()
            .map(|&x| family.carried(self.initial(fan.solve(x))))
            .collect())
    }

    fn fan(&self, family: Family, t: f64, lo: f64, hi: f64) -> Result<Fan<'_, 'a>> {
        let (smin, smax) = self.speed_range(family);
        let a = lo - t * smax;
        let b = hi - t * smin;
        let n = (((b - a) / self.fan_spacing).ceil() as usize).max(1);
        let feet: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
        let positions: Vec<f64> = feet
            .par_iter()
            .map(|&x0| x0 + t * family.speed(self.initial(x0), &self.params))
            .collect();
        if let Some(k) = positions.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(CarrollError::BracketFailure { t, x: positions[k] });
        }
        Ok(Fan {
            solution: self,
            family,
            t,
            feet,
            positions,
        })
    }
}

/// Characteristics from a uniform set of feet, ordered by position at time `t`.
struct Fan<'s, 'a> {
    solution: &'s Gamma3Solution<'a>,
    family: Family,
    t: f64,
    feet: Vec<f64>,
    positions: Vec<f64>,
}

impl Fan<'_, '_> {
    fn map(&self, x0: f64) -> f64 {
        x0 + self.t * self.family.speed(self.solution.initial(x0), &self.solution.params)
    }

    fn solve(&self, x: f64) -> f64 {
        let n = self.positions.len();
        let k = self.positions.partition_point(|&p| p <= x).clamp(1, n - 1) - 1;
        let (mut a, mut b) = (self.feet[k], self.feet[k + 1]);
        if x <= self.positions[k] {
            return a;
        }
        if x >= self.positions[k + 1] {
            return b;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.map(mid) <= x {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

pub fn solve_exact_gamma3(data: &InitialData, t: f64, xs: &[f64]) -> Result<Vec<RiemannState>> {
    Gamma3Solution::new(data)?.evaluate(t, xs)
}

/// Straight characteristic `x₀ + t·λ(x₀)`.
pub fn characteristic_position(data: &InitialData, family: Family, x0: f64, t: f64) -> Result<f64> {
    let params = make_params(3.0)?;
    Ok(x0 + t * family.speed(data.riemann(x0, &params)?, &params))
}

/// `w_jₓ` along the characteristic from `x0`, from the closed-form reciprocal relation.
pub fn alpha_along_characteristic_gamma3(data: &InitialData, family: Family, x0: f64, t: f64) -> Result<f64> {
    let params = make_params(3.0)?;
    let w = family.carried(data.riemann(x0, &params)?);
    let a0 = data.derivative_field(x0, &params)?.invariant(family);
    alpha_closed_form(w, a0, t)
}

pub(crate) fn alpha_closed_form(w: f64, a0: f64, t: f64) -> Result<f64> {
    if a0 == 0.0 {
        return Ok(0.0);
    }
    if a0 > 0.0 {
        let t_star = w * w / a0;
        if t >= t_star {
            return Err(CarrollError::BlowUp { t_star });
        }
    }
    Ok(1.0 / (1.0 / a0 - t / (w * w)))
}

/// Outcome of a one-sided Lipschitz check `inf w_jₓ(t,·) ≥ −C/t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCertificate {
    pub passed: bool,
    pub t: f64,
    pub constant: f64,
    pub bound: f64,
    /// Smallest sampled derivative per family.
    pub min_derivative: [f64; 2],
    pub worst_x: f64,
    pub worst_family: Family,
    pub samples: usize,
}

/// Checks `(β ± σ)ₓ(t,·) ≥ −sup(σ₀ + |β₀|)²/t` at `samples` using the exact solution.
pub fn one_sided_lipschitz_certificate_gamma3(
    data: &InitialData,
    t: f64,
    samples: &[f64],
) -> Result<LipschitzCertificate> {
    if !(t > 0.0) {
        return Err(CarrollError::Precondition(format!(
            "one-sided Lipschitz bound needs t > 0, got t={t}"
        )));
    }
    let solution = Gamma3Solution::new(data)?;
    let horizon = solution.horizon();
    if t >= horizon {
        return Err(CarrollError::Horizon { t, horizon });
    }
    let ff = data.farfield();
    let constant = data
        .sample_points()
        .into_iter()
        .map(|x| data.state(x))
        .chain([ff.left, ff.right])
        .map(|s| (s.sigma + s.beta.abs()).powi(2))
        .fold(0.0, f64::max);
    let bound = -constant / t;
    let mut cert = LipschitzCertificate {
        passed: true,
        t,
        constant,
        bound,
        min_derivative: [f64::INFINITY; 2],
        worst_x: f64::NAN,
        worst_family: Family::One,
        samples: samples.len(),
    };
    let mut worst = f64::INFINITY;
    for family in Family::BOTH {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fan = solution.fan(family, t, lo, hi)?;
        for &x in samples {
            let x0 = fan.solve(x);
            let alpha = alpha_along_characteristic_gamma3(data, family, x0, t)?;
            let slot = &mut cert.min_derivative[family.index()];
            *slot = slot.min(alpha);
            if alpha < worst {
                worst = alpha;
                cert.worst_x = x;
                cert.worst_family = family;
            }
        }
    }
    cert.passed = worst >= bound;
    Ok(cert)
}
