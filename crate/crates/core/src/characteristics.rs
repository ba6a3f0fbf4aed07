//! Coupled characteristics and Riccati blow-up detection for general `γ`.
//!
//! Each invariant is constant along its own family, but the family's speed
//! depends on the other invariant. A [`CharacteristicBundle`] advances a
//! uniform set of characteristics of both families together, resolving the
//! coupling by fixed-point sweeps per time step. Individual traces are then
//! integrated against the bundle's interpolated foreign field.
//!
//! Along a trace of family `j` the weighted derivative `α̃_j = e^{h_j} w_jₓ`
//! satisfies `(1/α̃_j)' = −2(1+θ) I_j` with
//!
//! ```text
//! I₁ = (w₁ − w₂)^p / ((1+θ)w₁ + (1−θ)w₂),
//! I₂ = (w₁ − w₂)^p / (−(1−θ)w₁ − (1+θ)w₂),      p = (1−θ)/(2θ).
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{admissibility_gate, eigenvalue_envelope, region_bounds, RegionBounds};
use crate::error::{CarrollError, Result};
use crate::gamma3::LipschitzCertificate;
use crate::initial_data::InitialData;
use crate::state::{fast_denominator, slow_denominator, Family, GammaParams, RiemannState};

pub const DEFAULT_BUNDLE_FEET: usize = 2001;
pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_SWEEPS: usize = 50;
pub const DEFAULT_TRACE_DT: f64 = 1e-3;

/// Arguments of the two logarithms in `h_j`: `(w₁ − w₂, D)` with `D > 0` in the region.
fn log_arguments(rs: RiemannState, family: Family, params: &GammaParams) -> Result<(f64, f64)> {
    let gap = rs.w1 - rs.w2;
    if !(gap > 0.0) {
        return Err(CarrollError::Region { what: "w1 - w2", value: gap });
    }
    let d = match family {
        Family::One => fast_denominator(rs, params),
        Family::Two => -slow_denominator(rs, params),
    };
    if !(d > 0.0) {
        let what = match family {
            Family::One => "(1+θ)w1 + (1-θ)w2",
            Family::Two => "-(1-θ)w1 - (1+θ)w2",
        };
        return Err(CarrollError::Region { what, value: d });
    }
    Ok((gap, d))
}

/// `h_j(w₁, w₂) = −p·log(w₁ − w₂) − log D_j`.
pub fn integrating_factor(rs: RiemannState, family: Family, params: &GammaParams) -> Result<f64> {
    let (gap, d) = log_arguments(rs, family, params)?;
    let p = params.riccati_exponent();
    // p = 0 at θ = 1; skip the product so that 0·log stays exact
    let first = if p == 0.0 { 0.0 } else { -p * gap.ln() };
    Ok(first - d.ln())
}

/// Integrand `I_j` of the reciprocal equation, strictly positive in the region.
pub fn riccati_integrand(rs: RiemannState, family: Family, params: &GammaParams) -> Result<f64> {
    let (gap, d) = log_arguments(rs, family, params)?;
    Ok(gap.powf(params.riccati_exponent()) / d)
}

/// Box bounds `[I_min, I_max]` on the integrand from the region extrema.
pub fn integrand_bracket(bounds: &RegionBounds, family: Family, params: &GammaParams) -> (f64, f64) {
    let th = params.theta();
    let p = params.riccati_exponent();
    let RegionBounds { m1, M1, m2, M2 } = *bounds;
    let (gap_lo, gap_hi) = ((m1 - M2).powf(p), (M1 - m2).powf(p));
    let (d_lo, d_hi) = literal_denominators(bounds, family, th);
    (gap_lo / d_hi, gap_hi / d_lo)
}

/// Denominator bounds exactly as displayed for the interval formulas.
fn literal_denominators(bounds: &RegionBounds, family: Family, th: f64) -> (f64, f64) {
    let RegionBounds { m1, M1, m2, M2 } = *bounds;
    match family {
        Family::One => ((1.0 + th) * m1 - (th * M2 - m2), (1.0 + th) * M1 + M2 - th * m2),
        Family::Two => (-(M1 - th * m1 + (1.0 + th) * M2), -(m1 - th * M1 + (1.0 + th) * m2)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleOptions {
    pub n_feet: usize,
    /// Bundle time step; `None` picks `Δx / max|λ|`.
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            n_feet: DEFAULT_BUNDLE_FEET,
            dt: None,
            tol: DEFAULT_PICARD_TOL,
            max_sweeps: DEFAULT_PICARD_SWEEPS,
        }
    }
}

/// Invariant field of one family at one time, sorted by position.
#[derive(Debug, Clone)]
struct Field {
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl Field {
    /// Returns the field and whether the positions were already strictly increasing.
    fn from_positions(pos: &[f64], own: &[f64]) -> (Self, bool) {
        let ordered = pos.windows(2).all(|w| w[1] > w[0]);
        if ordered {
            return (
                Self {
                    xs: pos.to_vec(),
                    vs: own.to_vec(),
                },
                true,
            );
        }
        let mut idx: Vec<usize> = (0..pos.len()).collect();
        idx.sort_by(|&a, &b| pos[a].total_cmp(&pos[b]));
        (
            Self {
                xs: idx.iter().map(|&i| pos[i]).collect(),
                vs: idx.iter().map(|&i| own[i]).collect(),
            },
            false,
        )
    }

    /// Linear interpolation, constant beyond the ends.
    fn at(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.vs[0];
        }
        if x >= self.xs[n - 1] {
            return self.vs[n - 1];
        }
        let j = self.xs.partition_point(|&p| p <= x);
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        if x1 == x0 {
            return self.vs[j];
        }
        let s = (x - x0) / (x1 - x0);
        self.vs[j - 1] + s * (self.vs[j] - self.vs[j - 1])
    }
}

#[derive(Debug, Clone)]
struct Level {
    t: f64,
    fields: [Field; 2],
}

/// Characteristics of both families from a uniform set of feet, stored at
/// every bundle time level.
#[derive(Debug, Clone)]
pub struct CharacteristicBundle<'a> {
    data: &'a InitialData,
    params: GammaParams,
    bounds: RegionBounds,
    t_end: f64,
    dt: f64,
    feet: Vec<f64>,
    levels: Vec<Level>,
    first_crossing: Option<f64>,
    max_sweeps_used: usize,
}

impl<'a> CharacteristicBundle<'a> {
    /// Builds the bundle on `[0, t_end]`.
    ///
    /// Feet cover the truncation interval widened by `t_end·max|λ|` on both
    /// sides. Each step is a Heun predictor followed by Jacobi sweeps of the
    /// trapezoidal corrector against the new level's foreign field.
    pub fn build(data: &'a InitialData, params: &GammaParams, t_end: f64, opts: BundleOptions) -> Result<Self> {
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(CarrollError::Precondition(format!("t_end={t_end} must be finite and ≥ 0")));
        }
        if opts.n_feet < 2 {
            return Err(CarrollError::Precondition("bundle needs at least two feet".into()));
        }
        let bounds = region_bounds(data, params)?;
        admissibility_gate(&bounds, params).into_result()?;
        let smax = eigenvalue_envelope(&bounds, params)?.max_speed();
        let (a, b) = data.truncation();
        let (a, b) = (a - t_end * smax, b + t_end * smax);
        let n = opts.n_feet;
        let feet: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        let dx = (b - a) / (n - 1) as f64;
        let dt = opts.dt.unwrap_or(dx / smax);
        if !(dt > 0.0) {
            return Err(CarrollError::Precondition(format!("bundle dt={dt} must be positive")));
        }
        let initial: Vec<RiemannState> = feet
            .iter()
            .map(|&x| data.riemann(x, params))
            .collect::<Result<_>>()?;
        let own = [
            initial.iter().map(|rs| rs.w1).collect::<Vec<_>>(),
            initial.iter().map(|rs| rs.w2).collect::<Vec<_>>(),
        ];
        let mut bundle = Self {
            data,
            params: *params,
            bounds,
            t_end,
            dt,
            feet: feet.clone(),
            levels: Vec::new(),
            first_crossing: None,
            max_sweeps_used: 0,
        };
        let mut pos = [feet.clone(), feet];
        bundle.push_level(0.0, &pos, &own);
        let steps = (t_end / dt).ceil() as usize;
        for k in 0..steps {
            let t0 = bundle.levels[k].t;
            let t1 = if k + 1 == steps { t_end } else { (k + 1) as f64 * dt };
            let h = t1 - t0;
            let s0 = bundle.level_speeds(k, &pos, &own);
            let mut next: [Vec<f64>; 2] = std::array::from_fn(|f| {
                pos[f].iter().zip(&s0[f]).map(|(x, s)| x + h * s).collect()
            });
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                let (f1, ok1) = Field::from_positions(&next[0], &own[0]);
                let (f2, ok2) = Field::from_positions(&next[1], &own[1]);
                // past a crossing the foreign field is multivalued and the
                // corrector is no longer a contraction: one sweep only
                let formal = bundle.first_crossing.is_some() || !(ok1 && ok2);
                let probe = Level { t: t1, fields: [f1, f2] };
                let s1 = bundle.speeds_against(&probe, &next, &own);
                let mut change = 0.0f64;
                for f in 0..2 {
                    let upd: Vec<f64> = (0..pos[f].len())
                        .into_par_iter()
                        .map(|i| pos[f][i] + 0.5 * h * (s0[f][i] + s1[f][i]))
                        .collect();
                    change = upd.iter().zip(&next[f]).map(|(u, v)| (u - v).abs()).fold(change, f64::max);
                    next[f] = upd;
                }
                if change < opts.tol || formal {
                    break;
                }
                if sweeps >= opts.max_sweeps {
                    return Err(CarrollError::Iteration { sweeps, residual: change });
                }
            }
            bundle.max_sweeps_used = bundle.max_sweeps_used.max(sweeps);
            pos = next;
            bundle.push_level(t1, &pos, &own);
        }
        Ok(bundle)
    }

    fn push_level(&mut self, t: f64, pos: &[Vec<f64>; 2], own: &[Vec<f64>; 2]) {
        let (f1, ok1) = Field::from_positions(&pos[0], &own[0]);
        let (f2, ok2) = Field::from_positions(&pos[1], &own[1]);
        if !(ok1 && ok2) && self.first_crossing.is_none() {
            self.first_crossing = Some(t);
        }
        self.levels.push(Level { t, fields: [f1, f2] });
    }

    fn level_speeds(&self, k: usize, pos: &[Vec<f64>; 2], own: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        self.speeds_against(&self.levels[k], pos, own)
    }

    fn speeds_against(&self, level: &Level, pos: &[Vec<f64>; 2], own: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        std::array::from_fn(|f| {
            let family = if f == 0 { Family::One } else { Family::Two };
            let foreign = &level.fields[1 - f];
            (0..pos[f].len())
                .into_par_iter()
                .map(|i| family.speed(compose(family, own[f][i], foreign.at(pos[f][i])), &self.params))
                .collect()
        })
    }

    pub fn params(&self) -> &GammaParams {
        &self.params
    }

    pub fn bounds(&self) -> &RegionBounds {
        &self.bounds
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn feet(&self) -> &[f64] {
        &self.feet
    }

    /// Earliest bundle level at which neighbouring characteristics of one
    /// family had crossed. Past it the field is a formal continuation: sorted
    /// by position, advanced with a single corrector sweep per step.
    pub fn first_crossing(&self) -> Option<f64> {
        self.first_crossing
    }

    pub fn max_sweeps_used(&self) -> usize {
        self.max_sweeps_used
    }

    /// Invariant carried by `family` at `(t, x)`, linear in space and time.
    pub fn invariant_at(&self, family: Family, t: f64, x: f64) -> f64 {
        let n = self.levels.len();
        if n == 1 {
            return self.levels[0].fields[family.index()].at(x);
        }
        let k = ((t / self.dt).floor().max(0.0) as usize).min(n - 2);
        let (l0, l1) = (&self.levels[k], &self.levels[k + 1]);
        let s = ((t - l0.t) / (l1.t - l0.t)).clamp(0.0, 1.0);
        let (v0, v1) = (l0.fields[family.index()].at(x), l1.fields[family.index()].at(x));
        v0 + s * (v1 - v0)
    }

    /// `(w₁, w₂)` at `(t, x)` for each query.
    pub fn field(&self, t: f64, xs: &[f64]) -> Result<Vec<RiemannState>> {
        self.check_time(t)?;
        Ok(xs
            .par_iter()
            .map(|&x| RiemannState::new(self.invariant_at(Family::One, t, x), self.invariant_at(Family::Two, t, x)))
            .collect())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.t_end * (1.0 + 1e-12)) {
            return Err(CarrollError::Precondition(format!(
                "t={t} outside the bundle span [0, {}]",
                self.t_end
            )));
        }
        Ok(())
    }

    /// Integrates one characteristic of `family` from `x0` to `t_end` with
    /// Heun steps of size at most `dt`. The own invariant is held at its
    /// initial value; the foreign one is read from the bundle.
    pub fn trace(&self, family: Family, x0: f64, t_end: f64, dt: f64) -> Result<CharacteristicTrace> {
        if !(dt > 0.0) {
            return Err(CarrollError::Precondition(format!("dt={dt} must be positive")));
        }
        self.check_time(t_end)?;
        let own = family.carried(self.data.riemann(x0, &self.params)?);
        let other = family.other();
        let state = |t: f64, x: f64| -> Result<RiemannState> {
            let rs = compose(family, own, self.invariant_at(other, t, x));
            if !(rs.w1 > rs.w2) {
                return Err(CarrollError::Region {
                    what: "w1 - w2",
                    value: rs.w1 - rs.w2,
                });
            }
            Ok(rs)
        };
        let steps = ((t_end / dt).ceil() as usize).max(1);
        let h = t_end / steps as f64;
        let mut nodes = Vec::with_capacity(steps + 1);
        let (mut t, mut x) = (0.0, x0);
        let mut rs = state(t, x)?;
        nodes.push(TraceNode::new(t, x, rs));
        for k in 0..steps {
            let t1 = (k + 1) as f64 * h;
            let k1 = family.speed(rs, &self.params);
            let xp = x + h * k1;
            let k2 = family.speed(state(t1, xp)?, &self.params);
            x += 0.5 * h * (k1 + k2);
            t = t1;
            rs = state(t, x)?;
            nodes.push(TraceNode::new(t, x, rs));
        }
        let status = match self.first_crossing {
            Some(tc) if tc <= t_end => TraceStatus::HorizonReached,
            _ => TraceStatus::Alive,
        };
        Ok(CharacteristicTrace {
            family,
            x0,
            nodes,
            status,
        })
    }

    /// Traces from `x0` and stops at the Riccati crossing if one occurs before `t_end`.
    pub fn trace_until_blowup(&self, family: Family, x0: f64, t_end: f64, dt: f64) -> Result<(CharacteristicTrace, RiccatiOutcome)> {
        let mut trace = self.trace(family, x0, t_end, dt)?;
        let alpha0 = self.data.derivative_field(x0, &self.params)?.invariant(family);
        let outcome = integrate_riccati(&trace, alpha0, &self.params)?;
        if let RiccatiOutcome::BlownUp { t_cross } = outcome {
            let keep = trace.nodes.partition_point(|n| n.t < t_cross) + 1;
            trace.nodes.truncate(keep.min(trace.nodes.len()));
            trace.status = TraceStatus::BlownUp;
        }
        Ok((trace, outcome))
    }
}

fn compose(family: Family, own: f64, foreign: f64) -> RiemannState {
    match family {
        Family::One => RiemannState::new(own, foreign),
        Family::Two => RiemannState::new(foreign, own),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    pub t: f64,
    pub x: f64,
    pub w1: f64,
    pub w2: f64,
}

impl TraceNode {
    fn new(t: f64, x: f64, rs: RiemannState) -> Self {
        Self {
            t,
            x,
            w1: rs.w1,
            w2: rs.w2,
        }
    }

    pub fn riemann(&self) -> RiemannState {
        RiemannState::new(self.w1, self.w2)
    }
}

/// `Alive`: reached its end time while the bundle was still classical.
/// `HorizonReached`: ran past the bundle's first crossing.
/// `BlownUp`: truncated at a Riccati crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Alive,
    BlownUp,
    HorizonReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTrace {
    pub family: Family,
    pub x0: f64,
    pub nodes: Vec<TraceNode>,
    pub status: TraceStatus,
}

impl CharacteristicTrace {
    pub fn end(&self) -> &TraceNode {
        self.nodes.last().expect("a trace has at least one node")
    }
}

/// Builds a default bundle on `[0, t_end]` and traces one characteristic.
pub fn trace_characteristic(
    data: &InitialData,
    params: &GammaParams,
    family: Family,
    x0: f64,
    t_end: f64,
    dt: f64,
) -> Result<CharacteristicTrace> {
    CharacteristicBundle::build(data, params, t_end, BundleOptions::default())?.trace(family, x0, t_end, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiState {
    pub alpha_tilde: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RiccatiOutcome {
    Alive { state: RiccatiState, alpha: f64 },
    BlownUp { t_cross: f64 },
}

/// `1/α̃` at every node by trapezoidal quadrature of the reciprocal equation.
pub fn riccati_reciprocals(trace: &CharacteristicTrace, alpha0: f64, params: &GammaParams) -> Result<Vec<f64>> {
    if !alpha0.is_finite() {
        return Err(CarrollError::Precondition(format!("alpha0={alpha0} must be finite")));
    }
    let family = trace.family;
    let h0 = integrating_factor(trace.nodes[0].riemann(), family, params)?;
    let c = 2.0 * (1.0 + params.theta());
    let mut r = 1.0 / (h0.exp() * alpha0);
    let mut out = Vec::with_capacity(trace.nodes.len());
    out.push(r);
    let mut prev = riccati_integrand(trace.nodes[0].riemann(), family, params)?;
    for w in trace.nodes.windows(2) {
        let cur = riccati_integrand(w[1].riemann(), family, params)?;
        r -= c * 0.5 * (prev + cur) * (w[1].t - w[0].t);
        out.push(r);
        prev = cur;
    }
    Ok(out)
}

/// Integrates `α̃` along `trace`; a sign change of `1/α̃` from positive to
/// nonpositive is reported as blow-up at the linearly interpolated crossing.
pub fn integrate_riccati(trace: &CharacteristicTrace, alpha0: f64, params: &GammaParams) -> Result<RiccatiOutcome> {
    let recips = riccati_reciprocals(trace, alpha0, params)?;
    for (k, w) in recips.windows(2).enumerate() {
        if w[0] > 0.0 && w[1] <= 0.0 {
            let (t0, t1) = (trace.nodes[k].t, trace.nodes[k + 1].t);
            return Ok(RiccatiOutcome::BlownUp {
                t_cross: t0 + w[0] / (w[0] - w[1]) * (t1 - t0),
            });
        }
    }
    let last = trace.end();
    let h = integrating_factor(last.riemann(), trace.family, params)?;
    let alpha_tilde = 1.0 / recips[recips.len() - 1];
    Ok(RiccatiOutcome::Alive {
        state: RiccatiState { alpha_tilde, h },
        alpha: (-h).exp() * alpha_tilde,
    })
}

/// Blow-up time bounds for one foot point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupInterval {
    pub t_lo: f64,
    pub t_hi: f64,
    pub family: Family,
    pub x0: f64,
    /// `α̃_j(0, x₀)`.
    pub alpha_tilde0: f64,
    /// Bounds with the own invariant pinned to its value at `x₀`.
    pub sharp: [f64; 2],
    /// Family 2 only: the same formulas evaluated with `α̃₁(0, x₀)`, when
    /// that is positive and differs from `α̃₂(0, x₀)`.
    pub alt_alpha_tilde1: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralBlowupReport {
    pub bounds: RegionBounds,
    pub intervals: Vec<BlowupInterval>,
    /// `(min t_lo, min t_hi)` over all intervals; `None` when global.
    pub envelope: Option<[f64; 2]>,
    pub sharp_envelope: Option<[f64; 2]>,
}

impl GeneralBlowupReport {
    pub fn is_global(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Interval with the smallest `t_lo` for `family`.
    pub fn earliest(&self, family: Family) -> Option<&BlowupInterval> {
        self.intervals
            .iter()
            .filter(|iv| iv.family == family)
            .min_by(|a, b| a.t_lo.total_cmp(&b.t_lo))
    }
}

fn literal_interval(bounds: &RegionBounds, family: Family, alpha_tilde: f64, params: &GammaParams) -> [f64; 2] {
    let th = params.theta();
    let p = params.riccati_exponent();
    let RegionBounds { m1, M1, m2, M2 } = *bounds;
    let (d_lo, d_hi) = literal_denominators(bounds, family, th);
    let c = 2.0 * (1.0 + th) * alpha_tilde;
    [d_lo / (c * (M1 - m2).powf(p)), d_hi / (c * (m1 - M2).powf(p))]
}

fn sharp_interval(bounds: &RegionBounds, family: Family, own: f64, alpha_tilde: f64, params: &GammaParams) -> [f64; 2] {
    let th = params.theta();
    let p = params.riccati_exponent();
    let RegionBounds { m1, M1, m2, M2 } = *bounds;
    let c = 2.0 * (1.0 + th) * alpha_tilde;
    match family {
        Family::One => {
            let (d_lo, d_hi) = ((1.0 + th) * own + (1.0 - th) * m2, (1.0 + th) * own + (1.0 - th) * M2);
            [d_lo / (c * (own - m2).powf(p)), d_hi / (c * (own - M2).powf(p))]
        }
        Family::Two => {
            let (d_lo, d_hi) = (-(1.0 - th) * M1 - (1.0 + th) * own, -(1.0 - th) * m1 - (1.0 + th) * own);
            [d_lo / (c * (M1 - own).powf(p)), d_hi / (c * (m1 - own).powf(p))]
        }
    }
}

/// Blow-up intervals at every sample point with a positive invariant derivative.
pub fn blowup_bounds_general(data: &InitialData, params: &GammaParams) -> Result<GeneralBlowupReport> {
    blowup_bounds_at(data, params, &data.sample_points())
}

/// As [`blowup_bounds_general`] but at caller-chosen foot points; the region
/// bounds still come from the full scan.
pub fn blowup_bounds_at(data: &InitialData, params: &GammaParams, feet: &[f64]) -> Result<GeneralBlowupReport> {
    let bounds = region_bounds(data, params)?;
    admissibility_gate(&bounds, params).into_result()?;
    let per_point: Vec<Vec<BlowupInterval>> = feet
        .par_iter()
        .map(|&x0| -> Result<Vec<BlowupInterval>> {
            let rs = data.riemann(x0, params)?;
            let d = data.derivative_field(x0, params)?;
            let mut out = Vec::new();
            for family in Family::BOTH {
                let a = d.invariant(family);
                if !(a > 0.0) {
                    continue;
                }
                let alpha_tilde0 = integrating_factor(rs, family, params)?.exp() * a;
                let [t_lo, t_hi] = literal_interval(&bounds, family, alpha_tilde0, params);
                let sharp = sharp_interval(&bounds, family, family.carried(rs), alpha_tilde0, params);
                let alt_alpha_tilde1 = match family {
                    Family::One => None,
                    Family::Two => {
                        let alt = integrating_factor(rs, Family::One, params)?.exp() * d.w1_x;
                        (alt > 0.0 && (alt - alpha_tilde0).abs() > 1e-12 * alpha_tilde0)
                            .then(|| literal_interval(&bounds, family, alt, params))
                    }
                };
                out.push(BlowupInterval {
                    t_lo,
                    t_hi,
                    family,
                    x0,
                    alpha_tilde0,
                    sharp,
                    alt_alpha_tilde1,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let intervals: Vec<BlowupInterval> = per_point.into_iter().flatten().collect();
    let min_of = |f: &dyn Fn(&BlowupInterval) -> f64| intervals.iter().map(f).fold(f64::INFINITY, f64::min);
    let (envelope, sharp_envelope) = if intervals.is_empty() {
        (None, None)
    } else {
        (
            Some([min_of(&|iv| iv.t_lo), min_of(&|iv| iv.t_hi)]),
            Some([min_of(&|iv| iv.sharp[0]), min_of(&|iv| iv.sharp[1])]),
        )
    };
    Ok(GeneralBlowupReport {
        bounds,
        intervals,
        envelope,
        sharp_envelope,
    })
}

/// Constant `C` with `w_jₓ(t,·) ≥ −C/t` for both families, from the box alone.
pub fn lipschitz_constant_general(bounds: &RegionBounds, params: &GammaParams) -> f64 {
    let th = params.theta();
    let p = params.riccati_exponent();
    let RegionBounds { m1, M1, m2, M2 } = *bounds;
    let ratio = (M1 - m2).powf(p) / (2.0 * (1.0 + th) * (m1 - M2).powf(p));
    let (_, d1_hi) = literal_denominators(bounds, Family::One, th);
    let (_, d2_hi) = literal_denominators(bounds, Family::Two, th);
    ratio * d1_hi.powi(2).max(d2_hi.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzOptions {
    pub bundle: BundleOptions,
    pub trace_dt: f64,
    /// Number of foot points per family, spread over the truncation interval.
    pub feet: usize,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        Self {
            bundle: BundleOptions::default(),
            trace_dt: DEFAULT_TRACE_DT,
            feet: 201,
        }
    }
}

/// Checks `w_jₓ(t,·) ≥ −C/t` on a set of traces from both families.
///
/// `worst_x` is the foot point of the trace attaining the smallest derivative.
pub fn one_sided_lipschitz_certificate_general(data: &InitialData, params: &GammaParams, t: f64) -> Result<LipschitzCertificate> {
    one_sided_lipschitz_certificate_general_with(data, params, t, LipschitzOptions::default())
}

pub fn one_sided_lipschitz_certificate_general_with(
    data: &InitialData,
    params: &GammaParams,
    t: f64,
    opts: LipschitzOptions,
) -> Result<LipschitzCertificate> {
    if !(t > 0.0) {
        return Err(CarrollError::Precondition(format!(
            "one-sided Lipschitz bound needs t > 0, got t={t}"
        )));
    }
    let bundle = CharacteristicBundle::build(data, params, t, opts.bundle)?;
    let constant = lipschitz_constant_general(bundle.bounds(), params);
    let bound = -constant / t;
    let (a, b) = data.truncation();
    let n = opts.feet.max(2);
    let feet: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let jobs: Vec<(Family, f64)> = Family::BOTH.iter().flat_map(|&f| feet.iter().map(move |&x| (f, x))).collect();
    let results: Vec<(Family, f64, f64)> = jobs
        .par_iter()
        .map(|&(family, x0)| -> Result<(Family, f64, f64)> {
            let (_, outcome) = bundle.trace_until_blowup(family, x0, t, opts.trace_dt)?;
            match outcome {
                RiccatiOutcome::Alive { alpha, .. } => Ok((family, x0, alpha)),
                RiccatiOutcome::BlownUp { t_cross } => Err(CarrollError::Horizon { t, horizon: t_cross }),
            }
        })
        .collect::<Result<_>>()?;
    let mut cert = LipschitzCertificate {
        passed: true,
        t,
        constant,
        bound,
        min_derivative: [f64::INFINITY; 2],
        worst_x: f64::NAN,
        worst_family: Family::One,
        samples: results.len(),
    };
    let mut worst = f64::INFINITY;
    for (family, x0, alpha) in results {
        let slot = &mut cert.min_derivative[family.index()];
        *slot = slot.min(alpha);
        if alpha < worst {
            worst = alpha;
            cert.worst_x = x0;
            cert.worst_family = family;
        }
    }
    cert.passed = worst >= bound;
    Ok(cert)
}
