//! Compression/rarefaction classification and the invariant-region gate.
//!
//! With `m_j = inf w_j(0,·)` and `M_j = sup w_j(0,·)`, admissible data keeps
//! every later state inside the box `[m₁, M₁] × [m₂, M₂]`, where the system
//! stays strictly hyperbolic with `λ₁ < 0 < λ₂`. For `γ = 3` this needs only
//! `m₁ > 0 > M₂`; for `γ < 3` two more inequalities pin the sign of
//! `β ∓ σ^θ` over the whole box.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CarrollError, Result};
use crate::initial_data::InitialData;
use crate::state::{speed_partials, to_riemann, GammaParams, RiemannState};

/// Default slack for certifying exact-solver snapshots.
pub const DEFAULT_TOL_REGION_EXACT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointClass {
    pub fr: bool,
    pub br: bool,
    pub fc: bool,
    pub bc: bool,
}

impl PointClass {
    pub fn is_compressive(&self) -> bool {
        self.fc || self.bc
    }

    pub fn is_rarefactive(&self) -> bool {
        self.fr || self.br
    }
}

/// Classifies a point from the signs of `λ₁ₓ` and `λ₂ₓ`; zero counts as rarefactive.
pub fn classify_point(lambda1_x: f64, lambda2_x: f64) -> Result<PointClass> {
    if !lambda1_x.is_finite() || !lambda2_x.is_finite() {
        return Err(CarrollError::Classification { lambda1_x, lambda2_x });
    }
    Ok(PointClass {
        fr: lambda2_x >= 0.0,
        fc: lambda2_x < 0.0,
        br: lambda1_x >= 0.0,
        bc: lambda1_x < 0.0,
    })
}

/// Fractions of scan points in each class at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub points: usize,
    pub fr: f64,
    pub br: f64,
    pub fc: f64,
    pub bc: f64,
}

pub fn classify_initial_data(data: &InitialData, params: &GammaParams) -> Result<ClassSummary> {
    let xs = data.sample_points();
    let mut counts = [0usize; 4];
    for &x in &xs {
        let rs = data.riemann(x, params)?;
        let d = data.derivative_field(x, params)?;
        let p = speed_partials(rs, params);
        let l1x = p[0][0] * d.w1_x + p[0][1] * d.w2_x;
        let l2x = p[1][0] * d.w1_x + p[1][1] * d.w2_x;
        let c = classify_point(l1x, l2x)?;
        for (k, flag) in [c.fr, c.br, c.fc, c.bc].into_iter().enumerate() {
            counts[k] += flag as usize;
        }
    }
    let n = xs.len() as f64;
    Ok(ClassSummary {
        points: xs.len(),
        fr: counts[0] as f64 / n,
        br: counts[1] as f64 / n,
        fc: counts[2] as f64 / n,
        bc: counts[3] as f64 / n,
    })
}

/// Infima and suprema of the initial Riemann invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RegionBounds {
    pub m1: f64,
    pub M1: f64,
    pub m2: f64,
    pub M2: f64,
}

impl RegionBounds {
    #[allow(non_snake_case)]
    pub fn new(m1: f64, M1: f64, m2: f64, M2: f64) -> Self {
        Self { m1, M1, m2, M2 }
    }

    pub fn contains(&self, rs: RiemannState, tol: f64) -> bool {
        rs.w1 >= self.m1 - tol && rs.w1 <= self.M1 + tol && rs.w2 >= self.m2 - tol && rs.w2 <= self.M2 + tol
    }
}

/// Extrema over the scan grid together with the far-field limits.
pub fn region_bounds(data: &InitialData, params: &GammaParams) -> Result<RegionBounds> {
    let xs = data.sample_points();
    if xs.is_empty() {
        return Err(CarrollError::Data("empty sample set".into()));
    }
    let ff = data.farfield();
    let mut b = RegionBounds::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let ends = [to_riemann(ff.left, params)?, to_riemann(ff.right, params)?];
    for rs in xs
        .iter()
        .map(|&x| data.riemann(x, params))
        .chain(ends.into_iter().map(Ok))
    {
        let rs = rs?;
        b.m1 = b.m1.min(rs.w1);
        b.M1 = b.M1.max(rs.w1);
        b.m2 = b.m2.min(rs.w2);
        b.M2 = b.M2.max(rs.w2);
    }
    Ok(b)
}

/// One inequality of the admissibility conditions with its evaluated left side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub checks: Vec<InequalityCheck>,
    /// Human-readable descriptions of every violated inequality.
    pub reasons: Vec<String>,
}

impl Admissibility {
    pub fn into_result(self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(CarrollError::Inadmissible(self.reasons))
        }
    }
}

pub fn admissibility_gate(bounds: &RegionBounds, params: &GammaParams) -> Admissibility {
    let th = params.theta();
    let mut checks = vec![
        InequalityCheck {
            name: "inf w1 > 0".into(),
            value: bounds.m1,
            holds: bounds.m1 > 0.0,
        },
        InequalityCheck {
            name: "sup w2 < 0".into(),
            value: bounds.M2,
            holds: bounds.M2 < 0.0,
        },
    ];
    if !params.is_gamma3() {
        let upper = (bounds.M1 - th * bounds.m1) + (1.0 + th) * bounds.M2;
        let lower = (1.0 + th) * bounds.m1 - (th * bounds.M2 - bounds.m2);
        checks.push(InequalityCheck {
            name: "(M1 - θ m1) + (1+θ) M2 < 0".into(),
            value: upper,
            holds: upper < 0.0,
        });
        checks.push(InequalityCheck {
            name: "(1+θ) m1 - (θ M2 - m2) > 0".into(),
            value: lower,
            holds: lower > 0.0,
        });
    }
    let reasons: Vec<String> = checks
        .iter()
        .filter(|c| !c.holds)
        .map(|c| match c.name.as_str() {
            "inf w1 > 0" => format!("inf w₁ ≤ 0 (inf w₁ = {})", c.value),
            "sup w2 < 0" => format!("sup w₂ ≥ 0 (sup w₂ = {})", c.value),
            other => format!("{other} fails (value {})", c.value),
        })
        .collect();
    Admissibility {
        admissible: reasons.is_empty(),
        checks,
        reasons,
    }
}

/// Two-sided bounds on `β − σ^θ = 1/λ₁` and `β + σ^θ = 1/λ₂` over the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueEnvelope {
    pub beta_minus_lo: f64,
    pub beta_minus_hi: f64,
    pub beta_plus_lo: f64,
    pub beta_plus_hi: f64,
}

impl EigenvalueEnvelope {
    /// Range of the fast speed `λ₂`, which transports `w₁`.
    pub fn lambda2_range(&self) -> (f64, f64) {
        (1.0 / self.beta_plus_hi, 1.0 / self.beta_plus_lo)
    }

    /// Range of the slow speed `λ₁`, which transports `w₂`.
    pub fn lambda1_range(&self) -> (f64, f64) {
        (1.0 / self.beta_minus_hi, 1.0 / self.beta_minus_lo)
    }

    pub fn max_speed(&self) -> f64 {
        (1.0 / self.beta_plus_lo).max(-1.0 / self.beta_minus_hi)
    }
}

/// Envelope of `β ∓ σ^θ`. For `γ = 3` these are `w₂` and `w₁` themselves,
/// so the box edges are used directly.
pub fn eigenvalue_envelope(bounds: &RegionBounds, params: &GammaParams) -> Result<EigenvalueEnvelope> {
    let th = params.theta();
    let RegionBounds { m1, M1, m2, M2 } = *bounds;
    let env = if params.is_gamma3() {
        EigenvalueEnvelope {
            beta_minus_lo: m2,
            beta_minus_hi: M2,
            beta_plus_lo: m1,
            beta_plus_hi: M1,
        }
    } else {
        EigenvalueEnvelope {
            beta_minus_lo: ((m1 - th * M1) + (1.0 + th) * m2) / 2.0,
            beta_minus_hi: ((M1 - th * m1) + (1.0 + th) * M2) / 2.0,
            beta_plus_lo: ((1.0 + th) * m1 - (th * M2 - m2)) / 2.0,
            beta_plus_hi: ((1.0 + th) * M1 + (M2 - th * m2)) / 2.0,
        }
    };
    if !(env.beta_minus_hi < 0.0) {
        return Err(CarrollError::Inadmissible(vec![format!(
            "β − σ^θ may reach {} ≥ 0",
            env.beta_minus_hi
        )]));
    }
    if !(env.beta_plus_lo > 0.0) {
        return Err(CarrollError::Inadmissible(vec![format!(
            "β + σ^θ may reach {} ≤ 0",
            env.beta_plus_lo
        )]));
    }
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionField {
    W1BelowMin,
    W1AboveMax,
    W2BelowMin,
    W2AboveMax,
    /// `σ^θ − |β| ≤ 0`.
    Cone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionViolation {
    pub index: usize,
    pub x: f64,
    pub field: RegionField,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCertificate {
    pub passed: bool,
    pub tolerance: f64,
    pub samples: usize,
    /// Largest overshoot of any `w_j` past its initial extrema (0 if none).
    pub max_excess: f64,
    /// Smallest `σ^θ − |β|` over the snapshot.
    pub min_cone_margin: f64,
    pub violations: Vec<RegionViolation>,
}

/// Checks a snapshot against the max–min principle and the hyperbolicity cone.
pub fn certify_runtime_region(
    xs: &[f64],
    field: &[RiemannState],
    bounds: &RegionBounds,
    params: &GammaParams,
    tol: f64,
) -> RegionCertificate {
    assert_eq!(xs.len(), field.len(), "positions and field must align");
    let th = params.theta();
    let per_point: Vec<(f64, f64, Vec<RegionViolation>)> = field
        .par_iter()
        .enumerate()
        .map(|(i, rs)| {
            let excesses = [
                (RegionField::W1BelowMin, bounds.m1 - rs.w1),
                (RegionField::W1AboveMax, rs.w1 - bounds.M1),
                (RegionField::W2BelowMin, bounds.m2 - rs.w2),
                (RegionField::W2AboveMax, rs.w2 - bounds.M2),
            ];
            let cone = th * (rs.w1 - rs.w2) / 2.0 - ((rs.w1 + rs.w2) / 2.0).abs();
            let mut bad: Vec<RegionViolation> = excesses
                .iter()
                .filter(|(_, e)| *e > tol || e.is_nan())
                .map(|&(field, excess)| RegionViolation { index: i, x: xs[i], field, excess })
                .collect();
            if !(cone > 0.0) {
                bad.push(RegionViolation {
                    index: i,
                    x: xs[i],
                    field: RegionField::Cone,
                    excess: -cone,
                });
            }
            let worst = excesses.iter().fold(0.0f64, |acc, (_, e)| acc.max(*e));
            (worst, cone, bad)
        })
        .collect();
    let mut cert = RegionCertificate {
        passed: true,
        tolerance: tol,
        samples: field.len(),
        max_excess: 0.0,
        min_cone_margin: f64::INFINITY,
        violations: Vec::new(),
    };
    for (worst, cone, bad) in per_point {
        cert.max_excess = cert.max_excess.max(worst);
        cert.min_cone_margin = cert.min_cone_margin.min(cone);
        cert.violations.extend(bad);
    }
    cert.passed = cert.violations.is_empty();
    cert
}
