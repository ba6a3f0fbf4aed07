//! Pointwise algebra of the isentropic Carrollian system.
//!
//! The unknowns are the Carrollian stress `σ > 0` and velocity `β`. With
//! `θ = (γ − 1)/2` the Riemann invariants are `w₁ = β + σ^θ/θ` and
//! `w₂ = β − σ^θ/θ`, which diagonalise the system into
//!
//! ```text
//! ∂ₜw₁ + λ₂ ∂ₓw₁ = 0,    ∂ₜw₂ + λ₁ ∂ₓw₂ = 0,
//! λ₁ = 1/(β − σ^θ),      λ₂ = 1/(β + σ^θ).
//! ```
//!
//! Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{CarrollError, Result};

/// Default half-width of the band around `β = ±σ^θ` flagged as near-degenerate.
pub const DEFAULT_TOL_DEGENERACY: f64 = 1e-10;

/// Adiabatic exponent `γ ∈ (1, 3]` together with `θ = (γ − 1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    gamma: f64,
    theta: f64,
}

impl GammaParams {
    pub fn new(gamma: f64) -> Result<Self> {
        make_params(gamma)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Exponent `(1 − θ)/(2θ)` appearing in the Riccati integrand.
    pub fn riccati_exponent(&self) -> f64 {
        (1.0 - self.theta) / (2.0 * self.theta)
    }

    /// `γ = 3` is the decoupled case where `λ₁ = 1/w₂` and `λ₂ = 1/w₁`.
    pub fn is_gamma3(&self) -> bool {
        self.gamma == 3.0
    }
}

/// Builds the exponent pair, rejecting `γ` outside `(1, 3]`.
pub fn make_params(gamma: f64) -> Result<GammaParams> {
    if gamma == 1.0 {
        return Err(CarrollError::Isothermal);
    }
    if !(gamma > 1.0 && gamma <= 3.0) {
        return Err(CarrollError::Parameter { gamma });
    }
    Ok(GammaParams {
        gamma,
        theta: (gamma - 1.0) / 2.0,
    })
}

/// A phase-space point `(σ, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub sigma: f64,
    pub beta: f64,
}

impl FluidState {
    pub fn new(sigma: f64, beta: f64) -> Self {
        Self { sigma, beta }
    }
}

/// The diagonalising coordinates `(w₁, w₂)`; admissible states have `w₁ > w₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannState {
    pub w1: f64,
    pub w2: f64,
}

impl RiemannState {
    pub fn new(w1: f64, w2: f64) -> Self {
        Self { w1, w2 }
    }
}

/// Characteristic family, indexed by the invariant it carries.
///
/// `One` carries `w₁` and moves with the fast speed `λ₂`; `Two` carries `w₂`
/// and moves with the slow speed `λ₁`. Blow-up of `w_jₓ` happens along
/// family `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Family {
    pub const BOTH: [Family; 2] = [Family::One, Family::Two];

    pub fn index(self) -> usize {
        match self {
            Family::One => 0,
            Family::Two => 1,
        }
    }

    pub fn other(self) -> Family {
        match self {
            Family::One => Family::Two,
            Family::Two => Family::One,
        }
    }

    /// The invariant carried by this family.
    pub fn carried(self, rs: RiemannState) -> f64 {
        match self {
            Family::One => rs.w1,
            Family::Two => rs.w2,
        }
    }

    /// Speed of this family at `rs`.
    pub fn speed(self, rs: RiemannState, params: &GammaParams) -> f64 {
        let (l1, l2) = speeds(rs, params);
        match self {
            Family::One => l2,
            Family::Two => l1,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// Characteristic speeds and eigenstructure at one state.
///
/// `mu1`, `mu2` are the eigenvalues of `M`, the `lambda`s their reciprocals
/// (eigenvalues of `M⁻¹`). Eigenvectors are left unnormalised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub r1: [f64; 2],
    pub r2: [f64; 2],
    /// Set when `|β ∓ σ^θ|` falls inside the degeneracy warning band.
    pub near_degenerate: bool,
}

/// Quantities of the full Carrollian system recovered from `(σ, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityDiagnostics {
    pub epsilon: f64,
    pub varpi: f64,
    pub pi: f64,
    /// Galilean dual `(ρ, v, p)`.
    pub galilean: [f64; 3],
}

/// `σ^θ`, computed as `exp(θ log σ)`.
pub fn sigma_pow_theta(sigma: f64, params: &GammaParams) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(CarrollError::Liquescence { sigma });
    }
    Ok((params.theta * sigma.ln()).exp())
}

pub fn eigen(state: FluidState, params: &GammaParams) -> Result<EigenData> {
    eigen_with_band(state, params, DEFAULT_TOL_DEGENERACY)
}

/// Eigenstructure with an explicit degeneracy warning band.
pub fn eigen_with_band(
    state: FluidState,
    params: &GammaParams,
    tol_degeneracy: f64,
) -> Result<EigenData> {
    let s = sigma_pow_theta(state.sigma, params)?;
    let mu1 = state.beta - s;
    let mu2 = state.beta + s;
    if mu1 == 0.0 || mu2 == 0.0 {
        return Err(CarrollError::Degenerate {
            beta: state.beta,
            sigma_theta: s,
        });
    }
    // σ^{θ-1} = σ^θ / σ
    let tail = s / state.sigma;
    Ok(EigenData {
        lambda1: 1.0 / mu1,
        lambda2: 1.0 / mu2,
        mu1,
        mu2,
        r1: [1.0, -tail],
        r2: [1.0, tail],
        near_degenerate: mu1.abs() < tol_degeneracy || mu2.abs() < tol_degeneracy,
    })
}

/// Gradients `∇_(σ,β) λ₁` and `∇_(σ,β) λ₂` in closed form.
pub fn eigen_gradients(state: FluidState, params: &GammaParams) -> Result<[[f64; 2]; 2]> {
    let e = eigen(state, params)?;
    let th = params.theta * e.r2[1];
    Ok([
        [th / (e.mu1 * e.mu1), -1.0 / (e.mu1 * e.mu1)],
        [-th / (e.mu2 * e.mu2), -1.0 / (e.mu2 * e.mu2)],
    ])
}

pub fn to_riemann(state: FluidState, params: &GammaParams) -> Result<RiemannState> {
    let s = sigma_pow_theta(state.sigma, params)? / params.theta;
    Ok(RiemannState {
        w1: state.beta + s,
        w2: state.beta - s,
    })
}

pub fn from_riemann(rs: RiemannState, params: &GammaParams) -> Result<FluidState> {
    if !(rs.w1 > rs.w2) {
        return Err(CarrollError::Inversion { w1: rs.w1, w2: rs.w2 });
    }
    let s = params.theta * (rs.w1 - rs.w2) / 2.0;
    Ok(FluidState {
        sigma: (s.ln() / params.theta).exp(),
        beta: (rs.w1 + rs.w2) / 2.0,
    })
}

/// `D₁ = (1−θ)w₁ + (1+θ)w₂ = 2/λ₁`.
#[inline]
pub fn slow_denominator(rs: RiemannState, params: &GammaParams) -> f64 {
    let th = params.theta;
    (1.0 - th) * rs.w1 + (1.0 + th) * rs.w2
}

/// `D₂ = (1+θ)w₁ + (1−θ)w₂ = 2/λ₂`.
#[inline]
pub fn fast_denominator(rs: RiemannState, params: &GammaParams) -> f64 {
    let th = params.theta;
    (1.0 + th) * rs.w1 + (1.0 - th) * rs.w2
}

/// Characteristic speeds `(λ₁, λ₂)` written in Riemann coordinates.
#[inline]
pub fn speeds(rs: RiemannState, params: &GammaParams) -> (f64, f64) {
    (
        2.0 / slow_denominator(rs, params),
        2.0 / fast_denominator(rs, params),
    )
}

/// Partial derivatives `[[λ₁_w₁, λ₁_w₂], [λ₂_w₁, λ₂_w₂]]`.
pub fn speed_partials(rs: RiemannState, params: &GammaParams) -> [[f64; 2]; 2] {
    let th = params.theta;
    let d1 = slow_denominator(rs, params);
    let d2 = fast_denominator(rs, params);
    [
        [-2.0 * (1.0 - th) / (d1 * d1), -2.0 * (1.0 + th) / (d1 * d1)],
        [-2.0 * (1.0 + th) / (d2 * d2), -2.0 * (1.0 - th) / (d2 * d2)],
    ]
}

pub fn duality_diagnostics(state: FluidState, params: &GammaParams) -> Result<DualityDiagnostics> {
    let g = params.gamma;
    if !(state.sigma > 0.0) {
        return Err(CarrollError::Liquescence { sigma: state.sigma });
    }
    let s_gamma = (g * state.sigma.ln()).exp();
    let epsilon = s_gamma / g;
    let varpi = state.sigma * state.beta * state.beta / 2.0 + s_gamma / (g * (g - 1.0));
    Ok(DualityDiagnostics {
        epsilon,
        varpi,
        pi: 0.0,
        galilean: [state.sigma, state.beta, epsilon],
    })
}
