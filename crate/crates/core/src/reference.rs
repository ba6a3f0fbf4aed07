//! First-order upwind solver for the diagonal system
//! `∂ₜw₁ + λ₂∂ₓw₁ = 0`, `∂ₜw₂ + λ₁∂ₓw₂ = 0`.
//!
//! In the invariant region `λ₂ > 0 > λ₁`, so `w₁` takes a backward
//! difference and `w₂` a forward one. With Courant number at most one every
//! update is a convex combination of neighbouring values, so the discrete
//! extrema of each invariant never expand.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    admissibility_gate, certify_runtime_region, region_bounds, RegionBounds, RegionCertificate,
    DEFAULT_TOL_REGION_EXACT,
};
use crate::characteristics::blowup_bounds_general;
use crate::error::{CarrollError, Result};
use crate::gamma3::predict_blowup_gamma3;
use crate::initial_data::InitialData;
use crate::state::{speeds, GammaParams, RiemannState};

pub const MAX_CFL: f64 = 0.9;
pub const DEFAULT_CFL: f64 = 0.9;
/// Runs must stop before `(1 − margin)` times the predicted blow-up time.
pub const DEFAULT_BLOWUP_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dx: f64,
    pub cfl: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, cfl: f64) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(CarrollError::Config(format!("grid interval [{x_min}, {x_max}] is empty")));
        }
        if n_cells < 2 {
            return Err(CarrollError::Config(format!("grid needs at least 2 cells, got {n_cells}")));
        }
        if !(cfl > 0.0 && cfl <= MAX_CFL) {
            return Err(CarrollError::Config(format!("cfl={cfl} outside (0, {MAX_CFL}]")));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            dx: (x_max - x_min) / n_cells as f64,
            cfl,
        })
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    FarfieldConstant,
    Periodic,
}

/// Values outside the grid seen by one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ghosts {
    /// `left` feeds the backward difference of `w₁`, `right` the forward difference of `w₂`.
    Fixed { left: RiemannState, right: RiemannState },
    Periodic,
}

/// Largest `|λ|` over a field, with the sign pattern checked cell by cell.
pub fn max_speed(field: &[RiemannState], params: &GammaParams) -> Result<f64> {
    field
        .par_iter()
        .map(|&rs| {
            let (l1, l2) = speeds(rs, params);
            if !(l2 > 0.0) {
                return Err(CarrollError::Region { what: "lambda2", value: l2 });
            }
            if !(l1 < 0.0) {
                return Err(CarrollError::Region { what: "lambda1", value: l1 });
            }
            Ok(l2.max(-l1))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// One upwind step of size `dt`.
pub fn upwind_step(
    field: &[RiemannState],
    grid: &Grid1D,
    dt: f64,
    params: &GammaParams,
    ghosts: Ghosts,
) -> Result<Vec<RiemannState>> {
    let n = field.len();
    if n != grid.n_cells {
        return Err(CarrollError::Precondition(format!(
            "field has {n} cells, grid has {}",
            grid.n_cells
        )));
    }
    let smax = max_speed(field, params)?;
    let limit = grid.cfl * grid.dx / smax;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(CarrollError::TimeStep { dt, limit });
    }
    let r = dt / grid.dx;
    let (left, right) = match ghosts {
        Ghosts::Fixed { left, right } => (left, right),
        Ghosts::Periodic => (field[n - 1], field[0]),
    };
    let next: Vec<RiemannState> = (0..n)
        .into_par_iter()
        .map(|i| {
            let c = field[i];
            let west = if i == 0 { left } else { field[i - 1] };
            let east = if i + 1 == n { right } else { field[i + 1] };
            let (l1, l2) = speeds(c, params);
            RiemannState::new(c.w1 - r * l2 * (c.w1 - west.w1), c.w2 - r * l1 * (east.w2 - c.w2))
        })
        .collect();
    if let Some(bad) = next.iter().find(|rs| !(rs.w1 > rs.w2)) {
        return Err(CarrollError::Region {
            what: "w1 - w2",
            value: bad.w1 - bad.w2,
        });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub boundary: Boundary,
    pub tol_region: f64,
    pub allow_near_blowup: bool,
    pub blowup_margin: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            boundary: Boundary::FarfieldConstant,
            tol_region: DEFAULT_TOL_REGION_EXACT,
            allow_near_blowup: false,
            blowup_margin: DEFAULT_BLOWUP_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub grid: Grid1D,
    pub boundary: Boundary,
    pub bounds: RegionBounds,
    pub times: Vec<f64>,
    pub fields: Vec<Vec<RiemannState>>,
    pub certificates: Vec<RegionCertificate>,
    pub steps: usize,
    /// Lower bound on the blow-up time used for the safety check, if any.
    pub predicted_blowup: Option<f64>,
}

impl GridSolution {
    pub fn all_certified(&self) -> bool {
        self.certificates.iter().all(|c| c.passed)
    }

    pub fn snapshot(&self, t: f64) -> Option<&[RiemannState]> {
        self.times.iter().position(|&s| s == t).map(|k| self.fields[k].as_slice())
    }
}

/// Earliest time at which the data can lose smoothness, as far as the
/// predictors can tell: exact for `γ = 3`, the sharpened lower bound otherwise.
pub fn predicted_blowup_lower_bound(data: &InitialData, params: &GammaParams) -> Result<Option<f64>> {
    if params.is_gamma3() {
        Ok(predict_blowup_gamma3(data)?.t_star)
    } else {
        Ok(blowup_bounds_general(data, params)?.sharp_envelope.map(|e| e[0]))
    }
}

/// Marches from the sampled initial data to `t_end`, recording and
/// certifying a snapshot at `0`, at each requested time and at `t_end`.
pub fn run(
    data: &InitialData,
    grid: &Grid1D,
    t_end: f64,
    snapshot_times: &[f64],
    params: &GammaParams,
    opts: RunOptions,
) -> Result<GridSolution> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(CarrollError::Precondition(format!("t_end={t_end} must be finite and ≥ 0")));
    }
    let bounds = region_bounds(data, params)?;
    admissibility_gate(&bounds, params).into_result()?;
    let predicted = predicted_blowup_lower_bound(data, params)?;
    if let Some(tb) = predicted {
        let limit = (1.0 - opts.blowup_margin) * tb;
        if !opts.allow_near_blowup && t_end > limit {
            return Err(CarrollError::Horizon { t: t_end, horizon: limit });
        }
    }
    let xs = grid.centers();
    let mut field: Vec<RiemannState> = xs.iter().map(|&x| data.riemann(x, params)).collect::<Result<_>>()?;
    let ghosts = match opts.boundary {
        Boundary::Periodic => Ghosts::Periodic,
        Boundary::FarfieldConstant => Ghosts::Fixed {
            left: data.riemann(grid.x_min - 0.5 * grid.dx, params)?,
            right: data.riemann(grid.x_max + 0.5 * grid.dx, params)?,
        },
    };
    let mut stops: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s < t_end)
        .chain(std::iter::once(t_end))
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut sol = GridSolution {
        grid: *grid,
        boundary: opts.boundary,
        bounds,
        times: Vec::new(),
        fields: Vec::new(),
        certificates: Vec::new(),
        steps: 0,
        predicted_blowup: predicted,
    };
    let record = |sol: &mut GridSolution, t: f64, field: &[RiemannState]| {
        sol.certificates
            .push(certify_runtime_region(&xs, field, &bounds, params, opts.tol_region));
        sol.times.push(t);
        sol.fields.push(field.to_vec());
    };
    record(&mut sol, 0.0, &field);
    let mut t = 0.0;
    for &stop in &stops {
        while t < stop {
            let limit = grid.cfl * grid.dx / max_speed(&field, params)?;
            let dt = limit.min(stop - t);
            field = upwind_step(&field, grid, dt, params, ghosts)?;
            // land exactly on the snapshot time
            t = if dt == stop - t { stop } else { t + dt };
            sol.steps += 1;
        }
        if stop > 0.0 {
            record(&mut sol, stop, &field);
        }
    }
    Ok(sol)
}
