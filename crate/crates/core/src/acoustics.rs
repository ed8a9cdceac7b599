//! Linearized Westervelt stepper
//!
//! ```text
//! alpha p_tt - r Lap p - b Lap p_t = g
//! ```
//!
//! with coefficients frozen per step, written as a first-order system in
//! `(p, v = p_t)` and advanced by backward Euler.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{
    average_to_faces, gradient_to_faces, l2_inner, laplacian_dirichlet, solve_tridiagonal_field, FaceField, NodeField,
};
use crate::heat::check_uniform_spacing;
use crate::model::{PhysicalParams, SpeedOfSoundModel};

pub const HISTORY_DEPTH: usize = 3;

/// Pressure and its rate at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticLevel {
    pub t: f64,
    pub p: NodeField,
    pub v: NodeField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticState {
    levels: VecDeque<AcousticLevel>,
}

impl AcousticState {
    pub fn new(t: f64, p: NodeField, v: NodeField) -> Result<Self> {
        Self::from_levels(vec![AcousticLevel { t, p, v }])
    }

    /// Levels ordered oldest first; only the last [`HISTORY_DEPTH`] are kept.
    pub fn from_levels(levels: Vec<AcousticLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InsufficientHistory { needed: 1, available: 0 });
        }
        let grid = *levels[0].p.grid();
        for level in &levels {
            if *level.p.grid() != grid || *level.v.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if !level.p.is_finite() || !level.v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite acoustic field at t = {}", level.t)));
            }
        }
        check_uniform_spacing(levels.iter().map(|l| l.t))?;
        let skip = levels.len().saturating_sub(HISTORY_DEPTH);
        Ok(Self {
            levels: levels.into_iter().skip(skip).collect(),
        })
    }

    pub fn current(&self) -> &AcousticLevel {
        self.levels.back().expect("acoustic state always holds a level")
    }

    pub fn level(&self, back: usize) -> Option<&AcousticLevel> {
        self.levels.len().checked_sub(back + 1).map(|i| &self.levels[i])
    }

    pub fn p(&self) -> &NodeField {
        &self.current().p
    }

    pub fn v(&self) -> &NodeField {
        &self.current().v
    }

    pub fn t(&self) -> f64 {
        self.current().t
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub(crate) fn pushed(&self, level: AcousticLevel) -> Self {
        let mut levels = self.levels.clone();
        if levels.len() == HISTORY_DEPTH {
            levels.pop_front();
        }
        levels.push_back(level);
        Self { levels }
    }
}

/// `p`, `p_t`, `p_tt`, `p_ttt` at the current level. The higher derivatives
/// are backward differences of the stored rate `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureDerivatives {
    pub p: NodeField,
    pub p_t: NodeField,
    pub p_tt: Option<NodeField>,
    pub p_ttt: Option<NodeField>,
}

pub fn pressure_derivatives(state: &AcousticState) -> PressureDerivatives {
    let l0 = state.current();
    let p_tt = state.level(1).map(|l1| {
        let inv = 1.0 / (l0.t - l1.t);
        l0.v.zip_map(&l1.v, |a, b| (a - b) * inv)
    });
    let p_ttt = state.level(2).map(|l2| {
        let l1 = state.level(1).expect("deeper level exists");
        let dt = l0.t - l1.t;
        let inv = 1.0 / (dt * dt);
        let vals = l0
            .v
            .values()
            .iter()
            .zip(l1.v.values())
            .zip(l2.v.values())
            .map(|((a, b), c)| (a - 2.0 * b + c) * inv)
            .collect();
        NodeField::from_vec(*l0.v.grid(), vals).expect("same grid")
    });
    PressureDerivatives {
        p: l0.p.clone(),
        p_t: l0.v.clone(),
        p_tt,
        p_ttt,
    }
}

/// Coefficients of the linear equation, frozen over one step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenCoefficients {
    pub alpha: NodeField,
    pub r: NodeField,
    pub g: NodeField,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub r_min: f64,
    /// Node where `alpha` attains its minimum.
    pub alpha_min_node: usize,
    /// Values of `alpha` and `r` on the boundary, where `p = p_t = 0` and
    /// the temperature vanishes.
    pub alpha_boundary: f64,
    pub r_boundary: f64,
}

impl FrozenCoefficients {
    pub fn new(alpha: NodeField, r: NodeField, g: NodeField, alpha_boundary: f64, r_boundary: f64) -> Result<Self> {
        if alpha.grid() != r.grid() || alpha.grid() != g.grid() {
            return Err(Error::GridMismatch);
        }
        let (alpha_min_node, alpha_min) = alpha
            .values()
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (j, a)| if a < best.1 { (j, a) } else { best });
        let alpha_max = alpha.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let r_min = r.values().iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            alpha,
            r,
            g,
            alpha_min,
            alpha_max,
            r_min,
            alpha_min_node,
            alpha_boundary,
            r_boundary,
        })
    }

    /// Spatially constant `alpha`, `r` and zero forcing.
    pub fn uniform(grid: crate::grid::Grid1D, alpha: f64, r: f64) -> Self {
        Self::new(NodeField::constant(grid, alpha), NodeField::constant(grid, r), NodeField::zeros(grid), alpha, r)
            .expect("same grid")
    }

    pub fn with_forcing(mut self, g: NodeField) -> Result<Self> {
        if g.grid() != self.alpha.grid() {
            return Err(Error::GridMismatch);
        }
        self.g = g;
        Ok(self)
    }

    /// `r` averaged onto faces, using the boundary value outside the domain.
    pub fn r_faces(&self) -> FaceField {
        average_to_faces(&self.r, self.r_boundary, self.r_boundary)
    }
}

/// `alpha = 1 - 2k(theta)p`, `r = h(theta)`, `g = 2k(theta) p_t^2`, nodewise.
pub fn assemble_coefficients(
    theta: &NodeField,
    p: &NodeField,
    p_t: &NodeField,
    model: &SpeedOfSoundModel,
    params: &PhysicalParams,
) -> Result<FrozenCoefficients> {
    if theta.grid() != p.grid() || theta.grid() != p_t.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *theta.grid();
    let n = grid.n();
    let (mut alpha, mut r, mut g) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let th = theta.values()[j];
        let h = model.h_eval(th)?;
        let k = params.beta_acous / (params.rho * h);
        let pt = p_t.values()[j];
        alpha.push(1.0 - 2.0 * k * p.values()[j]);
        r.push(h);
        g.push(2.0 * k * pt * pt);
    }
    FrozenCoefficients::new(
        NodeField::from_vec(grid, alpha)?,
        NodeField::from_vec(grid, r)?,
        NodeField::from_vec(grid, g)?,
        1.0,
        model.h_eval(0.0)?,
    )
}

/// Ok iff `alpha_min >= 1 - gamma_bar`. A failure is reported at step 0;
/// callers that know the step rewrite it.
pub fn check_nondegeneracy(coeffs: &FrozenCoefficients, gamma_bar: f64) -> Result<()> {
    if !(gamma_bar > 0.0 && gamma_bar < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma_bar must lie in (0, 1), got {gamma_bar}")));
    }
    if coeffs.alpha_min >= 1.0 - gamma_bar {
        Ok(())
    } else {
        Err(Error::Degenerate {
            step: 0,
            t: 0.0,
            alpha_min: coeffs.alpha_min,
            node: coeffs.alpha_min_node,
        })
    }
}

/// One backward Euler step; returns `(p', v')`.
pub fn westervelt_linear_update(
    p: &NodeField,
    v: &NodeField,
    coeffs: &FrozenCoefficients,
    dt: f64,
    params: &PhysicalParams,
) -> Result<(NodeField, NodeField)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if p.grid() != v.grid() || p.grid() != coeffs.alpha.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *p.grid();
    let n = grid.n();
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let alpha = coeffs.alpha.values();
    let r = coeffs.r.values();
    let lap_p = laplacian_dirichlet(p);

    let mut diag = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n - 1);
    let mut upper = Vec::with_capacity(n - 1);
    let mut rhs = Vec::with_capacity(n);
    for j in 0..n {
        let c = (dt * r[j] + params.b) * inv_dx2;
        diag.push(alpha[j] / dt + 2.0 * c);
        if j > 0 {
            lower.push(-c);
        }
        if j + 1 < n {
            upper.push(-c);
        }
        rhs.push(alpha[j] * v.values()[j] / dt + r[j] * lap_p.values()[j] + coeffs.g.values()[j]);
    }
    let v_next = solve_tridiagonal_field(&lower, &diag, &upper, &NodeField::from_vec(grid, rhs)?)?;
    let p_next = p.zip_map(&v_next, |a, w| a + dt * w);
    Ok((p_next, v_next))
}

pub fn westervelt_linear_step(state: &AcousticState, coeffs: &FrozenCoefficients, dt: f64, params: &PhysicalParams) -> Result<AcousticState> {
    let cur = state.current();
    let (p, v) = westervelt_linear_update(&cur.p, &cur.v, coeffs, dt, params)?;
    Ok(state.pushed(AcousticLevel { t: cur.t + dt, p, v }))
}

/// `E_1 = 1/2 (|sqrt(alpha) v|^2 + |sqrt(r) grad p|^2)` with `r` averaged to faces.
pub fn first_acoustic_energy(p: &NodeField, v: &NodeField, coeffs: &FrozenCoefficients) -> Result<f64> {
    let kinetic = crate::grid::weighted_norm_sq(&coeffs.alpha, v)?;
    let potential = crate::grid::weighted_norm_sq(&coeffs.r_faces(), &gradient_to_faces(p))?;
    Ok(0.5 * (kinetic + potential))
}

/// Defect of the first acoustic energy identity over the last step,
///
/// ```text
/// d/dt E_1 + b |grad p_t|^2
///   = <g, p_t> + 1/2 <alpha_t, p_t^2> - <grad r . grad p, p_t> + 1/2 <r_t, |grad p|^2>,
/// ```
///
/// with `d/dt` a backward difference and the `alpha_t`, `r_t` products taken
/// at the midpoint. `coeffs_prev` and `coeffs` belong to the two most recent
/// levels; `g` is taken from `coeffs`.
pub fn acoustic_identity_residual(state: &AcousticState, coeffs_prev: &FrozenCoefficients, coeffs: &FrozenCoefficients, params: &PhysicalParams) -> Result<f64> {
    let prev = state.level(1).ok_or(Error::InsufficientHistory {
        needed: 2,
        available: state.depth(),
    })?;
    let cur = state.current();
    let dt = cur.t - prev.t;

    let e_now = first_acoustic_energy(&cur.p, &cur.v, coeffs)?;
    let e_prev = first_acoustic_energy(&prev.p, &prev.v, coeffs_prev)?;
    let grad_v = gradient_to_faces(&cur.v);
    let lhs = (e_now - e_prev) / dt + params.b * l2_inner(&grad_v, &grad_v)?;

    let forcing = l2_inner(&coeffs.g, &cur.v)?;

    let alpha_t = coeffs.alpha.zip_map(&coeffs_prev.alpha, |a, b| (a - b) / dt);
    let v2_mid = cur.v.zip_map(&prev.v, |a, b| 0.5 * (a * a + b * b));
    let alpha_term = 0.5 * l2_inner(&alpha_t, &v2_mid)?;

    // grad(r v) = avg(r) grad v + avg(v) grad r holds exactly on faces.
    let grad_p = gradient_to_faces(&cur.p);
    let grad_r = crate::grid::gradient_with_boundary(&coeffs.r, coeffs.r_boundary, coeffs.r_boundary);
    let v_faces = average_to_faces(&cur.v, 0.0, 0.0);
    let transport = l2_inner(&grad_r.zip_map(&v_faces, |a, b| a * b), &grad_p)?;

    let r_t = coeffs.r_faces().zip_map(&coeffs_prev.r_faces(), |a, b| (a - b) / dt);
    let grad_p_prev = gradient_to_faces(&prev.p);
    let gp2_mid = grad_p.zip_map(&grad_p_prev, |a, b| 0.5 * (a * a + b * b));
    let r_term = 0.5 * l2_inner(&r_t, &gp2_mid)?;

    let rhs = forcing + alpha_term - transport + r_term;
    Ok((lhs - rhs).abs())
}
