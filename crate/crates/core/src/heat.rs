//! Implicit steppers for the Pennes-Cattaneo system
//!
//! ```text
//! m theta_t + div q + ell theta = f
//! tau q_t + q + kappa_a grad theta = 0
//! ```
//!
//! and its Fourier limit, together with the closed-form single-mode
//! (telegraph) solution used as an oracle.
//!
//! Both steppers are backward Euler. The Cattaneo step eliminates the new
//! flux, `q' = (tau q - dt kappa_a grad theta') / (tau + dt)`, leaving a
//! symmetric positive-definite tridiagonal system for `theta'`. At `tau = 0`
//! the elimination reduces to the Fourier step operation for operation.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{divergence_from_faces, gradient_to_faces, solve_tridiagonal_field, FaceField, NodeField};
use crate::model::PhysicalParams;

/// Number of time levels kept for derivative reconstruction.
pub const HISTORY_DEPTH: usize = 3;

/// Temperature and flux at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalLevel {
    pub t: f64,
    pub theta: NodeField,
    pub q: FaceField,
}

/// Current thermal state plus the two preceding levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    levels: VecDeque<ThermalLevel>,
}

impl ThermalState {
    /// A state with a single level (no history).
    pub fn new(t: f64, theta: NodeField, q: FaceField) -> Result<Self> {
        Self::from_levels(vec![ThermalLevel { t, theta, q }])
    }

    /// Builds a state from levels ordered oldest first. At most
    /// [`HISTORY_DEPTH`] levels are retained.
    pub fn from_levels(levels: Vec<ThermalLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InsufficientHistory { needed: 1, available: 0 });
        }
        let grid = *levels[0].theta.grid();
        for level in &levels {
            if *level.theta.grid() != grid || *level.q.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if !level.theta.is_finite() || !level.q.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite thermal field at t = {}", level.t)));
            }
        }
        check_uniform_spacing(levels.iter().map(|l| l.t))?;
        let skip = levels.len().saturating_sub(HISTORY_DEPTH);
        Ok(Self {
            levels: levels.into_iter().skip(skip).collect(),
        })
    }

    /// Initial state whose two virtual past levels are generated by stepping
    /// the continuous rates backwards (explicit Euler in reverse). The result
    /// is consistent with the backward Euler scheme: stepping level `-1` with
    /// [`cattaneo_step`] reproduces level `0`, and the first and second
    /// differences at `t0` equal the compatibility data `theta_1`, `q_1`.
    ///
    /// At `tau = 0` the flux carries no memory and `q0` is replaced by the
    /// Fourier flux `-kappa_a grad theta0`.
    pub fn with_backfill(t0: f64, theta0: NodeField, q0: FaceField, f: &NodeField, params: &PhysicalParams, dt: f64) -> Result<Self> {
        let current = initial_level(t0, theta0, q0, params);
        let prev = backfill_level(&current, f, params, dt);
        let oldest = backfill_level(&prev, f, params, dt);
        Self::from_levels(vec![oldest, prev, current])
    }

    pub fn current(&self) -> &ThermalLevel {
        self.levels.back().expect("thermal state always holds a level")
    }

    /// Level `back` steps before the current one (`0` is current).
    pub fn level(&self, back: usize) -> Option<&ThermalLevel> {
        self.levels.len().checked_sub(back + 1).map(|i| &self.levels[i])
    }

    pub fn theta(&self) -> &NodeField {
        &self.current().theta
    }

    pub fn q(&self) -> &FaceField {
        &self.current().q
    }

    pub fn t(&self) -> f64 {
        self.current().t
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Spacing of the two most recent levels.
    pub fn dt(&self) -> Option<f64> {
        Some(self.current().t - self.level(1)?.t)
    }

    pub(crate) fn pushed(&self, level: ThermalLevel) -> Self {
        let mut levels = self.levels.clone();
        if levels.len() == HISTORY_DEPTH {
            levels.pop_front();
        }
        levels.push_back(level);
        Self { levels }
    }
}

pub(crate) fn check_uniform_spacing(times: impl Iterator<Item = f64>) -> Result<()> {
    let times: Vec<f64> = times.collect();
    let steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(&first) = steps.first() {
        for &s in &steps {
            if !(s > 0.0) || (s - first).abs() > 1e-9 * first.abs() {
                return Err(Error::InvalidArgument("history time stamps must increase with uniform spacing".into()));
            }
        }
    }
    Ok(())
}

/// Fourier flux `-kappa_a grad theta`.
pub fn fourier_flux(theta: &NodeField, params: &PhysicalParams) -> FaceField {
    let kappa = params.kappa_a;
    gradient_to_faces(theta).map(|g| -kappa * g)
}

fn initial_level(t: f64, theta: NodeField, q: FaceField, params: &PhysicalParams) -> ThermalLevel {
    let q = if params.tau > 0.0 { q } else { fourier_flux(&theta, params) };
    ThermalLevel { t, theta, q }
}

/// Continuous time derivatives at a level:
/// `theta_t = (-div q - ell theta + f) / m` and, for `tau > 0`,
/// `q_t = -(q + kappa_a grad theta) / tau`.
pub fn thermal_rates(theta: &NodeField, q: &FaceField, f: &NodeField, params: &PhysicalParams) -> (NodeField, Option<FaceField>) {
    let m = params.m();
    let ell = params.ell();
    let div = divergence_from_faces(q);
    let theta_t = NodeField::from_vec(
        *theta.grid(),
        theta
            .values()
            .iter()
            .zip(div.values())
            .zip(f.values())
            .map(|((&th, &dq), &fj)| (-dq - ell * th + fj) / m)
            .collect(),
    )
    .expect("same grid");
    let q_t = (params.tau > 0.0).then(|| {
        let grad = gradient_to_faces(theta);
        let inv_tau = 1.0 / params.tau;
        q.zip_map(&grad, |qi, gi| -(qi + params.kappa_a * gi) * inv_tau)
    });
    (theta_t, q_t)
}

/// Virtual level one step before `level`, generated from the rates at `level`.
pub(crate) fn backfill_level(level: &ThermalLevel, f: &NodeField, params: &PhysicalParams, dt: f64) -> ThermalLevel {
    let (theta_t, q_t) = thermal_rates(&level.theta, &level.q, f, params);
    let theta = level.theta.zip_map(&theta_t, |a, r| a - dt * r);
    let q = match q_t {
        Some(q_t) => level.q.zip_map(&q_t, |a, r| a - dt * r),
        None => fourier_flux(&theta, params),
    };
    ThermalLevel { t: level.t - dt, theta, q }
}

fn check_step_args(dt: f64, params: &PhysicalParams) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(params.tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be nonnegative, got {}", params.tau)));
    }
    Ok(())
}

/// Solves `(m/dt + ell) theta' - diffusion * Lap_h theta' = rhs`.
fn solve_implicit_heat(rhs: &NodeField, diffusion: f64, dt: f64, params: &PhysicalParams) -> Result<NodeField> {
    let grid = rhs.grid();
    let n = grid.n();
    let coupling = diffusion / (grid.dx() * grid.dx());
    let diag = vec![params.m() / dt + params.ell() + 2.0 * coupling; n];
    let off = vec![-coupling; n - 1];
    solve_tridiagonal_field(&off, &diag, &off, rhs)
}

fn base_rhs(theta: &NodeField, f_next: &NodeField, dt: f64, params: &PhysicalParams) -> NodeField {
    let m_over_dt = params.m() / dt;
    f_next.zip_map(theta, |f, th| f + m_over_dt * th)
}

/// One backward Euler step of the Cattaneo system. Returns the new
/// `(theta, q)` pair.
pub fn cattaneo_update(theta: &NodeField, q: &FaceField, f_next: &NodeField, dt: f64, params: &PhysicalParams) -> Result<(NodeField, FaceField)> {
    check_step_args(dt, params)?;
    if theta.grid() != q.grid() || theta.grid() != f_next.grid() {
        return Err(Error::GridMismatch);
    }
    let tau = params.tau;
    // Exactly kappa_a when tau = 0.
    let diffusion = params.kappa_a * (dt / (tau + dt));
    let memory = tau / (tau + dt);

    let mut rhs = base_rhs(theta, f_next, dt, params);
    if tau > 0.0 {
        let div = divergence_from_faces(q);
        for (r, d) in rhs.values_mut().iter_mut().zip(div.values()) {
            *r -= memory * d;
        }
    }
    let theta_next = solve_implicit_heat(&rhs, diffusion, dt, params)?;

    let mut q_next = gradient_to_faces(&theta_next).map(|g| -diffusion * g);
    if tau > 0.0 {
        for (qn, qo) in q_next.values_mut().iter_mut().zip(q.values()) {
            *qn += memory * qo;
        }
    }
    Ok((theta_next, q_next))
}

/// Backward Euler step of the Cattaneo system; the state gains one level.
pub fn cattaneo_step(state: &ThermalState, f_next: &NodeField, dt: f64, params: &PhysicalParams) -> Result<ThermalState> {
    let cur = state.current();
    let (theta, q) = cattaneo_update(&cur.theta, &cur.q, f_next, dt, params)?;
    Ok(state.pushed(ThermalLevel { t: cur.t + dt, theta, q }))
}

/// Backward Euler step of the parabolic Pennes equation
/// `m theta_t - kappa_a Lap theta + ell theta = f`.
pub fn fourier_step(theta: &NodeField, f_next: &NodeField, dt: f64, params: &PhysicalParams) -> Result<NodeField> {
    check_step_args(dt, params)?;
    if theta.grid() != f_next.grid() {
        return Err(Error::GridMismatch);
    }
    let rhs = base_rhs(theta, f_next, dt, params);
    solve_implicit_heat(&rhs, params.kappa_a, dt, params)
}

/// [`fourier_step`] on a full thermal state; the flux is slaved to the
/// temperature through Fourier's law.
pub fn fourier_state_step(state: &ThermalState, f_next: &NodeField, dt: f64, params: &PhysicalParams) -> Result<ThermalState> {
    let cur = state.current();
    let theta = fourier_step(&cur.theta, f_next, dt, params)?;
    let q = fourier_flux(&theta, params);
    Ok(state.pushed(ThermalLevel { t: cur.t + dt, theta, q }))
}

/// Backward differences of order `k` (0, 1 or 2) of the temperature and flux.
pub fn reconstruct_time_derivatives(state: &ThermalState, k: usize) -> Result<(NodeField, FaceField)> {
    if k > 2 {
        return Err(Error::InvalidArgument(format!("derivative order {k} not supported")));
    }
    if state.depth() < k + 1 {
        return Err(Error::InsufficientHistory {
            needed: k + 1,
            available: state.depth(),
        });
    }
    let l0 = state.current();
    match k {
        0 => Ok((l0.theta.clone(), l0.q.clone())),
        1 => {
            let l1 = state.level(1).expect("depth checked");
            let inv = 1.0 / (l0.t - l1.t);
            Ok((
                l0.theta.zip_map(&l1.theta, |a, b| (a - b) * inv),
                l0.q.zip_map(&l1.q, |a, b| (a - b) * inv),
            ))
        }
        _ => {
            let l1 = state.level(1).expect("depth checked");
            let l2 = state.level(2).expect("depth checked");
            let dt = l0.t - l1.t;
            let inv = 1.0 / (dt * dt);
            let second = |a: &[f64], b: &[f64], c: &[f64]| -> Vec<f64> {
                a.iter().zip(b).zip(c).map(|((x, y), z)| (x - 2.0 * y + z) * inv).collect()
            };
            let grid = *l0.theta.grid();
            Ok((
                NodeField::from_vec(grid, second(l0.theta.values(), l1.theta.values(), l2.theta.values()))?,
                FaceField::from_vec(grid, second(l0.q.values(), l1.q.values(), l2.q.values()))?,
            ))
        }
    }
}

/// Closed-form solution of the single-mode telegraph equation
///
/// ```text
/// tau m T'' + (m + tau ell) T' + (ell + kappa_a lambda) T = 0,
/// T(0) = t0, T'(0) = t0_dot.
/// ```
///
/// At `tau = 0` the equation is first order and `t0_dot` is ignored.
pub fn telegraph_mode_oracle(params: &PhysicalParams, lambda: f64, t0: f64, t0_dot: f64, t: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidMode(lambda));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("oracle time must be nonnegative, got {t}")));
    }
    let m = params.m();
    let ell = params.ell();
    let stiffness = ell + params.kappa_a * lambda;
    if params.tau == 0.0 {
        return Ok(t0 * (-stiffness * t / m).exp());
    }
    let a = params.tau * m;
    let b = m + params.tau * ell;
    let c = stiffness;
    let disc = b * b - 4.0 * a * c;
    let scale = b * b + (4.0 * a * c).abs();
    if disc.abs() <= 1e-13 * scale {
        let r = -b / (2.0 * a);
        return Ok((t0 + (t0_dot - r * t0) * t) * (r * t).exp());
    }
    if disc > 0.0 {
        // Cancellation-free roots.
        let qv = -0.5 * (b + disc.sqrt());
        let r1 = qv / a;
        let r2 = if qv != 0.0 { c / qv } else { 0.0 };
        let big = (t0_dot - r2 * t0) / (r1 - r2);
        let small = t0 - big;
        Ok(big * (r1 * t).exp() + small * (r2 * t).exp())
    } else {
        let sigma = -b / (2.0 * a);
        let omega = (-disc).sqrt() / (2.0 * a);
        let cos_coeff = t0;
        let sin_coeff = (t0_dot - sigma * t0) / omega;
        Ok((sigma * t).exp() * (cos_coeff * (omega * t).cos() + sin_coeff * (omega * t).sin()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_inner, l2_norm_sq, laplacian_dirichlet, linf_norm, Grid1D};
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(1.0, n).unwrap()
    }

    /// Max-norm residual of both backward Euler equations.
    fn scheme_residual(old: (&NodeField, &FaceField), new: (&NodeField, &FaceField), f: &NodeField, dt: f64, p: &PhysicalParams) -> f64 {
        let div = divergence_from_faces(new.1);
        let mut worst: f64 = 0.0;
        for j in 0..f.len() {
            let r = p.m() * (new.0.values()[j] - old.0.values()[j]) / dt + div.values()[j] + p.ell() * new.0.values()[j] - f.values()[j];
            worst = worst.max(r.abs());
        }
        let grad = gradient_to_faces(new.0);
        for i in 0..new.1.len() {
            let r = p.tau * (new.1.values()[i] - old.1.values()[i]) / dt + new.1.values()[i] + p.kappa_a * grad.values()[i];
            worst = worst.max(r.abs());
        }
        worst
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid(16);
        let s = ThermalState::new(0.0, NodeField::zeros(g), FaceField::zeros(g)).unwrap();
        let next = cattaneo_step(&s, &NodeField::zeros(g), 0.01, &PhysicalParams::unit(0.1)).unwrap();
        assert!(next.theta().values().iter().all(|&v| v == 0.0));
        assert!(next.q().values().iter().all(|&v| v == 0.0));
        assert_eq!(next.depth(), 2);
    }

    #[test]
    fn tau_zero_matches_fourier_bitwise() {
        let g = grid(40);
        let p = PhysicalParams::unit(0.0);
        let theta = g.node_field(|x| (3.0 * x).sin() + x * x);
        let q = g.face_field(|x| x.cos());
        let f = g.node_field(|x| 1.0 + x);
        let (th, qn) = cattaneo_update(&theta, &q, &f, 0.013, &p).unwrap();
        let four = fourier_step(&theta, &f, 0.013, &p).unwrap();
        for (a, b) in th.values().iter().zip(four.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(qn, fourier_flux(&four, &p));
    }

    #[test]
    fn single_mode_step_matches_modal_backward_euler() {
        let g = grid(128);
        let p = PhysicalParams::unit(0.1);
        let dt = 0.01;
        let theta = g.sine_mode(1);
        let q = FaceField::zeros(g);
        let f = NodeField::zeros(g);
        let (th, qn) = cattaneo_update(&theta, &q, &f, dt, &p).unwrap();
        assert!(scheme_residual((&theta, &q), (&th, &qn), &f, dt, &p) <= 1e-10);

        // Modal system: m T' = s R - ell T, tau R' = -R - kappa s T.
        let s = g.mode_gradient_factor(1);
        let (m, ell, kap, tau) = (p.m(), p.ell(), p.kappa_a, p.tau);
        let a11 = m / dt + ell;
        let a12 = -s;
        let a21 = kap * s;
        let a22 = tau / dt + 1.0;
        let (b1, b2) = (m / dt, 0.0);
        let det = a11 * a22 - a12 * a21;
        let t_new = (b1 * a22 - a12 * b2) / det;
        let r_new = (a11 * b2 - a21 * b1) / det;

        let sin = g.sine_mode(1);
        let cos = g.cosine_mode(1);
        for j in 0..g.n() {
            assert!((th.values()[j] - t_new * sin.values()[j]).abs() < 1e-13);
        }
        for i in 0..=g.n() {
            assert!((qn.values()[i] - r_new * cos.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_with_general_data() {
        let g = grid(33);
        let p = PhysicalParams {
            rho_a: 1.3,
            c_a: 0.7,
            w: 0.4,
            kappa_a: 0.6,
            ..PhysicalParams::unit(0.02)
        };
        let theta = g.node_field(|x| x * (1.0 - x) * (5.0 * x).exp());
        let q = g.face_field(|x| (2.0 * x).sin());
        let f = g.node_field(|x| x.sqrt());
        let (th, qn) = cattaneo_update(&theta, &q, &f, 0.003, &p).unwrap();
        assert!(scheme_residual((&theta, &q), (&th, &qn), &f, 0.003, &p) <= 1e-10);
    }

    #[test]
    fn fourier_single_mode_amplitude() {
        let g = grid(128);
        let p = PhysicalParams::unit(0.0);
        let dt = 0.1;
        let theta = g.sine_mode(1);
        let next = fourier_step(&theta, &NodeField::zeros(g), dt, &p).unwrap();
        let lam = g.laplacian_eigenvalue(1);
        let ratio = 1.0 / (1.0 + dt * (1.0 + lam));
        for (a, b) in next.values().iter().zip(theta.values()) {
            assert!((a - ratio * b).abs() < 1e-14);
        }
        assert!(fourier_step(&NodeField::zeros(g), &NodeField::zeros(g), dt, &p)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn fourier_manufactured_forcing_is_stationary() {
        let g = grid(64);
        let p = PhysicalParams {
            w: 0.5,
            kappa_a: 2.0,
            ..PhysicalParams::unit(0.0)
        };
        let amp = 0.7;
        let lam = g.laplacian_eigenvalue(1);
        let theta = g.sine_mode(1).scaled(amp);
        let f = g.sine_mode(1).scaled(amp * (p.ell() + p.kappa_a * lam));
        let next = fourier_step(&theta, &f, 0.05, &p).unwrap();
        assert!(linf_norm(&(&next - &theta)) < 1e-12);
    }

    #[test]
    fn rejects_bad_step() {
        let g = grid(4);
        let s = ThermalState::new(0.0, NodeField::zeros(g), FaceField::zeros(g)).unwrap();
        assert!(cattaneo_step(&s, &NodeField::zeros(g), 0.0, &PhysicalParams::unit(0.1)).is_err());
    }

    #[test]
    fn derivative_reconstruction() {
        let g = grid(12);
        let dt = 0.25;
        let sin = g.sine_mode(1);
        let levels = |f: &dyn Fn(f64) -> f64| {
            (0..3)
                .map(|i| {
                    let t = 1.0 + i as f64 * dt;
                    ThermalLevel {
                        t,
                        theta: sin.scaled(f(t)),
                        q: FaceField::zeros(g),
                    }
                })
                .collect::<Vec<_>>()
        };
        let constant = ThermalState::from_levels(levels(&|_| 2.0)).unwrap();
        for k in [1, 2] {
            let (d, dq) = reconstruct_time_derivatives(&constant, k).unwrap();
            assert!(d.values().iter().chain(dq.values()).all(|&v| v == 0.0));
        }
        let linear = ThermalState::from_levels(levels(&|t| t)).unwrap();
        let (d, _) = reconstruct_time_derivatives(&linear, 1).unwrap();
        assert!(linf_norm(&(&d - &sin)) < 1e-12);
        let quad = ThermalState::from_levels(levels(&|t| t * t)).unwrap();
        let (d, _) = reconstruct_time_derivatives(&quad, 2).unwrap();
        assert!(linf_norm(&(&d - &sin.scaled(2.0))) < 1e-12);

        let short = ThermalState::new(0.0, sin.clone(), FaceField::zeros(g)).unwrap();
        assert_eq!(
            reconstruct_time_derivatives(&short, 1).unwrap_err(),
            Error::InsufficientHistory { needed: 2, available: 1 }
        );
    }

    #[test]
    fn history_ring_keeps_three_levels() {
        let g = grid(8);
        let p = PhysicalParams::unit(0.1);
        let mut s = ThermalState::new(0.0, g.sine_mode(1), FaceField::zeros(g)).unwrap();
        for _ in 0..5 {
            s = cattaneo_step(&s, &NodeField::zeros(g), 0.1, &p).unwrap();
        }
        assert_eq!(s.depth(), HISTORY_DEPTH);
        assert!((s.t() - 0.5).abs() < 1e-12);
        assert!((s.level(2).unwrap().t - 0.3).abs() < 1e-12);
    }

    #[test]
    fn non_uniform_history_rejected() {
        let g = grid(4);
        let lvl = |t| ThermalLevel {
            t,
            theta: NodeField::zeros(g),
            q: FaceField::zeros(g),
        };
        assert!(ThermalState::from_levels(vec![lvl(0.0), lvl(0.1), lvl(0.3)]).is_err());
    }

    #[test]
    fn backfill_is_consistent_with_the_scheme() {
        let g = grid(32);
        let p = PhysicalParams::unit(0.07);
        let dt = 0.01;
        let theta0 = g.node_field(|x| x * (1.0 - x) * (1.0 + x));
        let q0 = g.face_field(|x| 0.3 * (2.0 * x).cos());
        let f = g.node_field(|x| x);
        let s = ThermalState::with_backfill(0.0, theta0.clone(), q0.clone(), &f, &p, dt).unwrap();
        assert_eq!(s.depth(), 3);
        let prev = s.level(1).unwrap();
        let (th, qn) = cattaneo_update(&prev.theta, &prev.q, &f, dt, &p).unwrap();
        assert!(linf_norm(&(&th - &theta0)) < 1e-10);
        assert!(linf_norm(&(&qn - &q0)) < 1e-10);
        let (theta1, q1) = reconstruct_time_derivatives(&s, 1).unwrap();
        let (r_theta, r_q) = thermal_rates(&theta0, &q0, &f, &p);
        assert!(linf_norm(&(&theta1 - &r_theta)) < 1e-9);
        assert!(linf_norm(&(&q1 - &r_q.unwrap())) < 1e-9);
    }

    #[test]
    fn oracle_closed_forms() {
        let p = PhysicalParams::unit(0.0);
        let lam = std::f64::consts::PI.powi(2);
        assert_eq!(telegraph_mode_oracle(&p, lam, 1.3, -2.0, 0.0).unwrap(), 1.3);
        let v = telegraph_mode_oracle(&p, lam, 1.0, 0.0, 0.1).unwrap();
        assert!((v - (-(1.0 + lam) * 0.1f64).exp()).abs() < 1e-15);
        assert!((v - 0.337240).abs() < 1e-6);
        assert_eq!(telegraph_mode_oracle(&p, -1.0, 1.0, 0.0, 0.1), Err(Error::InvalidMode(-1.0)));
        let p = PhysicalParams::unit(0.1);
        for (t0, t0d) in [(1.0, -1.0), (0.0, 2.0), (-0.5, 0.3)] {
            assert!((telegraph_mode_oracle(&p, lam, t0, t0d, 0.0).unwrap() - t0).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_never_increases_without_source() {
        let g = grid(50);
        let p = PhysicalParams::unit(0.3);
        let dt = 0.02;
        let mut theta = g.node_field(|x| (x * (1.0 - x)).powf(0.3));
        let mut q = g.face_field(|x| (7.0 * x).sin());
        let energy = |th: &NodeField, q: &FaceField| 0.5 * (p.m() * p.kappa_a * l2_norm_sq(th) + p.tau * l2_norm_sq(q));
        let zero = NodeField::zeros(g);
        let mut e = energy(&theta, &q);
        for _ in 0..100 {
            let (th, qn) = cattaneo_update(&theta, &q, &zero, dt, &p).unwrap();
            let e_next = energy(&th, &qn);
            assert!(e_next <= e);
            e = e_next;
            theta = th;
            q = qn;
        }
    }

    #[test]
    fn cattaneo_converges_to_fourier_linearly_in_tau() {
        let g = grid(64);
        let dt = 0.01;
        let theta0 = g.sine_mode(1).scaled(0.5);
        let f = g.node_field(|x| x * (1.0 - x));
        let run = |tau: f64| {
            let p = PhysicalParams::unit(tau);
            let mut theta = theta0.clone();
            let mut q = fourier_flux(&theta0, &p);
            for _ in 0..50 {
                let (th, qn) = cattaneo_update(&theta, &q, &f, dt, &p).unwrap();
                theta = th;
                q = qn;
            }
            theta
        };
        let reference = run(0.0);
        let e1 = linf_norm(&(&run(0.02) - &reference));
        let e2 = linf_norm(&(&run(0.01) - &reference));
        let e3 = linf_norm(&(&run(0.005) - &reference));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn laplacian_term_matches_explicit_operator() {
        // Fourier step solves (m/dt + ell) u - kappa Lap u = rhs.
        let g = grid(20);
        let p = PhysicalParams::unit(0.0);
        let dt = 0.05;
        let theta = g.node_field(|x| x.powi(3) - x);
        let f = g.node_field(|x| x.cos());
        let u = fourier_step(&theta, &f, dt, &p).unwrap();
        let lap = laplacian_dirichlet(&u);
        for j in 0..g.n() {
            let lhs = (p.m() / dt + p.ell()) * u.values()[j] - p.kappa_a * lap.values()[j];
            let rhs = f.values()[j] + p.m() / dt * theta.values()[j];
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn single_mode_subspace_is_invariant(t in -2.0f64..2.0, r in -2.0f64..2.0, tau in 0.0f64..0.5, k in 1usize..6) {
            let g = grid(24);
            let p = PhysicalParams::unit(tau);
            let sin = g.sine_mode(k);
            let cos = g.cosine_mode(k);
            let (th, qn) = cattaneo_update(&sin.scaled(t), &cos.scaled(r), &NodeField::zeros(g), 0.01, &p).unwrap();
            let t_new = l2_inner(&th, &sin).unwrap() / l2_norm_sq(&sin);
            let r_new = l2_inner(&qn, &cos).unwrap() / l2_norm_sq(&cos);
            prop_assert!(linf_norm(&(&th - &sin.scaled(t_new))) < 1e-12);
            prop_assert!(linf_norm(&(&qn - &cos.scaled(r_new))) < 1e-11);
        }
    }
}
