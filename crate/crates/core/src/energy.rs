//! Energies, dissipations and coefficient diagnostics. Every time derivative
//! comes from the stored history, never from the stepper.

use crate::acoustics::{first_acoustic_energy, pressure_derivatives, AcousticState, FrozenCoefficients};
use crate::error::{Error, Result};
use crate::grid::{
    divergence_from_faces, gradient_to_faces, gradient_with_boundary, l2_inner, l2_norm, l2_norm_sq, l3_norm, laplacian_dirichlet,
    weighted_norm_sq, FaceField, NodeField,
};
use crate::heat::{reconstruct_time_derivatives, ThermalState};
use crate::model::PhysicalParams;

/// Spatial dimension of the discretization; fixes the exponent `4/(4-d)` in Lambda.
pub const SPATIAL_DIMENSION: usize = 1;

fn theta_q_derivative(state: &ThermalState, k: usize) -> Result<(NodeField, FaceField)> {
    reconstruct_time_derivatives(state, k)
}

/// `E_k = 1/2 (m kappa_a |d_t^k theta|^2 + tau |d_t^k q|^2)`.
pub fn heat_energy(state: &ThermalState, params: &PhysicalParams, k: usize) -> Result<f64> {
    let (th, q) = theta_q_derivative(state, k)?;
    Ok(0.5 * (params.m() * params.kappa_a * l2_norm_sq(&th) + params.tau * l2_norm_sq(&q)))
}

/// `D_k = ell kappa_a |d_t^k theta|^2 + |d_t^k q|^2`.
pub fn heat_dissipation(state: &ThermalState, params: &PhysicalParams, k: usize) -> Result<f64> {
    let (th, q) = theta_q_derivative(state, k)?;
    Ok(params.ell() * params.kappa_a * l2_norm_sq(&th) + l2_norm_sq(&q))
}

/// Temperature-only energies and dissipations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThetaEnergy {
    pub cal_e0: f64,
    pub cal_e1: f64,
    pub cal_d0: f64,
    pub cal_d1: f64,
}

impl ThetaEnergy {
    pub fn total(&self) -> f64 {
        self.cal_e0 + self.cal_e1
    }
}

pub fn theta_higher_energy(state: &ThermalState, params: &PhysicalParams) -> Result<ThetaEnergy> {
    let (th, _) = theta_q_derivative(state, 0)?;
    let (th_t, _) = theta_q_derivative(state, 1)?;
    let (th_tt, _) = theta_q_derivative(state, 2)?;
    let (m, ell, kappa, tau) = (params.m(), params.ell(), params.kappa_a, params.tau);
    let l2_sum = l2_norm_sq(&th) + l2_norm_sq(&th_t) + l2_norm_sq(&th_tt);
    let grad = l2_norm_sq(&gradient_to_faces(&th));
    let grad_t = l2_norm_sq(&gradient_to_faces(&th_t));
    let lap = l2_norm_sq(&laplacian_dirichlet(&th));
    Ok(ThetaEnergy {
        cal_e0: 0.5 * m * kappa * l2_sum,
        cal_e1: 0.5 * (m + tau * ell) * grad + kappa * grad_t + kappa * lap,
        cal_d0: ell * kappa * l2_sum,
        cal_d1: ell * grad + kappa * grad_t + kappa * lap,
    })
}

/// `|(E_0^{n+1} - E_0^n)/dt + D_0^{n+1} - kappa_a <f^{n+1}, theta^{n+1}>|`
/// over the two most recent levels; `f` is the source at the current level.
pub fn heat_balance_residual(state: &ThermalState, f: &NodeField, params: &PhysicalParams) -> Result<f64> {
    let prev = state.level(1).ok_or(Error::InsufficientHistory {
        needed: 2,
        available: state.depth(),
    })?;
    let cur = state.current();
    let dt = cur.t - prev.t;
    let energy = |th: &NodeField, q: &FaceField| 0.5 * (params.m() * params.kappa_a * l2_norm_sq(th) + params.tau * l2_norm_sq(q));
    let e_now = energy(&cur.theta, &cur.q);
    let e_prev = energy(&prev.theta, &prev.q);
    let d_now = params.ell() * params.kappa_a * l2_norm_sq(&cur.theta) + l2_norm_sq(&cur.q);
    let source = params.kappa_a * l2_inner(f, &cur.theta)?;
    Ok(((e_now - e_prev) / dt + d_now - source).abs())
}

/// Acoustic energies and the lowest dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcousticEnergy {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: f64,
    pub d0: f64,
}

/// Needs three history levels (for `p_tt` and `p_ttt`). `r` enters face
/// norms through its face average.
pub fn acoustic_energy(state: &AcousticState, coeffs: &FrozenCoefficients, params: &PhysicalParams) -> Result<AcousticEnergy> {
    if state.depth() < 3 {
        return Err(Error::InsufficientHistory {
            needed: 3,
            available: state.depth(),
        });
    }
    let d = pressure_derivatives(state);
    let p_tt = d.p_tt.expect("depth checked");
    let p_ttt = d.p_ttt.expect("depth checked");
    let b = params.b;
    let r_faces = coeffs.r_faces();

    let grad_pt = gradient_to_faces(&d.p_t);
    let grad_ptt = gradient_to_faces(&p_tt);
    let lap_p = laplacian_dirichlet(&d.p);
    let grad_lap_p = gradient_to_faces(&lap_p);
    let lap_pt = laplacian_dirichlet(&d.p_t);

    let e1 = first_acoustic_energy(&d.p, &d.p_t, coeffs)?;
    let e2 = 0.5 * (weighted_norm_sq(&coeffs.alpha, &p_tt)? + weighted_norm_sq(&r_faces, &grad_pt)? + b * l2_norm_sq(&lap_p));
    let e3 = 0.5 * (b * l2_norm_sq(&grad_ptt) + b * l2_norm_sq(&grad_lap_p));
    let d0 = b * l2_norm_sq(&grad_pt)
        + b * l2_norm_sq(&grad_ptt)
        + weighted_norm_sq(&coeffs.r, &lap_p)?
        + b * l2_norm_sq(&lap_pt)
        + weighted_norm_sq(&r_faces, &grad_lap_p)?
        + weighted_norm_sq(&coeffs.alpha, &p_ttt)?;
    Ok(AcousticEnergy {
        e1,
        e2,
        e3,
        total: e1 + e2 + e3,
        d0,
    })
}

/// `(Lambda, F)` from the coefficients at the two most recent levels.
/// `dim` fixes the exponent `4/(4-dim)`.
pub fn coefficient_diagnostics(prev: &FrozenCoefficients, cur: &FrozenCoefficients, dt: f64, dim: usize) -> Result<(f64, f64)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!("spatial dimension must be 1, 2 or 3, got {dim}")));
    }
    if prev.alpha.grid() != cur.alpha.grid() {
        return Err(Error::GridMismatch);
    }
    let exponent = 4.0 / (4.0 - dim as f64);
    let alpha_t = cur.alpha.zip_map(&prev.alpha, |a, b| (a - b) / dt);
    let r_t = cur.r.zip_map(&prev.r, |a, b| (a - b) / dt);
    let grad_r = gradient_with_boundary(&cur.r, cur.r_boundary, cur.r_boundary);
    let grad_alpha = gradient_with_boundary(&cur.alpha, cur.alpha_boundary, cur.alpha_boundary);

    let alpha_t_l2 = l2_norm(&alpha_t);
    let lambda = alpha_t_l2 * alpha_t_l2
        + alpha_t_l2.powf(exponent)
        + l2_norm(&r_t).powf(exponent)
        + l2_norm_sq(&grad_r)
        + l3_norm(&r_t).powi(2)
        + l3_norm(&alpha_t).powi(2)
        + l3_norm(&grad_r).powi(2)
        + l3_norm(&grad_alpha).powi(2);

    let g_t = cur.g.zip_map(&prev.g, |a, b| (a - b) / dt);
    let frak_f = l2_norm_sq(&gradient_to_faces(&cur.g)) + l2_norm_sq(&g_t);
    Ok((lambda, frak_f))
}

fn h1_node(u: &NodeField) -> f64 {
    (l2_norm_sq(u) + l2_norm_sq(&gradient_to_faces(u))).sqrt()
}

fn h2_node(u: &NodeField) -> f64 {
    (l2_norm_sq(u) + l2_norm_sq(&gradient_to_faces(u)) + l2_norm_sq(&laplacian_dirichlet(u))).sqrt()
}

fn h3_node(u: &NodeField) -> f64 {
    let lap = laplacian_dirichlet(u);
    (l2_norm_sq(u) + l2_norm_sq(&gradient_to_faces(u)) + l2_norm_sq(&lap) + l2_norm_sq(&gradient_to_faces(&lap))).sqrt()
}

fn h1_face(w: &FaceField) -> f64 {
    (l2_norm_sq(w) + l2_norm_sq(&divergence_from_faces(w))).sqrt()
}

/// Running accumulation of the solution-space norms of `p`, `theta`, `q`.
/// Sup-in-time terms are running maxima over sampled levels; L2-in-time
/// terms are `dt`-weighted sums.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct XNormAccumulator {
    sup_p_h3: f64,
    sup_pt_h2: f64,
    sq_grad_lap_pt: f64,
    sup_grad_ptt: f64,
    sq_lap_ptt: f64,
    sq_pttt: f64,
    sup_theta_h2: f64,
    sup_theta_t_h1: f64,
    sup_theta_tt: f64,
    sup_q_h1: f64,
    sq_q_t: f64,
    sq_q_tt: f64,
}

impl XNormAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Updates the running maxima with the current level.
    pub fn sample(&mut self, acoustic: &AcousticState, thermal: &ThermalState) -> Result<()> {
        let d = pressure_derivatives(acoustic);
        self.sup_p_h3 = self.sup_p_h3.max(h3_node(&d.p));
        self.sup_pt_h2 = self.sup_pt_h2.max(h2_node(&d.p_t));
        if let Some(p_tt) = &d.p_tt {
            self.sup_grad_ptt = self.sup_grad_ptt.max(l2_norm(&gradient_to_faces(p_tt)));
        }
        let (th, q) = reconstruct_time_derivatives(thermal, 0)?;
        self.sup_theta_h2 = self.sup_theta_h2.max(h2_node(&th));
        self.sup_q_h1 = self.sup_q_h1.max(h1_face(&q));
        if thermal.depth() >= 2 {
            let (th_t, _) = reconstruct_time_derivatives(thermal, 1)?;
            self.sup_theta_t_h1 = self.sup_theta_t_h1.max(h1_node(&th_t));
        }
        if thermal.depth() >= 3 {
            let (th_tt, _) = reconstruct_time_derivatives(thermal, 2)?;
            self.sup_theta_tt = self.sup_theta_tt.max(l2_norm(&th_tt));
        }
        Ok(())
    }

    /// Adds `dt` times the squared integrands at the current level.
    pub fn integrate(&mut self, acoustic: &AcousticState, thermal: &ThermalState, dt: f64) -> Result<()> {
        let d = pressure_derivatives(acoustic);
        self.sq_grad_lap_pt += dt * l2_norm_sq(&gradient_to_faces(&laplacian_dirichlet(&d.p_t)));
        if let Some(p_tt) = &d.p_tt {
            self.sq_lap_ptt += dt * l2_norm_sq(&laplacian_dirichlet(p_tt));
        }
        if let Some(p_ttt) = &d.p_ttt {
            self.sq_pttt += dt * l2_norm_sq(p_ttt);
        }
        if thermal.depth() >= 2 {
            self.sq_q_t += dt * l2_norm_sq(&reconstruct_time_derivatives(thermal, 1)?.1);
        }
        if thermal.depth() >= 3 {
            self.sq_q_tt += dt * l2_norm_sq(&reconstruct_time_derivatives(thermal, 2)?.1);
        }
        Ok(())
    }

    /// `(|p|_{X_p}, |theta|_{X_theta}, |q|_{X_q})`.
    pub fn norms(&self) -> (f64, f64, f64) {
        let xp = self.sup_p_h3
            + self.sup_pt_h2
            + self.sq_grad_lap_pt.sqrt()
            + self.sup_grad_ptt
            + self.sq_lap_ptt.sqrt()
            + self.sq_pttt.sqrt();
        let xt = self.sup_theta_h2 + self.sup_theta_t_h1 + self.sup_theta_tt;
        let xq = self.sup_q_h1 + self.sq_q_t.sqrt() + self.sq_q_tt.sqrt();
        (xp, xt, xq)
    }
}

/// Gronwall bound `u0 e^{A(t)} + int_0^t beta(s) e^{A(t)-A(s)} ds` with
/// `A(t) = int_0^t alpha`, both integrals by the trapezoidal rule on `t_grid`.
pub fn gronwall_bound(u0: f64, alpha: &[f64], beta: &[f64], t_grid: &[f64]) -> Result<Vec<f64>> {
    let n = t_grid.len();
    if alpha.len() != n || beta.len() != n {
        return Err(Error::InvalidArgument("gronwall samples must match the time grid".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    crate::heat::check_uniform_spacing(t_grid.iter().copied())?;
    let mut a = vec![0.0; n];
    for i in 1..n {
        let h = t_grid[i] - t_grid[i - 1];
        a[i] = a[i - 1] + 0.5 * h * (alpha[i] + alpha[i - 1]);
    }
    // int_0^t beta e^{-A} accumulated, then rescaled by e^{A(t)}.
    let mut j = 0.0;
    let mut out = Vec::with_capacity(n);
    out.push(u0);
    for i in 1..n {
        let h = t_grid[i] - t_grid[i - 1];
        j += 0.5 * h * (beta[i] * (-a[i]).exp() + beta[i - 1] * (-a[i - 1]).exp());
        out.push(a[i].exp() * (u0 + j));
    }
    Ok(out)
}

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    pub t: f64,
    pub e: [f64; 3],
    pub e_tau: f64,
    pub d: [f64; 3],
    pub d_total: f64,
    pub theta: ThetaEnergy,
    pub acoustic: AcousticEnergy,
    pub lambda: f64,
    pub frak_f: f64,
    pub alpha_min: f64,
    pub picard_iters: usize,
    pub heat_residual: f64,
    pub acoustic_residual: f64,
    pub x_norm: (f64, f64, f64),
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str = "t,E0,E1,E2,E_tau,D0,D1,D2,cal_E0,cal_E1,acE1,acE2,acE3,acE_total,lambda,frakF,alpha_min,picard_iters,heat_residual,acoustic_residual";

    pub fn csv_row(&self) -> String {
        let floats = [
            self.t,
            self.e[0],
            self.e[1],
            self.e[2],
            self.e_tau,
            self.d[0],
            self.d[1],
            self.d[2],
            self.theta.cal_e0,
            self.theta.cal_e1,
            self.acoustic.e1,
            self.acoustic.e2,
            self.acoustic.e3,
            self.acoustic.total,
            self.lambda,
            self.frak_f,
            self.alpha_min,
        ];
        let mut fields: Vec<String> = floats.iter().map(|v| fmt_float(*v)).collect();
        fields.push(self.picard_iters.to_string());
        fields.push(fmt_float(self.heat_residual));
        fields.push(fmt_float(self.acoustic_residual));
        fields.join(",")
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::AcousticLevel;
    use crate::grid::Grid1D;
    use crate::heat::ThermalLevel;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(1.0, n).unwrap()
    }

    fn frozen_thermal(theta: &NodeField, q: &FaceField) -> ThermalState {
        ThermalState::from_levels(
            (0..3)
                .map(|i| ThermalLevel {
                    t: 0.1 * i as f64,
                    theta: theta.clone(),
                    q: q.clone(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn frozen_acoustic(p: &NodeField, v: &NodeField) -> AcousticState {
        AcousticState::from_levels(
            (0..3)
                .map(|i| AcousticLevel {
                    t: 0.1 * i as f64,
                    p: p.clone(),
                    v: v.clone(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn heat_energy_examples() {
        let g = grid(100);
        let p = PhysicalParams::unit(0.1);
        let s = frozen_thermal(&g.sine_mode(1), &FaceField::zeros(g));
        assert!((heat_energy(&s, &p, 0).unwrap() - 0.25).abs() < 1e-14);
        assert_eq!(heat_energy(&s, &p, 1).unwrap(), 0.0);
        assert_eq!(heat_energy(&s, &p, 2).unwrap(), 0.0);
        assert!((heat_dissipation(&s, &p, 0).unwrap() - 0.5).abs() < 1e-14);

        let z = frozen_thermal(&NodeField::zeros(g), &FaceField::zeros(g));
        for k in 0..3 {
            assert_eq!(heat_energy(&z, &p, k).unwrap(), 0.0);
            assert_eq!(heat_dissipation(&z, &p, k).unwrap(), 0.0);
        }

        let q = g.cosine_mode(1);
        let s = frozen_thermal(&NodeField::zeros(g), &q);
        assert!((heat_dissipation(&s, &p, 0).unwrap() - l2_norm_sq(&q)).abs() < 1e-15);
        assert_eq!(heat_energy(&s, &PhysicalParams::unit(0.0), 0).unwrap(), 0.0);
    }

    #[test]
    fn theta_higher_energy_mode() {
        let g = grid(64);
        let p = PhysicalParams::unit(0.1);
        let lam = g.laplacian_eigenvalue(1);
        let s = frozen_thermal(&g.sine_mode(1), &FaceField::zeros(g));
        let th = theta_higher_energy(&s, &p).unwrap();
        let expected = 0.55 * lam / 2.0 + lam * lam / 2.0;
        assert!((th.cal_e1 - expected).abs() < 1e-10 * expected);
        assert!((th.cal_e0 - 0.25).abs() < 1e-14);
        let zero = theta_higher_energy(&frozen_thermal(&NodeField::zeros(g), &FaceField::zeros(g)), &p).unwrap();
        assert_eq!(zero, ThetaEnergy::default());
    }

    #[test]
    fn acoustic_energy_examples() {
        let g = grid(64);
        let params = PhysicalParams::unit(0.0);
        let c = FrozenCoefficients::uniform(g, 1.0, 1.0);
        let lam = g.laplacian_eigenvalue(1);
        let s = frozen_acoustic(&NodeField::zeros(g), &g.sine_mode(1));
        let e = acoustic_energy(&s, &c, &params).unwrap();
        assert!((e.e1 - 0.25).abs() < 1e-14);
        assert!((e.e2 - lam / 4.0).abs() < 1e-10 * lam);
        assert_eq!(e.e3, 0.0);
        assert_eq!(e.total, e.e1 + e.e2 + e.e3);
        let z = frozen_acoustic(&NodeField::zeros(g), &NodeField::zeros(g));
        assert_eq!(acoustic_energy(&z, &c, &params).unwrap(), AcousticEnergy::default());
        let short = AcousticState::new(0.0, NodeField::zeros(g), NodeField::zeros(g)).unwrap();
        assert!(matches!(acoustic_energy(&short, &c, &params), Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn diagnostics_vanish_for_constant_coefficients() {
        let g = grid(32);
        let c = FrozenCoefficients::uniform(g, 1.0, 1.0);
        assert_eq!(coefficient_diagnostics(&c, &c, 0.01, 1).unwrap(), (0.0, 0.0));
        let r = g.node_field(|x| 1.0 + x * (1.0 - x));
        let c = FrozenCoefficients::new(NodeField::constant(g, 1.0), r.clone(), NodeField::zeros(g), 1.0, 1.0).unwrap();
        let (lam, f) = coefficient_diagnostics(&c, &c, 0.01, 1).unwrap();
        let grad_r = gradient_with_boundary(&r, 1.0, 1.0);
        let expected = l2_norm_sq(&grad_r) + l3_norm(&grad_r).powi(2);
        assert!((lam - expected).abs() < 1e-12);
        assert_eq!(f, 0.0);
    }

    #[test]
    fn forcing_diagnostic_for_decaying_mode() {
        let g = grid(128);
        let dt = 1e-4;
        let t = 0.5;
        let lam = g.laplacian_eigenvalue(1);
        let c = |time: f64| FrozenCoefficients::uniform(g, 1.0, 1.0).with_forcing(g.sine_mode(1).scaled((-time).exp())).unwrap();
        let (_, f) = coefficient_diagnostics(&c(t - dt), &c(t), dt, 1).unwrap();
        let expected = (-2.0 * t).exp() * (lam / 2.0 + 0.5);
        assert!((f - expected).abs() < 1e-3 * expected);
        let scaled = |time: f64| FrozenCoefficients::uniform(g, 1.0, 1.0).with_forcing(g.sine_mode(1).scaled(3.0 * (-time).exp())).unwrap();
        let (_, f3) = coefficient_diagnostics(&scaled(t - dt), &scaled(t), dt, 1).unwrap();
        assert!((f3 - 9.0 * f).abs() < 1e-9 * f3);
    }

    #[test]
    fn lambda_exponent_follows_dimension() {
        let g = grid(16);
        let a = FrozenCoefficients::uniform(g, 1.0, 1.0);
        let b = FrozenCoefficients::uniform(g, 1.0 - 0.02, 1.0);
        let dt = 0.01;
        // alpha_t = -2 everywhere, |alpha_t|_{L2} = 2 sqrt(N dx).
        let norm = 2.0 * (16.0 * g.dx()).sqrt();
        let (l1, _) = coefficient_diagnostics(&a, &b, dt, 1).unwrap();
        let (l2, _) = coefficient_diagnostics(&a, &b, dt, 2).unwrap();
        let l3_sq = (8.0 * 16.0 * g.dx()).powf(2.0 / 3.0);
        // Boundary jump of alpha contributes to grad alpha.
        let grad_alpha = l3_norm(&gradient_with_boundary(&b.alpha, b.alpha_boundary, b.alpha_boundary)).powi(2);
        assert!((l1 - (norm * norm + norm.powf(4.0 / 3.0) + l3_sq + grad_alpha)).abs() < 1e-9);
        assert!((l2 - (norm * norm + norm.powf(2.0) + l3_sq + grad_alpha)).abs() < 1e-9);
    }

    #[test]
    fn x_norm_examples() {
        let g = grid(64);
        let lam = g.laplacian_eigenvalue(1);
        let th = frozen_thermal(&g.sine_mode(1), &FaceField::zeros(g));
        let ac = frozen_acoustic(&NodeField::zeros(g), &NodeField::zeros(g));
        let mut acc = XNormAccumulator::new();
        let dt = 0.1;
        for _ in 0..10 {
            acc.sample(&ac, &th).unwrap();
            acc.integrate(&ac, &th, dt).unwrap();
        }
        let (xp, xt, xq) = acc.norms();
        assert_eq!(xp, 0.0);
        assert_eq!(xq, 0.0);
        assert!((xt - (0.5 + lam / 2.0 + lam * lam / 2.0).sqrt()).abs() < 1e-9 * xt);

        let zero = frozen_thermal(&NodeField::zeros(g), &FaceField::zeros(g));
        let mut acc = XNormAccumulator::new();
        acc.sample(&ac, &zero).unwrap();
        assert_eq!(acc.norms(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gronwall_closed_forms() {
        let n = 1001;
        let dt = 1e-3;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let zeros = vec![0.0; n];
        let u = gronwall_bound(2.5, &zeros, &zeros, &t).unwrap();
        assert!(u.iter().all(|&v| v == 2.5));
        let a = vec![0.7; n];
        let u = gronwall_bound(2.5, &a, &zeros, &t).unwrap();
        for (ui, ti) in u.iter().zip(&t) {
            assert!((ui - 2.5 * (0.7 * ti).exp()).abs() <= 1e-8);
        }
        let c = vec![1.3; n];
        let u = gronwall_bound(2.5, &zeros, &c, &t).unwrap();
        for (ui, ti) in u.iter().zip(&t) {
            assert!((ui - (2.5 + 1.3 * ti)).abs() <= 1e-8);
        }
    }

    #[test]
    fn gronwall_reproduces_exact_solution() {
        // u' = a(t) u + b(t) with a = cos t, b = 1: u = e^{sin t}(u0 + int_0^t e^{-sin s} ds).
        let n = 2001;
        let dt = 5e-4;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let a: Vec<f64> = t.iter().map(|s| s.cos()).collect();
        let b = vec![1.0; n];
        let u = gronwall_bound(0.5, &a, &b, &t).unwrap();
        // Reference by composite Simpson on a fine grid.
        let exact = |tt: f64| {
            let m = 2000;
            let h = tt / m as f64;
            let f = |s: f64| (-s.sin()).exp();
            let mut s = f(0.0) + f(tt);
            for i in 1..m {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            tt.sin().exp() * (0.5 + s * h / 3.0)
        };
        for i in (0..n).step_by(250) {
            assert!((u[i] - exact(t[i])).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_row_has_header_width() {
        let row = EnergyReport::default().csv_row();
        assert_eq!(row.split(',').count(), EnergyReport::CSV_HEADER.split(',').count());
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
    }

    proptest! {
        #[test]
        fn energies_are_nonnegative_and_quadratic(s in -3.0f64..3.0, a in 0.1f64..2.0, shift in 0.0f64..1.0) {
            let g = grid(24);
            let params = PhysicalParams::unit(0.2);
            let mk = |scale: f64| {
                let th = ThermalState::from_levels((0..3).map(|i| {
                    let t = 0.05 * i as f64;
                    ThermalLevel {
                        t,
                        theta: g.node_field(|x| scale * a * (x + t + shift).sin() * x * (1.0 - x)),
                        q: g.face_field(|x| scale * (x * 3.0 - t).cos()),
                    }
                }).collect()).unwrap();
                let ac = AcousticState::from_levels((0..3).map(|i| {
                    let t = 0.05 * i as f64;
                    AcousticLevel {
                        t,
                        p: g.node_field(|x| scale * (x * (1.0 - x) + t * t * x)),
                        v: g.node_field(|x| scale * (2.0 * x + shift).cos() * (1.0 + t)),
                    }
                }).collect()).unwrap();
                (th, ac)
            };
            let coeffs = FrozenCoefficients::new(g.node_field(|x| 0.6 + 0.2 * x), g.node_field(|x| 1.0 + x), NodeField::zeros(g), 0.6, 1.0).unwrap();
            let (th1, ac1) = mk(1.0);
            let (ths, acs) = mk(s);
            let e_heat: Vec<f64> = (0..3).map(|k| heat_energy(&th1, &params, k).unwrap()).collect();
            let e_heat_s: Vec<f64> = (0..3).map(|k| heat_energy(&ths, &params, k).unwrap()).collect();
            for (e1, es) in e_heat.iter().zip(&e_heat_s) {
                prop_assert!(*e1 >= 0.0);
                prop_assert!((es - s * s * e1).abs() <= 1e-9 * (1.0 + es.abs()));
            }
            let ac_e = acoustic_energy(&ac1, &coeffs, &params).unwrap();
            let ac_s = acoustic_energy(&acs, &coeffs, &params).unwrap();
            for (x, y) in [(ac_e.e1, ac_s.e1), (ac_e.e2, ac_s.e2), (ac_e.e3, ac_s.e3), (ac_e.d0, ac_s.d0)] {
                prop_assert!(x >= 0.0);
                prop_assert!((y - s * s * x).abs() <= 1e-9 * (1.0 + y.abs()));
            }
            let th_e = theta_higher_energy(&th1, &params).unwrap();
            let th_s = theta_higher_energy(&ths, &params).unwrap();
            prop_assert!((th_s.cal_e1 - s * s * th_e.cal_e1).abs() <= 1e-9 * (1.0 + th_s.cal_e1));
            prop_assert!((th_s.cal_e0 - s * s * th_e.cal_e0).abs() <= 1e-9 * (1.0 + th_s.cal_e0));
        }
    }
}
