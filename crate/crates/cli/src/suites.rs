//! Measurement routines behind the `verify` and `modes` subcommands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wpc_core::acoustics::{westervelt_linear_step, AcousticState, FrozenCoefficients};
use wpc_core::config::SimConfig;
use wpc_core::coupling::{simulate, RunOptions, ThermalScheme};
use wpc_core::energy::heat_balance_residual;
use wpc_core::energy::heat_energy;
use wpc_core::grid::{
    divergence_from_faces, gradient_to_faces, l2_inner, l2_norm, l2_norm_sq, laplacian_dirichlet, linf_norm, solve_tridiagonal, FaceField,
    Grid1D, NodeField,
};
use wpc_core::heat::{cattaneo_step, fourier_state_step, telegraph_mode_oracle, ThermalState};
use wpc_core::{PhysicalParams, Result};

/// Largest `|<div w, v> + <w, grad v>| / (|w| |v|)` over random pairs.
pub fn sbp_defect(n: usize, pairs: usize, seed: u64) -> Result<f64> {
    let g = Grid1D::new(1.0, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let w = g.face_field(|_| rng.gen_range(-1.0..1.0));
        let v = g.node_field(|_| rng.gen_range(-1.0..1.0));
        let defect = l2_inner(&divergence_from_faces(&w), &v)? + l2_inner(&w, &gradient_to_faces(&v))?;
        worst = worst.max(defect.abs() / (l2_norm(&w) * l2_norm(&v)));
    }
    Ok(worst)
}

/// `max |Lap_h x(1-x) + 2|` on the unit interval.
pub fn quadratic_laplacian_defect(n: usize) -> Result<f64> {
    let g = Grid1D::new(1.0, n)?;
    let lap = laplacian_dirichlet(&g.node_field(|x| x * (1.0 - x)));
    Ok(lap.values().iter().map(|v| (v + 2.0).abs()).fold(0.0, f64::max))
}

/// `max |Lap_h s_k + lambda_h(k) s_k| / lambda_h(k)`.
pub fn eigenpair_defect(grid: &Grid1D, k: usize) -> f64 {
    let s = grid.sine_mode(k);
    let lam = grid.laplacian_eigenvalue(k);
    let lap = laplacian_dirichlet(&s);
    linf_norm(&(&lap + &s.scaled(lam))) / lam
}

/// Relative residual of a random diagonally dominant tridiagonal solve.
pub fn tridiagonal_defect(n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lower: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let upper: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let diag: Vec<f64> = (0..n).map(|_| 2.5 + rng.gen_range(0.0..1.0)).collect();
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut r = diag[i] * x[i] - rhs[i];
        if i > 0 {
            r += lower[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            r += upper[i] * x[i + 1];
        }
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Single-mode heat run from `theta = amplitude * sin(k pi x / L)`, `q = 0`,
/// `f = 0`, compared with the telegraph solution at the discrete eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalRun {
    pub times: Vec<f64>,
    pub numeric: Vec<f64>,
    pub oracle: Vec<f64>,
    /// `E_0 + E_1 + E_2` at every step.
    pub e_tau: Vec<f64>,
    /// Heat balance residual at every step (index 0 uses the backfilled level).
    pub heat_residual: Vec<f64>,
}

impl ModalRun {
    pub fn max_error(&self) -> f64 {
        self.numeric.iter().zip(&self.oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

pub fn modal_heat_run(params: &PhysicalParams, grid: &Grid1D, k: usize, amplitude: f64, dt: f64, t_end: f64) -> Result<ModalRun> {
    let sin = grid.sine_mode(k);
    let sin_norm_sq = l2_norm_sq(&sin);
    let lambda = grid.laplacian_eigenvalue(k);
    let zero = NodeField::zeros(*grid);
    let mut state = ThermalState::with_backfill(0.0, sin.scaled(amplitude), FaceField::zeros(*grid), &zero, params, dt)?;
    // q0 = 0, so m T'(0) = -ell T(0).
    let t0_dot = -params.ell() * amplitude / params.m();
    let n_steps = (t_end / dt).round() as usize;
    let mut run = ModalRun {
        times: Vec::with_capacity(n_steps + 1),
        numeric: Vec::with_capacity(n_steps + 1),
        oracle: Vec::with_capacity(n_steps + 1),
        e_tau: Vec::with_capacity(n_steps + 1),
        heat_residual: Vec::with_capacity(n_steps + 1),
    };
    for n in 0..=n_steps {
        if n > 0 {
            state = if params.tau > 0.0 {
                cattaneo_step(&state, &zero, dt, params)?
            } else {
                fourier_state_step(&state, &zero, dt, params)?
            };
        }
        let t = n as f64 * dt;
        run.times.push(t);
        run.numeric.push(l2_inner(state.theta(), &sin)? / sin_norm_sq);
        run.oracle.push(telegraph_mode_oracle(params, lambda, amplitude, t0_dot, t)?);
        run.e_tau.push((0..3).map(|k| heat_energy(&state, params, k)).sum::<Result<f64>>()?);
        run.heat_residual.push(heat_balance_residual(&state, &zero, params)?);
    }
    Ok(run)
}

/// Scalar backward Euler recurrence for the mode amplitudes `(T, R)` of
/// `theta = T sin`, `q = R cos` and its energy-balance defect per step,
/// `|(E0' - E0)/dt + D0'|` with `E0 = (m kappa T^2 + tau R^2)/4` and
/// `D0 = (ell kappa T^2 + R^2)/2` on the unit interval; both mode shapes
/// have squared norm `L/2`.
pub fn modal_balance_defects(params: &PhysicalParams, length: f64, grad_factor: f64, amplitude: f64, dt: f64, n_steps: usize) -> Vec<f64> {
    let (m, ell, kap, tau) = (params.m(), params.ell(), params.kappa_a, params.tau);
    let w = 0.5 * length;
    let e0 = |t: f64, r: f64| 0.5 * w * (m * kap * t * t + tau * r * r);
    let d0 = |t: f64, r: f64| w * (ell * kap * t * t + r * r);
    let (mut t, mut r) = (amplitude, 0.0);
    let mut out = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let a11 = m / dt + ell;
        let a12 = -grad_factor;
        let a21 = kap * grad_factor;
        let a22 = tau / dt + 1.0;
        let b1 = m / dt * t;
        let b2 = tau / dt * r;
        let det = a11 * a22 - a12 * a21;
        let tn = (b1 * a22 - a12 * b2) / det;
        let rn = (a11 * b2 - a21 * b1) / det;
        out.push(((e0(tn, rn) - e0(t, r)) / dt + d0(tn, rn)).abs());
        t = tn;
        r = rn;
    }
    out
}

/// Manufactured damped wave `p = e^{-t} sin(pi x)` with `alpha = r = b = 1`
/// and `g = e^{-t} sin(pi x)`. Returns the nodal L2 error of `p` and the L2
/// error of its face gradient against `d_x p`, both at `t_end`.
pub fn acoustic_manufactured(n: usize, dt: f64, t_end: f64) -> Result<(f64, f64)> {
    let grid = Grid1D::new(1.0, n)?;
    let pi = std::f64::consts::PI;
    let params = PhysicalParams::unit(0.0);
    let sin = grid.node_field(|x| (pi * x).sin());
    let mut state = AcousticState::new(0.0, sin.clone(), sin.scaled(-1.0))?;
    let steps = (t_end / dt).round() as usize;
    let base = FrozenCoefficients::uniform(grid, 1.0, 1.0);
    for s in 1..=steps {
        let t = s as f64 * dt;
        let coeffs = base.clone().with_forcing(sin.scaled((-t).exp()))?;
        state = westervelt_linear_step(&state, &coeffs, dt, &params)?;
    }
    let t = steps as f64 * dt;
    let decay = (-t).exp();
    let nodal = l2_norm(&(state.p() - &sin.scaled(decay)));
    let exact_grad = grid.face_field(|x| decay * pi * (pi * x).cos());
    let h1 = l2_norm(&(&gradient_to_faces(state.p()) - &exact_grad));
    Ok((nodal, h1))
}

/// Observed orders `log2(e_i / e_{i+1})` of a halving sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Heat and acoustic balance residuals at `t_end` for `dt` and `dt/2`;
/// returns the two ratios `residual(dt) / residual(dt/2)`.
pub fn coupled_residual_ratios(config: &SimConfig, dt: f64, t_end: f64) -> Result<(f64, f64)> {
    let run = |dt: f64| -> Result<(f64, f64)> {
        let mut c = config.clone();
        c.time.dt = dt;
        c.time.t_end = t_end;
        c.time.output_stride = c.time.n_steps().max(1);
        c.time.snapshot_times.clear();
        let out = simulate(&c, RunOptions::default())?;
        let last = out.reports.last().expect("at least one row");
        Ok((last.heat_residual, last.acoustic_residual))
    };
    let coarse = run(dt)?;
    let fine = run(dt / 2.0)?;
    Ok((coarse.0 / fine.0, coarse.1 / fine.1))
}

/// True when a `tau = 0` run through the Cattaneo elimination reproduces the
/// dedicated Fourier run bit for bit.
pub fn tau_zero_paths_identical(config: &SimConfig) -> Result<bool> {
    let c = config.with_tau(0.0);
    let a = simulate(&c, RunOptions { scheme: ThermalScheme::Cattaneo, record_fields: true })?;
    let b = simulate(&c, RunOptions { scheme: ThermalScheme::Fourier, record_fields: true })?;
    Ok(fingerprint(&a) == fingerprint(&b))
}

fn fingerprint(run: &wpc_core::coupling::RunArtifacts) -> (Vec<u64>, String) {
    let fields = run
        .fields
        .iter()
        .flat_map(|s| [s.p.values(), s.p_t.values(), s.theta.values(), s.q.values()])
        .flat_map(|vals| vals.iter().map(|v| v.to_bits()))
        .collect();
    (fields, crate::output::timeseries_csv(&run.reports))
}

/// Largest step-to-step increase of a sequence (zero or negative when monotone).
pub fn max_increase(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Largest `E(t_n) - E(0) (1 + 2 c dt)^{-n}`; nonpositive when the bound holds.
pub fn decay_excess(values: &[f64], c: f64, dt: f64) -> f64 {
    let e0 = values[0];
    values
        .iter()
        .enumerate()
        .map(|(n, &e)| e - e0 * (1.0 + 2.0 * c * dt).powi(-(n as i32)))
        .fold(f64::NEG_INFINITY, f64::max)
}
