//! Nonlinear coupled integration by per-step Picard iteration: coefficients
//! are frozen at the current iterate, the linear Westervelt step runs first
//! and its fresh `p_t` feeds the absorbed-energy source of the heat step.

use rayon::prelude::*;

use crate::acoustics::{
    acoustic_identity_residual, assemble_coefficients, check_nondegeneracy, westervelt_linear_update, AcousticLevel, AcousticState,
    FrozenCoefficients,
};
use crate::config::{PicardSettings, SimConfig};
use crate::energy::{
    acoustic_energy, coefficient_diagnostics, heat_balance_residual, heat_dissipation, heat_energy, theta_higher_energy, EnergyReport,
    XNormAccumulator, SPATIAL_DIMENSION,
};
use crate::error::{Error, Result};
use crate::grid::{divergence_from_faces, gradient_to_faces, l2_norm, laplacian_dirichlet, FaceField, NodeField};
use crate::heat::{backfill_level, cattaneo_update, fourier_flux, fourier_step, ThermalLevel, ThermalState};
use crate::model::{q_source, validate_params, PhysicalParams, SpeedOfSoundModel};

/// Heat conduction law used inside the coupled step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermalScheme {
    /// Cattaneo elimination; reduces to Fourier at `tau = 0`.
    Cattaneo,
    /// Dedicated Fourier step; requires `tau = 0`.
    Fourier,
}

/// Time derivatives of the data at `t = 0` implied by the equations.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityData {
    pub p2: NodeField,
    pub theta1: NodeField,
    q1: Option<FaceField>,
}

impl CompatibilityData {
    /// `q_1 = -(q_0 + kappa_a grad theta_0)/tau`; undefined at `tau = 0`.
    pub fn q1(&self) -> Result<&FaceField> {
        self.q1.as_ref().ok_or(Error::TauZeroFluxDerivative)
    }
}

fn pressure_acceleration(p: &NodeField, v: &NodeField, coeffs: &FrozenCoefficients, b: f64) -> NodeField {
    let lap_p = laplacian_dirichlet(p);
    let lap_v = laplacian_dirichlet(v);
    let vals = (0..p.len())
        .map(|j| (coeffs.r.values()[j] * lap_p.values()[j] + b * lap_v.values()[j] + coeffs.g.values()[j]) / coeffs.alpha.values()[j])
        .collect();
    NodeField::from_vec(*p.grid(), vals).expect("same grid")
}

pub fn compatibility_data(
    p0: &NodeField,
    p1: &NodeField,
    theta0: &NodeField,
    q0: &FaceField,
    params: &PhysicalParams,
    model: &SpeedOfSoundModel,
) -> Result<CompatibilityData> {
    if q0.grid() != p0.grid() {
        return Err(Error::GridMismatch);
    }
    let coeffs = assemble_coefficients(theta0, p0, p1, model, params)?;
    if !(coeffs.alpha_min > 0.0) {
        return Err(Error::Degenerate {
            step: 0,
            t: 0.0,
            alpha_min: coeffs.alpha_min,
            node: coeffs.alpha_min_node,
        });
    }
    let p2 = pressure_acceleration(p0, p1, &coeffs, params.b);
    let f = q_source(params, p1);
    let (m, ell) = (params.m(), params.ell());
    let div = divergence_from_faces(q0);
    let theta1 = NodeField::from_vec(
        *theta0.grid(),
        (0..theta0.len())
            .map(|j| (-div.values()[j] - ell * theta0.values()[j] + f.values()[j]) / m)
            .collect(),
    )?;
    let q1 = (params.tau > 0.0).then(|| {
        let grad = gradient_to_faces(theta0);
        q0.zip_map(&grad, |q, g| -(q + params.kappa_a * g) / params.tau)
    });
    Ok(CompatibilityData { p2, theta1, q1 })
}

/// Full coupled state with the history needed by the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub acoustic: AcousticState,
    pub thermal: ThermalState,
    pub step: usize,
    /// Coefficients assembled at the current and the previous level.
    pub coeffs: FrozenCoefficients,
    pub coeffs_prev: FrozenCoefficients,
    /// Absorbed-energy source at the current level.
    pub source: NodeField,
    pub picard_iterations_last: usize,
    /// Largest ratio of successive Picard differences in the last step.
    pub picard_ratio_last: f64,
    pub alpha_min_last: f64,
}

impl CoupledState {
    pub fn t(&self) -> f64 {
        self.acoustic.t()
    }

    /// Initial state with two virtual past levels, generated by reverse
    /// Euler steps of the continuous rates so that one step of the coupled
    /// scheme from level `-1` reproduces the data. At `tau = 0` the flux is
    /// slaved to the temperature and `q0` is ignored.
    #[allow(clippy::too_many_arguments)]
    pub fn initial(
        p0: NodeField,
        p1: NodeField,
        theta0: NodeField,
        q0: FaceField,
        params: &PhysicalParams,
        model: &SpeedOfSoundModel,
        dt: f64,
        gamma_bar: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if p0.grid() != p1.grid() || p0.grid() != theta0.grid() || p0.grid() != q0.grid() {
            return Err(Error::GridMismatch);
        }
        let q0 = if params.tau > 0.0 { q0 } else { fourier_flux(&theta0, params) };
        let coeffs0 = assemble_coefficients(&theta0, &p0, &p1, model, params)?;
        check_nondegeneracy(&coeffs0, gamma_bar)?;
        let f0 = q_source(params, &p1);

        let th0 = ThermalLevel { t: 0.0, theta: theta0, q: q0 };
        let ac0 = AcousticLevel { t: 0.0, p: p0, v: p1 };
        let (th_m1, ac_m1) = backfill_coupled(&th0, &ac0, &coeffs0, &f0, params, dt);
        let coeffs_m1 = assemble_coefficients(&th_m1.theta, &ac_m1.p, &ac_m1.v, model, params)?;
        let f_m1 = q_source(params, &ac_m1.v);
        let (th_m2, ac_m2) = backfill_coupled(&th_m1, &ac_m1, &coeffs_m1, &f_m1, params, dt);

        Ok(Self {
            acoustic: AcousticState::from_levels(vec![ac_m2, ac_m1, ac0])?,
            thermal: ThermalState::from_levels(vec![th_m2, th_m1, th0])?,
            step: 0,
            alpha_min_last: coeffs0.alpha_min,
            coeffs: coeffs0,
            coeffs_prev: coeffs_m1,
            source: f0,
            picard_iterations_last: 0,
            picard_ratio_last: 0.0,
        })
    }
}

fn backfill_coupled(
    th: &ThermalLevel,
    ac: &AcousticLevel,
    coeffs: &FrozenCoefficients,
    f: &NodeField,
    params: &PhysicalParams,
    dt: f64,
) -> (ThermalLevel, AcousticLevel) {
    let th_prev = backfill_level(th, f, params, dt);
    let acc = pressure_acceleration(&ac.p, &ac.v, coeffs, params.b);
    let ac_prev = AcousticLevel {
        t: ac.t - dt,
        p: ac.p.zip_map(&ac.v, |p, v| p - dt * v),
        v: ac.v.zip_map(&acc, |v, a| v - dt * a),
    };
    (th_prev, ac_prev)
}

fn thermal_update(theta: &NodeField, q: &FaceField, f: &NodeField, dt: f64, params: &PhysicalParams, scheme: ThermalScheme) -> Result<(NodeField, FaceField)> {
    match scheme {
        ThermalScheme::Cattaneo => cattaneo_update(theta, q, f, dt, params),
        ThermalScheme::Fourier => {
            let th = fourier_step(theta, f, dt, params)?;
            let q = fourier_flux(&th, params);
            Ok((th, q))
        }
    }
}

fn locate(err: Error, step: usize, t: f64) -> Error {
    match err {
        Error::Degenerate { alpha_min, node, .. } => Error::Degenerate { step, t, alpha_min, node },
        other => other,
    }
}

/// One accepted time step of the nonlinear system.
pub fn coupled_step(
    state: &CoupledState,
    dt: f64,
    picard: &PicardSettings,
    params: &PhysicalParams,
    model: &SpeedOfSoundModel,
    scheme: ThermalScheme,
) -> Result<CoupledState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(picard.tol > 0.0) || picard.max_iter < 1 {
        return Err(Error::InvalidArgument("Picard tolerance must be positive and max_iter at least 1".into()));
    }
    if scheme == ThermalScheme::Fourier && params.tau != 0.0 {
        return Err(Error::InvalidArgument("the Fourier scheme requires tau = 0".into()));
    }
    let step = state.step + 1;
    let t_next = state.acoustic.t() + dt;
    let ac = state.acoustic.current();
    let th = state.thermal.current();

    let mut iterate = (ac.p.clone(), ac.v.clone(), th.theta.clone(), th.q.clone());
    let mut coeffs = state.coeffs.clone();
    let mut prev_d: Option<f64> = None;
    let mut max_ratio: f64 = 0.0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        check_nondegeneracy(&coeffs, picard.gamma_bar).map_err(|e| locate(e, step, t_next))?;
        let (p, v) = westervelt_linear_update(&ac.p, &ac.v, &coeffs, dt, params)?;
        let f = q_source(params, &v);
        let (theta, q) = thermal_update(&th.theta, &th.q, &f, dt, params, scheme)?;

        let d = l2_norm(&(&p - &iterate.0)) + l2_norm(&(&v - &iterate.1)) + l2_norm(&(&theta - &iterate.2));
        let scale = 1.0 + l2_norm(&p) + l2_norm(&v) + l2_norm(&theta);
        if let Some(pd) = prev_d {
            if pd > 0.0 {
                max_ratio = max_ratio.max(d / pd);
            }
        }
        let contracting = prev_d.is_none_or(|pd| d < pd);
        iterate = (p, v, theta, q);
        coeffs = assemble_coefficients(&iterate.2, &iterate.0, &iterate.1, model, params)?;
        if !d.is_finite() {
            return Err(Error::PicardDiverged {
                step,
                t: t_next,
                iterations,
                difference: d,
                contracting: false,
            });
        }
        if d <= picard.tol * scale {
            check_nondegeneracy(&coeffs, picard.gamma_bar).map_err(|e| locate(e, step, t_next))?;
            let (p, v, theta, q) = iterate;
            let source = q_source(params, &v);
            return Ok(CoupledState {
                acoustic: state.acoustic.pushed(AcousticLevel { t: t_next, p, v }),
                thermal: state.thermal.pushed(ThermalLevel { t: t_next, theta, q }),
                step,
                alpha_min_last: coeffs.alpha_min,
                coeffs_prev: state.coeffs.clone(),
                coeffs,
                source,
                picard_iterations_last: iterations,
                picard_ratio_last: max_ratio,
            });
        }
        if iterations >= picard.max_iter {
            return Err(Error::PicardDiverged {
                step,
                t: t_next,
                iterations,
                difference: d,
                contracting,
            });
        }
        prev_d = Some(d);
    }
}

/// Every diagnostic at the current level.
pub fn energy_report(state: &CoupledState, params: &PhysicalParams, t: f64, x_norm: (f64, f64, f64)) -> Result<EnergyReport> {
    let th = &state.thermal;
    let mut e = [0.0; 3];
    let mut d = [0.0; 3];
    for k in 0..3 {
        e[k] = heat_energy(th, params, k)?;
        d[k] = heat_dissipation(th, params, k)?;
    }
    let dt = state.acoustic.t() - state.acoustic.level(1).map_or(f64::NAN, |l| l.t);
    let (lambda, frak_f) = coefficient_diagnostics(&state.coeffs_prev, &state.coeffs, dt, SPATIAL_DIMENSION)?;
    Ok(EnergyReport {
        t,
        e,
        e_tau: e[0] + e[1] + e[2],
        d,
        d_total: d[0] + d[1] + d[2],
        theta: theta_higher_energy(th, params)?,
        acoustic: acoustic_energy(&state.acoustic, &state.coeffs, params)?,
        lambda,
        frak_f,
        alpha_min: state.coeffs.alpha_min,
        picard_iters: state.picard_iterations_last,
        heat_residual: heat_balance_residual(th, &state.source, params)?,
        acoustic_residual: acoustic_identity_residual(&state.acoustic, &state.coeffs_prev, &state.coeffs, params)?,
        x_norm,
    })
}

/// Field profile at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub p: NodeField,
    pub p_t: NodeField,
    pub theta: NodeField,
    pub q: FaceField,
}

impl Snapshot {
    pub const CSV_HEADER: &'static str = "x,p,p_t,theta,q_at_left_face";

    /// One row per node; the flux column is the face value at `x - dx/2`.
    pub fn csv_rows(&self) -> Vec<String> {
        let g = self.p.grid();
        (0..g.n())
            .map(|j| {
                [g.node_x(j), self.p.values()[j], self.p_t.values()[j], self.theta.values()[j], self.q.values()[j]]
                    .iter()
                    .map(|v| crate::energy::fmt_float(*v))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub scheme: ThermalScheme,
    /// Keep the fields at every output time.
    pub record_fields: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            scheme: ThermalScheme::Cattaneo,
            record_fields: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub reports: Vec<EnergyReport>,
    pub snapshots: Vec<Snapshot>,
    /// Fields at the report times, when requested.
    pub fields: Vec<Snapshot>,
    pub x_norm: (f64, f64, f64),
    pub max_picard_iterations: usize,
    pub max_picard_ratio: f64,
    pub min_alpha: f64,
    pub n_steps: usize,
}

fn snapshot(state: &CoupledState, t: f64) -> Snapshot {
    Snapshot {
        t,
        p: state.acoustic.p().clone(),
        p_t: state.acoustic.v().clone(),
        theta: state.thermal.theta().clone(),
        q: state.thermal.q().clone(),
    }
}

/// Runs the configured problem from `t = 0` to `T`. A report row is emitted
/// at step 0, every `output_stride` steps, and at the final step.
pub fn simulate(config: &SimConfig, options: RunOptions) -> Result<RunArtifacts> {
    validate_params(&config.params, &config.speed_model).map_err(Error::InvalidParams)?;
    let params = &config.params;
    let model = &config.speed_model;
    let dt = config.time.dt;
    let n_steps = config.time.n_steps();
    let stride = config.time.output_stride.max(1);
    let init = config.initial_fields();
    let mut state = CoupledState::initial(init.p0, init.p1, init.theta0, init.q0, params, model, dt, config.picard.gamma_bar)?;

    let snapshot_steps: Vec<usize> = config.time.snapshot_times.iter().map(|&s| ((s / dt).round() as usize).min(n_steps)).collect();
    let mut out = RunArtifacts {
        reports: Vec::new(),
        snapshots: vec![],
        fields: Vec::new(),
        x_norm: (0.0, 0.0, 0.0),
        max_picard_iterations: 0,
        max_picard_ratio: 0.0,
        min_alpha: state.coeffs.alpha_min,
        n_steps,
    };
    let mut snapshots: Vec<(usize, Snapshot)> = Vec::new();
    let mut xn = XNormAccumulator::new();

    for n in 0..=n_steps {
        if n > 0 {
            state = coupled_step(&state, dt, &config.picard, params, model, options.scheme)?;
            xn.integrate(&state.acoustic, &state.thermal, dt)?;
            out.max_picard_iterations = out.max_picard_iterations.max(state.picard_iterations_last);
            out.max_picard_ratio = out.max_picard_ratio.max(state.picard_ratio_last);
            out.min_alpha = out.min_alpha.min(state.alpha_min_last);
        }
        let t = n as f64 * dt;
        for (i, &s) in snapshot_steps.iter().enumerate() {
            if s == n {
                snapshots.push((i, snapshot(&state, t)));
            }
        }
        if n % stride == 0 || n == n_steps {
            xn.sample(&state.acoustic, &state.thermal)?;
            out.reports.push(energy_report(&state, params, t, xn.norms())?);
            if options.record_fields {
                out.fields.push(snapshot(&state, t));
            }
        }
    }
    snapshots.sort_by_key(|(i, _)| *i);
    out.snapshots = snapshots.into_iter().map(|(_, s)| s).collect();
    out.x_norm = xn.norms();
    Ok(out)
}

/// Distance of one relaxed run from the Fourier reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub tau: f64,
    pub e_theta: f64,
    pub e_p: f64,
    pub e_pt: f64,
    pub run: RunArtifacts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by `tau`, largest first.
    pub entries: Vec<SweepEntry>,
    pub reference: RunArtifacts,
}

/// Runs the Fourier reference (`tau = 0`) and one Cattaneo run per entry of
/// `tau_list`, concurrently, and measures the max-in-time L2 distances at
/// the report times.
pub fn tau_sweep(config: &SimConfig, tau_list: &[f64]) -> Result<SweepResult> {
    if tau_list.is_empty() || tau_list.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("tau_list must hold positive values".into()));
    }
    let mut taus = tau_list.to_vec();
    taus.sort_by(|a, b| b.total_cmp(a));

    let jobs: Vec<(f64, ThermalScheme)> = std::iter::once((0.0, ThermalScheme::Fourier))
        .chain(taus.iter().map(|&t| (t, ThermalScheme::Cattaneo)))
        .collect();
    let mut runs: Vec<Result<RunArtifacts>> = jobs
        .par_iter()
        .map(|&(tau, scheme)| {
            simulate(&config.with_tau(tau), RunOptions { scheme, record_fields: true }).map_err(|e| Error::SweepMember {
                tau,
                source: Box::new(e),
            })
        })
        .collect();
    let reference = runs.remove(0)?;

    let mut entries = Vec::with_capacity(taus.len());
    for (tau, run) in taus.into_iter().zip(runs) {
        let run = run?;
        let mut e = (0.0f64, 0.0f64, 0.0f64);
        for (a, b) in run.fields.iter().zip(&reference.fields) {
            e.0 = e.0.max(l2_norm(&(&a.theta - &b.theta)));
            e.1 = e.1.max(l2_norm(&(&a.p - &b.p)));
            e.2 = e.2.max(l2_norm(&(&a.p_t - &b.p_t)));
        }
        entries.push(SweepEntry {
            tau,
            e_theta: e.0,
            e_p: e.1,
            e_pt: e.2,
            run,
        });
    }
    Ok(SweepResult { entries, reference })
}
