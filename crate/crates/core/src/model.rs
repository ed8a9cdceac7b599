//! Medium parameters and the temperature-dependent constitutive laws.
//!
//! Temperatures here are always the shifted variable `theta = Theta - Theta_a`,
//! so the ambient temperature never enters an evaluation.

use crate::error::{Error, Result};
use crate::grid::NodeField;

/// Physical constants of the tissue/fluid medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Ambient density [kg/m^3]
    pub rho_a: f64,
    /// Ambient heat capacity [J/(kg K)]
    pub c_a: f64,
    /// Blood density [kg/m^3]
    pub rho_b: f64,
    /// Blood heat capacity [J/(kg K)]
    pub c_b: f64,
    /// Perfusion rate [1/s]
    pub w: f64,
    /// Thermal conductivity [W/(m K)]
    pub kappa_a: f64,
    /// Sound diffusivity [m^2/s]
    pub b: f64,
    /// Mass density [kg/m^3]
    pub rho: f64,
    /// Parameter of nonlinearity
    pub beta_acous: f64,
    /// Ambient temperature [K]
    pub theta_a: f64,
    /// Relaxation time [s]; zero selects Fourier conduction.
    pub tau: f64,
}

impl PhysicalParams {
    /// Volumetric heat capacity `rho_a * C_a`.
    pub fn m(&self) -> f64 {
        self.rho_a * self.c_a
    }

    /// Perfusion loss coefficient `rho_b * C_b * W`.
    pub fn ell(&self) -> f64 {
        self.rho_b * self.c_b * self.w
    }

    /// Exponential decay rate `min{ell/m, 2/tau}` of the Cattaneo energy.
    /// At `tau = 0` the second branch is infinite.
    pub fn decay_rate(&self) -> f64 {
        let perfusion = self.ell() / self.m();
        if self.tau > 0.0 {
            perfusion.min(2.0 / self.tau)
        } else {
            perfusion
        }
    }

    /// Coefficient of the absorbed-energy source `2b / (rho_a C_a^4)`.
    pub fn source_coefficient(&self) -> f64 {
        2.0 * self.b / (self.rho_a * self.c_a.powi(4))
    }

    /// Same medium with a different relaxation time.
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Unit medium: m = ell = kappa_a = b = rho = beta_acous = 1.
    pub fn unit(tau: f64) -> Self {
        Self {
            rho_a: 1.0,
            c_a: 1.0,
            rho_b: 1.0,
            c_b: 1.0,
            w: 1.0,
            kappa_a: 1.0,
            b: 1.0,
            rho: 1.0,
            beta_acous: 1.0,
            theta_a: 310.15,
            tau,
        }
    }
}

/// Squared speed of sound as a polynomial in the shifted temperature,
/// `h(theta) = sum a_i theta^i`, with a positive floor `h_floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedOfSoundModel {
    pub coeffs: Vec<f64>,
    pub h_floor: f64,
    /// Growth exponents of h'' and k''; recorded, never used in arithmetic.
    pub growth_exponents: (f64, f64),
}

impl SpeedOfSoundModel {
    pub fn new(coeffs: Vec<f64>, h_floor: f64) -> Self {
        Self {
            coeffs,
            h_floor,
            growth_exponents: (1.0, 1.0),
        }
    }

    /// Constant `h`, floor equal to the constant.
    pub fn constant(h: f64) -> Self {
        Self::new(vec![h], h)
    }

    /// Bound `k_1 = beta_acous / (rho h_floor)` on the nonlinearity coefficient.
    pub fn k1(&self, params: &PhysicalParams) -> f64 {
        params.beta_acous / (params.rho * self.h_floor)
    }

    pub fn h_eval(&self, theta: f64) -> Result<f64> {
        let value = self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * theta + a);
        // NaN fails this comparison too.
        if value >= self.h_floor {
            Ok(value)
        } else {
            Err(Error::FloorViolated {
                theta,
                value,
                floor: self.h_floor,
            })
        }
    }

    /// `k(theta) = beta_acous / (rho h(theta))`.
    pub fn k_eval(&self, params: &PhysicalParams, theta: f64) -> Result<f64> {
        Ok(params.beta_acous / (params.rho * self.h_eval(theta)?))
    }
}

/// Absorbed acoustic energy `Q(p_t) = 2b/(rho_a C_a^4) (p_t)^2`, pointwise.
pub fn q_source(params: &PhysicalParams, p_t: &NodeField) -> NodeField {
    let c = params.source_coefficient();
    p_t.map(|v| c * v * v)
}

/// Checks every invariant of the parameter set and speed-of-sound model,
/// returning all violations at once.
pub fn validate_params(params: &PhysicalParams, model: &SpeedOfSoundModel) -> Result<(), Vec<String>> {
    let mut violations = Vec::new();
    let mut positive = |name: &str, v: f64| {
        if !(v > 0.0 && v.is_finite()) {
            violations.push(format!("{name} must be strictly positive"));
        }
    };
    positive("rho_a", params.rho_a);
    positive("C_a", params.c_a);
    positive("rho_b", params.rho_b);
    positive("C_b", params.c_b);
    positive("kappa_a", params.kappa_a);
    positive("b", params.b);
    positive("rho", params.rho);
    positive("beta_acous", params.beta_acous);
    if !(model.h_floor > 0.0 && model.h_floor.is_finite()) {
        violations.push("h_floor must be positive".to_string());
    }
    if !(params.w >= 0.0 && params.w.is_finite()) {
        violations.push("W must be nonnegative".to_string());
    }
    if !(params.tau >= 0.0 && params.tau.is_finite()) {
        violations.push("tau must be nonnegative".to_string());
    }
    if !params.theta_a.is_finite() {
        violations.push("theta_a must be finite".to_string());
    }
    if model.coeffs.is_empty() {
        violations.push("speed_model.coeffs must not be empty".to_string());
    } else if model.coeffs.iter().any(|c| !c.is_finite()) {
        violations.push("speed_model.coeffs must be finite".to_string());
    } else if model.h_floor > 0.0 && model.coeffs[0] < model.h_floor {
        violations.push("h(0) = coeffs[0] must not lie below h_floor".to_string());
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
