//! JSON run configuration.
//!
//! ```json
//! {
//!   "grid": {"L": 1.0, "N": 128},
//!   "params": {"rho_a": 1, "C_a": 1, "rho_b": 1, "C_b": 1, "W": 1, "kappa_a": 1,
//!              "b": 1, "rho": 1, "beta_acous": 1, "theta_a": 310.15, "tau": 0.05},
//!   "speed_model": {"coeffs": [1.0], "h_floor": 1.0},
//!   "initial_data": {"preset": "sine", "amplitude_p": 0.05, "amplitude_theta": 0.5},
//!   "time": {"T": 1.0, "dt": 0.001, "output_stride": 10, "snapshot_times": [0.5]},
//!   "picard": {"tol": 1e-10, "max_iter": 20, "gamma_bar": 0.5},
//!   "sweep": {"tau_list": [0.1, 0.05]},
//!   "seed": 42
//! }
//! ```
//!
//! `picard`, `sweep`, `seed` and most `initial_data` keys are optional.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::grid::{gradient_to_faces, FaceField, Grid1D, NodeField};
use crate::model::{validate_params, PhysicalParams, SpeedOfSoundModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{path}: {reason}")]
    Validation { path: String, reason: String },
    #[error("unknown key {0}")]
    UnknownKey(String),
}

impl ConfigError {
    fn invalid(path: &str, reason: impl Into<String>) -> Self {
        ConfigError::Validation {
            path: path.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Zero,
    Sine,
    Gaussian,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataSpec {
    pub preset: Preset,
    pub amplitude_p: f64,
    pub amplitude_theta: f64,
    pub mode_k: usize,
    pub center: f64,
    pub width: f64,
    pub p0: Option<Vec<f64>>,
    pub p1: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    pub q0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt: f64,
    pub output_stride: usize,
    pub snapshot_times: Vec<f64>,
}

impl TimeSpec {
    /// Number of steps, `T/dt` rounded to the nearest integer.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub gamma_bar: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20,
            gamma_bar: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub length: f64,
    pub n: usize,
    pub params: PhysicalParams,
    pub speed_model: SpeedOfSoundModel,
    pub initial_data: InitialDataSpec,
    pub time: TimeSpec,
    pub picard: PicardSettings,
    pub tau_list: Option<Vec<f64>>,
    pub seed: u64,
}

/// Initial fields on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialFields {
    pub p0: NodeField,
    pub p1: NodeField,
    pub theta0: NodeField,
    pub q0: FaceField,
}

impl SimConfig {
    pub fn grid(&self) -> Grid1D {
        Grid1D::new(self.length, self.n).expect("validated at load time")
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        let mut c = self.clone();
        c.params.tau = tau;
        c
    }

    /// Evaluates the initial-data preset. Smooth presets start at rest
    /// (`p1 = 0`) with the flux in Fourier equilibrium, `q0 = -kappa_a grad theta0`.
    pub fn initial_fields(&self) -> InitialFields {
        let grid = self.grid();
        let d = &self.initial_data;
        let fourier = |theta: &NodeField| {
            let kappa = self.params.kappa_a;
            gradient_to_faces(theta).map(|g| -kappa * g)
        };
        match d.preset {
            Preset::Zero => InitialFields {
                p0: NodeField::zeros(grid),
                p1: NodeField::zeros(grid),
                theta0: NodeField::zeros(grid),
                q0: FaceField::zeros(grid),
            },
            Preset::Sine | Preset::Gaussian => {
                let shape: Box<dyn Fn(f64) -> f64> = if d.preset == Preset::Sine {
                    let k = d.mode_k as f64;
                    let l = self.length;
                    Box::new(move |x| (k * std::f64::consts::PI * x / l).sin())
                } else {
                    let (c, w) = (d.center, d.width);
                    Box::new(move |x| (-((x - c) / w).powi(2)).exp())
                };
                let theta0 = grid.node_field(|x| d.amplitude_theta * shape(x));
                InitialFields {
                    p0: grid.node_field(|x| d.amplitude_p * shape(x)),
                    p1: NodeField::zeros(grid),
                    q0: fourier(&theta0),
                    theta0,
                }
            }
            Preset::Raw => {
                let node = |v: &Option<Vec<f64>>| NodeField::from_vec(grid, v.clone().expect("validated")).expect("validated");
                InitialFields {
                    p0: node(&d.p0),
                    p1: node(&d.p1),
                    theta0: node(&d.theta0),
                    q0: FaceField::from_vec(grid, d.q0.clone().expect("validated")).expect("validated"),
                }
            }
        }
    }
}

/// Parses and validates a configuration document.
pub fn load_config(text: &str) -> Result<SimConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = Obj::new(&root, "")?;
    root.allow(&["grid", "params", "speed_model", "initial_data", "time", "picard", "sweep", "seed"])?;

    let grid = root.object("grid")?;
    grid.allow(&["L", "N"])?;
    let length = grid.number("L")?;
    if !(length > 0.0) {
        return Err(ConfigError::invalid("grid.L", "must be positive"));
    }
    let n = grid.integer("N")?;
    if n < 2 {
        return Err(ConfigError::invalid("grid.N", "must be at least 2"));
    }

    let params = parse_params(&root.object("params")?)?;
    let speed_model = parse_speed_model(&root.object("speed_model")?)?;
    if let Err(violations) = validate_params(&params, &speed_model) {
        return Err(ConfigError::invalid("params", violations.join("; ")));
    }

    let initial_data = parse_initial_data(&root.object("initial_data")?, length, n)?;
    let time = parse_time(&root.object("time")?)?;

    let picard = match root.optional_object("picard")? {
        None => PicardSettings::default(),
        Some(p) => {
            p.allow(&["tol", "max_iter", "gamma_bar"])?;
            let d = PicardSettings::default();
            let tol = p.optional_number("tol")?.unwrap_or(d.tol);
            if !(tol > 0.0) {
                return Err(ConfigError::invalid("picard.tol", "must be positive"));
            }
            let max_iter = p.optional_integer("max_iter")?.unwrap_or(d.max_iter);
            if max_iter < 1 {
                return Err(ConfigError::invalid("picard.max_iter", "must be at least 1"));
            }
            let gamma_bar = p.optional_number("gamma_bar")?.unwrap_or(d.gamma_bar);
            if !(gamma_bar > 0.0 && gamma_bar < 1.0) {
                return Err(ConfigError::invalid("picard.gamma_bar", "must lie in (0, 1)"));
            }
            PicardSettings { tol, max_iter, gamma_bar }
        }
    };

    let tau_list = match root.optional_object("sweep")? {
        None => None,
        Some(s) => {
            s.allow(&["tau_list"])?;
            let list = s.numbers("tau_list")?;
            validate_tau_list(&list).map_err(|reason| ConfigError::invalid("sweep.tau_list", reason))?;
            Some(list)
        }
    };

    let seed = root.optional_integer("seed")?.unwrap_or(0) as u64;

    Ok(SimConfig {
        length,
        n,
        params,
        speed_model,
        initial_data,
        time,
        picard,
        tau_list,
        seed,
    })
}

/// A sweep list must be nonempty, positive and strictly decreasing.
pub fn validate_tau_list(list: &[f64]) -> Result<(), String> {
    if list.is_empty() {
        return Err("must not be empty".into());
    }
    if list.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err("entries must be positive".into());
    }
    if list.windows(2).any(|w| w[1] >= w[0]) {
        return Err("must be strictly decreasing".into());
    }
    Ok(())
}

fn parse_params(p: &Obj) -> Result<PhysicalParams, ConfigError> {
    p.allow(&["rho_a", "C_a", "rho_b", "C_b", "W", "kappa_a", "b", "rho", "beta_acous", "theta_a", "tau"])?;
    let positive = |key: &str| -> Result<f64, ConfigError> {
        let v = p.number(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::invalid(&p.path(key), "must be positive"))
        }
    };
    let nonnegative = |key: &str| -> Result<f64, ConfigError> {
        let v = p.number(key)?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::invalid(&p.path(key), "must be nonnegative"))
        }
    };
    Ok(PhysicalParams {
        rho_a: positive("rho_a")?,
        c_a: positive("C_a")?,
        rho_b: positive("rho_b")?,
        c_b: positive("C_b")?,
        w: nonnegative("W")?,
        kappa_a: positive("kappa_a")?,
        b: positive("b")?,
        rho: positive("rho")?,
        beta_acous: positive("beta_acous")?,
        theta_a: p.number("theta_a")?,
        tau: nonnegative("tau")?,
    })
}

fn parse_speed_model(s: &Obj) -> Result<SpeedOfSoundModel, ConfigError> {
    s.allow(&["coeffs", "h_floor", "growth_exponents"])?;
    let coeffs = s.numbers("coeffs")?;
    if coeffs.is_empty() {
        return Err(ConfigError::invalid("speed_model.coeffs", "must not be empty"));
    }
    let h_floor = s.number("h_floor")?;
    if !(h_floor > 0.0) {
        return Err(ConfigError::invalid("speed_model.h_floor", "must be positive"));
    }
    let mut model = SpeedOfSoundModel::new(coeffs, h_floor);
    if s.has("growth_exponents") {
        let g = s.numbers("growth_exponents")?;
        if g.len() != 2 {
            return Err(ConfigError::invalid("speed_model.growth_exponents", "must hold two numbers"));
        }
        model.growth_exponents = (g[0], g[1]);
    }
    Ok(model)
}

fn parse_initial_data(d: &Obj, length: f64, n: usize) -> Result<InitialDataSpec, ConfigError> {
    d.allow(&[
        "preset",
        "amplitude_p",
        "amplitude_theta",
        "mode_k",
        "center",
        "width",
        "p0",
        "p1",
        "theta0",
        "q0",
    ])?;
    let preset = match d.string("preset")?.as_str() {
        "zero" => Preset::Zero,
        "sine" => Preset::Sine,
        "gaussian" => Preset::Gaussian,
        "raw" => Preset::Raw,
        other => {
            return Err(ConfigError::invalid(
                "initial_data.preset",
                format!("unknown preset {other:?}, expected zero, sine, gaussian or raw"),
            ))
        }
    };
    let mode_k = d.optional_integer("mode_k")?.unwrap_or(1);
    if mode_k < 1 {
        return Err(ConfigError::invalid("initial_data.mode_k", "must be at least 1"));
    }
    let width = d.optional_number("width")?.unwrap_or(length / 10.0);
    if !(width > 0.0) {
        return Err(ConfigError::invalid("initial_data.width", "must be positive"));
    }
    let array = |key: &str, len: usize| -> Result<Option<Vec<f64>>, ConfigError> {
        if !d.has(key) {
            if preset == Preset::Raw {
                return Err(ConfigError::invalid(&d.path(key), "required for preset raw"));
            }
            return Ok(None);
        }
        let v = d.numbers(key)?;
        if v.len() != len {
            return Err(ConfigError::invalid(&d.path(key), format!("must hold {len} values, found {}", v.len())));
        }
        Ok(Some(v))
    };
    Ok(InitialDataSpec {
        preset,
        amplitude_p: d.optional_number("amplitude_p")?.unwrap_or(0.0),
        amplitude_theta: d.optional_number("amplitude_theta")?.unwrap_or(0.0),
        mode_k,
        center: d.optional_number("center")?.unwrap_or(length / 2.0),
        width,
        p0: array("p0", n)?,
        p1: array("p1", n)?,
        theta0: array("theta0", n)?,
        q0: array("q0", n + 1)?,
    })
}

fn parse_time(t: &Obj) -> Result<TimeSpec, ConfigError> {
    t.allow(&["T", "dt", "output_stride", "snapshot_times"])?;
    let t_end = t.number("T")?;
    if !(t_end >= 0.0) {
        return Err(ConfigError::invalid("time.T", "must be nonnegative"));
    }
    let dt = t.number("dt")?;
    if !(dt > 0.0) {
        return Err(ConfigError::invalid("time.dt", "must be positive"));
    }
    let output_stride = t.optional_integer("output_stride")?.unwrap_or(1);
    if output_stride < 1 {
        return Err(ConfigError::invalid("time.output_stride", "must be at least 1"));
    }
    let snapshot_times = if t.has("snapshot_times") { t.numbers("snapshot_times")? } else { Vec::new() };
    if snapshot_times.iter().any(|&s| !(s >= 0.0 && s <= t_end)) {
        return Err(ConfigError::invalid("time.snapshot_times", "entries must lie in [0, T]"));
    }
    Ok(TimeSpec {
        t_end,
        dt,
        output_stride,
        snapshot_times,
    })
}

/// A JSON object together with its dotted path, for error reporting.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    prefix: String,
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, prefix: &str) -> Result<Self, ConfigError> {
        match value {
            Value::Object(map) => Ok(Self {
                map,
                prefix: prefix.to_string(),
            }),
            _ => Err(ConfigError::invalid(if prefix.is_empty() { "<root>" } else { prefix }, "must be an object")),
        }
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn allow(&self, keys: &[&str]) -> Result<(), ConfigError> {
        for k in self.map.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(self.path(k)));
            }
        }
        Ok(())
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn required(&self, key: &str) -> Result<&'a Value, ConfigError> {
        self.map.get(key).ok_or_else(|| ConfigError::invalid(&self.path(key), "required"))
    }

    fn object(&self, key: &str) -> Result<Obj<'a>, ConfigError> {
        Obj::new(self.required(key)?, &self.path(key))
    }

    fn optional_object(&self, key: &str) -> Result<Option<Obj<'a>>, ConfigError> {
        self.map.get(key).map(|v| Obj::new(v, &self.path(key))).transpose()
    }

    fn as_number(&self, key: &str, v: &Value) -> Result<f64, ConfigError> {
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| ConfigError::invalid(&self.path(key), "must be a finite number"))
    }

    fn number(&self, key: &str) -> Result<f64, ConfigError> {
        self.as_number(key, self.required(key)?)
    }

    fn optional_number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.map.get(key).map(|v| self.as_number(key, v)).transpose()
    }

    fn as_integer(&self, key: &str, v: &Value) -> Result<usize, ConfigError> {
        v.as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| ConfigError::invalid(&self.path(key), "must be a nonnegative integer"))
    }

    fn integer(&self, key: &str) -> Result<usize, ConfigError> {
        self.as_integer(key, self.required(key)?)
    }

    fn optional_integer(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.map.get(key).map(|v| self.as_integer(key, v)).transpose()
    }

    fn string(&self, key: &str) -> Result<String, ConfigError> {
        self.required(key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ConfigError::invalid(&self.path(key), "must be a string"))
    }

    fn numbers(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let arr = self
            .required(key)?
            .as_array()
            .ok_or_else(|| ConfigError::invalid(&self.path(key), "must be an array of numbers"))?;
        arr.iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ConfigError::invalid(&format!("{}[{i}]", self.path(key)), "must be a finite number"))
            })
            .collect()
    }
}
