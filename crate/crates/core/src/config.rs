//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` or `;` are ignored, as are
//! `[section]` headers. Lists are comma separated. A `preset` key expands to
//! a published parameter set first; explicit keys then override it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::ConfigError;
use crate::expr::Expr;
use crate::fem::AnalyticField;
use crate::model::ModelParams;
use crate::schemes::{SchemeConfig, SchemeKind};

const KEYS: &[&str] = &[
    "preset",
    "lambda_r",
    "lambda_e",
    "gamma",
    "kappa",
    "mu",
    "beta",
    "e_axis",
    "dim",
    "divisions",
    "dt",
    "t_end",
    "scheme",
    "newton_tol",
    "newton_max_iter",
    "linear_tol",
    "linear_max_iter",
    "first_step_substeps",
    "first_step_anisotropy",
    "initial_data",
    "initial_projection",
    "u0_x",
    "u0_y",
    "u0_z",
    "csv_path",
    "vtk_dir",
    "snapshot_every",
    "convergence_levels",
    "epsilon_list",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Sim1,
    Sim2,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Sim1 => "sim1",
            Preset::Sim2 => "sim2",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "sim1" => Some(Preset::Sim1),
            "sim2" => Some(Preset::Sim2),
            _ => None,
        }
    }

    pub fn params(self) -> ModelParams {
        match self {
            Preset::Sim1 => ModelParams {
                lambda_r: 4.0,
                lambda_e: 1.0,
                gamma: 10.0,
                kappa: 2.0,
                mu: 1.0,
                beta: -0.1,
                e_axis: [0.0, 0.0, 1.0],
            },
            Preset::Sim2 => ModelParams {
                lambda_r: 4.0,
                lambda_e: 0.001,
                gamma: 5.0,
                kappa: 3.0,
                mu: -1.0,
                beta: 0.2,
                e_axis: [0.0, 1.0, 0.0],
            },
        }
    }
}

/// Initial magnetisation.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `(cos 2πx, sin 2πy, 2 cos 2πx sin 2πy)`.
    Sim1,
    /// `(−2y cos 2πx, 4x² sin 2πy, 2 cos 2πx sin 2πy)`.
    Sim2,
    Zero,
    Expression(Box<[Expr; 3]>),
}

impl InitialData {
    pub fn name(&self) -> &'static str {
        match self {
            InitialData::Sim1 => "sim1",
            InitialData::Sim2 => "sim2",
            InitialData::Zero => "zero",
            InitialData::Expression(_) => "expression",
        }
    }
}

impl AnalyticField for InitialData {
    fn value(&self, p: [f64; 2]) -> [f64; 3] {
        use std::f64::consts::PI;
        let (x, y) = (p[0], p[1]);
        let (c, s) = ((2.0 * PI * x).cos(), (2.0 * PI * y).sin());
        match self {
            InitialData::Sim1 => [c, s, 2.0 * c * s],
            InitialData::Sim2 => [-2.0 * y * c, 4.0 * x * x * s, 2.0 * c * s],
            InitialData::Zero => [0.0; 3],
            InitialData::Expression(e) => [e[0].eval(x, y), e[1].eval(x, y), e[2].eval(x, y)],
        }
    }

    fn gradient(&self, p: [f64; 2]) -> Option<[[f64; 2]; 3]> {
        use std::f64::consts::PI;
        let (x, y) = (p[0], p[1]);
        let (c, s) = ((2.0 * PI * x).cos(), (2.0 * PI * y).sin());
        let dc = -2.0 * PI * (2.0 * PI * x).sin();
        let ds = 2.0 * PI * (2.0 * PI * y).cos();
        let third = [2.0 * dc * s, 2.0 * c * ds];
        Some(match self {
            InitialData::Sim1 => [[dc, 0.0], [0.0, ds], third],
            InitialData::Sim2 => [[-2.0 * y * dc, -2.0 * c], [8.0 * x * s, 4.0 * x * x * ds], third],
            InitialData::Zero => [[0.0; 2]; 3],
            InitialData::Expression(e) => [e[0].gradient(x, y), e[1].gradient(x, y), e[2].gradient(x, y)],
        })
    }
}

/// How the initial data enters the finite-element space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialProjection {
    Ritz,
    Interpolate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub dim: usize,
    pub divisions: usize,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: SchemeKind,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub first_step_substeps: usize,
    pub first_step_anisotropy: bool,
    pub initial_data: InitialData,
    pub initial_projection: InitialProjection,
    pub csv_path: Option<PathBuf>,
    pub vtk_dir: Option<PathBuf>,
    /// Write a snapshot every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub convergence_levels: Vec<usize>,
    pub epsilon_list: Vec<f64>,
}

impl Config {
    /// Configuration of a published simulation with default solver settings.
    pub fn preset(p: Preset) -> Self {
        let defaults = SchemeConfig::new(2.5e-3, SchemeKind::Euler);
        Config {
            params: p.params(),
            dim: 2,
            divisions: 32,
            dt: 2.5e-3,
            t_end: 0.5,
            scheme: SchemeKind::Euler,
            newton_tol: defaults.newton_tol,
            newton_max_iter: defaults.newton_max_iter,
            linear_tol: defaults.linear_tol,
            linear_max_iter: defaults.linear_max_iter,
            first_step_substeps: defaults.first_step_substeps,
            first_step_anisotropy: defaults.first_step_anisotropy,
            initial_data: match p {
                Preset::Sim1 => InitialData::Sim1,
                Preset::Sim2 => InitialData::Sim2,
            },
            initial_projection: InitialProjection::Ritz,
            csv_path: None,
            vtk_dir: None,
            snapshot_every: 0,
            convergence_levels: vec![4, 8, 16, 32, 64],
            epsilon_list: vec![1e-1, 1e-2, 1e-3, 1e-4],
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parse `text`, then apply `key=value` overrides on top.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut entries = parse_entries(text)?;
        for (i, o) in overrides.iter().enumerate() {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: format!("override `{o}` is not of the form key=value"),
            })?;
            let k = k.trim();
            check_key(k)?;
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Self::from_entries(entries)
    }

    fn from_entries(mut entries: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let preset = match entries.remove("preset") {
            Some(v) => Some(Preset::parse(&v).ok_or_else(|| invalid("preset", &v, "expected sim1 or sim2"))?),
            None => None,
        };
        let mut cfg = Config::preset(preset.unwrap_or(Preset::Sim1));
        let mut take = |key: &str| entries.remove(key);

        let physics_required = preset.is_none();
        let real = |key: &str, slot: &mut f64, required: bool, take: &mut dyn FnMut(&str) -> Option<String>| {
            match take(key) {
                Some(v) => *slot = parse_f64(key, &v)?,
                None if required => return Err(ConfigError::MissingKey(key.into())),
                None => {}
            }
            Ok::<(), ConfigError>(())
        };
        real("lambda_r", &mut cfg.params.lambda_r, physics_required, &mut take)?;
        real("lambda_e", &mut cfg.params.lambda_e, physics_required, &mut take)?;
        real("gamma", &mut cfg.params.gamma, physics_required, &mut take)?;
        real("kappa", &mut cfg.params.kappa, physics_required, &mut take)?;
        real("mu", &mut cfg.params.mu, physics_required, &mut take)?;
        real("beta", &mut cfg.params.beta, physics_required, &mut take)?;
        real("dt", &mut cfg.dt, physics_required, &mut take)?;
        real("t_end", &mut cfg.t_end, physics_required, &mut take)?;
        real("newton_tol", &mut cfg.newton_tol, false, &mut take)?;
        real("linear_tol", &mut cfg.linear_tol, false, &mut take)?;

        match take("e_axis") {
            Some(v) => {
                let list = parse_list(&v, |s| parse_f64("e_axis", s))?;
                cfg.params.e_axis = <[f64; 3]>::try_from(list.as_slice())
                    .map_err(|_| invalid("e_axis", &v, "expected three components"))?;
            }
            None if physics_required => return Err(ConfigError::MissingKey("e_axis".into())),
            None => {}
        }

        let integer = |key: &str, slot: &mut usize, take: &mut dyn FnMut(&str) -> Option<String>| {
            if let Some(v) = take(key) {
                *slot = parse_usize(key, &v)?;
            }
            Ok::<(), ConfigError>(())
        };
        integer("dim", &mut cfg.dim, &mut take)?;
        integer("divisions", &mut cfg.divisions, &mut take)?;
        integer("newton_max_iter", &mut cfg.newton_max_iter, &mut take)?;
        integer("linear_max_iter", &mut cfg.linear_max_iter, &mut take)?;
        integer("first_step_substeps", &mut cfg.first_step_substeps, &mut take)?;
        integer("snapshot_every", &mut cfg.snapshot_every, &mut take)?;

        if let Some(v) = take("scheme") {
            cfg.scheme = SchemeKind::parse(&v).ok_or_else(|| invalid("scheme", &v, "expected euler, euler_bloch or cn"))?;
        }
        if let Some(v) = take("first_step_anisotropy") {
            cfg.first_step_anisotropy = match v.as_str() {
                "true" => true,
                "false" => false,
                _ => return Err(invalid("first_step_anisotropy", &v, "expected true or false")),
            };
        }
        if let Some(v) = take("initial_projection") {
            cfg.initial_projection = match v.as_str() {
                "ritz" => InitialProjection::Ritz,
                "interpolate" => InitialProjection::Interpolate,
                _ => return Err(invalid("initial_projection", &v, "expected ritz or interpolate")),
            };
        }

        let exprs = [take("u0_x"), take("u0_y"), take("u0_z")];
        match take("initial_data") {
            Some(v) => {
                cfg.initial_data = match v.as_str() {
                    "sim1" => InitialData::Sim1,
                    "sim2" => InitialData::Sim2,
                    "zero" => InitialData::Zero,
                    "expression" => {
                        let mut parsed = Vec::with_capacity(3);
                        for (key, src) in ["u0_x", "u0_y", "u0_z"].iter().zip(&exprs) {
                            let src = src.as_ref().ok_or_else(|| ConfigError::MissingKey((*key).into()))?;
                            parsed.push(Expr::parse(src)?);
                        }
                        let [a, b, c]: [Expr; 3] = parsed.try_into().expect("three expressions");
                        InitialData::Expression(Box::new([a, b, c]))
                    }
                    _ => return Err(invalid("initial_data", &v, "expected sim1, sim2, zero or expression")),
                };
            }
            None if physics_required => return Err(ConfigError::MissingKey("initial_data".into())),
            None => {}
        }
        if !matches!(cfg.initial_data, InitialData::Expression(_)) {
            if let Some(key) = ["u0_x", "u0_y", "u0_z"].iter().zip(&exprs).find(|(_, e)| e.is_some()).map(|(k, _)| k) {
                return Err(ConfigError::InvalidParameter(format!("`{key}` requires initial_data = expression")));
            }
        }

        if let Some(v) = take("csv_path") {
            cfg.csv_path = Some(PathBuf::from(v));
        }
        if let Some(v) = take("vtk_dir") {
            cfg.vtk_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = take("convergence_levels") {
            cfg.convergence_levels = parse_list(&v, |s| parse_usize("convergence_levels", s))?;
        }
        if let Some(v) = take("epsilon_list") {
            cfg.epsilon_list = parse_list(&v, |s| parse_f64("epsilon_list", s))?;
        }
        debug_assert!(entries.is_empty(), "all known keys consumed");
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        if self.dim != 1 && self.dim != 2 {
            return Err(ConfigError::InvalidDimension(self.dim));
        }
        if self.divisions < 2 {
            return Err(ConfigError::InvalidDivisions { min: 2, found: self.divisions });
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ConfigError::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(ConfigError::InvalidParameter(format!("t_end must be >= dt, got {}", self.t_end)));
        }
        if !(self.newton_tol > 0.0) || !(self.linear_tol > 0.0) {
            return Err(ConfigError::InvalidParameter("tolerances must be positive".into()));
        }
        if self.newton_max_iter == 0 || self.linear_max_iter == 0 || self.first_step_substeps == 0 {
            return Err(ConfigError::InvalidParameter("iteration counts must be positive".into()));
        }
        if self.convergence_levels.is_empty() {
            return Err(ConfigError::InvalidParameter("convergence_levels must not be empty".into()));
        }
        if self.convergence_levels[0] < 2 {
            return Err(ConfigError::InvalidDivisions { min: 2, found: self.convergence_levels[0] });
        }
        if self.convergence_levels.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(ConfigError::InvalidParameter(format!(
                "convergence_levels must double at every level, got {:?}",
                self.convergence_levels
            )));
        }
        if self.epsilon_list.iter().any(|&e| !(e > 0.0) || !e.is_finite())
            || self.epsilon_list.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(ConfigError::InvalidParameter(format!(
                "epsilon_list must be positive and strictly decreasing, got {:?}",
                self.epsilon_list
            )));
        }
        Ok(())
    }

    /// Number of time steps, `⌊t_end / dt⌋`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as usize
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            k: self.dt,
            scheme: self.scheme,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            linear_tol: self.linear_tol,
            linear_max_iter: self.linear_max_iter,
            first_step_substeps: self.first_step_substeps,
            first_step_anisotropy: self.first_step_anisotropy,
        }
    }

    /// Serialize with every key explicit; parsing the result yields `self`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("lambda_r", p.lambda_r.to_string());
        line("lambda_e", p.lambda_e.to_string());
        line("gamma", p.gamma.to_string());
        line("kappa", p.kappa.to_string());
        line("mu", p.mu.to_string());
        line("beta", p.beta.to_string());
        line("e_axis", join(&p.e_axis));
        line("dim", self.dim.to_string());
        line("divisions", self.divisions.to_string());
        line("dt", self.dt.to_string());
        line("t_end", self.t_end.to_string());
        line("scheme", self.scheme.name().into());
        line("newton_tol", self.newton_tol.to_string());
        line("newton_max_iter", self.newton_max_iter.to_string());
        line("linear_tol", self.linear_tol.to_string());
        line("linear_max_iter", self.linear_max_iter.to_string());
        line("first_step_substeps", self.first_step_substeps.to_string());
        line("first_step_anisotropy", self.first_step_anisotropy.to_string());
        line("initial_data", self.initial_data.name().into());
        if let InitialData::Expression(e) = &self.initial_data {
            line("u0_x", e[0].to_string());
            line("u0_y", e[1].to_string());
            line("u0_z", e[2].to_string());
        }
        line(
            "initial_projection",
            match self.initial_projection {
                InitialProjection::Ritz => "ritz".into(),
                InitialProjection::Interpolate => "interpolate".into(),
            },
        );
        if let Some(path) = &self.csv_path {
            line("csv_path", path.display().to_string());
        }
        if let Some(path) = &self.vtk_dir {
            line("vtk_dir", path.display().to_string());
        }
        line("snapshot_every", self.snapshot_every.to_string());
        line("convergence_levels", join(&self.convergence_levels));
        line("epsilon_list", join(&self.epsilon_list));
        s
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue { key: key.into(), value: value.into(), reason: reason.into() }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.trim().parse().map_err(|_| invalid(key, v, "expected a real number"))?;
    if !x.is_finite() {
        return Err(invalid(key, v, "value must be finite"));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim().parse().map_err(|_| invalid(key, v, "expected a non-negative integer"))
}

fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    v.split(',').map(|s| item(s.trim())).collect()
}

fn check_key(k: &str) -> Result<(), ConfigError> {
    if KEYS.contains(&k) {
        Ok(())
    } else {
        Err(ConfigError::UnknownKey(k.into()))
    }
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            reason: format!("expected `key = value`, found `{line}`"),
        })?;
        let k = k.trim();
        check_key(k)?;
        if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(ConfigError::Syntax { line: i + 1, reason: format!("duplicate key `{k}`") });
        }
    }
    Ok(entries)
}
