//! Simulation runs and the derived studies: nested-mesh convergence,
//! temporal self-convergence and the `λ_e → 0` regularisation limit.

mod output;

pub use output::{write_series_csv, write_snapshot_vtk, CsvSeries};

use crate::config::{Config, InitialProjection};
use crate::error::{ConfigError, Error, Result};
use crate::fem::{interpolate_nodal, prolong, ritz_project, NormKind, VectorField};
use crate::mesh::build_structured_mesh;
use crate::schemes::{dissipation_residual, Discretization, SchemeKind, Stepper};

/// Diagnostics of one time level. Row 0 holds `E(u⁰)` and zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub h_l2: f64,
    pub h_h1semi: f64,
    pub dissipation_residual: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scheme: SchemeKind,
    pub records: Vec<StepRecord>,
    pub final_u: VectorField,
    pub final_h: VectorField,
    /// `(uⁿ, latest H)` for every level `n ≥ 1`, when requested.
    pub trajectory: Option<Vec<(VectorField, VectorField)>>,
}

impl RunOutput {
    /// Largest dissipation residual relative to `max(1, |E|)` of the
    /// preceding level. Zero for runs without steps.
    pub fn worst_relative_residual(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| {
                let r = w[1].dissipation_residual / w[0].energy.abs().max(1.0);
                match self.scheme {
                    SchemeKind::CrankNicolson => r.abs(),
                    _ => r,
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn max_newton_iters(&self) -> usize {
        self.records.iter().map(|r| r.newton_iters).max().unwrap_or(0)
    }
}

/// Initial field in the finite-element space of `disc`.
pub fn initial_field(cfg: &Config, disc: &Discretization) -> Result<VectorField> {
    match cfg.initial_projection {
        InitialProjection::Ritz => ritz_project(&disc.space, &disc.stiffness, &cfg.initial_data),
        InitialProjection::Interpolate => Ok(interpolate_nodal(&disc.space, &cfg.initial_data)),
    }
}

/// Run `cfg` on its own mesh and write the configured outputs.
pub fn run_simulation(cfg: &Config) -> Result<RunOutput> {
    let disc = Discretization::new(build_structured_mesh(cfg.dim, cfg.divisions)?);
    let result = run_on(cfg, &disc, false, |state, disc| {
        if let (Some(dir), true) = (&cfg.vtk_dir, cfg.snapshot_every > 0) {
            if state.n % cfg.snapshot_every == 0 {
                let path = dir.join(format!("snapshot_{:06}.vtk", state.n));
                write_snapshot_vtk(&disc.space, &state.u_curr, &state.h_last, state.t, &path)?;
            }
        }
        Ok(())
    });
    // Partial series are flushed even when a step fails.
    let (out, err) = match result {
        Ok(out) => (Some(out), None),
        Err((partial, e)) => (partial, Some(e)),
    };
    if let (Some(path), Some(out)) = (&cfg.csv_path, &out) {
        write_series_csv(out, path)?;
    }
    match err {
        Some(e) => Err(e),
        None => Ok(out.expect("output present on success")),
    }
}

/// Run `cfg` on a prepared discretization. `observe` is called for the
/// initial state and after every step. On failure the records gathered so
/// far are returned alongside the error.
pub fn run_on(
    cfg: &Config,
    disc: &Discretization,
    keep_trajectory: bool,
    mut observe: impl FnMut(&crate::schemes::StepperState, &Discretization) -> Result<()>,
) -> std::result::Result<RunOutput, (Option<RunOutput>, Error)> {
    let fail = |e: Error| (None, e);
    let mut stepper = Stepper::new(disc, cfg.params, cfg.scheme_config()).map_err(fail)?;
    let u0 = initial_field(cfg, disc).map_err(fail)?;
    let mut state = stepper.initial_state(u0).map_err(fail)?;
    observe(&state, disc).map_err(fail)?;
    let mut out = RunOutput {
        scheme: cfg.scheme,
        records: vec![StepRecord {
            step: 0,
            time: 0.0,
            energy: state.energy_curr,
            h_l2: 0.0,
            h_h1semi: 0.0,
            dissipation_residual: 0.0,
            newton_iters: 0,
        }],
        final_u: state.u_curr.clone(),
        final_h: state.h_last.clone(),
        trajectory: keep_trajectory.then(Vec::new),
    };
    for _ in 0..cfg.n_steps() {
        let next = match stepper.step(&state) {
            Ok(s) => s,
            Err(e) => return Err((Some(out), e)),
        };
        let residual = dissipation_residual(disc, state.energy_curr, next.energy_curr, &next.h_last, cfg.dt, &cfg.params);
        out.records.push(StepRecord {
            step: next.n,
            time: next.t,
            energy: next.energy_curr,
            h_l2: disc.norm(&next.h_last, NormKind::L2),
            h_h1semi: disc.norm(&next.h_last, NormKind::H1Semi),
            dissipation_residual: residual,
            newton_iters: next.newton_iters_last,
        });
        if let Some(t) = out.trajectory.as_mut() {
            t.push((next.u_curr.clone(), next.h_last.clone()));
        }
        state = next;
        if let Err(e) = observe(&state, disc) {
            return Err((Some(out), e));
        }
    }
    out.final_u = state.u_curr;
    out.final_h = state.h_last;
    Ok(out)
}

fn run_plain(cfg: &Config, disc: &Discretization, keep_trajectory: bool) -> Result<RunOutput> {
    run_on(cfg, disc, keep_trajectory, |_, _| Ok(())).map_err(|(_, e)| e)
}

/// Number of worker threads for independent runs, from `SOLVER_THREADS`.
pub fn worker_threads() -> usize {
    std::env::var("SOLVER_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Map `f` over `items` on up to `threads` scoped threads; results keep the
/// input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// `log₂(coarse / fine)`, absent unless both errors are positive and finite.
pub fn rate(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0 && coarse.is_finite() && fine.is_finite()).then(|| (coarse / fine).log2())
}

/// Errors `max_n ‖u_h − u_{h/2}‖` between a level and the next finer one.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelErrors {
    pub divisions: usize,
    pub h: f64,
    pub u_l2: f64,
    pub u_h1: f64,
    pub u_linf: f64,
    pub h_l2: f64,
    pub h_h1: f64,
    pub h_linf: f64,
}

impl LevelErrors {
    fn get(&self, q: Quantity) -> f64 {
        match q {
            Quantity::UL2 => self.u_l2,
            Quantity::UH1 => self.u_h1,
            Quantity::ULinf => self.u_linf,
            Quantity::HL2 => self.h_l2,
            Quantity::HH1 => self.h_h1,
            Quantity::HLinf => self.h_linf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    UL2,
    UH1,
    ULinf,
    HL2,
    HH1,
    HLinf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scheme: SchemeKind,
    /// One entry per adjacent level pair, indexed by the coarser level.
    pub errors: Vec<LevelErrors>,
}

impl ConvergenceReport {
    /// Rates between consecutive error entries.
    pub fn rates(&self, q: Quantity) -> Vec<Option<f64>> {
        self.errors.windows(2).map(|w| rate(w[0].get(q), w[1].get(q))).collect()
    }

    /// Rate of the finest pair of error entries.
    pub fn finest_rate(&self, q: Quantity) -> Option<f64> {
        self.rates(q).last().copied().flatten()
    }
}

/// Run every level of `cfg.convergence_levels` and measure `e_h = u_h − u_{h/2}`
/// on the finer mesh of each pair, maximised over all time levels.
/// `H` is compared at whatever level the scheme stores (half steps for
/// Crank–Nicolson).
pub fn convergence_study(cfg: &Config) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let levels = &cfg.convergence_levels;
    if levels.len() < 2 {
        return Err(ConfigError::InvalidParameter("a convergence study needs at least two levels".into()).into());
    }
    let runs: Vec<Result<(Discretization, RunOutput)>> = parallel_map(levels, worker_threads(), |&n| {
        let disc = Discretization::new(build_structured_mesh(cfg.dim, n)?);
        let mut level_cfg = cfg.clone();
        level_cfg.divisions = n;
        let out = run_plain(&level_cfg, &disc, true)?;
        Ok((disc, out))
    });
    let runs: Vec<(Discretization, RunOutput)> = runs.into_iter().collect::<Result<_>>()?;

    let mut errors = Vec::with_capacity(levels.len() - 1);
    for pair in runs.windows(2) {
        let ((coarse_disc, coarse), (fine_disc, fine)) = (&pair[0], &pair[1]);
        let (ct, ft) = (coarse.trajectory.as_ref().unwrap(), fine.trajectory.as_ref().unwrap());
        let mut e = LevelErrors {
            divisions: coarse_disc.space.mesh().divisions(),
            h: coarse_disc.space.mesh().h(),
            u_l2: 0.0,
            u_h1: 0.0,
            u_linf: 0.0,
            h_l2: 0.0,
            h_h1: 0.0,
            h_linf: 0.0,
        };
        for ((cu, ch), (fu, fh)) in ct.iter().zip(ft) {
            let du = prolong(&coarse_disc.space, cu, &fine_disc.space)?.sub(fu);
            let dh = prolong(&coarse_disc.space, ch, &fine_disc.space)?.sub(fh);
            e.u_l2 = e.u_l2.max(fine_disc.norm(&du, NormKind::L2));
            e.u_h1 = e.u_h1.max(fine_disc.norm(&du, NormKind::H1));
            e.u_linf = e.u_linf.max(fine_disc.norm(&du, NormKind::Linf));
            e.h_l2 = e.h_l2.max(fine_disc.norm(&dh, NormKind::L2));
            e.h_h1 = e.h_h1.max(fine_disc.norm(&dh, NormKind::H1));
            e.h_linf = e.h_linf.max(fine_disc.norm(&dh, NormKind::Linf));
        }
        errors.push(e);
    }
    Ok(ConvergenceReport { scheme: cfg.scheme, errors })
}

/// Self-convergence in time: each step size is compared with a run at
/// `k / refine`, on the same mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalReport {
    pub scheme: SchemeKind,
    pub refine: usize,
    /// `(k, max_n ‖u_k(t_n) − u_{k/refine}(t_n)‖_{L2})`.
    pub entries: Vec<(f64, f64)>,
}

impl TemporalReport {
    /// `error(k_i) / error(k_{i+1})` for consecutive entries.
    pub fn ratios(&self) -> Vec<f64> {
        self.entries.windows(2).map(|w| w[0].1 / w[1].1).collect()
    }
}

pub fn temporal_study(cfg: &Config, steps: &[f64], refine: usize) -> Result<TemporalReport> {
    cfg.validate()?;
    if refine < 2 {
        return Err(ConfigError::InvalidParameter("temporal refinement factor must be at least 2".into()).into());
    }
    let disc = Discretization::new(build_structured_mesh(cfg.dim, cfg.divisions)?);
    let mut jobs = Vec::new();
    for &k in steps {
        jobs.push(k);
        jobs.push(k / refine as f64);
    }
    let runs: Vec<Result<RunOutput>> = parallel_map(&jobs, worker_threads(), |&k| {
        let mut c = cfg.clone();
        c.dt = k;
        c.validate()?;
        run_plain(&c, &disc, true)
    });
    let runs: Vec<RunOutput> = runs.into_iter().collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(steps.len());
    for (i, &k) in steps.iter().enumerate() {
        let (coarse, fine) = (runs[2 * i].trajectory.as_ref().unwrap(), runs[2 * i + 1].trajectory.as_ref().unwrap());
        let err = coarse
            .iter()
            .enumerate()
            .filter_map(|(n, (u, _))| fine.get((n + 1) * refine - 1).map(|(v, _)| disc.norm(&u.sub(v), NormKind::L2)))
            .fold(0.0, f64::max);
        entries.push((k, err));
    }
    Ok(TemporalReport { scheme: cfg.scheme, refine, entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    /// `max_n ‖u^ε − u⁰‖_{H1}`.
    pub u_h1: f64,
    /// `(k Σ_n ‖H^ε − H⁰‖²_{L2})^{1/2}`.
    pub h_l2_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonReport {
    pub records: Vec<EpsilonRecord>,
    /// Least-squares slope of `log u_h1` against `log ε`.
    pub slope_u_h1: Option<f64>,
    /// Least-squares slope of `log h_l2_time` against `log ε`.
    pub slope_h: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`; absent with fewer than
/// two usable points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Compare runs with `λ_e = ε` against the `λ_e = 0` run on the same mesh
/// and step, all with the configured scheme.
pub fn epsilon_study(cfg: &Config) -> Result<EpsilonReport> {
    cfg.validate()?;
    if !(cfg.params.mu < 0.0) {
        return Err(ConfigError::InvalidParameter(format!("the epsilon study requires mu < 0, got {}", cfg.params.mu)).into());
    }
    let disc = Discretization::new(build_structured_mesh(cfg.dim, cfg.divisions)?);
    let mut eps = vec![0.0];
    eps.extend_from_slice(&cfg.epsilon_list);
    let runs: Vec<Result<RunOutput>> = parallel_map(&eps, worker_threads(), |&e| {
        let mut c = cfg.clone();
        c.params.lambda_e = e;
        run_plain(&c, &disc, true)
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = runs.remove(0).trajectory.unwrap();
    let mut records = Vec::with_capacity(runs.len());
    for (e, run) in cfg.epsilon_list.iter().zip(runs) {
        let t = run.trajectory.unwrap();
        let mut u_h1: f64 = 0.0;
        let mut h_sq = 0.0;
        for ((u, h), (ur, hr)) in t.iter().zip(&reference) {
            u_h1 = u_h1.max(disc.norm(&u.sub(ur), NormKind::H1));
            let d = disc.norm(&h.sub(hr), NormKind::L2);
            h_sq += cfg.dt * d * d;
        }
        records.push(EpsilonRecord { epsilon: *e, u_h1, h_l2_time: h_sq.sqrt() });
    }
    let slope_u_h1 = log_log_slope(&records.iter().map(|r| (r.epsilon, r.u_h1)).collect::<Vec<_>>());
    let slope_h = log_log_slope(&records.iter().map(|r| (r.epsilon, r.h_l2_time)).collect::<Vec<_>>());
    Ok(EpsilonReport { records, slope_u_h1, slope_h })
}
