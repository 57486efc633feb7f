//! Fully discrete time steppers for the mixed `(u, H)` system.
//!
//! Each step solves a nonlinear system in the stacked unknowns `x = [U; Y]`,
//! where `U` are the coefficients of the new magnetisation and `Y` those of
//! the effective field. With `M`, `K` the (componentwise) mass and stiffness
//! matrices, the Euler residual is
//!
//! ```text
//! R₁ = M(U − Uⁿ)/k − λ_r M Y − λ_e K Y + γ C(uⁿ) Y
//! R₂ = M Y + K U − κμ M Uⁿ + κ N(U) + β A U
//! ```
//!
//! where `N` is the cubic load, `C(w)` the cross-product matrix and `A` the
//! anisotropy matrix. The Bloch variant treats `κμ M U` implicitly; the
//! Crank–Nicolson scheme evaluates the second equation at the midpoint,
//! replaces `N` by the averaged `ψ` term and extrapolates the cross-product
//! argument from the two previous levels.

mod newton;

pub use newton::{newton_solve, Newton, NewtonResult};

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, kron_identity3, norm_with, FeSpace, NormKind, VectorField};
use crate::mesh::Mesh;
use crate::model::{self, anisotropy_apply, anisotropy_matrix, cross_matrix, cubic_jacobian, cubic_load, psi_jacobian, psi_load, ModelParams};
use crate::sparse::CsrMatrix;

/// A finite-element space together with its assembled linear operators.
#[derive(Debug)]
pub struct Discretization {
    pub space: FeSpace,
    /// Scalar mass matrix.
    pub mass: CsrMatrix,
    /// Scalar stiffness matrix.
    pub stiffness: CsrMatrix,
    /// `M ⊗ I₃` on the vector block pattern.
    pub mass3: CsrMatrix,
    /// `K ⊗ I₃` on the vector block pattern.
    pub stiffness3: CsrMatrix,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Self {
        let space = FeSpace::new(mesh);
        let mass = assemble_mass(&space);
        let stiffness = assemble_stiffness(&space);
        let mass3 = kron_identity3(&space, &mass);
        let stiffness3 = kron_identity3(&space, &stiffness);
        Self { space, mass, stiffness, mass3, stiffness3 }
    }

    pub fn norm(&self, v: &VectorField, kind: NormKind) -> f64 {
        norm_with(&self.space, &self.mass, &self.stiffness, v, kind)
    }

    pub fn energy(&self, p: &ModelParams, u: &VectorField) -> f64 {
        model::energy(&self.space, &self.mass, &self.stiffness, p, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Semi-implicit Euler.
    Euler,
    /// Euler with the `κμ u` term taken at the new level (dissipative for `μ < 0`).
    EulerBloch,
    /// Crank–Nicolson with extrapolated cross-product argument.
    CrankNicolson,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::EulerBloch => "euler_bloch",
            SchemeKind::CrankNicolson => "cn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euler" => Some(SchemeKind::Euler),
            "euler_bloch" => Some(SchemeKind::EulerBloch),
            "cn" => Some(SchemeKind::CrankNicolson),
            _ => None,
        }
    }

    /// Whether a dissipation residual satisfies this scheme's energy law:
    /// an inequality for the Euler family, an identity for Crank–Nicolson.
    pub fn dissipation_holds(self, residual: f64, energy_scale: f64, tol: f64) -> bool {
        let bound = tol * energy_scale.abs().max(1.0);
        match self {
            SchemeKind::Euler | SchemeKind::EulerBloch => residual <= bound,
            SchemeKind::CrankNicolson => residual.abs() <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    /// Time step.
    pub k: f64,
    pub scheme: SchemeKind,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// Number of substeps used to produce the first Crank–Nicolson level.
    pub first_step_substeps: usize,
    /// Include the anisotropy term in the first Crank–Nicolson step.
    pub first_step_anisotropy: bool,
}

impl SchemeConfig {
    pub fn new(k: f64, scheme: SchemeKind) -> Self {
        Self {
            k,
            scheme,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            linear_tol: 1e-12,
            linear_max_iter: 10_000,
            first_step_substeps: 1,
            first_step_anisotropy: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::ConfigError::InvalidParameter;
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(InvalidParameter(format!("time step must be > 0, got {}", self.k)).into());
        }
        if !(self.newton_tol > 0.0) || !(self.linear_tol > 0.0) {
            return Err(InvalidParameter("tolerances must be positive".into()).into());
        }
        if self.newton_max_iter == 0 || self.linear_max_iter == 0 || self.first_step_substeps == 0 {
            return Err(InvalidParameter("iteration limits must be positive".into()).into());
        }
        Ok(())
    }
}

/// Solution state after `n` steps.
#[derive(Debug, Clone)]
pub struct StepperState {
    pub n: usize,
    pub t: f64,
    /// `uⁿ`.
    pub u_curr: VectorField,
    /// `uⁿ⁻¹`, kept once at least one step has been taken.
    pub u_prev: Option<VectorField>,
    /// Latest effective field (`Hⁿ` for Euler, `Hⁿ⁻½` for Crank–Nicolson).
    /// Before the first step this is the discrete effective field of `u⁰`.
    pub h_last: VectorField,
    pub energy_curr: f64,
    pub newton_iters_last: usize,
    /// Newton residual norms of the last step.
    pub residual_trace: Vec<f64>,
}

/// `ΔE + kλ_r‖H‖² + kλ_e‖∇H‖²`; non-positive for the Euler family, zero for
/// Crank–Nicolson (up to solver tolerance).
pub fn dissipation_residual(
    disc: &Discretization,
    e_prev: f64,
    e_next: f64,
    h: &VectorField,
    k: f64,
    p: &ModelParams,
) -> f64 {
    let h_l2 = disc.norm(h, NormKind::L2);
    let h_semi = disc.norm(h, NormKind::H1Semi);
    e_next - e_prev + k * p.lambda_r * h_l2 * h_l2 + k * p.lambda_e * h_semi * h_semi
}

/// Drives one trajectory: owns the parameters, configuration and the cached
/// factorization used by Newton.
#[derive(Debug)]
pub struct Stepper<'a> {
    disc: &'a Discretization,
    params: ModelParams,
    cfg: SchemeConfig,
    aniso: CsrMatrix,
    newton: Newton,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, params: ModelParams, cfg: SchemeConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let aniso = anisotropy_matrix(&disc.space, &params, &disc.mass);
        let newton = Newton::new(cfg.newton_tol, cfg.newton_max_iter);
        Ok(Self { disc, params, cfg, aniso, newton })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn discretization(&self) -> &Discretization {
        self.disc
    }

    /// State at `n = 0`. The effective-field slot holds the solution `Y` of
    /// the second equation at `U = U⁰`, used as the first Newton guess.
    pub fn initial_state(&self, u0: VectorField) -> Result<StepperState> {
        self.disc.space.check_field(&u0)?;
        let p = &self.params;
        let u = u0.coeffs();
        let ku = self.disc.stiffness3.spmv(u)?;
        let mu_ = self.disc.mass3.spmv(u)?;
        let cub = cubic_load(&self.disc.space, &u0);
        let an = anisotropy_apply(p, &self.disc.mass, u);
        let rhs: Vec<f64> = (0..u.len())
            .map(|i| -(ku[i] - p.kappa * p.mu * mu_[i] + p.kappa * cub[i] + p.beta * an[i]))
            .collect();
        let h0 = self.solve_mass(&rhs)?;
        Ok(StepperState {
            n: 0,
            t: 0.0,
            energy_curr: self.disc.energy(p, &u0),
            u_curr: u0,
            u_prev: None,
            h_last: h0,
            newton_iters_last: 0,
            residual_trace: Vec::new(),
        })
    }

    fn solve_mass(&self, rhs: &[f64]) -> Result<VectorField> {
        let n = self.disc.space.n_nodes();
        let mut out = VectorField::from_raw(vec![0.0; 3 * n]);
        for c in 0..3 {
            let b: Vec<f64> = rhs.iter().skip(c).step_by(3).copied().collect();
            let x = crate::sparse::solve_krylov(&self.disc.mass, &b, self.cfg.linear_tol, self.cfg.linear_max_iter, &vec![0.0; n])?;
            out.set_component(c, &x);
        }
        Ok(out)
    }

    /// Advance by one step with the configured scheme.
    pub fn step(&mut self, state: &StepperState) -> Result<StepperState> {
        let out = match self.cfg.scheme {
            SchemeKind::Euler | SchemeKind::EulerBloch => self.euler_step(state),
            SchemeKind::CrankNicolson if state.n == 0 => self.cn_first_step(state),
            SchemeKind::CrankNicolson => self.cn_step(state),
        };
        out.map_err(|e| Error::Step { step: state.n + 1, source: Box::new(e) })
    }

    fn finish(&self, state: &StepperState, u: Vec<f64>, y: Vec<f64>, res: NewtonResult) -> StepperState {
        let u_next = VectorField::from_raw(u);
        let n = state.n + 1;
        StepperState {
            n,
            t: n as f64 * self.cfg.k,
            energy_curr: self.disc.energy(&self.params, &u_next),
            u_prev: Some(state.u_curr.clone()),
            u_curr: u_next,
            h_last: VectorField::from_raw(y),
            newton_iters_last: res.iterations,
            residual_trace: res.trace,
        }
    }

    /// Semi-implicit Euler step (or its Bloch variant).
    pub fn euler_step(&mut self, state: &StepperState) -> Result<StepperState> {
        let disc = self.disc;
        let p = self.params;
        let k = self.cfg.k;
        let nd = disc.space.n_dofs();
        let bloch = self.cfg.scheme == SchemeKind::EulerBloch;
        let un = state.u_curr.coeffs().to_vec();

        let mut a11 = disc.mass3.clone();
        a11.scale(1.0 / k);
        let mut a12 = cross_matrix(&disc.space, &state.u_curr);
        a12.scale(p.gamma);
        a12.axpy(-p.lambda_r, &disc.mass3);
        a12.axpy(-p.lambda_e, &disc.stiffness3);
        let mut a21_linear = disc.stiffness3.clone();
        a21_linear.axpy(p.beta, &self.aniso);
        if bloch {
            a21_linear.axpy(-p.kappa * p.mu, &disc.mass3);
        }
        // Explicit κμ M Uⁿ contribution (zero for the Bloch variant).
        let explicit = if bloch {
            vec![0.0; nd]
        } else {
            let mut v = disc.mass3.spmv(&un)?;
            v.iter_mut().for_each(|x| *x *= p.kappa * p.mu);
            v
        };

        let residual = |x: &[f64]| -> Result<Vec<f64>> {
            let (u, y) = x.split_at(nd);
            let du: Vec<f64> = u.iter().zip(&un).map(|(a, b)| a - b).collect();
            let r1a = a11.spmv(&du)?;
            let r1b = a12.spmv(y)?;
            let uf = VectorField::from_raw(u.to_vec());
            let cub = cubic_load(&disc.space, &uf);
            let r2a = a21_linear.spmv(u)?;
            let r2b = disc.mass3.spmv(y)?;
            let mut r = Vec::with_capacity(2 * nd);
            r.extend((0..nd).map(|i| r1a[i] + r1b[i]));
            r.extend((0..nd).map(|i| r2b[i] + r2a[i] - explicit[i] + p.kappa * cub[i]));
            Ok(r)
        };
        let jacobian = |x: &[f64]| -> Result<CsrMatrix> {
            let uf = VectorField::from_raw(x[..nd].to_vec());
            let mut a21 = cubic_jacobian(&disc.space, &uf);
            a21.scale(p.kappa);
            a21.axpy(1.0, &a21_linear);
            CsrMatrix::block_2x2(&a11, &a12, &a21, &disc.mass3)
        };

        let mut guess = un.clone();
        guess.extend_from_slice(state.h_last.coeffs());
        let res = self.newton.solve(residual, jacobian, guess)?;
        let (u, y) = res.solution.split_at(nd);
        let (u, y) = (u.to_vec(), y.to_vec());
        Ok(self.finish(state, u, y, res))
    }

    /// First Crank–Nicolson level: the cross product is evaluated fully
    /// implicitly at the midpoint, so no earlier level is needed.
    pub fn cn_first_step(&mut self, state: &StepperState) -> Result<StepperState> {
        if state.n != 0 {
            return Err(crate::error::ConfigError::InvalidParameter("first Crank-Nicolson step requires n = 0".into()).into());
        }
        let substeps = self.cfg.first_step_substeps;
        let k = self.cfg.k / substeps as f64;
        let mut u = state.u_curr.coeffs().to_vec();
        let mut y = state.h_last.coeffs().to_vec();
        let mut iterations = 0;
        let mut trace = Vec::new();
        for _ in 0..substeps {
            let res = self.midpoint_implicit_solve(&u, &y, k)?;
            iterations += res.iterations;
            trace = res.trace.clone();
            let nd = u.len();
            u = res.solution[..nd].to_vec();
            y = res.solution[nd..].to_vec();
        }
        let res = NewtonResult { solution: Vec::new(), iterations, trace };
        Ok(self.finish(state, u, y, res))
    }

    fn midpoint_implicit_solve(&mut self, un: &[f64], y0: &[f64], k: f64) -> Result<NewtonResult> {
        let disc = self.disc;
        let p = self.params;
        let nd = disc.space.n_dofs();
        let beta = if self.cfg.first_step_anisotropy { p.beta } else { 0.0 };
        let un_field = VectorField::from_raw(un.to_vec());
        let mut damping = disc.mass3.clone();
        damping.scale(-p.lambda_r);
        damping.axpy(-p.lambda_e, &disc.stiffness3);
        let (a21_linear, r2_const) = self.midpoint_linear_part(un, beta)?;

        let residual = |x: &[f64]| -> Result<Vec<f64>> {
            let (u, y) = x.split_at(nd);
            let du: Vec<f64> = u.iter().zip(un).map(|(a, b)| (a - b) / k).collect();
            let mid = VectorField::from_raw(u.iter().zip(un).map(|(a, b)| 0.5 * (a + b)).collect());
            let cross = cross_load(&disc.space, &mid, y);
            let r1a = disc.mass3.spmv(&du)?;
            let r1b = damping.spmv(y)?;
            let uf = VectorField::from_raw(u.to_vec());
            let ps = psi_load(&disc.space, &un_field, &uf);
            let r2a = a21_linear.spmv(u)?;
            let r2b = disc.mass3.spmv(y)?;
            let mut r = Vec::with_capacity(2 * nd);
            r.extend((0..nd).map(|i| r1a[i] + r1b[i] + p.gamma * cross[i]));
            r.extend((0..nd).map(|i| r2b[i] + r2a[i] + r2_const[i] + p.kappa * ps[i]));
            Ok(r)
        };
        let jacobian = |x: &[f64]| -> Result<CsrMatrix> {
            let (u, y) = x.split_at(nd);
            let mid = VectorField::from_raw(u.iter().zip(un).map(|(a, b)| 0.5 * (a + b)).collect());
            let yf = VectorField::from_raw(y.to_vec());
            // d/dU [C(u_mid) Y] = −½ C(Y).
            let mut a11 = cross_matrix(&disc.space, &yf);
            a11.scale(-0.5 * p.gamma);
            a11.axpy(1.0 / k, &disc.mass3);
            let mut a12 = cross_matrix(&disc.space, &mid);
            a12.scale(p.gamma);
            a12.axpy(1.0, &damping);
            let mut a21 = psi_jacobian(&disc.space, &un_field, &VectorField::from_raw(u.to_vec()));
            a21.scale(p.kappa);
            a21.axpy(1.0, &a21_linear);
            CsrMatrix::block_2x2(&a11, &a12, &a21, &disc.mass3)
        };
        let mut guess = un.to_vec();
        guess.extend_from_slice(y0);
        self.newton.solve(residual, jacobian, guess)
    }

    /// Linear midpoint terms of the second equation: the matrix acting on
    /// `U` and the constant part from `Uⁿ`, both carrying the ½ weight.
    fn midpoint_linear_part(&self, un: &[f64], beta: f64) -> Result<(CsrMatrix, Vec<f64>)> {
        let p = &self.params;
        let mut a = self.disc.stiffness3.clone();
        a.axpy(-p.kappa * p.mu, &self.disc.mass3);
        a.axpy(beta, &self.aniso);
        a.scale(0.5);
        let c = a.spmv(un)?;
        Ok((a, c))
    }

    /// Crank–Nicolson step for `n ≥ 1`.
    pub fn cn_step(&mut self, state: &StepperState) -> Result<StepperState> {
        let prev = state.u_prev.as_ref().ok_or_else(|| {
            Error::Config(crate::error::ConfigError::InvalidParameter("Crank-Nicolson step needs the previous level".into()))
        })?;
        let disc = self.disc;
        let p = self.params;
        let k = self.cfg.k;
        let nd = disc.space.n_dofs();
        let un = state.u_curr.coeffs().to_vec();
        let extrap = VectorField::from_raw(un.iter().zip(prev.coeffs()).map(|(a, b)| 1.5 * a - 0.5 * b).collect());

        let mut a11 = disc.mass3.clone();
        a11.scale(1.0 / k);
        let mut a12 = cross_matrix(&disc.space, &extrap);
        a12.scale(p.gamma);
        a12.axpy(-p.lambda_r, &disc.mass3);
        a12.axpy(-p.lambda_e, &disc.stiffness3);
        let (a21_linear, r2_const) = self.midpoint_linear_part(&un, p.beta)?;

        let residual = |x: &[f64]| -> Result<Vec<f64>> {
            let (u, y) = x.split_at(nd);
            let du: Vec<f64> = u.iter().zip(&un).map(|(a, b)| a - b).collect();
            let r1a = a11.spmv(&du)?;
            let r1b = a12.spmv(y)?;
            let ps = psi_load(&disc.space, &state.u_curr, &VectorField::from_raw(u.to_vec()));
            let r2a = a21_linear.spmv(u)?;
            let r2b = disc.mass3.spmv(y)?;
            let mut r = Vec::with_capacity(2 * nd);
            r.extend((0..nd).map(|i| r1a[i] + r1b[i]));
            r.extend((0..nd).map(|i| r2b[i] + r2a[i] + r2_const[i] + p.kappa * ps[i]));
            Ok(r)
        };
        let jacobian = |x: &[f64]| -> Result<CsrMatrix> {
            let mut a21 = psi_jacobian(&disc.space, &state.u_curr, &VectorField::from_raw(x[..nd].to_vec()));
            a21.scale(p.kappa);
            a21.axpy(1.0, &a21_linear);
            CsrMatrix::block_2x2(&a11, &a12, &a21, &disc.mass3)
        };

        let mut guess = un.clone();
        guess.extend_from_slice(state.h_last.coeffs());
        let res = self.newton.solve(residual, jacobian, guess)?;
        let (u, y) = res.solution.split_at(nd);
        let (u, y) = (u.to_vec(), y.to_vec());
        Ok(self.finish(state, u, y, res))
    }
}

/// `⟨w × y, φ_i e_c⟩` as a load vector for given coefficient vectors.
fn cross_load(space: &FeSpace, w: &VectorField, y: &[f64]) -> Vec<f64> {
    let rule = space.high_rule();
    crate::fem::assembly::assemble_load(space, rule, |e, q| {
        let l = &rule.points[q];
        model::cross3(space.eval(w.coeffs(), e, l), space.eval(y, e, l))
    })
}

/// Semi-implicit Euler step as a free function (builds a fresh stepper).
pub fn euler_step(state: &StepperState, p: &ModelParams, disc: &Discretization, cfg: &SchemeConfig) -> Result<StepperState> {
    Stepper::new(disc, *p, cfg.clone())?.euler_step(state)
}

/// First Crank–Nicolson step as a free function.
pub fn cn_first_step(state: &StepperState, p: &ModelParams, disc: &Discretization, cfg: &SchemeConfig) -> Result<StepperState> {
    Stepper::new(disc, *p, cfg.clone())?.cn_first_step(state)
}

/// Crank–Nicolson step (`n ≥ 1`) as a free function.
pub fn cn_step(state: &StepperState, p: &ModelParams, disc: &Discretization, cfg: &SchemeConfig) -> Result<StepperState> {
    Stepper::new(disc, *p, cfg.clone())?.cn_step(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::interpolate_nodal;
    use crate::mesh::build_structured_mesh;
    use crate::sparse::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sim1() -> ModelParams {
        ModelParams { lambda_r: 4.0, lambda_e: 1.0, gamma: 10.0, kappa: 2.0, mu: 1.0, beta: -0.1, e_axis: [0.0, 0.0, 1.0] }
    }

    fn sim2() -> ModelParams {
        ModelParams { lambda_r: 4.0, lambda_e: 0.001, gamma: 5.0, kappa: 3.0, mu: -1.0, beta: 0.2, e_axis: [0.0, 1.0, 0.0] }
    }

    fn u0_sim1(x: [f64; 2]) -> [f64; 3] {
        let (a, b) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).sin());
        [a, b, 2.0 * a * b]
    }

    fn u0_sim2(x: [f64; 2]) -> [f64; 3] {
        let (a, b) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).sin());
        [-2.0 * x[1] * a, 4.0 * x[0] * x[0] * b, 2.0 * a * b]
    }

    fn run(disc: &Discretization, p: ModelParams, cfg: SchemeConfig, u0: &dyn Fn([f64; 2]) -> [f64; 3], steps: usize) -> Vec<f64> {
        let mut st = Stepper::new(disc, p, cfg.clone()).unwrap();
        let mut s = st.initial_state(interpolate_nodal(&disc.space, &u0)).unwrap();
        let mut out = Vec::new();
        for _ in 0..steps {
            let next = st.step(&s).unwrap();
            out.push(dissipation_residual(disc, s.energy_curr, next.energy_curr, &next.h_last, cfg.k, &p));
            assert!(next.newton_iters_last <= 25);
            s = next;
        }
        out
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [SchemeKind::Euler, SchemeKind::EulerBloch, SchemeKind::CrankNicolson] {
            assert_eq!(SchemeKind::parse(s.name()), Some(s));
        }
        assert_eq!(SchemeKind::parse("rk4"), None);
    }

    #[test]
    fn zero_state_is_fixed() {
        let disc = Discretization::new(build_structured_mesh(2, 4).unwrap());
        for scheme in [SchemeKind::Euler, SchemeKind::EulerBloch, SchemeKind::CrankNicolson] {
            let mut st = Stepper::new(&disc, sim2(), SchemeConfig::new(1e-2, scheme)).unwrap();
            let mut s = st.initial_state(VectorField::zeros(&disc.space)).unwrap();
            for _ in 0..3 {
                s = st.step(&s).unwrap();
            }
            assert!(s.u_curr.coeffs().iter().all(|v| v.abs() <= 1e-10));
            assert!(s.h_last.coeffs().iter().all(|v| v.abs() <= 1e-10));
        }
    }

    #[test]
    fn constant_well_state_is_fixed() {
        let disc = Discretization::new(build_structured_mesh(2, 4).unwrap());
        let p = ModelParams { mu: 2.0, ..sim1() };
        let c = [p.mu.sqrt(), 0.0, 0.0];
        for scheme in [SchemeKind::Euler, SchemeKind::EulerBloch, SchemeKind::CrankNicolson] {
            let mut st = Stepper::new(&disc, p, SchemeConfig::new(1e-2, scheme)).unwrap();
            let mut s = st.initial_state(VectorField::constant(&disc.space, c)).unwrap();
            for _ in 0..3 {
                s = st.step(&s).unwrap();
            }
            for i in 0..disc.space.n_nodes() {
                let v = s.u_curr.node(i);
                assert!((0..3).all(|d| (v[d] - c[d]).abs() <= 1e-10), "{scheme:?} {v:?}");
            }
        }
    }

    #[test]
    fn euler_dissipates_for_positive_mu() {
        let disc = Discretization::new(build_structured_mesh(2, 8).unwrap());
        let cfg = SchemeConfig::new(1e-2, SchemeKind::Euler);
        for r in run(&disc, sim1(), cfg, &u0_sim1, 5) {
            assert!(r <= 1e-9, "residual {r}");
        }
    }

    #[test]
    fn bloch_dissipates_for_negative_mu() {
        let disc = Discretization::new(build_structured_mesh(2, 8).unwrap());
        let cfg = SchemeConfig::new(1e-2, SchemeKind::EulerBloch);
        for r in run(&disc, sim2(), cfg, &u0_sim2, 5) {
            assert!(r <= 1e-9, "residual {r}");
        }
    }

    #[test]
    fn crank_nicolson_energy_identity() {
        let disc = Discretization::new(build_structured_mesh(2, 8).unwrap());
        for (p, u0) in [(sim1(), u0_sim1 as fn([f64; 2]) -> [f64; 3]), (sim2(), u0_sim2)] {
            let mut cfg = SchemeConfig::new(5e-3, SchemeKind::CrankNicolson);
            cfg.newton_tol = 1e-12;
            for r in run(&disc, p, cfg, &u0, 6) {
                assert!(r.abs() <= 1e-9, "residual {r}");
            }
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let disc = Discretization::new(build_structured_mesh(2, 8).unwrap());
        let mut cfg = SchemeConfig::new(1e-2, SchemeKind::Euler);
        cfg.newton_tol = 1e-13;
        let mut st = Stepper::new(&disc, sim1(), cfg).unwrap();
        let s = st.initial_state(interpolate_nodal(&disc.space, &u0_sim1)).unwrap();
        let next = st.step(&s).unwrap();
        let t = &next.residual_trace;
        assert!(t.len() >= 3, "{t:?}");
        // Once in the asymptotic regime, e_{j+1} ≲ C e_j².
        let ok = t.windows(3).any(|w| w[2] <= 10.0 * w[1] * w[1] / w[0].max(1e-300) || w[2] < 1e-12);
        assert!(ok, "{t:?}");
    }

    fn fd_check(f: impl Fn(&VectorField) -> Vec<f64>, jac: &CsrMatrix, u: &VectorField, dir: &[f64]) -> f64 {
        let h = 1e-6;
        let up = VectorField::from_raw(u.coeffs().iter().zip(dir).map(|(a, d)| a + h * d).collect());
        let um = VectorField::from_raw(u.coeffs().iter().zip(dir).map(|(a, d)| a - h * d).collect());
        let (fp, fm) = (f(&up), f(&um));
        let jd = jac.spmv(dir).unwrap();
        let diff: Vec<f64> = (0..jd.len()).map(|i| (fp[i] - fm[i]) / (2.0 * h) - jd[i]).collect();
        norm2(&diff) / norm2(&jd).max(1e-300)
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let disc = Discretization::new(build_structured_mesh(2, 4).unwrap());
        let s = &disc.space;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rand_vec = || (0..s.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let u = VectorField::from_raw(rand_vec());
        let a = VectorField::from_raw(rand_vec());
        let dir = rand_vec();
        assert!(fd_check(|v| cubic_load(s, v), &cubic_jacobian(s, &u), &u, &dir) < 1e-7);
        assert!(fd_check(|v| psi_load(s, &a, v), &psi_jacobian(s, &a, &u), &u, &dir) < 1e-7);
        let y = rand_vec();
        // d/dw [C(w) y] = −C(y).
        let mut cy = cross_matrix(s, &VectorField::from_raw(y.clone()));
        cy.scale(-1.0);
        assert!(fd_check(|w| cross_matrix(s, w).spmv(&y).unwrap(), &cy, &u, &dir) < 1e-7);
    }
}
