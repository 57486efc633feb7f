//! Physical parameters, the energy functional, and the nonlinear and
//! coupling forms of the mixed system, with their Jacobians.
//!
//! Every form is integrated with the degree-4 rule, which is exact for the
//! polynomial integrands produced by P1 fields.

use crate::error::ConfigError;
use crate::fem::assembly::{assemble_block_form, assemble_load};
use crate::fem::{l4_fourth_power, quadratic_form, FeSpace, VectorField};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Relativistic damping.
    pub lambda_r: f64,
    /// Exchange damping.
    pub lambda_e: f64,
    pub gamma: f64,
    pub kappa: f64,
    /// Positive below the Curie temperature, negative above.
    pub mu: f64,
    /// Uniaxial anisotropy strength (either sign accepted).
    pub beta: f64,
    pub e_axis: [f64; 3],
}

impl ModelParams {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if !(self.lambda_r > 0.0) {
            return Err(ConfigError::InvalidParameter(format!("lambda_r must be > 0, got {}", self.lambda_r)));
        }
        if !(self.lambda_e >= 0.0) {
            return Err(ConfigError::InvalidParameter(format!("lambda_e must be >= 0, got {}", self.lambda_e)));
        }
        if !(self.kappa > 0.0) {
            return Err(ConfigError::InvalidParameter(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if ![self.gamma, self.mu, self.beta].iter().all(|v| v.is_finite()) {
            return Err(ConfigError::InvalidParameter("non-finite coefficient".into()));
        }
        if (norm3(self.e_axis) - 1.0).abs() > 1e-12 {
            return Err(ConfigError::NonUnitAxis(self.e_axis));
        }
        Ok(())
    }
}

#[inline]
pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Discrete energy. For `μ > 0` the double-well form
/// `½‖∇u‖² + κ/4 ‖|u|² − μ‖² + β/2 ∫(e·u)²`; otherwise
/// `½‖∇u‖² + κ/4 ‖u‖⁴_{L⁴} − κμ/2 ‖u‖² + β/2 ∫(e·u)²`, which vanishes at `u = 0`.
pub fn energy(space: &FeSpace, mass: &CsrMatrix, stiffness: &CsrMatrix, p: &ModelParams, u: &VectorField) -> f64 {
    let grad = 0.5 * quadratic_form(stiffness, u);
    let aniso = 0.5 * p.beta * projected_mass_form(mass, p.e_axis, u.coeffs());
    if p.mu > 0.0 {
        let rule = space.high_rule();
        let mut well = 0.0;
        for e in 0..space.mesh().n_elements() {
            let measure = space.geometry()[e].measure;
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let v = space.eval(u.coeffs(), e, l);
                let d = dot3(v, v) - p.mu;
                well += w * measure * d * d;
            }
        }
        grad + 0.25 * p.kappa * well + aniso
    } else {
        grad + 0.25 * p.kappa * l4_fourth_power(space, u) - 0.5 * p.kappa * p.mu * quadratic_form(mass, u) + aniso
    }
}

/// `∫ (e·u)²` through the scalar mass matrix.
fn projected_mass_form(mass: &CsrMatrix, e: [f64; 3], u: &[f64]) -> f64 {
    let n = mass.rows();
    let s: Vec<f64> = (0..n).map(|i| e[0] * u[3 * i] + e[1] * u[3 * i + 1] + e[2] * u[3 * i + 2]).collect();
    let ms = mass.spmv(&s).expect("sizes match");
    crate::sparse::dot(&s, &ms)
}

/// `b_{i,c} = ⟨|u|² u, φ_i e_c⟩`.
pub fn cubic_load(space: &FeSpace, u: &VectorField) -> Vec<f64> {
    let rule = space.high_rule();
    assemble_load(space, rule, |e, q| {
        let v = space.eval(u.coeffs(), e, &rule.points[q]);
        let s = dot3(v, v);
        [s * v[0], s * v[1], s * v[2]]
    })
}

/// Derivative of [`cubic_load`]: pointwise block `|u|² I + 2 u uᵀ`.
pub fn cubic_jacobian(space: &FeSpace, u: &VectorField) -> CsrMatrix {
    let rule = space.high_rule();
    assemble_block_form(space, rule, |e, q| {
        let v = space.eval(u.coeffs(), e, &rule.points[q]);
        let s = dot3(v, v);
        let mut g = [[0.0; 3]; 3];
        for c in 0..3 {
            for d in 0..3 {
                g[c][d] = 2.0 * v[c] * v[d];
            }
            g[c][c] += s;
        }
        g
    })
}

/// Matrix of `y ↦ ⟨w × y, φ_i e_c⟩` for a fixed field `w`.
pub fn cross_matrix(space: &FeSpace, w: &VectorField) -> CsrMatrix {
    let rule = space.high_rule();
    assemble_block_form(space, rule, |e, q| skew(space.eval(w.coeffs(), e, &rule.points[q])))
}

/// `[w]ₓ` with `[w]ₓ y = w × y`.
#[inline]
pub fn skew(w: [f64; 3]) -> [[f64; 3]; 3] {
    [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
}

/// `b_{i,c} = e_c Σ_d e_d (M u_d)_i`, i.e. the load of `e (e·u)` (β applied by caller).
pub fn anisotropy_apply(p: &ModelParams, mass: &CsrMatrix, u: &[f64]) -> Vec<f64> {
    let e = p.e_axis;
    let n = mass.rows();
    let s: Vec<f64> = (0..n).map(|i| e[0] * u[3 * i] + e[1] * u[3 * i + 1] + e[2] * u[3 * i + 2]).collect();
    let ms = mass.spmv(&s).expect("sizes match");
    let mut out = vec![0.0; 3 * n];
    for i in 0..n {
        for c in 0..3 {
            out[3 * i + c] = e[c] * ms[i];
        }
    }
    out
}

/// `(e eᵀ) ⊗ M` on the vector block pattern.
pub fn anisotropy_matrix(space: &FeSpace, p: &ModelParams, mass: &CsrMatrix) -> CsrMatrix {
    let pattern = space.pattern();
    let mut out = pattern.zero_vector();
    let e = p.e_axis;
    let values = out.values_mut();
    for i in 0..space.n_nodes() {
        let len = pattern.scalar_offsets[i + 1] - pattern.scalar_offsets[i];
        for k in 0..len {
            let m = mass.values()[pattern.scalar_index(i, k)];
            for c in 0..3 {
                for d in 0..3 {
                    values[pattern.vector_index(i, k, c, d)] = e[c] * e[d] * m;
                }
            }
        }
    }
    out
}

/// `ψ(a, b) = ½(|b|² + |a|²)(a + b)/2`, the averaged cubic term.
#[inline]
pub fn psi(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let s = 0.5 * (dot3(a, a) + dot3(b, b));
    [s * 0.5 * (a[0] + b[0]), s * 0.5 * (a[1] + b[1]), s * 0.5 * (a[2] + b[2])]
}

/// `b_{i,c} = ⟨ψ(uₙ, uₙ₊₁), φ_i e_c⟩`.
pub fn psi_load(space: &FeSpace, u_n: &VectorField, u_np1: &VectorField) -> Vec<f64> {
    let rule = space.high_rule();
    assemble_load(space, rule, |e, q| {
        let l = &rule.points[q];
        psi(space.eval(u_n.coeffs(), e, l), space.eval(u_np1.coeffs(), e, l))
    })
}

/// Derivative of [`psi_load`] in its second argument: pointwise block
/// `¼(|uₙ₊₁|² + |uₙ|²) I + u_{n+½} uₙ₊₁ᵀ`.
pub fn psi_jacobian(space: &FeSpace, u_n: &VectorField, u_np1: &VectorField) -> CsrMatrix {
    let rule = space.high_rule();
    assemble_block_form(space, rule, |e, q| {
        let l = &rule.points[q];
        let a = space.eval(u_n.coeffs(), e, l);
        let b = space.eval(u_np1.coeffs(), e, l);
        let s = 0.25 * (dot3(a, a) + dot3(b, b));
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
        let mut g = [[0.0; 3]; 3];
        for c in 0..3 {
            for d in 0..3 {
                g[c][d] = mid[c] * b[d];
            }
            g[c][c] += s;
        }
        g
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, assemble_stiffness, interpolate_nodal};
    use crate::mesh::build_structured_mesh;
    use crate::sparse::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(mu: f64, beta: f64) -> ModelParams {
        ModelParams {
            lambda_r: 4.0,
            lambda_e: 1.0,
            gamma: 10.0,
            kappa: 2.0,
            mu,
            beta,
            e_axis: [0.0, 0.0, 1.0],
        }
    }

    fn random_field(space: &FeSpace, rng: &mut ChaCha8Rng) -> VectorField {
        VectorField::from_coeffs(space, (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn validation() {
        assert!(params(1.0, 0.1).validate().is_ok());
        let mut p = params(1.0, 0.1);
        p.e_axis = [1.0, 1.0, 0.0];
        assert!(matches!(p.validate(), Err(ConfigError::NonUnitAxis(_))));
        p = params(1.0, 0.1);
        p.lambda_r = 0.0;
        assert!(p.validate().is_err());
        p = params(1.0, 0.1);
        p.lambda_e = -1.0;
        assert!(p.validate().is_err());
        p = params(1.0, -5.0);
        p.lambda_e = 0.0;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn energy_special_values() {
        let s = FeSpace::new(build_structured_mesh(2, 4).unwrap());
        let (m, k) = (assemble_mass(&s), assemble_stiffness(&s));
        let zero = VectorField::zeros(&s);
        assert_eq!(energy(&s, &m, &k, &params(-1.0, 0.3), &zero), 0.0);
        let one = VectorField::constant(&s, [1.0, 0.0, 0.0]);
        assert!(energy(&s, &m, &k, &params(1.0, 0.0), &one).abs() < 1e-14);
    }

    #[test]
    fn energy_branches_differ_by_constant() {
        let s = FeSpace::new(build_structured_mesh(2, 5).unwrap());
        let (m, k) = (assemble_mass(&s), assemble_stiffness(&s));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for mu in [0.5, 1.0, 3.0] {
            let u = random_field(&s, &mut rng);
            let p = params(mu, -0.1);
            let e1 = energy(&s, &m, &k, &p, &u);
            // Second branch evaluated directly.
            let e2 = 0.5 * quadratic_form(&k, &u) + 0.25 * p.kappa * l4_fourth_power(&s, &u)
                - 0.5 * p.kappa * mu * quadratic_form(&m, &u)
                + 0.5 * p.beta * projected_mass_form(&m, p.e_axis, u.coeffs());
            assert!((e1 - e2 - 0.25 * p.kappa * mu * mu).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_and_constant_loads() {
        let s = FeSpace::new(build_structured_mesh(2, 3).unwrap());
        let m = assemble_mass(&s);
        let zero = VectorField::zeros(&s);
        assert!(cubic_load(&s, &zero).iter().all(|&v| v == 0.0));
        assert!(cubic_jacobian(&s, &zero).values().iter().all(|&v| v == 0.0));
        assert!(cross_matrix(&s, &zero).values().iter().all(|&v| v == 0.0));
        assert!(psi_load(&s, &zero, &zero).iter().all(|&v| v == 0.0));
        assert!(psi_jacobian(&s, &zero, &zero).values().iter().all(|&v| v == 0.0));

        let one = VectorField::constant(&s, [1.0, 0.0, 0.0]);
        let b = cubic_load(&s, &one);
        let row_sums = m.spmv(&vec![1.0; s.n_nodes()]).unwrap();
        for i in 0..s.n_nodes() {
            assert!((b[3 * i] - row_sums[i]).abs() < 1e-15);
            assert!(b[3 * i + 1].abs() < 1e-16 && b[3 * i + 2].abs() < 1e-16);
        }
    }

    #[test]
    fn cross_matrix_is_skew_in_its_argument() {
        let s = FeSpace::new(build_structured_mesh(2, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let w = random_field(&s, &mut rng);
            let y = random_field(&s, &mut rng);
            let c = cross_matrix(&s, &w);
            let q = dot(y.coeffs(), &c.spmv(y.coeffs()).unwrap());
            assert!(q.abs() < 1e-12);
        }
    }

    #[test]
    fn anisotropy_properties() {
        let s = FeSpace::new(build_structured_mesh(2, 4).unwrap());
        let m = assemble_mass(&s);
        let p = params(1.0, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut u = random_field(&s, &mut rng);
        let zeros = vec![0.0; s.n_nodes()];
        u.set_component(2, &zeros);
        assert!(anisotropy_apply(&p, &m, u.coeffs()).iter().all(|v| v.abs() < 1e-16));

        let e = VectorField::constant(&s, p.e_axis);
        let b = anisotropy_apply(&p, &m, e.coeffs());
        let row_sums = m.spmv(&vec![1.0; s.n_nodes()]).unwrap();
        for i in 0..s.n_nodes() {
            assert_eq!(b[3 * i + 2], row_sums[i]);
        }

        let u = random_field(&s, &mut rng);
        let b = anisotropy_apply(&p, &m, u.coeffs());
        assert!(dot(u.coeffs(), &b) >= 0.0);
        let am = anisotropy_matrix(&s, &p, &m);
        let b2 = am.spmv(u.coeffs()).unwrap();
        for (x, y) in b.iter().zip(&b2) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_reduces_to_cubic_on_the_diagonal() {
        let s = FeSpace::new(build_structured_mesh(2, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = random_field(&s, &mut rng);
        let a = psi_load(&s, &u, &u);
        let b = cubic_load(&s, &u);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn cubic_load_is_monotone() {
        let s = FeSpace::new(build_structured_mesh(2, 3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let u = random_field(&s, &mut rng);
            let v = random_field(&s, &mut rng);
            let (bu, bv) = (cubic_load(&s, &u), cubic_load(&s, &v));
            let diff: f64 = (0..s.n_dofs()).map(|i| (bu[i] - bv[i]) * (u.coeffs()[i] - v.coeffs()[i])).sum();
            assert!(diff >= -1e-12);
        }
    }

    #[test]
    fn interpolated_sim_data_energy_is_finite() {
        let s = FeSpace::new(build_structured_mesh(2, 8).unwrap());
        let (m, k) = (assemble_mass(&s), assemble_stiffness(&s));
        let u = interpolate_nodal(&s, &|x: [f64; 2]| [x[0], x[1], 0.0]);
        let e = energy(&s, &m, &k, &params(1.0, 0.0), &u);
        assert!(e.is_finite() && e > 0.0);
    }
}
