//! Interpolation, L2 and Ritz projections, the discrete Laplacian, and
//! prolongation between nested meshes.

use super::assembly::assemble_load;
use super::{FeSpace, VectorField};
use crate::error::{Error, Result};
use crate::sparse::{solve_krylov, CsrMatrix, SparseLu};

const PROJECTION_TOL: f64 = 1e-12;
const PROJECTION_MAXIT: usize = 10_000;

/// An R³-valued function of position with an optional gradient.
pub trait AnalyticField {
    fn value(&self, x: [f64; 2]) -> [f64; 3];

    /// `grad[c] = ∇f_c`. Only needed by [`ritz_project`].
    fn gradient(&self, _x: [f64; 2]) -> Option<[[f64; 2]; 3]> {
        None
    }
}

impl<F: Fn([f64; 2]) -> [f64; 3]> AnalyticField for F {
    fn value(&self, x: [f64; 2]) -> [f64; 3] {
        self(x)
    }
}

/// Nodal interpolant: `coeffs[node] = f(node)`.
pub fn interpolate_nodal(space: &FeSpace, f: &dyn AnalyticField) -> VectorField {
    let coeffs = space.mesh().nodes().iter().flat_map(|&p| f.value(p)).collect();
    VectorField::from_raw(coeffs)
}

/// `b_{i,c} = ⟨f, φ_i e_c⟩` with the high rule.
pub fn load_vector(space: &FeSpace, f: &dyn AnalyticField) -> Vec<f64> {
    let rule = space.high_rule();
    assemble_load(space, rule, |e, q| f.value(space.map_point(e, &rule.points[q])))
}

/// L2 projection: solves `M c = b` per component.
pub fn l2_project(space: &FeSpace, mass: &CsrMatrix, f: &dyn AnalyticField) -> Result<VectorField> {
    let b = load_vector(space, f);
    solve_mass_blockwise(mass, &b)
}

/// Solve `(M ⊗ I₃) c = b` one component at a time.
pub(crate) fn solve_mass_blockwise(mass: &CsrMatrix, b: &[f64]) -> Result<VectorField> {
    let n = mass.rows();
    if b.len() != 3 * n {
        return Err(Error::DimensionMismatch { expected: 3 * n, found: b.len() });
    }
    let mut out = VectorField::from_raw(vec![0.0; 3 * n]);
    for c in 0..3 {
        let bc: Vec<f64> = b.iter().skip(c).step_by(3).copied().collect();
        let x = solve_krylov(mass, &bc, PROJECTION_TOL, PROJECTION_MAXIT, &vec![0.0; n])?;
        out.set_component(c, &x);
    }
    Ok(out)
}

/// Ritz projection with the zero-mean-difference constraint, solved through
/// the augmented system `[[K, m], [mᵀ, 0]]` with `m_i = ⟨φ_i, 1⟩`.
pub fn ritz_project(space: &FeSpace, stiffness: &CsrMatrix, f: &dyn AnalyticField) -> Result<VectorField> {
    let n = space.n_nodes();
    let rule = space.high_rule();
    let nv = space.vertices_per_element();

    let mut g = vec![0.0; 3 * n];
    let mut mean = [0.0; 3];
    let mut m = vec![0.0; n];
    for e in 0..space.mesh().n_elements() {
        let verts = space.mesh().element_vertices(e);
        let geo = &space.geometry()[e];
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = space.map_point(e, l);
            let wq = w * geo.measure;
            let grad = f.gradient(x).ok_or_else(|| {
                Error::Config(crate::error::ConfigError::InvalidParameter(
                    "Ritz projection requires a gradient".into(),
                ))
            })?;
            let val = f.value(x);
            for c in 0..3 {
                mean[c] += wq * val[c];
            }
            for a in 0..nv {
                m[verts[a]] += wq * l[a];
                for c in 0..3 {
                    g[3 * verts[a] + c] += wq * (grad[c][0] * geo.grads[a][0] + grad[c][1] * geo.grads[a][1]);
                }
            }
        }
    }

    let mut trips = Vec::with_capacity(stiffness.nnz() + 2 * n);
    for r in 0..n {
        for k in stiffness.row_offsets()[r]..stiffness.row_offsets()[r + 1] {
            trips.push((r, stiffness.col_indices()[k], stiffness.values()[k]));
        }
        trips.push((r, n, m[r]));
        trips.push((n, r, m[r]));
    }
    let augmented = CsrMatrix::from_triplets(n + 1, n + 1, &trips)?;
    let mut lu = SparseLu::new();
    lu.factor(&augmented)?;

    let mut out = VectorField::from_raw(vec![0.0; 3 * n]);
    for c in 0..3 {
        let mut rhs: Vec<f64> = g.iter().skip(c).step_by(3).copied().collect();
        rhs.push(mean[c]);
        lu.solve_in_place(&mut rhs)?;
        // One step of iterative refinement on the augmented system.
        let mut target: Vec<f64> = g.iter().skip(c).step_by(3).copied().collect();
        target.push(mean[c]);
        let ax = augmented.spmv(&rhs)?;
        let mut corr: Vec<f64> = target.iter().zip(&ax).map(|(t, a)| t - a).collect();
        lu.solve_in_place(&mut corr)?;
        for (x, d) in rhs.iter_mut().zip(&corr) {
            *x += d;
        }
        out.set_component(c, &rhs[..n]);
    }
    Ok(out)
}

/// Discrete Laplacian `Δ_h v = −M⁻¹ K v`, componentwise.
pub fn apply_discrete_laplacian(
    space: &FeSpace,
    mass: &CsrMatrix,
    stiffness: &CsrMatrix,
    v: &VectorField,
) -> Result<VectorField> {
    space.check_field(v)?;
    let n = space.n_nodes();
    let mut rhs = vec![0.0; 3 * n];
    for c in 0..3 {
        let kv = stiffness.spmv(&v.component(c))?;
        for i in 0..n {
            rhs[3 * i + c] = -kv[i];
        }
    }
    solve_mass_blockwise(mass, &rhs)
}

/// Prolongation of a P1 field to the uniformly refined mesh. The result
/// represents the same function.
pub fn prolong(coarse_space: &FeSpace, coarse: &VectorField, fine_space: &FeSpace) -> Result<VectorField> {
    coarse_space.check_field(coarse)?;
    let (cm, fm) = (coarse_space.mesh(), fine_space.mesh());
    if cm.dim() != fm.dim() || fm.divisions() != 2 * cm.divisions() {
        return Err(Error::NotNested { coarse: cm.divisions(), fine: fm.divisions() });
    }
    let nf = fm.divisions();
    let jmax = if fm.dim() == 2 { nf } else { 0 };
    let mut out = vec![0.0; fine_space.n_dofs()];
    let cidx = |i: usize, j: usize| cm.lattice_index(i, j);
    for jf in 0..=jmax {
        for i_f in 0..=nf {
            let (ic, jc) = (i_f / 2, jf / 2);
            let (odd_i, odd_j) = (i_f % 2 == 1, jf % 2 == 1);
            let value = match (odd_i, odd_j) {
                (false, false) => coarse.node(cidx(ic, jc)),
                (true, false) => avg(coarse.node(cidx(ic, jc)), coarse.node(cidx(ic + 1, jc))),
                (false, true) => avg(coarse.node(cidx(ic, jc)), coarse.node(cidx(ic, jc + 1))),
                // Midpoint of the lower-left to upper-right diagonal.
                (true, true) => avg(coarse.node(cidx(ic, jc)), coarse.node(cidx(ic + 1, jc + 1))),
            };
            let f = fm.lattice_index(i_f, jf);
            out[3 * f..3 * f + 3].copy_from_slice(&value);
        }
    }
    Ok(VectorField::from_raw(out))
}

fn avg(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::norms::{norm_with, NormKind};
    use crate::fem::{assemble_mass, assemble_stiffness};
    use crate::mesh::{build_structured_mesh, refine_uniform};
    use std::f64::consts::PI;

    struct Affine;
    impl AnalyticField for Affine {
        fn value(&self, x: [f64; 2]) -> [f64; 3] {
            [1.0 + 2.0 * x[0] - x[1], 0.5 * x[1], -3.0 + x[0]]
        }
        fn gradient(&self, _x: [f64; 2]) -> Option<[[f64; 2]; 3]> {
            Some([[2.0, -1.0], [0.0, 0.5], [1.0, 0.0]])
        }
    }

    struct Constant;
    impl AnalyticField for Constant {
        fn value(&self, _x: [f64; 2]) -> [f64; 3] {
            [0.3, -1.2, 2.0]
        }
        fn gradient(&self, _x: [f64; 2]) -> Option<[[f64; 2]; 3]> {
            Some([[0.0; 2]; 3])
        }
    }

    fn space(n: usize) -> FeSpace {
        FeSpace::new(build_structured_mesh(2, n).unwrap())
    }

    fn max_diff(a: &VectorField, b: &VectorField) -> f64 {
        a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn interpolation_of_initial_data() {
        let s = space(4);
        let u0 = |p: [f64; 2]| {
            let (cx, sy) = ((2.0 * PI * p[0]).cos(), (2.0 * PI * p[1]).sin());
            [cx, sy, 2.0 * cx * sy]
        };
        let f = interpolate_nodal(&s, &u0);
        assert_eq!(f.node(0), [1.0, 0.0, 0.0]);

        let c = interpolate_nodal(&s, &Constant);
        assert!((0..s.n_nodes()).all(|i| c.node(i) == [0.3, -1.2, 2.0]));

        // Affine functions are reproduced away from the nodes as well.
        let a = interpolate_nodal(&s, &Affine);
        for e in 0..s.mesh().n_elements() {
            for l in &s.high_rule().points {
                let x = s.map_point(e, l);
                let got = s.eval(a.coeffs(), e, l);
                let want = Affine.value(x);
                for k in 0..3 {
                    assert!((got[k] - want[k]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn l2_projection_properties() {
        let s = space(5);
        let m = assemble_mass(&s);
        let p = l2_project(&s, &m, &Affine).unwrap();
        assert!(max_diff(&p, &interpolate_nodal(&s, &Affine)) < 1e-10);
        let c = l2_project(&s, &m, &Constant).unwrap();
        assert!(max_diff(&c, &interpolate_nodal(&s, &Constant)) < 1e-10);
    }

    #[test]
    fn ritz_projection_properties() {
        let s = space(4);
        let k = assemble_stiffness(&s);
        let r = ritz_project(&s, &k, &Affine).unwrap();
        assert!(max_diff(&r, &interpolate_nodal(&s, &Affine)) < 1e-12);
        let c = ritz_project(&s, &k, &Constant).unwrap();
        assert!(max_diff(&c, &interpolate_nodal(&s, &Constant)) < 1e-12);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let s = space(6);
        let (m, k) = (assemble_mass(&s), assemble_stiffness(&s));
        let v = VectorField::constant(&s, [1.0, -2.0, 0.5]);
        let lap = apply_discrete_laplacian(&s, &m, &k, &v).unwrap();
        assert!(lap.coeffs().iter().all(|x| x.abs() < 1e-11));
    }

    #[test]
    fn prolongation_preserves_function() {
        let coarse = space(3);
        let fine = FeSpace::new(refine_uniform(coarse.mesh()));
        let v = interpolate_nodal(&coarse, &|p: [f64; 2]| {
            [(3.0 * p[0]).sin() + p[1], p[0] * p[1], (p[0] - p[1]).cos()]
        });
        let pv = prolong(&coarse, &v, &fine).unwrap();
        let (mc, kc) = (assemble_mass(&coarse), assemble_stiffness(&coarse));
        let (mf, kf) = (assemble_mass(&fine), assemble_stiffness(&fine));
        for kind in [NormKind::L2, NormKind::H1, NormKind::H1Semi, NormKind::Linf, NormKind::L4] {
            let a = norm_with(&coarse, &mc, &kc, &v, kind);
            let b = norm_with(&fine, &mf, &kf, &pv, kind);
            assert!((a - b).abs() < 1e-13, "{kind:?}: {a} vs {b}");
        }
        // Coarse node values are preserved, midpoints are averages.
        for (ci, p) in coarse.mesh().nodes().iter().enumerate() {
            let fi = fine.mesh().nodes().iter().position(|q| q == p).unwrap();
            assert_eq!(pv.node(fi), v.node(ci));
        }
        let (a, b) = (coarse.mesh().lattice_index(0, 0), coarse.mesh().lattice_index(1, 0));
        let mid = fine.mesh().lattice_index(1, 0);
        for c in 0..3 {
            assert_eq!(pv.node(mid)[c], 0.5 * (v.node(a)[c] + v.node(b)[c]));
        }

        assert!(matches!(prolong(&coarse, &v, &space(5)), Err(Error::NotNested { .. })));
    }

    #[test]
    fn prolongation_in_one_dimension() {
        let coarse = FeSpace::new(build_structured_mesh(1, 4).unwrap());
        let fine = FeSpace::new(refine_uniform(coarse.mesh()));
        let v = interpolate_nodal(&coarse, &|p: [f64; 2]| [p[0] * p[0], 1.0, -p[0]]);
        let pv = prolong(&coarse, &v, &fine).unwrap();
        assert_eq!(pv.node(2), v.node(1));
        assert_eq!(pv.node(1)[0], 0.5 * (v.node(0)[0] + v.node(1)[0]));
    }
}
