use super::{FeSpace, QuadRule};
use crate::sparse::CsrMatrix;

/// Scalar mass matrix `M_ij = ∫ φ_i φ_j`, integrated with the low rule
/// (exact for the quadratic integrand).
pub fn assemble_mass(space: &FeSpace) -> CsrMatrix {
    let rule = space.low_rule();
    assemble_scalar(space, |e, a, b| {
        let g = &space.geometry()[e];
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| w * l[a] * l[b])
            .sum::<f64>()
            * g.measure
    })
}

/// Scalar stiffness matrix `K_ij = ∫ ∇φ_i · ∇φ_j`. No boundary conditions
/// are imposed, so the kernel is the constants.
pub fn assemble_stiffness(space: &FeSpace) -> CsrMatrix {
    assemble_scalar(space, |e, a, b| {
        let g = &space.geometry()[e];
        g.measure * (g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1])
    })
}

fn assemble_scalar(space: &FeSpace, local: impl Fn(usize, usize, usize) -> f64) -> CsrMatrix {
    let pattern = space.pattern();
    let mut mat = pattern.zero_scalar();
    let nv = space.vertices_per_element();
    let values = mat.values_mut();
    for e in 0..space.mesh().n_elements() {
        let verts = space.mesh().element_vertices(e);
        for a in 0..nv {
            for b in 0..nv {
                values[pattern.scalar_index(verts[a], pattern.local[e][a][b])] += local(e, a, b);
            }
        }
    }
    mat
}

/// `S ⊗ I₃` on the vector block pattern (off-diagonal block slots stored as zeros).
pub fn kron_identity3(space: &FeSpace, scalar: &CsrMatrix) -> CsrMatrix {
    let pattern = space.pattern();
    let mut out = pattern.zero_vector();
    let values = out.values_mut();
    for i in 0..space.n_nodes() {
        let len = pattern.scalar_offsets[i + 1] - pattern.scalar_offsets[i];
        for k in 0..len {
            let v = scalar.values()[pattern.scalar_index(i, k)];
            for c in 0..3 {
                values[pattern.vector_index(i, k, c, c)] = v;
            }
        }
    }
    out
}

/// Assemble `∫ φ_i φ_j G(x)` where `G` is a pointwise 3x3 matrix evaluated at
/// each quadrature point of `rule`. `pointwise(e, q)` returns `G` at point `q`
/// of element `e`.
pub(crate) fn assemble_block_form(
    space: &FeSpace,
    rule: &QuadRule,
    mut pointwise: impl FnMut(usize, usize) -> [[f64; 3]; 3],
) -> CsrMatrix {
    let pattern = space.pattern();
    let mut out = pattern.zero_vector();
    let nv = space.vertices_per_element();
    let values = out.values_mut();
    for e in 0..space.mesh().n_elements() {
        let verts = space.mesh().element_vertices(e);
        let measure = space.geometry()[e].measure;
        for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let g = pointwise(e, q);
            let wq = w * measure;
            for a in 0..nv {
                for b in 0..nv {
                    let s = wq * l[a] * l[b];
                    let k = pattern.local[e][a][b];
                    for c in 0..3 {
                        for d in 0..3 {
                            values[pattern.vector_index(verts[a], k, c, d)] += s * g[c][d];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Assemble the load vector `b_{i,c} = ∫ f(x) · φ_i e_c`, where
/// `pointwise(e, q)` returns `f` at point `q` of element `e`.
pub(crate) fn assemble_load(
    space: &FeSpace,
    rule: &QuadRule,
    mut pointwise: impl FnMut(usize, usize) -> [f64; 3],
) -> Vec<f64> {
    let nv = space.vertices_per_element();
    let mut out = vec![0.0; space.n_dofs()];
    for e in 0..space.mesh().n_elements() {
        let verts = space.mesh().element_vertices(e);
        let measure = space.geometry()[e].measure;
        for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let f = pointwise(e, q);
            let wq = w * measure;
            for a in 0..nv {
                let s = wq * l[a];
                for c in 0..3 {
                    out[3 * verts[a] + c] += s * f[c];
                }
            }
        }
    }
    out
}
