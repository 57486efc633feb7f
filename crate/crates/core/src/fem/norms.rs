use super::{assemble_mass, assemble_stiffness, FeSpace, VectorField};
use crate::sparse::{dot, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    H1Semi,
    /// Nodal maximum of the Euclidean norm.
    Linf,
    L4,
}

/// Norm of a field. Assembles M and K on the fly; use [`norm_with`] in loops.
pub fn norm(space: &FeSpace, v: &VectorField, kind: NormKind) -> f64 {
    norm_with(space, &assemble_mass(space), &assemble_stiffness(space), v, kind)
}

/// Norm of a field using pre-assembled scalar mass `m` and stiffness `k`.
pub fn norm_with(space: &FeSpace, m: &CsrMatrix, k: &CsrMatrix, v: &VectorField, kind: NormKind) -> f64 {
    match kind {
        NormKind::L2 => quadratic_form(m, v).max(0.0).sqrt(),
        NormKind::H1Semi => quadratic_form(k, v).max(0.0).sqrt(),
        NormKind::H1 => (quadratic_form(m, v) + quadratic_form(k, v)).max(0.0).sqrt(),
        NormKind::Linf => (0..v.n_nodes())
            .map(|i| {
                let n = v.node(i);
                (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
            })
            .fold(0.0, f64::max),
        NormKind::L4 => l4_fourth_power(space, v).powf(0.25),
    }
}

/// `Σ_c v_cᵀ S v_c` for a scalar matrix `S`.
pub fn quadratic_form(s: &CsrMatrix, v: &VectorField) -> f64 {
    (0..3)
        .map(|c| {
            let vc = v.component(c);
            dot(&vc, &s.spmv(&vc).expect("field matches matrix"))
        })
        .sum()
}

/// `∫ |v|⁴` with the high rule (exact for P1 fields).
pub fn l4_fourth_power(space: &FeSpace, v: &VectorField) -> f64 {
    let rule = space.high_rule();
    let mut total = 0.0;
    for e in 0..space.mesh().n_elements() {
        let measure = space.geometry()[e].measure;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let u = space.eval(v.coeffs(), e, l);
            let s = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
            total += w * measure * s * s;
        }
    }
    total
}
