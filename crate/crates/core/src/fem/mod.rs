//! Continuous piecewise-linear vector finite elements on a structured mesh.

pub(crate) mod assembly;
mod norms;
mod projection;
pub mod quadrature;

use std::sync::Arc;

pub use assembly::{assemble_mass, assemble_stiffness, kron_identity3};
pub use norms::{l4_fourth_power, norm, norm_with, quadratic_form, NormKind};
pub use projection::{
    apply_discrete_laplacian, interpolate_nodal, l2_project, load_vector, prolong, ritz_project,
    AnalyticField,
};
pub use quadrature::QuadRule;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;

/// Precomputed affine geometry of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub measure: f64,
    /// Gradients of the barycentric coordinates (`dim + 1` used entries).
    pub grads: [[f64; 2]; 3],
}

/// P1 Lagrange space of R³-valued functions.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Mesh,
    geometry: Vec<ElementGeometry>,
    low: QuadRule,
    high: QuadRule,
    pattern: BlockPattern,
}

/// Sparsity shared by every matrix assembled on a space: the scalar node
/// adjacency, and the same adjacency with dense 3x3 blocks for vector forms.
#[derive(Debug)]
pub struct BlockPattern {
    pub scalar_offsets: Arc<[usize]>,
    pub scalar_cols: Arc<[usize]>,
    pub vector_offsets: Arc<[usize]>,
    pub vector_cols: Arc<[usize]>,
    /// `local[e][a][b]`: offset of column `v_b` inside scalar row `v_a` of element `e`.
    pub local: Vec<[[usize; 3]; 3]>,
}

impl BlockPattern {
    fn build(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        let nv = mesh.vertices_per_element();
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for e in 0..mesh.n_elements() {
            let verts = mesh.element_vertices(e);
            for &a in verts {
                adj[a].extend_from_slice(verts);
            }
        }
        let mut scalar_offsets = vec![0usize; n + 1];
        let mut scalar_cols = Vec::new();
        for (i, row) in adj.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            scalar_cols.extend_from_slice(row);
            scalar_offsets[i + 1] = scalar_cols.len();
        }

        let mut vector_offsets = Vec::with_capacity(3 * n + 1);
        let mut vector_cols = Vec::with_capacity(9 * scalar_cols.len());
        vector_offsets.push(0);
        for row in &adj {
            for _c in 0..3 {
                for &j in row {
                    vector_cols.extend_from_slice(&[3 * j, 3 * j + 1, 3 * j + 2]);
                }
                vector_offsets.push(vector_cols.len());
            }
        }

        let local = (0..mesh.n_elements())
            .map(|e| {
                let verts = mesh.element_vertices(e);
                let mut pos = [[0usize; 3]; 3];
                for a in 0..nv {
                    let row = &adj[verts[a]];
                    for b in 0..nv {
                        pos[a][b] = row.binary_search(&verts[b]).expect("adjacent");
                    }
                }
                pos
            })
            .collect();

        Self {
            scalar_offsets: scalar_offsets.into(),
            scalar_cols: scalar_cols.into(),
            vector_offsets: vector_offsets.into(),
            vector_cols: vector_cols.into(),
            local,
        }
    }

    /// Value index of scalar entry `(i, row-local k)`.
    #[inline]
    pub fn scalar_index(&self, i: usize, k: usize) -> usize {
        self.scalar_offsets[i] + k
    }

    /// Value index of vector entry `(3i+c, 3j+d)` where `j` is the `k`-th
    /// column of scalar row `i`.
    #[inline]
    pub fn vector_index(&self, i: usize, k: usize, c: usize, d: usize) -> usize {
        let off = self.scalar_offsets[i];
        let len = self.scalar_offsets[i + 1] - off;
        9 * off + 3 * c * len + 3 * k + d
    }

    pub fn n_nodes(&self) -> usize {
        self.scalar_offsets.len() - 1
    }

    pub fn zero_scalar(&self) -> CsrMatrix {
        let n = self.n_nodes();
        CsrMatrix::from_parts(
            n,
            n,
            self.scalar_offsets.clone(),
            self.scalar_cols.clone(),
            vec![0.0; self.scalar_cols.len()],
        )
        .expect("pattern is canonical")
    }

    pub fn zero_vector(&self) -> CsrMatrix {
        let n = 3 * self.n_nodes();
        CsrMatrix::from_parts(
            n,
            n,
            self.vector_offsets.clone(),
            self.vector_cols.clone(),
            vec![0.0; self.vector_cols.len()],
        )
        .expect("pattern is canonical")
    }
}

impl FeSpace {
    pub fn new(mesh: Mesh) -> Self {
        let dim = mesh.dim();
        let geometry = (0..mesh.n_elements())
            .map(|e| {
                let verts = mesh.element_vertices(e);
                let p: Vec<[f64; 2]> = verts.iter().map(|&v| mesh.nodes()[v]).collect();
                if dim == 1 {
                    let len = p[1][0] - p[0][0];
                    ElementGeometry {
                        measure: len,
                        grads: [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]],
                    }
                } else {
                    let twice_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
                    let g = |a: usize, b: usize| {
                        [(p[a][1] - p[b][1]) / twice_area, (p[b][0] - p[a][0]) / twice_area]
                    };
                    ElementGeometry {
                        measure: 0.5 * twice_area,
                        grads: [g(1, 2), g(2, 0), g(0, 1)],
                    }
                }
            })
            .collect();
        let pattern = BlockPattern::build(&mesh);
        Self {
            low: QuadRule::low(dim),
            high: QuadRule::high(dim),
            mesh,
            geometry,
            pattern,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    /// Polynomial degree of the elements.
    pub fn degree(&self) -> usize {
        1
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// Number of vector unknowns, `3 * n_nodes`.
    pub fn n_dofs(&self) -> usize {
        3 * self.n_nodes()
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    pub fn low_rule(&self) -> &QuadRule {
        &self.low
    }

    pub fn high_rule(&self) -> &QuadRule {
        &self.high
    }

    pub fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    pub fn vertices_per_element(&self) -> usize {
        self.mesh.vertices_per_element()
    }

    /// Physical coordinates of a barycentric point in element `e`.
    pub fn map_point(&self, e: usize, bary: &[f64; 3]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for (a, &v) in self.mesh.element_vertices(e).iter().enumerate() {
            let p = self.mesh.nodes()[v];
            x[0] += bary[a] * p[0];
            x[1] += bary[a] * p[1];
        }
        x
    }

    /// Value of a field at a barycentric point of element `e`.
    #[inline]
    pub fn eval(&self, field: &[f64], e: usize, bary: &[f64; 3]) -> [f64; 3] {
        let mut u = [0.0; 3];
        for (a, &v) in self.mesh.element_vertices(e).iter().enumerate() {
            for c in 0..3 {
                u[c] += bary[a] * field[3 * v + c];
            }
        }
        u
    }

    /// Constant gradient of a field on element `e`: `grad[c] = ∇u_c`.
    pub fn eval_gradient(&self, field: &[f64], e: usize) -> [[f64; 2]; 3] {
        let g = &self.geometry[e].grads;
        let mut out = [[0.0; 2]; 3];
        for (a, &v) in self.mesh.element_vertices(e).iter().enumerate() {
            for c in 0..3 {
                out[c][0] += field[3 * v + c] * g[a][0];
                out[c][1] += field[3 * v + c] * g[a][1];
            }
        }
        out
    }

    pub(crate) fn check_field(&self, v: &VectorField) -> Result<()> {
        if v.coeffs.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch { expected: self.n_dofs(), found: v.coeffs.len() });
        }
        Ok(())
    }
}

/// Coefficients of an R³-valued P1 function, node-major: `[u_x, u_y, u_z]` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    coeffs: Vec<f64>,
}

impl VectorField {
    pub fn zeros(space: &FeSpace) -> Self {
        Self { coeffs: vec![0.0; space.n_dofs()] }
    }

    pub fn from_coeffs(space: &FeSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::DimensionMismatch { expected: space.n_dofs(), found: coeffs.len() });
        }
        Ok(Self { coeffs })
    }

    /// Wrap raw coefficients without a space check (length must be a multiple of 3).
    pub fn from_raw(coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len() % 3, 0);
        Self { coeffs }
    }

    pub fn constant(space: &FeSpace, value: [f64; 3]) -> Self {
        let coeffs = (0..space.n_nodes()).flat_map(|_| value).collect();
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn n_nodes(&self) -> usize {
        self.coeffs.len() / 3
    }

    pub fn node(&self, i: usize) -> [f64; 3] {
        [self.coeffs[3 * i], self.coeffs[3 * i + 1], self.coeffs[3 * i + 2]]
    }

    /// Scalar coefficient vector of component `c`.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.coeffs.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn set_component(&mut self, c: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self.coeffs[3 * i + c] = v;
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.lin_comb(1.0, other, -1.0)
    }
}
