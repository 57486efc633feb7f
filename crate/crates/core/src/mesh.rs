//! Structured simplicial meshes of the unit interval and the unit square.
//!
//! Nodes are numbered lexicographically with `x` running fastest, so node
//! `(i, j)` of a square mesh with `n` divisions has index `j * (n + 1) + i`.
//! Every square cell is split by its lower-left to upper-right diagonal,
//! which keeps uniformly refined meshes nested.

use crate::error::{ConfigError, Result};

/// A simplex of the mesh: two node indices for segments, three for triangles.
pub type Element = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    divisions: usize,
    nodes: Vec<[f64; 2]>,
    elements: Vec<Element>,
    h: f64,
}

/// Build the structured mesh of `[0,1]^dim` with `n` cells per axis.
pub fn build_structured_mesh(dim: usize, n: usize) -> Result<Mesh> {
    if !(1..=2).contains(&dim) {
        return Err(ConfigError::InvalidDimension(dim).into());
    }
    if n == 0 {
        return Err(ConfigError::InvalidDivisions { min: 1, found: n }.into());
    }
    let step = 1.0 / n as f64;
    let coord = |i: usize| if i == n { 1.0 } else { i as f64 * step };

    let mut nodes = Vec::new();
    let mut elements = Vec::new();
    match dim {
        1 => {
            nodes.extend((0..=n).map(|i| [coord(i), 0.0]));
            // Third slot unused for segments.
            elements.extend((0..n).map(|i| [i, i + 1, usize::MAX]));
        }
        _ => {
            for j in 0..=n {
                for i in 0..=n {
                    nodes.push([coord(i), coord(j)]);
                }
            }
            let idx = |i: usize, j: usize| j * (n + 1) + i;
            for j in 0..n {
                for i in 0..n {
                    let ll = idx(i, j);
                    let lr = idx(i + 1, j);
                    let ur = idx(i + 1, j + 1);
                    let ul = idx(i, j + 1);
                    elements.push([ll, lr, ur]);
                    elements.push([ll, ur, ul]);
                }
            }
        }
    }

    let mut mesh = Mesh {
        dim,
        divisions: n,
        nodes,
        elements,
        h: 0.0,
    };
    mesh.h = mesh
        .elements
        .iter()
        .map(|e| mesh.element_diameter(e))
        .fold(0.0, f64::max);
    Ok(mesh)
}

/// Uniform refinement: doubles the number of divisions per axis.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    build_structured_mesh(mesh.dim, 2 * mesh.divisions)
        .expect("refinement of a valid mesh is valid")
}

/// Maximal element diameter.
pub fn mesh_size(mesh: &Mesh) -> f64 {
    mesh.h
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Number of vertices per element (`dim + 1`).
    pub fn vertices_per_element(&self) -> usize {
        self.dim + 1
    }

    /// Vertex indices of element `e` (length `dim + 1`).
    pub fn element_vertices(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Signed length (d=1) or signed area (d=2) of an element.
    pub fn signed_measure(&self, e: &Element) -> f64 {
        match self.dim {
            1 => self.nodes[e[1]][0] - self.nodes[e[0]][0],
            _ => {
                let [a, b, c] = [self.nodes[e[0]], self.nodes[e[1]], self.nodes[e[2]]];
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    fn element_diameter(&self, e: &Element) -> f64 {
        let verts = &e[..self.dim + 1];
        let mut diam: f64 = 0.0;
        for (k, &p) in verts.iter().enumerate() {
            for &q in &verts[k + 1..] {
                let (a, b) = (self.nodes[p], self.nodes[q]);
                diam = diam.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        diam
    }

    /// Index of the fine node with lattice coordinates `(i, j)` (`j = 0` for d=1).
    pub fn lattice_index(&self, i: usize, j: usize) -> usize {
        j * (self.divisions + 1) + i
    }
}
