//! Oracles shared by the integration tests. Nothing here calls the crate's
//! quadrature, geometry or solvers.

#![allow(dead_code)]

use llbar::mesh::Mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [0, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

/// Collapsed tensor rule on the reference triangle `{x, y ≥ 0, x + y ≤ 1}`;
/// exact for polynomials of degree `2n − 2`. Points `(x, y)`, weights sum to ½.
pub fn triangle_rule(n: usize) -> Vec<([f64; 2], f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(s, ws) in &g {
        for &(t, wt) in &g {
            out.push(([s, t * (1.0 - s)], ws * wt * (1.0 - s)));
        }
    }
    out
}

/// Per-element integration with the oracle rule. `f` receives the physical
/// point and the barycentric weights of the element's vertices (in element
/// order); the result is multiplied by the physical area.
pub fn integrate_element(mesh: &Mesh, e: usize, n: usize, mut f: impl FnMut([f64; 2], [f64; 3]) -> f64) -> f64 {
    let v = mesh.element_vertices(e);
    let p = [mesh.nodes()[v[0]], mesh.nodes()[v[1]], mesh.nodes()[v[2]]];
    let (a, b) = ([p[1][0] - p[0][0], p[1][1] - p[0][1]], [p[2][0] - p[0][0], p[2][1] - p[0][1]]);
    let det = (a[0] * b[1] - a[1] * b[0]).abs();
    triangle_rule(n)
        .into_iter()
        .map(|([s, t], w)| {
            let x = [p[0][0] + s * a[0] + t * b[0], p[0][1] + s * a[1] + t * b[1]];
            w * det * f(x, [1.0 - s - t, s, t])
        })
        .sum()
}

/// Value of a P1 vector field at barycentric weights `l` of element `e`.
pub fn eval(mesh: &Mesh, coeffs: &[f64], e: usize, l: [f64; 3]) -> [f64; 3] {
    let v = mesh.element_vertices(e);
    let mut out = [0.0; 3];
    for (a, &node) in v.iter().enumerate() {
        for c in 0..3 {
            out[c] += l[a] * coeffs[3 * node + c];
        }
    }
    out
}

/// Triangle area from vertex coordinates.
pub fn area(mesh: &Mesh, e: usize) -> f64 {
    let v = mesh.element_vertices(e);
    let p = [mesh.nodes()[v[0]], mesh.nodes()[v[1]], mesh.nodes()[v[2]]];
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0])).abs()
}

/// Dense P1 mass matrix from the closed-form local matrix `(A/12)(1 + δ_ab)`.
pub fn dense_mass(mesh: &Mesh) -> Vec<Vec<f64>> {
    let n = mesh.n_nodes();
    let mut m = vec![vec![0.0; n]; n];
    for e in 0..mesh.n_elements() {
        let v = mesh.element_vertices(e);
        let a = area(mesh, e);
        for i in 0..3 {
            for j in 0..3 {
                m[v[i]][v[j]] += a / 12.0 * if i == j { 2.0 } else { 1.0 };
            }
        }
    }
    m
}

/// Dense P1 stiffness matrix for meshes of right triangles. With the right
/// angle at local vertex `r`, the local matrix is ½ times: 2 at `(r,r)`,
/// −1 between `r` and the others, 1 on the other diagonal entries, 0 between
/// the two acute vertices.
pub fn dense_stiffness(mesh: &Mesh) -> Vec<Vec<f64>> {
    let n = mesh.n_nodes();
    let mut k = vec![vec![0.0; n]; n];
    for e in 0..mesh.n_elements() {
        let v = mesh.element_vertices(e);
        let p: Vec<[f64; 2]> = v.iter().map(|&i| mesh.nodes()[i]).collect();
        let r = (0..3)
            .find(|&r| {
                let (a, b) = (p[(r + 1) % 3], p[(r + 2) % 3]);
                let d = (a[0] - p[r][0]) * (b[0] - p[r][0]) + (a[1] - p[r][1]) * (b[1] - p[r][1]);
                d.abs() < 1e-14
            })
            .expect("right triangle");
        for i in 0..3 {
            for j in 0..3 {
                let val = if i == j {
                    if i == r { 2.0 } else { 1.0 }
                } else if i == r || j == r {
                    -1.0
                } else {
                    0.0
                };
                k[v[i]][v[j]] += 0.5 * val;
            }
        }
    }
    k
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[row][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

pub fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn u0_sim1(x: [f64; 2]) -> [f64; 3] {
    let (a, b) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).sin());
    [a, b, 2.0 * a * b]
}

pub fn u0_sim2(x: [f64; 2]) -> [f64; 3] {
    let (a, b) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).sin());
    [-2.0 * x[1] * a, 4.0 * x[0] * x[0] * b, 2.0 * a * b]
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Load vector `b_{i,c} = ∫ g_c φ_i` with the oracle rule, where `g` is
/// given the physical point, the element and barycentric weights.
pub fn oracle_load(mesh: &Mesh, n: usize, g: impl Fn([f64; 2], usize, [f64; 3]) -> [f64; 3]) -> Vec<f64> {
    let mut b = vec![0.0; 3 * mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let v = mesh.element_vertices(e);
        for a in 0..3 {
            for c in 0..3 {
                b[3 * v[a] + c] += integrate_element(mesh, e, n, |x, l| g(x, e, l)[c] * l[a]);
            }
        }
    }
    b
}
