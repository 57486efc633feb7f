//! Quadrature rules on the reference simplex, in barycentric coordinates.
//!
//! Weights sum to one, so an integral over an element is the weighted sum
//! times the element measure.

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    /// Barycentric coordinates of each point (`dim + 1` used entries).
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Edge-midpoint rule (triangles) or 2-point Gauss (segments).
    pub fn low(dim: usize) -> Self {
        match dim {
            1 => {
                let g = 0.5 / 3f64.sqrt();
                Self {
                    points: vec![[0.5 + g, 0.5 - g, 0.0], [0.5 - g, 0.5 + g, 0.0]],
                    weights: vec![0.5, 0.5],
                    degree: 3,
                }
            }
            _ => Self {
                points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
                weights: vec![1.0 / 3.0; 3],
                degree: 2,
            },
        }
    }

    /// Six-point degree-4 rule (triangles) or 3-point Gauss (segments).
    pub fn high(dim: usize) -> Self {
        match dim {
            1 => {
                let g = 0.5 * (0.6f64).sqrt();
                Self {
                    points: vec![[0.5 + g, 0.5 - g, 0.0], [0.5, 0.5, 0.0], [0.5 - g, 0.5 + g, 0.0]],
                    weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
                    degree: 5,
                }
            }
            _ => {
                const A: f64 = 0.445_948_490_915_964_886_318_329_253_883;
                const WA: f64 = 0.223_381_589_678_011_465_944_827_884_632;
                const B: f64 = 0.091_576_213_509_770_743_459_571_463_402;
                const WB: f64 = 0.109_951_743_655_321_867_388_505_448_701;
                let (a2, b2) = (1.0 - 2.0 * A, 1.0 - 2.0 * B);
                Self {
                    points: vec![
                        [A, A, a2],
                        [A, a2, A],
                        [a2, A, A],
                        [B, B, b2],
                        [B, b2, B],
                        [b2, B, B],
                    ],
                    weights: vec![WA, WA, WA, WB, WB, WB],
                    degree: 4,
                }
            }
        }
    }
}
