mod common;

use common::{cross3, dot3};
use llbar::model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn samples() -> Vec<([f64; 3], [f64; 3])> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut v = || [0; 3].map(|_| rng.gen_range(-3.0..3.0));
    (0..1000).map(|_| (v(), v())).collect()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn close(lhs: f64, rhs: f64, scale: f64) -> bool {
    (lhs - rhs).abs() <= 1e-12 * scale.max(1.0)
}

#[test]
fn polarisation_identity() {
    for (a, b) in samples() {
        let d = sub(a, b);
        let lhs = 2.0 * dot3(a, d);
        let rhs = dot3(a, a) - dot3(b, b) + dot3(d, d);
        assert!(close(lhs, rhs, dot3(a, a) + dot3(b, b)));
    }
}

#[test]
fn quartic_identity() {
    for (a, b) in samples() {
        let d = sub(a, b);
        let (a2, b2, d2) = (dot3(a, a), dot3(b, b), dot3(d, d));
        let lhs = 4.0 * a2 * dot3(a, d);
        let rhs = a2 * a2 - b2 * b2 + (a2 - b2) * (a2 - b2) + 2.0 * a2 * d2;
        assert!(close(lhs, rhs, (a2 + b2) * (a2 + b2)));
    }
}

#[test]
fn cubic_difference_identity() {
    for (a, b) in samples() {
        let d = sub(a, b);
        let (a2, b2) = (dot3(a, a), dot3(b, b));
        let diff = [0, 1, 2].map(|c| a2 * a[c] - b2 * b[c]);
        let lhs = 2.0 * dot3(diff, d);
        let rhs = (a2 - b2) * (a2 - b2) + (a2 + b2) * dot3(d, d);
        assert!(close(lhs, rhs, (a2 + b2) * (a2 + b2)));
        // Monotonicity follows.
        assert!(lhs >= -1e-12 * (a2 + b2) * (a2 + b2));
    }
}

#[test]
fn averaged_cubic_telescopes() {
    // ψ(a, b)·(b − a) = (|b|⁴ − |a|⁴)/4, the property behind the exact
    // Crank–Nicolson energy identity.
    for (a, b) in samples() {
        let p = model::psi(a, b);
        let (a2, b2) = (dot3(a, a), dot3(b, b));
        assert!(close(dot3(p, sub(b, a)), 0.25 * (b2 * b2 - a2 * a2), (a2 + b2) * (a2 + b2)));
    }
}

#[test]
fn cross_product_identities() {
    for (a, b) in samples() {
        let c = model::cross3(a, b);
        assert_eq!(c, cross3(a, b));
        let scale = dot3(a, a) * dot3(b, b);
        assert!(close(dot3(c, b), 0.0, scale.sqrt() * 3.0));
        assert!(close(dot3(c, a), 0.0, scale.sqrt() * 3.0));
        let s = model::skew(a);
        let sb = [0, 1, 2].map(|i| dot3(s[i], b));
        assert!((0..3).all(|i| (sb[i] - c[i]).abs() <= 1e-12 * scale.sqrt().max(1.0)));
    }
}
