#![allow(dead_code)]

/// Shortest path for `A = beta^2`, `B = (1 - beta)^2`. The Clairaut
/// integral `A gamma' / |path'| = p` turns the geodesic into a quadrature
/// that closes in elementary functions; `p` runs from 1 (`s = 0`) to 0
/// (`s = pi`, full damage).
pub fn cfi_geodesic(s: f64) -> f64 {
    let pi = std::f64::consts::PI;
    if s >= pi {
        return 1.0;
    }
    let ln = |p: f64| ((1.0 + (1.0 - p * p).sqrt()) / p).ln();
    let span = |p: f64| 2.0 * p.acos() - 2.0 * p * ln(p);
    let (mut lo, mut hi) = (1e-300_f64, 1.0_f64);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if span(mid) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    (1.0 - p * p).sqrt() - p * p * ln(p)
}
