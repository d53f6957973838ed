//! Scalar searches and a box-constrained projected-gradient method.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Stops when the bracket is narrower than `xtol * (1 + |x|)`. On exact
/// ties the left point is kept, so the smallest minimizer is preferred.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= xtol * (1.0 + c.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Scans `f` on the given increasing abscissae, then refines with golden
/// section on the bracket around the best sample. Ties in the scan go to
/// the smallest abscissa. The refined point only replaces the scan winner
/// when it is strictly better.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    xs: &[f64],
    xtol: f64,
) -> (f64, f64) {
    assert!(!xs.is_empty());
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = f(x);
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    if xs.len() < 2 || !best_v.is_finite() {
        return (xs[best], best_v);
    }
    let lo = xs[best.saturating_sub(1)];
    let hi = xs[(best + 1).min(xs.len() - 1)];
    let (x, v) = golden_section(&mut f, lo, hi, xtol, 200);
    if v < best_v {
        (x, v)
    } else {
        (xs[best], best_v)
    }
}

/// `n` log-spaced points from `lo` to `hi` (both > 0), inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Box bounds for [`projected_gradient`]. `lower[i] == upper[i]` pins a
/// coordinate.
#[derive(Debug, Clone)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn project(&self, x: &mut [f64]) {
        for ((xi, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PgSettings {
    pub max_iters: usize,
    /// Stop when the relative decrease of an accepted step falls below this
    /// for `patience` consecutive iterations.
    pub rel_tol: f64,
    pub patience: usize,
    pub max_halvings: usize,
    pub armijo: f64,
    pub initial_step: f64,
}

impl Default for PgSettings {
    fn default() -> Self {
        PgSettings {
            max_iters: 5000,
            rel_tol: 1e-12,
            patience: 5,
            max_halvings: 60,
            armijo: 1e-4,
            initial_step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct PgOutcome {
    pub value: f64,
    pub iterations: usize,
    pub status: PgStatus,
}

/// Projected gradient descent with Barzilai-Borwein trial steps and
/// backtracking along the projection arc. Accepted iterates never increase
/// the objective.
///
/// `fg` writes the gradient into its second argument and returns the value.
pub fn projected_gradient<F>(
    mut fg: F,
    x: &mut [f64],
    bounds: &BoxBounds,
    settings: &PgSettings,
) -> PgOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    bounds.project(x);
    let mut g = vec![0.0; n];
    let mut f = fg(x, &mut g);
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut step = settings.initial_step;
    let mut quiet = 0;
    let mut status = PgStatus::MaxIterations;
    let mut iters = 0;
    for it in 0..settings.max_iters {
        iters = it + 1;
        let mut alpha = step;
        let mut accepted = None;
        let mut stationary = false;
        for _ in 0..=settings.max_halvings {
            let mut decrease = 0.0;
            let mut moved = false;
            for i in 0..n {
                let xi = (x[i] - alpha * g[i]).clamp(bounds.lower[i], bounds.upper[i]);
                trial[i] = xi;
                decrease += g[i] * (x[i] - xi);
                moved |= xi != x[i];
            }
            if !moved {
                stationary = true;
                break;
            }
            let ft = fg(&trial, &mut g_trial);
            if ft.is_finite() && ft <= f - settings.armijo * decrease {
                accepted = Some(ft);
                break;
            }
            alpha *= 0.5;
        }
        let Some(f_new) = accepted else {
            status = if stationary {
                PgStatus::Converged
            } else {
                PgStatus::LineSearchFailed
            };
            break;
        };
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..n {
            let s = trial[i] - x[i];
            let y = g_trial[i] - g[i];
            ss += s * s;
            sy += s * y;
        }
        step = if sy > 0.0 { (ss / sy).min(1e12) } else { alpha * 4.0 };
        let rel = (f - f_new) / f.abs().max(1e-300);
        x.copy_from_slice(&trial);
        std::mem::swap(&mut g, &mut g_trial);
        f = f_new;
        if rel < settings.rel_tol {
            quiet += 1;
            if quiet >= settings.patience {
                status = PgStatus::Converged;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    PgOutcome {
        value: f,
        iterations: iters,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, v) = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-10, 200);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(v < 1e-16);
    }

    #[test]
    fn golden_handles_kink_minimum() {
        let (x, _) = golden_section(|x| (x - 2.0).abs(), 0.0, 5.0, 1e-12, 300);
        assert!((x - 2.0).abs() < 1e-9);
    }

    #[test]
    fn scan_prefers_smallest_tie() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let (x, v) = scan_then_golden(|_| 1.0, &xs, 1e-9);
        assert_eq!(x, 0.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn logspace_endpoints() {
        let xs = logspace(1e-3, 10.0, 5);
        assert_eq!(xs.len(), 5);
        assert!((xs[0] - 1e-3).abs() < 1e-18);
        assert_eq!(xs[4], 10.0);
        assert!((xs[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn projected_gradient_box_quadratic() {
        // min sum (x_i - c_i)^2 on [0,1]^n
        let c = [-0.5, 0.25, 2.0, 0.75];
        let bounds = BoxBounds {
            lower: vec![0.0; 4],
            upper: vec![1.0; 4],
        };
        let mut x = vec![0.5; 4];
        let out = projected_gradient(
            |x, g| {
                let mut f = 0.0;
                for i in 0..4 {
                    g[i] = 2.0 * (x[i] - c[i]);
                    f += (x[i] - c[i]).powi(2);
                }
                f
            },
            &mut x,
            &bounds,
            &PgSettings::default(),
        );
        let expect = [0.0, 0.25, 1.0, 0.75];
        for i in 0..4 {
            assert!((x[i] - expect[i]).abs() < 1e-8, "{:?}", x);
        }
        assert!(out.value <= 0.25 + 1.0 + 1e-12);
    }

    #[test]
    fn projected_gradient_is_monotone_on_rosenbrock() {
        let bounds = BoxBounds {
            lower: vec![-2.0, -2.0],
            upper: vec![2.0, 2.0],
        };
        let mut x = vec![-1.2, 1.0];
        let mut history = Vec::new();
        let out = projected_gradient(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                history.push(f);
                f
            },
            &mut x,
            &bounds,
            &PgSettings {
                max_iters: 20000,
                ..Default::default()
            },
        );
        assert!(out.value < 1e-6, "{:?}", out);
    }
}
