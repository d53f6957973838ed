//! Effective bulk density `h_sigma` and its convex envelope.
//!
//! `h_sigma(t) = inf_{tau > 0} { phi(1/tau) t^2 + sigma^2 tau / 4 }` is found
//! pointwise by a log-spaced scan in `tau` followed by golden-section
//! refinement. The envelope is the lower convex hull of a graded sample of
//! `h_sigma`, stored as piecewise polynomials: quadratics where the hull
//! touches the samples, straight bridges elsewhere, and a final ray whose
//! slope is the recession slope `sqrt(phi'(0+)) * sigma`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::fmt_num;
use crate::minimize::{logspace, scan_then_golden};
use crate::model::{ModelSpec, SigmaKind};
use crate::scalar::ScalarFnSpec;

pub const DEFAULT_TAU_SCAN: usize = 128;

/// Minimum of the inner problem and the (smallest) minimizing `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerMinimum {
    pub value: f64,
    pub tau: f64,
}

pub fn h_sigma_pointwise(model: &ModelSpec, sigma: SigmaKind, t: f64) -> Result<f64> {
    let phi_inf = model.require_phi_inf()?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain(format!("h_sigma needs t >= 0, got {t}")));
    }
    Ok(h_sigma_inner(&model.phi, phi_inf, sigma, t, DEFAULT_TAU_SCAN).value)
}

pub fn h_sigma_inner(
    phi: &ScalarFnSpec,
    phi_inf: f64,
    sigma: SigmaKind,
    t: f64,
    scan: usize,
) -> InnerMinimum {
    let s = match sigma {
        SigmaKind::Zero => return InnerMinimum { value: 0.0, tau: f64::INFINITY },
        SigmaKind::Infinite => return InnerMinimum { value: phi_inf * t * t, tau: 0.0 },
        SigmaKind::Finite(s) => s,
    };
    if t == 0.0 {
        return InnerMinimum { value: 0.0, tau: 0.0 };
    }
    let t2 = t * t;
    let quarter_s2 = 0.25 * s * s;
    let objective = |tau: f64| {
        if tau <= 0.0 {
            phi_inf * t2
        } else {
            phi.eval(1.0 / tau) * t2 + quarter_s2 * tau
        }
    };
    let upper = phi_inf * t2 / quarter_s2 + t;
    let mut taus = Vec::with_capacity(scan + 1);
    taus.push(0.0);
    taus.extend(logspace(upper * 1e-12, upper, scan.max(2)));
    let (tau, value) = scan_then_golden(objective, &taus, 1e-13);
    InnerMinimum { value, tau }
}

pub fn recession_slope(model: &ModelSpec, sigma: f64) -> Result<f64> {
    Ok(model.require_phi_prime0()?.sqrt() * sigma)
}

/// `c0 + c1 (t - t0) + c2 (t - t0)^2` on `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullSegment {
    pub t0: f64,
    pub t1: f64,
    pub c: [f64; 3],
}

impl HullSegment {
    fn linear(t0: f64, t1: f64, y0: f64, slope: f64) -> Self {
        HullSegment { t0, t1, c: [y0, slope, 0.0] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let x = t - self.t0;
        self.c[0] + x * (self.c[1] + x * self.c[2])
    }

    pub fn slope_at(&self, t: f64) -> f64 {
        self.c[1] + 2.0 * self.c[2] * (t - self.t0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTable {
    pub sigma: SigmaKind,
    pub phi_inf: f64,
    pub grid: Vec<f64>,
    pub raw: Vec<f64>,
    pub hull: Vec<f64>,
    /// `sqrt(phi'(0+)) * sigma`; zero for `sigma = 0`, infinite for
    /// `sigma = inf`.
    pub recession_slope: f64,
    pub segments: Vec<HullSegment>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct EnvelopeSettings {
    pub tau_scan: usize,
}

impl Default for EnvelopeSettings {
    fn default() -> Self {
        EnvelopeSettings { tau_scan: DEFAULT_TAU_SCAN }
    }
}

pub fn build_envelope(model: &ModelSpec, sigma: SigmaKind, t_max: f64, n: usize) -> Result<EnvelopeTable> {
    build_envelope_with(model, sigma, t_max, n, &EnvelopeSettings::default())
}

pub fn build_envelope_with(
    model: &ModelSpec,
    sigma: SigmaKind,
    t_max: f64,
    n: usize,
    settings: &EnvelopeSettings,
) -> Result<EnvelopeTable> {
    if n < 128 {
        return Err(Error::Precondition(format!("envelope needs n >= 128, got {n}")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Precondition(format!("t_max must be positive, got {t_max}")));
    }
    let phi_inf = model.require_phi_inf()?;
    let grid: Vec<f64> = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            t_max * s * s
        })
        .collect();
    let raw: Vec<f64> = grid
        .par_iter()
        .map(|&t| h_sigma_inner(&model.phi, phi_inf, sigma, t, settings.tau_scan).value)
        .collect();

    let (segments, slope, warnings) = match sigma {
        SigmaKind::Zero => (Vec::new(), 0.0, Vec::new()),
        SigmaKind::Infinite => (Vec::new(), f64::INFINITY, Vec::new()),
        SigmaKind::Finite(s) => {
            let m = recession_slope(model, s)?;
            let (segments, warnings) = lower_hull_segments(&grid, &raw, m);
            (segments, m, warnings)
        }
    };
    let mut table = EnvelopeTable {
        sigma,
        phi_inf,
        grid,
        raw,
        hull: Vec::new(),
        recession_slope: slope,
        segments,
        warnings,
    };
    table.hull = table
        .grid
        .iter()
        .zip(&table.raw)
        .map(|(&t, &r)| eval_envelope(&table, t).min(r))
        .collect();
    Ok(table)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn lower_hull_segments(ts: &[f64], ys: &[f64], m: f64) -> (Vec<HullSegment>, Vec<String>) {
    let mut hull: Vec<usize> = Vec::with_capacity(ts.len());
    for i in 0..ts.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if cross((ts[a], ys[a]), (ts[b], ys[b]), (ts[i], ys[i])) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }

    let mut segments = Vec::with_capacity(hull.len());
    for (k, w) in hull.windows(2).enumerate() {
        let (i, j) = (w[0], w[1]);
        let chord = (ys[j] - ys[i]) / (ts[j] - ts[i]);
        let mut seg = HullSegment::linear(ts[i], ts[j], ys[i], chord);
        if j == i + 1 {
            // contact interval: quadratic through a neighbouring contact node
            let third = if k > 0 && hull[k - 1] + 1 == i {
                Some(i - 1)
            } else if k + 2 < hull.len() && hull[k + 2] == j + 1 {
                Some(j + 1)
            } else {
                None
            };
            if let Some(l) = third {
                if let Some(q) = quadratic_through(ts[i], [(ts[i], ys[i]), (ts[j], ys[j]), (ts[l], ys[l])]) {
                    if q[2] >= 0.0 {
                        seg.c = q;
                    }
                }
            }
        }
        segments.push(seg);
    }

    // the epigraph also contains every ray of slope m: truncate where the
    // hull first becomes steeper than the recession slope
    let mut warnings = Vec::new();
    let t_end = *ts.last().unwrap();
    let tol = m * 1e-12;
    let mut cut = None;
    for (k, seg) in segments.iter().enumerate() {
        let d0 = seg.slope_at(seg.t0);
        let d1 = seg.slope_at(seg.t1);
        if d1 > m + tol {
            let t_star = if d0 >= m || seg.c[2] <= 0.0 {
                seg.t0
            } else {
                (seg.t0 + (m - seg.c[1]) / (2.0 * seg.c[2])).clamp(seg.t0, seg.t1)
            };
            cut = Some((k, t_star));
            break;
        }
    }
    if let Some((k, mut t_star)) = cut {
        // a contact quadratic through a node past a kink misplaces the
        // tangent point; refit from contact nodes on the left only
        let i = hull[k];
        if k >= 2 && hull[k + 1] == i + 1 && hull[k - 1] + 1 == i && hull[k - 2] + 2 == i {
            let pts = [(ts[i], ys[i]), (ts[i - 1], ys[i - 1]), (ts[i - 2], ys[i - 2])];
            if let Some(q) = quadratic_through(ts[i], pts) {
                let seg = &mut segments[k];
                if q[2] > 0.0 && q[1] < m {
                    let t_q = seg.t0 + (m - q[1]) / (2.0 * q[2]);
                    if t_q <= seg.t1 {
                        seg.c = q;
                        t_star = t_q;
                    }
                }
            }
        }
        let y_star = segments[k].eval(t_star);
        segments.truncate(k + 1);
        if t_star > segments[k].t0 {
            segments[k].t1 = t_star;
        } else {
            segments.pop();
        }
        if t_star < t_end {
            segments.push(HullSegment::linear(t_star, t_end, y_star, m));
        }
    } else if let Some(last) = segments.last() {
        let final_slope = last.slope_at(last.t1);
        if (final_slope - m).abs() > 0.01 * m {
            warnings.push(format!(
                "t_max = {t_end} does not resolve the linear regime: final slope {final_slope} vs recession slope {m}"
            ));
        }
    }
    (segments, warnings)
}

/// Coefficients around `t0` of the parabola through three points.
fn quadratic_through(t0: f64, p: [(f64, f64); 3]) -> Option<[f64; 3]> {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let c2 = (d12 - d01) / (x2 - x0);
    if !c2.is_finite() {
        return None;
    }
    // Newton form y0 + d01 (t - x0) + c2 (t - x0)(t - x1), re-centred at t0
    let c1 = d01 + c2 * ((t0 - x0) + (t0 - x1));
    let c0 = y0 + d01 * (t0 - x0) + c2 * (t0 - x0) * (t0 - x1);
    Some([c0, c1, c2])
}

/// Convex envelope at `t >= 0`; linear continuation past the last sample.
pub fn eval_envelope(table: &EnvelopeTable, t: f64) -> f64 {
    match table.sigma {
        SigmaKind::Zero => 0.0,
        SigmaKind::Infinite => table.phi_inf * t * t,
        SigmaKind::Finite(_) => {
            let segs = &table.segments;
            let Some(last) = segs.last() else {
                return 0.0;
            };
            if t <= 0.0 {
                return segs[0].eval(segs[0].t0.min(0.0).max(0.0));
            }
            if t >= last.t1 {
                return last.eval(last.t1) + last.slope_at(last.t1) * (t - last.t1);
            }
            let k = segs.partition_point(|s| s.t1 < t);
            segs[k.min(segs.len() - 1)].eval(t)
        }
    }
}

impl EnvelopeTable {
    pub fn eval(&self, t: f64) -> f64 {
        eval_envelope(self, t)
    }

    pub fn t_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// `max_t (m t - hull(t))` over the grid, the offset in the linear
    /// minorant of the envelope.
    pub fn recession_offset(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.hull)
            .map(|(&t, &h)| self.recession_slope * t - h)
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,raw,hull")?;
        for ((t, r), h) in self.grid.iter().zip(&self.raw).zip(&self.hull) {
            writeln!(w, "{},{},{}", fmt_num(*t), fmt_num(*r), fmt_num(*h))?;
        }
        Ok(())
    }
}
