//! Surface energy density `g(s)` of a jump of amplitude `s`.
//!
//! `g(s)` is the length of the shortest path from `(0, 1)` to `(s, 1)` in the
//! `(gamma, beta)` half-strip for the degenerate metric
//! `A(beta) dgamma^2 + B(beta) dbeta^2`, with
//! `A = phi'(0+) fhat(beta) d(1 - beta) / Q(1 - beta)` and `B = d(1 - beta)`.
//! Paths are polylines; the length of an element uses the metric at its
//! midpoint. The optimizer works at unit `phi'(0+)` and rescales `s`, since
//! `g(s) = g_1(sqrt(phi'(0+)) s)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::fmt_num;
use crate::minimize::{
    golden_section, logspace, projected_gradient, scan_then_golden, BoxBounds, PgSettings,
    PgStatus,
};
use crate::model::{ModelSpec, SigmaKind};

/// Smallest `1 - beta` at which `f^2(beta)` is evaluated.
pub const BETA_CLAMP: f64 = 1e-12;

/// A discrete `(gamma, beta)` profile on `[0, t_len]` with uniform nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePair {
    pub t_len: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ProfilePair {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.len() != beta.len() || gamma.len() < 2 {
            return Err(Error::Precondition(format!(
                "profile needs matching node arrays of length >= 2, got {} and {}",
                gamma.len(),
                beta.len()
            )));
        }
        if beta.iter().any(|b| !(0.0..=1.0).contains(b)) || gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::Precondition("profile beta must lie in [0, 1]".into()));
        }
        Ok(ProfilePair {
            t_len: 1.0,
            gamma,
            beta,
        })
    }

    /// Elements, one less than nodes.
    pub fn elements(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn jump(&self) -> f64 {
        *self.gamma.last().unwrap()
    }

    /// Membership in the admissible set for amplitude `s` with boundary
    /// relaxation `eta` (`eta = 0` for the unrelaxed problem).
    pub fn is_admissible(&self, s: f64, eta: f64) -> bool {
        let n = self.elements();
        self.gamma[0] == 0.0
            && self.gamma[n] == s
            && self.beta[0] >= 1.0 - eta
            && self.beta[n] >= 1.0 - eta
            && self.beta.iter().all(|b| (0.0..=1.0).contains(b))
    }

    /// `gamma = 0` while `beta` ramps down to `1 - delta` on the first third,
    /// `gamma` ramps to `s` on the middle third, `beta` recovers on the last.
    pub fn plateau(elements: usize, s: f64, delta: f64) -> Self {
        let n = elements.max(3);
        let n1 = n / 3;
        let n2 = n / 3;
        let n3 = n - n1 - n2;
        let mut gamma = Vec::with_capacity(n + 1);
        let mut beta = Vec::with_capacity(n + 1);
        for i in 0..=n {
            if i <= n1 {
                gamma.push(0.0);
                beta.push(1.0 - delta * i as f64 / n1 as f64);
            } else if i <= n1 + n2 {
                gamma.push(s * (i - n1) as f64 / n2 as f64);
                beta.push(1.0 - delta);
            } else {
                gamma.push(s);
                beta.push(1.0 - delta * (n - i) as f64 / n3 as f64);
            }
        }
        gamma[n] = s;
        beta[0] = 1.0;
        beta[n] = 1.0;
        ProfilePair {
            t_len: 1.0,
            gamma,
            beta,
        }
    }

    /// Linear `gamma` with `beta = 1 - delta` at interior nodes.
    pub fn linear(elements: usize, s: f64, delta: f64) -> Self {
        let n = elements.max(1);
        let gamma: Vec<f64> = (0..=n).map(|i| s * i as f64 / n as f64).collect();
        let mut beta = vec![1.0 - delta; n + 1];
        beta[0] = 1.0;
        beta[n] = 1.0;
        let mut p = ProfilePair {
            t_len: 1.0,
            gamma,
            beta,
        };
        p.gamma[n] = s;
        p
    }

    fn scaled_gamma(&self, factor: f64, s: f64) -> Self {
        let mut p = self.clone();
        for g in &mut p.gamma {
            *g = (*g * factor).clamp(0.0, s);
        }
        let n = p.elements();
        p.gamma[0] = 0.0;
        p.gamma[n] = s;
        p
    }
}

/// Metric coefficients at unit `phi'(0+)`.
#[derive(Clone, Copy)]
pub(crate) struct Metric<'a> {
    model: &'a ModelSpec,
}

impl<'a> Metric<'a> {
    pub(crate) fn new(model: &'a ModelSpec) -> Self {
        Metric { model }
    }

    /// `fhat(beta) d(1 - beta) / Q(1 - beta)` and its derivative in `beta`,
    /// continuously extended through the clamp at `beta -> 1`.
    pub(crate) fn a(&self, beta: f64) -> (f64, f64) {
        let (fh, dfh) = self.model.fhat.eval_with_slope(beta);
        let raw_u = 1.0 - beta;
        let u = raw_u.max(BETA_CLAMP);
        let (d, dd) = self.model.dpot.eval_with_slope(u);
        let (q, dq) = self.model.q.eval_with_slope(u);
        if q <= 0.0 {
            return (if d * fh > 0.0 { f64::INFINITY } else { 0.0 }, 0.0);
        }
        let r = d / q;
        let dr_du = (dd * q - d * dq) / (q * q);
        let du = if raw_u > BETA_CLAMP { -1.0 } else { 0.0 };
        (fh * r, dfh * r + fh * dr_du * du)
    }

    /// `d(1 - beta)` and its derivative in `beta`.
    pub(crate) fn b(&self, beta: f64) -> (f64, f64) {
        let (d, dd) = self.model.dpot.eval_with_slope((1.0 - beta).max(0.0));
        (d.max(0.0), -dd)
    }

    /// `f^2(beta) = fhat(beta) / Q(1 - beta)` with the same clamp, and its
    /// derivative.
    pub(crate) fn f2(&self, beta: f64) -> (f64, f64) {
        let (fh, dfh) = self.model.fhat.eval_with_slope(beta);
        let raw_u = 1.0 - beta;
        let u = raw_u.max(BETA_CLAMP);
        let (q, dq) = self.model.q.eval_with_slope(u);
        if q <= 0.0 {
            return (f64::INFINITY, 0.0);
        }
        let du = if raw_u > BETA_CLAMP { -1.0 } else { 0.0 };
        (fh / q, dfh / q - fh * dq * du / (q * q))
    }
}

fn path_energy(metric: &Metric, a_scale: f64, gamma: &[f64], beta: &[f64]) -> f64 {
    let mut total = 0.0;
    for e in 0..gamma.len() - 1 {
        let dg = gamma[e + 1] - gamma[e];
        let db = beta[e + 1] - beta[e];
        let bm = 0.5 * (beta[e] + beta[e + 1]);
        let a = if dg == 0.0 { 0.0 } else { a_scale * metric.a(bm).0 };
        let b = if db == 0.0 { 0.0 } else { metric.b(bm).0 };
        total += (a * dg * dg + b * db * db).sqrt();
    }
    total
}

fn path_energy_grad(metric: &Metric, gamma: &[f64], beta: &[f64], gg: &mut [f64], gb: &mut [f64]) -> f64 {
    gg.iter_mut().for_each(|v| *v = 0.0);
    gb.iter_mut().for_each(|v| *v = 0.0);
    let mut total = 0.0;
    for e in 0..gamma.len() - 1 {
        let dg = gamma[e + 1] - gamma[e];
        let db = beta[e + 1] - beta[e];
        let bm = 0.5 * (beta[e] + beta[e + 1]);
        let (a, da) = metric.a(bm);
        let (b, dbb) = metric.b(bm);
        let q = a * dg * dg + b * db * db;
        if !(q > 0.0) {
            continue;
        }
        let len = q.sqrt();
        if !len.is_finite() {
            return f64::INFINITY;
        }
        total += len;
        let cg = a * dg / len;
        gg[e + 1] += cg;
        gg[e] -= cg;
        let cb = b * db / len;
        gb[e + 1] += cb;
        gb[e] -= cb;
        let cm = 0.25 * (da * dg * dg + dbb * db * db) / len;
        gb[e] += cm;
        gb[e + 1] += cm;
    }
    total
}

/// Midpoint-rule value of `int_0^1 sqrt(d(1-beta) (phi'(0+) f^2(beta)
/// |gamma'|^2 + |beta'|^2)) dx`.
pub fn profile_energy(model: &ModelSpec, p: &ProfilePair) -> Result<f64> {
    let phi1 = model.require_phi_prime0()?;
    Ok(path_energy(&Metric::new(model), phi1, &p.gamma, &p.beta))
}

/// Optimizer knobs for `g` and `g_eta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Element counts of the coarse-to-fine ladder; the last is the output
    /// resolution.
    pub levels: Vec<usize>,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Extra redistribute-and-descend passes on the finest level.
    pub polish_passes: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            levels: vec![25, 50, 100, 200, 400],
            max_iters: 4000,
            rel_tol: 1e-11,
            polish_passes: 1,
        }
    }
}

impl OptimizerSettings {
    fn pg(&self) -> PgSettings {
        PgSettings {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            patience: 8,
            ..Default::default()
        }
    }

    fn finest(&self) -> usize {
        *self.levels.last().unwrap_or(&400)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Plateau,
    Linear,
    Warm,
    Lifted,
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub iterations: usize,
    pub winner: StartKind,
    pub winner_index: usize,
    pub starts: usize,
    /// Some descent stopped at its iteration cap.
    pub hit_max_iterations: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub s: f64,
    pub eta: f64,
    pub value: f64,
    /// Minimizing profile in the original (not rescaled) variables.
    pub profile: ProfilePair,
    pub diagnostics: OptimizerDiagnostics,
}

struct Descent {
    value: f64,
    profile: ProfilePair,
    iterations: usize,
    capped: bool,
}

/// Projected-gradient descent at fixed node count. `s` is the normalized
/// amplitude; the two end values of `beta` live in `[1 - eta, 1]`.
fn descend(metric: &Metric, mut p: ProfilePair, s: f64, eta: f64, pg: &PgSettings) -> Descent {
    let n = p.elements();
    let m = n + 1;
    let mut lower = vec![0.0; 2 * m];
    let mut upper = vec![s; m];
    upper.extend(std::iter::repeat(1.0).take(m));
    lower[m - 1] = s;
    upper[0] = 0.0;
    lower[m] = 1.0 - eta;
    lower[2 * m - 1] = 1.0 - eta;
    let bounds = BoxBounds { lower, upper };
    let mut x: Vec<f64> = p.gamma.iter().chain(&p.beta).copied().collect();
    let out = projected_gradient(
        |x, g| {
            let (xg, xb) = x.split_at(m);
            let (gg, gb) = g.split_at_mut(m);
            path_energy_grad(metric, xg, xb, gg, gb)
        },
        &mut x,
        &bounds,
        pg,
    );
    p.gamma.copy_from_slice(&x[..m]);
    p.beta.copy_from_slice(&x[m..]);
    let value = path_energy(metric, 1.0, &p.gamma, &p.beta);
    Descent {
        value,
        profile: p,
        iterations: out.iterations,
        capped: out.status == PgStatus::MaxIterations,
    }
}

/// Resamples a path to `elements` elements, equidistributing metric length
/// (plus a small Euclidean share so zero-cost stretches keep some nodes).
fn redistribute(metric: &Metric, p: &ProfilePair, elements: usize) -> ProfilePair {
    let n = p.elements();
    let s = p.jump();
    let gscale = if s > 0.0 { 1.0 / s } else { 1.0 };
    let mut metric_len = Vec::with_capacity(n);
    let mut euclid = Vec::with_capacity(n);
    for e in 0..n {
        let dg = p.gamma[e + 1] - p.gamma[e];
        let db = p.beta[e + 1] - p.beta[e];
        let bm = 0.5 * (p.beta[e] + p.beta[e + 1]);
        let (a, b) = (metric.a(bm).0, metric.b(bm).0);
        let l = (a * dg * dg + b * db * db).sqrt();
        metric_len.push(if l.is_finite() { l } else { 0.0 });
        euclid.push(((dg * gscale).powi(2) + db * db).sqrt());
    }
    let total_m: f64 = metric_len.iter().sum();
    let total_e: f64 = euclid.iter().sum();
    if !(total_e > 0.0) {
        let mut q = ProfilePair::linear(elements, s, 0.0);
        q.beta.iter_mut().for_each(|b| *b = p.beta[0]);
        return q;
    }
    let weights: Vec<f64> = (0..n)
        .map(|e| {
            let wm = if total_m > 0.0 { metric_len[e] / total_m } else { 0.0 };
            wm + 0.1 * euclid[e] / total_e
        })
        .collect();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for w in &weights {
        cum.push(cum.last().unwrap() + w);
    }
    let total = cum[n];
    let mut gamma = Vec::with_capacity(elements + 1);
    let mut beta = Vec::with_capacity(elements + 1);
    let mut e = 0;
    for k in 0..=elements {
        let target = total * k as f64 / elements as f64;
        while e + 1 < n && cum[e + 1] < target {
            e += 1;
        }
        let w = cum[e + 1] - cum[e];
        let t = if w > 0.0 { ((target - cum[e]) / w).clamp(0.0, 1.0) } else { 0.0 };
        gamma.push(p.gamma[e] + t * (p.gamma[e + 1] - p.gamma[e]));
        beta.push((p.beta[e] + t * (p.beta[e + 1] - p.beta[e])).clamp(0.0, 1.0));
    }
    gamma[0] = p.gamma[0];
    beta[0] = p.beta[0];
    gamma[elements] = p.gamma[n];
    beta[elements] = p.beta[n];
    ProfilePair {
        t_len: 1.0,
        gamma,
        beta,
    }
}

/// Coarse-to-fine descent from `start` over `levels[from..to]`, then the
/// polish passes if `to` is the end of the ladder. Keeps the best iterate
/// seen, since resampling may raise the energy slightly.
fn ladder(
    metric: &Metric,
    start: ProfilePair,
    s: f64,
    eta: f64,
    cfg: &OptimizerSettings,
    from: usize,
    to: usize,
) -> Descent {
    let pg = cfg.pg();
    let mut iterations = 0;
    let mut capped = false;
    let mut best = Descent {
        value: path_energy(metric, 1.0, &start.gamma, &start.beta),
        profile: start.clone(),
        iterations: 0,
        capped: false,
    };
    let mut p = start;
    for &n in &cfg.levels[from..to] {
        if p.elements() != n {
            p = redistribute(metric, &p, n);
        }
        let d = descend(metric, p, s, eta, &pg);
        iterations += d.iterations;
        capped |= d.capped;
        p = d.profile.clone();
        if d.value < best.value {
            best = d;
        }
    }
    if to == cfg.levels.len() {
        for _ in 0..cfg.polish_passes {
            let q = redistribute(metric, &p, cfg.finest());
            let d = descend(metric, q, s, eta, &pg);
            iterations += d.iterations;
            capped |= d.capped;
            p = d.profile.clone();
            if d.value < best.value {
                best = d;
            }
        }
    }
    best.iterations = iterations;
    best.capped = capped;
    best
}

fn rescale_profile(p: &ProfilePair, factor: f64, s: f64) -> ProfilePair {
    let mut q = p.clone();
    for g in &mut q.gamma {
        *g *= factor;
    }
    let n = q.elements();
    q.gamma[n] = s;
    q
}

/// `(argmin x, g_hat)` at unit `phi'(0+)` and normalized amplitude.
fn g_hat_normalized(model: &ModelSpec, metric: &Metric, s1: f64) -> (f64, f64) {
    if s1 <= 0.0 {
        return (0.0, 0.0);
    }
    let objective = |x: f64| {
        if x <= 0.0 {
            return limit_slope(model) * s1;
        }
        2.0 * model.psi_drop(x) + metric.a(1.0 - x).0.max(0.0).sqrt() * s1
    };
    let mut xs = vec![0.0];
    xs.extend(logspace(1e-9, 1.0, 1024));
    let (x, v) = scan_then_golden(objective, &xs, 1e-10);
    (x, v.min(model.toughness()))
}

/// `x -> 0` limit of `sqrt(fhat(1 - x) d(x) / Q(x))`.
fn limit_slope(model: &ModelSpec) -> f64 {
    match model.sigma_bar().map(|s| s.kind) {
        Ok(SigmaKind::Finite(sb)) => sb * model.fhat.eval(1.0).sqrt(),
        Ok(SigmaKind::Zero) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Explicit upper bound `min_x 2 (Psi(1) - Psi(1 - x)) + sqrt(phi'(0+)
/// fhat(1 - x) d(x) / Q(x)) s`.
pub fn g_hat(model: &ModelSpec, s: f64) -> Result<f64> {
    Ok(g_hat_argmin(model, s)?.1)
}

/// Minimizing depth `x` and the value of [`g_hat`].
pub fn g_hat_argmin(model: &ModelSpec, s: f64) -> Result<(f64, f64)> {
    if s < 0.0 {
        return Err(Error::Domain(format!("jump amplitude must be >= 0, got {s}")));
    }
    let phi1 = model.require_phi_prime0()?;
    Ok(g_hat_normalized(model, &Metric::new(model), phi1.sqrt() * s))
}

/// `max_{t in [0, eta]} d^(1/2)(t)` on 512 samples.
pub fn lambda0(model: &ModelSpec, eta: f64) -> f64 {
    (0..512)
        .map(|i| model.dpot.eval(eta * i as f64 / 511.0).max(0.0).sqrt())
        .fold(0.0, f64::max)
}

fn check_preconditions(model: &ModelSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("jump amplitude must be finite and >= 0, got {s}")));
    }
    if let SigmaKind::Zero = model.sigma_bar()?.kind {
        return Err(Error::Precondition("g is identically zero when sigma_bar = 0".into()));
    }
    model.require_phi_prime0()
}

fn zero_estimate(s: f64, eta: f64, cfg: &OptimizerSettings) -> GEstimate {
    GEstimate {
        s,
        eta,
        value: 0.0,
        profile: ProfilePair::linear(cfg.finest(), 0.0, 0.0),
        diagnostics: OptimizerDiagnostics {
            iterations: 0,
            winner: StartKind::Linear,
            winner_index: 0,
            starts: 0,
            hit_max_iterations: false,
        },
    }
}

/// Best of several multistarts at normalized amplitude `s1`.
fn run_starts(
    model: &ModelSpec,
    s1: f64,
    eta: f64,
    cfg: &OptimizerSettings,
    extra: Vec<(StartKind, ProfilePair)>,
) -> (Descent, StartKind, usize, usize) {
    let metric = Metric::new(model);
    let (xstar, _) = g_hat_normalized(model, &metric, s1);
    let coarse = cfg.levels[0];
    let deltas = [xstar, 0.25 * xstar, (4.0 * xstar).min(1.0), 1.0];
    let mut starts: Vec<(StartKind, ProfilePair, usize)> = deltas
        .iter()
        .map(|&d| (StartKind::Plateau, ProfilePair::plateau(coarse, s1, d), 0))
        .collect();
    starts.push((StartKind::Linear, ProfilePair::linear(coarse, s1, xstar), 0));
    starts.push((StartKind::Linear, ProfilePair::linear(coarse, s1, 0.0), 0));
    let last_level = cfg.levels.len() - 1;
    for (kind, p) in extra {
        starts.push((kind, p, last_level));
    }
    // every built-in start gets the coarse part of the ladder; only the
    // best one is carried to full resolution
    let split = cfg.levels.len().min(2);
    let mut best: Option<(Descent, StartKind, usize)> = None;
    let mut iterations = 0;
    let mut capped = false;
    let count = starts.len();
    let mut consider = |d: Descent, kind: StartKind, idx: usize, best: &mut Option<(Descent, StartKind, usize)>| {
        iterations += d.iterations;
        capped |= d.capped;
        let better = match best {
            None => true,
            Some((b, _, _)) => d.value < b.value - 1e-12,
        };
        if better {
            *best = Some((d, kind, idx));
        }
    };
    let mut coarse_best: Option<(Descent, StartKind, usize)> = None;
    let mut warm_starts = Vec::new();
    for (idx, (kind, p, level)) in starts.into_iter().enumerate() {
        if level == 0 {
            let d = ladder(&metric, p, s1, eta, cfg, 0, split);
            consider(d, kind, idx, &mut coarse_best);
        } else {
            warm_starts.push((idx, kind, p, level));
        }
    }
    if let Some((d, kind, idx)) = coarse_best {
        let d = ladder(&metric, d.profile, s1, eta, cfg, split, cfg.levels.len());
        consider(d, kind, idx, &mut best);
    }
    for (idx, kind, p, level) in warm_starts {
        let d = ladder(&metric, p, s1, eta, cfg, level, cfg.levels.len());
        consider(d, kind, idx, &mut best);
    }
    let (mut d, kind, idx) = best.unwrap();
    d.iterations = iterations;
    d.capped = capped;
    (d, kind, idx, count)
}

fn finish(model: &ModelSpec, s: f64, eta: f64, d: Descent, kind: StartKind, idx: usize, starts: usize) -> GEstimate {
    let root = model.phi_prime0().map(|l| l.value.sqrt()).unwrap_or(1.0);
    let profile = rescale_profile(&d.profile, 1.0 / root, s);
    GEstimate {
        s,
        eta,
        value: d.value,
        profile,
        diagnostics: OptimizerDiagnostics {
            iterations: d.iterations,
            winner: kind,
            winner_index: idx,
            starts,
            hit_max_iterations: d.capped,
        },
    }
}

/// Upper approximation of `g(s)` with the winning profile. `warm` is a
/// profile for a neighbouring amplitude, rescaled to `s` before use.
pub fn g_estimate(model: &ModelSpec, s: f64, cfg: &OptimizerSettings, warm: Option<&ProfilePair>) -> Result<GEstimate> {
    let phi1 = check_preconditions(model, s)?;
    if s == 0.0 {
        return Ok(zero_estimate(s, 0.0, cfg));
    }
    let root = phi1.sqrt();
    let s1 = root * s;
    let mut extra = Vec::new();
    if let Some(w) = warm {
        if w.jump() > 0.0 {
            let normalized = rescale_profile(w, root, root * w.jump()).scaled_gamma(s / w.jump(), s1);
            let mut p = normalized;
            p.beta[0] = 1.0;
            let n = p.elements();
            p.beta[n] = 1.0;
            extra.push((StartKind::Warm, p));
        }
    }
    let (d, kind, idx, count) = run_starts(model, s1, 0.0, cfg, extra);
    Ok(finish(model, s, 0.0, d, kind, idx, count))
}

pub fn g_value(model: &ModelSpec, s: f64, cfg: &OptimizerSettings) -> Result<f64> {
    Ok(g_estimate(model, s, cfg, None)?.value)
}

/// Consistent pair `(g, g_eta)`: `g_eta` is started from the `g` winner and
/// `g` is re-descended from the lifted `g_eta` winner, so that
/// `g_eta <= g <= g_eta + 2 lambda0(eta) eta` holds for the returned values.
pub fn g_pair(
    model: &ModelSpec,
    s: f64,
    eta: f64,
    cfg: &OptimizerSettings,
    warm: Option<&ProfilePair>,
) -> Result<(GEstimate, GEstimate)> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta must lie in [0, 1], got {eta}")));
    }
    let g = g_estimate(model, s, cfg, warm)?;
    if s == 0.0 {
        return Ok((g.clone(), GEstimate { eta, ..g }));
    }
    let root = model.require_phi_prime0()?.sqrt();
    let s1 = root * s;
    let metric = Metric::new(model);
    let pg = cfg.pg();

    let start = rescale_profile(&g.profile, root, s1);
    let relaxed = descend(&metric, start, s1, eta, &pg);
    let mut ge = finish(model, s, eta, relaxed, StartKind::Warm, 0, 1);
    ge.diagnostics.iterations += g.diagnostics.iterations;

    // lift the relaxed ends back to beta = 1 with vertical segments
    let q = rescale_profile(&ge.profile, root, s1);
    let n = q.elements();
    let mut gamma = Vec::with_capacity(n + 3);
    let mut beta = Vec::with_capacity(n + 3);
    gamma.push(0.0);
    beta.push(1.0);
    gamma.extend(&q.gamma);
    beta.extend(&q.beta);
    gamma.push(s1);
    beta.push(1.0);
    let lifted = ProfilePair {
        t_len: 1.0,
        gamma,
        beta,
    };
    let relifted = descend(&metric, lifted, s1, 0.0, &pg);
    let mut g = g;
    if relifted.value < g.value {
        let iters = g.diagnostics.iterations + relifted.iterations;
        let starts = g.diagnostics.starts + 1;
        g = finish(model, s, 0.0, relifted, StartKind::Lifted, starts - 1, starts);
        g.diagnostics.iterations = iters;
    }
    if g.value < ge.value {
        ge.value = g.value;
        ge.profile = g.profile.clone();
    }
    Ok((g, ge))
}

/// Upper approximation of the relaxed density `g_eta(s)`.
pub fn g_eta(model: &ModelSpec, s: f64, eta: f64, cfg: &OptimizerSettings) -> Result<f64> {
    Ok(g_pair(model, s, eta, cfg, None)?.1.value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepVSettings {
    pub elements: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Log-spaced horizons scanned before golden refinement.
    pub scan: usize,
    /// Golden-section tolerance on `ln T`.
    pub log_tol: f64,
    pub max_iters: usize,
}

impl Default for RepVSettings {
    fn default() -> Self {
        RepVSettings {
            elements: 400,
            t_min: 0.1,
            t_max: 100.0,
            scan: 9,
            log_tol: 1e-3,
            max_iters: 20000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepVEstimate {
    pub value: f64,
    pub horizon: f64,
}

/// `min_beta min_gamma int_0^T f^2(beta) |gamma'|^2 + d(1-beta)/4 + |beta'|^2`
/// at unit `phi'(0+)`. The `gamma` problem is solved exactly: with element
/// weights `w_e` the optimal increments are proportional to `1 / w_e`.
fn repv_energy_grad(metric: &Metric, s: f64, h: f64, beta: &[f64], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|v| *v = 0.0);
    let n = beta.len() - 1;
    let mut inv_sum = 0.0;
    let mut rest = 0.0;
    let mut dw = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for e in 0..n {
        let bm = 0.5 * (beta[e] + beta[e + 1]);
        let (w, dwv) = metric.f2(bm);
        let (d, dd) = metric.b(bm);
        let db = beta[e + 1] - beta[e];
        rest += 0.25 * h * d + db * db / h;
        let cm = 0.125 * h * dd;
        grad[e] += cm - 2.0 * db / h;
        grad[e + 1] += cm + 2.0 * db / h;
        if w.is_finite() && w > 0.0 {
            inv_sum += 1.0 / w;
        } else if w == 0.0 {
            inv_sum = f64::INFINITY;
        }
        ws.push(w);
        dw.push(dwv);
    }
    if s == 0.0 {
        return rest;
    }
    if inv_sum == f64::INFINITY {
        return rest;
    }
    if !(inv_sum > 0.0) {
        return f64::INFINITY;
    }
    let elastic = s * s / (h * inv_sum);
    let c = s * s / (h * inv_sum * inv_sum);
    for e in 0..n {
        let w = ws[e];
        if w.is_finite() && w > 0.0 {
            let ge = 0.5 * c * dw[e] / (w * w);
            grad[e] += ge;
            grad[e + 1] += ge;
        }
    }
    elastic + rest
}

/// Cross-check of `g(s)` through the quadratic (Modica-Mortola type)
/// representation, minimized over the horizon `T` as well.
pub fn g_repv(model: &ModelSpec, s: f64, cfg: &RepVSettings) -> Result<RepVEstimate> {
    let phi1 = check_preconditions(model, s)?;
    if s == 0.0 {
        return Ok(RepVEstimate { value: 0.0, horizon: cfg.t_min });
    }
    let s1 = phi1.sqrt() * s;
    let metric = Metric::new(model);
    let (xstar, _) = g_hat_normalized(model, &metric, s1);
    let n = cfg.elements.max(8);
    let depth = xstar.clamp(1e-3, 1.0);
    let init: Vec<f64> = (0..=n)
        .map(|i| 1.0 - depth * (std::f64::consts::PI * i as f64 / n as f64).sin())
        .collect();
    let mut lower = vec![0.0; n + 1];
    let mut upper = vec![1.0; n + 1];
    lower[0] = 1.0;
    lower[n] = 1.0;
    upper[0] = 1.0;
    upper[n] = 1.0;
    let bounds = BoxBounds { lower, upper };
    let pg = PgSettings {
        max_iters: cfg.max_iters,
        rel_tol: 1e-12,
        patience: 8,
        ..Default::default()
    };
    let mut warm = init;
    let mut best = (f64::INFINITY, cfg.t_min);
    let solve = |log_t: f64, warm: &mut Vec<f64>, best: &mut (f64, f64)| -> f64 {
        let t = log_t.exp();
        let h = t / n as f64;
        let mut beta = warm.clone();
        let out = projected_gradient(
            |b, g| repv_energy_grad(&metric, s1, h, b, g),
            &mut beta,
            &bounds,
            &pg,
        );
        if out.value.is_finite() {
            *warm = beta;
        }
        if out.value < best.0 {
            *best = (out.value, t);
        }
        out.value
    };
    let logs: Vec<f64> = logspace(cfg.t_min, cfg.t_max, cfg.scan.max(3))
        .into_iter()
        .map(f64::ln)
        .collect();
    let mut scanned = Vec::with_capacity(logs.len());
    for &lt in &logs {
        scanned.push(solve(lt, &mut warm, &mut best));
    }
    let k = scanned
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < scanned[b] { i } else { b });
    let lo = logs[k.saturating_sub(1)];
    let hi = logs[(k + 1).min(logs.len() - 1)];
    golden_section(|lt| solve(lt, &mut warm, &mut best), lo, hi, cfg.log_tol, 60);
    Ok(RepVEstimate {
        value: best.0,
        horizon: best.1,
    })
}

/// `g` via [`g_repv`], value only.
pub fn g_repv_value(model: &ModelSpec, s: f64, cfg: &RepVSettings) -> Result<f64> {
    Ok(g_repv(model, s, cfg)?.value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSettings {
    pub optimizer: OptimizerSettings,
    /// Relaxation for the `g_eta` column; `None` skips it.
    pub eta: Option<f64>,
    /// Contiguous grid points per work unit. Warm starts chain inside a
    /// unit only, so results do not depend on the thread count.
    pub chunk: usize,
}

impl Default for TableSettings {
    fn default() -> Self {
        TableSettings {
            optimizer: OptimizerSettings::default(),
            eta: Some(1e-2),
            chunk: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawPointDiagnostics {
    pub iterations: usize,
    pub winner: StartKind,
    pub winner_index: usize,
    pub hit_max_iterations: bool,
    /// Replaced by the rescaled profile of the next grid point.
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohesiveLawTable {
    pub s: Vec<f64>,
    pub g: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub g_eta: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub lambda0: Option<f64>,
    pub diagnostics: Vec<LawPointDiagnostics>,
    #[serde(skip)]
    pub profiles: Vec<ProfilePair>,
}

struct PointResult {
    g: GEstimate,
    g_eta: Option<f64>,
    g_hat: f64,
}

/// Tabulates `g`, `g_hat` and optionally `g_eta` on an increasing grid.
pub fn build_law_table(model: &ModelSpec, s_grid: &[f64], settings: &TableSettings) -> Result<CohesiveLawTable> {
    if s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("s grid must be strictly increasing".into()));
    }
    if let Some(s0) = s_grid.first() {
        check_preconditions(model, *s0)?;
    }
    let chunk = settings.chunk.max(1);
    let cfg = &settings.optimizer;
    let chunks: Vec<Result<Vec<PointResult>>> = s_grid
        .par_chunks(chunk)
        .map(|slice| {
            let mut out: Vec<PointResult> = Vec::with_capacity(slice.len());
            for &s in slice {
                let warm = out.last().map(|r| &r.g.profile);
                let (g, g_eta) = match settings.eta {
                    Some(eta) => {
                        let (g, ge) = g_pair(model, s, eta, cfg, warm)?;
                        (g, Some(ge.value))
                    }
                    None => (g_estimate(model, s, cfg, warm)?, None),
                };
                out.push(PointResult {
                    g,
                    g_eta,
                    g_hat: g_hat(model, s)?,
                });
            }
            Ok(out)
        })
        .collect();
    let mut points = Vec::with_capacity(s_grid.len());
    for c in chunks {
        points.extend(c?);
    }

    let metric = Metric::new(model);
    let root = model.require_phi_prime0()?.sqrt();
    let mut repaired = vec![false; points.len()];
    for k in (0..points.len().saturating_sub(1)).rev() {
        let (head, tail) = points.split_at_mut(k + 1);
        let (cur, next) = (&mut head[k], &tail[0]);
        if cur.g.value > next.g.value && next.g.s > 0.0 {
            let p = next.g.profile.scaled_gamma(cur.g.s / next.g.s, cur.g.s);
            let v = path_energy(&metric, root * root, &p.gamma, &p.beta);
            if v < cur.g.value {
                cur.g.value = v;
                cur.g.profile = p;
                cur.g.diagnostics.winner = StartKind::Scaled;
                repaired[k] = true;
            }
        }
        if let Some(ge) = cur.g_eta.as_mut() {
            *ge = ge.min(cur.g.value);
        }
    }

    let eta = settings.eta;
    Ok(CohesiveLawTable {
        s: s_grid.to_vec(),
        g: points.iter().map(|p| p.g.value).collect(),
        g_hat: points.iter().map(|p| p.g_hat).collect(),
        g_eta: eta.map(|_| points.iter().map(|p| p.g_eta.unwrap_or(f64::NAN)).collect()),
        eta,
        lambda0: eta.map(|e| lambda0(model, e)),
        diagnostics: points
            .iter()
            .zip(&repaired)
            .map(|(p, &r)| LawPointDiagnostics {
                iterations: p.g.diagnostics.iterations,
                winner: p.g.diagnostics.winner,
                winner_index: p.g.diagnostics.winner_index,
                hit_max_iterations: p.g.diagnostics.hit_max_iterations,
                repaired: r,
            })
            .collect(),
        profiles: points.into_iter().map(|p| p.g.profile).collect(),
    })
}

impl CohesiveLawTable {
    /// A table holding only `g` samples, e.g. from an external source.
    pub fn from_samples(s: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if s.len() != g.len() || s.is_empty() {
            return Err(Error::Precondition("need matching, non-empty s and g columns".into()));
        }
        if s[0] < 0.0 || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("s grid must be non-negative and strictly increasing".into()));
        }
        let n = s.len();
        Ok(CohesiveLawTable {
            g_hat: vec![f64::NAN; n],
            s,
            g,
            g_eta: None,
            eta: None,
            lambda0: None,
            diagnostics: Vec::new(),
            profiles: Vec::new(),
        })
    }

    /// Largest tabulated opening.
    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Piecewise-linear interpolation through `(0, 0)` and the samples,
    /// constant past the last sample.
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let k = self.s.partition_point(|&x| x < s);
        if k == self.s.len() {
            return *self.g.last().unwrap();
        }
        let (x1, y1) = (self.s[k], self.g[k]);
        if x1 == s {
            return y1;
        }
        let (x0, y0) = if k == 0 { (0.0, 0.0) } else { (self.s[k - 1], self.g[k - 1]) };
        y0 + (y1 - y0) * (s - x0) / (x1 - x0)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,g,g_hat,g_eta")?;
        for i in 0..self.s.len() {
            let ge = self.g_eta.as_ref().map_or(f64::NAN, |v| v[i]);
            writeln!(
                w,
                "{},{},{},{}",
                fmt_num(self.s[i]),
                fmt_num(self.g[i]),
                fmt_num(self.g_hat[i]),
                fmt_num(ge)
            )?;
        }
        Ok(())
    }
}
