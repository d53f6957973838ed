//! Regularized energies on a uniform 1D mesh and their minimization by
//! alternate minimization (exact `u`, projected-gradient `v`).
//!
//! Per element, with midpoint value `vm` and difference quotients:
//! `h (phi(e f^2(vm)) + kappa) u'^2 + h d(1 - vm) / (4 eps) + h eps v'^2`,
//! where `e = eps` (cohesive) or `e = gamma_eps` (brittle).

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::fmt_num;
use crate::minimize::{projected_gradient, BoxBounds, PgSettings, PgStatus};
use crate::model::ModelSpec;

const V_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
}

impl Mesh1D {
    pub fn new(a: f64, b: f64, nodes: usize) -> Result<Self> {
        if nodes < 3 || !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!(
                "mesh needs b > a and at least 3 nodes, got ({a}, {b}) with {nodes}"
            )));
        }
        Ok(Mesh1D { a, b, nodes })
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.nodes - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    pub fn elements(&self) -> usize {
        self.nodes - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl DiscreteState {
    /// Affine `u` from 0 to `load`, `v = 1`.
    pub fn intact(mesh: &Mesh1D, load: f64) -> Self {
        let n = mesh.nodes;
        DiscreteState {
            u: (0..n).map(|i| load * i as f64 / (n - 1) as f64).collect(),
            v: vec![1.0; n],
        }
    }

    /// Linear interpolation onto another mesh of the same interval.
    pub fn resample(&self, from: &Mesh1D, to: &Mesh1D) -> Self {
        let interp = |f: &[f64], x: f64| {
            let t = ((x - from.a) / from.h()).clamp(0.0, (from.nodes - 1) as f64);
            let i = (t.floor() as usize).min(from.nodes - 2);
            let w = t - i as f64;
            (1.0 - w) * f[i] + w * f[i + 1]
        };
        let xs: Vec<f64> = (0..to.nodes).map(|i| to.x(i)).collect();
        DiscreteState {
            u: xs.iter().map(|&x| interp(&self.u, x)).collect(),
            v: xs.iter().map(|&x| interp(&self.v, x).clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mesh: &Mesh1D, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,u,v")?;
        for i in 0..mesh.nodes {
            writeln!(w, "{},{},{}", fmt_num(mesh.x(i)), fmt_num(self.u[i]), fmt_num(self.v[i]))?;
        }
        Ok(())
    }

    fn check(&self, mesh: &Mesh1D) -> Result<()> {
        if self.u.len() != mesh.nodes || self.v.len() != mesh.nodes {
            return Err(Error::Precondition(format!(
                "state has {} / {} values for {} nodes",
                self.u.len(),
                self.v.len(),
                mesh.nodes
            )));
        }
        if let Some(i) = self.v.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Precondition(format!(
                "v = {} outside [0, 1] at node {i}",
                self.v[i]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `phi(eps f^2(v))` plus `kappa_eps |u'|^2`.
    Cohesive,
    /// `phi(gamma_eps f^2(v))` plus `kappa_eps |u'|^2`.
    Brittle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VStepSettings {
    pub max_inner_iters: usize,
    pub rel_tol: f64,
    pub max_halvings: usize,
    pub initial_step: f64,
}

impl Default for VStepSettings {
    fn default() -> Self {
        VStepSettings {
            max_inner_iters: 50,
            rel_tol: 1e-13,
            max_halvings: 60,
            initial_step: 1e-3,
        }
    }
}

/// Initializations tried by [`multistart_minimize`], besides a warm start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartSet {
    pub plain: bool,
    /// Gaussian dip of `v` to 0.1 at the midpoint, width `2 eps`.
    pub notch: bool,
    /// Seeded random damage `v in [0.4, 1]` at interior nodes.
    pub seed: Option<u64>,
}

impl Default for StartSet {
    fn default() -> Self {
        StartSet {
            plain: true,
            notch: true,
            seed: Some(42),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub eps: f64,
    pub mode: Mode,
    /// Dirichlet data: `u(a) = 0`, `u(b) = load`, `v(a) = v(b) = 1`.
    pub load: f64,
    pub tol_rel_energy: f64,
    pub max_outer_iters: usize,
    pub v_step: VStepSettings,
    pub starts: StartSet,
}

impl SolveConfig {
    pub fn new(eps: f64, mode: Mode, load: f64) -> Self {
        SolveConfig {
            eps,
            mode,
            load,
            tol_rel_energy: 1e-8,
            max_outer_iters: 2000,
            v_step: VStepSettings::default(),
            starts: StartSet::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.tol_rel_energy > 0.0 && self.tol_rel_energy <= 1e-2) {
            return Err(Error::Config(format!(
                "tol_rel_energy must lie in (0, 1e-2], got {}",
                self.tol_rel_energy
            )));
        }
        if !self.load.is_finite() {
            return Err(Error::Config("load must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub elastic: f64,
    pub potential: f64,
    pub gradient: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub entries: Vec<EnergyBreakdown>,
}

impl EnergyTrace {
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.entries.windows(2).all(|w| w[1].total <= w[0].total + slack)
    }

    pub fn last(&self) -> Option<&EnergyBreakdown> {
        self.entries.last()
    }
}

/// Per-solve constants.
struct Prepared<'a> {
    model: &'a ModelSpec,
    eps: f64,
    eps_eff: f64,
    kappa: f64,
    phi_inf: f64,
    h: f64,
}

impl<'a> Prepared<'a> {
    fn new(mesh: &Mesh1D, model: &'a ModelSpec, cfg: &SolveConfig) -> Result<Self> {
        cfg.validate()?;
        let eps_eff = match cfg.mode {
            Mode::Cohesive => cfg.eps,
            Mode::Brittle => model.gamma_at(cfg.eps),
        };
        Ok(Prepared {
            model,
            eps: cfg.eps,
            eps_eff,
            kappa: model.kappa_at(cfg.eps),
            phi_inf: model.require_phi_inf()?,
            h: mesh.h(),
        })
    }

    /// Degradation `phi(e f^2(v))` and its derivative in `v`.
    fn degradation(&self, v: f64) -> (f64, f64) {
        if v >= 1.0 {
            return (self.phi_inf, 0.0);
        }
        let clamped = v > 1.0 - V_CLAMP;
        let vc = v.min(1.0 - V_CLAMP);
        let (fh, dfh) = self.model.fhat.eval_with_slope(vc);
        let (q, dq) = self.model.q.eval_with_slope(1.0 - vc);
        if q <= 0.0 {
            return (self.phi_inf, 0.0);
        }
        let f2 = fh / q;
        let df2 = dfh / q + fh * dq / (q * q);
        let (p, dp) = self.model.phi.eval_with_slope(self.eps_eff * f2);
        let dw = if clamped { 0.0 } else { dp * self.eps_eff * df2 };
        (p, dw)
    }

    /// `d(1 - v)` and its derivative in `v`.
    fn potential(&self, v: f64) -> (f64, f64) {
        let (d, dd) = self.model.dpot.eval_with_slope((1.0 - v).max(0.0));
        (d, -dd)
    }

    fn energy(&self, u: &[f64], v: &[f64]) -> EnergyBreakdown {
        let h = self.h;
        let mut out = EnergyBreakdown::default();
        for e in 0..u.len() - 1 {
            let du = (u[e + 1] - u[e]) / h;
            let dv = v[e + 1] - v[e];
            let vm = 0.5 * (v[e] + v[e + 1]);
            let w = self.degradation(vm).0 + self.kappa;
            out.elastic += h * w * du * du;
            out.potential += h * self.potential(vm).0 / (4.0 * self.eps);
            out.gradient += self.eps * dv * dv / h;
        }
        out.total = out.elastic + out.potential + out.gradient;
        out
    }

    /// Total energy and its gradient in `v` at fixed `u`.
    fn v_energy_grad(&self, u: &[f64], v: &[f64], grad: &mut [f64]) -> f64 {
        let h = self.h;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for e in 0..u.len() - 1 {
            let du = (u[e + 1] - u[e]) / h;
            let dv = v[e + 1] - v[e];
            let vm = 0.5 * (v[e] + v[e + 1]);
            let (w, dw) = self.degradation(vm);
            let (d, dd) = self.potential(vm);
            total += h * (w + self.kappa) * du * du + h * d / (4.0 * self.eps) + self.eps * dv * dv / h;
            let dm = 0.5 * (h * dw * du * du + h * dd / (4.0 * self.eps));
            let dg = 2.0 * self.eps * dv / h;
            grad[e] += dm - dg;
            grad[e + 1] += dm + dg;
        }
        total
    }
}

pub fn energy(mesh: &Mesh1D, state: &DiscreteState, model: &ModelSpec, cfg: &SolveConfig) -> Result<EnergyBreakdown> {
    state.check(mesh)?;
    Ok(Prepared::new(mesh, model, cfg)?.energy(&state.u, &state.v))
}

/// Gradient of the total energy in `v` (all nodes, boundary included).
pub fn v_gradient(mesh: &Mesh1D, state: &DiscreteState, model: &ModelSpec, cfg: &SolveConfig) -> Result<Vec<f64>> {
    state.check(mesh)?;
    let prep = Prepared::new(mesh, model, cfg)?;
    let mut g = vec![0.0; mesh.nodes];
    prep.v_energy_grad(&state.u, &state.v, &mut g);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct USolveReport {
    /// Max-norm residual of the assembled system.
    pub residual: f64,
    /// `max diagonal * max |u|`, the reference for `residual`.
    pub scale: f64,
}

fn solve_u(prep: &Prepared, state: &mut DiscreteState, load: f64) -> Result<USolveReport> {
    let n = state.u.len();
    let h = prep.h;
    let k: Vec<f64> = (0..n - 1)
        .map(|e| (prep.degradation(0.5 * (state.v[e] + state.v[e + 1])).0 + prep.kappa) / h)
        .collect();
    if let Some(e) = k.iter().position(|&ke| !(ke > 0.0)) {
        return Err(Error::Config(format!(
            "element {e} has zero stiffness and the displacement system is singular; use kappa_eps > 0"
        )));
    }
    state.u[0] = 0.0;
    state.u[n - 1] = load;
    let m = n - 2;
    // Thomas algorithm on interior nodes
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for i in 0..m {
        let diag = k[i] + k[i + 1];
        let lower = if i > 0 { -k[i] } else { 0.0 };
        let upper = -k[i + 1];
        let mut rhs = 0.0;
        if i == 0 {
            rhs += k[0] * state.u[0];
        }
        if i + 1 == m {
            rhs += k[i + 1] * load;
        }
        let denom = diag - lower * if i > 0 { c[i - 1] } else { 0.0 };
        c[i] = if i + 1 < m { upper / denom } else { 0.0 };
        d[i] = (rhs - lower * if i > 0 { d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..m).rev() {
        let next = if i + 1 < m { state.u[i + 2] } else { 0.0 };
        state.u[i + 1] = d[i] - if i + 1 < m { c[i] * next } else { 0.0 };
    }
    let mut residual: f64 = 0.0;
    let mut max_diag: f64 = 0.0;
    for i in 1..n - 1 {
        let diag = k[i - 1] + k[i];
        max_diag = max_diag.max(diag);
        let r = diag * state.u[i] - k[i - 1] * state.u[i - 1] - k[i] * state.u[i + 1];
        residual = residual.max(r.abs());
    }
    let umax = state.u.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    Ok(USolveReport {
        residual,
        scale: max_diag * umax.max(f64::MIN_POSITIVE),
    })
}

/// Exact minimization in `u` at fixed `v` with the Dirichlet data.
pub fn u_step(mesh: &Mesh1D, state: &mut DiscreteState, model: &ModelSpec, cfg: &SolveConfig) -> Result<USolveReport> {
    state.check(mesh)?;
    let prep = Prepared::new(mesh, model, cfg)?;
    solve_u(&prep, state, cfg.load)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VStepReport {
    pub iterations: usize,
    pub line_search_failed: bool,
    pub energy: f64,
}

fn descend_v(prep: &Prepared, state: &mut DiscreteState, settings: &VStepSettings) -> VStepReport {
    let n = state.v.len();
    let mut lower = vec![0.0; n];
    let mut upper = vec![1.0; n];
    lower[0] = 1.0;
    lower[n - 1] = 1.0;
    upper[0] = 1.0;
    upper[n - 1] = 1.0;
    let bounds = BoxBounds { lower, upper };
    let pg = PgSettings {
        max_iters: settings.max_inner_iters,
        rel_tol: settings.rel_tol,
        patience: 3,
        max_halvings: settings.max_halvings,
        initial_step: settings.initial_step,
        ..Default::default()
    };
    let u = &state.u;
    let out = projected_gradient(|v, g| prep.v_energy_grad(u, v, g), &mut state.v, &bounds, &pg);
    VStepReport {
        iterations: out.iterations,
        line_search_failed: out.status == PgStatus::LineSearchFailed,
        energy: out.value,
    }
}

/// Projected-gradient descent in `v` at fixed `u`; boundary values stay 1.
pub fn v_step(mesh: &Mesh1D, state: &mut DiscreteState, model: &ModelSpec, cfg: &SolveConfig) -> Result<VStepReport> {
    state.check(mesh)?;
    let prep = Prepared::new(mesh, model, cfg)?;
    Ok(descend_v(&prep, state, &cfg.v_step))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub state: DiscreteState,
    pub energy: EnergyBreakdown,
    pub trace: EnergyTrace,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Some `v` line search ended without progress.
    pub line_search_failures: usize,
    /// Largest `u_step` residual relative to its scale.
    pub max_u_residual: f64,
}

/// Staggered scheme from one initial state.
pub fn alternate_minimize(
    mesh: &Mesh1D,
    initial: DiscreteState,
    model: &ModelSpec,
    cfg: &SolveConfig,
) -> Result<Relaxation> {
    initial.check(mesh)?;
    let prep = Prepared::new(mesh, model, cfg)?;
    let mut state = initial;
    let n = mesh.nodes;
    state.v[0] = 1.0;
    state.v[n - 1] = 1.0;
    let mut max_res: f64 = 0.0;
    let r = solve_u(&prep, &mut state, cfg.load)?;
    max_res = max_res.max(r.residual / r.scale);
    let mut trace = EnergyTrace::default();
    let mut current = prep.energy(&state.u, &state.v);
    trace.entries.push(current);
    let mut converged = false;
    let mut failures = 0;
    let mut outer = 0;
    for it in 0..cfg.max_outer_iters {
        outer = it + 1;
        let rep = descend_v(&prep, &mut state, &cfg.v_step);
        if rep.line_search_failed {
            failures += 1;
        }
        let r = solve_u(&prep, &mut state, cfg.load)?;
        max_res = max_res.max(r.residual / r.scale);
        let next = prep.energy(&state.u, &state.v);
        trace.entries.push(next);
        let decrease = current.total - next.total;
        current = next;
        if decrease <= cfg.tol_rel_energy * current.total.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(Relaxation {
        state,
        energy: current,
        trace,
        outer_iterations: outer,
        converged,
        line_search_failures: failures,
        max_u_residual: max_res,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Plain,
    Notch,
    Warm,
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub kind: StartKind,
    pub energy: f64,
    pub outer_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartResult {
    pub best: Relaxation,
    pub winner: StartKind,
    pub starts: Vec<StartOutcome>,
}

fn initial_states(mesh: &Mesh1D, cfg: &SolveConfig, warm: Option<&DiscreteState>) -> Vec<(StartKind, DiscreteState)> {
    let mut out = Vec::new();
    let base = DiscreteState::intact(mesh, cfg.load);
    if cfg.starts.plain {
        out.push((StartKind::Plain, base.clone()));
    }
    if cfg.starts.notch {
        let mid = 0.5 * (mesh.a + mesh.b);
        let width = 2.0 * cfg.eps;
        let mut s = base.clone();
        for i in 1..mesh.nodes - 1 {
            let z = (mesh.x(i) - mid) / width;
            s.v[i] = 1.0 - 0.9 * (-z * z).exp();
        }
        out.push((StartKind::Notch, s));
    }
    if let Some(w) = warm {
        out.push((StartKind::Warm, w.clone()));
    }
    if let Some(seed) = cfg.starts.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = base;
        for i in 1..mesh.nodes - 1 {
            s.v[i] = rng.gen_range(0.4..=1.0);
        }
        out.push((StartKind::Seeded, s));
    }
    out
}

/// Runs the configured starts (plus `warm`) concurrently and keeps the
/// lowest final energy; ties go to the earlier start.
pub fn multistart_minimize(
    mesh: &Mesh1D,
    warm: Option<&DiscreteState>,
    model: &ModelSpec,
    cfg: &SolveConfig,
) -> Result<MultistartResult> {
    let starts = initial_states(mesh, cfg, warm);
    if starts.is_empty() {
        return Err(Error::Config("no initial states enabled".into()));
    }
    let runs: Vec<Result<(StartKind, Relaxation)>> = starts
        .into_par_iter()
        .map(|(kind, s)| Ok((kind, alternate_minimize(mesh, s, model, cfg)?)))
        .collect();
    let mut outcomes = Vec::with_capacity(runs.len());
    let mut best: Option<(StartKind, Relaxation)> = None;
    for r in runs {
        let (kind, relax) = r?;
        outcomes.push(StartOutcome {
            kind,
            energy: relax.energy.total,
            outer_iterations: relax.outer_iterations,
            converged: relax.converged,
        });
        let better = match &best {
            None => true,
            Some((_, b)) => relax.energy.total < b.energy.total - 1e-12 * b.energy.total.abs(),
        };
        if better {
            best = Some((kind, relax));
        }
    }
    let (winner, best) = best.unwrap();
    Ok(MultistartResult {
        best,
        winner,
        starts: outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MeshRule {
    /// Same node count for every `eps`; each must satisfy `h <= eps / 10`.
    Fixed { nodes: usize },
    /// `h = eps / elements_per_eps`, with `elements_per_eps >= 10`.
    PerEps { elements_per_eps: f64 },
}

impl MeshRule {
    pub fn mesh(&self, a: f64, b: f64, eps: f64) -> Result<Mesh1D> {
        let mesh = match *self {
            MeshRule::Fixed { nodes } => Mesh1D::new(a, b, nodes)?,
            MeshRule::PerEps { elements_per_eps } => {
                if !(elements_per_eps >= 10.0) {
                    return Err(Error::Config(format!(
                        "need at least 10 elements per eps, got {elements_per_eps}"
                    )));
                }
                let elements = ((b - a) * elements_per_eps / eps).ceil() as usize;
                Mesh1D::new(a, b, elements.max(2) + 1)?
            }
        };
        if mesh.h() > eps / 10.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "mesh spacing {} exceeds eps / 10 = {} (refine the mesh)",
                mesh.h(),
                eps / 10.0
            )));
        }
        Ok(mesh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsResult {
    pub eps: f64,
    pub mesh: Mesh1D,
    pub energy: EnergyBreakdown,
    pub winner: StartKind,
    pub starts: Vec<StartOutcome>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub trace_monotone: bool,
    pub max_u_residual: f64,
    /// Largest `|u'|` over elements and its element midpoint.
    pub max_strain: f64,
    pub max_strain_at: f64,
    pub min_v: f64,
    pub min_v_at: f64,
    pub trace: EnergyTrace,
    pub state: DiscreteState,
}

/// Solves along a strictly decreasing list of `eps`, warm-starting each
/// level from the previous minimizer in addition to the fresh starts.
pub fn continuation(
    model: &ModelSpec,
    base: &SolveConfig,
    eps_list: &[f64],
    domain: (f64, f64),
    rule: &MeshRule,
) -> Result<Vec<EpsResult>> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("eps list must be non-empty and strictly decreasing".into()));
    }
    let meshes: Vec<Mesh1D> = eps_list
        .iter()
        .map(|&e| rule.mesh(domain.0, domain.1, e))
        .collect::<Result<_>>()?;
    let mut out: Vec<EpsResult> = Vec::with_capacity(eps_list.len());
    for (&eps, mesh) in eps_list.iter().zip(&meshes) {
        let cfg = SolveConfig { eps, ..*base };
        let warm = out.last().map(|prev| prev.state.resample(&prev.mesh, mesh));
        let ms = multistart_minimize(mesh, warm.as_ref(), model, &cfg)?;
        let h = mesh.h();
        let st = &ms.best.state;
        let (mut max_strain, mut max_at) = (0.0_f64, mesh.a);
        for e in 0..mesh.elements() {
            let du = ((st.u[e + 1] - st.u[e]) / h).abs();
            if du > max_strain {
                max_strain = du;
                max_at = mesh.x(e) + 0.5 * h;
            }
        }
        let (mut min_v, mut min_at) = (f64::INFINITY, mesh.a);
        for (i, &v) in st.v.iter().enumerate() {
            if v < min_v {
                min_v = v;
                min_at = mesh.x(i);
            }
        }
        out.push(EpsResult {
            eps,
            mesh: *mesh,
            energy: ms.best.energy,
            winner: ms.winner,
            starts: ms.starts,
            outer_iterations: ms.best.outer_iterations,
            converged: ms.best.converged,
            trace_monotone: ms.best.trace.is_monotone(1e-12),
            max_u_residual: ms.best.max_u_residual,
            max_strain,
            max_strain_at: max_at,
            min_v,
            min_v_at: min_at,
            trace: ms.best.trace,
            state: ms.best.state,
        });
    }
    Ok(out)
}
