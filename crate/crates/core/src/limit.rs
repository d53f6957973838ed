//! Limit functionals on piecewise-Sobolev-plus-jumps profiles and the
//! one-dimensional Dirichlet problem they induce.

use serde::{Deserialize, Serialize};

use crate::cohesive::CohesiveLawTable;
use crate::envelope::EnvelopeTable;
use crate::error::{Error, Result};
use crate::minimize::golden_section;
use crate::model::{ModelSpec, SigmaKind};

/// Grid size for the scan over the total jump amplitude.
pub const DIRICHLET_SCAN: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub x: f64,
    pub s: f64,
}

/// `u` on `[a, b]` as an absolutely continuous part, sampled as one strain
/// per uniform element, plus finitely many jumps. No Cantor part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SBVProfile {
    pub a: f64,
    pub b: f64,
    pub strain: Vec<f64>,
    pub jumps: Vec<Jump>,
    pub trace_a: f64,
    pub trace_b: f64,
}

impl SBVProfile {
    pub fn new(a: f64, b: f64, strain: Vec<f64>, jumps: Vec<Jump>, trace_a: f64) -> Result<Self> {
        if !(b > a) || strain.is_empty() {
            return Err(Error::Precondition("profile needs b > a and at least one element".into()));
        }
        if jumps.iter().any(|j| !(j.x >= a && j.x <= b) || !(j.s > 0.0)) {
            return Err(Error::Precondition("jumps need x in [a, b] and positive amplitude".into()));
        }
        if jumps.windows(2).any(|w| !(w[1].x > w[0].x)) {
            return Err(Error::Precondition("jump locations must be sorted and distinct".into()));
        }
        let h = (b - a) / strain.len() as f64;
        let trace_b = trace_a + h * strain.iter().sum::<f64>() + jumps.iter().map(|j| j.s).sum::<f64>();
        Ok(SBVProfile {
            a,
            b,
            strain,
            jumps,
            trace_a,
            trace_b,
        })
    }

    pub fn zero(a: f64, b: f64, elements: usize) -> Result<Self> {
        Self::new(a, b, vec![0.0; elements.max(1)], Vec::new(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitBreakdown {
    pub total: f64,
    pub bulk: f64,
    pub jump: f64,
}

/// Bulk `int h**(|u'|)` plus `sum g(s_j)`.
pub fn limit_energy(p: &SBVProfile, env: &EnvelopeTable, law: &CohesiveLawTable) -> LimitBreakdown {
    let h = (p.b - p.a) / p.strain.len() as f64;
    let bulk: f64 = p.strain.iter().map(|&e| h * env.eval(e.abs())).sum();
    let jump: f64 = p.jumps.iter().map(|j| law.eval(j.s)).sum();
    LimitBreakdown {
        total: bulk + jump,
        bulk,
        jump,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Elastic,
    Cohesive,
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletSolution {
    pub load: f64,
    pub ell: f64,
    /// Total jump amplitude.
    pub s_star: f64,
    pub energy: f64,
    pub bulk: f64,
    pub jump: f64,
    pub regime: Regime,
}

impl DirichletSolution {
    /// Affine part with slope `(L - s*) / ell` and one jump at the midpoint.
    pub fn profile(&self, a: f64, elements: usize) -> Result<SBVProfile> {
        let b = a + self.ell;
        let slope = (self.load - self.s_star) / self.ell;
        let jumps = if self.s_star > 0.0 {
            vec![Jump {
                x: 0.5 * (a + b),
                s: self.s_star,
            }]
        } else {
            Vec::new()
        };
        SBVProfile::new(a, b, vec![slope; elements.max(1)], jumps, 0.0)
    }
}

fn check_load(load: f64, ell: f64) -> Result<()> {
    if !(load >= 0.0) || !load.is_finite() {
        return Err(Error::Domain(format!("load must be finite and >= 0, got {load}")));
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::Domain(format!("length must be positive, got {ell}")));
    }
    Ok(())
}

fn single_jump(env: &EnvelopeTable, law: &CohesiveLawTable, load: f64, ell: f64) -> (f64, f64) {
    let cost = |s: f64| ell * env.eval((load - s).max(0.0) / ell) + law.eval(s);
    let n = DIRICHLET_SCAN;
    let mut best = (0.0, cost(0.0));
    let mut best_i = 0;
    for i in 1..n {
        let s = load * i as f64 / (n - 1) as f64;
        let v = cost(s);
        if v < best.1 {
            best = (s, v);
            best_i = i;
        }
    }
    let step = load / (n - 1) as f64;
    let lo = (best_i as f64 - 1.0).max(0.0) * step;
    let hi = ((best_i + 1) as f64 * step).min(load);
    let (s, v) = golden_section(cost, lo, hi, 1e-12, 200);
    if v < best.1 {
        (s, v)
    } else {
        best
    }
}

/// Minimizes `ell h**((L - s) / ell) + g(s)` over the total jump `s`.
pub fn dirichlet_limit(
    model: &ModelSpec,
    env: &EnvelopeTable,
    law: &CohesiveLawTable,
    load: f64,
    ell: f64,
) -> Result<DirichletSolution> {
    check_load(load, ell)?;
    if load == 0.0 {
        return Ok(DirichletSolution {
            load,
            ell,
            s_star: 0.0,
            energy: 0.0,
            bulk: 0.0,
            jump: 0.0,
            regime: Regime::Elastic,
        });
    }
    if law.s_max() < load * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "law table ends at {} but the load is {load}",
            law.s_max()
        )));
    }
    if matches!(env.sigma, SigmaKind::Finite(_)) && env.t_max() < load / ell * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "envelope table ends at {} but the strain reaches {}",
            env.t_max(),
            load / ell
        )));
    }
    let (s_star, energy) = single_jump(env, law, load, ell);
    let jump = law.eval(s_star);
    let regime = if s_star < 1e-6 * load {
        Regime::Elastic
    } else if jump > 0.98 * model.toughness() {
        Regime::Saturated
    } else {
        Regime::Cohesive
    };
    Ok(DirichletSolution {
        load,
        ell,
        s_star,
        energy,
        bulk: energy - jump,
        jump,
        regime,
    })
}

/// Brute force over up to `k <= 3` jumps whose amplitudes sit on a grid
/// of `L / 96`, plus the refined single-jump value; the minimum over all.
pub fn kjump_oracle(env: &EnvelopeTable, law: &CohesiveLawTable, load: f64, ell: f64, k: usize) -> Result<f64> {
    if !(1..=3).contains(&k) {
        return Err(Error::Precondition(format!("k must be 1, 2 or 3, got {k}")));
    }
    check_load(load, ell)?;
    if load == 0.0 {
        return Ok(0.0);
    }
    let mut best = single_jump(env, law, load, ell).1;
    const M: usize = 96;
    let amp = |i: usize| load * i as f64 / M as f64;
    let bulk = |total: usize| ell * env.eval(amp(M - total) / ell);
    if k >= 2 {
        for i in 1..=M {
            for j in i..=M - i {
                best = best.min(bulk(i + j) + law.eval(amp(i)) + law.eval(amp(j)));
                if k >= 3 {
                    for l in j..=M - i - j {
                        let e = bulk(i + j + l) + law.eval(amp(i)) + law.eval(amp(j)) + law.eval(amp(l));
                        best = best.min(e);
                    }
                }
            }
        }
    }
    Ok(best)
}

/// `min(phi(inf) L^2 / ell, 2 Psi(1))`: elastic response or one crack.
pub fn brittle_dirichlet_limit(model: &ModelSpec, load: f64, ell: f64) -> Result<f64> {
    check_load(load, ell)?;
    let phi_inf = model.require_phi_inf()?;
    Ok((phi_inf * load * load / ell).min(model.toughness()))
}

/// The limit energy vanishes identically when `sigma_bar = 0`.
pub fn sigma_zero_limit(model: &ModelSpec, load: f64) -> Result<f64> {
    if !load.is_finite() || load < 0.0 {
        return Err(Error::Domain(format!("load must be finite and >= 0, got {load}")));
    }
    match model.sigma_bar()?.kind {
        SigmaKind::Zero => Ok(0.0),
        k => Err(Error::Precondition(format!("expected sigma_bar = 0, got {k:?}"))),
    }
}
