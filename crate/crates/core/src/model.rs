//! Phase-field model specification and its primitive scalar maps.
//!
//! A model is the quadruple `(fhat, Q, d, phi)`: the degradation numerator,
//! the stiffness function entering `f(t) = (fhat(t) / Q(1-t))^(1/2)`, the
//! damage potential weighting `d(1-v)/(4 eps)` and the outer degradation map
//! applied to `eps * f^2(v)`. Two scaling rules complete it: the residual
//! stiffness `kappa_eps = c * eps^a` of the Dirichlet problem and the
//! brittle rescaling `gamma_eps = c * eps^b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::{Domain, ScalarFnSpec};

/// `coeff * eps^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRule {
    pub coeff: f64,
    pub exponent: f64,
}

impl ScalingRule {
    pub fn at(&self, eps: f64) -> f64 {
        self.coeff * eps.powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub fhat: ScalarFnSpec,
    pub q: ScalarFnSpec,
    pub dpot: ScalarFnSpec,
    pub phi: ScalarFnSpec,
    pub kappa: ScalingRule,
    pub gamma: ScalingRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum SigmaKind {
    Finite(f64),
    Infinite,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaBar {
    pub kind: SigmaKind,
    /// Last Richardson increment (0 for closed forms).
    pub residual: f64,
}

impl SigmaBar {
    pub fn finite(value: f64) -> Self {
        SigmaBar {
            kind: SigmaKind::Finite(value),
            residual: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        match self.kind {
            SigmaKind::Finite(v) => v,
            SigmaKind::Infinite => f64::INFINITY,
            SigmaKind::Zero => 0.0,
        }
    }
}

/// A numerically estimated limit with its extrapolation residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub residual: f64,
}

const SIGMA_K_RANGE: (i32, i32) = (4, 40);
const SIGMA_GROWTH_RATIO: f64 = 1.2;
const SIGMA_ZERO_FLOOR: f64 = 1e-6;
const LIMIT_REL_TOL: f64 = 1e-6;
const PHI_INF_REL_TOL: f64 = 5e-2;

impl ModelSpec {
    pub fn new(
        fhat: ScalarFnSpec,
        q: ScalarFnSpec,
        dpot: ScalarFnSpec,
        phi: ScalarFnSpec,
        kappa: ScalingRule,
        gamma: ScalingRule,
    ) -> Result<Self> {
        let m = ModelSpec {
            fhat,
            q,
            dpot,
            phi,
            kappa,
            gamma,
        };
        m.check_construction()?;
        Ok(m)
    }

    /// Default scaling rules: `kappa_eps = eps^2`, `gamma_eps = eps^(1/2)`.
    pub fn default_rules() -> (ScalingRule, ScalingRule) {
        (
            ScalingRule {
                coeff: 1.0,
                exponent: 2.0,
            },
            ScalingRule {
                coeff: 1.0,
                exponent: 0.5,
            },
        )
    }

    /// Conti-Focardi-Iurlano family in the convention `d(t) = t^2`,
    /// `Q(t) = lambda^-2 t^(2q)`, `fhat(t) = t^2`, `phi = min(1, t)`.
    pub fn cfi(lambda: f64, q: f64) -> Result<Self> {
        let (kappa, gamma) = Self::default_rules();
        Self::new(
            ScalarFnSpec::quadratic(Domain::UnitInterval),
            ScalarFnSpec::scaled_power(lambda, q, Domain::UnitInterval),
            ScalarFnSpec::quadratic(Domain::UnitInterval),
            ScalarFnSpec::min_with_one(),
            kappa,
            gamma,
        )
    }

    /// Wu-type family: `fhat(t) = t^p`, `phi(t) = t / (1 + t)`, with
    /// `Q(t) = d(t) = t^2`.
    pub fn wu(p: f64) -> Result<Self> {
        let (kappa, gamma) = Self::default_rules();
        Self::new(
            ScalarFnSpec::power(p, Domain::UnitInterval),
            ScalarFnSpec::quadratic(Domain::UnitInterval),
            ScalarFnSpec::quadratic(Domain::UnitInterval),
            ScalarFnSpec::rational(),
            kappa,
            gamma,
        )
    }

    pub fn with_phi(mut self, phi: ScalarFnSpec) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_dpot(mut self, dpot: ScalarFnSpec) -> Self {
        self.dpot = dpot;
        self
    }

    pub fn with_kappa(mut self, kappa: ScalingRule) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_gamma(mut self, gamma: ScalingRule) -> Self {
        self.gamma = gamma;
        self
    }

    fn check_construction(&self) -> Result<()> {
        for (name, s, dom) in [
            ("fhat", &self.fhat, Domain::UnitInterval),
            ("Q", &self.q, Domain::UnitInterval),
            ("d", &self.dpot, Domain::UnitInterval),
            ("phi", &self.phi, Domain::NonnegHalfline),
        ] {
            s.validate()
                .map_err(|e| Error::InvalidFunction(format!("{name}: {e}")))?;
            if s.domain != dom {
                return Err(Error::InvalidFunction(format!(
                    "{name} must be defined on {dom:?}"
                )));
            }
        }
        let k = self.kappa;
        if !(k.coeff >= 0.0 && k.coeff.is_finite() && k.exponent > 1.0) {
            return Err(Error::Config(format!(
                "kappa rule needs c >= 0 and exponent > 1, got ({}, {})",
                k.coeff, k.exponent
            )));
        }
        let g = self.gamma;
        if !(g.coeff > 0.0 && g.coeff.is_finite() && g.exponent > 0.0 && g.exponent < 1.0) {
            return Err(Error::Config(format!(
                "gamma rule needs c > 0 and exponent in (0, 1), got ({}, {})",
                g.coeff, g.exponent
            )));
        }
        Ok(())
    }

    pub fn kappa_at(&self, eps: f64) -> f64 {
        self.kappa.at(eps)
    }

    pub fn gamma_at(&self, eps: f64) -> f64 {
        self.gamma.at(eps)
    }

    /// `f^2(t) = fhat(t) / Q(1 - t)` without domain checks; `+inf` where
    /// `Q(1 - t)` vanishes.
    pub fn f_squared(&self, t: f64) -> f64 {
        let num = self.fhat.eval(t);
        let den = self.q.eval(1.0 - t);
        if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    pub fn eval_f(&self, t: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "f is defined on [0, 1), got t = {t}"
            )));
        }
        Ok(self.f_squared(t).sqrt())
    }

    pub fn eval_f_eps(&self, eps: f64, t: f64) -> f64 {
        let num = eps * self.fhat.eval(t);
        let den = num + self.q.eval(1.0 - t);
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            0.0
        }
    }

    pub fn eval_f_tilde_eps(&self, eps: f64, t: f64) -> f64 {
        if t >= 1.0 {
            return 1.0;
        }
        (eps.sqrt() * self.f_squared(t).sqrt()).min(1.0)
    }

    /// `d(t) / Q(t)`, the squared critical-stress ratio.
    pub fn potential_ratio(&self, t: f64) -> f64 {
        let d = self.dpot.eval(t);
        let q = self.q.eval(t);
        if q > 0.0 {
            d / q
        } else if d > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        }
    }

    /// Limit of `(d(t) / Q(t))^(1/2)` as `t -> 0+`.
    pub fn sigma_bar(&self) -> Result<SigmaBar> {
        if let (Some(d), Some(q)) = (self.dpot.leading_power(), self.q.leading_power()) {
            let kind = if (d.exponent - q.exponent).abs() <= 1e-12 {
                SigmaKind::Finite((d.coeff / q.coeff).sqrt())
            } else if d.exponent < q.exponent {
                SigmaKind::Infinite
            } else {
                SigmaKind::Zero
            };
            return Ok(SigmaBar {
                kind,
                residual: 0.0,
            });
        }
        let (k0, k1) = SIGMA_K_RANGE;
        let seq: Vec<f64> = (k0..=k1)
            .map(|k| self.potential_ratio(2f64.powi(-k)).sqrt())
            .collect();
        classify_sigma_sequence(&seq)
    }

    /// `Psi(t) = int_0^t d^(1/2)(1 - tau) dtau`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("Psi is defined on [0, 1], got {t}")));
        }
        Ok(self.psi_unchecked(t))
    }

    fn psi_unchecked(&self, t: f64) -> f64 {
        quadrature::integrate(|tau| self.dpot.eval(1.0 - tau).max(0.0).sqrt(), 0.0, t, 1e-12).0
    }

    /// `Psi(1) - Psi(1 - x) = int_0^x d^(1/2)(u) du`, evaluated directly to
    /// avoid cancellation for small `x`.
    pub fn psi_drop(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let tol = 1e-12 * x.max(1e-300).min(1.0);
        quadrature::integrate(|u| self.dpot.eval(u).max(0.0).sqrt(), 0.0, x, tol).0
    }

    /// Total toughness `2 Psi(1)`.
    pub fn toughness(&self) -> f64 {
        2.0 * self.psi_drop(1.0)
    }

    pub fn phi_prime0(&self) -> Result<LimitEstimate> {
        if let Some(v) = self.phi.right_derivative_at_zero() {
            return Ok(LimitEstimate {
                value: v,
                residual: 0.0,
            });
        }
        let phi0 = self.phi.eval(0.0);
        let quotient = |h: f64| (self.phi.eval(h) - phi0) / h;
        // three-level Richardson on forward differences at h = 2^-k
        let estimate = |k: i32| {
            let h = 2f64.powi(-k);
            let d = [quotient(h), quotient(h / 2.0), quotient(h / 4.0)];
            let r1 = [2.0 * d[1] - d[0], 2.0 * d[2] - d[1]];
            (4.0 * r1[1] - r1[0]) / 3.0
        };
        let a = estimate(20);
        let b = estimate(22);
        let residual = (b - a).abs() / b.abs().max(1e-300);
        if !b.is_finite() || residual > LIMIT_REL_TOL.max(1e-4) {
            return Err(Error::LimitNotResolved {
                what: "phi'(0+)".into(),
                residual,
            });
        }
        Ok(LimitEstimate { value: b, residual })
    }

    pub fn phi_inf(&self) -> Result<LimitEstimate> {
        if let Some(v) = self.phi.limit_at_infinity() {
            return Ok(LimitEstimate {
                value: v,
                residual: 0.0,
            });
        }
        let t_hi = match &self.phi.family {
            crate::scalar::Family::Tabulated(tab) => tab.t_max(),
            _ => unreachable!("closed forms handled above"),
        };
        if t_hi <= 0.0 {
            return Err(Error::LimitNotResolved {
                what: "phi(inf)".into(),
                residual: f64::INFINITY,
            });
        }
        let ts = crate::minimize::logspace(t_hi / 10.0, t_hi, 64);
        let mean = ts.iter().map(|&t| self.phi.eval(t)).sum::<f64>() / ts.len() as f64;
        let spread = (self.phi.eval(t_hi) - self.phi.eval(t_hi / 10.0)).abs();
        let residual = spread / mean.abs().max(1e-300);
        if !mean.is_finite() || residual > PHI_INF_REL_TOL {
            return Err(Error::LimitNotResolved {
                what: "phi(inf)".into(),
                residual,
            });
        }
        Ok(LimitEstimate {
            value: mean,
            residual,
        })
    }

    /// `phi'(0+)`, required finite and positive.
    pub fn require_phi_prime0(&self) -> Result<f64> {
        let v = self.phi_prime0()?.value;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Hypothesis(format!("phi'(0+) = {v} is not in (0, inf)")))
        }
    }

    /// `phi(inf)`, required finite and positive.
    pub fn require_phi_inf(&self) -> Result<f64> {
        let v = self.phi_inf()?.value;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Hypothesis(format!("phi(inf) = {v} is not in (0, inf)")))
        }
    }

    pub fn validate_hypotheses(&self, n_samples: usize) -> Result<HypothesisReport> {
        validate_hypotheses_with(
            self,
            &ValidationSettings {
                n_samples,
                ..Default::default()
            },
        )
    }
}

fn classify_sigma_sequence(seq: &[f64]) -> Result<SigmaBar> {
    let n = seq.len();
    let last = seq[n - 1];
    if last.is_infinite() {
        return Ok(SigmaBar {
            kind: SigmaKind::Infinite,
            residual: f64::INFINITY,
        });
    }
    if seq.iter().any(|v| v.is_nan()) {
        return Err(Error::LimitNotResolved {
            what: "sigma bar (0/0 in d/Q)".into(),
            residual: f64::NAN,
        });
    }
    let growing = seq[n - 6..]
        .windows(2)
        .all(|w| w[0] > 0.0 && w[1] / w[0] > SIGMA_GROWTH_RATIO);
    if growing {
        return Ok(SigmaBar {
            kind: SigmaKind::Infinite,
            residual: last - seq[n - 2],
        });
    }
    if last < SIGMA_ZERO_FLOOR {
        return Ok(SigmaBar {
            kind: SigmaKind::Zero,
            residual: last,
        });
    }
    // error assumed linear in t_k = 2^-k
    let r_last = 2.0 * seq[n - 1] - seq[n - 2];
    let r_prev = 2.0 * seq[n - 2] - seq[n - 3];
    let residual = (r_last - r_prev).abs();
    if residual > LIMIT_REL_TOL * r_last.abs().max(1.0) {
        return Err(Error::LimitNotResolved {
            what: "sigma bar".into(),
            residual,
        });
    }
    if r_last <= 0.0 {
        return Ok(SigmaBar {
            kind: SigmaKind::Zero,
            residual,
        });
    }
    Ok(SigmaBar {
        kind: SigmaKind::Finite(r_last),
        residual,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationSettings {
    pub n_samples: usize,
    /// Right neighbourhood of the origin on which `Q` and `f` must be
    /// non-decreasing.
    pub monotone_neighbourhood: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings {
            n_samples: 256,
            monotone_neighbourhood: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub passed: bool,
    pub witnesses: Vec<f64>,
    pub notes: Vec<String>,
}

impl HypothesisCheck {
    fn new() -> Self {
        HypothesisCheck {
            passed: true,
            witnesses: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn fail(&mut self, t: f64, note: impl Into<String>) {
        self.passed = false;
        if self.witnesses.len() < 16 && !self.witnesses.contains(&t) {
            self.witnesses.push(t);
        }
        let note = note.into();
        if self.notes.len() < 16 && !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub hp1: HypothesisCheck,
    pub hp2: HypothesisCheck,
    pub hp3: HypothesisCheck,
    pub hp4: HypothesisCheck,
    pub phi_prime0: Option<LimitEstimate>,
    pub phi_inf: Option<LimitEstimate>,
    pub sigma_bar: Option<SigmaBar>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.hp1.passed && self.hp2.passed && self.hp3.passed && self.hp4.passed
    }

    pub fn failures(&self) -> Vec<(&'static str, &HypothesisCheck)> {
        [
            ("Hp1", &self.hp1),
            ("Hp2", &self.hp2),
            ("Hp3", &self.hp3),
            ("Hp4", &self.hp4),
        ]
        .into_iter()
        .filter(|(_, c)| !c.passed)
        .collect()
    }
}

/// Sample grid on `[0, 1]` accumulating geometrically at both ends.
fn unit_grid(n: usize) -> Vec<f64> {
    let m = n / 3;
    let mut ts = vec![0.0, 1.0];
    for j in 0..m {
        let r = 2f64.powf(-40.0 * j as f64 / m as f64 - 1.0);
        ts.push(r);
        ts.push(1.0 - r);
    }
    let rest = n.saturating_sub(2 * m + 2).max(1);
    for j in 1..=rest {
        ts.push(j as f64 / (rest + 1) as f64);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

pub fn validate_hypotheses_with(
    model: &ModelSpec,
    settings: &ValidationSettings,
) -> Result<HypothesisReport> {
    if settings.n_samples < 64 {
        return Err(Error::Precondition(format!(
            "validation needs at least 64 samples, got {}",
            settings.n_samples
        )));
    }
    for s in [&model.fhat, &model.q, &model.dpot, &model.phi] {
        s.validate()?;
    }
    let grid = unit_grid(settings.n_samples);
    let mono = |t: f64| t <= settings.monotone_neighbourhood;
    let nondecreasing = |prev: f64, next: f64| next >= prev - 1e-14 * prev.abs().max(1.0);

    let mut hp1 = HypothesisCheck::new();
    let fhat1 = model.fhat.eval(1.0);
    if (fhat1 - 1.0).abs() > 1e-12 {
        hp1.fail(1.0, format!("fhat(1) = {fhat1}, expected 1"));
    }
    let mut prev_q = None;
    let mut prev_f = None;
    for &t in &grid {
        let (fh, qv) = (model.fhat.eval(t), model.q.eval(t));
        if !(fh.is_finite() && fh >= 0.0 && qv.is_finite() && qv >= 0.0) {
            hp1.fail(t, "fhat or Q not finite and non-negative");
        }
        if t == 0.0 {
            if fh != 0.0 {
                hp1.fail(t, format!("fhat(0) = {fh}, expected 0"));
            }
            if qv != 0.0 {
                hp1.fail(t, format!("Q(0) = {qv}, expected 0"));
            }
        } else {
            if fh <= 0.0 {
                hp1.fail(t, "fhat vanishes away from 0");
            }
            if qv <= 0.0 {
                hp1.fail(t, "Q vanishes away from 0");
            }
        }
        if mono(t) {
            if let Some(p) = prev_q {
                if !nondecreasing(p, qv) {
                    hp1.fail(t, "Q decreasing near 0");
                }
            }
            prev_q = Some(qv);
            let f = model.f_squared(t).sqrt();
            if let Some(p) = prev_f {
                if !nondecreasing(p, f) {
                    hp1.fail(t, "f decreasing near 0");
                }
            }
            prev_f = Some(f);
        }
    }

    let mut hp2 = HypothesisCheck::new();
    for &t in &grid {
        let d = model.dpot.eval(t);
        if !(d.is_finite() && d >= 0.0) {
            hp2.fail(t, "d not finite and non-negative");
        }
        if t == 0.0 && d != 0.0 {
            hp2.fail(t, format!("d(0) = {d}, expected 0"));
        }
        if t > 0.0 && d <= 0.0 {
            hp2.fail(t, "d vanishes away from 0");
        }
    }
    let sigma = match model.sigma_bar() {
        Ok(s) => Some(s),
        Err(e) => {
            hp2.fail(2f64.powi(-SIGMA_K_RANGE.1), e.to_string());
            None
        }
    };

    let mut hp3 = HypothesisCheck::new();
    let mut hp4 = HypothesisCheck::new();
    let mut prev = None;
    let half_grid = crate::minimize::logspace(1e-8, 1e8, settings.n_samples);
    let phi0 = model.phi.eval(0.0);
    if phi0 != 0.0 {
        hp4.fail(0.0, format!("phi(0) = {phi0}, expected 0"));
    }
    for &t in std::iter::once(&0.0).chain(half_grid.iter()) {
        let v = model.phi.eval(t);
        if !(v.is_finite() && v >= 0.0) {
            hp3.fail(t, "phi not finite and non-negative");
        }
        if let Some(p) = prev {
            if !nondecreasing(p, v) {
                hp3.fail(t, "phi decreasing");
            }
        }
        prev = Some(v);
        if t > 0.0 && v <= 0.0 {
            hp4.fail(t, "phi vanishes away from 0");
        }
    }
    let phi_inf = match model.phi_inf() {
        Ok(l) => {
            if !(l.value.is_finite() && l.value > 0.0) {
                hp3.fail(f64::INFINITY, format!("phi(inf) = {} not in (0, inf)", l.value));
            }
            Some(l)
        }
        Err(e) => {
            hp3.fail(1e8, e.to_string());
            None
        }
    };
    let phi_prime0 = match model.phi_prime0() {
        Ok(l) => {
            if !(l.value.is_finite() && l.value > 0.0) {
                hp4.fail(0.0, format!("phi'(0+) = {} not in (0, inf)", l.value));
            }
            Some(l)
        }
        Err(e) => {
            hp4.fail(0.0, e.to_string());
            None
        }
    };

    Ok(HypothesisReport {
        hp1,
        hp2,
        hp3,
        hp4,
        phi_prime0,
        phi_inf,
        sigma_bar: sigma,
    })
}
