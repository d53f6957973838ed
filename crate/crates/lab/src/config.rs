//! Scenario files: flat TOML sections describing a model and one run kind.

use std::path::{Path, PathBuf};

use phasefield_core::cohesive::OptimizerSettings;
use phasefield_core::solver::{MeshRule, Mode};
use phasefield_core::{Domain, ModelSpec, ScalarFnSpec, ScalingRule};
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Law,
    GammaStudy,
    BrittleStudy,
    SigmaZeroStudy,
    FamilyCompare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Cfi,
    Wu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiName {
    Min,
    Rational,
}

/// A built-in family with optional overrides of single ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub name: Option<String>,
    pub family: FamilyName,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default)]
    pub phi: Option<PhiName>,
    #[serde(default)]
    pub phi_scale: Option<f64>,
    /// Replaces the damage potential by `t^dpot_power`.
    #[serde(default)]
    pub dpot_power: Option<f64>,
    #[serde(default)]
    pub fhat_csv: Option<PathBuf>,
    #[serde(default)]
    pub q_csv: Option<PathBuf>,
    #[serde(default)]
    pub dpot_csv: Option<PathBuf>,
    #[serde(default)]
    pub phi_csv: Option<PathBuf>,
    /// `[coeff, exponent]` of `kappa_eps`.
    #[serde(default)]
    pub kappa: Option<[f64; 2]>,
    /// `[coeff, exponent]` of `gamma_eps`.
    #[serde(default)]
    pub gamma: Option<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl ModelSection {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| match self.family {
            FamilyName::Cfi => "cfi".into(),
            FamilyName::Wu => "wu".into(),
        })
    }

    /// Builds the model; CSV paths are resolved against `base`.
    pub fn build(&self, base: &Path) -> Result<ModelSpec, LabError> {
        let mut m = match self.family {
            FamilyName::Cfi => ModelSpec::cfi(self.lambda, self.q)?,
            FamilyName::Wu => ModelSpec::wu(self.p)?,
        };
        if let Some(phi) = self.phi {
            m.phi = match phi {
                PhiName::Min => ScalarFnSpec::min_with_one(),
                PhiName::Rational => ScalarFnSpec::rational(),
            };
        }
        if let Some(p) = self.dpot_power {
            m.dpot = ScalarFnSpec::power(p, Domain::UnitInterval);
        }
        let load = |p: &Path, domain| -> Result<ScalarFnSpec, LabError> {
            let path = base.join(p);
            if !path.exists() {
                return Err(LabError::Config(format!("tabulated file {} does not exist", path.display())));
            }
            let table = phasefield_core::scalar::Table::from_csv_path(&path)?;
            Ok(ScalarFnSpec::tabulated(table.samples().collect(), domain)?)
        };
        if let Some(p) = &self.fhat_csv {
            m.fhat = load(p, Domain::UnitInterval)?;
        }
        if let Some(p) = &self.q_csv {
            m.q = load(p, Domain::UnitInterval)?;
        }
        if let Some(p) = &self.dpot_csv {
            m.dpot = load(p, Domain::UnitInterval)?;
        }
        if let Some(p) = &self.phi_csv {
            m.phi = load(p, Domain::NonnegHalfline)?;
        }
        if let Some(c) = self.phi_scale {
            m.phi = m.phi.scaled(c);
        }
        let rule = |r: [f64; 2]| ScalingRule {
            coeff: r[0],
            exponent: r[1],
        };
        Ok(ModelSpec::new(
            m.fhat,
            m.q,
            m.dpot,
            m.phi,
            self.kappa.map(rule).unwrap_or(m.kappa),
            self.gamma.map(rule).unwrap_or(m.gamma),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSection {
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "envelope_points")]
    pub points: usize,
}

fn envelope_points() -> usize {
    512
}

impl Default for EnvelopeSection {
    fn default() -> Self {
        EnvelopeSection {
            t_max: None,
            points: envelope_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    #[serde(default = "law_s_max")]
    pub s_max: f64,
    /// Smallest opening for log spacing.
    #[serde(default = "law_s_min")]
    pub s_min: f64,
    #[serde(default = "law_points")]
    pub points: usize,
    #[serde(default = "law_spacing")]
    pub spacing: Spacing,
    /// Extra openings merged into the grid.
    #[serde(default)]
    pub extra: Vec<f64>,
    /// Relaxation for the `g_eta` column.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub levels: Option<Vec<usize>>,
    #[serde(default = "law_chunk")]
    pub chunk: usize,
    /// Adds the alternative-representation column.
    #[serde(default)]
    pub repv: bool,
}

fn law_s_max() -> f64 {
    4.0
}

fn law_s_min() -> f64 {
    1e-3
}

fn law_points() -> usize {
    200
}

fn law_spacing() -> Spacing {
    Spacing::Linear
}

fn law_chunk() -> usize {
    8
}

impl Default for LawSection {
    fn default() -> Self {
        LawSection {
            s_max: law_s_max(),
            s_min: law_s_min(),
            points: law_points(),
            spacing: law_spacing(),
            extra: Vec::new(),
            eta: None,
            levels: None,
            chunk: law_chunk(),
            repv: false,
        }
    }
}

impl LawSection {
    pub fn grid(&self) -> Result<Vec<f64>, LabError> {
        if !(self.s_max > 0.0) || self.points < 2 {
            return Err(LabError::Config("law grid needs s_max > 0 and at least 2 points".into()));
        }
        let n = self.points;
        let mut g: Vec<f64> = match self.spacing {
            Spacing::Linear => (1..=n).map(|i| self.s_max * i as f64 / n as f64).collect(),
            Spacing::Log => {
                if !(self.s_min > 0.0 && self.s_min < self.s_max) {
                    return Err(LabError::Config("log spacing needs 0 < s_min < s_max".into()));
                }
                phasefield_core::minimize::logspace(self.s_min, self.s_max, n)
            }
        };
        for &e in &self.extra {
            if !(e > 0.0 && e.is_finite()) {
                return Err(LabError::Config(format!("extra opening {e} must be positive")));
            }
            g.push(e);
        }
        g.sort_by(f64::total_cmp);
        g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        Ok(g)
    }

    pub fn optimizer(&self) -> OptimizerSettings {
        let mut o = OptimizerSettings::default();
        if let Some(l) = &self.levels {
            o.levels = l.clone();
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Boundary displacements `u(b) = L`, one sub-run each.
    pub loads: Vec<f64>,
    #[serde(default)]
    pub domain: Option<[f64; 2]>,
    pub eps: Vec<f64>,
    /// Elements per `eps`; ignored when `nodes` is set.
    #[serde(default = "elements_per_eps")]
    pub elements_per_eps: f64,
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default = "tol_rel_energy")]
    pub tol_rel_energy: f64,
    #[serde(default = "max_outer_iters")]
    pub max_outer_iters: usize,
    #[serde(default = "yes")]
    pub plain_start: bool,
    #[serde(default = "yes")]
    pub notch_start: bool,
    #[serde(default = "yes")]
    pub seeded_start: bool,
    /// Save `x,u,v` per solve.
    #[serde(default = "yes")]
    pub fields: bool,
}

fn elements_per_eps() -> f64 {
    10.0
}

fn tol_rel_energy() -> f64 {
    1e-8
}

fn max_outer_iters() -> usize {
    2000
}

fn yes() -> bool {
    true
}

impl StudySection {
    pub fn domain(&self) -> (f64, f64) {
        let d = self.domain.unwrap_or([0.0, 1.0]);
        (d[0], d[1])
    }

    pub fn mesh_rule(&self) -> MeshRule {
        match self.nodes {
            Some(nodes) => MeshRule::Fixed { nodes },
            None => MeshRule::PerEps {
                elements_per_eps: self.elements_per_eps,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: RunKind,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<ModelSection>,
    /// Comparison model of the sigma-zero study (default: CFI, lambda = q = 1).
    #[serde(default)]
    pub reference: Option<ModelSection>,
    #[serde(default)]
    pub families: Vec<ModelSection>,
    #[serde(default)]
    pub envelope: EnvelopeSection,
    #[serde(default)]
    pub law: LawSection,
    #[serde(default)]
    pub study: Option<StudySection>,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), LabError> {
        let need_model = !matches!(self.kind, RunKind::FamilyCompare);
        if need_model && self.model.is_none() {
            return Err(LabError::Config(format!("{:?} runs need a [model] section", self.kind)));
        }
        if matches!(self.kind, RunKind::FamilyCompare) && self.families.is_empty() {
            return Err(LabError::Config("family-compare needs at least one [[families]] entry".into()));
        }
        let mut labels: Vec<String> = self.families.iter().map(|f| f.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(LabError::Config("family labels must be distinct; set `name`".into()));
        }
        if matches!(self.kind, RunKind::GammaStudy | RunKind::BrittleStudy | RunKind::SigmaZeroStudy) {
            let Some(st) = &self.study else {
                return Err(LabError::Config(format!("{:?} runs need a [study] section", self.kind)));
            };
            if st.eps.is_empty() || st.eps.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(LabError::Config("eps list must be non-empty and strictly decreasing".into()));
            }
            if st.loads.is_empty() || st.loads.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                return Err(LabError::Config("loads must be a non-empty list of values >= 0".into()));
            }
            let (a, b) = st.domain();
            if !(b > a) {
                return Err(LabError::Config("domain needs b > a".into()));
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        match self.kind {
            RunKind::BrittleStudy => Mode::Brittle,
            _ => Mode::Cohesive,
        }
    }
}
