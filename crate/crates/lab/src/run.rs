use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use phasefield_core::cohesive::{build_law_table, g_repv, CohesiveLawTable, RepVSettings, TableSettings};
use phasefield_core::envelope::{build_envelope, EnvelopeTable};
use phasefield_core::export::fmt_num;
use phasefield_core::limit::{brittle_dirichlet_limit, dirichlet_limit, sigma_zero_limit, DirichletSolution};
use phasefield_core::solver::{continuation, EnergyBreakdown, EpsResult, Mode, SolveConfig, StartKind, StartSet};
use phasefield_core::{HypothesisReport, ModelSpec, SigmaKind};
use serde::Serialize;

use crate::config::{FamilyName, ModelSection, RunKind, ScenarioConfig, StudySection};
use crate::LabError;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub strict: bool,
    pub seed: u64,
    /// Directory that relative paths in the config are resolved against.
    pub config_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub label: String,
    pub sigma_bar: SigmaKind,
    pub phi_prime0: Option<f64>,
    pub phi_inf: Option<f64>,
    pub psi1: f64,
    pub toughness: f64,
    pub hypotheses_passed: bool,
    pub hypotheses: HypothesisReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawSummary {
    pub label: String,
    pub table: String,
    pub points: usize,
    pub s_max: f64,
    pub g_max: f64,
    pub eta: Option<f64>,
    pub lambda0: Option<f64>,
    pub repaired_points: usize,
    pub capped_points: usize,
    pub repv_table: Option<String>,
    pub repv_max_rel_diff: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub model: String,
    pub load: f64,
    pub eps: f64,
    pub nodes: usize,
    pub energy: EnergyBreakdown,
    pub oracle: f64,
    pub rel_gap: Option<f64>,
    /// Same solve on the reference model (sigma-zero study only).
    pub reference_energy: Option<f64>,
    pub ratio_to_reference: Option<f64>,
    pub winner: StartKind,
    pub outer_iterations: usize,
    pub converged: bool,
    pub trace_monotone: bool,
    pub max_u_residual: f64,
    pub max_strain: f64,
    pub max_strain_at: f64,
    pub min_v: f64,
    pub min_v_at: f64,
    pub field: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: RunKind,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub status: String,
    pub models: Vec<ModelSummary>,
    pub envelope_tables: Vec<String>,
    pub laws: Vec<LawSummary>,
    pub limits: Vec<DirichletSolution>,
    pub convergence_table: Option<String>,
    pub convergence: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    opts: &'a RunOptions,
    report: Report,
}

impl Ctx<'_> {
    fn create(&self, name: &str) -> Result<BufWriter<File>, LabError> {
        Ok(BufWriter::new(File::create(self.opts.out_dir.join(name))?))
    }

    fn summarize(&mut self, label: &str, m: &ModelSpec) -> Result<(), LabError> {
        let hyp = m.validate_hypotheses(256)?;
        let passed = hyp.all_passed();
        if !passed {
            let names: Vec<&str> = hyp.failures().iter().map(|(n, _)| *n).collect();
            let msg = format!("model {label}: {} failed", names.join(", "));
            if self.opts.strict {
                return Err(LabError::Hypothesis(msg));
            }
            warn!("{msg}");
            self.report.warnings.push(msg);
        }
        let psi1 = m.psi(1.0)?;
        self.report.models.push(ModelSummary {
            label: label.to_string(),
            sigma_bar: m.sigma_bar()?.kind,
            phi_prime0: m.phi_prime0().ok().map(|e| e.value),
            phi_inf: m.phi_inf().ok().map(|e| e.value),
            psi1,
            toughness: m.toughness(),
            hypotheses_passed: passed,
            hypotheses: hyp,
        });
        Ok(())
    }

    fn envelope(&mut self, label: &str, m: &ModelSpec, min_t_max: f64) -> Result<EnvelopeTable, LabError> {
        let sec = &self.cfg.envelope;
        let t_max = sec.t_max.unwrap_or(10.0).max(min_t_max);
        let env = build_envelope(m, m.sigma_bar()?.kind, t_max, sec.points)?;
        for w in &env.warnings {
            self.report.warnings.push(format!("envelope {label}: {w}"));
        }
        let name = format!("envelope_{label}.csv");
        env.write_csv(self.create(&name)?)?;
        self.report.envelope_tables.push(name);
        Ok(env)
    }

    fn law(&mut self, label: &str, m: &ModelSpec, grid: &[f64], eta: Option<f64>, repv: bool) -> Result<CohesiveLawTable, LabError> {
        let sec = &self.cfg.law;
        info!("model {label}: cohesive law on {} points", grid.len());
        let settings = TableSettings {
            optimizer: sec.optimizer(),
            eta,
            chunk: sec.chunk,
        };
        let law = build_law_table(m, grid, &settings)?;
        let name = format!("law_{label}.csv");
        law.write_csv(self.create(&name)?)?;
        let capped = law.diagnostics.iter().filter(|d| d.hit_max_iterations).count();
        let mut summary = LawSummary {
            label: label.to_string(),
            table: name,
            points: grid.len(),
            s_max: law.s_max(),
            g_max: law.g.iter().cloned().fold(0.0, f64::max),
            eta: law.eta,
            lambda0: law.lambda0,
            repaired_points: law.diagnostics.iter().filter(|d| d.repaired).count(),
            capped_points: capped,
            repv_table: None,
            repv_max_rel_diff: None,
        };
        if repv {
            info!("model {label}: alternative representation on {} points", grid.len());
            let rs = RepVSettings::default();
            let vals: Vec<f64> = grid
                .iter()
                .map(|&s| g_repv(m, s, &rs).map(|r| r.value))
                .collect::<Result<_, _>>()?;
            let name = format!("repv_{label}.csv");
            let mut w = self.create(&name)?;
            writeln!(w, "s,g,g_repv,rel_diff")?;
            let mut worst: f64 = 0.0;
            for ((&s, &g), &r) in grid.iter().zip(&law.g).zip(&vals) {
                let rel = (r - g).abs() / g.max(1e-6);
                worst = worst.max(rel);
                writeln!(w, "{},{},{},{}", fmt_num(s), fmt_num(g), fmt_num(r), fmt_num(rel))?;
            }
            w.flush()?;
            summary.repv_table = Some(name);
            summary.repv_max_rel_diff = Some(worst);
        }
        self.report.laws.push(summary);
        Ok(law)
    }

    fn solve_config(&self, st: &StudySection, mode: Mode, load: f64) -> SolveConfig {
        SolveConfig {
            tol_rel_energy: st.tol_rel_energy,
            max_outer_iters: st.max_outer_iters,
            starts: StartSet {
                plain: st.plain_start,
                notch: st.notch_start,
                seed: st.seeded_start.then_some(self.opts.seed),
            },
            ..SolveConfig::new(st.eps[0], mode, load)
        }
    }

    fn sweep(&self, m: &ModelSpec, st: &StudySection, mode: Mode, load: f64) -> Result<Vec<EpsResult>, LabError> {
        let cfg = self.solve_config(st, mode, load);
        Ok(continuation(m, &cfg, &st.eps, st.domain(), &st.mesh_rule())?)
    }

    fn push_rows(&mut self, label: &str, load_index: usize, load: f64, oracle: f64, rows: Vec<EpsResult>, fields: bool) -> Result<(), LabError> {
        for (j, r) in rows.into_iter().enumerate() {
            let field = if fields {
                let name = format!("field_{label}_L{load_index}_eps{j}.csv");
                r.state.write_csv(&r.mesh, self.create(&name)?)?;
                Some(name)
            } else {
                None
            };
            let rel_gap = (oracle > 0.0).then(|| (r.energy.total - oracle).abs() / oracle);
            self.report.convergence.push(ConvergenceRow {
                model: label.to_string(),
                load,
                eps: r.eps,
                nodes: r.mesh.nodes,
                energy: r.energy,
                oracle,
                rel_gap,
                reference_energy: None,
                ratio_to_reference: None,
                winner: r.winner,
                outer_iterations: r.outer_iterations,
                converged: r.converged,
                trace_monotone: r.trace_monotone,
                max_u_residual: r.max_u_residual,
                max_strain: r.max_strain,
                max_strain_at: r.max_strain_at,
                min_v: r.min_v,
                min_v_at: r.min_v_at,
                field,
            });
        }
        Ok(())
    }

    fn write_convergence(&mut self) -> Result<(), LabError> {
        let name = "convergence.csv".to_string();
        let mut w = self.create(&name)?;
        writeln!(
            w,
            "eps,energy,oracle,rel_gap,model,load,nodes,elastic,potential,gradient,reference_energy,min_v,max_strain,outer_iterations,converged,trace_monotone"
        )?;
        let opt = |x: Option<f64>| x.map_or_else(String::new, fmt_num);
        for r in &self.report.convergence {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_num(r.eps),
                fmt_num(r.energy.total),
                fmt_num(r.oracle),
                opt(r.rel_gap),
                r.model,
                fmt_num(r.load),
                r.nodes,
                fmt_num(r.energy.elastic),
                fmt_num(r.energy.potential),
                fmt_num(r.energy.gradient),
                opt(r.reference_energy),
                fmt_num(r.min_v),
                fmt_num(r.max_strain),
                r.outer_iterations,
                r.converged,
                r.trace_monotone
            )?;
        }
        w.flush()?;
        self.report.convergence_table = Some(name);
        Ok(())
    }
}

fn default_reference() -> ModelSection {
    ModelSection {
        name: Some("reference".into()),
        family: FamilyName::Cfi,
        lambda: 1.0,
        q: 1.0,
        p: 2.0,
        phi: None,
        phi_scale: None,
        dpot_power: None,
        fhat_csv: None,
        q_csv: None,
        dpot_csv: None,
        phi_csv: None,
        kappa: None,
        gamma: None,
    }
}

/// Executes the scenario and writes every artifact into `opts.out_dir`.
pub fn run(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Report, LabError> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut ctx = Ctx {
        cfg,
        opts,
        report: Report {
            kind: cfg.kind,
            seed: opts.seed,
            config: cfg.clone(),
            status: "ok".into(),
            models: Vec::new(),
            envelope_tables: Vec::new(),
            laws: Vec::new(),
            limits: Vec::new(),
            convergence_table: None,
            convergence: Vec::new(),
            warnings: Vec::new(),
        },
    };
    match cfg.kind {
        RunKind::Law => run_law(&mut ctx)?,
        RunKind::FamilyCompare => run_family_compare(&mut ctx)?,
        RunKind::GammaStudy => run_gamma(&mut ctx)?,
        RunKind::BrittleStudy => run_brittle(&mut ctx)?,
        RunKind::SigmaZeroStudy => run_sigma_zero(&mut ctx)?,
    }
    if !ctx.report.convergence.is_empty() {
        ctx.write_convergence()?;
    }
    if !ctx.report.warnings.is_empty() {
        ctx.report.status = "ok-with-warnings".into();
    }
    write_report(&ctx.report, &opts.out_dir)?;
    Ok(ctx.report)
}

pub fn write_report(report: &Report, dir: &Path) -> Result<(), LabError> {
    let mut w = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn main_model(ctx: &mut Ctx) -> Result<(String, ModelSpec), LabError> {
    let sec = ctx.cfg.model.as_ref().expect("checked at parse time");
    let label = sec.label();
    let m = sec.build(&ctx.opts.config_dir)?;
    ctx.summarize(&label, &m)?;
    Ok((label, m))
}

fn run_law(ctx: &mut Ctx) -> Result<(), LabError> {
    let (label, m) = main_model(ctx)?;
    ctx.envelope(&label, &m, 0.0)?;
    let grid = ctx.cfg.law.grid()?;
    ctx.law(&label, &m, &grid, ctx.cfg.law.eta, ctx.cfg.law.repv)?;
    Ok(())
}

fn run_family_compare(ctx: &mut Ctx) -> Result<(), LabError> {
    let grid = ctx.cfg.law.grid()?;
    for sec in &ctx.cfg.families {
        let label = sec.label();
        let m = sec.build(&ctx.opts.config_dir)?;
        ctx.summarize(&label, &m)?;
        ctx.law(&label, &m, &grid, ctx.cfg.law.eta, ctx.cfg.law.repv)?;
    }
    Ok(())
}

fn study(ctx: &Ctx) -> StudySection {
    ctx.cfg.study.clone().expect("checked at parse time")
}

fn run_gamma(ctx: &mut Ctx) -> Result<(), LabError> {
    let (label, m) = main_model(ctx)?;
    let st = study(ctx);
    let (a, b) = st.domain();
    let ell = b - a;
    let l_max = st.loads.iter().cloned().fold(0.0, f64::max);
    let env = ctx.envelope(&label, &m, 2.0 * l_max / ell)?;
    let law = if l_max > 0.0 {
        let n = ctx.cfg.law.points;
        let grid: Vec<f64> = (1..=n).map(|i| l_max * i as f64 / n as f64).collect();
        Some(ctx.law(&label, &m, &grid, None, false)?)
    } else {
        None
    };
    for (i, &load) in st.loads.iter().enumerate() {
        let oracle = match &law {
            Some(law) => dirichlet_limit(&m, &env, law, load, ell)?,
            None => dirichlet_limit(&m, &env, &CohesiveLawTable::from_samples(vec![1.0], vec![0.0])?, 0.0, ell)?,
        };
        info!("load {load}: limit energy {} ({:?})", oracle.energy, oracle.regime);
        ctx.report.limits.push(oracle);
        let rows = ctx.sweep(&m, &st, Mode::Cohesive, load)?;
        ctx.push_rows(&label, i, load, oracle.energy, rows, st.fields)?;
    }
    Ok(())
}

fn run_brittle(ctx: &mut Ctx) -> Result<(), LabError> {
    let (label, m) = main_model(ctx)?;
    let st = study(ctx);
    let (a, b) = st.domain();
    for (i, &load) in st.loads.iter().enumerate() {
        let oracle = brittle_dirichlet_limit(&m, load, b - a)?;
        info!("load {load}: brittle limit energy {oracle}");
        let rows = ctx.sweep(&m, &st, Mode::Brittle, load)?;
        ctx.push_rows(&label, i, load, oracle, rows, st.fields)?;
    }
    Ok(())
}

fn run_sigma_zero(ctx: &mut Ctx) -> Result<(), LabError> {
    let (label, m) = main_model(ctx)?;
    let st = study(ctx);
    let ref_sec = ctx.cfg.reference.clone().unwrap_or_else(default_reference);
    let ref_label = ref_sec.label();
    let reference = ref_sec.build(&ctx.opts.config_dir)?;
    ctx.summarize(&ref_label, &reference)?;
    for (i, &load) in st.loads.iter().enumerate() {
        let oracle = sigma_zero_limit(&m, load)?;
        let rows = ctx.sweep(&m, &st, Mode::Cohesive, load)?;
        let refs = ctx.sweep(&reference, &st, Mode::Cohesive, load)?;
        let start = ctx.report.convergence.len();
        ctx.push_rows(&label, i, load, oracle, rows, st.fields)?;
        for (row, r) in ctx.report.convergence[start..].iter_mut().zip(&refs) {
            row.reference_energy = Some(r.energy.total);
            row.ratio_to_reference = Some(row.energy.total / r.energy.total);
        }
        ctx.push_rows(&ref_label, i, load, f64::NAN, refs, false)?;
    }
    Ok(())
}
