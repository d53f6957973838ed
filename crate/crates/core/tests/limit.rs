use phasefield_core::cohesive::{build_law_table, CohesiveLawTable, OptimizerSettings, TableSettings};
use phasefield_core::envelope::{build_envelope, EnvelopeTable};
use phasefield_core::limit::{dirichlet_limit, kjump_oracle, limit_energy, Regime};
use phasefield_core::{ModelSpec, SigmaKind};

mod common;
use common::cfi_geodesic;

fn cfi() -> ModelSpec {
    ModelSpec::cfi(1.0, 1.0).unwrap()
}

fn cfi_env(t_max: f64) -> EnvelopeTable {
    build_envelope(&cfi(), SigmaKind::Finite(1.0), t_max, 512).unwrap()
}

fn oracle_law(s_max: f64) -> CohesiveLawTable {
    let s: Vec<f64> = (1..=2000).map(|i| s_max * i as f64 / 2000.0).collect();
    let g = s.iter().map(|&x| cfi_geodesic(x)).collect();
    CohesiveLawTable::from_samples(s, g).unwrap()
}

fn h_star(t: f64) -> f64 {
    if t <= 0.5 {
        t * t
    } else {
        t - 0.25
    }
}

fn dense_limit(load: f64) -> f64 {
    (0..=10_000)
        .map(|i| load * i as f64 / 10_000.0)
        .map(|s| h_star(load - s) + cfi_geodesic(s))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn envelope_of_the_acceptance_model() {
    let env = cfi_env(8.0);
    for i in 0..400 {
        let t = 8.0 * i as f64 / 399.0;
        assert!((env.eval(t) - h_star(t)).abs() <= 1e-6, "{t}");
    }
}

#[test]
fn acceptance_model_matches_three_jump_oracle() {
    let env = cfi_env(4.0);
    let law = oracle_law(4.0);
    let m = cfi();
    let sol = dirichlet_limit(&m, &env, &law, 0.3, 1.0).unwrap();
    assert_eq!(sol.regime, Regime::Elastic);
    assert!((sol.energy - 0.09).abs() <= 1e-9);
    let k3 = kjump_oracle(&env, &law, 0.3, 1.0, 3).unwrap();
    assert!((sol.energy - k3).abs() <= 1e-6);
}

#[test]
fn dirichlet_limit_tracks_dense_scan() {
    let env = cfi_env(8.0);
    let law = oracle_law(8.0);
    let m = cfi();
    let mut prev = 0.0;
    for i in 1..=30 {
        let load = 0.2 * i as f64;
        let sol = dirichlet_limit(&m, &env, &law, load, 1.0).unwrap();
        assert!((sol.energy - dense_limit(load)).abs() <= 1e-6, "{load}");
        assert!(sol.energy <= h_star(load).min(law.eval(load)) + 1e-12);
        assert!(sol.energy >= prev - 1e-12);
        assert!(sol.energy <= m.toughness() + 1e-6);
        prev = sol.energy;
        let p = sol.profile(0.0, 64).unwrap();
        assert!((limit_energy(&p, &env, &law).total - sol.energy).abs() <= 1e-9);
    }
    let far = dirichlet_limit(&m, &env, &law, 6.0, 1.0).unwrap();
    assert_eq!(far.regime, Regime::Saturated);
    let mid = dirichlet_limit(&m, &env, &law, 1.0, 1.0).unwrap();
    assert_eq!(mid.regime, Regime::Cohesive);
}

#[test]
fn longer_bar_scales_the_bulk() {
    let env = cfi_env(8.0);
    let law = oracle_law(8.0);
    let sol = dirichlet_limit(&cfi(), &env, &law, 0.6, 2.0).unwrap();
    assert!((sol.energy - 2.0 * h_star(0.3)).abs() <= 1e-9);
}

#[test]
fn computed_law_reproduces_the_oracle_limit() {
    let m = cfi();
    let grid: Vec<f64> = (1..=12).map(|i| 0.125 * i as f64).collect();
    let settings = TableSettings {
        optimizer: OptimizerSettings {
            levels: vec![25, 50, 100],
            ..Default::default()
        },
        eta: None,
        chunk: 4,
    };
    let law = build_law_table(&m, &grid, &settings).unwrap();
    let env = cfi_env(4.0);
    let sol = dirichlet_limit(&m, &env, &law, 1.5, 1.0).unwrap();
    let oracle = dense_limit(1.5);
    assert!((sol.energy - oracle).abs() <= 5e-3 * oracle, "{} vs {oracle}", sol.energy);
    assert!(dirichlet_limit(&m, &env, &law, 2.0, 1.0).is_err());
}
