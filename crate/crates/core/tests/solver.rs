use phasefield_core::solver::{
    alternate_minimize, continuation, energy, multistart_minimize, u_step, v_gradient, v_step,
    DiscreteState, Mesh1D, MeshRule, Mode, SolveConfig,
};
use phasefield_core::{ModelSpec, ScalingRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::cfi_geodesic;

fn cfi() -> ModelSpec {
    ModelSpec::cfi(1.0, 1.0).unwrap()
}

/// `min_s h**(L - s) + g(s)` on a unit bar, by dense scan, with
/// `h** = t^2` up to `1/2` and `t - 1/4` beyond (phi = 1 ^ t, sigma = 1).
fn cfi_limit(load: f64) -> f64 {
    let h = |t: f64| if t <= 0.5 { t * t } else { t - 0.25 };
    (0..=20_000)
        .map(|i| load * i as f64 / 20_000.0)
        .map(|s| h(load - s) + cfi_geodesic(s))
        .fold(f64::INFINITY, f64::min)
}

fn random_state(mesh: &Mesh1D, load: f64, rng: &mut ChaCha8Rng) -> DiscreteState {
    let mut s = DiscreteState::intact(mesh, load);
    for i in 1..mesh.nodes - 1 {
        s.u[i] += rng.gen_range(-0.05..0.05);
        s.v[i] = rng.gen_range(0.05..0.95);
    }
    s
}

#[test]
fn breakdown_sums_to_total() {
    let mesh = Mesh1D::new(0.0, 1.0, 61).unwrap();
    let cfg = SolveConfig::new(0.05, Mode::Cohesive, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let s = random_state(&mesh, 0.7, &mut rng);
        let e = energy(&mesh, &s, &cfi(), &cfg).unwrap();
        assert!(e.elastic >= 0.0 && e.potential >= 0.0 && e.gradient >= 0.0);
        assert!((e.elastic + e.potential + e.gradient - e.total).abs() <= 1e-12 * e.total);
    }
}

#[test]
fn v_gradient_matches_central_differences() {
    let models = [
        (cfi(), Mode::Cohesive),
        (ModelSpec::cfi(0.7, 2.0).unwrap(), Mode::Cohesive),
        (cfi(), Mode::Brittle),
        (ModelSpec::wu(2.5).unwrap(), Mode::Cohesive),
    ];
    let mesh = Mesh1D::new(0.0, 1.0, 41).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let (m, mode) = &models[k % models.len()];
        let cfg = SolveConfig::new(0.05, *mode, 0.6);
        let s = random_state(&mesh, 0.6, &mut rng);
        let g = v_gradient(&mesh, &s, m, &cfg).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..mesh.nodes - 1 {
            let dh = 1e-6;
            let mut p = s.clone();
            p.v[i] += dh;
            let mut q = s.clone();
            q.v[i] -= dh;
            let fd = (energy(&mesh, &p, m, &cfg).unwrap().total - energy(&mesh, &q, m, &cfg).unwrap().total) / (2.0 * dh);
            num += (fd - g[i]).powi(2);
            den += g[i].powi(2);
        }
        worst = worst.max((num / den).sqrt());
    }
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn u_step_is_exact_and_antisymmetric() {
    let mesh = Mesh1D::new(0.0, 1.0, 101).unwrap();
    let cfg = SolveConfig::new(0.05, Mode::Cohesive, 0.8);
    let m = cfi();
    let mut s = DiscreteState::intact(&mesh, 0.8);
    for i in 0..mesh.nodes {
        let z = (mesh.x(i) - 0.5) / 0.1;
        s.v[i] = 1.0 - 0.8 * (-z * z).exp();
    }
    s.v[0] = 1.0;
    s.v[100] = 1.0;
    let rep = u_step(&mesh, &mut s, &m, &cfg).unwrap();
    assert!(rep.residual <= 1e-10 * rep.scale);
    for i in 0..mesh.nodes {
        let j = mesh.nodes - 1 - i;
        assert!((s.u[i] + s.u[j] - 0.8).abs() <= 1e-10, "{i}");
    }
    let e0 = energy(&mesh, &s, &m, &cfg).unwrap().total;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let mut d: Vec<f64> = (0..mesh.nodes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        d[0] = 0.0;
        d[100] = 0.0;
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut p = s.clone();
        for (u, di) in p.u.iter_mut().zip(&d) {
            *u += 1e-6 * di / norm;
        }
        assert!(energy(&mesh, &p, &m, &cfg).unwrap().total >= e0 - 1e-12);
    }
}

#[test]
fn v_step_never_increases_energy() {
    let mesh = Mesh1D::new(0.0, 1.0, 81).unwrap();
    let cfg = SolveConfig::new(0.05, Mode::Cohesive, 1.2);
    let m = cfi();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let mut s = random_state(&mesh, 1.2, &mut rng);
        let before = energy(&mesh, &s, &m, &cfg).unwrap().total;
        let rep = v_step(&mesh, &mut s, &m, &cfg).unwrap();
        let after = energy(&mesh, &s, &m, &cfg).unwrap().total;
        assert!(after <= before + 1e-12);
        assert!((rep.energy - after).abs() <= 1e-12 * after);
        assert_eq!((s.v[0], s.v[80]), (1.0, 1.0));
    }
}

#[test]
fn first_point_of_the_convergence_curve() {
    let oracle = cfi_limit(0.3);
    assert!((oracle - 0.09).abs() < 1e-12);
    let mesh = Mesh1D::new(0.0, 1.0, 101).unwrap();
    let r = multistart_minimize(&mesh, None, &cfi(), &SolveConfig::new(0.1, Mode::Cohesive, 0.3)).unwrap();
    assert!((r.best.energy.total - oracle).abs() <= 0.1 * oracle);
    assert!(r.best.trace.is_monotone(1e-12));
}

#[test]
fn elastic_regime_keeps_material_sound() {
    let cfg = SolveConfig::new(0.1, Mode::Cohesive, 0.3);
    let rows = continuation(&cfi(), &cfg, &[0.1, 0.05, 0.025], (0.0, 1.0), &MeshRule::PerEps { elements_per_eps: 10.0 }).unwrap();
    for r in &rows {
        assert!(r.min_v > 0.5, "{}: {}", r.eps, r.min_v);
        assert!(r.trace_monotone && r.max_u_residual <= 1e-10);
    }
}

#[test]
fn fracture_regime_localizes() {
    let m = cfi().with_kappa(ScalingRule { coeff: 1.0, exponent: 4.0 });
    let cfg = SolveConfig::new(0.1, Mode::Brittle, 2.0);
    let rows = continuation(&m, &cfg, &[0.1, 0.05, 0.025], (0.0, 1.0), &MeshRule::PerEps { elements_per_eps: 10.0 }).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].min_v < w[0].min_v);
    }
    assert!(rows.last().unwrap().min_v < 0.05);
    // the crack carries the largest strain
    let last = rows.last().unwrap();
    assert!((last.max_strain_at - last.min_v_at).abs() <= 2.0 * last.eps);
}

#[test]
fn cohesive_energy_approaches_the_limit_from_above() {
    let load = 1.0;
    let oracle = cfi_limit(load);
    let cfg = SolveConfig::new(0.1, Mode::Cohesive, load);
    let rows = continuation(&cfi(), &cfg, &[0.1, 0.05, 0.025], (0.0, 1.0), &MeshRule::PerEps { elements_per_eps: 10.0 }).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].energy.total < w[0].energy.total);
    }
    for r in &rows {
        assert!(r.energy.total > oracle, "{} vs {oracle}", r.energy.total);
    }
}

#[test]
fn mesh_refinement_changes_little() {
    let m = cfi();
    let cfg = SolveConfig::new(0.05, Mode::Cohesive, 1.0);
    let coarse = Mesh1D::new(0.0, 1.0, 201).unwrap();
    let fine = Mesh1D::new(0.0, 1.0, 401).unwrap();
    let a = multistart_minimize(&coarse, None, &m, &cfg).unwrap().best.energy.total;
    let b = multistart_minimize(&fine, None, &m, &cfg).unwrap().best.energy.total;
    assert!((a - b).abs() <= 0.005 * b, "{a} {b}");
}

#[test]
fn alternate_minimization_from_zero_load() {
    let mesh = Mesh1D::new(0.0, 1.0, 51).unwrap();
    let mut s = DiscreteState::intact(&mesh, 0.0);
    s.v[25] = 0.2;
    let r = alternate_minimize(&mesh, s, &cfi(), &SolveConfig::new(0.1, Mode::Cohesive, 0.0)).unwrap();
    assert!(r.converged);
    assert!(r.energy.total < 1e-6);
    assert!(r.state.u.iter().all(|&u| u == 0.0));
}

#[test]
fn continuation_rejects_bad_input() {
    let cfg = SolveConfig::new(0.1, Mode::Cohesive, 0.3);
    let fixed = MeshRule::Fixed { nodes: 201 };
    assert!(continuation(&cfi(), &cfg, &[0.1, 0.05, 0.01], (0.0, 1.0), &fixed).is_err());
    assert!(continuation(&cfi(), &cfg, &[0.05, 0.1], (0.0, 1.0), &fixed).is_err());
    assert!(continuation(&cfi(), &cfg, &[], (0.0, 1.0), &fixed).is_err());
}

#[test]
fn multistart_is_thread_independent() {
    let mesh = Mesh1D::new(0.0, 1.0, 201).unwrap();
    let cfg = SolveConfig::new(0.05, Mode::Cohesive, 1.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| multistart_minimize(&mesh, None, &cfi(), &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn field_csv_has_one_row_per_node() {
    let mesh = Mesh1D::new(0.0, 2.0, 11).unwrap();
    let mut buf = Vec::new();
    DiscreteState::intact(&mesh, 1.0).write_csv(&mesh, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("x,u,v"));
    assert_eq!(text.lines().count(), 12);
    assert!(!text.contains('\r'));
}
