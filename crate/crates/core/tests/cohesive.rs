use phasefield_core::cohesive::{
    build_law_table, g_estimate, g_hat, g_pair, g_repv, g_value, lambda0, profile_energy,
    OptimizerSettings, ProfilePair, RepVSettings, TableSettings,
};
use phasefield_core::lattice::{lattice_g, LatticeSettings};
use phasefield_core::{Domain, ModelSpec, ScalarFnSpec};

mod common;
use common::cfi_geodesic;

fn cfi() -> ModelSpec {
    ModelSpec::cfi(1.0, 1.0).unwrap()
}

fn quick() -> OptimizerSettings {
    OptimizerSettings {
        levels: vec![25, 50, 100, 200],
        ..Default::default()
    }
}

#[test]
fn geodesic_oracle_shape() {
    // below the explicit bound s - s^2/4, concave, unit slope at zero
    let xs: Vec<f64> = (1..300).map(|i| 0.01 * i as f64).collect();
    let g: Vec<f64> = xs.iter().map(|&s| cfi_geodesic(s)).collect();
    for (s, v) in xs.iter().zip(&g) {
        assert!(*v <= s - s * s / 4.0 + 1e-12 || *s >= 2.0);
        assert!(*v <= 1.0);
    }
    for w in g.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] <= 1e-12);
    }
    assert!((cfi_geodesic(1e-6) / 1e-6 - 1.0).abs() < 1e-4);
    assert!((cfi_geodesic(std::f64::consts::PI - 1e-9) - 1.0).abs() < 1e-6);
}

#[test]
fn g_matches_geodesic_oracle() {
    let m = cfi();
    let cfg = OptimizerSettings::default();
    for &s in &[0.05, 0.4, 1.3, 2.5, 4.0] {
        let v = g_value(&m, s, &cfg).unwrap();
        let o = cfi_geodesic(s);
        assert!((v - o).abs() <= 1e-4 * o, "s = {s}: {v} vs {o}");
        assert!(v <= g_hat(&m, s).unwrap() + 1e-9);
    }
}

#[test]
fn g_matches_lattice_oracle() {
    let m = cfi();
    let v = g_value(&m, 0.05, &OptimizerSettings::default()).unwrap();
    let lat = lattice_g(&m, 0.05, &LatticeSettings::default()).unwrap();
    assert!((v - lat).abs() <= 0.03 * lat, "{v} vs {lat}");
}

#[test]
fn winner_profile_is_admissible_and_reproduces_value() {
    let m = ModelSpec::cfi(0.8, 1.0).unwrap();
    let e = g_estimate(&m, 0.7, &quick(), None).unwrap();
    assert!(e.profile.is_admissible(0.7, 0.0));
    let again = profile_energy(&m, &e.profile).unwrap();
    assert!((again - e.value).abs() < 1e-12 * e.value.max(1.0));
}

#[test]
fn phi_scaling_transports_the_law() {
    let base = cfi();
    let c = 4.0;
    let scaled = cfi().with_phi(ScalarFnSpec::min_with_one().scaled(c));
    for &s in &[0.1, 0.6] {
        let a = g_value(&scaled, s, &quick()).unwrap();
        let b = g_value(&base, c.sqrt() * s, &quick()).unwrap();
        assert!((a - b).abs() <= 0.01 * b, "{a} {b}");
    }
}

#[test]
fn lipschitz_and_subadditive_samples() {
    let m = cfi();
    let cfg = quick();
    let s = [0.2, 0.5, 0.7];
    let g: Vec<f64> = s.iter().map(|&x| g_value(&m, x, &cfg).unwrap()).collect();
    let tol = 1e-3;
    assert!(g[2] <= g[0] + g[1] + 2.0 * tol);
    assert!((g[1] - g[0]).abs() <= (s[1] - s[0]) + 2.0 * tol);
    assert!((g[2] - g[1]).abs() <= (s[2] - s[1]) + 2.0 * tol);
}

#[test]
fn infinite_sigma_bracket() {
    let m = ModelSpec::cfi(1.0, 2.0).unwrap();
    for &s in &[1e-3, 1e-2] {
        let r = g_value(&m, s, &quick()).unwrap() / g_hat(&m, s).unwrap();
        assert!(r >= 0.5_f64.sqrt() - 0.05 && r <= 1.02, "{s}: {r}");
    }
}

#[test]
fn relaxed_law_sandwich() {
    let m = cfi();
    let cfg = quick();
    for &eta in &[0.0, 1e-2, 1.0] {
        let (g, ge) = g_pair(&m, 0.8, eta, &cfg, None).unwrap();
        assert!(ge.value <= g.value);
        assert!(g.value <= ge.value + 2.0 * lambda0(&m, eta) * eta + 1e-6);
        assert!(ge.profile.is_admissible(0.8, eta));
        if eta == 0.0 {
            assert_eq!(g.value, ge.value);
        }
    }
}

#[test]
fn repv_cross_check() {
    let m = cfi();
    for &s in &[0.3, 1.5] {
        let r = g_repv(&m, s, &RepVSettings::default()).unwrap();
        let o = cfi_geodesic(s);
        assert!((r.value - o).abs() <= 0.02 * o, "{s}: {r:?} vs {o}");
        assert!(r.value <= 1.0 + 1e-6);
    }
}

#[test]
fn wu_model_law_is_bounded_and_saturates() {
    let m = ModelSpec::wu(2.0).unwrap();
    let cfg = quick();
    let sat = g_value(&m, 50.0, &cfg).unwrap();
    assert!(sat >= 0.98 * m.toughness() && sat <= m.toughness() + 1e-6);
    let v = g_value(&m, 0.3, &cfg).unwrap();
    assert!(v <= 0.3 + 1e-9);
}

#[test]
fn table_is_monotone_and_thread_independent() {
    let m = ModelSpec::cfi(1.0, 1.0)
        .unwrap()
        .with_dpot(ScalarFnSpec::quadratic(Domain::UnitInterval));
    let grid: Vec<f64> = (1..=10).map(|i| 0.35 * i as f64).collect();
    let settings = TableSettings {
        optimizer: OptimizerSettings {
            levels: vec![25, 50, 100],
            ..Default::default()
        },
        eta: Some(1e-2),
        chunk: 4,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| build_law_table(&m, &grid, &settings).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    for w in a.g.windows(2) {
        assert!(w[1] >= w[0] - 1e-6);
    }
    let ge = a.g_eta.as_ref().unwrap();
    for i in 0..grid.len() {
        assert!(ge[i] <= a.g[i] && a.g[i] <= a.g_hat[i] + 1e-9);
    }
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), grid.len() + 1);
}

#[test]
fn plateau_start_is_admissible() {
    let p = ProfilePair::plateau(30, 0.4, 0.25);
    assert!(p.is_admissible(0.4, 0.0));
    assert!(ProfilePair::new(vec![0.0, 1.0], vec![1.0, 1.5]).is_err());
}
