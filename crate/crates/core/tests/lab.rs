use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remle_core::lab::{
    averaged_limits, doubling_schedule, fisher_info_mc, kl_mc, run_consistency_experiment,
    run_moment_continuity_probe, run_normality_experiment, ContinuityConfig, DesignFamily,
    ExperimentConfig, LimitsConfig,
};
use remle_core::model::converging_points;
use remle_core::{builtin_model, Error, FitOptions, ParamSpace, Subject, Theta};

fn theta(mu: f64, omega2: f64) -> Theta {
    Theta::new(mu, omega2).unwrap()
}

/// KL between the laws of `U` under two parameters in the unit model.
fn unit_kl(t0: Theta, t1: Theta, t_end: f64) -> f64 {
    let v0 = t_end * (1.0 + t0.omega2 * t_end);
    let v1 = t_end * (1.0 + t1.omega2 * t_end);
    let dm = (t1.mu - t0.mu) * t_end;
    0.5 * (v0 / v1 + dm * dm / v1 - 1.0 + (v1 / v0).ln())
}

#[test]
fn kl_matches_gaussian_oracle() {
    let unit = builtin_model("unit").unwrap();
    for (k, (t0, t1, t_end)) in [
        (theta(1.0, 0.5), theta(0.5, 1.0), 1.0),
        (theta(0.0, 0.1), theta(0.3, 0.1), 2.0),
        (theta(-1.0, 2.0), theta(-1.0, 0.2), 0.5),
    ]
    .into_iter()
    .enumerate()
    {
        let est = kl_mc(&unit, t0, t1, 0.0, t_end, t_end / 20.0, 20_000, k as u64).unwrap();
        let exact = unit_kl(t0, t1, t_end);
        assert!(
            (est.value - exact).abs() <= 4.0 * est.mc_se,
            "{} vs {exact} (se {})",
            est.value,
            est.mc_se
        );
    }
}

#[test]
fn kl_is_nonnegative_up_to_noise() {
    let models = ["unit", "linear-drift", "bounded-ratio"];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000u64 {
        let model = builtin_model(models[i as usize % 3]).unwrap();
        let t0 = theta(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        let t1 = theta(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        let x0 = rng.random_range(-1.0..1.0);
        let est = kl_mc(&model, t0, t1, x0, 1.0, 0.1, 100, i).unwrap();
        assert!(est.value >= -3.0 * est.mc_se, "{est:?}");
    }
}

#[test]
fn information_estimates_are_psd() {
    let models = ["unit", "linear-drift", "bounded-ratio"];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..60u64 {
        let model = builtin_model(models[i as usize % 3]).unwrap();
        let th = theta(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.5));
        let est =
            fisher_info_mc(&model, th, rng.random_range(-1.0..1.0), 1.0, 0.05, 200, i).unwrap();
        let m = est.matrix;
        assert_eq!(m[(0, 1)], m[(1, 0)]);
        let eig = m.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-8, "{m}");
    }
}

#[test]
fn averaged_information_tracks_design_average() {
    let unit = builtin_model("unit").unwrap();
    let t0 = theta(1.0, 0.5);
    let n_max = 32;
    let points = converging_points(n_max, 0.0, 1.0, 1.0, 1.0);
    let table = averaged_limits(&LimitsConfig {
        model: unit,
        theta0: t0,
        theta: theta(0.5, 1.0),
        points: points.clone(),
        limit: Subject {
            x0: 0.0,
            t_end: 1.0,
        },
        dt: 0.01,
        replicates: 2000,
        limit_replicates: 2000,
        n_schedule: doubling_schedule(n_max),
        seed: 10,
    })
    .unwrap();
    for row in &table.rows {
        let exact: f64 = points[..row.n]
            .iter()
            .map(|p| p.t_end / (1.0 + t0.omega2 * p.t_end))
            .sum::<f64>()
            / row.n as f64;
        let z = (row.avg_info[(0, 0)] - exact).abs() / row.avg_info_se[(0, 0)];
        assert!(
            z <= 4.0,
            "n = {}: {} vs {exact}",
            row.n,
            row.avg_info[(0, 0)]
        );
    }
    assert!(table.rows[0].info_gap[(0, 0)] > table.rows.last().unwrap().info_gap[(0, 0)]);
}

#[test]
fn constant_continuity_sequence_shows_noise_only() {
    let cfg = ContinuityConfig {
        model: builtin_model("linear-drift").unwrap(),
        theta0: theta(0.5, 0.3),
        x_tilde: 0.5,
        t_tilde: 1.0,
        a: 0.0,
        b: 0.0,
        psi: 0.5,
        xi: 1.0,
        powers: vec![1, 2],
        m_schedule: vec![1, 2, 4],
        replicates: 4000,
        dt: 0.02,
        seed: 11,
    };
    let rows = run_moment_continuity_probe(&cfg).unwrap();
    for r in rows.iter().filter(|r| r.m.is_some()) {
        assert_eq!((r.x0, r.t_end), (0.5, 1.0));
        assert!(r.gap <= 4.0 * r.gap_se, "{r:?}");
    }
}

fn small_experiment() -> ExperimentConfig {
    ExperimentConfig {
        model: builtin_model("unit").unwrap(),
        theta0: theta(1.0, 0.5),
        space: ParamSpace::new(-5.0, 5.0, 0.0, 5.0).unwrap(),
        design: DesignFamily::Iid {
            x0: 0.0,
            t_end: 1.0,
        },
        dt: 0.05,
        n_schedule: vec![20, 80],
        replicates: 50,
        info_replicates: 200,
        seed: 12,
        fit: FitOptions::default(),
    }
}

#[test]
fn experiments_validate_their_inputs() {
    let mut cfg = small_experiment();
    cfg.theta0 = theta(1.0, 0.0);
    assert!(matches!(
        run_consistency_experiment(&cfg),
        Err(Error::ThetaNotInterior(_))
    ));
    let mut cfg = small_experiment();
    cfg.replicates = 0;
    assert_eq!(
        run_normality_experiment(&cfg).unwrap_err(),
        Error::EmptyExperiment
    );
}

#[test]
fn experiments_are_reproducible() {
    let cfg = small_experiment();
    let a = run_consistency_experiment(&cfg).unwrap();
    let b = run_consistency_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 100);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(
        run_consistency_experiment(&other).unwrap().records,
        a.records
    );
}

#[test]
fn diverging_replicates_fail_the_experiment() {
    let mut cfg = small_experiment();
    cfg.model = builtin_model("linear-drift").unwrap();
    cfg.design = DesignFamily::Iid {
        x0: 1.0,
        t_end: 1.0,
    };
    cfg.theta0 = theta(1e200, 1.0);
    cfg.space = ParamSpace::new(-1e300, 1e300, 0.0, 5.0).unwrap();
    assert!(matches!(
        run_consistency_experiment(&cfg),
        Err(Error::ExperimentFailed { .. })
    ));
}
