use edemand::builtin::estimation_scenario;
use edemand::calibration::mnl::{fit_mnl, mnl_loglik_and_gradient, FitOptions};
use edemand::calibration::sequential::{level1_truth, simulate_level1, LEVEL1_COEFFICIENTS};
use edemand::calibration::{
    fit_sequential, simulate_sequential_data, ChoiceDataset, DatasetBuilder, SimulationDesign,
};
use edemand::rng;
use edemand::{Error, Params, Scenario};
use rand::Rng;

const REPLICATIONS: u64 = 20;

/// Each coefficient is covered by its 2-SE interval in at least 15 of 20 independent
/// replications (nominal 19), every level converges, and every LL trace is non-decreasing.
#[test]
fn sequential_recovery_coverage() {
    let truth = Params::default();
    let scenario: Scenario = estimation_scenario();
    let mut covered: Vec<u32> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for r in 0..REPLICATIONS {
        let design = SimulationDesign {
            seed: 2019 + r,
            ..Default::default()
        };
        let data = simulate_sequential_data(&scenario, &truth, &design).unwrap();
        let fit = fit_sequential(&data, &scenario, &truth, &FitOptions::default()).unwrap();
        assert!(fit.converged(), "replication {r}");
        for level in fit.levels() {
            assert!(level.loglik_trace.windows(2).all(|w| w[1] >= w[0]));
        }
        let checks = fit.compare(&truth);
        if covered.is_empty() {
            covered = vec![0; checks.len()];
            names = checks.iter().map(|c| c.name.clone()).collect();
        }
        for (n, c) in covered.iter_mut().zip(&checks) {
            *n += u32::from(c.z.abs() <= 2.0);
        }
    }
    let total: u32 = covered.iter().sum();
    for (name, n) in names.iter().zip(&covered) {
        println!("{name:28} covered {n}/{REPLICATIONS}");
        assert!(*n >= 15, "{name} covered only {n} of {REPLICATIONS} times");
    }
    let rate = f64::from(total) / (REPLICATIONS as f64 * names.len() as f64);
    println!("overall coverage {rate:.3}");
    assert!(rate >= 0.9);
}

#[test]
fn default_seed_report() {
    let truth = Params::default();
    let scenario: Scenario = estimation_scenario();
    let data = simulate_sequential_data(&scenario, &truth, &SimulationDesign::default()).unwrap();
    let fit = fit_sequential(&data, &scenario, &truth, &FitOptions::default()).unwrap();
    assert!(fit.converged());
    for c in fit.compare(&truth) {
        println!(
            "{:28} est={:+.6} se={:.6} truth={:+.6} z={:+.2}",
            c.name, c.estimate, c.standard_error, c.truth, c.z
        );
        assert!(c.z.abs() < 4.0);
    }
    assert!(fit.params.beta_fee < 0.0);
    assert!((fit.alpha - 12.3).abs() < 3.0 * fit.alpha_standard_error);
}

fn random_dataset<R: Rng>(r: &mut R, k: usize) -> ChoiceDataset {
    let names = (0..k).map(|j| format!("x{j}")).collect();
    let mut b = DatasetBuilder::new(names);
    for i in 0..40 {
        let n_alt = r.random_range(2..=4);
        let ids = (0..n_alt).map(|a| format!("a{a}")).collect();
        let cov = (0..n_alt * k).map(|_| r.random_range(-2.0..2.0)).collect();
        b.push(format!("o{i}"), ids, cov, r.random_range(0..n_alt));
    }
    b.build().unwrap()
}

/// Analytic gradient against central differences with step `1e-5 * max(1, |θ|)`.
#[test]
fn gradient_matches_finite_differences() {
    let mut r = rng::stream(4242, &[]);
    for _ in 0..25 {
        let k = r.random_range(1..=5);
        let data = random_dataset(&mut r, k);
        let beta: Vec<f64> = (0..k).map(|_| r.random_range(-1.5..1.5)).collect();
        let (_, g) = mnl_loglik_and_gradient(&data, &beta).unwrap();
        for j in 0..k {
            let h = 1e-5 * beta[j].abs().max(1.0);
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (mnl_loglik_and_gradient(&data, &up).unwrap().0
                - mnl_loglik_and_gradient(&data, &down).unwrap().0)
                / (2.0 * h);
            let rel = (fd - g[j]).abs() / g[j].abs().max(1.0);
            assert!(rel < 1e-5, "coordinate {j}: analytic {} vs fd {fd}", g[j]);
        }
    }
}

#[test]
fn non_varying_attribute_is_unidentifiable() {
    let design = SimulationDesign {
        observations: 2000,
        ..Default::default()
    };
    let data = simulate_level1(&Params::default(), &design).unwrap();
    let time = LEVEL1_COEFFICIENTS
        .iter()
        .position(|n| *n == "time:daytime-and-evening")
        .unwrap();
    let flat = data
        .map_covariates(data.covariate_names().to_vec(), |_, row| {
            let mut v = row.to_vec();
            v[time] = -1.0;
            Ok(v)
        })
        .unwrap();
    match fit_mnl(&flat, None, &FitOptions::default()) {
        Err(Error::Unidentifiable { coefficients }) => {
            assert_eq!(coefficients, vec!["time:daytime-and-evening".to_string()])
        }
        other => panic!("expected unidentifiable, got {other:?}"),
    }
}

#[test]
fn fee_sign_recovered_on_several_seeds() {
    for seed in [1, 2, 3] {
        let design = SimulationDesign {
            observations: 3000,
            seed,
            ..Default::default()
        };
        let data = simulate_level1(&Params::default(), &design).unwrap();
        let fit = fit_mnl(&data, None, &FitOptions::default()).unwrap();
        let (fee, _) = fit.coefficient("ln_fee_plus_1").unwrap();
        assert!(fee < 0.0);
    }
}

#[test]
fn perturbed_truth_has_lower_likelihood() {
    let truth = Params::default();
    let design = SimulationDesign {
        observations: 10_000,
        ..Default::default()
    };
    let data = simulate_level1(&truth, &design).unwrap();
    let beta = level1_truth(&truth);
    let (at_truth, _) = mnl_loglik_and_gradient(&data, &beta).unwrap();
    for j in 0..beta.len() {
        for d in [-0.5, 0.5] {
            let mut b = beta.clone();
            b[j] += d;
            let (ll, _) = mnl_loglik_and_gradient(&data, &b).unwrap();
            assert!(at_truth >= ll, "coordinate {j} shift {d}");
        }
    }
}

#[test]
fn dataset_csv_round_trip_preserves_fit() {
    let design = SimulationDesign {
        observations: 1500,
        ..Default::default()
    };
    let data = simulate_level1(&Params::default(), &design).unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let back = ChoiceDataset::from_csv(buf.as_slice(), "memory").unwrap();
    let a = fit_mnl(&data, None, &FitOptions::default()).unwrap();
    let b = fit_mnl(&back, None, &FitOptions::default()).unwrap();
    for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
        assert!((x - y).abs() < 1e-9);
    }
}
