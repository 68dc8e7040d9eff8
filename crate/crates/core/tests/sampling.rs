use edemand::builtin;
use edemand::choice::{probabilities, sample_choice};
use edemand::model::{option_choice, DemandModel};
use edemand::population::{Population, SyntheticPopulationSpec};
use edemand::rng;
use edemand::Params;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p_value(counts: &[u64], p: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(p)
        .map(|(&c, &pi)| {
            let e = n as f64 * pi;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((p.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn sampled_choices_follow_probabilities() {
    let u = [0.3, -1.2, 0.0, 2.1, -0.4];
    let p = probabilities(&u).unwrap();
    let mut r = rng::stream(11, &[]);
    let mut counts = [0u64; 5];
    for _ in 0..100_000 {
        counts[sample_choice(&u, &mut r).unwrap()] += 1;
    }
    assert!(chi_square_p_value(&counts, p.as_slice()) > 1e-3);
}

#[test]
fn sampled_options_follow_option_level() {
    let oc = option_choice(&builtin::s2(), 40.0, &Params::default()).unwrap();
    let mut r = rng::stream(12, &[]);
    let mut counts = [0u64; 3];
    for _ in 0..100_000 {
        counts[oc.distribution.sample(&mut r)] += 1;
    }
    assert!(chi_square_p_value(&counts, oc.distribution.as_slice()) > 1e-3);
}

struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn new() -> Self {
        Self {
            n: 0.0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }
    fn mean(&self) -> f64 {
        self.sum / self.n
    }
    fn standard_error(&self) -> f64 {
        let m = self.mean();
        ((self.sum_sq / self.n - m * m) / (self.n - 1.0)).sqrt()
    }
}

/// Sampled household-weeks against exact expectations: weekly total value, weekly order
/// count, and the order share of each delivery option.
#[test]
fn monte_carlo_agrees_with_expectation() {
    let population = Population::synthetic(&SyntheticPopulationSpec::default()).unwrap();
    let scenario = builtin::s2();
    let model = DemandModel::new(&scenario, &Params::default()).unwrap();
    let n_opt = scenario.options.len();
    let weeks_per_household = 100_000usize.div_ceil(population.len());

    let mut tv = Moments::new();
    let mut orders = Moments::new();
    let mut option_counts: Vec<Vec<f64>> = Vec::new();
    let (mut e_tv, mut e_f) = (0.0, 0.0);
    let mut e_weights = vec![0.0; n_opt];
    for (h_idx, h) in population.households.iter().enumerate() {
        let demand = model.household(h).unwrap();
        let res = demand.result();
        e_tv += res.expected_tv * weeks_per_household as f64;
        e_f += res.expected_frequency * weeks_per_household as f64;
        for (w, s) in e_weights.iter_mut().zip(&res.option_shares) {
            *w += s * res.expected_frequency * weeks_per_household as f64;
        }
        let mut r = rng::stream(77, &[h_idx as u64]);
        for _ in 0..weeks_per_household {
            let week = demand.sample_week(&mut r);
            tv.push(f64::from(week.total_value));
            orders.push(week.orders.len() as f64);
            let mut c = vec![0.0; n_opt];
            for o in &week.orders {
                c[o.option] += 1.0;
            }
            option_counts.push(c);
        }
    }
    let n = tv.n;
    assert!(n >= 100_000.0);
    let (e_tv, e_f) = (e_tv / n, e_f / n);
    let z_tv = (tv.mean() - e_tv) / tv.standard_error();
    let z_f = (orders.mean() - e_f) / orders.standard_error();
    assert!(z_tv.abs() < 3.0, "total value z = {z_tv}");
    assert!(z_f.abs() < 3.0, "frequency z = {z_f}");

    // Ratio estimator per option: share = sum(count_k) / sum(count), delta-method variance.
    let total_orders: f64 = option_counts.iter().flatten().sum();
    let mean_orders = total_orders / n;
    let e_total: f64 = e_weights.iter().sum();
    for k in 0..n_opt {
        let share = option_counts.iter().map(|c| c[k]).sum::<f64>() / total_orders;
        let expected = e_weights[k] / e_total;
        let resid_var = option_counts
            .iter()
            .map(|c| {
                let d = c[k] - share * c.iter().sum::<f64>();
                d * d
            })
            .sum::<f64>()
            / (n - 1.0);
        let se = (resid_var / n).sqrt() / mean_orders;
        let z = (share - expected) / se;
        assert!(z.abs() < 3.0, "option {k} share z = {z}");
    }
}
