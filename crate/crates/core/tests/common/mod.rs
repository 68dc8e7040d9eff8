//! Shared test helpers: an uncached brute-force oracle for household demand and random
//! instance generators.

#![allow(dead_code)]

use edemand::model::{
    DateAvailability, DeliveryOptionSpec, FeeSchedule, HouseholdProfile, Slot, Speed, TimeOfDay,
};
use edemand::{Params, Scenario};
use rand::Rng;

/// Plain expectations from a triple enumeration over (tv, ov, option).
#[derive(Debug, Clone)]
pub struct Oracle {
    pub expected_tv: f64,
    pub expected_frequency: f64,
    pub expected_ov: f64,
    /// Order-weighted share of each option.
    pub option_shares: Vec<f64>,
    pub tv_distribution: Vec<f64>,
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let ls = logsumexp(v);
    v.iter().map(|x| (x - ls).exp()).collect()
}

fn fee(option: &DeliveryOptionSpec<f64>, ov: f64) -> f64 {
    for b in option.fees.brackets() {
        let above = ov >= b.lower;
        let below = b.upper.is_none_or(|u| ov < u);
        if above && below {
            return b.fee;
        }
    }
    panic!("order value {ov} not covered");
}

fn option_utilities(scenario: &Scenario, ov: f64, p: &Params) -> Vec<f64> {
    scenario
        .options
        .iter()
        .map(|o| {
            p.beta_speed[o.speed.index()]
                + p.beta_slot[o.slot.index()]
                + p.beta_time[o.time.index()]
                + p.beta_date[o.date.index()]
                + p.beta_fee * (fee(o, ov) + 1.0).ln()
        })
        .collect()
}

/// Evaluates one household with no tabulation or reuse between grid points.
pub fn brute_force(household: &HouseholdProfile, scenario: &Scenario, p: &Params) -> Oracle {
    let ovs: Vec<f64> = scenario.ov_grid.values().map(f64::from).collect();
    let tvs: Vec<f64> = scenario.tv_grid.values().map(f64::from).collect();
    let size = household.size as f64;
    let n_opt = scenario.options.len();

    let mut tv_utility = Vec::with_capacity(tvs.len());
    for &tv in &tvs {
        let ov_u: Vec<f64> = ovs
            .iter()
            .map(|&ov| {
                let ls = logsumexp(&option_utilities(scenario, ov, p));
                p.beta_logsumdo * (tv / ov) * ls
                    + p.beta_interval * (ov / tv).powi(2)
                    + p.beta_storage * ov
            })
            .collect();
        tv_utility
            .push(p.beta_logsumov * logsumexp(&ov_u) + p.beta_hhs * (p.alpha * size - tv).powi(2));
    }
    let p_tv = softmax(&tv_utility);

    let (mut e_tv, mut e_f, mut e_ov) = (0.0, 0.0, 0.0);
    let mut weights = vec![0.0; n_opt];
    for (i, &tv) in tvs.iter().enumerate() {
        let ov_u: Vec<f64> = ovs
            .iter()
            .map(|&ov| {
                let ls = logsumexp(&option_utilities(scenario, ov, p));
                p.beta_logsumdo * (tv / ov) * ls
                    + p.beta_interval * (ov / tv).powi(2)
                    + p.beta_storage * ov
            })
            .collect();
        let p_ov = softmax(&ov_u);
        e_tv += p_tv[i] * tv;
        for (j, &ov) in ovs.iter().enumerate() {
            let joint = p_tv[i] * p_ov[j];
            e_f += joint * tv / ov;
            e_ov += joint * ov;
            let p_do = softmax(&option_utilities(scenario, ov, p));
            for (k, w) in weights.iter_mut().enumerate() {
                *w += joint * (tv / ov) * p_do[k];
            }
        }
    }
    let total: f64 = weights.iter().sum();
    Oracle {
        expected_tv: e_tv,
        expected_frequency: e_f,
        expected_ov: e_ov,
        option_shares: weights.iter().map(|w| w / total).collect(),
        tv_distribution: p_tv,
    }
}

/// Random option set of 2 to 5 options with random attributes and a random fee schedule.
pub fn random_scenario<R: Rng>(rng: &mut R, name: &str) -> Scenario {
    let n = rng.random_range(2..=5);
    let options = (0..n)
        .map(|i| {
            let k = rng.random_range(1..=4);
            let mut thresholds: Vec<f64> = (0..k - 1)
                .map(|_| f64::from(rng.random_range(11..300u32)))
                .collect();
            thresholds.sort_by(f64::total_cmp);
            thresholds.dedup();
            let fees: Vec<f64> = (0..=thresholds.len())
                .map(|_| (rng.random_range(0.0..25.0_f64) * 10.0).round() / 10.0)
                .collect();
            DeliveryOptionSpec {
                id: format!("o{i}"),
                speed: Speed::ALL[rng.random_range(0..3)],
                slot: [Slot::None, Slot::TwoHour, Slot::FourHour][rng.random_range(0..3)],
                time: [TimeOfDay::Daytime, TimeOfDay::DaytimeAndEvening][rng.random_range(0..2)],
                date: [
                    DateAvailability::Weekday,
                    DateAvailability::WeekdayAndSaturday,
                    DateAvailability::AllDays,
                ][rng.random_range(0..3)],
                fees: FeeSchedule::from_thresholds(&thresholds, &fees).unwrap(),
            }
        })
        .collect();
    Scenario::new(name, options)
}

/// Reference parameters each scaled by a random factor in [0.5, 1.5].
pub fn random_params<R: Rng>(rng: &mut R) -> Params {
    let mut p = Params::default();
    let mut f = || rng.random_range(0.5..1.5);
    for x in p
        .beta_speed
        .iter_mut()
        .chain(&mut p.beta_slot)
        .chain(&mut p.beta_time)
        .chain(&mut p.beta_date)
    {
        *x *= f();
    }
    p.beta_fee *= f();
    p.beta_logsumdo *= f();
    p.beta_interval *= f();
    p.beta_storage *= f();
    p.beta_logsumov *= f();
    p.beta_hhs *= f();
    p.alpha *= f();
    p
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
