//! Population runs, scenario comparison, and summary statistics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{shares_by_speed, EvaluationMode, HouseholdProfile, Speed};
use crate::parallel::Workers;
use crate::population::Population;
use crate::rng;
use crate::{DemandModel, DemandResult, Params, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: EvaluationMode,
    /// Master seed; required in sampled mode.
    pub seed: Option<u64>,
    /// Sampled weeks per household in sampled mode.
    pub replications: usize,
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: EvaluationMode::Expectation,
            seed: None,
            replications: 52,
            workers: 1,
        }
    }
}

/// Population summary of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub scenario: String,
    /// US$ per household-week.
    pub mean_total_value: f64,
    /// Orders per household-week.
    pub mean_order_frequency: f64,
    /// Percent of orders by speed: 2-5 days, one day, same day.
    pub share_by_speed_pct: [f64; 3],
    /// Empirical CDF over households of expected total value.
    pub tv_cdf: Vec<(f64, f64)>,
    /// Empirical CDF over households of expected order frequency.
    pub frequency_cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub summary: SummaryStats,
    pub option_ids: Vec<String>,
    pub option_speeds: Vec<Speed>,
    pub households: Vec<DemandResult>,
}

/// Percentage change of population means from `base` to `other`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioDelta {
    pub base: String,
    pub other: String,
    pub total_value_pct: f64,
    pub frequency_pct: f64,
    /// Percentage-point change of each speed share.
    pub share_pp: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<ScenarioRun>,
    pub deltas: Vec<ScenarioDelta>,
}

impl Comparison {
    pub fn run(&self, scenario: &str) -> Option<&ScenarioRun> {
        self.runs.iter().find(|r| r.summary.scenario == scenario)
    }

    pub fn delta(&self, base: &str, other: &str) -> Option<&ScenarioDelta> {
        self.deltas
            .iter()
            .find(|d| d.base == base && d.other == other)
    }
}

/// Evaluates every household of `population` under `scenario` (its overrides applied on top
/// of `params`) and summarizes.
pub fn run_scenario(
    population: &Population,
    scenario: &Scenario,
    params: &Params,
    options: &RunOptions,
) -> Result<ScenarioRun> {
    let params = scenario.resolve_params(params);
    let model = DemandModel::new(scenario, &params)?;
    let workers = Workers::new(options.workers)?;
    let households = match options.mode {
        EvaluationMode::Expectation => evaluate_expectation(&model, population, &workers)?,
        EvaluationMode::Sampled => {
            let seed = options
                .seed
                .ok_or_else(|| Error::config("seed", "sampled mode needs a seed"))?;
            if options.replications == 0 {
                return Err(Error::config("replications", "must be at least 1"));
            }
            workers.try_map(&population.households, |h| {
                sample_household(&model, h, seed, options.replications)
            })?
        }
    };
    let summary = summarize(&scenario.name, model.option_speeds(), &households);
    Ok(ScenarioRun {
        summary,
        option_ids: model.option_ids().to_vec(),
        option_speeds: model.option_speeds().to_vec(),
        households,
    })
}

/// Households of equal size share one evaluation.
fn evaluate_expectation(
    model: &DemandModel,
    population: &Population,
    workers: &Workers,
) -> Result<Vec<DemandResult>> {
    let mut representatives: BTreeMap<u32, &HouseholdProfile> = BTreeMap::new();
    for h in &population.households {
        representatives.entry(h.size).or_insert(h);
    }
    let reps: Vec<_> = representatives.into_iter().collect();
    let evaluated: BTreeMap<u32, DemandResult> = workers
        .try_map(&reps, |(size, h)| model.evaluate(h).map(|r| (*size, r)))?
        .into_iter()
        .collect();
    Ok(population
        .households
        .iter()
        .map(|h| {
            let mut r = evaluated[&h.size].clone();
            r.household_id.clone_from(&h.id);
            r
        })
        .collect())
}

/// Averages `weeks` sampled weeks. Frequency is the mean of `tv/ov`; option shares come from
/// realized orders, or from rate-weighted conditional shares when no order was realized.
fn sample_household(
    model: &DemandModel,
    household: &HouseholdProfile,
    seed: u64,
    weeks: usize,
) -> Result<DemandResult> {
    let demand = model.household(household)?;
    let mut stream = rng::stream(
        seed,
        &[
            rng::purpose::HOUSEHOLD_WEEKS,
            rng::label_key(model.scenario_name()),
            rng::label_key(&household.id),
        ],
    );
    let n_opt = model.option_ids().len();
    let tv0 = model.tv_values()[0];
    let mut histogram = vec![0.0; model.tv_values().len()];
    let (mut tv_sum, mut rate_sum, mut ov_sum) = (0.0, 0.0, 0.0);
    let mut counts = vec![0.0; n_opt];
    let mut conditional = vec![0.0; n_opt];
    for _ in 0..weeks {
        let (r, week) = demand.sample_result(&mut stream);
        histogram[(week.total_value - tv0) as usize] += 1.0;
        tv_sum += r.expected_tv;
        rate_sum += r.expected_frequency;
        ov_sum += r.expected_ov;
        for o in &week.orders {
            counts[o.option] += 1.0;
        }
        for (c, s) in conditional.iter_mut().zip(&r.option_shares) {
            *c += r.expected_frequency * s;
        }
    }
    let n = weeks as f64;
    let total_orders: f64 = counts.iter().sum();
    let option_shares = if total_orders > 0.0 {
        counts.iter().map(|c| c / total_orders).collect()
    } else {
        conditional.iter().map(|c| c / rate_sum).collect()
    };
    Ok(DemandResult {
        household_id: household.id.clone(),
        size: household.size,
        tv_distribution: histogram.into_iter().map(|c| c / n).collect(),
        expected_tv: tv_sum / n,
        expected_frequency: rate_sum / n,
        expected_ov: ov_sum / n,
        option_shares,
        mode: EvaluationMode::Sampled,
        saturated: demand.result().saturated,
    })
}

/// Population means (fixed household order) and frequency-weighted speed shares.
pub fn summarize(scenario: &str, speeds: &[Speed], households: &[DemandResult]) -> SummaryStats {
    let n = households.len() as f64;
    let mean_total_value = households.iter().map(|h| h.expected_tv).sum::<f64>() / n;
    let total_frequency: f64 = households.iter().map(|h| h.expected_frequency).sum();
    let mut speed_weights = [0.0; 3];
    for h in households {
        let by_speed = shares_by_speed(speeds, &h.option_shares);
        for (w, s) in speed_weights.iter_mut().zip(by_speed) {
            *w += h.expected_frequency * s;
        }
    }
    let weight_total: f64 = speed_weights.iter().sum();
    let share_by_speed_pct = speed_weights.map(|w| 100.0 * w / weight_total);
    SummaryStats {
        scenario: scenario.to_string(),
        mean_total_value,
        mean_order_frequency: total_frequency / n,
        share_by_speed_pct,
        tv_cdf: empirical_cdf(households.iter().map(|h| h.expected_tv)),
        frequency_cdf: empirical_cdf(households.iter().map(|h| h.expected_frequency)),
    }
}

/// `(value, P(X <= value))` at each distinct value, ascending; the last probability is 1.
pub fn empirical_cdf(values: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n as f64;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = p,
            _ => out.push((x, p)),
        }
    }
    out
}

/// Runs every scenario and reports percentage deltas for every ordered pair `i < j`.
pub fn compare_scenarios(
    population: &Population,
    scenarios: &[Scenario],
    params: &Params,
    options: &RunOptions,
) -> Result<Comparison> {
    if scenarios.len() < 2 {
        return Err(Error::config(
            "scenario",
            "comparison needs at least two scenarios",
        ));
    }
    let runs = scenarios
        .iter()
        .map(|s| run_scenario(population, s, params, options))
        .collect::<Result<Vec<_>>>()?;
    let mut deltas = Vec::new();
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            deltas.push(delta(&a.summary, &b.summary));
        }
    }
    Ok(Comparison { runs, deltas })
}

pub fn delta(base: &SummaryStats, other: &SummaryStats) -> ScenarioDelta {
    let pct = |a: f64, b: f64| 100.0 * (b - a) / a;
    let mut share_pp = [0.0; 3];
    for (k, d) in share_pp.iter_mut().enumerate() {
        *d = other.share_by_speed_pct[k] - base.share_by_speed_pct[k];
    }
    ScenarioDelta {
        base: base.scenario.clone(),
        other: other.scenario.clone(),
        total_value_pct: pct(base.mean_total_value, other.mean_total_value),
        frequency_pct: pct(base.mean_order_frequency, other.mean_order_frequency),
        share_pp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_merges_ties_and_ends_at_one() {
        let cdf = empirical_cdf([3.0, 1.0, 3.0, 2.0].into_iter());
        assert_eq!(cdf, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 1.0)]);
    }
}
