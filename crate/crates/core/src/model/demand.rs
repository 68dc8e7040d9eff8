//! The three nested choice levels and per-household demand evaluation.
//!
//! Delivery option given order value feeds its log-sum into the order value level, whose
//! log-sum in turn feeds the weekly total value level. [`DemandModel`] tabulates everything
//! that does not depend on the household once per (scenario, parameters), so a household
//! evaluation only touches the total value level.

use std::collections::HashMap;

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::choice::{self, ChoiceDistribution, UtilityVector};
use crate::error::{Error, Result};
use crate::model::options::{DeliveryOptionSpec, Speed};
use crate::model::params::ChoiceModelParams;
use crate::model::scenario::{HouseholdProfile, Scenario};
use crate::scalar::Scalar;

/// Household sizes above this are clamped before evaluation.
pub const MAX_HOUSEHOLD_SIZE: u32 = 20;

/// Probability mass on the top total-value alternative above which a result is flagged as
/// pressing against the grid ceiling.
pub const SATURATION_MASS: f64 = 1e-4;

pub fn fee_for<T: Scalar>(option: &DeliveryOptionSpec<T>, ov: T) -> T {
    option.fee_for(ov)
}

/// Systematic utility of one delivery option at order value `ov`.
pub fn option_utility<T: Scalar>(
    option: &DeliveryOptionSpec<T>,
    ov: T,
    params: &ChoiceModelParams<T>,
) -> T {
    let fee = option.fee_for(ov);
    params.part_worth(option) + params.beta_fee * (fee + T::one()).ln()
}

/// Delivery option level at one order value.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionChoice<T> {
    pub utilities: UtilityVector<T>,
    pub distribution: ChoiceDistribution<T>,
    pub logsum: T,
}

pub fn option_choice<T: Scalar>(
    scenario: &Scenario<T>,
    ov: T,
    params: &ChoiceModelParams<T>,
) -> Result<OptionChoice<T>> {
    if scenario.options.is_empty() {
        return Err(Error::InvalidScenario(format!(
            "scenario {} has no delivery options",
            scenario.name
        )));
    }
    let utilities = UtilityVector::new(
        scenario
            .options
            .iter()
            .map(|o| option_utility(o, ov, params))
            .collect(),
    )?;
    Ok(OptionChoice {
        distribution: utilities.probabilities(),
        logsum: utilities.logsum(),
        utilities,
    })
}

/// Order value utility given the delivery option log-sum at that order value.
#[inline]
pub fn order_value_utility_with_logsum<T: Scalar>(
    ov: T,
    tv: T,
    option_logsum: T,
    params: &ChoiceModelParams<T>,
) -> T {
    let interval = ov / tv;
    params.beta_logsumdo * (tv / ov) * option_logsum
        + params.beta_interval * interval * interval
        + params.beta_storage * ov
}

/// Systematic utility of order value `ov` given weekly total value `tv`.
pub fn order_value_utility<T: Scalar>(
    ov: T,
    tv: T,
    scenario: &Scenario<T>,
    params: &ChoiceModelParams<T>,
) -> Result<T> {
    let oc = option_choice(scenario, ov, params)?;
    Ok(order_value_utility_with_logsum(ov, tv, oc.logsum, params))
}

/// `β_hhs (α·hhs − tv)²`.
#[inline]
pub fn household_size_term<T: Scalar>(tv: T, size: u32, params: &ChoiceModelParams<T>) -> T {
    let gap = params.alpha * T::lit(size as f64) - tv;
    params.beta_hhs * gap * gap
}

#[inline]
pub fn total_value_utility_with_logsum<T: Scalar>(
    tv: T,
    size: u32,
    order_value_logsum: T,
    params: &ChoiceModelParams<T>,
) -> T {
    params.beta_logsumov * order_value_logsum + household_size_term(tv, size, params)
}

/// Systematic utility of weekly total value `tv`, evaluated without any caching.
pub fn total_value_utility<T: Scalar>(
    tv: T,
    household: &HouseholdProfile,
    scenario: &Scenario<T>,
    params: &ChoiceModelParams<T>,
) -> Result<T> {
    let ov_utilities = scenario
        .ov_grid
        .scalars::<T>()
        .into_iter()
        .map(|ov| order_value_utility(ov, tv, scenario, params))
        .collect::<Result<Vec<_>>>()?;
    let ls = choice::logsum(&ov_utilities)?;
    Ok(total_value_utility_with_logsum(
        tv,
        effective_size(household),
        ls,
        params,
    ))
}

fn effective_size(household: &HouseholdProfile) -> u32 {
    if household.size > MAX_HOUSEHOLD_SIZE {
        warn!(
            "household {} has {} members; evaluating with {}",
            household.id, household.size, MAX_HOUSEHOLD_SIZE
        );
        MAX_HOUSEHOLD_SIZE
    } else {
        household.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluationMode {
    Expectation,
    Sampled,
}

/// Demand of one household under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandResult<T> {
    pub household_id: String,
    pub size: u32,
    /// Probability of each total value on the grid. A point mass in sampled mode.
    pub tv_distribution: Vec<T>,
    /// US$ per week.
    pub expected_tv: T,
    /// Orders per week.
    pub expected_frequency: T,
    /// US$ per order.
    pub expected_ov: T,
    /// Share of orders per delivery option, in scenario option order.
    pub option_shares: Vec<T>,
    pub mode: EvaluationMode,
    /// Total value mass piles up at the grid ceiling.
    pub saturated: bool,
}

/// One order realized in a sampled week.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderEvent {
    pub order_value: u32,
    /// Index into the scenario's option list.
    pub option: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledWeek<T> {
    pub total_value: u32,
    pub order_value: u32,
    /// Expected orders this week, `tv / ov`.
    pub rate: T,
    pub orders: Vec<OrderEvent>,
}

/// Tabulated model for one scenario and parameter set.
#[derive(Debug, Clone)]
pub struct DemandModel<T> {
    scenario_name: String,
    option_ids: Vec<String>,
    option_speeds: Vec<Speed>,
    params: ChoiceModelParams<T>,
    ov_values: Vec<u32>,
    tv_values: Vec<u32>,
    ov: Vec<T>,
    tv: Vec<T>,
    /// Distinct delivery option choices, one per combination of fee brackets.
    option_sets: Vec<OptionChoice<T>>,
    ov_option_set: Vec<usize>,
    /// Row-major `P(ov | tv)`, one row per tv.
    ov_probabilities: Vec<T>,
    ov_logsum: Vec<T>,
    frequency_given_tv: Vec<T>,
    ov_given_tv: Vec<T>,
    /// Row-major `Σ_ov P(ov|tv)·(tv/ov)·P(do|ov)`, one row per tv.
    option_weight_given_tv: Vec<T>,
}

impl<T: Scalar> DemandModel<T> {
    /// Tabulates the option and order value levels for `scenario` with `params` as given
    /// (scenario overrides are not applied here).
    pub fn new(scenario: &Scenario<T>, params: &ChoiceModelParams<T>) -> Result<Self> {
        scenario.validate()?;
        params.validate()?;
        let ov_values: Vec<u32> = scenario.ov_grid.values().collect();
        let tv_values: Vec<u32> = scenario.tv_grid.values().collect();
        let ov: Vec<T> = scenario.ov_grid.scalars();
        let tv: Vec<T> = scenario.tv_grid.scalars();
        let n_opt = scenario.options.len();

        let mut option_sets: Vec<OptionChoice<T>> = Vec::new();
        let mut by_signature: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut ov_option_set = Vec::with_capacity(ov.len());
        for &o in &ov {
            let signature: Vec<usize> = scenario
                .options
                .iter()
                .map(|opt| opt.fees.bracket_index(o))
                .collect();
            let idx = match by_signature.get(&signature) {
                Some(&i) => i,
                None => {
                    option_sets.push(option_choice(scenario, o, params)?);
                    by_signature.insert(signature, option_sets.len() - 1);
                    option_sets.len() - 1
                }
            };
            ov_option_set.push(idx);
        }
        let option_logsum: Vec<T> = ov_option_set
            .iter()
            .map(|&s| option_sets[s].logsum)
            .collect();

        let n_ov = ov.len();
        let mut ov_probabilities = Vec::with_capacity(tv.len() * n_ov);
        let mut ov_logsum = Vec::with_capacity(tv.len());
        let mut frequency_given_tv = Vec::with_capacity(tv.len());
        let mut ov_given_tv = Vec::with_capacity(tv.len());
        let mut option_weight_given_tv = Vec::with_capacity(tv.len() * n_opt);
        let mut utilities = vec![T::zero(); n_ov];
        for &t in &tv {
            for (j, &o) in ov.iter().enumerate() {
                utilities[j] = order_value_utility_with_logsum(o, t, option_logsum[j], params);
            }
            let u = UtilityVector::new(utilities.clone())?;
            ov_logsum.push(u.logsum());
            let p = u.probabilities().into_vec();
            frequency_given_tv.push(frequency_row(&p, &ov, t));
            ov_given_tv.push(
                p.iter()
                    .zip(&ov)
                    .fold(T::zero(), |acc, (&pj, &o)| acc + pj * o),
            );
            let mut weights = vec![T::zero(); n_opt];
            for (j, &pj) in p.iter().enumerate() {
                let rate = pj * (t / ov[j]);
                let dist = option_sets[ov_option_set[j]].distribution.as_slice();
                for (w, &pd) in weights.iter_mut().zip(dist) {
                    *w = *w + rate * pd;
                }
            }
            option_weight_given_tv.extend(weights);
            ov_probabilities.extend(p);
        }

        Ok(Self {
            scenario_name: scenario.name.clone(),
            option_ids: scenario.options.iter().map(|o| o.id.clone()).collect(),
            option_speeds: scenario.options.iter().map(|o| o.speed).collect(),
            params: *params,
            ov_values,
            tv_values,
            ov,
            tv,
            option_sets,
            ov_option_set,
            ov_probabilities,
            ov_logsum,
            frequency_given_tv,
            ov_given_tv,
            option_weight_given_tv,
        })
    }

    pub fn scenario_name(&self) -> &str {
        &self.scenario_name
    }

    pub fn option_ids(&self) -> &[String] {
        &self.option_ids
    }

    pub fn option_speeds(&self) -> &[Speed] {
        &self.option_speeds
    }

    pub fn params(&self) -> &ChoiceModelParams<T> {
        &self.params
    }

    pub fn ov_values(&self) -> &[u32] {
        &self.ov_values
    }

    pub fn tv_values(&self) -> &[u32] {
        &self.tv_values
    }

    /// Number of distinct option choice situations tabulated.
    pub fn option_set_count(&self) -> usize {
        self.option_sets.len()
    }

    /// Cached delivery option level at grid index `ov_index`.
    pub fn option_choice_at(&self, ov_index: usize) -> &OptionChoice<T> {
        &self.option_sets[self.ov_option_set[ov_index]]
    }

    /// `P(ov | tv)` over the order value grid for grid index `tv_index`.
    pub fn ov_distribution(&self, tv_index: usize) -> &[T] {
        let n = self.ov.len();
        &self.ov_probabilities[tv_index * n..(tv_index + 1) * n]
    }

    /// Log-sum of the order value level, one per total value.
    pub fn order_value_logsums(&self) -> &[T] {
        &self.ov_logsum
    }

    /// `E[tv/ov | tv]` per total value.
    pub fn frequency_given_tv(&self) -> &[T] {
        &self.frequency_given_tv
    }

    pub fn total_value_utilities(&self, size: u32) -> Vec<T> {
        self.tv
            .iter()
            .zip(&self.ov_logsum)
            .map(|(&t, &ls)| total_value_utility_with_logsum(t, size, ls, &self.params))
            .collect()
    }

    /// Exact expectations over the joint (tv, ov, option) distribution.
    pub fn evaluate(&self, household: &HouseholdProfile) -> Result<DemandResult<T>> {
        Ok(self.household(household)?.result)
    }

    /// Household-level state reused across sampled weeks.
    pub fn household(&self, household: &HouseholdProfile) -> Result<HouseholdDemand<'_, T>> {
        if household.size < 1 {
            return Err(Error::InvalidInput(format!(
                "household {} has size 0",
                household.id
            )));
        }
        let size = effective_size(household);
        let tv_distribution = choice::probabilities(&self.total_value_utilities(size))?.into_vec();
        let n_opt = self.option_ids.len();
        let mut expected_tv = T::zero();
        let mut expected_frequency = T::zero();
        let mut expected_ov = T::zero();
        let mut weights = vec![T::zero(); n_opt];
        for (i, &p) in tv_distribution.iter().enumerate() {
            expected_tv = expected_tv + p * self.tv[i];
            expected_frequency = expected_frequency + p * self.frequency_given_tv[i];
            expected_ov = expected_ov + p * self.ov_given_tv[i];
            let row = &self.option_weight_given_tv[i * n_opt..(i + 1) * n_opt];
            for (w, &x) in weights.iter_mut().zip(row) {
                *w = *w + p * x;
            }
        }
        let total = weights.iter().fold(T::zero(), |acc, &w| acc + w);
        let option_shares = weights.into_iter().map(|w| w / total).collect();
        let saturated = tv_distribution
            .last()
            .is_some_and(|&p| p.to_f64_lossy() > SATURATION_MASS);
        if saturated {
            warn!(
                "household {} under scenario {}: total value saturates the grid ceiling",
                household.id, self.scenario_name
            );
        }
        Ok(HouseholdDemand {
            model: self,
            result: DemandResult {
                household_id: household.id.clone(),
                size: household.size,
                tv_distribution,
                expected_tv,
                expected_frequency,
                expected_ov,
                option_shares,
                mode: EvaluationMode::Expectation,
                saturated,
            },
        })
    }

    /// Recomputes `E[tv/ov]` from a result's total value distribution and the stored
    /// `P(ov | tv)` table.
    pub fn frequency_from_joint(&self, result: &DemandResult<T>) -> T {
        result
            .tv_distribution
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &p)| {
                acc + p * frequency_row(self.ov_distribution(i), &self.ov, self.tv[i])
            })
    }
}

fn frequency_row<T: Scalar>(p: &[T], ov: &[T], tv: T) -> T {
    p.iter()
        .zip(ov)
        .fold(T::zero(), |acc, (&pj, &o)| acc + pj * (tv / o))
}

/// A household evaluated against a [`DemandModel`].
#[derive(Debug, Clone)]
pub struct HouseholdDemand<'m, T> {
    model: &'m DemandModel<T>,
    result: DemandResult<T>,
}

impl<T: Scalar> HouseholdDemand<'_, T> {
    pub fn result(&self) -> &DemandResult<T> {
        &self.result
    }

    pub fn into_result(self) -> DemandResult<T> {
        self.result
    }

    /// Samples one week: total value, order value, `Poisson(tv/ov)` orders, and an option for
    /// each order, consuming the stream in that order.
    pub fn sample_week<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledWeek<T> {
        let m = self.model;
        let i = choice::sample_index(&self.result.tv_distribution, rng);
        let j = choice::sample_index(m.ov_distribution(i), rng);
        let rate = m.tv[i] / m.ov[j];
        let count = Poisson::new(rate.to_f64_lossy())
            .map(|d| d.sample(rng) as u64)
            .unwrap_or(0);
        let options = m.option_choice_at(j);
        let orders = (0..count)
            .map(|_| OrderEvent {
                order_value: m.ov_values[j],
                option: options.distribution.sample(rng),
            })
            .collect();
        SampledWeek {
            total_value: m.tv_values[i],
            order_value: m.ov_values[j],
            rate,
            orders,
        }
    }

    /// One sampled week expressed as a [`DemandResult`]: the realized tv and ov, the rate
    /// `tv/ov`, and option shares conditional on the realized ov.
    pub fn sample_result<R: Rng + ?Sized>(&self, rng: &mut R) -> (DemandResult<T>, SampledWeek<T>) {
        let week = self.sample_week(rng);
        let m = self.model;
        let i = (week.total_value - m.tv_values[0]) as usize;
        let j = (week.order_value - m.ov_values[0]) as usize;
        let mut tv_distribution = vec![T::zero(); m.tv.len()];
        tv_distribution[i] = T::one();
        let result = DemandResult {
            household_id: self.result.household_id.clone(),
            size: self.result.size,
            tv_distribution,
            expected_tv: m.tv[i],
            expected_frequency: week.rate,
            expected_ov: m.ov[j],
            option_shares: m.option_choice_at(j).distribution.as_slice().to_vec(),
            mode: EvaluationMode::Sampled,
            saturated: i + 1 == m.tv.len(),
        };
        (result, week)
    }
}

/// Builds a model for one household evaluation. Prefer [`DemandModel`] for many households.
pub fn evaluate_household<T: Scalar>(
    household: &HouseholdProfile,
    scenario: &Scenario<T>,
    params: &ChoiceModelParams<T>,
) -> Result<DemandResult<T>> {
    DemandModel::new(scenario, params)?.evaluate(household)
}

/// One sampled week for one household, building the model on the fly.
pub fn sample_household_week<T: Scalar, R: Rng + ?Sized>(
    household: &HouseholdProfile,
    scenario: &Scenario<T>,
    params: &ChoiceModelParams<T>,
    rng: &mut R,
) -> Result<(DemandResult<T>, Vec<OrderEvent>)> {
    let model = DemandModel::new(scenario, params)?;
    let (result, week) = model.household(household)?.sample_result(rng);
    Ok((result, week.orders))
}

/// Collapses per-option shares into shares per delivery speed.
pub fn shares_by_speed<T: Scalar>(speeds: &[Speed], option_shares: &[T]) -> [T; 3] {
    let mut out = [T::zero(); 3];
    for (s, &x) in speeds.iter().zip(option_shares) {
        out[s.index()] = out[s.index()] + x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::model::options::FeeSchedule;
    use crate::model::scenario::ValueGrid;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ChoiceModelParams<f64> {
        ChoiceModelParams::default()
    }

    fn household(size: u32) -> HouseholdProfile {
        HouseholdProfile::new("h", size).unwrap()
    }

    fn small<T: Scalar>(mut s: Scenario<T>) -> Scenario<T> {
        s.ov_grid = ValueGrid::new(10, 50).unwrap();
        s.tv_grid = ValueGrid::new(1, 50).unwrap();
        s
    }

    #[test]
    fn fee_lookup_fixtures() {
        let s1 = builtin::s1::<f64>();
        let s2 = builtin::s2::<f64>();
        assert_eq!(fee_for(&s1.options[0], 30.0), 0.0);
        assert_eq!(fee_for(&s2.options[0], 30.0), 7.0);
        assert_eq!(fee_for(&s1.options[0], 25.0), 0.0);
    }

    #[test]
    fn option_utility_fixtures() {
        let s1 = builtin::s1::<f64>();
        let p = params();
        assert_abs_diff_eq!(
            option_utility(&s1.options[0], 30.0, &p),
            -0.497,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            option_utility(&s1.options[1], 30.0, &p),
            -3.974,
            epsilon = 1e-3
        );
        // Zero fee contributes nothing.
        let mut zero_fee = s1.options[0].clone();
        zero_fee.fees = FeeSchedule::from_thresholds(&[], &[0.0]).unwrap();
        assert_eq!(option_utility(&zero_fee, 30.0, &p), p.part_worth(&zero_fee));
    }

    #[test]
    fn option_choice_fixtures() {
        let s1 = builtin::s1::<f64>();
        let oc = option_choice(&s1, 30.0, &params()).unwrap();
        for (got, want) in oc
            .distribution
            .as_slice()
            .iter()
            .zip([0.9486, 0.0293, 0.0222])
        {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-3);
        }
        assert_abs_diff_eq!(oc.logsum, -0.4441, epsilon = 1e-3);
        assert_eq!(oc, option_choice(&s1, 40.0, &params()).unwrap());

        let mut single = s1.clone();
        single.options.truncate(1);
        let oc = option_choice(&single, 30.0, &params()).unwrap();
        assert_eq!(oc.distribution.as_slice(), &[1.0]);
        assert_eq!(oc.logsum, oc.utilities.values()[0]);

        single.options.clear();
        assert!(matches!(
            option_choice(&single, 30.0, &params()),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn order_value_utility_fixtures() {
        let s1 = builtin::s1::<f64>();
        let v = order_value_utility(50.0, 50.0, &s1, &params()).unwrap();
        assert_abs_diff_eq!(v, -1.500, epsilon = 2e-3);
        let zero = ChoiceModelParams::zeros();
        for (ov, tv) in [(10.0, 1.0), (50.0, 50.0), (300.0, 600.0)] {
            assert_eq!(order_value_utility(ov, tv, &s1, &zero).unwrap(), 0.0);
        }
    }

    #[test]
    fn higher_fees_lower_the_logsum_term() {
        let s1 = builtin::s1::<f64>();
        let mut pricier = s1.clone();
        for o in &mut pricier.options {
            o.fees = o.fees.map_fees(|f| f + 1.0).unwrap();
        }
        let p = params();
        for ov in [10.0, 30.0, 75.0, 200.0] {
            let a = option_choice(&s1, ov, &p).unwrap().logsum;
            let b = option_choice(&pricier, ov, &p).unwrap().logsum;
            assert!(p.beta_logsumdo * (40.0 / ov) * b < p.beta_logsumdo * (40.0 / ov) * a);
        }
    }

    #[test]
    fn fee_monotonicity_and_free_shipping_attraction() {
        let p = params();
        let s1 = builtin::s1::<f64>();
        let base = option_choice(&s1, 30.0, &p).unwrap();
        let mut raised = s1.clone();
        raised.options[1].fees = raised.options[1].fees.map_fees(|f| f + 2.0).unwrap();
        let after = option_choice(&raised, 30.0, &p).unwrap();
        let (b, a) = (base.distribution.as_slice(), after.distribution.as_slice());
        assert!(a[1] < b[1]);
        assert!(a[0] >= b[0] && a[2] >= b[2]);

        let s2 = builtin::s2::<f64>();
        for ov in [25.0, 30.0, 49.0] {
            let p1 = option_choice(&s1, ov, &p).unwrap().distribution.as_slice()[0];
            let p2 = option_choice(&s2, ov, &p).unwrap().distribution.as_slice()[0];
            assert!(p1 > p2);
        }
    }

    #[test]
    fn household_size_term_fixtures() {
        let p = params();
        assert_abs_diff_eq!(household_size_term(100.0, 2, &p), -0.99490, epsilon = 1e-5);
        let p = ChoiceModelParams {
            alpha: 12.0,
            ..params()
        };
        assert_eq!(household_size_term(24.0, 2, &p), 0.0);
    }

    #[test]
    fn cached_tables_match_direct_evaluation() {
        let s = small(builtin::s1::<f64>());
        let p = params();
        let model = DemandModel::new(&s, &p).unwrap();
        // One option situation per fee bracket reached by the grid.
        assert_eq!(model.option_set_count(), 3);
        for (j, &ov) in model.ov_values().iter().enumerate() {
            let direct = option_choice(&s, ov as f64, &p).unwrap();
            assert_eq!(model.option_choice_at(j), &direct);
        }
        let h = household(2);
        let cached = model.total_value_utilities(2);
        for (i, &tv) in model.tv_values().iter().enumerate().step_by(7) {
            let direct = total_value_utility(tv as f64, &h, &s, &p).unwrap();
            assert_eq!(cached[i], direct);
        }
    }

    #[test]
    fn expectation_mode_invariants() {
        let model = DemandModel::new(&builtin::s2::<f64>(), &params()).unwrap();
        let r = model.evaluate(&household(3)).unwrap();
        let total: f64 = r.option_shares.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        assert!(r.option_shares.iter().all(|&s| s >= 0.0));
        assert_eq!(model.frequency_from_joint(&r), r.expected_frequency);
        assert_eq!(r.mode, EvaluationMode::Expectation);
        assert!(!r.saturated);
        assert_eq!(r, model.evaluate(&household(3)).unwrap());
    }

    #[test]
    fn dominant_size_penalty_pins_total_value() {
        let mut s = builtin::s1::<f64>();
        s.options.truncate(1);
        let mut p = params();
        p.beta_hhs *= 1e6;
        let r = evaluate_household(&household(4), &s, &p).unwrap();
        assert!(
            (r.expected_tv - p.alpha * 4.0).abs() < 1.0,
            "{}",
            r.expected_tv
        );
    }

    #[test]
    fn oversized_households_are_clamped() {
        let model = DemandModel::new(&small(builtin::s1::<f64>()), &params()).unwrap();
        let big = model.evaluate(&household(60)).unwrap();
        let capped = model.evaluate(&household(MAX_HOUSEHOLD_SIZE)).unwrap();
        assert_eq!(big.expected_tv, capped.expected_tv);
        assert_eq!(big.size, 60);
        // The truncated grid forces mass onto its ceiling.
        assert!(big.saturated);
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let s = builtin::s1::<f64>();
        let p = params();
        let h = household(2);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_household_week(&h, &s, &p, &mut rng).unwrap().1)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));

        let model = DemandModel::new(&s, &p).unwrap();
        let demand = model.household(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (r, week) = demand.sample_result(&mut rng);
            assert!(week.rate > 0.0);
            assert_eq!(r.expected_frequency, week.rate);
            assert!(week
                .orders
                .iter()
                .all(|o| o.order_value == week.order_value));
            assert_abs_diff_eq!(r.option_shares.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_precision_model_tracks_double() {
        let s64 = small(builtin::s1::<f64>());
        let s32 = small(builtin::s1::<f32>());
        let r64 = evaluate_household(&household(2), &s64, &params()).unwrap();
        let r32 = evaluate_household(&household(2), &s32, &params().cast::<f32>()).unwrap();
        assert!((r64.expected_tv - r32.expected_tv as f64).abs() < 1e-3);
        assert!((r64.expected_frequency - r32.expected_frequency as f64).abs() < 1e-4);
    }
}
