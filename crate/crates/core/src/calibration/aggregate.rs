//! Calibration of demand parameters to monthly delivery and expenditure targets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibration::simplex::{self, Bounds, SimplexOptions, StopReason};
use crate::engine::{run_scenario, RunOptions};
use crate::error::{Error, Result};
use crate::pipeline::{Category, CategoryConfig};
use crate::population::Population;
use crate::{DemandResult, Params, Scenario};

pub const WEEKS_PER_MONTH: f64 = 52.0 / 12.0;

/// Monthly targets for one item category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryTargets {
    /// Deliveries per person aged 15 or over per month.
    pub deliveries_per_person_month: f64,
    /// Purchase value per household per month, US$.
    pub purchase_usd_per_household_month: f64,
}

fn default_tolerance() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    pub categories: BTreeMap<Category, CategoryTargets>,
    /// Relative residual below which a target counts as met.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for CalibrationTargets {
    /// Pre-pandemic reference values per category.
    fn default() -> Self {
        let t = |d, p| CategoryTargets {
            deliveries_per_person_month: d,
            purchase_usd_per_household_month: p,
        };
        Self {
            categories: BTreeMap::from([
                (Category::Groceries, t(0.6, 11.0)),
                (Category::HouseholdGoodsAndMedicines, t(1.2, 38.0)),
                (Category::OtherPackages, t(3.1, 62.0)),
            ]),
            tolerance: default_tolerance(),
        }
    }
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::config("tolerance", "must be positive"));
        }
        for (c, t) in &self.categories {
            for (name, v) in [
                ("deliveries_per_person_month", t.deliveries_per_person_month),
                (
                    "purchase_usd_per_household_month",
                    t.purchase_usd_per_household_month,
                ),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(
                        format!("categories.{}.{name}", c.label()),
                        format!("target must be positive, got {v}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, category: Category) -> Result<CategoryTargets> {
        self.categories.get(&category).copied().ok_or_else(|| {
            Error::config("categories", format!("no targets for {}", category.label()))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParameter {
    Alpha,
    BetaInterval,
    BetaStorage,
}

impl FreeParameter {
    pub fn get(self, p: &Params) -> f64 {
        match self {
            FreeParameter::Alpha => p.alpha,
            FreeParameter::BetaInterval => p.beta_interval,
            FreeParameter::BetaStorage => p.beta_storage,
        }
    }

    pub fn set(self, p: &mut Params, v: f64) {
        match self {
            FreeParameter::Alpha => p.alpha = v,
            FreeParameter::BetaInterval => p.beta_interval = v,
            FreeParameter::BetaStorage => p.beta_storage = v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FreeParameter::Alpha => "alpha",
            FreeParameter::BetaInterval => "beta_interval",
            FreeParameter::BetaStorage => "beta_storage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeBound {
    pub parameter: FreeParameter,
    pub lower: f64,
    pub upper: f64,
}

/// Parameters adjusted during calibration, each with a finite box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreeParameterSet {
    pub bounds: Vec<FreeBound>,
}

impl FreeParameterSet {
    pub fn new(bounds: Vec<FreeBound>) -> Result<Self> {
        let s = Self { bounds };
        s.validate()?;
        Ok(s)
    }

    pub fn alpha_only() -> Self {
        Self {
            bounds: vec![FreeBound {
                parameter: FreeParameter::Alpha,
                lower: 1.0,
                upper: 60.0,
            }],
        }
    }

    /// α, β_interval and β_storage with generous boxes.
    pub fn all() -> Self {
        Self {
            bounds: vec![
                FreeBound {
                    parameter: FreeParameter::Alpha,
                    lower: 0.5,
                    upper: 60.0,
                },
                FreeBound {
                    parameter: FreeParameter::BetaInterval,
                    lower: -5.0,
                    upper: -0.001,
                },
                FreeBound {
                    parameter: FreeParameter::BetaStorage,
                    lower: -0.5,
                    upper: -0.0001,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::config(
                "free",
                "at least one free parameter is required",
            ));
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower < b.upper) {
                return Err(Error::config(
                    format!("free.{}", b.parameter.name()),
                    "bounds must be finite with lower < upper",
                ));
            }
            if self.bounds[..i].iter().any(|o| o.parameter == b.parameter) {
                return Err(Error::config(
                    format!("free.{}", b.parameter.name()),
                    "listed twice",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregates {
    pub deliveries_per_person_month: f64,
    pub purchase_usd_per_household_month: f64,
}

/// Converts weekly household results into monthly per-person deliveries and per-household
/// expenditure.
pub fn aggregates_from_results(results: &[DemandResult], persons_15_plus_share: f64) -> Aggregates {
    let n = results.len() as f64;
    let orders_per_week: f64 = results.iter().map(|r| r.expected_frequency).sum();
    let persons: f64 = results.iter().map(|r| r.size as f64).sum::<f64>() * persons_15_plus_share;
    let tv_per_week: f64 = results.iter().map(|r| r.expected_tv).sum::<f64>() / n;
    Aggregates {
        deliveries_per_person_month: orders_per_week * WEEKS_PER_MONTH / persons,
        purchase_usd_per_household_month: tv_per_week * WEEKS_PER_MONTH,
    }
}

/// Expectation-mode run of `population` converted to monthly aggregates. `params` are used
/// as given apart from the scenario's own overrides.
pub fn simulate_aggregates(
    population: &Population,
    scenario: &Scenario,
    params: &Params,
    category: &CategoryConfig,
    workers: usize,
) -> Result<Aggregates> {
    let run = run_scenario(
        population,
        scenario,
        params,
        &RunOptions {
            workers,
            ..Default::default()
        },
    )?;
    Ok(aggregates_from_results(
        &run.households,
        category.persons_15_plus_share,
    ))
}

fn relative_residuals(sim: &Aggregates, target: &CategoryTargets) -> [f64; 2] {
    [
        (sim.deliveries_per_person_month - target.deliveries_per_person_month)
            / target.deliveries_per_person_month,
        (sim.purchase_usd_per_household_month - target.purchase_usd_per_household_month)
            / target.purchase_usd_per_household_month,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub category: Category,
    pub targets: CategoryTargets,
    pub tolerance: f64,
    pub free: FreeParameterSet,
    pub start: BTreeMap<String, f64>,
    pub fitted: BTreeMap<String, f64>,
    pub simulated: Aggregates,
    /// Relative residuals: deliveries, purchase value.
    pub relative_residuals: [f64; 2],
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop_reason: StopReason,
    /// Every relative residual is within tolerance.
    pub converged: bool,
    pub params: Params,
}

/// Minimizes the sum of squared relative residuals over the free parameters.
///
/// Targets that cannot be met come back as a non-converged report holding the best point.
#[allow(clippy::too_many_arguments)]
pub fn calibrate(
    targets: &CategoryTargets,
    tolerance: f64,
    free: &FreeParameterSet,
    population: &Population,
    scenario: &Scenario,
    start: &Params,
    category: &CategoryConfig,
    options: &SimplexOptions,
    workers: usize,
) -> Result<CalibrationReport> {
    free.validate()?;
    CalibrationTargets {
        categories: BTreeMap::from([(category.category, *targets)]),
        tolerance,
    }
    .validate()?;
    let with = |x: &[f64]| {
        let mut p = *start;
        for (b, &v) in free.bounds.iter().zip(x) {
            b.parameter.set(&mut p, v);
        }
        p
    };
    let mut failure: Option<Error> = None;
    let objective = |x: &[f64]| -> f64 {
        match simulate_aggregates(population, scenario, &with(x), category, workers) {
            Ok(sim) => relative_residuals(&sim, targets)
                .iter()
                .map(|r| r * r)
                .sum(),
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let x0: Vec<f64> = free.bounds.iter().map(|b| b.parameter.get(start)).collect();
    let bounds: Vec<Bounds> = free
        .bounds
        .iter()
        .map(|b| Bounds {
            lower: b.lower,
            upper: b.upper,
        })
        .collect();
    let result = simplex::minimize(objective, &x0, &bounds, options);
    if let Some(e) = failure {
        return Err(e);
    }
    let params = with(&result.x);
    let simulated = simulate_aggregates(population, scenario, &params, category, workers)?;
    let residuals = relative_residuals(&simulated, targets);
    let named = |p: &Params| {
        free.bounds
            .iter()
            .map(|b| (b.parameter.name().to_string(), b.parameter.get(p)))
            .collect::<BTreeMap<_, _>>()
    };
    Ok(CalibrationReport {
        category: category.category,
        targets: *targets,
        tolerance,
        free: free.clone(),
        start: named(start),
        fitted: named(&params),
        simulated,
        relative_residuals: residuals,
        objective: result.value,
        iterations: result.iterations,
        evaluations: result.evaluations,
        stop_reason: result.reason,
        converged: residuals.iter().all(|r| r.abs() < tolerance),
        params,
    })
}
