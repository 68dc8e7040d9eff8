//! Demand-side synthesis: adopting households per item category, weekly orders from the
//! demand model, and orders converted to packages.
//!
//! Streams are keyed by (seed, category, household, week) for orders and (seed, category)
//! for package counts, so the output does not depend on the worker count and one category's
//! stream is untouched by another category's settings.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DateAvailability, HouseholdProfile, ParamOverrides, Speed};
use crate::parallel::Workers;
use crate::population::Population;
use crate::rng;
use crate::{DemandModel, Params, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Groceries,
    HouseholdGoodsAndMedicines,
    OtherPackages,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::Groceries,
        Category::HouseholdGoodsAndMedicines,
        Category::OtherPackages,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::Groceries => "groceries",
            Category::HouseholdGoodsAndMedicines => "household-goods-and-medicines",
            Category::OtherPackages => "other-packages",
        }
    }

    fn key(self) -> u64 {
        self as u64 + 1
    }
}

fn default_persons_15_plus_share() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryConfig {
    pub category: Category,
    /// Probability that a household orders in this category at all.
    pub adoption_rate: f64,
    /// Mean packages per order, at least 1.
    pub packages_per_order: f64,
    /// Share of household members aged 15 or over, used for per-person rates.
    #[serde(default = "default_persons_15_plus_share")]
    pub persons_15_plus_share: f64,
    #[serde(default, skip_serializing_if = "ParamOverrides::is_empty")]
    pub params: ParamOverrides,
}

impl CategoryConfig {
    pub fn new(category: Category, adoption_rate: f64) -> Self {
        Self {
            category,
            adoption_rate,
            packages_per_order: 3.0,
            persons_15_plus_share: default_persons_15_plus_share(),
            params: ParamOverrides::default(),
        }
    }

    /// Groceries, household goods and medicines, and other packages at adoption rates
    /// 0.12, 0.30 and 0.50, three packages per order.
    pub fn defaults() -> Vec<CategoryConfig> {
        vec![
            Self::new(Category::Groceries, 0.12),
            Self::new(Category::HouseholdGoodsAndMedicines, 0.30),
            Self::new(Category::OtherPackages, 0.50),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("{}.{name}", self.category.label());
        if !(0.0..=1.0).contains(&self.adoption_rate) {
            return Err(Error::config(field("adoption_rate"), "must lie in [0, 1]"));
        }
        if !self.packages_per_order.is_finite() || self.packages_per_order < 1.0 {
            return Err(Error::config(
                field("packages_per_order"),
                "must be at least 1",
            ));
        }
        if !(self.persons_15_plus_share > 0.0 && self.persons_15_plus_share <= 1.0) {
            return Err(Error::config(
                field("persons_15_plus_share"),
                "must lie in (0, 1]",
            ));
        }
        Ok(())
    }

    /// Base parameters, then scenario overrides, then this category's overrides.
    pub fn resolve_params(&self, scenario: &Scenario, base: &Params) -> Params {
        self.params.apply(&scenario.resolve_params(base))
    }
}

/// One order placed by an adopting household.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRecord {
    pub household_id: String,
    pub category: Category,
    /// Sequence number within (household, category).
    pub order_id: u32,
    pub week: u32,
    /// Simulation day, `7 * week + day_of_week`.
    pub day: u32,
    /// Monday = 0 through Sunday = 6.
    pub day_of_week: u8,
    pub order_value: u32,
    pub option_id: String,
    pub speed: Speed,
    pub date: DateAvailability,
}

/// One order after conversion to packages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackageEvent {
    pub day: u32,
    pub day_of_week: u8,
    pub household_id: String,
    pub category: Category,
    pub order_id: u32,
    pub order_value: u32,
    pub option_id: String,
    pub speed: Speed,
    pub date: DateAvailability,
    pub packages: u32,
    /// Distribution facility; assigned downstream, always empty here.
    pub facility: Option<String>,
}

/// Independent Bernoulli draw per household, keyed by (seed, category, household).
pub fn sample_adopters<'p>(
    population: &'p Population,
    config: &CategoryConfig,
    seed: u64,
) -> Result<Vec<&'p HouseholdProfile>> {
    config.validate()?;
    Ok(population
        .households
        .iter()
        .filter(|h| {
            let mut s = rng::stream(
                seed,
                &[
                    rng::purpose::ADOPTION,
                    config.category.key(),
                    rng::label_key(&h.id),
                ],
            );
            s.random::<f64>() < config.adoption_rate
        })
        .collect())
}

/// Samples `weeks` weeks of orders for each adopter. The order day is uniform over the days
/// the chosen option delivers on.
pub fn synthesize_orders(
    adopters: &[&HouseholdProfile],
    model: &DemandModel,
    scenario: &Scenario,
    category: Category,
    weeks: u32,
    seed: u64,
    workers: usize,
) -> Result<Vec<OrderRecord>> {
    if weeks < 1 {
        return Err(Error::config("weeks", "must be at least 1"));
    }
    let per_household = Workers::new(workers)?.try_map(adopters, |h| {
        household_orders(h, model, scenario, category, weeks, seed)
    })?;
    Ok(per_household.into_iter().flatten().collect())
}

fn household_orders(
    household: &HouseholdProfile,
    model: &DemandModel,
    scenario: &Scenario,
    category: Category,
    weeks: u32,
    seed: u64,
) -> Result<Vec<OrderRecord>> {
    let demand = model.household(household)?;
    let mut out = Vec::new();
    let mut next_id = 0u32;
    for week in 0..weeks {
        let mut s = rng::stream(
            seed,
            &[
                rng::purpose::ORDERS,
                category.key(),
                rng::label_key(&household.id),
                u64::from(week),
            ],
        );
        let sampled = demand.sample_week(&mut s);
        for order in sampled.orders {
            let option = &scenario.options[order.option];
            let days = option.date.admissible_days();
            let day_of_week = days[s.random_range(0..days.len())];
            out.push(OrderRecord {
                household_id: household.id.clone(),
                category,
                order_id: next_id,
                week,
                day: 7 * week + u32::from(day_of_week),
                day_of_week,
                order_value: order.order_value,
                option_id: option.id.clone(),
                speed: option.speed,
                date: option.date,
            });
            next_id += 1;
        }
    }
    Ok(out)
}

/// `1 + Poisson(mean - 1)` packages per order, drawn in the given order of `orders`; the
/// result is sorted by (day, household, category, order).
pub fn orders_to_packages<R: Rng + ?Sized>(
    orders: &[OrderRecord],
    config: &CategoryConfig,
    rng: &mut R,
) -> Result<Vec<PackageEvent>> {
    if !config.packages_per_order.is_finite() || config.packages_per_order < 1.0 {
        return Err(Error::config(
            format!("{}.packages_per_order", config.category.label()),
            "must be at least 1",
        ));
    }
    let extra = config.packages_per_order - 1.0;
    let poisson = if extra > 0.0 {
        Some(Poisson::new(extra).map_err(|e| Error::config("packages_per_order", e.to_string()))?)
    } else {
        None
    };
    let mut packages: Vec<PackageEvent> = orders
        .iter()
        .map(|o| PackageEvent {
            day: o.day,
            day_of_week: o.day_of_week,
            household_id: o.household_id.clone(),
            category: o.category,
            order_id: o.order_id,
            order_value: o.order_value,
            option_id: o.option_id.clone(),
            speed: o.speed,
            date: o.date,
            packages: 1 + poisson.as_ref().map_or(0, |p| p.sample(rng) as u32),
            facility: None,
        })
        .collect();
    sort_packages(&mut packages);
    Ok(packages)
}

pub fn sort_packages(packages: &mut [PackageEvent]) {
    packages.sort_by(|a, b| {
        (a.day, &a.household_id, a.category, a.order_id).cmp(&(
            b.day,
            &b.household_id,
            b.category,
            b.order_id,
        ))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySynthesis {
    pub category: Category,
    pub adopters: usize,
    pub persons_15_plus: f64,
    pub orders: usize,
    pub packages: u64,
    /// Orders per adopting household-week from the exact expectation of the demand model.
    pub expected_orders_per_household_week: f64,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub weeks: u32,
    pub categories: Vec<CategorySynthesis>,
    pub packages: Vec<PackageEvent>,
}

/// Full demand-side run over all categories.
#[allow(clippy::too_many_arguments)]
pub fn synthesize(
    population: &Population,
    scenario: &Scenario,
    params: &Params,
    categories: &[CategoryConfig],
    weeks: u32,
    seed: u64,
    workers: usize,
) -> Result<Synthesis> {
    let mut all = Vec::new();
    let mut summaries = Vec::new();
    for config in categories {
        config.validate()?;
        let adopters = sample_adopters(population, config, seed)?;
        let model = DemandModel::new(scenario, &config.resolve_params(scenario, params))?;
        let orders = synthesize_orders(
            &adopters,
            &model,
            scenario,
            config.category,
            weeks,
            seed,
            workers,
        )?;
        let mut stream = rng::stream(seed, &[rng::purpose::PACKAGES, config.category.key()]);
        let packages = orders_to_packages(&orders, config, &mut stream)?;
        let expected = if adopters.is_empty() {
            0.0
        } else {
            adopters
                .iter()
                .map(|h| model.evaluate(h).map(|r| r.expected_frequency))
                .sum::<Result<f64>>()?
                / adopters.len() as f64
        };
        summaries.push(CategorySynthesis {
            category: config.category,
            adopters: adopters.len(),
            persons_15_plus: adopters.iter().map(|h| h.size as f64).sum::<f64>()
                * config.persons_15_plus_share,
            orders: orders.len(),
            packages: packages.iter().map(|p| u64::from(p.packages)).sum(),
            expected_orders_per_household_week: expected,
        });
        all.extend(packages);
    }
    sort_packages(&mut all);
    Ok(Synthesis {
        weeks,
        categories: summaries,
        packages: all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::population::SyntheticPopulationSpec;

    fn population(count: usize) -> Population {
        Population::synthetic(&SyntheticPopulationSpec {
            count,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn adoption_extremes() {
        let pop = population(200);
        let none = CategoryConfig::new(Category::Groceries, 0.0);
        let all = CategoryConfig::new(Category::Groceries, 1.0);
        assert!(sample_adopters(&pop, &none, 1).unwrap().is_empty());
        assert_eq!(sample_adopters(&pop, &all, 1).unwrap().len(), 200);
    }

    #[test]
    fn categories_draw_independently() {
        let pop = population(500);
        let a = sample_adopters(&pop, &CategoryConfig::new(Category::Groceries, 0.5), 3).unwrap();
        let b =
            sample_adopters(&pop, &CategoryConfig::new(Category::OtherPackages, 0.5), 3).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn zero_adopters_zero_orders() {
        let s = builtin::s1();
        let model = DemandModel::new(&s, &Params::default()).unwrap();
        let orders = synthesize_orders(&[], &model, &s, Category::Groceries, 4, 1, 2).unwrap();
        assert!(orders.is_empty());
        let mut r = rng::stream(1, &[]);
        let cfg = CategoryConfig::new(Category::Groceries, 0.5);
        assert!(orders_to_packages(&[], &cfg, &mut r).unwrap().is_empty());
    }

    #[test]
    fn package_config_validation() {
        let mut cfg = CategoryConfig::new(Category::Groceries, 0.5);
        cfg.packages_per_order = 0.5;
        let mut r = rng::stream(1, &[]);
        assert!(orders_to_packages(&[], &cfg, &mut r).is_err());
        cfg.packages_per_order = 3.0;
        cfg.adoption_rate = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_package_orders() {
        let pop = population(30);
        let s = builtin::s1();
        let mut cfg = CategoryConfig::new(Category::OtherPackages, 1.0);
        cfg.packages_per_order = 1.0;
        let out = synthesize(&pop, &s, &Params::default(), &[cfg], 4, 9, 2).unwrap();
        assert!(!out.packages.is_empty());
        assert!(out.packages.iter().all(|p| p.packages == 1));
    }

    #[test]
    fn category_config_json() {
        let cfg: CategoryConfig = serde_json::from_str(
            r#"{"category":"other-packages","adoption_rate":0.5,"packages_per_order":3.0,"params":{"alpha":5.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.category, Category::OtherPackages);
        assert_eq!(cfg.persons_15_plus_share, 0.8);
        assert_eq!(cfg.params.alpha, Some(5.0));
    }
}
