//! Bottom-up estimation of the three choice levels, with synthetic data generation.
//!
//! Level 1 (delivery option) is effects coded: within each attribute the part-worths sum to
//! zero and the first level carries minus the sum of the others. Level 2 (order value) and
//! level 3 (total value) datasets hold raw values; their design covariates are built from the
//! fitted lower levels, whose log-sums enter as regressors.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::calibration::dataset::{ChoiceDataset, DatasetBuilder};
use crate::calibration::mnl::{fit_mnl, mnl_loglik_and_gradient, FitOptions, MnlFit};
use crate::choice::{logsum, probabilities, sample_index};
use crate::error::{Error, Result};
use crate::model::{
    option_choice, order_value_utility_with_logsum, DateAvailability, Slot, Speed, TimeOfDay,
};
use crate::population::SyntheticPopulationSpec;
use crate::rng;
use crate::{DemandModel, Params, Scenario};

pub const LEVEL1_COEFFICIENTS: [&str; 8] = [
    "speed:one-day",
    "speed:same-day",
    "slot:2hr",
    "slot:4hr",
    "time:daytime-and-evening",
    "date:weekday-and-saturday",
    "date:all-days",
    "ln_fee_plus_1",
];
pub const LEVEL2_COLUMNS: [&str; 2] = ["total_value", "order_value"];
pub const LEVEL3_COLUMNS: [&str; 2] = ["total_value", "household_size"];
pub const LEVEL2_COEFFICIENTS: [&str; 3] = ["beta_logsumdo", "beta_interval", "beta_storage"];
/// The last coefficient multiplies `size·tv` and equals `−2·β_hhs·α`.
pub const LEVEL3_COEFFICIENTS: [&str; 3] = ["beta_logsumov", "beta_hhs", "size_x_total_value"];

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn effects(index: usize, levels: usize) -> impl Iterator<Item = f64> {
    (1..levels).map(move |l| {
        if index == 0 {
            -1.0
        } else if index == l {
            1.0
        } else {
            0.0
        }
    })
}

/// Effects-coded attributes followed by `ln(fee + 1)`.
pub fn option_covariates(
    speed: Speed,
    slot: Slot,
    time: TimeOfDay,
    date: DateAvailability,
    fee: f64,
) -> Vec<f64> {
    effects(speed.index(), 3)
        .chain(effects(slot.index(), 3))
        .chain(effects(time.index(), 2))
        .chain(effects(date.index(), 3))
        .chain([(fee + 1.0).ln()])
        .collect()
}

fn centered<const N: usize>(pw: &[f64; N]) -> impl Iterator<Item = f64> + '_ {
    let mean = pw.iter().sum::<f64>() / N as f64;
    pw[1..].iter().map(move |p| p - mean)
}

/// Level-1 coefficients implied by `params`: part-worths centered within each attribute.
pub fn level1_truth(params: &Params) -> Vec<f64> {
    centered(&params.beta_speed)
        .chain(centered(&params.beta_slot))
        .chain(centered(&params.beta_time))
        .chain(centered(&params.beta_date))
        .chain([params.beta_fee])
        .collect()
}

pub fn level2_truth(params: &Params) -> Vec<f64> {
    vec![
        params.beta_logsumdo,
        params.beta_interval,
        params.beta_storage,
    ]
}

pub fn level3_truth(params: &Params) -> Vec<f64> {
    vec![
        params.beta_logsumov,
        params.beta_hhs,
        -2.0 * params.beta_hhs * params.alpha,
    ]
}

fn expand<const N: usize>(coefs: &[f64]) -> [f64; N] {
    let mut out = [0.0; N];
    out[1..].copy_from_slice(coefs);
    out[0] = -coefs.iter().sum::<f64>();
    out
}

/// Writes level-1 coefficients into the part-worths and fee coefficient of `params`.
pub fn apply_level1(params: &mut Params, coefs: &[f64]) {
    params.beta_speed = expand(&coefs[0..2]);
    params.beta_slot = expand(&coefs[2..4]);
    params.beta_time = expand(&coefs[4..5]);
    params.beta_date = expand(&coefs[5..7]);
    params.beta_fee = coefs[7];
}

/// Sizes of synthetic level-1 designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationDesign {
    pub observations: usize,
    /// Distinct randomly generated option menus for level 1.
    pub option_menus: usize,
    pub options_per_menu: usize,
    pub seed: u64,
}

impl Default for SimulationDesign {
    fn default() -> Self {
        Self {
            observations: 20_000,
            option_menus: 400,
            options_per_menu: 4,
            seed: 2019,
        }
    }
}

const LEVEL1_FEES: [f64; 10] = [0.0, 2.0, 3.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0];

fn check_design(design: &SimulationDesign) -> Result<()> {
    if design.observations == 0 {
        return Err(Error::config("observations", "must be at least 1"));
    }
    if design.option_menus == 0 {
        return Err(Error::config("option_menus", "must be at least 1"));
    }
    if design.options_per_menu < 2 {
        return Err(Error::config("options_per_menu", "must be at least 2"));
    }
    Ok(())
}

/// Delivery option choices from random menus (uniform attribute levels and fees).
pub fn simulate_level1(params: &Params, design: &SimulationDesign) -> Result<ChoiceDataset> {
    check_design(design)?;
    let mut stream = rng::stream(design.seed, &[rng::purpose::ESTIMATION, 1]);
    let truth = level1_truth(params);
    let mut builder = DatasetBuilder::new(names(&LEVEL1_COEFFICIENTS));
    let mut menus = Vec::with_capacity(design.option_menus);
    for _ in 0..design.option_menus {
        let mut ids = Vec::new();
        let mut covariates = Vec::new();
        let mut utilities = Vec::new();
        for a in 0..design.options_per_menu {
            let x = option_covariates(
                Speed::ALL[stream.random_range(0..3)],
                Slot::ALL[stream.random_range(0..3)],
                TimeOfDay::ALL[stream.random_range(0..2)],
                DateAvailability::ALL[stream.random_range(0..3)],
                LEVEL1_FEES[stream.random_range(0..LEVEL1_FEES.len())],
            );
            utilities.push(x.iter().zip(&truth).map(|(x, b)| x * b).sum::<f64>());
            covariates.extend(x);
            ids.push(format!("option{}", a + 1));
        }
        let set = builder.add_set(ids, covariates);
        menus.push((set, probabilities(&utilities)?.into_vec()));
    }
    for i in 0..design.observations {
        let (set, p) = &menus[i % menus.len()];
        let chosen = sample_index(p, &mut stream);
        builder.push_in_set(format!("l1-{i}"), *set, chosen);
    }
    builder.build()
}

/// Order value choices over the scenario grid at total values drawn uniformly from its grid.
pub fn simulate_level2(
    scenario: &Scenario,
    params: &Params,
    design: &SimulationDesign,
) -> Result<ChoiceDataset> {
    check_design(design)?;
    let model = DemandModel::new(scenario, params)?;
    let mut stream = rng::stream(design.seed, &[rng::purpose::ESTIMATION, 2]);
    let ov = model.ov_values().to_vec();
    let ids: Vec<String> = ov.iter().map(|v| v.to_string()).collect();
    let mut builder = DatasetBuilder::new(names(&LEVEL2_COLUMNS));
    let mut sets: HashMap<usize, usize> = HashMap::new();
    for i in 0..design.observations {
        let t = stream.random_range(0..model.tv_values().len());
        let tv = model.tv_values()[t] as f64;
        let set = *sets.entry(t).or_insert_with(|| {
            let cov = ov.iter().flat_map(|&o| [tv, o as f64]).collect();
            builder.add_set(ids.clone(), cov)
        });
        let chosen = sample_index(model.ov_distribution(t), &mut stream);
        builder.push_in_set(format!("l2-{i}"), set, chosen);
    }
    builder.build()
}

/// Total value choices over the scenario grid for household sizes drawn from `sizes`.
pub fn simulate_level3(
    scenario: &Scenario,
    params: &Params,
    sizes: &SyntheticPopulationSpec,
    design: &SimulationDesign,
) -> Result<ChoiceDataset> {
    check_design(design)?;
    sizes.validate()?;
    let model = DemandModel::new(scenario, params)?;
    let mut stream = rng::stream(design.seed, &[rng::purpose::ESTIMATION, 3]);
    let size_values: Vec<u32> = sizes.masses.keys().copied().collect();
    let size_masses: Vec<f64> = {
        let total: f64 = sizes.masses.values().sum();
        sizes.masses.values().map(|m| m / total).collect()
    };
    let tv = model.tv_values().to_vec();
    let ids: Vec<String> = tv.iter().map(|v| v.to_string()).collect();
    let mut builder = DatasetBuilder::new(names(&LEVEL3_COLUMNS));
    let mut by_size: BTreeMap<u32, (usize, Vec<f64>)> = BTreeMap::new();
    for i in 0..design.observations {
        let size = size_values[sample_index(&size_masses, &mut stream)];
        let (set, p) = match by_size.entry(size) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let cov = tv.iter().flat_map(|&t| [t as f64, size as f64]).collect();
                let set = builder.add_set(ids.clone(), cov);
                let p = probabilities(&model.total_value_utilities(size))?.into_vec();
                e.insert((set, p))
            }
        };
        let chosen = sample_index(p, &mut stream);
        builder.push_in_set(format!("l3-{i}"), *set, chosen);
    }
    builder.build()
}

/// Datasets for the three levels.
#[derive(Debug, Clone)]
pub struct SequentialData {
    pub level1: ChoiceDataset,
    pub level2: ChoiceDataset,
    pub level3: ChoiceDataset,
}

/// Simulates all three levels from `params` (level 2 and 3 under `scenario`).
pub fn simulate_sequential_data(
    scenario: &Scenario,
    params: &Params,
    design: &SimulationDesign,
) -> Result<SequentialData> {
    Ok(SequentialData {
        level1: simulate_level1(params, design)?,
        level2: simulate_level2(scenario, params, design)?,
        level3: simulate_level3(
            scenario,
            params,
            &SyntheticPopulationSpec::default(),
            design,
        )?,
    })
}

fn require_columns(data: &ChoiceDataset, expected: &[&str], level: u8) -> Result<()> {
    if data.covariate_names() != expected {
        return Err(Error::config(
            format!("level{level}"),
            format!(
                "expected covariate columns {:?}, got {:?}",
                expected,
                data.covariate_names()
            ),
        ));
    }
    Ok(())
}

/// Level-2 design `[(tv/ov)·LS_do(ov), (ov/tv)², ov]` with option log-sums under `params`.
pub fn level2_design(
    raw: &ChoiceDataset,
    scenario: &Scenario,
    params: &Params,
) -> Result<ChoiceDataset> {
    require_columns(raw, &LEVEL2_COLUMNS, 2)?;
    let mut cache: HashMap<u64, f64> = HashMap::new();
    raw.map_covariates(names(&LEVEL2_COEFFICIENTS), |alt, row| {
        let (tv, ov) = (row[0], row[1]);
        if tv <= 0.0 || ov <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "alternative {alt}: total and order values must be positive"
            )));
        }
        let ls = match cache.get(&ov.to_bits()) {
            Some(&v) => v,
            None => {
                let v = option_choice(scenario, ov, params)?.logsum;
                cache.insert(ov.to_bits(), v);
                v
            }
        };
        Ok(vec![(tv / ov) * ls, (ov / tv).powi(2), ov])
    })
}

/// Level-3 design `[LS_ov(tv), tv², size·tv]` with order value log-sums under `params`.
pub fn level3_design(
    raw: &ChoiceDataset,
    scenario: &Scenario,
    params: &Params,
) -> Result<ChoiceDataset> {
    require_columns(raw, &LEVEL3_COLUMNS, 3)?;
    let model = DemandModel::new(scenario, params)?;
    let ov: Vec<f64> = model.ov_values().iter().map(|&v| v as f64).collect();
    let option_logsums: Vec<f64> = (0..ov.len())
        .map(|j| model.option_choice_at(j).logsum)
        .collect();
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut utilities = vec![0.0; ov.len()];
    raw.map_covariates(names(&LEVEL3_COEFFICIENTS), |alt, row| {
        let (tv, size) = (row[0], row[1]);
        if tv <= 0.0 || size < 1.0 {
            return Err(Error::InvalidInput(format!(
                "alternative {alt}: total value must be positive and household size at least 1"
            )));
        }
        let ls = match cache.get(&tv.to_bits()) {
            Some(&v) => v,
            None => {
                for (u, (&o, &l)) in utilities.iter_mut().zip(ov.iter().zip(&option_logsums)) {
                    *u = order_value_utility_with_logsum(o, tv, l, params);
                }
                let v = logsum(&utilities)?;
                cache.insert(tv.to_bits(), v);
                v
            }
        };
        Ok(vec![ls, tv * tv, size * tv])
    })
}

/// Estimate compared with a reference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientCheck {
    pub name: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub truth: f64,
    /// `(estimate − truth) / standard_error`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialFit {
    pub level1: MnlFit,
    pub level2: MnlFit,
    pub level3: MnlFit,
    /// `start` with every estimated coefficient replaced.
    pub params: Params,
    pub alpha: f64,
    /// Delta-method standard error of `α = −γ / (2 β_hhs)`.
    pub alpha_standard_error: f64,
}

impl SequentialFit {
    pub fn converged(&self) -> bool {
        self.level1.converged() && self.level2.converged() && self.level3.converged()
    }

    pub fn levels(&self) -> [&MnlFit; 3] {
        [&self.level1, &self.level2, &self.level3]
    }

    /// Every estimated coefficient against the values implied by `truth`.
    pub fn compare(&self, truth: &Params) -> Vec<CoefficientCheck> {
        let truths = [
            level1_truth(truth),
            level2_truth(truth),
            level3_truth(truth),
        ];
        self.levels()
            .iter()
            .zip(truths)
            .flat_map(|(fit, t)| {
                fit.names
                    .iter()
                    .zip(&fit.coefficients)
                    .zip(&fit.standard_errors)
                    .zip(t)
                    .map(|(((name, &estimate), &se), truth)| CoefficientCheck {
                        name: name.clone(),
                        estimate,
                        standard_error: se,
                        truth,
                        z: (estimate - truth) / se,
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// `∂g/∂θ_lower` by central differences, where `g` is the upper level's score at `upper`
/// and `design(θ_lower)` rebuilds its covariates.
fn cross_derivative<F>(lower: &[f64], upper: &[f64], mut design: F) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<ChoiceDataset>,
{
    let mut c = DMatrix::zeros(upper.len(), lower.len());
    for j in 0..lower.len() {
        let h = 1e-5 * lower[j].abs().max(1e-2);
        let mut plus = lower.to_vec();
        plus[j] += h;
        let mut minus = lower.to_vec();
        minus[j] -= h;
        let (_, gp) = mnl_loglik_and_gradient(&design(&plus)?, upper)?;
        let (_, gm) = mnl_loglik_and_gradient(&design(&minus)?, upper)?;
        for i in 0..upper.len() {
            c[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Ok(c)
}

/// Covariance of a second-step estimate that takes first-step estimates (covariance
/// `lower`) as given, from independent samples: `V + V C Σ C' V` and the cross term `V C Σ`.
fn two_step(
    v: &DMatrix<f64>,
    c: &DMatrix<f64>,
    lower: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let vc = v * c;
    let cross = &vc * lower;
    let own = v + &cross * vc.transpose();
    (own, cross)
}

fn set_covariance(fit: &mut MnlFit, covariance: DMatrix<f64>) {
    fit.standard_errors = (0..covariance.nrows())
        .map(|i| covariance[(i, i)].max(0.0).sqrt())
        .collect();
    fit.covariance = covariance;
}

/// Fits level 1, then level 2 with level-1 log-sums frozen, then level 3 with the fitted
/// level 1 and 2 log-sums. `start` supplies the starting values and every coefficient that is
/// not estimated.
///
/// Standard errors at levels 2 and 3 include the sampling error of the lower-level estimates
/// carried in through the log-sum covariates.
pub fn fit_sequential(
    data: &SequentialData,
    scenario: &Scenario,
    start: &Params,
    options: &FitOptions,
) -> Result<SequentialFit> {
    require_columns(&data.level1, &LEVEL1_COEFFICIENTS, 1)?;
    start.validate()?;
    let with_level1 = |base: &Params, coefs: &[f64]| {
        let mut p = *base;
        apply_level1(&mut p, coefs);
        p
    };
    let with_level2 = |base: &Params, coefs: &[f64]| {
        let mut p = *base;
        p.beta_logsumdo = coefs[0];
        p.beta_interval = coefs[1];
        p.beta_storage = coefs[2];
        p
    };

    let level1 = fit_mnl(&data.level1, Some(&level1_truth(start)), options)?;
    let after1 = with_level1(start, &level1.coefficients);

    let design2 = level2_design(&data.level2, scenario, &after1)?;
    let mut level2 = fit_mnl(&design2, Some(&level2_truth(start)), options)?;
    let after2 = with_level2(&after1, &level2.coefficients);

    let design3 = level3_design(&data.level3, scenario, &after2)?;
    let mut level3 = fit_mnl(&design3, Some(&level3_truth(start)), options)?;

    let c2 = cross_derivative(&level1.coefficients, &level2.coefficients, |t1| {
        level2_design(&data.level2, scenario, &with_level1(&after2, t1))
    })?;
    let (v2, cross21) = two_step(&level2.covariance, &c2, &level1.covariance);
    let (k1, k2) = (level1.coefficients.len(), level2.coefficients.len());
    let mut joint12 = DMatrix::zeros(k1 + k2, k1 + k2);
    joint12
        .view_mut((0, 0), (k1, k1))
        .copy_from(&level1.covariance);
    joint12.view_mut((k1, k1), (k2, k2)).copy_from(&v2);
    joint12.view_mut((k1, 0), (k2, k1)).copy_from(&cross21);
    joint12
        .view_mut((0, k1), (k1, k2))
        .copy_from(&cross21.transpose());
    let lower: Vec<f64> = level1
        .coefficients
        .iter()
        .chain(&level2.coefficients)
        .copied()
        .collect();
    let c3 = cross_derivative(&lower, &level3.coefficients, |t| {
        let p = with_level2(&with_level1(&after2, &t[..k1]), &t[k1..]);
        level3_design(&data.level3, scenario, &p)
    })?;
    let (v3, _) = two_step(&level3.covariance, &c3, &joint12);
    set_covariance(&mut level2, v2);
    set_covariance(&mut level3, v3);

    let (b, g) = (level3.coefficients[1], level3.coefficients[2]);
    if b == 0.0 {
        return Err(Error::Unidentifiable {
            coefficients: vec!["alpha".into()],
        });
    }
    let alpha = -g / (2.0 * b);
    let jac = [g / (2.0 * b * b), -1.0 / (2.0 * b)];
    let cov = &level3.covariance;
    let var = jac[0] * jac[0] * cov[(1, 1)]
        + 2.0 * jac[0] * jac[1] * cov[(1, 2)]
        + jac[1] * jac[1] * cov[(2, 2)];
    let mut params = after2;
    params.beta_logsumov = level3.coefficients[0];
    params.beta_hhs = b;
    params.alpha = alpha;

    Ok(SequentialFit {
        level1,
        level2,
        level3,
        params,
        alpha,
        alpha_standard_error: var.max(0.0).sqrt(),
    })
}
