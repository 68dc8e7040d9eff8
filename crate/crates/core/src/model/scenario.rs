use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::options::DeliveryOptionSpec;
use crate::model::params::{ChoiceModelParams, ParamOverrides};
use crate::scalar::Scalar;

/// A decision-making household.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdProfile {
    pub id: String,
    /// Persons in the household, at least 1.
    pub size: u32,
}

impl HouseholdProfile {
    pub fn new(id: impl Into<String>, size: u32) -> Result<Self> {
        let id = id.into();
        if size < 1 {
            return Err(Error::InvalidInput(format!("household {id} has size 0")));
        }
        Ok(Self { id, size })
    }
}

/// Integer US$ alternatives `min..=max` in steps of 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueGrid {
    pub min: u32,
    pub max: u32,
}

impl ValueGrid {
    pub const ORDER_VALUE: ValueGrid = ValueGrid { min: 10, max: 300 };
    pub const TOTAL_VALUE: ValueGrid = ValueGrid { min: 1, max: 600 };

    pub fn new(min: u32, max: u32) -> Result<Self> {
        let g = Self { min, max };
        g.validate("grid")?;
        Ok(g)
    }

    fn validate(&self, field: &str) -> Result<()> {
        if self.min == 0 {
            return Err(Error::config(field, "grid values must be positive"));
        }
        if self.max < self.min {
            return Err(Error::config(
                field,
                format!("max {} is below min {}", self.max, self.min),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> impl Iterator<Item = u32> + Clone {
        self.min..=self.max
    }

    pub fn scalars<T: Scalar>(&self) -> Vec<T> {
        self.values().map(|v| T::lit(v as f64)).collect()
    }
}

fn default_ov_grid() -> ValueGrid {
    ValueGrid::ORDER_VALUE
}

fn default_tv_grid() -> ValueGrid {
    ValueGrid::TOTAL_VALUE
}

/// A named bundle of delivery options, parameter overrides, and value grids.
///
/// Every household faces the same option set; only the fees depend on the order value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
#[serde(deny_unknown_fields)]
pub struct Scenario<T> {
    pub name: String,
    pub options: Vec<DeliveryOptionSpec<T>>,
    #[serde(default, skip_serializing_if = "ParamOverrides::is_empty")]
    pub params: ParamOverrides,
    #[serde(default = "default_ov_grid")]
    pub ov_grid: ValueGrid,
    #[serde(default = "default_tv_grid")]
    pub tv_grid: ValueGrid,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(name: impl Into<String>, options: Vec<DeliveryOptionSpec<T>>) -> Self {
        Self {
            name: name.into(),
            options,
            params: ParamOverrides::default(),
            ov_grid: ValueGrid::ORDER_VALUE,
            tv_grid: ValueGrid::TOTAL_VALUE,
        }
    }

    pub fn with_grids(mut self, ov_grid: ValueGrid, tv_grid: ValueGrid) -> Self {
        self.ov_grid = ov_grid;
        self.tv_grid = tv_grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.options.is_empty() {
            return Err(Error::InvalidScenario(format!(
                "scenario {} has no delivery options",
                self.name
            )));
        }
        let mut ids: Vec<&str> = self.options.iter().map(|o| o.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidScenario(format!(
                "scenario {} repeats option id {}",
                self.name, w[0]
            )));
        }
        self.ov_grid.validate("ov_grid")?;
        self.tv_grid.validate("tv_grid")?;
        Ok(())
    }

    /// `base` with this scenario's overrides applied.
    pub fn resolve_params(&self, base: &ChoiceModelParams<T>) -> ChoiceModelParams<T> {
        self.params.apply(base)
    }

    pub fn option_index(&self, id: &str) -> Option<usize> {
        self.options.iter().position(|o| o.id == id)
    }
}
