//! Delivery option attributes and order-value-bracketed fee schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Speed {
    #[serde(rename = "days-2-to-5")]
    Days2To5,
    OneDay,
    SameDay,
}

impl Speed {
    pub const ALL: [Speed; 3] = [Speed::Days2To5, Speed::OneDay, Speed::SameDay];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Speed::Days2To5 => "days-2-to-5",
            Speed::OneDay => "one-day",
            Speed::SameDay => "same-day",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "2hr")]
    TwoHour,
    #[serde(rename = "4hr")]
    FourHour,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::None, Slot::TwoHour, Slot::FourHour];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeOfDay {
    Daytime,
    DaytimeAndEvening,
}

impl TimeOfDay {
    pub const ALL: [TimeOfDay; 2] = [TimeOfDay::Daytime, TimeOfDay::DaytimeAndEvening];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DateAvailability {
    Weekday,
    WeekdayAndSaturday,
    AllDays,
}

impl DateAvailability {
    pub const ALL: [DateAvailability; 3] = [
        DateAvailability::Weekday,
        DateAvailability::WeekdayAndSaturday,
        DateAvailability::AllDays,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Days of the week a delivery may be requested on, Monday = 0 through Sunday = 6.
    pub fn admissible_days(self) -> &'static [u8] {
        match self {
            DateAvailability::Weekday => &[0, 1, 2, 3, 4],
            DateAvailability::WeekdayAndSaturday => &[0, 1, 2, 3, 4, 5],
            DateAvailability::AllDays => &[0, 1, 2, 3, 4, 5, 6],
        }
    }

    pub fn admits(self, day_of_week: u8) -> bool {
        self.admissible_days().contains(&day_of_week)
    }
}

/// One fee bracket: `[lower, upper)` with `upper = None` meaning unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeeBracket<T> {
    pub lower: T,
    #[serde(default)]
    pub upper: Option<T>,
    pub fee: T,
}

/// Piecewise-constant delivery fee as a function of order value.
///
/// Brackets are lower-inclusive and upper-exclusive and partition `[0, ∞)`, so a $25 order
/// falls into a `[25, 50)` bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeeBracket<T>>", into = "Vec<FeeBracket<T>>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct FeeSchedule<T> {
    brackets: Vec<FeeBracket<T>>,
}

impl<T: Scalar> FeeSchedule<T> {
    pub fn new(brackets: Vec<FeeBracket<T>>) -> Result<Self> {
        let Some(first) = brackets.first() else {
            return Err(Error::InvalidScenario(
                "fee schedule has no brackets".into(),
            ));
        };
        if first.lower != T::zero() {
            return Err(Error::InvalidScenario(format!(
                "first fee bracket must start at 0, starts at {}",
                first.lower
            )));
        }
        for (i, b) in brackets.iter().enumerate() {
            if !b.fee.is_finite() || b.fee < T::zero() {
                return Err(Error::InvalidScenario(format!(
                    "fee bracket {i} has invalid fee {}",
                    b.fee
                )));
            }
            let last = i + 1 == brackets.len();
            match (b.upper, last) {
                (None, true) => {}
                (None, false) => {
                    return Err(Error::InvalidScenario(format!(
                        "fee bracket {i} is unbounded but is not the last bracket"
                    )))
                }
                (Some(_), true) => {
                    return Err(Error::InvalidScenario(
                        "last fee bracket must be unbounded above".into(),
                    ))
                }
                (Some(upper), false) => {
                    if upper <= b.lower || !upper.is_finite() {
                        return Err(Error::InvalidScenario(format!(
                            "fee bracket {i} is empty or has a non-finite bound"
                        )));
                    }
                    if brackets[i + 1].lower != upper {
                        return Err(Error::InvalidScenario(format!(
                            "fee brackets {i} and {} leave a gap or overlap",
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { brackets })
    }

    /// Builds a schedule from interior thresholds and one fee per resulting bracket.
    pub fn from_thresholds(thresholds: &[f64], fees: &[f64]) -> Result<Self> {
        if fees.len() != thresholds.len() + 1 {
            return Err(Error::InvalidScenario(format!(
                "{} thresholds need {} fees, got {}",
                thresholds.len(),
                thresholds.len() + 1,
                fees.len()
            )));
        }
        let mut lower = 0.0;
        let brackets = fees
            .iter()
            .enumerate()
            .map(|(i, &fee)| {
                let upper = thresholds.get(i).copied();
                let b = FeeBracket {
                    lower: T::lit(lower),
                    upper: upper.map(T::lit),
                    fee: T::lit(fee),
                };
                if let Some(u) = upper {
                    lower = u;
                }
                b
            })
            .collect();
        Self::new(brackets)
    }

    pub fn brackets(&self) -> &[FeeBracket<T>] {
        &self.brackets
    }

    /// Index of the bracket containing `ov` (`ov >= 0`).
    pub fn bracket_index(&self, ov: T) -> usize {
        self.brackets
            .iter()
            .position(|b| b.upper.is_none_or(|u| ov < u))
            .unwrap_or(self.brackets.len() - 1)
    }

    pub fn fee_for(&self, ov: T) -> T {
        self.brackets[self.bracket_index(ov)].fee
    }

    /// Returns a copy with every fee passed through `f`.
    pub fn map_fees(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.brackets
                .iter()
                .map(|b| FeeBracket {
                    lower: b.lower,
                    upper: b.upper,
                    fee: f(b.fee),
                })
                .collect(),
        )
    }
}

impl<T: Scalar> TryFrom<Vec<FeeBracket<T>>> for FeeSchedule<T> {
    type Error = Error;

    fn try_from(brackets: Vec<FeeBracket<T>>) -> Result<Self> {
        Self::new(brackets)
    }
}

impl<T> From<FeeSchedule<T>> for Vec<FeeBracket<T>> {
    fn from(s: FeeSchedule<T>) -> Self {
        s.brackets
    }
}

/// A delivery alternative offered at checkout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct DeliveryOptionSpec<T> {
    pub id: String,
    pub speed: Speed,
    pub slot: Slot,
    pub time: TimeOfDay,
    pub date: DateAvailability,
    pub fees: FeeSchedule<T>,
}

impl<T: Scalar> DeliveryOptionSpec<T> {
    pub fn fee_for(&self, ov: T) -> T {
        self.fees.fee_for(ov)
    }
}
