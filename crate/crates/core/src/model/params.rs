use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::options::DeliveryOptionSpec;
use crate::scalar::Scalar;

/// Coefficients of the three choice levels.
///
/// Part-worth arrays follow the declaration order of the attribute enums:
/// speed `[2-5 days, one day, same day]`, slot `[none, 2 hr, 4 hr]`,
/// time `[daytime, daytime & evening]`, date `[weekday, weekday & Saturday, all days]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceModelParams<T> {
    pub beta_speed: [T; 3],
    pub beta_slot: [T; 3],
    pub beta_time: [T; 2],
    pub beta_date: [T; 3],
    /// Per unit of `ln(fee + 1)`, fee in US$.
    pub beta_fee: T,
    pub beta_logsumdo: T,
    /// Per squared week between orders.
    pub beta_interval: T,
    /// Per US$ of order value.
    pub beta_storage: T,
    pub beta_logsumov: T,
    /// Per squared US$ of gap between need and weekly total value.
    pub beta_hhs: T,
    /// Weekly purchase need per household member, US$.
    pub alpha: T,
}

impl<T: Scalar> Default for ChoiceModelParams<T> {
    /// The reference parameter set.
    fn default() -> Self {
        let l = T::lit;
        Self {
            beta_speed: [l(-0.259), l(0.082), l(0.177)],
            beta_slot: [l(-0.157), l(0.113), l(0.040)],
            beta_time: [l(-0.090), l(0.090)],
            beta_date: [l(-0.063), l(0.054), l(0.009)],
            beta_fee: l(-1.377),
            beta_logsumdo: l(1.05),
            beta_interval: l(-0.111),
            beta_storage: l(-0.0183),
            beta_logsumov: l(0.0597),
            beta_hhs: l(-0.000175),
            alpha: l(12.3),
        }
    }
}

impl<T: Scalar> ChoiceModelParams<T> {
    pub fn zeros() -> Self {
        let z = T::zero();
        Self {
            beta_speed: [z; 3],
            beta_slot: [z; 3],
            beta_time: [z; 2],
            beta_date: [z; 3],
            beta_fee: z,
            beta_logsumdo: z,
            beta_interval: z,
            beta_storage: z,
            beta_logsumov: z,
            beta_hhs: z,
            alpha: z,
        }
    }

    /// Name/value pairs in a fixed order; used for validation and reporting.
    pub fn named_values(&self) -> Vec<(String, T)> {
        let mut out = Vec::with_capacity(22);
        let mut push_array = |name: &str, values: &[T]| {
            for (i, v) in values.iter().enumerate() {
                out.push((format!("{name}[{i}]"), *v));
            }
        };
        push_array("beta_speed", &self.beta_speed);
        push_array("beta_slot", &self.beta_slot);
        push_array("beta_time", &self.beta_time);
        push_array("beta_date", &self.beta_date);
        out.extend([
            ("beta_fee".to_string(), self.beta_fee),
            ("beta_logsumdo".to_string(), self.beta_logsumdo),
            ("beta_interval".to_string(), self.beta_interval),
            ("beta_storage".to_string(), self.beta_storage),
            ("beta_logsumov".to_string(), self.beta_logsumov),
            ("beta_hhs".to_string(), self.beta_hhs),
            ("alpha".to_string(), self.alpha),
        ]);
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self
            .named_values()
            .into_iter()
            .find(|(_, v)| !v.is_finite())
        {
            Some((name, v)) => Err(Error::config(name, format!("must be finite, got {v}"))),
            None => Ok(()),
        }
    }

    /// Sum of the categorical part-worths of an option (everything but the fee term).
    pub fn part_worth(&self, option: &DeliveryOptionSpec<T>) -> T {
        self.beta_speed[option.speed.index()]
            + self.beta_slot[option.slot.index()]
            + self.beta_time[option.time.index()]
            + self.beta_date[option.date.index()]
    }

    pub fn cast<U: Scalar>(&self) -> ChoiceModelParams<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        ChoiceModelParams {
            beta_speed: self.beta_speed.map(c),
            beta_slot: self.beta_slot.map(c),
            beta_time: self.beta_time.map(c),
            beta_date: self.beta_date.map(c),
            beta_fee: c(self.beta_fee),
            beta_logsumdo: c(self.beta_logsumdo),
            beta_interval: c(self.beta_interval),
            beta_storage: c(self.beta_storage),
            beta_logsumov: c(self.beta_logsumov),
            beta_hhs: c(self.beta_hhs),
            alpha: c(self.alpha),
        }
    }
}

/// Partial parameter set; present fields replace the corresponding base values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_speed: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_slot: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_time: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_date: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_fee: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_logsumdo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_storage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_logsumov: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_hhs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl ParamOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply<T: Scalar>(&self, base: &ChoiceModelParams<T>) -> ChoiceModelParams<T> {
        let mut p = *base;
        if let Some(v) = self.beta_speed {
            p.beta_speed = v.map(T::lit);
        }
        if let Some(v) = self.beta_slot {
            p.beta_slot = v.map(T::lit);
        }
        if let Some(v) = self.beta_time {
            p.beta_time = v.map(T::lit);
        }
        if let Some(v) = self.beta_date {
            p.beta_date = v.map(T::lit);
        }
        let set = |slot: &mut T, v: Option<f64>| {
            if let Some(v) = v {
                *slot = T::lit(v);
            }
        };
        set(&mut p.beta_fee, self.beta_fee);
        set(&mut p.beta_logsumdo, self.beta_logsumdo);
        set(&mut p.beta_interval, self.beta_interval);
        set(&mut p.beta_storage, self.beta_storage);
        set(&mut p.beta_logsumov, self.beta_logsumov);
        set(&mut p.beta_hhs, self.beta_hhs);
        set(&mut p.alpha, self.alpha);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let p = ChoiceModelParams::<f64>::default();
        assert_eq!(p.beta_speed, [-0.259, 0.082, 0.177]);
        assert_eq!(p.beta_slot, [-0.157, 0.113, 0.040]);
        assert_eq!(p.beta_time, [-0.090, 0.090]);
        assert_eq!(p.beta_date, [-0.063, 0.054, 0.009]);
        assert_eq!(p.beta_fee, -1.377);
        assert_eq!(p.beta_logsumdo, 1.05);
        assert_eq!(p.beta_interval, -0.111);
        assert_eq!(p.beta_storage, -0.0183);
        assert_eq!(p.beta_logsumov, 0.0597);
        assert_eq!(p.beta_hhs, -0.000175);
        assert_eq!(p.alpha, 12.3);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn overrides_replace_only_given_fields() {
        let o: ParamOverrides =
            serde_json::from_str(r#"{"alpha": 20.0, "beta_time": [0.0, 0.5]}"#).unwrap();
        let p = o.apply(&ChoiceModelParams::<f64>::default());
        assert_eq!(p.alpha, 20.0);
        assert_eq!(p.beta_time, [0.0, 0.5]);
        assert_eq!(p.beta_fee, -1.377);
        assert!(serde_json::from_str::<ParamOverrides>(r#"{"alpah": 1}"#).is_err());
    }

    #[test]
    fn validation_names_field() {
        let mut p = ChoiceModelParams::<f64>::default();
        p.beta_date[2] = f64::NAN;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("beta_date[2]"), "{err}");
    }
}
