//! Built-in scenarios and option sets.

use crate::model::{
    DateAvailability, DeliveryOptionSpec, FeeSchedule, Scenario, Slot, Speed, TimeOfDay,
};
use crate::scalar::Scalar;

/// Order value thresholds of the standard fee brackets: `[0,25) [25,50) [50,100) [100,∞)`.
pub const FEE_THRESHOLDS: [f64; 3] = [25.0, 50.0, 100.0];

/// Three options (2-5 days, one day, same day) with no time slot, daytime delivery on all
/// days, and the given fees per standard bracket.
pub fn standard_options<T: Scalar>(fees: [[f64; 4]; 3]) -> Vec<DeliveryOptionSpec<T>> {
    Speed::ALL
        .iter()
        .zip(fees)
        .enumerate()
        .map(|(i, (&speed, fees))| DeliveryOptionSpec {
            id: (i + 1).to_string(),
            speed,
            slot: Slot::None,
            time: TimeOfDay::Daytime,
            date: DateAvailability::AllDays,
            fees: FeeSchedule::from_thresholds(&FEE_THRESHOLDS, &fees)
                .expect("built-in fee table is a valid partition"),
        })
        .collect()
}

const STANDARD_FREE: [f64; 4] = [6.0, 0.0, 0.0, 0.0];
const STANDARD_PAID: [f64; 4] = [6.0, 7.0, 8.0, 10.0];
const ONE_DAY: [f64; 4] = [12.0, 15.0, 17.0, 20.0];
const SAME_DAY: [f64; 4] = [18.0, 20.0, 22.0, 27.0];
const ONE_DAY_DISCOUNTED: [f64; 4] = [8.4, 10.5, 11.9, 14.0];
const SAME_DAY_DISCOUNTED: [f64; 4] = [12.6, 14.0, 15.4, 18.9];

/// S1: free standard shipping from $25.
pub fn s1<T: Scalar>() -> Scenario<T> {
    Scenario::new("S1", standard_options([STANDARD_FREE, ONE_DAY, SAME_DAY]))
}

/// S2: standard shipping always paid.
pub fn s2<T: Scalar>() -> Scenario<T> {
    Scenario::new("S2", standard_options([STANDARD_PAID, ONE_DAY, SAME_DAY]))
}

/// S3: S1 with express fees at 70%.
pub fn s3<T: Scalar>() -> Scenario<T> {
    Scenario::new(
        "S3",
        standard_options([STANDARD_FREE, ONE_DAY_DISCOUNTED, SAME_DAY_DISCOUNTED]),
    )
}

/// S4: S2 with express fees at 70%.
pub fn s4<T: Scalar>() -> Scenario<T> {
    Scenario::new(
        "S4",
        standard_options([STANDARD_PAID, ONE_DAY_DISCOUNTED, SAME_DAY_DISCOUNTED]),
    )
}

/// The four fee-schedule scenarios, S1 through S4.
pub fn scenarios<T: Scalar>() -> Vec<Scenario<T>> {
    vec![s1(), s2(), s3(), s4()]
}

pub fn scenario_by_name<T: Scalar>(name: &str) -> Option<Scenario<T>> {
    scenarios()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
}

/// Option set used when generating total value estimation data.
pub fn estimation_scenario<T: Scalar>() -> Scenario<T> {
    Scenario::new(
        "estimation",
        standard_options([[6.0, 3.0, 3.0, 3.0], ONE_DAY, SAME_DAY]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn express_discount_is_seventy_percent() {
        for (full, cut) in [
            (ONE_DAY, ONE_DAY_DISCOUNTED),
            (SAME_DAY, SAME_DAY_DISCOUNTED),
        ] {
            for (a, b) in full.iter().zip(cut) {
                assert!((a * 0.7 - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(scenario_by_name::<f64>("s3").unwrap().name, "S3");
        assert!(scenario_by_name::<f64>("S9").is_none());
        for s in scenarios::<f64>() {
            s.validate().unwrap();
        }
    }
}
