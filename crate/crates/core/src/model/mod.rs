//! Delivery option, order value, and total value choice levels.

pub mod demand;
pub mod options;
pub mod params;
pub mod scenario;

pub use demand::{
    evaluate_household, fee_for, household_size_term, option_choice, option_utility,
    order_value_utility, order_value_utility_with_logsum, sample_household_week, shares_by_speed,
    total_value_utility, DemandModel, DemandResult, EvaluationMode, HouseholdDemand, OptionChoice,
    OrderEvent, SampledWeek,
};
pub use options::{
    DateAvailability, DeliveryOptionSpec, FeeBracket, FeeSchedule, Slot, Speed, TimeOfDay,
};
pub use params::{ChoiceModelParams, ParamOverrides};
pub use scenario::{HouseholdProfile, Scenario, ValueGrid};
