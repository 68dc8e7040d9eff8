//! Household e-commerce delivery demand simulation.
//!
//! Three nested multinomial logit levels (weekly total value, order value, delivery option)
//! are linked through log-sums. On top of the model sit population runs and scenario
//! comparison ([`engine`]), calibration to aggregate targets and sequential maximum likelihood
//! ([`calibration`]), and synthesis of package streams ([`pipeline`]).
//!
//! The choice kernel and the demand model are generic over [`Scalar`] (`f32` or `f64`); the
//! population-level subsystems work in `f64` through the aliases below.

pub mod builtin;
pub mod calibration;
pub mod choice;
pub mod engine;
pub mod error;
pub mod io;
pub mod model;
mod parallel;
pub mod pipeline;
pub mod population;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Params = model::ChoiceModelParams<f64>;
pub type Scenario = model::Scenario<f64>;
pub type DeliveryOption = model::DeliveryOptionSpec<f64>;
pub type FeeSchedule = model::FeeSchedule<f64>;
pub type DemandModel = model::DemandModel<f64>;
pub type DemandResult = model::DemandResult<f64>;
pub type UtilityVector = choice::UtilityVector<f64>;
pub type ChoiceDistribution = choice::ChoiceDistribution<f64>;
