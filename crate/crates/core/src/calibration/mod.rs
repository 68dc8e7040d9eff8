//! Aggregate calibration and sequential maximum-likelihood estimation.

pub mod aggregate;
pub mod dataset;
pub mod mnl;
pub mod sequential;
pub mod simplex;

pub use aggregate::{
    aggregates_from_results, calibrate, simulate_aggregates, Aggregates, CalibrationReport,
    CalibrationTargets, CategoryTargets, FreeBound, FreeParameter, FreeParameterSet,
};
pub use dataset::{AlternativeSet, ChoiceDataset, DatasetBuilder, Observation};
pub use mnl::{fit_mnl, mnl_evaluate, mnl_loglik_and_gradient, FitOptions, FitStatus, MnlFit};
pub use sequential::{
    fit_sequential, simulate_sequential_data, CoefficientCheck, SequentialData, SequentialFit,
    SimulationDesign,
};
pub use simplex::{minimize, Bounds, SimplexOptions, SimplexResult, StopReason};
