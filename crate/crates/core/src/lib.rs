//! Simulation and data-driven PI tuning of a two-leg buck converter.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases at the bottom fix it to `f64`.

// NaN must fail validation, so `!(x > 0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod circuit;
pub mod control;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod ode;
pub mod pipeline;
pub mod plant;
pub mod report;
pub mod scalar;
pub mod series;
pub mod signals;
pub mod tuning;

pub use circuit::{build_model, equilibrium, parallel, BilinearModel, CircuitParameters};
pub use control::{
    closed_loop, controller_step, saturate, ControllerState, ConverterLoop, PiController,
};
pub use error::{Error, Result};
pub use metrics::{compute_metrics, MetricsConfig, PerformanceReport};
pub use plant::{
    apply_noise, integrate, integrate_averaged, integrate_switched, pwm_generate, DutySource,
    InitialState, Plant, PlantMode, Schedule, SimulationPlan,
};
pub use report::KeyValueReport;
pub use scalar::Real;
pub use series::TimeSeries;
pub use signals::{
    accumulate, chirp, discretize_first_order, virtual_error, virtual_reference, ChirpSpec,
    ReferenceModel,
};
pub use tuning::{
    find_ultimate_gain, vrft_fit, vrft_fit_aw, zn_gains, ControllerGains, FitReport,
    UltimateGainResult,
};

pub type Params = CircuitParameters<f64>;
pub type Model = BilinearModel<f64>;
pub type Series = TimeSeries<f64>;
pub type Gains = ControllerGains<f64>;
pub type Report = PerformanceReport<f64>;
pub type Params32 = CircuitParameters<f32>;
pub type Series32 = TimeSeries<f32>;
pub type Gains32 = ControllerGains<f32>;
