//! Tobit exponential smoothing in innovations state-space form.
//!
//! Censored series (sales clipped by stock, signals clipped by saturation)
//! are filtered with a censoring-aware innovations recursion, optionally on
//! a time-aggregated system where the censoring constraint applies to
//! within-cycle sums. The crate also carries the simulators and the
//! closed-loop newsvendor experiment used to compare censoring-blind and
//! censoring-aware forecasters.

pub mod aggregation;
pub mod error;
pub mod estimation;
pub mod filter;
pub mod forecast;
pub mod inventory;
pub mod io;
pub mod model;
pub mod normal;
pub mod optimizer;
pub mod simulation;

pub use aggregation::{augment, cumulator, filter_aggregated, AugmentedSystem, CumulatorSchedule};
pub use error::{Error, Result};
pub use estimation::{fit, FitOptions, FittedModel, ParameterVector};
pub use filter::{filter_series, step, CensoredObservation, FilterResult, StateSpace};
pub use forecast::{aggregate_next_cycle, csl_quantile, forecast, ForecastDistribution};
pub use model::{build_aaa, build_ana, build_ses, ModelKind, ModelSpec, SystemMatrices};
pub use normal::truncated_normal_mean_above;
pub use simulation::{apply_daily_censoring, apply_saturation, simulate_ets, DemandSeries};
