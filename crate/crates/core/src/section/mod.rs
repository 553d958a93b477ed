//! From a positivity certificate to geometry: rationalized periods, the
//! circle-valued primitive, level-set cross sections, the first-return map
//! and suspensions.

mod export;
mod flow;
mod level;
mod rational;
mod suspend;

pub use export::{poincare_csv, section_csv};
pub use flow::{
    flow_to_return, invariant_measure_check, poincare_map, time_one_jacobian_deviation,
    FlowIntegrator, IntegratorStats, MeasureReport, PoincareData, ReturnResult,
};
pub use level::{circle_map, extract_section, CircleMap, CrossSection, SectionSample};
pub use rational::{periods, rationalize_periods, PeriodData, DEFAULT_Q_MAX};
pub use suspend::{suspend, BaseMap, SuspensionSpec};
