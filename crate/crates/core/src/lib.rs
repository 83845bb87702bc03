//! Motion-sickness symptom progression from head motion.
//!
//! A subjective-vertical-conflict observer turns 6DoF head motion into a
//! vertical conflict signal; one of four output parts maps the conflict
//! magnitude onto the MISC rating scale. Output-part parameters can be
//! identified per individual from observed MISC series.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod fmt;
pub mod motion;
pub mod ode;
pub mod output;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod svc;
pub mod vec3;

pub use error::{Error, Result};
pub use motion::{MiscObservation, MiscTrace, MotionSample, MotionTrace};
pub use output::{OutputParams, OutputState, OutputVariant};
pub use sim::{simulate, SimConfig, SimResult};
pub use svc::{SvcParams, SvcState};
pub use vec3::Vec3;
