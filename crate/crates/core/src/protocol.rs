//! Synthetic reproduction of the shuttle experiment: a session is simulated
//! with known output parameters, MISC is reported at the reporting instants,
//! and the motion challenge stops at the first report reaching the stop
//! level, after which the recovery period follows.

use crate::error::Result;
use crate::fit::ConditionData;
use crate::motion::{MiscTrace, MotionTrace};
use crate::output::OutputParams;
use crate::scenario::{
    head_motion, shuttle_accel_profile, shuttle_accel_profile_stopped, AccelProfile, HeadTiltCondition, ShuttleConfig,
};
use crate::sim::{compute_conflict, predict_at, SimConfig};
use crate::svc::SvcParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub shuttle: ShuttleConfig,
    pub sim: SimConfig,
    /// A motion-phase report at or above this level ends the motion challenge.
    pub stop_level: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            shuttle: ShuttleConfig::default(),
            sim: SimConfig::default(),
            stop_level: 6.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub condition: HeadTiltCondition,
    pub profile: AccelProfile,
    pub motion: MotionTrace,
    /// Raw model MISC at the report times.
    pub truth: MiscTrace,
    /// Reports rounded to the nearest integer on the 0 to 10 scale.
    pub observed: MiscTrace,
}

impl ProtocolRun {
    pub fn stop_time(&self) -> Option<f64> {
        self.profile.stop_time()
    }

    pub fn condition_data(&self) -> Result<ConditionData> {
        ConditionData::new(self.motion.clone(), self.observed.clone())
    }
}

/// Rounds a model MISC value to an integer rating.
pub fn quantize_misc(value: f64) -> f64 {
    value.clamp(0.0, 10.0).round()
}

fn reports(
    profile: &AccelProfile,
    motion: &MotionTrace,
    svc: &SvcParams,
    out_p: &OutputParams,
    sim: &SimConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let conflict = compute_conflict(motion, svc, sim)?;
    let times = profile.report_times();
    let values = predict_at(&conflict, out_p, &times)?;
    Ok((times, values))
}

pub fn run_protocol(
    cfg: &ProtocolConfig,
    condition: &HeadTiltCondition,
    svc: &SvcParams,
    out_p: &OutputParams,
) -> Result<ProtocolRun> {
    out_p.validate()?;
    let mut profile = shuttle_accel_profile(&cfg.shuttle)?;
    let mut motion = head_motion(&profile, condition, svc.g0)?;
    let (mut times, mut values) = reports(&profile, &motion, svc, out_p, &cfg.sim)?;

    let stop = times
        .iter()
        .zip(&values)
        .find(|(&t, &v)| t > 0.0 && profile.in_motion_phase(t) && quantize_misc(v) >= cfg.stop_level)
        .map(|(&t, _)| t);
    if let Some(t_stop) = stop {
        profile = shuttle_accel_profile_stopped(&cfg.shuttle, t_stop)?;
        motion = head_motion(&profile, condition, svc.g0)?;
        (times, values) = reports(&profile, &motion, svc, out_p, &cfg.sim)?;
    }

    let observed: Vec<f64> = values.iter().map(|&v| quantize_misc(v)).collect();
    Ok(ProtocolRun {
        condition: *condition,
        truth: MiscTrace::from_pairs(&times, &values)?,
        observed: MiscTrace::from_pairs(&times, &observed)?,
        profile,
        motion,
    })
}
