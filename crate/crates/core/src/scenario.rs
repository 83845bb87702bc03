//! Synthetic fore-aft shuttle sessions and the head motion they induce.
//!
//! A session is `n_sets` motion sets separated by breaks, followed by a
//! recovery period at rest. Within a set the vehicle shuttles back and
//! forth over `distance` with a trapezoidal (or triangular) velocity
//! profile and a dwell at each end; every set opens with a dwell so motion
//! starts from rest. Only complete traverses are placed,
//! so the vehicle is at rest at every set boundary.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::motion::{MotionSample, MotionTrace};
use crate::vec3::Vec3;

const EPS_T: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuttleConfig {
    /// One-way traverse length, m.
    pub distance: f64,
    /// Cruise speed cap, m/s.
    pub v_max: f64,
    /// Acceleration magnitude while speeding up or braking, m/s².
    pub a_peak: f64,
    /// Pause at each end of a traverse, s.
    pub dwell: f64,
    pub set_duration: f64,
    pub n_sets: usize,
    pub break_duration: f64,
    pub recovery_duration: f64,
    /// Sample spacing of generated traces, s.
    pub dt: f64,
    /// Spacing of MISC reports within sets and recovery, s.
    pub report_interval: f64,
}

impl Default for ShuttleConfig {
    fn default() -> Self {
        ShuttleConfig {
            distance: 3.0,
            v_max: 1.67,
            a_peak: 1.0,
            dwell: 0.5,
            set_duration: 300.0,
            n_sets: 4,
            break_duration: 30.0,
            recovery_duration: 300.0,
            dt: 0.01,
            report_interval: 60.0,
        }
    }
}

impl ShuttleConfig {
    /// Scheduled session length without an early stop.
    pub fn total_duration(&self) -> f64 {
        self.n_sets as f64 * self.set_duration
            + self.n_sets.saturating_sub(1) as f64 * self.break_duration
            + self.recovery_duration
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("distance", self.distance),
            ("v_max", self.v_max),
            ("a_peak", self.a_peak),
            ("set_duration", self.set_duration),
            ("dt", self.dt),
            ("report_interval", self.report_interval),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::UnsolvableProfile(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("dwell", self.dwell),
            ("break_duration", self.break_duration),
            ("recovery_duration", self.recovery_duration),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.n_sets == 0 {
            return Err(Error::Invalid("n_sets must be at least 1".into()));
        }
        Ok(())
    }
}

/// Timing of a single traverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraverseShape {
    pub t_acc: f64,
    pub t_cruise: f64,
    pub v_peak: f64,
    pub triangular: bool,
}

impl TraverseShape {
    pub fn solve(cfg: &ShuttleConfig) -> Result<Self> {
        cfg.validate()?;
        let (a, d, v) = (cfg.a_peak, cfg.distance, cfg.v_max);
        let shape = if a * d > v * v {
            TraverseShape {
                t_acc: v / a,
                t_cruise: (d - v * v / a) / v,
                v_peak: v,
                triangular: false,
            }
        } else {
            let v_peak = (a * d).sqrt();
            TraverseShape {
                t_acc: v_peak / a,
                t_cruise: 0.0,
                v_peak,
                triangular: true,
            }
        };
        if shape.duration() + 2.0 * cfg.dwell > cfg.set_duration {
            return Err(Error::UnsolvableProfile(format!(
                "a {:.3} s traverse does not fit in a {} s set",
                shape.duration() + cfg.dwell,
                cfg.set_duration
            )));
        }
        Ok(shape)
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.t_acc + self.t_cruise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Set(usize),
    Break(usize),
    Recovery,
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseKind::Set(k) => write!(f, "set_{k}"),
            PhaseKind::Break(k) => write!(f, "break_{k}"),
            PhaseKind::Recovery => f.write_str("recovery"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub kind: PhaseKind,
    pub start: f64,
    pub end: f64,
}

/// One traverse: start time and direction (+1 forward, -1 backward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traverse {
    pub start: f64,
    pub end: f64,
    pub direction: f64,
}

/// Constant acceleration over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AccelSegment {
    start: f64,
    end: f64,
    accel: f64,
}

/// Piecewise-constant fore-aft acceleration in the Earth frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelProfile {
    pub dt: f64,
    pub duration: f64,
    pub shape: TraverseShape,
    pub phases: Vec<Phase>,
    pub traverses: Vec<Traverse>,
    segments: Vec<AccelSegment>,
    report_interval: f64,
    stop_time: Option<f64>,
}

/// Builds the full session profile.
pub fn shuttle_accel_profile(cfg: &ShuttleConfig) -> Result<AccelProfile> {
    build_profile(cfg, None)
}

/// Builds the session with the motion challenge ended at `stop_time`: the
/// traverse in progress is completed, later sets are dropped, and the
/// recovery period starts when the vehicle is at rest.
pub fn shuttle_accel_profile_stopped(cfg: &ShuttleConfig, stop_time: f64) -> Result<AccelProfile> {
    build_profile(cfg, Some(stop_time))
}

fn build_profile(cfg: &ShuttleConfig, stop: Option<f64>) -> Result<AccelProfile> {
    let shape = TraverseShape::solve(cfg)?;
    let one_way = shape.duration();
    let stop_at = stop.unwrap_or(f64::INFINITY);
    let mut phases = Vec::new();
    let mut traverses = Vec::new();
    let mut segments = Vec::new();

    let mut t = 0.0;
    for k in 1..=cfg.n_sets {
        let set_start = t;
        let set_end = set_start + cfg.set_duration;
        let mut tau = set_start + cfg.dwell;
        let mut direction = 1.0;
        let mut last_end = set_start;
        while tau + one_way <= set_end + EPS_T && tau < stop_at {
            let accel = direction * cfg.a_peak;
            segments.push(AccelSegment {
                start: tau,
                end: tau + shape.t_acc,
                accel,
            });
            let brake = tau + shape.t_acc + shape.t_cruise;
            segments.push(AccelSegment {
                start: brake,
                end: brake + shape.t_acc,
                accel: -accel,
            });
            traverses.push(Traverse {
                start: tau,
                end: tau + one_way,
                direction,
            });
            last_end = tau + one_way;
            tau += one_way + cfg.dwell;
            direction = -direction;
        }
        if stop_at < set_end {
            // recovery starts on the sample grid so the session end is sampled
            let end = last_end.max(stop_at.max(set_start));
            let end = (end / cfg.dt - 1e-9).ceil() * cfg.dt;
            phases.push(Phase {
                kind: PhaseKind::Set(k),
                start: set_start,
                end,
            });
            t = end;
            break;
        }
        phases.push(Phase {
            kind: PhaseKind::Set(k),
            start: set_start,
            end: set_end,
        });
        t = set_end;
        if k < cfg.n_sets {
            let break_end = t + cfg.break_duration;
            if stop_at < break_end {
                t = stop_at.max(t);
                break;
            }
            phases.push(Phase {
                kind: PhaseKind::Break(k),
                start: t,
                end: break_end,
            });
            t = break_end;
        }
    }
    phases.push(Phase {
        kind: PhaseKind::Recovery,
        start: t,
        end: t + cfg.recovery_duration,
    });
    Ok(AccelProfile {
        dt: cfg.dt,
        duration: t + cfg.recovery_duration,
        shape,
        phases,
        traverses,
        segments,
        report_interval: cfg.report_interval,
        stop_time: stop,
    })
}

impl AccelProfile {
    /// Fore-aft acceleration at `t`; right-continuous at piece boundaries.
    pub fn accel_at(&self, t: f64) -> f64 {
        let i = self.segments.partition_point(|s| s.end <= t);
        match self.segments.get(i) {
            Some(s) if s.start <= t => s.accel,
            _ => 0.0,
        }
    }

    /// Times at which the acceleration changes value.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.segments.iter().flat_map(|s| [s.start, s.end]).collect();
        out.dedup();
        out
    }

    /// Exact velocity and position at `t` from rest at the origin.
    pub fn kinematics_at(&self, t: f64) -> (f64, f64) {
        let (mut v, mut x, mut now) = (0.0, 0.0, 0.0);
        for s in &self.segments {
            if s.start >= t {
                break;
            }
            x += v * (s.start - now);
            let span = s.end.min(t) - s.start;
            x += v * span + 0.5 * s.accel * span * span;
            v += s.accel * span;
            now = s.start + span;
        }
        x += v * (t - now);
        (v, x)
    }

    /// Grid times `0, dt, ...` covering the session.
    pub fn grid(&self) -> Vec<f64> {
        let n = (self.duration / self.dt + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.dt).collect()
    }

    pub fn stop_time(&self) -> Option<f64> {
        self.stop_time
    }

    /// When the motion challenge ends and recovery begins.
    pub fn recovery_start(&self) -> f64 {
        self.phases.last().map_or(0.0, |p| p.start)
    }

    pub fn in_motion_phase(&self, t: f64) -> bool {
        self.phases
            .iter()
            .any(|p| matches!(p.kind, PhaseKind::Set(_)) && t >= p.start - EPS_T && t <= p.end + EPS_T)
    }

    /// MISC reporting instants: a baseline at 0, every report interval into
    /// each set (up to the stop time), and every interval into recovery.
    pub fn report_times(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let step = self.report_interval;
        for p in &self.phases {
            let limit = match p.kind {
                PhaseKind::Set(_) => p.end.min(self.stop_time.unwrap_or(f64::INFINITY)),
                PhaseKind::Recovery => p.end,
                PhaseKind::Break(_) => continue,
            };
            let mut k = 1;
            while p.start + k as f64 * step <= limit + EPS_T {
                out.push(p.start + k as f64 * step);
                k += 1;
            }
        }
        out
    }

    /// `t,phase` rows, one per phase start.
    pub fn write_timeline_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,phase")?;
        for p in &self.phases {
            writeln!(w, "{},{}", sig9(p.start), p.kind)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadTilt {
    /// Head held on the Earth vertical.
    Static,
    /// Head pitched to keep its z-axis on the gravito-inertial acceleration.
    Move,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadTiltCondition {
    pub tilt: HeadTilt,
    /// First-order tracking lag of the head pitch, s. Zero means perfect tracking.
    pub tau_head: f64,
}

impl HeadTiltCondition {
    pub fn new(tilt: HeadTilt) -> Self {
        HeadTiltCondition { tilt, tau_head: 0.0 }
    }

    pub fn name(&self) -> &'static str {
        match self.tilt {
            HeadTilt::Static => "static",
            HeadTilt::Move => "move",
        }
    }
}

impl std::fmt::Display for HeadTilt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(HeadTiltCondition::new(*self).name())
    }
}

impl std::str::FromStr for HeadTilt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(HeadTilt::Static),
            "move" => Ok(HeadTilt::Move),
            other => Err(Error::Invalid(format!("unknown head-tilt condition `{other}`"))),
        }
    }
}

/// Pitch that puts the head z-axis on the GIA `(a_x, 0, g0)`.
pub fn gia_pitch(a_x: f64, g0: f64) -> f64 {
    a_x.atan2(g0)
}

/// Head-frame motion sample for pitch `theta` and pitch rate `theta_dot`.
fn pitched_sample(t: f64, a_x: f64, g0: f64, theta: f64, theta_dot: f64) -> MotionSample {
    let (s, c) = theta.sin_cos();
    MotionSample {
        t,
        f: Vec3::new(c * a_x - s * g0, 0.0, s * a_x + c * g0),
        omega: Vec3::new(0.0, theta_dot, 0.0),
        a: Vec3::new(c * a_x, 0.0, s * a_x),
    }
}

/// Head motion induced by the shuttle profile under a head-tilt condition.
pub fn head_motion(profile: &AccelProfile, condition: &HeadTiltCondition, g0: f64) -> Result<MotionTrace> {
    if !(condition.tau_head >= 0.0) {
        return Err(Error::Invalid(format!(
            "tau_head must be >= 0, got {}",
            condition.tau_head
        )));
    }
    let grid = profile.grid();
    let accel: Vec<f64> = grid.iter().map(|&t| profile.accel_at(t)).collect();
    let samples = match condition.tilt {
        HeadTilt::Static => grid
            .iter()
            .zip(&accel)
            .map(|(&t, &a_x)| pitched_sample(t, a_x, g0, 0.0, 0.0))
            .collect(),
        HeadTilt::Move if condition.tau_head == 0.0 => {
            // Pitch is piecewise constant; its rate is nonzero only at
            // piece boundaries, where a central difference spreads the jump.
            let theta: Vec<f64> = accel.iter().map(|&a| gia_pitch(a, g0)).collect();
            let n = theta.len();
            (0..n)
                .map(|i| {
                    let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                    let rate = if theta[lo] == theta[hi] {
                        0.0
                    } else {
                        (theta[hi] - theta[lo]) / ((hi - lo) as f64 * profile.dt)
                    };
                    pitched_sample(grid[i], accel[i], g0, theta[i], rate)
                })
                .collect()
        }
        HeadTilt::Move => lagged_head(profile, &grid, &accel, g0, condition.tau_head),
    };
    MotionTrace::new(samples)
}

/// Exact first-order lag of the pitch target, stepping across every
/// acceleration breakpoint between grid points.
fn lagged_head(profile: &AccelProfile, grid: &[f64], accel: &[f64], g0: f64, tau: f64) -> Vec<MotionSample> {
    let breaks = profile.breakpoints();
    let mut next_break = 0;
    let mut theta = 0.0;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for (&t, &a_x) in grid.iter().zip(accel) {
        while now < t {
            while next_break < breaks.len() && breaks[next_break] <= now {
                next_break += 1;
            }
            let until = breaks.get(next_break).map_or(t, |&b| b.min(t));
            let target = gia_pitch(profile.accel_at(now), g0);
            theta = target + (theta - target) * (-(until - now) / tau).exp();
            now = until;
        }
        let target = gia_pitch(a_x, g0);
        out.push(pitched_sample(t, a_x, g0, theta, (target - theta) / tau));
    }
    out
}

/// Profile and head motion for one condition.
pub fn shuttle_session(
    cfg: &ShuttleConfig,
    condition: &HeadTiltCondition,
    g0: f64,
) -> Result<(AccelProfile, MotionTrace)> {
    let profile = shuttle_accel_profile(cfg)?;
    let motion = head_motion(&profile, condition, g0)?;
    Ok((profile, motion))
}
