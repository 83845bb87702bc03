//! End-to-end fixed-step simulation from head motion to conflict and MISC.
//!
//! The observer and output part are advanced together with classical RK4.
//! The output part never feeds back into the observer, so one joint RK4
//! step is computed as the observer step (recording `‖Δv‖` at each of the
//! four stages) followed by the output step driven by those stage values.
//! [`ConflictTrace`] keeps the stage values so the output part can be
//! re-integrated for many parameter sets without repeating the observer.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::motion::{MiscTrace, MotionTrace};
use crate::ode::{rk4_combine, OdeState};
#[cfg(doc)]
use crate::output::output_derivatives;
use crate::output::{output_misc, present, OutputParams, OutputState};
use crate::svc::{conflict_norm, derivatives_with_feedback, initial_state, resolve_feedback, SvcParams, SvcState};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Integration step, s. Must not exceed the motion trace spacing.
    pub dt_sim: f64,
    /// Clamp reported MISC to [0, 10].
    pub clamp_output: bool,
    /// Store every `record_stride`-th step.
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_sim: 0.01,
            clamp_output: false,
            record_stride: 10,
        }
    }
}

impl SimConfig {
    fn validate(&self, motion: &MotionTrace) -> Result<()> {
        if !(self.dt_sim > 0.0) || !self.dt_sim.is_finite() {
            return Err(Error::Invalid(format!("dt_sim must be > 0, got {}", self.dt_sim)));
        }
        if self.dt_sim > motion.dt() * (1.0 + 1e-9) {
            return Err(Error::Invalid(format!(
                "dt_sim {} exceeds the motion sample spacing {}",
                self.dt_sim,
                motion.dt()
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Invalid("record_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Conflict signals at one recorded instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictSample {
    pub t: f64,
    pub dv_norm: f64,
    pub delta_v: Vec3,
    pub delta_a: Vec3,
    pub delta_omega: Vec3,
    /// Observer state at `t`.
    pub state: SvcState,
}

/// Observer run over a motion trace.
#[derive(Debug, Clone)]
pub struct ConflictTrace {
    t0: f64,
    dt: f64,
    /// `‖Δv‖` at the four RK4 stages of each step.
    stage_dv: Vec<[f64; 4]>,
    /// Conflict at steps `0, stride, 2 stride, ...` and the final step.
    pub records: Vec<(usize, ConflictSample)>,
    pub final_state: SvcState,
}

impl ConflictTrace {
    /// Conflict trace from prescribed `‖Δv‖` stage values, for driving the
    /// output part without the observer. Only the final step is recorded.
    pub fn from_stage_norms(t0: f64, dt: f64, stage_dv: Vec<[f64; 4]>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::Invalid(format!("bad conflict grid: t0 {t0}, dt {dt}")));
        }
        if let Some(n) = stage_dv
            .iter()
            .position(|s| s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()))
        {
            return Err(Error::NonFinite {
                time: t0 + n as f64 * dt,
                index: 0,
            });
        }
        let last = stage_dv.last().map_or(0.0, |s| s[3]);
        let n = stage_dv.len();
        let t_end = t0 + n as f64 * dt;
        Ok(ConflictTrace {
            t0,
            dt,
            stage_dv,
            records: vec![(
                n,
                ConflictSample {
                    t: t_end,
                    dv_norm: last,
                    delta_v: Vec3::ZERO,
                    delta_a: Vec3::ZERO,
                    delta_omega: Vec3::ZERO,
                    state: SvcState::default(),
                },
            )],
            final_state: SvcState::default(),
        })
    }

    pub fn n_steps(&self) -> usize {
        self.stage_dv.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn time_of(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time_of(self.n_steps())
    }

    /// Grid step nearest to `t`, or an error outside the span (± dt/2).
    pub fn nearest_step(&self, t: f64) -> Result<usize> {
        let pos = (t - self.t0) / self.dt;
        let n = self.n_steps() as f64;
        if !(pos >= -0.5 && pos <= n + 0.5) {
            return Err(Error::OutOfSpan {
                t,
                start: self.t0,
                end: self.end(),
            });
        }
        Ok((pos.round().max(0.0) as usize).min(self.n_steps()))
    }
}

/// Runs the observer from its rest equilibrium over the whole motion trace.
pub fn compute_conflict(motion: &MotionTrace, svc: &SvcParams, cfg: &SimConfig) -> Result<ConflictTrace> {
    svc.validate()?;
    cfg.validate(motion)?;
    let h = cfg.dt_sim;
    let half = 0.5 * h;
    let t0 = motion.start();
    let n_steps = ((motion.end() - t0) / h + 1e-9).floor() as usize;

    let mut x = initial_state(svc);
    let mut stage_dv = Vec::with_capacity(n_steps);
    let mut records = Vec::with_capacity(n_steps / cfg.record_stride + 2);
    let sample = |t: f64, fb: &crate::svc::FeedbackSolution, state: &SvcState| ConflictSample {
        t,
        dv_norm: conflict_norm(fb),
        delta_v: fb.delta_v,
        delta_a: fb.delta_a,
        delta_omega: fb.delta_omega,
        state: *state,
    };

    for n in 0..n_steps {
        let t = t0 + n as f64 * h;
        let u_mid = motion.input_at(t + half);
        let (k1, fb1) = derivatives_with_feedback(&x, &motion.input_at(t), svc);
        let (k2, fb2) = derivatives_with_feedback(&x.add_scaled(&k1, half), &u_mid, svc);
        let (k3, fb3) = derivatives_with_feedback(&x.add_scaled(&k2, half), &u_mid, svc);
        let (k4, fb4) = derivatives_with_feedback(&x.add_scaled(&k3, h), &motion.input_at(t + h), svc);
        if n % cfg.record_stride == 0 {
            records.push((n, sample(t, &fb1, &x)));
        }
        stage_dv.push([
            conflict_norm(&fb1),
            conflict_norm(&fb2),
            conflict_norm(&fb3),
            conflict_norm(&fb4),
        ]);
        x = rk4_combine(&x, &[k1, k2, k3, k4], h);
        if let Some(index) = x.first_non_finite() {
            return Err(Error::NonFinite { time: t + h, index });
        }
    }
    let t_end = t0 + n_steps as f64 * h;
    let fb = resolve_feedback(&x, &motion.input_at(t_end), svc);
    records.push((n_steps, sample(t_end, &fb, &x)));
    Ok(ConflictTrace {
        t0,
        dt: h,
        stage_dv,
        records,
        final_state: x,
    })
}

/// Pathway input map with coefficients resolved once per parameter set.
#[derive(Debug, Clone, Copy)]
enum InputMap {
    Identity,
    Power(f64),
    Hill { inv_b: f64 },
}

impl InputMap {
    #[inline(always)]
    fn apply(self, dv: f64) -> f64 {
        match self {
            InputMap::Identity => dv,
            InputMap::Power(m) => dv.powf(m),
            InputMap::Hill { inv_b } => {
                let x = dv * inv_b;
                let x2 = x * x;
                x2 / (1.0 + x2)
            }
        }
    }
}

/// One RK4 step of the critically damped cascade `x0' = r (u - x0)`,
/// `x1' = r (x0 - x1)` with stage inputs `u[0..4]`, written as the affine
/// map it is: `next = a x + b u`. `stage_x1[k]` gives the second state at
/// stage `k` as coefficients over `[x0, x1, u0, u1, u2, u3]`.
#[derive(Debug, Clone, Copy)]
struct CascadeStep {
    a: [[f64; 2]; 2],
    b: [[f64; 4]; 2],
    stage_x1: [[f64; 6]; 4],
}

impl CascadeStep {
    fn new(rate: f64, h: f64) -> Self {
        let rk4 = |x: [f64; 2], u: [f64; 4]| {
            let d = |y: &[f64; 2], u: f64| [rate * (u - y[0]), rate * (y[0] - y[1])];
            let half = 0.5 * h;
            let k1 = d(&x, u[0]);
            let y2 = x.add_scaled(&k1, half);
            let k2 = d(&y2, u[1]);
            let y3 = x.add_scaled(&k2, half);
            let k3 = d(&y3, u[2]);
            let y4 = x.add_scaled(&k3, h);
            let k4 = d(&y4, u[3]);
            (rk4_combine(&x, &[k1, k2, k3, k4], h), [x[1], y2[1], y3[1], y4[1]])
        };
        let mut step = CascadeStep {
            a: [[0.0; 2]; 2],
            b: [[0.0; 4]; 2],
            stage_x1: [[0.0; 6]; 4],
        };
        for j in 0..6 {
            let mut z = [0.0; 6];
            z[j] = 1.0;
            let (next, stages) = rk4([z[0], z[1]], [z[2], z[3], z[4], z[5]]);
            for (row, v) in next.iter().enumerate() {
                if j < 2 {
                    step.a[row][j] = *v;
                } else {
                    step.b[row][j - 2] = *v;
                }
            }
            for (k, v) in stages.iter().enumerate() {
                step.stage_x1[k][j] = *v;
            }
        }
        step
    }

    #[inline(always)]
    fn apply(&self, x: &[f64; 2], u: &[f64; 4]) -> [f64; 2] {
        let row = |r: usize| {
            self.a[r][0] * x[0]
                + self.a[r][1] * x[1]
                + (self.b[r][0] * u[0] + self.b[r][1] * u[1] + self.b[r][2] * u[2] + self.b[r][3] * u[3])
        };
        [row(0), row(1)]
    }

    #[inline(always)]
    fn stage_x1(&self, x: &[f64; 2], u: &[f64; 4]) -> [f64; 4] {
        let c = &self.stage_x1;
        let at = |k: usize| {
            c[k][0] * x[0] + c[k][1] * x[1] + (c[k][2] * u[0] + c[k][3] * u[1] + c[k][4] * u[2] + c[k][5] * u[3])
        };
        [at(0), at(1), at(2), at(3)]
    }
}

/// RK4 step of the output part for one parameter set. Oman variants feed
/// the slow cascade's second state times `u_i` into the fast cascade.
#[derive(Debug, Clone, Copy)]
struct OutputKernel {
    input: InputMap,
    slow: CascadeStep,
    fast: Option<CascadeStep>,
}

impl OutputKernel {
    fn new(params: &OutputParams, h: f64) -> Self {
        let (input, slow_tau, fast_tau) = match *params {
            OutputParams::MsiBase { b, tau_i, .. } => (InputMap::Hill { inv_b: 1.0 / b }, tau_i, None),
            OutputParams::OmanAp { beta1, beta2, .. } => (InputMap::Identity, beta2, Some(beta1)),
            OutputParams::OmanBp { beta1, beta2, m_bp } => (InputMap::Power(m_bp), beta2, Some(beta1)),
            OutputParams::OmanHill { beta1, beta2, b, .. } => (InputMap::Hill { inv_b: 1.0 / b }, beta2, Some(beta1)),
        };
        OutputKernel {
            input,
            slow: CascadeStep::new(1.0 / slow_tau, h),
            fast: fast_tau.map(|tau| CascadeStep::new(1.0 / tau, h)),
        }
    }

    #[inline(always)]
    fn step(&self, y: &[f64; 4], dv: &[f64; 4]) -> [f64; 4] {
        let u = [
            self.input.apply(dv[0]),
            self.input.apply(dv[1]),
            self.input.apply(dv[2]),
            self.input.apply(dv[3]),
        ];
        let s = [y[0], y[1]];
        let s_next = self.slow.apply(&s, &u);
        match &self.fast {
            None => [s_next[0], s_next[1], 0.0, 0.0],
            Some(fast) => {
                let sigma = self.slow.stage_x1(&s, &u);
                let w = [sigma[0] * u[0], sigma[1] * u[1], sigma[2] * u[2], sigma[3] * u[3]];
                let f_next = fast.apply(&[y[2], y[3]], &w);
                [s_next[0], s_next[1], f_next[0], f_next[1]]
            }
        }
    }
}

/// Integrates the output part from zero over the first `until` steps of a
/// conflict trace, calling `visit(step, state)` at the requested steps
/// (sorted ascending). Returns the final output state.
///
/// Each step is the classical RK4 step of [`output_derivatives`] driven by
/// the four stage values of `‖Δv‖`, evaluated in closed affine form.
pub fn integrate_output(
    conflict: &ConflictTrace,
    params: &OutputParams,
    until: usize,
    visit_steps: &[usize],
    mut visit: impl FnMut(usize, &OutputState) -> Result<()>,
) -> Result<OutputState> {
    let kernel = OutputKernel::new(params, conflict.dt);
    let mut y = [0.0; 4];
    let mut next = visit_steps.iter().peekable();
    while next.peek() == Some(&&0) {
        visit(0, &OutputState(y))?;
        next.next();
    }
    for (n, dv) in conflict.stage_dv.iter().take(until).enumerate() {
        y = kernel.step(&y, dv);
        if !(y[0].is_finite() && y[1].is_finite() && y[2].is_finite() && y[3].is_finite()) {
            let k = y.iter().position(|v| !v.is_finite()).unwrap();
            return Err(Error::NonFinite {
                time: conflict.time_of(n + 1),
                index: SvcState::DIM + k,
            });
        }
        while next.peek() == Some(&&(n + 1)) {
            visit(n + 1, &OutputState(y))?;
            next.next();
        }
    }
    Ok(OutputState(y))
}

/// Raw model MISC at the grid steps nearest to `times`.
pub fn predict_at(conflict: &ConflictTrace, params: &OutputParams, times: &[f64]) -> Result<Vec<f64>> {
    let steps: Vec<usize> = times.iter().map(|&t| conflict.nearest_step(t)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by_key(|&i| steps[i]);
    let sorted: Vec<usize> = order.iter().map(|&i| steps[i]).collect();
    let until = sorted.last().copied().unwrap_or(0);
    let mut out = vec![f64::NAN; steps.len()];
    let mut k = 0;
    integrate_output(conflict, params, until, &sorted, |_, y| {
        out[order[k]] = output_misc(params, y)?;
        k += 1;
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub dt_sim: f64,
    pub conflict: Vec<ConflictSample>,
    /// Model MISC on the same time base as `conflict`.
    pub misc: MiscTrace,
    pub final_svc: SvcState,
    pub final_output: OutputState,
}

impl SimResult {
    pub fn times(&self) -> Vec<f64> {
        self.conflict.iter().map(|c| c.t).collect()
    }

    pub fn dv_norms(&self) -> Vec<f64> {
        self.conflict.iter().map(|c| c.dv_norm).collect()
    }

    /// Observer and output states as one vector (15 + 4 scalars).
    pub fn final_joint_state(&self) -> [f64; 19] {
        let mut out = [0.0; 19];
        out[..15].copy_from_slice(&self.final_svc.to_array());
        out[15..].copy_from_slice(&self.final_output.0);
        out
    }

    /// Writes `t,dv_norm,misc` at 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,dv_norm,misc")?;
        for (c, m) in self.conflict.iter().zip(self.misc.observations()) {
            writeln!(w, "{},{},{}", sig9(c.t), sig9(c.dv_norm), sig9(m.value))?;
        }
        Ok(())
    }
}

/// Completes a simulation from a precomputed conflict trace.
pub fn simulate_from_conflict(conflict: &ConflictTrace, out_p: &OutputParams, cfg: &SimConfig) -> Result<SimResult> {
    out_p.validate()?;
    let steps: Vec<usize> = conflict.records.iter().map(|r| r.0).collect();
    let mut rec = conflict.records.iter();
    let mut misc = Vec::with_capacity(conflict.records.len());
    let final_output = integrate_output(conflict, out_p, conflict.n_steps(), &steps, |_, y| {
        let (_, c) = rec.next().expect("one record per visited step");
        misc.push(crate::motion::MiscObservation {
            t: c.t,
            value: present(output_misc(out_p, y)?, cfg.clamp_output),
        });
        Ok(())
    })?;
    Ok(SimResult {
        dt_sim: conflict.dt,
        conflict: conflict.records.iter().map(|r| r.1).collect(),
        misc: MiscTrace::new(misc)?,
        final_svc: conflict.final_state,
        final_output,
    })
}

/// Simulates observer and output part over the motion trace.
pub fn simulate(motion: &MotionTrace, svc: &SvcParams, out_p: &OutputParams, cfg: &SimConfig) -> Result<SimResult> {
    out_p.validate()?;
    let conflict = compute_conflict(motion, svc, cfg)?;
    simulate_from_conflict(&conflict, out_p, cfg)
}

/// Stored MISC at the recorded instants nearest to `times`.
pub fn sample_at(result: &SimResult, times: &[f64]) -> Result<Vec<f64>> {
    let obs = result.misc.observations();
    let (start, end) = (obs[0].t, obs[obs.len() - 1].t);
    let tol = 0.5 * result.dt_sim;
    times
        .iter()
        .map(|&t| {
            if !(t >= start - tol && t <= end + tol) {
                return Err(Error::OutOfSpan { t, start, end });
            }
            let i = obs.partition_point(|o| o.t < t);
            let best = if i == 0 {
                0
            } else if i == obs.len() || t - obs[i - 1].t <= obs[i].t - t {
                i - 1
            } else {
                i
            };
            Ok(obs[best].value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::MotionSample;
    use crate::output::{output_derivatives, output_input, OutputVariant};

    fn trace(duration: f64, dt: f64, mut f: impl FnMut(f64) -> MotionSample) -> MotionTrace {
        let n = (duration / dt).round() as usize;
        MotionTrace::new((0..=n).map(|i| f(i as f64 * dt)).collect()).unwrap()
    }

    const HILL: OutputParams = OutputParams::OmanHill {
        beta1: 60.0,
        beta2: 600.0,
        b: 0.5,
        g: 8.0,
    };

    #[test]
    fn kernel_matches_generic_rk4() {
        let all = [
            OutputParams::MsiBase {
                b: 0.7,
                tau_i: 120.0,
                p: 0.9,
            },
            OutputParams::OmanAp {
                beta1: 3.0,
                beta2: 40.0,
                m_ap: 1.3,
            },
            OutputParams::OmanBp {
                beta1: 5.0,
                beta2: 50.0,
                m_bp: 0.6,
            },
            OutputParams::OmanHill {
                beta1: 2.0,
                beta2: 30.0,
                b: 0.3,
                g: 4.0,
            },
        ];
        let h = 0.05;
        for p in &all {
            let kernel = OutputKernel::new(p, h);
            let mut y = [0.3, 0.7, 0.2, 0.9];
            if p.variant() == OutputVariant::MsiBase {
                y[2] = 0.0;
                y[3] = 0.0;
            }
            for n in 0..200 {
                let dv: [f64; 4] = std::array::from_fn(|k| 0.4 + 0.3 * ((n * 4 + k) as f64 * 0.37).sin());
                let x = OutputState(y);
                let ks: [OutputState; 4] = {
                    let u: Vec<f64> = dv.iter().map(|&d| output_input(p, d)).collect();
                    let k1 = output_derivatives(p, &x, u[0]);
                    let k2 = output_derivatives(p, &x.add_scaled(&k1, 0.5 * h), u[1]);
                    let k3 = output_derivatives(p, &x.add_scaled(&k2, 0.5 * h), u[2]);
                    let k4 = output_derivatives(p, &x.add_scaled(&k3, h), u[3]);
                    [k1, k2, k3, k4]
                };
                let want = rk4_combine(&x, &ks, h).0;
                let got = kernel.step(&y, &dv);
                for i in 0..4 {
                    assert!((got[i] - want[i]).abs() <= 1e-13 * (1.0 + want[i].abs()), "{p:?} {i}");
                }
                y = got;
            }
        }
    }

    #[test]
    fn scc_step_matches_closed_form() {
        let svc = SvcParams::default();
        let motion = trace(60.0, 0.01, |t| MotionSample {
            omega: Vec3::new(0.0, 0.5, 0.0),
            ..MotionSample::rest(t, 9.81)
        });
        let cfg = SimConfig {
            record_stride: 1,
            ..SimConfig::default()
        };
        let conflict = compute_conflict(&motion, &svc, &cfg).unwrap();
        // omega_s = omega - x_scc: read x_scc through the final state and records.
        let mut max_err: f64 = 0.0;
        let mut x = initial_state(&svc);
        let h = cfg.dt_sim;
        for n in 0..conflict.n_steps() {
            let t = n as f64 * h;
            x = crate::ode::rk4_step(t, &x, h, |t, s| crate::svc::derivatives(s, &motion.input_at(t), &svc));
            let omega_s = 0.5 - x.x_scc.y;
            max_err = max_err.max((omega_s - 0.5 * (-(t + h) / 7.0).exp()).abs());
        }
        assert!(max_err < 1e-9, "{max_err}");
        assert_eq!(conflict.final_state, x);
        let at7 = 0.5 - 0.5 * (1.0 - (-1.0f64).exp());
        assert!((at7 - 0.18394).abs() < 1e-5);
    }

    #[test]
    fn rest_produces_no_conflict_or_misc() {
        let svc = SvcParams::default();
        let motion = trace(120.0, 0.01, |t| MotionSample::rest(t, 9.81));
        let r = simulate(&motion, &svc, &HILL, &SimConfig::default()).unwrap();
        assert!(r.dv_norms().iter().all(|&v| v <= 1e-9));
        assert!(r.misc.values().iter().all(|&v| v <= 1e-9));
        assert_eq!(r.misc.len(), r.conflict.len());
        assert_eq!(r.misc.len(), 1201);
    }

    #[test]
    fn sampling_rules() {
        let svc = SvcParams::default();
        let motion = trace(10.0, 0.01, |t| MotionSample {
            f: Vec3::new(1.0, 0.0, 9.81),
            ..MotionSample::rest(t, 9.81)
        });
        let r = simulate(&motion, &svc, &HILL, &SimConfig::default()).unwrap();
        let obs = r.misc.observations();
        assert_eq!(sample_at(&r, &[obs[5].t]).unwrap()[0], obs[5].value);
        assert_eq!(sample_at(&r, &[obs[5].t + 0.04]).unwrap()[0], obs[5].value);
        assert_eq!(sample_at(&r, &[obs[5].t + 0.06]).unwrap()[0], obs[6].value);
        assert!(matches!(sample_at(&r, &[11.0]), Err(Error::OutOfSpan { .. })));

        let conflict = compute_conflict(&motion, &svc, &SimConfig::default()).unwrap();
        let direct = predict_at(&conflict, &HILL, &[0.0, 2.5, 10.0]).unwrap();
        assert_eq!(direct, sample_at(&r, &[0.0, 2.5, 10.0]).unwrap());
    }

    #[test]
    fn config_errors() {
        let svc = SvcParams::default();
        let motion = trace(1.0, 0.01, |t| MotionSample::rest(t, 9.81));
        for cfg in [
            SimConfig {
                dt_sim: 0.02,
                ..SimConfig::default()
            },
            SimConfig {
                dt_sim: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                record_stride: 0,
                ..SimConfig::default()
            },
        ] {
            assert!(simulate(&motion, &svc, &HILL, &cfg).is_err());
        }
    }

    #[test]
    fn non_finite_state_is_reported() {
        let svc = SvcParams::default();
        let motion = trace(1.0, 0.01, |t| MotionSample {
            omega: Vec3::new(1e300, 0.0, 1e300),
            ..MotionSample::rest(t, 9.81)
        });
        let err = simulate(&motion, &svc, &HILL, &SimConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn clamp_limits_reported_misc() {
        let svc = SvcParams::default();
        let motion = trace(600.0, 0.05, |t| MotionSample {
            f: Vec3::new((t * 0.8).sin() * 3.0, 0.0, 9.81),
            a: Vec3::new((t * 0.8).sin() * 3.0, 0.0, 0.0),
            ..MotionSample::rest(t, 9.81)
        });
        let loud = OutputParams::OmanHill {
            beta1: 5.0,
            beta2: 20.0,
            b: 0.1,
            g: 100.0,
        };
        let cfg = SimConfig {
            dt_sim: 0.05,
            ..SimConfig::default()
        };
        let raw = simulate(&motion, &svc, &loud, &cfg).unwrap();
        assert!(raw.misc.values().iter().any(|&v| v > 10.0));
        let clamped = simulate(
            &motion,
            &svc,
            &loud,
            &SimConfig {
                clamp_output: true,
                ..cfg
            },
        )
        .unwrap();
        assert!(clamped.misc.values().iter().all(|&v| (0.0..=10.0).contains(&v)));
    }

    #[test]
    fn csv_has_one_row_per_record() {
        let svc = SvcParams::default();
        let motion = trace(2.0, 0.01, |t| MotionSample::rest(t, 9.81));
        let r = simulate(&motion, &svc, &HILL, &SimConfig::default()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,dv_norm,misc\n0,0,0\n"));
        assert_eq!(text.lines().count(), 1 + r.conflict.len());
    }
}
