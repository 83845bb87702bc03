//! Per-individual identification of output-part parameters.
//!
//! The objective is the sum of squared differences between observed and
//! model MISC over every condition and reporting instant. The observer
//! gains stay fixed, so each condition's conflict trace is computed once
//! and only the output part is re-integrated per evaluation.
//!
//! The search runs Nelder-Mead in a transformed space: every parameter is
//! log-transformed, and `beta2` is written as `beta1 * (1 + exp(q))` so that
//! `beta1 < beta2` holds for every point the optimizer visits. Bounds are
//! enforced by a penalty.

pub mod metrics;
pub mod nelder_mead;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::motion::{MiscTrace, MotionTrace};
use crate::output::{OutputParams, OutputVariant};
use crate::sim::{compute_conflict, predict_at, ConflictTrace, SimConfig};
use crate::svc::SvcParams;

pub use metrics::{mean_abs_error, pearson_r, pooled_pearson_r};
use nelder_mead::{minimize, NelderMeadOptions};

/// Motion and observed MISC for one experimental condition.
#[derive(Debug, Clone)]
pub struct ConditionData {
    pub motion: MotionTrace,
    pub observed: MiscTrace,
}

impl ConditionData {
    pub fn new(motion: MotionTrace, observed: MiscTrace) -> Result<Self> {
        let (start, end) = (motion.start(), motion.end());
        if let Some(o) = observed
            .observations()
            .iter()
            .find(|o| o.t < start - 1e-9 || o.t > end + 1e-9)
        {
            return Err(Error::OutOfSpan { t: o.t, start, end });
        }
        Ok(ConditionData { motion, observed })
    }
}

/// Inclusive search interval for one kind of parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Log-space distance outside the interval, zero inside.
    fn log_excess(&self, v: f64) -> f64 {
        if v < self.lo {
            (self.lo / v).ln()
        } else if v > self.hi {
            (v / self.hi).ln()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub beta1: Interval,
    pub beta2: Interval,
    /// `m_ap` / `m_bp`.
    pub exponent: Interval,
    /// Hill half-saturation `b`, m/s².
    pub half_saturation: Interval,
    /// Output gains `p` / `g`.
    pub gain: Interval,
    pub tau_i: Interval,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            beta1: Interval::new(1.0, 600.0),
            beta2: Interval::new(60.0, 7200.0),
            exponent: Interval::new(0.1, 10.0),
            half_saturation: Interval::new(0.01, 10.0),
            gain: Interval::new(0.01, 1000.0),
            tau_i: Interval::new(10.0, 7200.0),
        }
    }
}

impl Bounds {
    /// Interval for each parameter of the variant, in canonical order.
    pub fn for_variant(&self, variant: OutputVariant) -> Vec<Interval> {
        variant
            .param_names()
            .iter()
            .map(|name| match *name {
                "beta1" => self.beta1,
                "beta2" => self.beta2,
                "m_ap" | "m_bp" => self.exponent,
                "b" => self.half_saturation,
                "p" | "g" => self.gain,
                "tau_i" => self.tau_i,
                other => unreachable!("unknown parameter {other}"),
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        for (name, iv) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("exponent", self.exponent),
            ("b", self.half_saturation),
            ("gain", self.gain),
            ("tau_i", self.tau_i),
        ] {
            if !(iv.lo > 0.0 && iv.hi >= iv.lo && iv.hi.is_finite()) {
                return Err(Error::Invalid(format!("bounds for {name}: [{}, {}]", iv.lo, iv.hi)));
            }
        }
        if self.beta2.hi <= self.beta1.lo {
            return Err(Error::Invalid("beta2 bounds leave no room above beta1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub n_starts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub bounds: Bounds,
    pub rng_seed: u64,
    /// Integration settings for the model predictions.
    pub sim: SimConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_starts: 32,
            max_iters: 2000,
            rel_tol: 1e-8,
            bounds: Bounds::default(),
            rng_seed: 0,
            sim: SimConfig::default(),
        }
    }
}

/// Outcome of one optimizer start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartDiagnostics {
    pub initial: OutputParams,
    pub final_params: OutputParams,
    pub final_j: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub best_params: OutputParams,
    pub j: f64,
    /// Model MISC at each condition's observation times.
    pub predictions: Vec<Vec<f64>>,
    /// `observed - predicted` per condition.
    pub residuals: Vec<Vec<f64>>,
    pub starts: Vec<StartDiagnostics>,
}

impl FitResult {
    /// `param,value` rows followed by the objective value.
    pub fn write_params_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# variant={}", self.best_params.variant())?;
        writeln!(w, "param,value")?;
        for (name, v) in self.best_params.named() {
            writeln!(w, "{name},{}", sig9(v))?;
        }
        writeln!(w, "J,{}", sig9(self.j))
    }

    /// One row per start.
    pub fn write_diagnostics_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let names = self.best_params.variant().param_names();
        let init: Vec<String> = names.iter().map(|n| format!("init_{n}")).collect();
        let fin: Vec<String> = names.iter().map(|n| format!("final_{n}")).collect();
        writeln!(
            w,
            "start,{},{},final_j,iterations,evaluations,converged",
            init.join(","),
            fin.join(",")
        )?;
        for (k, s) in self.starts.iter().enumerate() {
            let fmt_all = |p: &OutputParams| p.values().iter().map(|&v| sig9(v)).collect::<Vec<_>>().join(",");
            writeln!(
                w,
                "{k},{},{},{},{},{},{}",
                fmt_all(&s.initial),
                fmt_all(&s.final_params),
                sig9(s.final_j),
                s.iterations,
                s.evaluations,
                s.converged
            )?;
        }
        Ok(())
    }
}

/// Sum of squared residuals over all conditions and observation instants.
pub fn objective_j(observed: &[&[f64]], predictions: &[&[f64]]) -> Result<f64> {
    if observed.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: observed.len(),
            right: predictions.len(),
        });
    }
    let mut j = 0.0;
    for (obs, pred) in observed.iter().zip(predictions) {
        if obs.len() != pred.len() {
            return Err(Error::LengthMismatch {
                left: obs.len(),
                right: pred.len(),
            });
        }
        j += obs.iter().zip(pred.iter()).map(|(o, p)| (o - p).powi(2)).sum::<f64>();
    }
    Ok(j)
}

/// Added to the objective outside the bounds; scaled by the log-distance.
const PENALTY: f64 = 1e12;

/// Maps between natural parameters and the unconstrained search space.
#[derive(Debug, Clone)]
struct Transform {
    variant: OutputVariant,
    bounds: Vec<Interval>,
    /// Index of `beta2`, parameterized relative to `beta1` at index 0.
    beta2: Option<usize>,
}

impl Transform {
    fn new(variant: OutputVariant, bounds: &Bounds) -> Self {
        Transform {
            variant,
            bounds: bounds.for_variant(variant),
            beta2: variant.param_names().iter().position(|n| *n == "beta2"),
        }
    }

    fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        if let Some(k) = self.beta2 {
            p[k] = p[0] * (1.0 + p[k]);
        }
        p
    }

    fn to_search(&self, p: &[f64]) -> Vec<f64> {
        let mut u: Vec<f64> = p.iter().map(|v| v.ln()).collect();
        if let Some(k) = self.beta2 {
            u[k] = (p[k] / p[0] - 1.0).ln();
        }
        u
    }

    /// Natural parameters if they satisfy every constraint, else the
    /// penalty for the violation.
    fn feasible(&self, u: &[f64]) -> std::result::Result<OutputParams, f64> {
        let p = self.to_natural(u);
        let excess: f64 = p.iter().zip(&self.bounds).map(|(&v, iv)| iv.log_excess(v)).sum();
        let in_bounds = p.iter().zip(&self.bounds).all(|(&v, iv)| iv.contains(v));
        match OutputParams::from_values(self.variant, &p) {
            Ok(params) if in_bounds => Ok(params),
            _ => Err(PENALTY * (1.0 + if excess.is_finite() { excess } else { 1e6 })),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            if hi <= lo {
                lo
            } else {
                rng.gen_range(lo.ln()..hi.ln()).exp()
            }
        };
        let mut p: Vec<f64> = self.bounds.iter().map(|iv| log_uniform(rng, iv.lo, iv.hi)).collect();
        if let Some(k) = self.beta2 {
            let lo = self.bounds[k].lo.max(p[0] * 1.01);
            p[k] = log_uniform(rng, lo, self.bounds[k].hi.max(lo));
        }
        p
    }
}

/// Precomputed conflict traces and observations for repeated evaluation.
struct Problem<'a> {
    conflicts: Vec<ConflictTrace>,
    conditions: &'a [ConditionData],
    observed: Vec<Vec<f64>>,
}

impl<'a> Problem<'a> {
    fn new(conditions: &'a [ConditionData], svc: &SvcParams, sim: &SimConfig) -> Result<Self> {
        let conflicts = conditions
            .iter()
            .map(|c| compute_conflict(&c.motion, svc, sim))
            .collect::<Result<_>>()?;
        Ok(Problem {
            conflicts,
            conditions,
            observed: conditions.iter().map(|c| c.observed.values()).collect(),
        })
    }

    fn predictions(&self, params: &OutputParams) -> Result<Vec<Vec<f64>>> {
        self.conflicts
            .iter()
            .zip(self.conditions)
            .map(|(conflict, c)| predict_at(conflict, params, &c.observed.times()))
            .collect()
    }

    fn j(&self, params: &OutputParams) -> Result<f64> {
        let pred = self.predictions(params)?;
        let obs: Vec<&[f64]> = self.observed.iter().map(Vec::as_slice).collect();
        let pred: Vec<&[f64]> = pred.iter().map(Vec::as_slice).collect();
        objective_j(&obs, &pred)
    }
}

/// Fits one parameter set shared by all conditions.
pub fn fit(
    variant: OutputVariant,
    conditions: &[ConditionData],
    svc: &SvcParams,
    cfg: &FitConfig,
) -> Result<FitResult> {
    if cfg.n_starts == 0 {
        return Err(Error::Invalid("n_starts must be at least 1".into()));
    }
    cfg.bounds.validate()?;
    if conditions.is_empty() {
        return Err(Error::Invalid("at least one condition is required".into()));
    }
    if conditions.iter().all(|c| c.observed.values().iter().all(|&v| v == 0.0)) {
        return Err(Error::NoSymptoms);
    }

    let problem = Problem::new(conditions, svc, &cfg.sim)?;
    let transform = Transform::new(variant, &cfg.bounds);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let initial: Vec<Vec<f64>> = (0..cfg.n_starts).map(|_| transform.draw(&mut rng)).collect();
    let opts = NelderMeadOptions {
        max_iters: cfg.max_iters,
        rel_tol: cfg.rel_tol,
        ..NelderMeadOptions::default()
    };

    let objective = |u: &[f64]| match transform.feasible(u) {
        Ok(params) => problem.j(&params).unwrap_or(f64::INFINITY),
        Err(penalty) => penalty,
    };

    let starts: Vec<StartDiagnostics> = initial
        .par_iter()
        .map(|p0| {
            let r = minimize(objective, &transform.to_search(p0), &opts);
            let final_params = transform
                .feasible(&r.x)
                .map_err(|_| Error::Internal("optimizer ended outside the feasible region".into()))?;
            Ok(StartDiagnostics {
                initial: OutputParams::from_values(variant, p0)?,
                final_params,
                final_j: r.f,
                iterations: r.iterations,
                evaluations: r.evaluations,
                converged: r.converged,
            })
        })
        .collect::<Result<_>>()?;

    if !starts.iter().any(|s| s.converged) {
        return Err(Error::NoConvergence { starts: starts.len() });
    }
    let best = starts
        .iter()
        .min_by(|a, b| a.final_j.total_cmp(&b.final_j))
        .expect("at least one start");
    let best_params = best.final_params;
    let predictions = problem.predictions(&best_params)?;
    let residuals = problem
        .observed
        .iter()
        .zip(&predictions)
        .map(|(o, p)| o.iter().zip(p).map(|(a, b)| a - b).collect())
        .collect();
    Ok(FitResult {
        best_params,
        j: best.final_j,
        predictions,
        residuals,
        starts,
    })
}

/// Fits each condition separately.
pub fn fit_per_condition(
    variant: OutputVariant,
    conditions: &[ConditionData],
    svc: &SvcParams,
    cfg: &FitConfig,
) -> Result<Vec<FitResult>> {
    conditions
        .iter()
        .map(|c| fit(variant, std::slice::from_ref(c), svc, cfg))
        .collect()
}

/// Model MISC at each condition's observation times.
pub fn predict_conditions(
    conditions: &[ConditionData],
    params: &OutputParams,
    svc: &SvcParams,
    sim: &SimConfig,
) -> Result<Vec<Vec<f64>>> {
    Problem::new(conditions, svc, sim)?.predictions(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_examples() {
        let obs: [&[f64]; 2] = [&[1.0, 2.0], &[3.0]];
        assert_eq!(objective_j(&obs, &obs).unwrap(), 0.0);
        let pred: [&[f64]; 2] = [&[0.0, 1.0], &[1.0]];
        assert_eq!(objective_j(&obs, &pred).unwrap(), 6.0);
        let swapped_obs: [&[f64]; 2] = [&[3.0], &[1.0, 2.0]];
        let swapped_pred: [&[f64]; 2] = [&[1.0], &[0.0, 1.0]];
        assert_eq!(objective_j(&swapped_obs, &swapped_pred).unwrap(), 6.0);
        assert!(objective_j(&obs, &[&[1.0, 2.0]]).is_err());
        assert!(objective_j(&[&[1.0]], &[&[1.0, 2.0]]).is_err());
    }

    #[test]
    fn transform_round_trip_and_ordering() {
        let t = Transform::new(OutputVariant::OmanHill, &Bounds::default());
        let p = [60.0, 600.0, 0.5, 8.0];
        let back = t.to_natural(&t.to_search(&p));
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9 * a);
        }
        // Any search point yields beta1 < beta2 unless 1 + exp(q) rounds to 1.
        for q in [-30.0, -5.0, 0.0, 5.0] {
            let nat = t.to_natural(&[4.0, q, 0.0, 0.0]);
            assert!(nat[1] > nat[0]);
        }
        assert!(t.feasible(&t.to_search(&p)).is_ok());
        assert!(t.feasible(&[4.0, -40.0, 0.0, 0.0]).is_err());
        assert!(t.feasible(&t.to_search(&[60.0, 600.0, 0.5, 5000.0])).is_err());
    }

    #[test]
    fn draws_respect_bounds() {
        let bounds = Bounds::default();
        for v in OutputVariant::ALL {
            let t = Transform::new(v, &bounds);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..200 {
                let p = t.draw(&mut rng);
                assert!(OutputParams::from_values(v, &p).is_ok());
                assert!(p.iter().zip(&t.bounds).all(|(&x, iv)| iv.contains(x)));
            }
        }
    }
}
