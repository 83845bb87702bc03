use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use motion_misc::fit::metrics::{mean_abs_error, pearson_r};
use motion_misc::fit::{self, Bounds, ConditionData, FitConfig, FitResult, Interval};
use motion_misc::fmt::sig9;
use motion_misc::motion::{
    load_misc_csv, load_misc_series_csv, load_motion_csv, load_motion_csv_resampled, write_misc_csv, write_motion_csv,
};
use motion_misc::output::parse_param_values;
use motion_misc::protocol::{run_protocol, ProtocolConfig};
use motion_misc::scenario::{shuttle_session, HeadTilt, HeadTiltCondition, ShuttleConfig};
use motion_misc::{simulate as run_simulation, Error, MiscTrace, MotionTrace, OutputParams, OutputVariant, SimConfig};

use crate::settings::Settings;
use crate::{CliError, Common, EvalArgs, FitArgs, ParamArgs, ScenarioArgs, SimulateArgs};

const DEFAULT_DT: f64 = 0.01;

const SCENARIO_KEYS: &[&str] = &[
    "out",
    "seed",
    "dt",
    "variant",
    "param",
    "params",
    "condition",
    "a_peak",
    "tau_head",
    "distance",
    "v_max",
    "dwell",
    "set_duration",
    "n_sets",
    "break_duration",
    "recovery_duration",
    "report_interval",
    "stop_level",
];
const SIMULATE_KEYS: &[&str] = &[
    "out", "seed", "dt", "variant", "param", "params", "motion", "clamp", "resample", "stride",
];
const FIT_KEYS: &[&str] = &[
    "out",
    "seed",
    "dt",
    "variant",
    "motion",
    "misc",
    "starts",
    "max_iters",
    "rel_tol",
    "bound",
    "per_condition",
    "real_misc",
];
const EVAL_KEYS: &[&str] = &[
    "out",
    "seed",
    "dt",
    "variant",
    "param",
    "params",
    "observed",
    "predicted",
    "motion",
];

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn paths_str(p: &[PathBuf]) -> Vec<String> {
    p.iter().map(|p| p.display().to_string()).collect()
}

fn out_dir(s: &mut Settings, common: &Common) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(s.value("out", path_str(&common.out), ".".to_string())?);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(fail)?);
    body(&mut w).and_then(|_| w.flush()).map_err(fail)
}

fn require_variant(s: &mut Settings, common: &Common) -> Result<OutputVariant, CliError> {
    s.optional("variant", common.variant)?
        .ok_or_else(|| CliError::usage("--variant is required (msibase, omanap, omanbp or omanhill)"))
}

/// Parameters from `--params` with individual `--param` overrides, or
/// `None` when neither is given.
fn output_params(
    s: &mut Settings,
    variant: Option<OutputVariant>,
    args: &ParamArgs,
) -> Result<Option<OutputParams>, CliError> {
    let file = s.optional("params", path_str(&args.params))?;
    let pairs = s.list("param", args.param.clone());
    if file.is_none() && pairs.is_empty() {
        return Ok(None);
    }
    let variant = variant.ok_or_else(|| CliError::usage("output parameters need --variant"))?;
    let names = variant.param_names();
    let mut values: Vec<Option<f64>> = vec![None; names.len()];
    if let Some(path) = file {
        let f = File::open(&path).map_err(|e| CliError::io(format!("cannot read {path}: {e}")))?;
        values = parse_param_values(f, variant)?;
    }
    for pair in &pairs {
        let (name, raw) = pair
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--param expects NAME=VALUE, got `{pair}`")))?;
        let name = name.trim().to_ascii_lowercase();
        let k = names.iter().position(|n| *n == name).ok_or_else(|| {
            CliError::usage(format!(
                "{variant} has no parameter `{name}` (expected {})",
                names.join(", ")
            ))
        })?;
        values[k] = Some(
            raw.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("--param {name}: cannot parse `{raw}`")))?,
        );
    }
    let missing: Vec<&str> = names
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.is_none())
        .map(|(n, _)| *n)
        .collect();
    if !missing.is_empty() {
        return Err(CliError::usage(format!(
            "missing {variant} parameters: {}",
            missing.join(", ")
        )));
    }
    let values: Vec<f64> = values.into_iter().flatten().collect();
    Ok(Some(OutputParams::from_values(variant, &values)?))
}

pub fn scenario(a: ScenarioArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref(), SCENARIO_KEYS)?;
    let out = out_dir(&mut s, &a.common)?;
    s.value("seed", a.common.seed, 0u64)?;
    let d = ShuttleConfig::default();
    let shuttle = ShuttleConfig {
        distance: s.value("distance", a.distance, d.distance)?,
        v_max: s.value("v_max", a.v_max, d.v_max)?,
        a_peak: s.value("a_peak", a.a_peak, d.a_peak)?,
        dwell: s.value("dwell", a.dwell, d.dwell)?,
        set_duration: s.value("set_duration", a.set_duration, d.set_duration)?,
        n_sets: s.value("n_sets", a.n_sets, d.n_sets)?,
        break_duration: s.value("break_duration", a.break_duration, d.break_duration)?,
        recovery_duration: s.value("recovery_duration", a.recovery_duration, d.recovery_duration)?,
        dt: s.value("dt", a.common.dt, d.dt)?,
        report_interval: s.value("report_interval", a.report_interval, d.report_interval)?,
    };
    let condition = HeadTiltCondition {
        tilt: s.value("condition", a.condition, HeadTilt::Static)?,
        tau_head: s.value("tau_head", a.tau_head, 0.0)?,
    };
    let variant = s.optional("variant", a.common.variant)?;
    let params = output_params(&mut s, variant, &a.output)?;
    let svc = s.svc()?;

    match params {
        None => {
            let (profile, motion) = shuttle_session(&shuttle, &condition, svc.g0)?;
            write_file(&out.join("motion.csv"), |w| write_motion_csv(w, &motion))?;
            write_file(&out.join("timeline.csv"), |w| profile.write_timeline_csv(w))?;
            println!(
                "{}: {} s, {} samples",
                condition.name(),
                sig9(motion.end()),
                motion.len()
            );
        }
        Some(p) => {
            let cfg = ProtocolConfig {
                shuttle,
                sim: SimConfig {
                    dt_sim: shuttle.dt,
                    ..SimConfig::default()
                },
                stop_level: s.value("stop_level", a.stop_level, 6.0)?,
            };
            let run = run_protocol(&cfg, &condition, &svc, &p)?;
            write_file(&out.join("motion.csv"), |w| write_motion_csv(w, &run.motion))?;
            write_file(&out.join("timeline.csv"), |w| run.profile.write_timeline_csv(w))?;
            write_file(&out.join("misc.csv"), |w| write_misc_csv(w, &run.observed))?;
            write_file(&out.join("misc_truth.csv"), |w| write_misc_csv(w, &run.truth))?;
            let stop = run.stop_time().map_or("none".to_string(), sig9);
            println!(
                "{}: {} s, {} reports, stopped at {stop}",
                condition.name(),
                sig9(run.motion.end()),
                run.observed.len()
            );
        }
    }
    s.write_manifest(&out, "scenario")
}

/// Loads a motion file, optionally resampled to `dt`.
fn load_motion(path: &str, g0: f64, resample: Option<f64>) -> Result<MotionTrace, CliError> {
    Ok(match resample {
        Some(dt) => load_motion_csv_resampled(path, g0, dt)?,
        None => load_motion_csv(path, g0)?,
    })
}

/// Integration step: the explicit value, else the default capped at the
/// finest motion spacing.
fn sim_step(s: &mut Settings, flag: Option<f64>, motions: &[MotionTrace]) -> Result<f64, CliError> {
    let finest = motions.iter().map(|m| m.dt()).fold(DEFAULT_DT, f64::min);
    s.value("dt", flag, finest)
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref(), SIMULATE_KEYS)?;
    let out = out_dir(&mut s, &a.common)?;
    s.value("seed", a.common.seed, 0u64)?;
    let variant = require_variant(&mut s, &a.common)?;
    let params = output_params(&mut s, Some(variant), &a.output)?
        .ok_or_else(|| CliError::usage("simulate needs --param NAME=VALUE or --params FILE"))?;
    let motion_path = s
        .optional("motion", path_str(&a.motion))?
        .ok_or_else(|| CliError::usage("--motion is required"))?;
    let resample = s.switch("resample", a.resample)?;
    let clamp = s.switch("clamp", a.clamp)?;
    let stride = s.value("stride", a.stride, 10usize)?;
    let svc = s.svc()?;

    let motion = if resample {
        let dt = s.value("dt", a.common.dt, DEFAULT_DT)?;
        load_motion(&motion_path, svc.g0, Some(dt))?
    } else {
        load_motion(&motion_path, svc.g0, None)?
    };
    let dt_sim = if resample {
        motion.dt()
    } else {
        sim_step(&mut s, a.common.dt, std::slice::from_ref(&motion))?
    };
    if motion.accel_inferred {
        eprintln!("note: no ax/ay/az columns, true acceleration inferred from f and gravity");
    }
    let cfg = SimConfig {
        dt_sim,
        clamp_output: clamp,
        record_stride: stride,
    };
    let result = run_simulation(&motion, &svc, &params, &cfg)?;
    write_file(&out.join("result.csv"), |w| result.write_csv(w))?;
    let misc = result.misc.values();
    let peak = misc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{} rows, final MISC {}, peak MISC {}",
        misc.len(),
        sig9(*misc.last().unwrap_or(&0.0)),
        sig9(peak)
    );
    s.write_manifest(&out, "simulate")
}

fn parse_bound(text: &str) -> Result<(String, Interval), CliError> {
    let bad = || CliError::usage(format!("--bound expects NAME=LO:HI, got `{text}`"));
    let (name, range) = text.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((name.trim().to_ascii_lowercase(), Interval::new(lo, hi)))
}

fn apply_bounds(specs: &[String]) -> Result<Bounds, CliError> {
    let mut b = Bounds::default();
    for text in specs {
        let (name, iv) = parse_bound(text)?;
        let slot = match name.as_str() {
            "beta1" => &mut b.beta1,
            "beta2" => &mut b.beta2,
            "exponent" | "m_ap" | "m_bp" => &mut b.exponent,
            "b" => &mut b.half_saturation,
            "gain" | "p" | "g" => &mut b.gain,
            "tau_i" => &mut b.tau_i,
            other => return Err(CliError::usage(format!("unknown bound `{other}`"))),
        };
        *slot = iv;
    }
    Ok(b)
}

fn r_text(obs: &[f64], pred: &[f64]) -> Result<String, CliError> {
    match pearson_r(obs, pred) {
        Ok(r) => Ok(sig9(r)),
        Err(Error::ZeroVariance) => Ok("undefined".into()),
        Err(e) => Err(e.into()),
    }
}

fn report_fit(label: &str, r: &FitResult, conditions: &[ConditionData]) -> Result<(), CliError> {
    println!("{label}J = {}  {:?}", sig9(r.j), r.best_params);
    for (k, (c, pred)) in conditions.iter().zip(&r.predictions).enumerate() {
        let obs = c.observed.values();
        println!(
            "  condition {}: MAE {}, Pearson r {}",
            k + 1,
            sig9(mean_abs_error(&obs, pred)?),
            r_text(&obs, pred)?
        );
    }
    let failed = r.starts.iter().filter(|st| !st.converged).count();
    if failed > 0 {
        eprintln!("note: {failed} of {} starts hit the iteration cap", r.starts.len());
    }
    Ok(())
}

fn write_fit(out: &Path, suffix: &str, r: &FitResult, conditions: &[ConditionData]) -> Result<(), CliError> {
    write_file(&out.join(format!("params{suffix}.csv")), |w| r.write_params_csv(w))?;
    write_file(&out.join(format!("diagnostics{suffix}.csv")), |w| {
        r.write_diagnostics_csv(w)
    })?;
    write_file(&out.join(format!("predictions{suffix}.csv")), |w| {
        writeln!(w, "condition,t,observed,predicted")?;
        for (k, (c, pred)) in conditions.iter().zip(&r.predictions).enumerate() {
            for (o, p) in c.observed.observations().iter().zip(pred) {
                writeln!(w, "{},{},{},{}", k + 1, sig9(o.t), sig9(o.value), sig9(*p))?;
            }
        }
        Ok(())
    })
}

pub fn fit(a: FitArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref(), FIT_KEYS)?;
    let out = out_dir(&mut s, &a.common)?;
    let variant = require_variant(&mut s, &a.common)?;
    let motions = s.list("motion", paths_str(&a.motion));
    let miscs = s.list("misc", paths_str(&a.misc));
    if motions.is_empty() || motions.len() != miscs.len() {
        return Err(CliError::usage(format!(
            "need matching --motion/--misc pairs, got {} motion and {} misc files",
            motions.len(),
            miscs.len()
        )));
    }
    let d = FitConfig::default();
    let rng_seed = s.value("seed", a.common.seed, d.rng_seed)?;
    let n_starts = s.value("starts", a.starts, d.n_starts)?;
    let max_iters = s.value("max_iters", a.max_iters, d.max_iters)?;
    let rel_tol = s.value("rel_tol", a.rel_tol, d.rel_tol)?;
    let bounds = apply_bounds(&s.list("bound", a.bound.clone()))?;
    let per_condition = s.switch("per_condition", a.per_condition)?;
    let real_misc = s.switch("real_misc", a.real_misc)?;
    let svc = s.svc()?;

    let traces: Vec<MotionTrace> = motions
        .iter()
        .map(|p| load_motion(p, svc.g0, None))
        .collect::<Result<_, _>>()?;
    let dt_sim = sim_step(&mut s, a.common.dt, &traces)?;
    let mut conditions = Vec::new();
    for (motion, path) in traces.into_iter().zip(&miscs) {
        let observed = if real_misc {
            load_misc_series_csv(path)?
        } else {
            load_misc_csv(path)?
        };
        conditions.push(ConditionData::new(motion, observed)?);
    }
    let cfg = FitConfig {
        n_starts,
        max_iters,
        rel_tol,
        bounds,
        rng_seed,
        sim: SimConfig {
            dt_sim,
            ..SimConfig::default()
        },
    };

    if per_condition {
        for (k, c) in conditions.iter().enumerate() {
            let single = std::slice::from_ref(c);
            let r = fit::fit(variant, single, &svc, &cfg)?;
            report_fit(&format!("condition {}: ", k + 1), &r, single)?;
            write_fit(&out, &format!("_{}", k + 1), &r, single)?;
        }
    } else {
        let r = fit::fit(variant, &conditions, &svc, &cfg)?;
        report_fit("", &r, &conditions)?;
        write_fit(&out, "", &r, &conditions)?;
    }
    s.write_manifest(&out, "fit")
}

/// Predicted value at each observation time: the nearest predicted sample,
/// which must lie within half a local sample spacing.
fn align(observed: &MiscTrace, predicted: &MiscTrace) -> Result<Vec<f64>, CliError> {
    let pt = predicted.times();
    let pv = predicted.values();
    observed
        .times()
        .iter()
        .map(|&t| {
            let i = pt.partition_point(|&x| x < t);
            let candidates = [i.checked_sub(1), (i < pt.len()).then_some(i)];
            let j = candidates
                .into_iter()
                .flatten()
                .min_by(|&a, &b| (pt[a] - t).abs().total_cmp(&(pt[b] - t).abs()))
                .ok_or_else(|| CliError::io("empty predicted series"))?;
            let spacing = [
                j.checked_sub(1).map(|k| pt[j] - pt[k]),
                pt.get(j + 1).map(|x| x - pt[j]),
            ]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
            let tol = if spacing.is_finite() { 0.5 * spacing } else { 0.0 } + 1e-9 * (1.0 + t.abs());
            if (pt[j] - t).abs() > tol {
                return Err(CliError::io(format!(
                    "no predicted sample near observation time {}",
                    sig9(t)
                )));
            }
            Ok(pv[j])
        })
        .collect()
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref(), EVAL_KEYS)?;
    let out = out_dir(&mut s, &a.common)?;
    s.value("seed", a.common.seed, 0u64)?;
    let observed_paths = s.list("observed", paths_str(&a.observed));
    let predicted_paths = s.list("predicted", paths_str(&a.predicted));
    let motion_paths = s.list("motion", paths_str(&a.motion));
    if observed_paths.is_empty() {
        return Err(CliError::usage("at least one --observed file is required"));
    }
    let observed: Vec<MiscTrace> = observed_paths
        .iter()
        .map(load_misc_series_csv)
        .collect::<Result<_, _>>()?;

    let predictions: Vec<Vec<f64>> = match (predicted_paths.is_empty(), motion_paths.is_empty()) {
        (false, true) => {
            if predicted_paths.len() != observed.len() {
                return Err(CliError::usage("each --observed file needs one --predicted file"));
            }
            predicted_paths
                .iter()
                .zip(&observed)
                .map(|(p, o)| align(o, &load_misc_series_csv(p)?))
                .collect::<Result<_, _>>()?
        }
        (true, false) => {
            if motion_paths.len() != observed.len() {
                return Err(CliError::usage("each --observed file needs one --motion file"));
            }
            let variant = require_variant(&mut s, &a.common)?;
            let params = output_params(&mut s, Some(variant), &a.output)?
                .ok_or_else(|| CliError::usage("predicting from motion needs --param or --params"))?;
            let svc = s.svc()?;
            let traces: Vec<MotionTrace> = motion_paths
                .iter()
                .map(|p| load_motion(p, svc.g0, None))
                .collect::<Result<_, _>>()?;
            let dt_sim = sim_step(&mut s, a.common.dt, &traces)?;
            let conditions: Vec<ConditionData> = traces
                .into_iter()
                .zip(&observed)
                .map(|(m, o)| ConditionData::new(m, o.clone()))
                .collect::<Result<_, _>>()?;
            let sim = SimConfig {
                dt_sim,
                ..SimConfig::default()
            };
            fit::predict_conditions(&conditions, &params, &svc, &sim)?
        }
        _ => {
            return Err(CliError::usage(
                "give either --predicted files or --motion files, not both",
            ))
        }
    };

    let mut rows = Vec::new();
    let (mut all_obs, mut all_pred) = (Vec::new(), Vec::new());
    for (k, (o, p)) in observed.iter().zip(&predictions).enumerate() {
        let obs = o.values();
        let scope = format!("condition_{}", k + 1);
        rows.push(("pearson_r", scope.clone(), r_text(&obs, p)?));
        rows.push(("mae", scope, sig9(mean_abs_error(&obs, p)?)));
        all_obs.extend(obs);
        all_pred.extend_from_slice(p);
    }
    rows.push(("pearson_r", "pooled".into(), r_text(&all_obs, &all_pred)?));
    rows.push(("mae", "pooled".into(), sig9(mean_abs_error(&all_obs, &all_pred)?)));

    write_file(&out.join("metrics.csv"), |w| {
        writeln!(w, "metric,scope,value")?;
        for (m, scope, v) in &rows {
            writeln!(w, "{m},{scope},{v}")?;
        }
        Ok(())
    })?;
    for (m, scope, v) in &rows {
        println!("{m:<10} {scope:<12} {v}");
        if v == "undefined" {
            eprintln!("note: pearson_r for {scope} is undefined (zero variance)");
        }
    }
    s.write_manifest(&out, "eval")
}
