use motion_misc::fit::{fit, fit_per_condition, objective_j, predict_conditions, ConditionData, FitConfig};
use motion_misc::protocol::{run_protocol, ProtocolConfig};
use motion_misc::scenario::{HeadTilt, HeadTiltCondition, ShuttleConfig};
use motion_misc::{
    simulate, Error, MiscObservation, MiscTrace, MotionSample, MotionTrace, OutputParams, OutputVariant, SimConfig,
    SvcParams, Vec3,
};
use proptest::prelude::*;

fn short_protocol() -> ProtocolConfig {
    ProtocolConfig {
        shuttle: ShuttleConfig {
            set_duration: 180.0,
            n_sets: 2,
            break_duration: 30.0,
            recovery_duration: 120.0,
            dt: 0.05,
            ..ShuttleConfig::default()
        },
        sim: SimConfig {
            dt_sim: 0.05,
            ..SimConfig::default()
        },
        stop_level: 6.0,
    }
}

fn fit_config(n_starts: usize) -> FitConfig {
    FitConfig {
        n_starts,
        sim: SimConfig {
            dt_sim: 0.05,
            ..SimConfig::default()
        },
        ..FitConfig::default()
    }
}

const TRUTH: OutputParams = OutputParams::OmanHill {
    beta1: 20.0,
    beta2: 200.0,
    b: 0.1,
    g: 12.0,
};

/// Both conditions with unrounded model output as the observations.
fn exact_conditions() -> Vec<ConditionData> {
    let svc = SvcParams::default();
    [HeadTilt::Static, HeadTilt::Move]
        .iter()
        .map(|&tilt| {
            let run = run_protocol(&short_protocol(), &HeadTiltCondition::new(tilt), &svc, &TRUTH).unwrap();
            ConditionData::new(run.motion, run.truth).unwrap()
        })
        .collect()
}

#[test]
fn noiseless_round_trip_reaches_zero_objective() {
    let conditions = exact_conditions();
    let r = fit(
        OutputVariant::OmanHill,
        &conditions,
        &SvcParams::default(),
        &fit_config(6),
    )
    .unwrap();
    assert!(r.j <= 1e-6, "J = {}, params {:?}", r.j, r.best_params);
    assert!(r.starts.iter().all(|s| r.j <= s.final_j));
    assert_eq!(r.residuals.len(), 2);
    for (res, c) in r.residuals.iter().zip(&conditions) {
        assert_eq!(res.len(), c.observed.len());
    }
}

#[test]
fn fit_is_deterministic_for_a_seed() {
    let conditions = exact_conditions();
    let cfg = fit_config(3);
    let a = fit(OutputVariant::OmanHill, &conditions, &SvcParams::default(), &cfg).unwrap();
    let b = fit(OutputVariant::OmanHill, &conditions, &SvcParams::default(), &cfg).unwrap();
    assert_eq!(a.best_params, b.best_params);
    assert_eq!(a.j.to_bits(), b.j.to_bits());
    let mut w = (Vec::new(), Vec::new());
    a.write_diagnostics_csv(&mut w.0).unwrap();
    b.write_diagnostics_csv(&mut w.1).unwrap();
    assert_eq!(w.0, w.1);
}

#[test]
fn all_zero_observations_are_excluded() {
    let conditions: Vec<ConditionData> = exact_conditions()
        .into_iter()
        .map(|c| {
            let zeros = vec![0.0; c.observed.len()];
            ConditionData::new(c.motion, MiscTrace::from_pairs(&c.observed.times(), &zeros).unwrap()).unwrap()
        })
        .collect();
    let err = fit(
        OutputVariant::OmanHill,
        &conditions,
        &SvcParams::default(),
        &fit_config(2),
    )
    .unwrap_err();
    assert!(matches!(err, Error::NoSymptoms), "{err}");
}

#[test]
fn iteration_cap_reports_no_convergence() {
    let cfg = FitConfig {
        max_iters: 5,
        ..fit_config(2)
    };
    let err = fit(
        OutputVariant::OmanHill,
        &exact_conditions(),
        &SvcParams::default(),
        &cfg,
    )
    .unwrap_err();
    assert!(matches!(err, Error::NoConvergence { starts: 2 }), "{err}");
}

#[test]
fn per_condition_mode_fits_each_separately() {
    let conditions = exact_conditions();
    let cfg = fit_config(2);
    let rs = fit_per_condition(OutputVariant::OmanAp, &conditions, &SvcParams::default(), &cfg).unwrap();
    assert_eq!(rs.len(), 2);
    for r in &rs {
        assert_eq!(r.predictions.len(), 1);
        r.best_params.validate().unwrap();
    }
}

#[test]
fn observations_outside_motion_are_rejected() {
    let c = &exact_conditions()[0];
    let late = MiscTrace::new(vec![MiscObservation {
        t: c.motion.end() + 5.0,
        value: 1.0,
    }])
    .unwrap();
    assert!(ConditionData::new(c.motion.clone(), late).is_err());
}

#[test]
fn predictions_match_protocol_truth() {
    let conditions = exact_conditions();
    let pred = predict_conditions(&conditions, &TRUTH, &SvcParams::default(), &fit_config(1).sim).unwrap();
    for (p, c) in pred.iter().zip(&conditions) {
        assert_eq!(p, &c.observed.values());
    }
}

fn wobble(t0: f64, duration: f64, dt: f64) -> MotionTrace {
    let n = (duration / dt).round() as usize;
    MotionTrace::new(
        (0..=n)
            .map(|i| {
                let s = i as f64 * dt;
                MotionSample {
                    t: t0 + s,
                    f: Vec3::new((0.7 * s).sin(), 0.3 * (0.2 * s).cos(), 9.81),
                    omega: Vec3::new(0.0, 0.2 * (0.5 * s).sin(), 0.1),
                    a: Vec3::new((0.7 * s).sin(), 0.0, 0.0),
                }
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn time_shift_equivariance() {
    let svc = SvcParams::default();
    let cfg = SimConfig {
        dt_sim: 0.02,
        ..SimConfig::default()
    };
    let a = simulate(&wobble(0.0, 120.0, 0.02), &svc, &TRUTH, &cfg).unwrap();
    let b = simulate(&wobble(1000.0, 120.0, 0.02), &svc, &TRUTH, &cfg).unwrap();
    assert_eq!(a.misc.len(), b.misc.len());
    for (x, y) in a.misc.observations().iter().zip(b.misc.observations()) {
        assert!((y.t - x.t - 1000.0).abs() < 1e-9);
        assert!((x.value - y.value).abs() <= 1e-12 * (1.0 + x.value.abs()));
    }
}

#[test]
fn simulation_is_reproducible() {
    let svc = SvcParams::default();
    let cfg = SimConfig {
        dt_sim: 0.02,
        ..SimConfig::default()
    };
    let m = wobble(0.0, 60.0, 0.02);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    simulate(&m, &svc, &TRUTH, &cfg).unwrap().write_csv(&mut x).unwrap();
    simulate(&m, &svc, &TRUTH, &cfg).unwrap().write_csv(&mut y).unwrap();
    assert_eq!(x, y);
}

proptest! {
    #[test]
    fn objective_ignores_condition_order(
        a in prop::collection::vec((0.0f64..10.0, -2.0f64..12.0), 1..12),
        b in prop::collection::vec((0.0f64..10.0, -2.0f64..12.0), 1..12),
    ) {
        let (oa, pa): (Vec<f64>, Vec<f64>) = a.into_iter().unzip();
        let (ob, pb): (Vec<f64>, Vec<f64>) = b.into_iter().unzip();
        let j1 = objective_j(&[&oa, &ob], &[&pa, &pb]).unwrap();
        let j2 = objective_j(&[&ob, &oa], &[&pb, &pa]).unwrap();
        prop_assert!((j1 - j2).abs() <= 1e-12 * (1.0 + j1));
        prop_assert!(j1 >= 0.0);
    }
}

#[test]
fn objective_examples() {
    assert_eq!(objective_j(&[&[1.0, 2.0]], &[&[1.0, 2.0]]).unwrap(), 0.0);
    let j = objective_j(&[&[0.0, 0.0], &[0.0]], &[&[1.0, 1.0], &[2.0]]).unwrap();
    assert_eq!(j, 6.0);
    assert!(matches!(
        objective_j(&[&[0.0, 0.0]], &[&[1.0]]),
        Err(Error::LengthMismatch { .. })
    ));
}
