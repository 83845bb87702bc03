//! Motion and symptom time series: types, CSV ingestion, and resampling.
//!
//! Head frame: right-handed, x forward, y left, z up. At upright rest the
//! sensed specific force is `f = (0, 0, +g)`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::vec3::Vec3;

pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Tolerance on sample spacing, in seconds.
pub const SPACING_TOL: f64 = 1e-9;

/// One head-motion sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSample {
    pub t: f64,
    /// Specific force (gravito-inertial acceleration), m/s².
    pub f: Vec3,
    /// Angular velocity, rad/s.
    pub omega: Vec3,
    /// True inertial acceleration, m/s².
    pub a: Vec3,
}

impl MotionSample {
    /// Upright stationary head.
    pub fn rest(t: f64, g0: f64) -> Self {
        MotionSample {
            t,
            f: Vec3::new(0.0, 0.0, g0),
            omega: Vec3::ZERO,
            a: Vec3::ZERO,
        }
    }

    fn is_finite(&self) -> bool {
        self.t.is_finite() && self.f.is_finite() && self.omega.is_finite() && self.a.is_finite()
    }

    fn lerp(&self, other: &MotionSample, t: f64, frac: f64) -> MotionSample {
        MotionSample {
            t,
            f: self.f.lerp(other.f, frac),
            omega: self.omega.lerp(other.omega, frac),
            a: self.a.lerp(other.a, frac),
        }
    }
}

/// Uniformly sampled head motion.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTrace {
    dt: f64,
    samples: Vec<MotionSample>,
    /// Set when the true-acceleration channel was inferred under the
    /// upright-static assumption instead of being read from the source.
    pub accel_inferred: bool,
}

impl MotionTrace {
    /// Validates the samples and derives `dt` from the first/last timestamps.
    pub fn new(samples: Vec<MotionSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                found: samples.len(),
            });
        }
        check_samples(&samples)?;
        let n = samples.len();
        let dt = (samples[n - 1].t - samples[0].t) / (n - 1) as f64;
        for (i, w) in samples.windows(2).enumerate() {
            let found = w[1].t - w[0].t;
            if (found - dt).abs() > SPACING_TOL {
                return Err(Error::NonUniformSpacing {
                    index: i,
                    found,
                    expected: dt,
                });
            }
        }
        Ok(MotionTrace {
            dt,
            samples,
            accel_inferred: false,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[MotionSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Piecewise-linear input at time `t`, clamped to the end samples.
    pub fn input_at(&self, t: f64) -> MotionSample {
        let n = self.samples.len();
        let pos = (t - self.start()) / self.dt;
        if pos <= 0.0 {
            return MotionSample { t, ..self.samples[0] };
        }
        let i = pos.floor() as usize;
        if i >= n - 1 {
            return MotionSample {
                t,
                ..self.samples[n - 1]
            };
        }
        let frac = pos - i as f64;
        self.samples[i].lerp(&self.samples[i + 1], t, frac)
    }

    /// A new trace with `rest_duration` seconds of upright rest prepended.
    /// Existing samples are shifted later in time.
    pub fn prepend_rest(&self, rest_duration: f64, g0: f64) -> Result<MotionTrace> {
        let n_rest = (rest_duration / self.dt).round() as usize;
        let t0 = self.start();
        let mut samples = Vec::with_capacity(n_rest + self.samples.len());
        for i in 0..n_rest {
            samples.push(MotionSample::rest(t0 + i as f64 * self.dt, g0));
        }
        for (i, s) in self.samples.iter().enumerate() {
            samples.push(MotionSample {
                t: t0 + (n_rest + i) as f64 * self.dt,
                ..*s
            });
        }
        MotionTrace::new(samples)
    }
}

fn check_samples(samples: &[MotionSample]) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::Invalid(format!("non-finite value in sample {i}")));
        }
        if s.t < 0.0 {
            return Err(Error::Invalid(format!("negative timestamp {} in sample {i}", s.t)));
        }
        if i > 0 && s.t <= samples[i - 1].t {
            return Err(Error::NonIncreasing {
                line: i as u64 + 1,
                t: s.t,
            });
        }
    }
    Ok(())
}

/// A single MISC rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiscObservation {
    pub t: f64,
    pub value: f64,
}

/// Time-stamped MISC values, either observed (integers 0 to 10) or
/// model-predicted (non-negative reals).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MiscTrace {
    obs: Vec<MiscObservation>,
}

impl MiscTrace {
    /// Checks strictly increasing timestamps and finite values.
    pub fn new(obs: Vec<MiscObservation>) -> Result<Self> {
        for (i, o) in obs.iter().enumerate() {
            if !o.t.is_finite() || !o.value.is_finite() {
                return Err(Error::Invalid(format!("non-finite MISC entry {i}")));
            }
            if i > 0 && o.t <= obs[i - 1].t {
                return Err(Error::NonIncreasing {
                    line: i as u64 + 1,
                    t: o.t,
                });
            }
        }
        Ok(MiscTrace { obs })
    }

    /// Additionally requires every value to be an integer in `{0, ..., 10}`.
    pub fn observed(obs: Vec<MiscObservation>) -> Result<Self> {
        for o in &obs {
            check_observed_value(o.t, o.value)?;
        }
        MiscTrace::new(obs)
    }

    pub fn from_pairs(times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: values.len(),
            });
        }
        MiscTrace::new(
            times
                .iter()
                .zip(values)
                .map(|(&t, &value)| MiscObservation { t, value })
                .collect(),
        )
    }

    pub fn observations(&self) -> &[MiscObservation] {
        &self.obs
    }

    pub fn times(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.value).collect()
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

fn check_observed_value(t: f64, value: f64) -> Result<()> {
    if !(0.0..=10.0).contains(&value) {
        return Err(Error::MiscOutOfRange { t, value });
    }
    if value.fract() != 0.0 {
        return Err(Error::MiscNonInteger { t, value });
    }
    Ok(())
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader)
}

struct Columns(HashMap<String, usize>);

impl Columns {
    fn from_headers(headers: &csv::StringRecord) -> Self {
        Columns(
            headers
                .iter()
                .enumerate()
                .map(|(i, h)| (h.to_ascii_lowercase(), i))
                .collect(),
        )
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn get(&self, name: &str) -> Option<usize> {
        self.0.get(name).copied()
    }
}

fn cell(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonNumeric {
            line,
            column: name.to_string(),
            value: raw.to_string(),
        })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads motion rows without enforcing uniform spacing. Returns the samples
/// and whether the true-acceleration channel had to be inferred.
pub fn parse_motion_samples<R: Read>(reader: R, gravity_magnitude: f64) -> Result<(Vec<MotionSample>, bool)> {
    const REQUIRED: [&str; 7] = ["t", "fx", "fy", "fz", "wx", "wy", "wz"];
    const ACCEL: [&str; 3] = ["ax", "ay", "az"];

    let mut rdr = csv_reader(reader);
    let cols = Columns::from_headers(rdr.headers()?);
    let req: Vec<usize> = REQUIRED.iter().map(|c| cols.require(c)).collect::<Result<_>>()?;
    let accel: Option<Vec<usize>> = ACCEL.iter().map(|c| cols.get(c)).collect();
    let gravity = Vec3::new(0.0, 0.0, gravity_magnitude);

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let mut v = [0.0; 7];
        for (k, (&idx, name)) in req.iter().zip(REQUIRED).enumerate() {
            v[k] = cell(&record, idx, name)?;
        }
        let f = Vec3::new(v[1], v[2], v[3]);
        let a = match &accel {
            Some(idx) => Vec3::new(
                cell(&record, idx[0], "ax")?,
                cell(&record, idx[1], "ay")?,
                cell(&record, idx[2], "az")?,
            ),
            None => f - gravity,
        };
        if let Some(prev) = samples.last().map(|s: &MotionSample| s.t) {
            if v[0] <= prev {
                return Err(Error::NonIncreasing {
                    line: record.position().map_or(0, |p| p.line()),
                    t: v[0],
                });
            }
        }
        samples.push(MotionSample {
            t: v[0],
            f,
            omega: Vec3::new(v[4], v[5], v[6]),
            a,
        });
    }
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: samples.len(),
        });
    }
    Ok((samples, accel.is_none()))
}

/// Loads a uniformly sampled motion CSV (`t,fx,fy,fz,wx,wy,wz[,ax,ay,az]`).
///
/// Without `a` columns the true acceleration is inferred as
/// `f - (0, 0, gravity_magnitude)` and `accel_inferred` is set.
pub fn load_motion_csv(path: impl AsRef<Path>, gravity_magnitude: f64) -> Result<MotionTrace> {
    let (samples, inferred) = parse_motion_samples(open(path.as_ref())?, gravity_magnitude)?;
    let mut trace = MotionTrace::new(samples)?;
    trace.accel_inferred = inferred;
    Ok(trace)
}

/// Like [`load_motion_csv`] but resamples irregular rows onto a uniform grid.
pub fn load_motion_csv_resampled(path: impl AsRef<Path>, gravity_magnitude: f64, dt: f64) -> Result<MotionTrace> {
    let (samples, inferred) = parse_motion_samples(open(path.as_ref())?, gravity_magnitude)?;
    let mut trace = resample_linear(&samples, dt)?;
    trace.accel_inferred = inferred;
    Ok(trace)
}

/// Per-channel linear interpolation onto `t0, t0 + dt, ...` up to the last
/// sample. Grid points that coincide with a sample (within 1e-9 s) copy it
/// verbatim, so resampling a uniform trace at its own `dt` is the identity.
pub fn resample_linear(samples: &[MotionSample], dt: f64) -> Result<MotionTrace> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Invalid(format!("resampling step must be > 0, got {dt}")));
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    check_samples(samples)?;
    let t0 = samples[0].t;
    let t_last = samples[samples.len() - 1].t;
    let n_grid = ((t_last - t0) / dt + 1e-9).floor() as usize + 1;

    let mut out = Vec::with_capacity(n_grid);
    let mut j = 0;
    for n in 0..n_grid {
        let t = t0 + n as f64 * dt;
        while j + 1 < samples.len() && samples[j + 1].t <= t + SPACING_TOL {
            j += 1;
        }
        let s = &samples[j];
        if (s.t - t).abs() <= SPACING_TOL {
            out.push(*s);
        } else if j + 1 >= samples.len() {
            out.push(MotionSample { t, ..*s });
        } else {
            let next = &samples[j + 1];
            out.push(s.lerp(next, t, (t - s.t) / (next.t - s.t)));
        }
    }
    MotionTrace::new(out)
}

/// Writes the trace with all channels, using shortest round-trip formatting.
pub fn write_motion_csv<W: Write>(mut w: W, trace: &MotionTrace) -> std::io::Result<()> {
    writeln!(w, "t,fx,fy,fz,wx,wy,wz,ax,ay,az")?;
    for s in trace.samples() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            s.t, s.f.x, s.f.y, s.f.z, s.omega.x, s.omega.y, s.omega.z, s.a.x, s.a.y, s.a.z
        )?;
    }
    Ok(())
}

pub fn save_motion_csv(path: impl AsRef<Path>, trace: &MotionTrace) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_motion_csv(std::io::BufWriter::new(file), trace).map_err(|e| Error::io(path, e))
}

/// Reads observed MISC (`t,misc`): integers on the 0-10 scale.
pub fn parse_misc_csv<R: Read>(reader: R) -> Result<MiscTrace> {
    MiscTrace::observed(read_misc_rows(reader, true)?)
}

/// Reads a real-valued MISC series such as model output; only finiteness
/// and increasing times are checked.
pub fn parse_misc_series_csv<R: Read>(reader: R) -> Result<MiscTrace> {
    MiscTrace::new(read_misc_rows(reader, false)?)
}

fn read_misc_rows<R: Read>(reader: R, observed: bool) -> Result<Vec<MiscObservation>> {
    let mut rdr = csv_reader(reader);
    let cols = Columns::from_headers(rdr.headers()?);
    let (it, im) = (cols.require("t")?, cols.require("misc")?);
    let mut obs = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let t = cell(&record, it, "t")?;
        let value = cell(&record, im, "misc")?;
        if observed {
            check_observed_value(t, value)?;
        }
        if let Some(prev) = obs.last().map(|o: &MiscObservation| o.t) {
            if t <= prev {
                return Err(Error::NonIncreasing {
                    line: record.position().map_or(0, |p| p.line()),
                    t,
                });
            }
        }
        obs.push(MiscObservation { t, value });
    }
    Ok(obs)
}

/// Loads an observed MISC CSV (`t,misc`).
pub fn load_misc_csv(path: impl AsRef<Path>) -> Result<MiscTrace> {
    parse_misc_csv(open(path.as_ref())?)
}

pub fn load_misc_series_csv(path: impl AsRef<Path>) -> Result<MiscTrace> {
    parse_misc_series_csv(open(path.as_ref())?)
}

pub fn write_misc_csv<W: Write>(mut w: W, trace: &MiscTrace) -> std::io::Result<()> {
    writeln!(w, "t,misc")?;
    for o in trace.observations() {
        writeln!(w, "{},{}", sig9(o.t), sig9(o.value))?;
    }
    Ok(())
}

pub fn save_misc_csv(path: impl AsRef<Path>, trace: &MiscTrace) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_misc_csv(std::io::BufWriter::new(file), trace).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn motion(text: &str) -> Result<MotionTrace> {
        let (samples, inferred) = parse_motion_samples(text.as_bytes(), DEFAULT_GRAVITY)?;
        let mut trace = MotionTrace::new(samples)?;
        trace.accel_inferred = inferred;
        Ok(trace)
    }

    #[test]
    fn infers_accel_for_upright_rest() {
        let trace = motion("t,fx,fy,fz,wx,wy,wz\n0,0,0,9.81,0,0,0\n1,0,0,9.81,0,0,0\n").unwrap();
        assert!(trace.accel_inferred);
        assert_eq!(trace.len(), 2);
        for s in trace.samples() {
            assert_eq!(s.a, Vec3::ZERO);
        }
    }

    #[test]
    fn explicit_accel_passes_through() {
        let text = "# logged\nt,fx,fy,fz,wx,wy,wz,ax,ay,az\n0,1,0,9.81,0,0,0,0.5,0.25,0\n1,1,0,9.81,0,0,0,0.5,0.25,0\n";
        let trace = motion(text).unwrap();
        assert!(!trace.accel_inferred);
        assert_eq!(trace.samples()[0].a, Vec3::new(0.5, 0.25, 0.0));
    }

    #[test]
    fn column_order_is_free() {
        let trace = motion("wz,wy,wx,fz,fy,fx,t\n0,0,0.5,9.81,0,0,0\n0,0,0.5,9.81,0,0,0.5\n").unwrap();
        assert_eq!(trace.samples()[1].omega, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(trace.dt(), 0.5);
    }

    #[test]
    fn rejects_non_uniform_spacing() {
        let err =
            motion("t,fx,fy,fz,wx,wy,wz\n0,0,0,9.81,0,0,0\n0.1,0,0,9.81,0,0,0\n0.3,0,0,9.81,0,0,0\n").unwrap_err();
        assert!(matches!(err, Error::NonUniformSpacing { .. }), "{err}");
        assert!(err.to_string().contains("non-uniform spacing"));
    }

    #[test]
    fn motion_errors() {
        assert!(matches!(
            motion("t,fx,fy,fz,wx,wy\n0,0,0,9.81,0,0\n").unwrap_err(),
            Error::MissingColumn(c) if c == "wz"
        ));
        assert!(matches!(
            motion("t,fx,fy,fz,wx,wy,wz\n0,0,0,abc,0,0,0\n1,0,0,9.81,0,0,0\n").unwrap_err(),
            Error::NonNumeric { line: 2, .. }
        ));
        assert!(matches!(
            motion("t,fx,fy,fz,wx,wy,wz\n1,0,0,9.81,0,0,0\n1,0,0,9.81,0,0,0\n").unwrap_err(),
            Error::NonIncreasing { .. }
        ));
        assert!(matches!(
            motion("t,fx,fy,fz,wx,wy,wz\n0,0,0,9.81,0,0,0\n").unwrap_err(),
            Error::TooFewSamples { found: 1, .. }
        ));
    }

    #[test]
    fn misc_parsing() {
        let trace = parse_misc_csv("t,misc\n0,0\n60,1\n120,2\n".as_bytes()).unwrap();
        assert_eq!(trace.len(), 3);
        assert_eq!(trace.values(), vec![0.0, 1.0, 2.0]);
        assert!(matches!(
            parse_misc_csv("t,misc\n60,11\n".as_bytes()).unwrap_err(),
            Error::MiscOutOfRange { .. }
        ));
        assert!(matches!(
            parse_misc_csv("t,misc\n60,1.5\n".as_bytes()).unwrap_err(),
            Error::MiscNonInteger { .. }
        ));
        assert!(matches!(
            parse_misc_csv("t,misc\n60,1\n60,2\n".as_bytes()).unwrap_err(),
            Error::NonIncreasing { .. }
        ));
        let series = parse_misc_series_csv("t,dv_norm,misc\n0,0.1,-0.25\n0.1,0.2,11.5\n".as_bytes()).unwrap();
        assert_eq!(series.values(), vec![-0.25, 11.5]);
    }

    fn fx_sample(t: f64, fx: f64) -> MotionSample {
        MotionSample {
            f: Vec3::new(fx, 0.0, 9.81),
            ..MotionSample::rest(t, 9.81)
        }
    }

    #[test]
    fn resample_midpoint_and_clamp() {
        let out = resample_linear(&[fx_sample(0.0, 0.0), fx_sample(1.0, 2.0)], 0.5).unwrap();
        let fx: Vec<f64> = out.samples().iter().map(|s| s.f.x).collect();
        assert_eq!(fx, vec![0.0, 1.0, 2.0]);

        let trace = MotionTrace::new(vec![fx_sample(0.0, 0.0), fx_sample(1.0, 2.0)]).unwrap();
        assert_eq!(trace.input_at(5.0).f.x, 2.0);
        assert_eq!(trace.input_at(0.25).f.x, 0.5);
    }

    #[test]
    fn resample_errors() {
        assert!(resample_linear(&[fx_sample(0.0, 0.0), fx_sample(1.0, 1.0)], 0.0).is_err());
        assert!(resample_linear(&[], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn resample_is_identity_on_uniform_traces(
            dt in 0.001f64..1.0,
            values in prop::collection::vec(-20.0f64..20.0, 2..60),
        ) {
            let samples: Vec<MotionSample> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| MotionSample {
                    t: i as f64 * dt,
                    f: Vec3::new(v, -v, 9.81 + v),
                    omega: Vec3::new(0.1 * v, 0.0, v),
                    a: Vec3::new(v, 0.5 * v, 0.0),
                })
                .collect();
            let trace = MotionTrace::new(samples.clone()).unwrap();
            let again = resample_linear(trace.samples(), trace.dt()).unwrap();
            prop_assert_eq!(again.samples(), trace.samples());
        }

        #[test]
        fn csv_round_trip(values in prop::collection::vec(-1e3f64..1e3, 2..20)) {
            let samples: Vec<MotionSample> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| MotionSample {
                    t: i as f64 * 0.01,
                    f: Vec3::new(v, v / 3.0, 9.81),
                    omega: Vec3::new(v / 7.0, 0.0, -v),
                    a: Vec3::new(v, v / 3.0, 0.0),
                })
                .collect();
            let trace = MotionTrace::new(samples).unwrap();
            let mut buf = Vec::new();
            write_motion_csv(&mut buf, &trace).unwrap();
            let back = motion(std::str::from_utf8(&buf).unwrap()).unwrap();
            for (a, b) in trace.samples().iter().zip(back.samples()) {
                for (x, y) in [
                    (a.t, b.t), (a.f.x, b.f.x), (a.f.y, b.f.y), (a.f.z, b.f.z),
                    (a.omega.x, b.omega.x), (a.omega.z, b.omega.z), (a.a.x, b.a.x), (a.a.y, b.a.y),
                ] {
                    prop_assert!((x - y).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn inferred_accel_matches_explicit(fx in -5.0f64..5.0, fz in 5.0f64..15.0) {
            let g = 9.81;
            let az = fz - g;
            let with_a = format!("t,fx,fy,fz,wx,wy,wz,ax,ay,az\n0,{fx},0,{fz},0,0,0,{fx},0,{az}\n1,{fx},0,{fz},0,0,0,{fx},0,{az}\n");
            let without = format!("t,fx,fy,fz,wx,wy,wz\n0,{fx},0,{fz},0,0,0\n1,{fx},0,{fz},0,0,0\n");
            let a = motion(&with_a).unwrap();
            let b = motion(&without).unwrap();
            prop_assert_eq!(a.samples(), b.samples());
        }
    }
}
