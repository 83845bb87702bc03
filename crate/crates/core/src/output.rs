//! MISC output parts: dynamic maps from conflict magnitude `‖Δv‖` to MISC.
//!
//! The Oman-type variants share a slow and a fast critically damped
//! second-order pathway, each realized as two cascaded first-order lags:
//!
//! ```text
//! u_s = u_i / (beta2 s + 1)^2
//! u_f = (u_s * u_i) / (beta1 s + 1)^2
//! u_o = u_s + u_f
//! ```
//!
//! `MsiBase` passes a Hill-saturated conflict through one second-order lag
//! with time constant `tau_i` and scales by `P`.
//!
//! Exponents act on the numeric value of `‖Δv‖` in m/s².

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::ode::OdeState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputVariant {
    MsiBase,
    OmanAp,
    OmanBp,
    OmanHill,
}

impl OutputVariant {
    pub const ALL: [OutputVariant; 4] = [
        OutputVariant::MsiBase,
        OutputVariant::OmanAp,
        OutputVariant::OmanBp,
        OutputVariant::OmanHill,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutputVariant::MsiBase => "msibase",
            OutputVariant::OmanAp => "omanap",
            OutputVariant::OmanBp => "omanbp",
            OutputVariant::OmanHill => "omanhill",
        }
    }

    /// Parameter names in canonical order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            OutputVariant::MsiBase => &["b", "tau_i", "p"],
            OutputVariant::OmanAp => &["beta1", "beta2", "m_ap"],
            OutputVariant::OmanBp => &["beta1", "beta2", "m_bp"],
            OutputVariant::OmanHill => &["beta1", "beta2", "b", "g"],
        }
    }

    /// Number of filter states.
    pub fn state_dim(self) -> usize {
        match self {
            OutputVariant::MsiBase => 2,
            _ => 4,
        }
    }
}

impl fmt::Display for OutputVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OutputVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OutputVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "unknown variant `{s}` (expected msibase, omanap, omanbp or omanhill)"
                ))
            })
    }
}

/// Output-part parameters. Time constants in seconds, `b` in m/s².
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputParams {
    MsiBase { b: f64, tau_i: f64, p: f64 },
    OmanAp { beta1: f64, beta2: f64, m_ap: f64 },
    OmanBp { beta1: f64, beta2: f64, m_bp: f64 },
    OmanHill { beta1: f64, beta2: f64, b: f64, g: f64 },
}

impl OutputParams {
    pub fn variant(&self) -> OutputVariant {
        match self {
            OutputParams::MsiBase { .. } => OutputVariant::MsiBase,
            OutputParams::OmanAp { .. } => OutputVariant::OmanAp,
            OutputParams::OmanBp { .. } => OutputVariant::OmanBp,
            OutputParams::OmanHill { .. } => OutputVariant::OmanHill,
        }
    }

    /// Values in the order of [`OutputVariant::param_names`].
    pub fn values(&self) -> Vec<f64> {
        match *self {
            OutputParams::MsiBase { b, tau_i, p } => vec![b, tau_i, p],
            OutputParams::OmanAp { beta1, beta2, m_ap } => vec![beta1, beta2, m_ap],
            OutputParams::OmanBp { beta1, beta2, m_bp } => vec![beta1, beta2, m_bp],
            OutputParams::OmanHill { beta1, beta2, b, g } => vec![beta1, beta2, b, g],
        }
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        self.variant()
            .param_names()
            .iter()
            .copied()
            .zip(self.values())
            .collect()
    }

    /// Builds and validates parameters from values in canonical order.
    pub fn from_values(variant: OutputVariant, v: &[f64]) -> Result<Self> {
        let n = variant.param_names().len();
        if v.len() != n {
            return Err(Error::LengthMismatch {
                left: v.len(),
                right: n,
            });
        }
        let p = match variant {
            OutputVariant::MsiBase => OutputParams::MsiBase {
                b: v[0],
                tau_i: v[1],
                p: v[2],
            },
            OutputVariant::OmanAp => OutputParams::OmanAp {
                beta1: v[0],
                beta2: v[1],
                m_ap: v[2],
            },
            OutputVariant::OmanBp => OutputParams::OmanBp {
                beta1: v[0],
                beta2: v[1],
                m_bp: v[2],
            },
            OutputVariant::OmanHill => OutputParams::OmanHill {
                beta1: v[0],
                beta2: v[1],
                b: v[2],
                g: v[3],
            },
        };
        p.validate()?;
        Ok(p)
    }

    /// All parameters positive and finite; `beta1 < beta2`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "output parameter {name} = {v} must be positive"
                )));
            }
        }
        if let Some((b1, b2)) = self.betas() {
            if b1 >= b2 {
                return Err(Error::Invalid(format!("beta1 = {b1} must be below beta2 = {b2}")));
            }
        }
        Ok(())
    }

    fn betas(&self) -> Option<(f64, f64)> {
        match *self {
            OutputParams::MsiBase { .. } => None,
            OutputParams::OmanAp { beta1, beta2, .. }
            | OutputParams::OmanBp { beta1, beta2, .. }
            | OutputParams::OmanHill { beta1, beta2, .. } => Some((beta1, beta2)),
        }
    }

    /// Slowest filter time constant.
    pub fn slowest_time_constant(&self) -> f64 {
        match *self {
            OutputParams::MsiBase { tau_i, .. } => tau_i,
            _ => self.betas().unwrap().1,
        }
    }
}

/// Filter states. Oman variants use `[s1, s2, f1, f2]`; `MsiBase` uses
/// `[z1, z2]` in the first two slots and leaves the rest at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutputState(pub [f64; 4]);

impl OutputState {
    pub fn zero() -> Self {
        OutputState::default()
    }

    /// Slow-pathway output `u_s` (Oman variants).
    pub fn slow(&self) -> f64 {
        self.0[1]
    }

    /// Fast-pathway output `u_f` (Oman variants).
    pub fn fast(&self) -> f64 {
        self.0[3]
    }

    /// `u_o = u_s + u_f` for Oman variants, the filtered Hill value `z2` for
    /// `MsiBase`.
    pub fn combined(&self, variant: OutputVariant) -> f64 {
        match variant {
            OutputVariant::MsiBase => self.0[1],
            _ => self.0[1] + self.0[3],
        }
    }
}

impl OdeState for OutputState {
    #[inline]
    fn add_scaled(&self, k: &Self, h: f64) -> Self {
        OutputState(self.0.add_scaled(&k.0, h))
    }
}

/// Hill saturation `x² / (1 + x²)`.
pub fn hill(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Invalid(format!("Hill input must be non-negative, got {x}")));
    }
    Ok(hill_unchecked(x))
}

#[inline]
fn hill_unchecked(x: f64) -> f64 {
    let x2 = x * x;
    x2 / (1.0 + x2)
}

/// Pathway input `u_i` for a conflict magnitude `dv_norm ≥ 0`.
#[inline]
pub fn output_input(params: &OutputParams, dv_norm: f64) -> f64 {
    match *params {
        OutputParams::MsiBase { b, .. } | OutputParams::OmanHill { b, .. } => hill_unchecked(dv_norm / b),
        OutputParams::OmanAp { .. } => dv_norm,
        OutputParams::OmanBp { m_bp, .. } => dv_norm.powf(m_bp),
    }
}

#[inline]
pub fn output_derivatives(params: &OutputParams, state: &OutputState, u_i: f64) -> OutputState {
    let x = &state.0;
    match *params {
        OutputParams::MsiBase { tau_i, .. } => {
            let r = 1.0 / tau_i;
            OutputState([(u_i - x[0]) * r, (x[0] - x[1]) * r, 0.0, 0.0])
        }
        OutputParams::OmanAp { beta1, beta2, .. }
        | OutputParams::OmanBp { beta1, beta2, .. }
        | OutputParams::OmanHill { beta1, beta2, .. } => {
            let (r1, r2) = (1.0 / beta1, 1.0 / beta2);
            OutputState([
                (u_i - x[0]) * r2,
                (x[0] - x[1]) * r2,
                (x[1] * u_i - x[2]) * r1,
                (x[2] - x[3]) * r1,
            ])
        }
    }
}

/// Model MISC from the filter state; raw, not clamped to the rating scale.
pub fn output_misc(params: &OutputParams, state: &OutputState) -> Result<f64> {
    let u_o = state.combined(params.variant());
    if u_o < 0.0 || !u_o.is_finite() {
        return Err(Error::Internal(format!(
            "output-part signal u_o = {u_o} is not a non-negative number"
        )));
    }
    Ok(post_map(params, u_o))
}

#[inline]
fn post_map(params: &OutputParams, u_o: f64) -> f64 {
    match *params {
        OutputParams::MsiBase { p, .. } => p * u_o,
        OutputParams::OmanAp { m_ap, .. } => u_o.powf(m_ap),
        OutputParams::OmanBp { .. } => u_o,
        OutputParams::OmanHill { g, .. } => g * u_o,
    }
}

/// Closed-form MISC after holding `‖Δv‖` constant indefinitely.
pub fn steady_state_misc(params: &OutputParams, dv_norm: f64) -> f64 {
    let c = output_input(params, dv_norm);
    match params.variant() {
        OutputVariant::MsiBase => post_map(params, c),
        _ => post_map(params, c + c * c),
    }
}

/// Clamps a raw MISC value to the 0 to 10 rating scale for reporting.
pub fn present(misc: f64, clamp: bool) -> f64 {
    if clamp {
        misc.clamp(0.0, 10.0)
    } else {
        misc
    }
}

/// Values found in `param,value` rows for each of the variant's parameters,
/// in canonical order. Unknown names are ignored.
pub fn parse_param_values<R: Read>(reader: R, variant: OutputVariant) -> Result<Vec<Option<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values: Vec<Option<f64>> = vec![None; variant.param_names().len()];
    for record in rdr.records() {
        let record = record?;
        let name = record.get(0).unwrap_or("").to_ascii_lowercase();
        if let Some(k) = variant.param_names().iter().position(|n| *n == name) {
            let raw = record.get(1).unwrap_or("");
            let v = raw.parse::<f64>().map_err(|_| Error::NonNumeric {
                line: record.position().map_or(0, |p| p.line()),
                column: "value".into(),
                value: raw.into(),
            })?;
            values[k] = Some(v);
        }
    }
    Ok(values)
}

/// Reads a complete parameter set for the given variant.
pub fn parse_params_csv<R: Read>(reader: R, variant: OutputVariant) -> Result<OutputParams> {
    let values: Vec<f64> = parse_param_values(reader, variant)?
        .iter()
        .zip(variant.param_names())
        .map(|(v, n)| v.ok_or_else(|| Error::MissingColumn(format!("param {n}"))))
        .collect::<Result<_>>()?;
    OutputParams::from_values(variant, &values)
}

pub fn write_params_csv<W: Write>(mut w: W, params: &OutputParams) -> std::io::Result<()> {
    writeln!(w, "# variant={}", params.variant())?;
    writeln!(w, "param,value")?;
    for (name, v) in params.named() {
        writeln!(w, "{name},{}", sig9(v))?;
    }
    Ok(())
}
