//! 8-bit engineering units and their mapping onto the networks' `[-1, 1]` range.
//!
//! Illuminance (lx_d8bv) and command (V_d8bv) signals are 8-bit converter
//! codes. Calibration: 100 lx_d8bv corresponds to 500 lx on the working
//! plane, 127 V_d8bv to 5 V dc on the ballast control input.

use std::fmt;

use crate::error::{Error, Result};

/// An 8-bit converter code in `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct D8bv(u8);

impl D8bv {
    pub const MIN: D8bv = D8bv(0);
    pub const MAX: D8bv = D8bv(255);

    pub const fn new(v: u8) -> Self {
        D8bv(v)
    }

    pub fn try_from_i64(v: i64) -> Result<Self> {
        u8::try_from(v).map(D8bv).map_err(|_| Error::OutOfRange {
            what: "8-bit value",
            value: v,
            min: 0,
            max: 255,
        })
    }

    /// Saturating conversion.
    pub fn saturating(v: i64) -> Self {
        D8bv(v.clamp(0, 255) as u8)
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    pub const fn as_i32(self) -> i32 {
        self.0 as i32
    }
}

impl From<u8> for D8bv {
    fn from(v: u8) -> Self {
        D8bv(v)
    }
}

impl fmt::Display for D8bv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Network-side signal value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct UnitSignal(f64);

impl UnitSignal {
    pub fn new(v: f64) -> Self {
        UnitSignal(v)
    }

    /// Limits to `[-1, 1]`.
    pub fn limited(v: f64) -> Self {
        UnitSignal(v.clamp(-1.0, 1.0))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// How the control error and its change are brought into `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorScaling {
    /// `eps / 255` and `deps / 510`, each over its own range.
    #[default]
    Independent,
    /// Both divided by 255, change in error clamped to `[-1, 1]`.
    Shared255,
}

impl std::str::FromStr for ErrorScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(ErrorScaling::Independent),
            "shared255" => Ok(ErrorScaling::Shared255),
            other => Err(Error::param(
                "error_scaling",
                format!("expected `independent` or `shared255`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for ErrorScaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorScaling::Independent => "independent",
            ErrorScaling::Shared255 => "shared255",
        })
    }
}

/// `v / 127.5 - 1`.
pub fn scale_to_unit(v: D8bv) -> UnitSignal {
    UnitSignal(f64::from(v.0) / 127.5 - 1.0)
}

/// Limits to `[-1, 1]`, then maps back to `[0, 255]` rounding half away from zero.
pub fn unit_to_d8bv(u: f64) -> D8bv {
    // NaN has no meaningful code; treat as the low endpoint.
    let u = if u.is_nan() { -1.0 } else { u.clamp(-1.0, 1.0) };
    let code = ((u + 1.0) * 127.5).round();
    D8bv(code.clamp(0.0, 255.0) as u8)
}

fn checked(what: &'static str, v: i32, bound: i32) -> Result<i32> {
    if (-bound..=bound).contains(&v) {
        Ok(v)
    } else {
        Err(Error::OutOfRange {
            what,
            value: i64::from(v),
            min: -i64::from(bound),
            max: i64::from(bound),
        })
    }
}

/// `eps / 255` for `eps` in `[-255, 255]`.
pub fn scale_error(eps: i32) -> Result<UnitSignal> {
    Ok(UnitSignal(
        f64::from(checked("control error", eps, 255)?) / 255.0,
    ))
}

/// `deps / 510` for `deps` in `[-510, 510]`.
pub fn scale_delta_error(deps: i32) -> Result<UnitSignal> {
    Ok(UnitSignal(
        f64::from(checked("change in control error", deps, 510)?) / 510.0,
    ))
}

/// The controller's two inputs under the chosen scaling rule.
pub fn scale_error_pair(eps: i32, deps: i32, scaling: ErrorScaling) -> Result<[f64; 2]> {
    let e = scale_error(eps)?.get();
    match scaling {
        ErrorScaling::Independent => Ok([e, scale_delta_error(deps)?.get()]),
        ErrorScaling::Shared255 => {
            let d = checked("change in control error", deps, 510)?;
            Ok([e, UnitSignal::limited(f64::from(d) / 255.0).get()])
        }
    }
}

/// `min(a + b, 255)`.
pub fn clamp8_sum(a: D8bv, b: D8bv) -> D8bv {
    D8bv(a.0.saturating_add(b.0))
}
