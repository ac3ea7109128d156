//! Steady-state error-band statistics.
//!
//! Steps with `k < warmup` are treated as transient and ignored. All bands
//! are closed intervals.

use std::fmt::Write as _;

use crate::control::StepRecord;

/// Wide steady-state band for the control error, lx_d8bv.
pub const WIDE_BAND: (i32, i32) = (-11, 9);
/// Band holding the majority of steady-state errors, lx_d8bv.
pub const NARROW_BAND: (i32, i32) = (-5, 5);
/// Half-width of the band around the setpoint where illuminance variation goes unnoticed.
pub const PERCEPTION_HALF_WIDTH: i32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandFlag {
    Ok,
    /// Warm-up covers the whole run; fractions are reported as zero.
    NoSteadyState,
    /// Not a single steady step has its error inside the wide band.
    NoCompliance,
}

impl BandFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            BandFlag::Ok => "ok",
            BandFlag::NoSteadyState => "no_steady_state",
            BandFlag::NoCompliance => "no_compliance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub warmup_steps: usize,
    pub n_steady: usize,
    pub eps_min: i32,
    pub eps_max: i32,
    pub frac_in_wide: f64,
    pub frac_in_narrow: f64,
    /// Fraction of steady steps with `E_measured` within ±7 of that step's setpoint
    /// (`[93, 107]` for a setpoint of 100).
    pub frac_meas_in_perception: f64,
    pub mean_abs_eps: f64,
    pub rms_eps: f64,
    pub flag: BandFlag,
}

fn within(v: i32, band: (i32, i32)) -> bool {
    band.0 <= v && v <= band.1
}

fn steady(records: &[StepRecord], warmup: usize) -> impl Iterator<Item = &StepRecord> {
    records.iter().filter(move |r| r.k >= warmup)
}

pub fn band_report(records: &[StepRecord], warmup_steps: usize) -> BandReport {
    let (mut n, mut wide, mut narrow, mut perceived) = (0usize, 0usize, 0usize, 0usize);
    let (mut eps_min, mut eps_max) = (i32::MAX, i32::MIN);
    let (mut abs_sum, mut sq_sum) = (0.0f64, 0.0f64);
    for r in steady(records, warmup_steps) {
        n += 1;
        eps_min = eps_min.min(r.eps);
        eps_max = eps_max.max(r.eps);
        wide += usize::from(within(r.eps, WIDE_BAND));
        narrow += usize::from(within(r.eps, NARROW_BAND));
        let sp = r.e_desired.as_i32();
        perceived += usize::from(within(
            r.e_measured.as_i32(),
            (sp - PERCEPTION_HALF_WIDTH, sp + PERCEPTION_HALF_WIDTH),
        ));
        let e = f64::from(r.eps);
        abs_sum += e.abs();
        sq_sum += e * e;
    }
    if n == 0 {
        return BandReport {
            warmup_steps,
            n_steady: 0,
            eps_min: 0,
            eps_max: 0,
            frac_in_wide: 0.0,
            frac_in_narrow: 0.0,
            frac_meas_in_perception: 0.0,
            mean_abs_eps: 0.0,
            rms_eps: 0.0,
            flag: BandFlag::NoSteadyState,
        };
    }
    let nf = n as f64;
    BandReport {
        warmup_steps,
        n_steady: n,
        eps_min,
        eps_max,
        frac_in_wide: wide as f64 / nf,
        frac_in_narrow: narrow as f64 / nf,
        frac_meas_in_perception: perceived as f64 / nf,
        mean_abs_eps: abs_sum / nf,
        rms_eps: (sq_sum / nf).sqrt(),
        flag: if wide == 0 {
            BandFlag::NoCompliance
        } else {
            BandFlag::Ok
        },
    }
}

/// Fraction of steady steps whose error is inside the wide band but outside the narrow one.
pub fn extreme_rarity(records: &[StepRecord], warmup_steps: usize) -> f64 {
    let (mut n, mut hits) = (0usize, 0usize);
    for r in steady(records, warmup_steps) {
        n += 1;
        hits += usize::from(within(r.eps, WIDE_BAND) && !within(r.eps, NARROW_BAND));
    }
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

impl BandReport {
    /// `key=value` lines, one per field.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "warmup_steps={}", self.warmup_steps);
        let _ = writeln!(s, "n_steady={}", self.n_steady);
        let _ = writeln!(s, "eps_min={}", self.eps_min);
        let _ = writeln!(s, "eps_max={}", self.eps_max);
        let _ = writeln!(s, "frac_in_wide={:.6}", self.frac_in_wide);
        let _ = writeln!(s, "frac_in_narrow={:.6}", self.frac_in_narrow);
        let _ = writeln!(
            s,
            "frac_meas_in_perception={:.6}",
            self.frac_meas_in_perception
        );
        let _ = writeln!(s, "mean_abs_eps={:.6}", self.mean_abs_eps);
        let _ = writeln!(s, "rms_eps={:.6}", self.rms_eps);
        let _ = writeln!(s, "flag={}", self.flag.as_str());
        s
    }
}
