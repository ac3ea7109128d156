//! The lighting process: a measured-style look-up table from command to
//! electric illuminance, an additive daylight disturbance and 8-bit
//! measurement, plus generators and CSV I/O for tables and daylight series.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::signals::{clamp8_sum, D8bv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Knot {
    pub u: D8bv,
    pub e: D8bv,
}

/// Monotone piecewise-linear map from command (V_d8bv) to electric
/// illuminance (lx_d8bv), constant beyond the first and last knot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessLut {
    knots: Vec<Knot>,
    table: [u8; 256],
}

impl ProcessLut {
    pub fn new(knots: Vec<Knot>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::param("knots", "a table needs at least 2 knots"));
        }
        for (i, w) in knots.windows(2).enumerate() {
            if w[1].u <= w[0].u {
                return Err(Error::param(
                    "knots",
                    format!("non-increasing u at knot {}", i + 1),
                ));
            }
            if w[1].e < w[0].e {
                return Err(Error::param(
                    "knots",
                    format!("decreasing e at knot {}", i + 1),
                ));
            }
        }
        let mut table = [0u8; 256];
        for (u, slot) in table.iter_mut().enumerate() {
            *slot = interpolate(&knots, u as u8);
        }
        Ok(Self { knots, table })
    }

    /// Power-law stand-in for a measured night-time table:
    /// `e(u) = round(e_max * (u / 255)^shape)` at `knot_count` evenly spaced commands.
    pub fn synthetic(e_max: u8, shape: f64, knot_count: usize) -> Result<Self> {
        if !(120..=255).contains(&e_max) {
            return Err(Error::param("e_max", format!("{e_max} outside [120, 255]")));
        }
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::param("shape", "must be positive"));
        }
        if !(8..=256).contains(&knot_count) {
            return Err(Error::param(
                "knot_count",
                format!("{knot_count} outside [8, 256]"),
            ));
        }
        let last = (knot_count - 1) as f64;
        let knots = (0..knot_count)
            .map(|i| {
                let u = (255.0 * i as f64 / last).round();
                let e = (f64::from(e_max) * (u / 255.0).powf(shape)).round();
                Knot {
                    u: D8bv::new(u as u8),
                    e: D8bv::new(e as u8),
                }
            })
            .collect();
        Self::new(knots)
    }

    /// `synthetic(180, 1.3, 32)`.
    pub fn default_synthetic() -> Self {
        Self::synthetic(180, 1.3, 32).expect("default parameters are valid")
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    #[inline]
    pub fn eval(&self, u: D8bv) -> D8bv {
        D8bv::new(self.table[u.get() as usize])
    }

    /// Smallest command whose output is closest to `e`, found by exhaustive search.
    pub fn inverse(&self, e: D8bv) -> D8bv {
        let target = e.as_i32();
        let best = (0..=255u8)
            .min_by_key(|&u| ((i32::from(self.table[u as usize]) - target).abs(), u))
            .expect("non-empty range");
        D8bv::new(best)
    }

    pub fn is_monotone(&self) -> bool {
        self.table.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,e\n");
        for k in &self.knots {
            let _ = writeln!(s, "{},{}", k.u, k.e);
        }
        s
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let rows = parse_pairs(text, origin, ("u", "e"))?;
        let mut knots: Vec<Knot> = Vec::with_capacity(rows.len());
        for (line, a, b) in rows {
            let u = in_range(a, origin, line, "u")?;
            let e = in_range(b, origin, line, "e")?;
            if let Some(prev) = knots.last() {
                if u <= prev.u {
                    return Err(parse_err(
                        origin,
                        line,
                        format!("non-increasing u at line {line}"),
                    ));
                }
                if e < prev.e {
                    return Err(parse_err(
                        origin,
                        line,
                        format!("decreasing e at line {line}"),
                    ));
                }
            }
            knots.push(Knot { u, e });
        }
        if knots.len() < 2 {
            return Err(parse_err(origin, 1, "a table needs at least 2 rows".into()));
        }
        Self::new(knots)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn interpolate(knots: &[Knot], u: u8) -> u8 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if u <= first.u.get() {
        return first.e.get();
    }
    if u >= last.u.get() {
        return last.e.get();
    }
    let i = knots.partition_point(|k| k.u.get() <= u);
    let (a, b) = (knots[i - 1], knots[i]);
    let num = i64::from(b.e.get() - a.e.get()) * i64::from(u - a.u.get());
    let den = i64::from(b.u.get() - a.u.get());
    // num >= 0, so half-away-from-zero is (2 num + den) div (2 den).
    let step = (2 * num + den) / (2 * den);
    (i64::from(a.e.get()) + step) as u8
}

/// What the plant's light sensor reads: electric light from the previous
/// command plus daylight, saturating at 255.
pub fn plant_measure(lut: &ProcessLut, u_prev: D8bv, daylight: D8bv) -> D8bv {
    clamp8_sum(lut.eval(u_prev), daylight)
}

/// Parameters of the randomized daylight generator.
///
/// The level starts at `base` and lives in
/// `[max(0, base - amplitude), min(255, base + amplitude)]`. Each step draws
/// one uniform; with probability `step_prob` the level jumps by a uniform
/// offset in `[-max_jump, max_jump)` and a new ramp is drawn. Otherwise the
/// level moves toward the current ramp target at the ramp's slope, drawing a
/// new ramp on arrival. A ramp is a target uniform over the band and a slope
/// uniform in `[amplitude / 1000, amplitude / 200)` lx_d8bv per step. Samples
/// are the level rounded half away from zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastChanges {
    pub base: f64,
    pub amplitude: f64,
    pub step_prob: f64,
    pub max_jump: f64,
}

impl Default for FastChanges {
    fn default() -> Self {
        Self {
            base: 40.0,
            amplitude: 60.0,
            step_prob: 0.05,
            max_jump: 50.0,
        }
    }
}

impl FastChanges {
    fn validate(&self) -> Result<()> {
        if !(0.0..=255.0).contains(&self.base) {
            return Err(Error::param(
                "base",
                format!("{} outside [0, 255]", self.base),
            ));
        }
        if !(self.amplitude >= 0.0 && self.amplitude <= 255.0) {
            return Err(Error::param(
                "amplitude",
                format!("{} outside [0, 255]", self.amplitude),
            ));
        }
        if !(0.0..=1.0).contains(&self.step_prob) {
            return Err(Error::param(
                "step_prob",
                format!("{} outside [0, 1]", self.step_prob),
            ));
        }
        if !(self.max_jump >= 0.0 && self.max_jump <= 255.0) {
            return Err(Error::param(
                "max_jump",
                format!("{} outside [0, 255]", self.max_jump),
            ));
        }
        Ok(())
    }
}

/// How a daylight series is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum DaylightSource {
    Constant(D8bv),
    /// `before` for `k < at`, `after` from `at` on.
    Step {
        before: D8bv,
        after: D8bv,
        at: usize,
    },
    /// Linear from `from` at the first step to `to` at the last, rounded.
    Ramp {
        from: D8bv,
        to: D8bv,
    },
    FastChanges(FastChanges),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaylightTrajectory {
    samples: Vec<D8bv>,
    source: DaylightSource,
}

impl DaylightTrajectory {
    pub fn from_samples(samples: Vec<D8bv>, source: DaylightSource) -> Self {
        Self { samples, source }
    }

    /// Builds `length` samples. `seed` only matters for `FastChanges`;
    /// a `Csv` source is loaded from disk and must hold at least `length` rows.
    pub fn generate(source: &DaylightSource, length: usize, seed: u64) -> Result<Self> {
        let samples = match source {
            DaylightSource::Constant(c) => vec![*c; length],
            DaylightSource::Step { before, after, at } => (0..length)
                .map(|k| if k < *at { *before } else { *after })
                .collect(),
            DaylightSource::Ramp { from, to } => {
                let (a, b) = (f64::from(from.get()), f64::from(to.get()));
                let span = length.saturating_sub(1).max(1) as f64;
                (0..length)
                    .map(|k| D8bv::saturating((a + (b - a) * k as f64 / span).round() as i64))
                    .collect()
            }
            DaylightSource::FastChanges(p) => fast_changes(p, length, seed)?,
            DaylightSource::Csv(path) => {
                let loaded = Self::load_csv(path)?;
                if loaded.len() < length {
                    return Err(Error::param(
                        "daylight",
                        format!(
                            "{} holds {} samples, {length} needed",
                            path.display(),
                            loaded.len()
                        ),
                    ));
                }
                loaded.samples[..length].to_vec()
            }
        };
        Ok(Self {
            samples,
            source: source.clone(),
        })
    }

    pub fn samples(&self) -> &[D8bv] {
        &self.samples
    }

    pub fn source(&self) -> &DaylightSource {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,e\n");
        for (k, e) in self.samples.iter().enumerate() {
            let _ = writeln!(s, "{k},{e}");
        }
        s
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let rows = parse_pairs(text, origin, ("k", "e"))?;
        let mut samples = Vec::with_capacity(rows.len());
        for (line, k, e) in rows {
            if k != samples.len() as i64 {
                return Err(parse_err(
                    origin,
                    line,
                    format!("expected k = {} at line {line}, found {k}", samples.len()),
                ));
            }
            samples.push(in_range(e, origin, line, "e")?);
        }
        Ok(Self {
            samples,
            source: DaylightSource::Csv(origin.to_path_buf()),
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn fast_changes(p: &FastChanges, length: usize, seed: u64) -> Result<Vec<D8bv>> {
    p.validate()?;
    let lo = (p.base - p.amplitude).max(0.0);
    let hi = (p.base + p.amplitude).min(255.0);
    let (slope_lo, slope_hi) = (p.amplitude / 1000.0, p.amplitude / 200.0);
    let mut rng = SimRng::new(seed);
    let new_ramp = |rng: &mut SimRng| (rng.uniform(lo, hi), rng.uniform(slope_lo, slope_hi));

    let mut level = p.base;
    let (mut target, mut slope) = new_ramp(&mut rng);
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        out.push(D8bv::saturating(level.round() as i64));
        if rng.chance(p.step_prob) {
            level = (level + rng.uniform(-p.max_jump, p.max_jump)).clamp(lo, hi);
            (target, slope) = new_ramp(&mut rng);
        } else if (target - level).abs() <= slope {
            level = target;
            (target, slope) = new_ramp(&mut rng);
        } else {
            level += slope * (target - level).signum();
        }
    }
    Ok(out)
}

fn parse_err(origin: &Path, line: usize, reason: String) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        reason,
    }
}

fn in_range(v: i64, origin: &Path, line: usize, column: &str) -> Result<D8bv> {
    D8bv::try_from_i64(v).map_err(|_| {
        parse_err(
            origin,
            line,
            format!("{column} = {v} outside [0, 255] at line {line}"),
        )
    })
}

/// Reads a two-column integer CSV with the given header, skipping blank and
/// `#` lines. Returns `(line number, first, second)` per data row.
fn parse_pairs(text: &str, origin: &Path, header: (&str, &str)) -> Result<Vec<(usize, i64, i64)>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = l.split(',').map(str::trim).collect();
        if !seen_header {
            if cols != [header.0, header.1] {
                return Err(parse_err(
                    origin,
                    line,
                    format!("expected header `{},{}`, found `{l}`", header.0, header.1),
                ));
            }
            seen_header = true;
            continue;
        }
        if cols.len() != 2 {
            return Err(parse_err(
                origin,
                line,
                format!("expected 2 columns at line {line}"),
            ));
        }
        let parse = |s: &str| {
            s.parse::<i64>().map_err(|_| {
                parse_err(
                    origin,
                    line,
                    format!("`{s}` is not an integer at line {line}"),
                )
            })
        };
        rows.push((line, parse(cols[0])?, parse(cols[1])?));
    }
    if !seen_header {
        return Err(parse_err(origin, 1, "missing header".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(u: u8, e: u8) -> Knot {
        Knot {
            u: D8bv::new(u),
            e: D8bv::new(e),
        }
    }

    fn d(v: u8) -> D8bv {
        D8bv::new(v)
    }

    #[test]
    fn knot_hits_and_interpolation() {
        let lut = ProcessLut::new(vec![k(10, 0), k(100, 80), k(120, 100), k(127, 100)]).unwrap();
        assert_eq!(lut.eval(d(100)), d(80));
        assert_eq!(lut.eval(d(110)), d(90));
        assert_eq!(lut.eval(d(3)), d(0));
        assert_eq!(lut.eval(d(255)), d(100));
        let lut = ProcessLut::new(vec![k(0, 0), k(127, 96), k(255, 180)]).unwrap();
        assert_eq!(lut.eval(d(127)), d(96));
    }

    #[test]
    fn interpolation_rounds_half_away() {
        // 0 + 1 * 1/2 = 0.5 -> 1
        let lut = ProcessLut::new(vec![k(0, 0), k(2, 1)]).unwrap();
        assert_eq!(lut.eval(d(1)), d(1));
        // 3 * 1/4 = 0.75 -> 1, 3 * 1/12 -> 0
        let lut = ProcessLut::new(vec![k(0, 0), k(4, 3)]).unwrap();
        assert_eq!(lut.eval(d(1)), d(1));
        let lut = ProcessLut::new(vec![k(0, 0), k(12, 3)]).unwrap();
        assert_eq!(lut.eval(d(1)), d(0));
    }

    #[test]
    fn rejects_invalid_tables() {
        assert!(ProcessLut::new(vec![k(0, 0)]).is_err());
        assert!(ProcessLut::new(vec![k(5, 0), k(5, 1)]).is_err());
        assert!(ProcessLut::new(vec![k(0, 10), k(5, 1)]).is_err());
    }

    #[test]
    fn synthetic_table() {
        let lut = ProcessLut::default_synthetic();
        assert_eq!(lut.knots().len(), 32);
        assert_eq!(lut.eval(d(0)), d(0));
        assert_eq!(lut.eval(d(255)), d(180));
        let u = 255.0 * (100.0f64 / 180.0).powf(1.0 / 1.3);
        assert_eq!(u.round(), 162.0);
        assert_eq!(lut.eval(d(162)), d(100));
        assert_eq!(lut.inverse(d(100)), d(162));
        assert!(lut.is_monotone());
        assert!(ProcessLut::synthetic(100, 1.3, 32).is_err());
        assert!(ProcessLut::synthetic(180, 0.0, 32).is_err());
        assert!(ProcessLut::synthetic(180, 1.3, 7).is_err());
    }

    #[test]
    fn measurement() {
        let lut = ProcessLut::new(vec![k(0, 0), k(162, 100), k(255, 180)]).unwrap();
        assert_eq!(plant_measure(&lut, d(162), d(0)), d(100));
        let def = ProcessLut::default_synthetic();
        assert_eq!(plant_measure(&def, d(162), d(0)), d(100));
        for u in [0, 17, 128, 255] {
            assert_eq!(plant_measure(&def, d(u), d(255)), d(255));
        }
        assert_eq!(plant_measure(&def, d(0), d(40)), d(40));
    }

    #[test]
    fn csv_parsing() {
        let p = Path::new("t.csv");
        let lut = ProcessLut::parse_csv("u,e\n0,0\n255,180\n", p).unwrap();
        assert_eq!(lut.knots().len(), 2);

        let err = ProcessLut::parse_csv("u,e\n100,80\n90,70\n", p).unwrap_err();
        assert!(
            err.to_string().contains("non-increasing u at line 3"),
            "{err}"
        );

        let err = ProcessLut::parse_csv("u,e\n0,0\n# note\n300,10\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("line 4"));

        assert!(ProcessLut::parse_csv("x,y\n0,0\n1,1\n", p).is_err());
        assert!(ProcessLut::parse_csv("u,e\n0,zero\n1,1\n", p).is_err());
        assert!(ProcessLut::parse_csv("u,e\n0,0,0\n", p).is_err());

        let day = DaylightTrajectory::parse_csv("# sky\nk,e\n0,10\n1,12\n\n2,30\n", p).unwrap();
        assert_eq!(day.samples(), &[d(10), d(12), d(30)]);
        let err = DaylightTrajectory::parse_csv("k,e\n0,10\n2,12\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(DaylightTrajectory::parse_csv("k,e\n0,256\n", p).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = ProcessLut::load_csv("/nonexistent/lut.csv").unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn generators() {
        let c = DaylightTrajectory::generate(&DaylightSource::Constant(d(30)), 5, 0).unwrap();
        assert_eq!(c.samples(), &[d(30); 5]);
        let s = DaylightTrajectory::generate(
            &DaylightSource::Step {
                before: d(0),
                after: d(100),
                at: 2,
            },
            4,
            0,
        )
        .unwrap();
        assert_eq!(s.samples(), &[d(0), d(0), d(100), d(100)]);
        let r = DaylightTrajectory::generate(
            &DaylightSource::Ramp {
                from: d(0),
                to: d(9),
            },
            4,
            0,
        )
        .unwrap();
        assert_eq!(r.samples(), &[d(0), d(3), d(6), d(9)]);
        let one = DaylightTrajectory::generate(
            &DaylightSource::Ramp {
                from: d(7),
                to: d(9),
            },
            1,
            0,
        )
        .unwrap();
        assert_eq!(one.samples(), &[d(7)]);
    }

    #[test]
    fn fast_changes_is_seeded_and_bounded() {
        let src = DaylightSource::FastChanges(FastChanges::default());
        let a = DaylightTrajectory::generate(&src, 5000, 17).unwrap();
        let b = DaylightTrajectory::generate(&src, 5000, 17).unwrap();
        let c = DaylightTrajectory::generate(&src, 5000, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples(), c.samples());
        assert!(a.samples().iter().all(|s| s.get() <= 100));
        let jumps = a
            .samples()
            .windows(2)
            .filter(|w| (w[1].as_i32() - w[0].as_i32()).abs() > 5)
            .count();
        assert!(jumps > 50, "only {jumps} fast changes");

        let bad = FastChanges {
            step_prob: 1.5,
            ..FastChanges::default()
        };
        assert!(DaylightTrajectory::generate(&DaylightSource::FastChanges(bad), 10, 1).is_err());
    }
}
