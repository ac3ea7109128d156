//! Files written by a simulation run: trajectory CSV, summary, plot data and
//! SVG charts.
//!
//! Every writer is a pure function of its inputs, so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::SimConfig;
use crate::control::{SimulationRun, StepRecord};
use crate::error::{Error, Result};
use crate::metrics::{band_report, extreme_rarity, BandReport};

pub const TRAJECTORY_HEADER: &str =
    "k,E_desired,E_daylight,E_electric,E_measured,eps,deps,U,U_IM,loss_inverse,loss_controller";

/// Formats a real like C's `%.9g`: nine significant digits, trailing zeros
/// dropped, scientific notation for very small or large magnitudes.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    const P: i32 = 9;
    // The exponent after rounding to P digits decides the style.
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn trajectory_csv(records: &[StepRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for r in records {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},",
            r.k,
            r.e_desired,
            r.e_daylight,
            r.e_electric,
            r.e_measured,
            r.eps,
            r.deps,
            r.u,
            r.u_im,
            format_real(r.loss_inverse),
        );
        if let Some(l) = r.loss_controller {
            s.push_str(&format_real(l));
        }
        s.push('\n');
    }
    s
}

/// Human-readable report followed by a `[summary]` block of `key=value` lines.
pub fn summary_text(config: &SimConfig, records: &[StepRecord], report: &BandReport) -> String {
    let rarity = extreme_rarity(records, report.warmup_steps);
    let pct = |f: f64| 100.0 * f;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Closed-loop simulation: {} steps, setpoint {}",
        records.len(),
        config.e_desired
    );
    let _ = writeln!(
        s,
        "Steady state from step {} ({} steps)",
        report.warmup_steps, report.n_steady
    );
    let _ = writeln!(
        s,
        "  error range          [{}, {}]",
        report.eps_min, report.eps_max
    );
    let _ = writeln!(s, "  error in [-11, 9]    {:.1}%", pct(report.frac_in_wide));
    let _ = writeln!(
        s,
        "  error in [-5, 5]     {:.1}%",
        pct(report.frac_in_narrow)
    );
    let _ = writeln!(s, "  band edges only      {:.1}%", pct(rarity));
    let _ = writeln!(
        s,
        "  measured within ±7   {:.1}%",
        pct(report.frac_meas_in_perception)
    );
    let _ = writeln!(s, "  mean |error|         {:.3}", report.mean_abs_eps);
    let _ = writeln!(s, "  rms error            {:.3}", report.rms_eps);
    let _ = writeln!(s, "  status               {}", report.flag.as_str());
    s.push('\n');
    s.push_str("[config]\n");
    s.push_str(&config.to_text());
    s.push('\n');
    s.push_str("[summary]\n");
    s.push_str(&report.to_key_values());
    let _ = writeln!(s, "extreme_rarity={rarity:.6}");
    s
}

/// Whitespace-separated columns with a `#` header line.
fn dat(columns: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut s = format!("# {}\n", columns.join(" "));
    for row in rows {
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn illuminance_dat(records: &[StepRecord]) -> String {
    dat(
        &["k", "E_desired", "E_daylight", "E_electric", "E_measured"],
        records.iter().map(|r| {
            vec![
                r.k.to_string(),
                r.e_desired.to_string(),
                r.e_daylight.to_string(),
                r.e_electric.to_string(),
                r.e_measured.to_string(),
            ]
        }),
    )
}

pub fn error_dat(records: &[StepRecord]) -> String {
    dat(
        &["k", "eps", "deps"],
        records
            .iter()
            .map(|r| vec![r.k.to_string(), r.eps.to_string(), r.deps.to_string()]),
    )
}

pub fn command_dat(records: &[StepRecord]) -> String {
    dat(
        &["k", "U", "U_IM"],
        records
            .iter()
            .map(|r| vec![r.k.to_string(), r.u.to_string(), r.u_im.to_string()]),
    )
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// A minimal standalone line chart. All series share the x axis `0..len`.
pub fn svg_chart(title: &str, series: &[(&str, Vec<f64>)]) -> String {
    let (w, h) = (800.0, 360.0);
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 40.0);
    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(0);
    let values = series.iter().flat_map(|s| s.1.iter().copied());
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1.0 {
        hi = lo + 1.0;
    }
    let x_span = (n.max(2) - 1) as f64;
    let px = |i: usize| left + (w - left - right) * i as f64 / x_span;
    let py = |v: f64| top + (h - top - bottom) * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="18" font-size="14">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        left - 6.0,
        top + 4.0,
        format_real(hi)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        left - 6.0,
        h - bottom + 4.0,
        format_real(lo)
    );
    let _ = writeln!(s, r#"<text x="{left}" y="{}">0</text>"#, h - bottom + 16.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        w - right,
        h - bottom + 16.0,
        n.saturating_sub(1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">k</text>"#,
        (w + left - right) / 2.0,
        h - 8.0
    );

    for (idx, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let mut points = String::new();
        for (i, &v) in ys.iter().enumerate() {
            let _ = write!(points, "{:.1},{:.1} ", px(i), py(v));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            points.trim_end()
        );
        let lx = left + 10.0 + 130.0 * idx as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
            top + 12.0,
            lx + 20.0,
            top + 12.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            top + 16.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn column(records: &[StepRecord], f: impl Fn(&StepRecord) -> f64) -> Vec<f64> {
    records.iter().map(f).collect()
}

/// Paths of the files written by [`write_run`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes every output file of `run` into `dir`, creating it if needed.
pub fn write_run(
    dir: &Path,
    config: &SimConfig,
    run: &SimulationRun,
) -> Result<(OutputFiles, BandReport)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rec = &run.records;
    let report = band_report(rec, config.warmup);

    let trajectory = write(dir.join("trajectory.csv"), &trajectory_csv(rec))?;
    let summary = write(dir.join("summary.txt"), &summary_text(config, rec, &report))?;

    let illum = svg_chart(
        "Illuminance (lx_d8bv)",
        &[
            ("E_desired", column(rec, |r| r.e_desired.get() as f64)),
            ("E_measured", column(rec, |r| r.e_measured.get() as f64)),
            ("E_daylight", column(rec, |r| r.e_daylight.get() as f64)),
            ("E_electric", column(rec, |r| r.e_electric.get() as f64)),
        ],
    );
    let err = svg_chart(
        "Control error (lx_d8bv)",
        &[("eps", column(rec, |r| r.eps as f64))],
    );
    let cmd = svg_chart(
        "Command (V_d8bv)",
        &[
            ("U", column(rec, |r| r.u.get() as f64)),
            ("U_IM", column(rec, |r| r.u_im.get() as f64)),
        ],
    );
    let plots = vec![
        write(dir.join("illuminance.dat"), &illuminance_dat(rec))?,
        write(dir.join("error.dat"), &error_dat(rec))?,
        write(dir.join("command.dat"), &command_dat(rec))?,
        write(dir.join("illuminance.svg"), &illum)?,
        write(dir.join("error.svg"), &err)?,
        write(dir.join("command.svg"), &cmd)?,
    ];
    Ok((
        OutputFiles {
            trajectory,
            summary,
            plots,
        },
        report,
    ))
}
