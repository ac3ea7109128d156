//! Acceptance criteria A1 to A8. Each criterion writes one PASS/FAIL line
//! straight to stderr, so the lines show up even when output capture is on.

use std::fs;
use std::io::Write;
use std::time::{Duration, Instant};

use alcs::config::SimConfig;
use alcs::control::{run_simulation, InverseModelNet, DEFAULT_GAMMA};
use alcs::metrics::{band_report, BandFlag};
use alcs::output::write_run;
use alcs::plant::{DaylightSource, FastChanges, ProcessLut};
use alcs::rng::SimRng;
use alcs::signals::{scale_to_unit, unit_to_d8bv, D8bv};
use alcs::tinynet::gradient_check;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.3}s", d.as_secs_f64())
}

fn a1_gradient_check() -> Outcome {
    let t = Instant::now();
    let check = gradient_check(7, 100).expect("gradient check runs");
    let dt = t.elapsed();
    let pass = check.max_relative_error < 1e-5 && dt < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "100 nets, max relative error {:.3e} (< 1e-5), {} (< 1s)",
            check.max_relative_error,
            secs(dt)
        ),
    )
}

fn a2_quantization_bijection() -> Outcome {
    let bad: Vec<u8> = (0..=255u8)
        .filter(|&v| unit_to_d8bv(scale_to_unit(D8bv::new(v)).get()) != D8bv::new(v))
        .collect();
    outcome(
        bad.is_empty(),
        format!("{} of 256 codes fail the round trip", bad.len()),
    )
}

fn a3_inverse_identifiability() -> Outcome {
    let t = Instant::now();
    let lut = ProcessLut::default_synthetic();
    let mut inv = InverseModelNet::new(3, DEFAULT_GAMMA, true, 2).expect("inverse net");
    let mut rng = SimRng::new(3);
    // Each sweep visits every command once, in random order.
    let mut sweep: Vec<u8> = (0..=255u8).collect();
    let mut trained = 0;
    while trained < 5000 {
        for i in (1..sweep.len()).rev() {
            let j = rng.int_inclusive(0, i as i64) as usize;
            sweep.swap(i, j);
        }
        for &u in sweep.iter().take(5000 - trained) {
            let e = lut.eval(D8bv::new(u));
            inv.train([e; 3], D8bv::new(u)).expect("train");
            trained += 1;
        }
    }
    let mut worst = 0;
    let mut parts = Vec::new();
    for e in [40u8, 80, 100, 140] {
        let e = D8bv::new(e);
        let got = inv.action([e; 3]).expect("action").as_i32();
        let want = lut.inverse(e).as_i32();
        worst = worst.max((got - want).abs());
        parts.push(format!("e={e}: {got} vs u*={want}"));
    }
    let dt = t.elapsed();
    outcome(
        worst <= 10 && dt < Duration::from_secs(5),
        format!(
            "{}; max deviation {worst} (<= 10), {}",
            parts.join(", "),
            secs(dt)
        ),
    )
}

fn constant_30() -> SimConfig {
    SimConfig {
        steps: 1000,
        daylight: DaylightSource::Constant(D8bv::new(30)),
        ..SimConfig::default()
    }
}

fn a4_constant_daylight() -> Outcome {
    let config = constant_30();
    let t = Instant::now();
    let run = run_simulation(&config).expect("simulation");
    let dt = t.elapsed();
    let r = band_report(&run.records, config.warmup);
    let pass = r.mean_abs_eps <= 5.0 && r.frac_in_wide >= 0.90 && dt < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "mean |eps| {:.2} (<= 5), frac_in_wide {:.3} (>= 0.90), eps range [{}, {}], {} (< 1s)",
            r.mean_abs_eps,
            r.frac_in_wide,
            r.eps_min,
            r.eps_max,
            secs(dt)
        ),
    )
}

/// How often the A4 scenario passes when only the network seeds change.
fn a4_seed_spread(pairs: u64) -> String {
    let passed = (1..=pairs)
        .filter(|&s| {
            let config = SimConfig {
                seed_controller: s,
                seed_inverse: s + 1000,
                ..constant_30()
            };
            let run = run_simulation(&config).expect("simulation");
            let r = band_report(&run.records, config.warmup);
            r.mean_abs_eps <= 5.0 && r.frac_in_wide >= 0.90
        })
        .count();
    format!("A4 scenario passes for {passed} of {pairs} network seed pairs (s, s+1000)")
}

fn a5_fast_daylight() -> Outcome {
    let config = SimConfig {
        steps: 2000,
        daylight: DaylightSource::FastChanges(FastChanges::default()),
        ..SimConfig::default()
    };
    let run = run_simulation(&config).expect("simulation");
    let r = band_report(&run.records, config.warmup);
    let pass =
        r.frac_in_wide >= 0.90 && r.frac_in_narrow > 0.50 && r.frac_meas_in_perception >= 0.50;
    outcome(
        pass,
        format!(
            "frac_in_wide {:.3} (>= 0.90), frac_in_narrow {:.3} (> 0.50), frac_meas_in_perception {:.3} (>= 0.50)",
            r.frac_in_wide, r.frac_in_narrow, r.frac_meas_in_perception
        ),
    )
}

fn a6_determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenarios = [
        ("constant", constant_30()),
        ("fast", SimConfig::default()),
        (
            "saturated",
            SimConfig {
                steps: 300,
                daylight: DaylightSource::Constant(D8bv::MAX),
                ..SimConfig::default()
            },
        ),
    ];
    let mut same = 0;
    for (name, config) in &scenarios {
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{name}-{rep}"));
            let run = run_simulation(config).expect("simulation");
            let (files, _) = write_run(&out, config, &run).expect("write");
            bytes.push(fs::read(files.trajectory).expect("read back"));
        }
        if bytes[0] == bytes[1] && !bytes[0].is_empty() {
            same += 1;
        }
    }
    outcome(
        same == scenarios.len(),
        format!(
            "{same} of {} scenarios give byte-identical trajectory CSVs",
            scenarios.len()
        ),
    )
}

fn a7_throughput() -> Outcome {
    let config = SimConfig {
        steps: 10_000,
        ..SimConfig::default()
    };
    let t = Instant::now();
    let run = run_simulation(&config).expect("simulation");
    let dt = t.elapsed();
    outcome(
        run.records.len() == 10_000 && dt < Duration::from_secs(1),
        format!("10000 steps in {} (< 1s)", secs(dt)),
    )
}

fn a8_saturation() -> Outcome {
    let config = SimConfig {
        steps: 1000,
        daylight: DaylightSource::Constant(D8bv::MAX),
        ..SimConfig::default()
    };
    let run = run_simulation(&config).expect("simulation");
    let all_forced = run.records.iter().all(|r| r.eps == -155);
    let finite = run
        .records
        .iter()
        .all(|r| r.loss_inverse.is_finite() && r.loss_controller.is_none_or(f64::is_finite));
    let r = band_report(&run.records, config.warmup);
    let pass = all_forced && finite && r.flag == BandFlag::NoCompliance && r.frac_in_wide == 0.0;
    outcome(
        pass,
        format!(
            "eps = -155 at every step: {all_forced}, finite losses: {finite}, flag {}, frac_in_wide {:.3}",
            r.flag.as_str(),
            r.frac_in_wide
        ),
    )
}

fn report(name: &str, o: Outcome) {
    let line = format!(
        "\n{} {name}: {}\n",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(o.pass, "{name} not met: {}", o.detail);
}

#[test]
fn a1() {
    report("A1 gradient check", a1_gradient_check());
}

#[test]
fn a2() {
    report("A2 quantization bijection", a2_quantization_bijection());
}

#[test]
fn a3() {
    report(
        "A3 inverse-model identifiability",
        a3_inverse_identifiability(),
    );
}

#[test]
fn a4() {
    report(
        "A4 regulation under constant daylight",
        a4_constant_daylight(),
    );
}

/// Not a criterion: puts the A4 outcome in context.
#[test]
fn a4_seed_sensitivity() {
    let line = format!("\nINFO {}\n", a4_seed_spread(50));
    let _ = std::io::stderr().write_all(line.as_bytes());
}

#[test]
fn a5() {
    report(
        "A5 regulation under fast-changing daylight",
        a5_fast_daylight(),
    );
}

#[test]
fn a6() {
    report("A6 determinism", a6_determinism());
}

#[test]
fn a7() {
    report("A7 throughput", a7_throughput());
}

#[test]
fn a8() {
    report("A8 saturation honesty", a8_saturation());
}
