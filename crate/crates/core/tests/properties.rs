use std::path::Path;

use proptest::prelude::*;

use alcs::config::SimConfig;
use alcs::control::{
    run_simulation, ClosedLoop, ControllerNet, InverseModelNet, LoopOptions, StepRecord,
};
use alcs::metrics::band_report;
use alcs::plant::{
    plant_measure, DaylightSource, DaylightTrajectory, FastChanges, Knot, ProcessLut,
};
use alcs::signals::{unit_to_d8bv, D8bv};
use alcs::tinynet::{Activation, Mlp};

const ACTS: [Activation; 2] = [Activation::Tanh, Activation::Linear];

/// Random valid table: strictly increasing u, non-decreasing e.
fn monotone_lut() -> impl Strategy<Value = ProcessLut> {
    (
        prop::collection::btree_set(0u8..=255, 2..40),
        prop::collection::vec(0u8..=255, 40),
    )
        .prop_map(|(us, mut es)| {
            es.truncate(us.len());
            es.sort_unstable();
            let knots = us
                .into_iter()
                .zip(es)
                .map(|(u, e)| Knot {
                    u: D8bv::new(u),
                    e: D8bv::new(e),
                })
                .collect();
            ProcessLut::new(knots).expect("monotone by construction")
        })
}

fn code() -> impl Strategy<Value = D8bv> {
    any::<u8>().prop_map(D8bv::new)
}

fn params(n: usize, bound: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-bound..bound, n)
}

proptest! {
    #[test]
    fn lut_is_monotone(lut in monotone_lut()) {
        prop_assert!(lut.is_monotone());
        for u in 0..255u8 {
            prop_assert!(lut.eval(D8bv::new(u)) <= lut.eval(D8bv::new(u + 1)));
        }
    }

    #[test]
    fn measurement_is_monotone_in_each_argument(lut in monotone_lut(), u in code(), day in code()) {
        let m = plant_measure(&lut, u, day);
        if u < D8bv::MAX {
            prop_assert!(m <= plant_measure(&lut, D8bv::new(u.get() + 1), day));
        }
        if day < D8bv::MAX {
            prop_assert!(m <= plant_measure(&lut, u, D8bv::new(day.get() + 1)));
        }
    }

    #[test]
    fn quantizer_saturates_and_is_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(unit_to_d8bv(lo) <= unit_to_d8bv(hi));
        if lo <= -1.0 {
            prop_assert_eq!(unit_to_d8bv(lo), D8bv::MIN);
        }
        if hi >= 1.0 {
            prop_assert_eq!(unit_to_d8bv(hi), D8bv::MAX);
        }
    }

    #[test]
    fn lut_csv_round_trip(lut in monotone_lut()) {
        let back = ProcessLut::parse_csv(&lut.to_csv(), Path::new("mem")).unwrap();
        prop_assert_eq!(back.knots(), lut.knots());
        prop_assert_eq!(back.to_csv(), lut.to_csv());
    }

    #[test]
    fn daylight_csv_round_trip(samples in prop::collection::vec(code(), 1..200)) {
        let t = DaylightTrajectory::from_samples(samples, DaylightSource::Constant(D8bv::MIN));
        let back = DaylightTrajectory::parse_csv(&t.to_csv(), Path::new("mem")).unwrap();
        prop_assert_eq!(back.samples(), t.samples());
    }

    #[test]
    fn fast_changes_stay_in_band(seed in any::<u64>(), base in 0.0f64..255.0, amp in 0.0f64..255.0) {
        let p = FastChanges { base, amplitude: amp, step_prob: 0.2, max_jump: 80.0 };
        let t = DaylightTrajectory::generate(&DaylightSource::FastChanges(p), 2000, seed).unwrap();
        let lo = (base - amp).max(0.0).round() as u8;
        let hi = (base + amp).min(255.0).round() as u8;
        prop_assert!(t.samples().iter().all(|s| lo <= s.get() && s.get() <= hi));
    }

    #[test]
    fn band_report_ignores_order(
        eps in prop::collection::vec(-60i32..60, 1..300),
        warmup in 0usize..50,
        seed in any::<u64>(),
    ) {
        let records = records_with_eps(&eps);
        // Shuffle the steady values among the steady steps.
        let mut steady: Vec<i32> = eps.iter().skip(warmup).copied().collect();
        let mut rng = alcs::rng::SimRng::new(seed);
        for i in (1..steady.len()).rev() {
            steady.swap(i, rng.int_inclusive(0, i as i64) as usize);
        }
        let mut shuffled_eps: Vec<i32> = eps.iter().take(warmup).copied().collect();
        shuffled_eps.extend(steady);
        let shuffled = records_with_eps(&shuffled_eps);
        prop_assert_eq!(band_report(&records, warmup), band_report(&shuffled, warmup));
    }

    #[test]
    fn small_step_does_not_increase_loss(
        p in params(13, 1.0),
        x in params(2, 1.0),
        t in -1.0f64..1.0,
    ) {
        let mut net = Mlp::zeros(&[2, 3, 1], &ACTS, 1e-3).unwrap();
        net.set_params(&p).unwrap();
        let before = net.train_step(&x, &[t]).unwrap();
        let after = net.loss(&x, &[t]).unwrap();
        prop_assert!(after <= before + 1e-15, "{} -> {}", before, after);
    }

    #[test]
    fn hidden_activations_stay_inside_tanh_range(p in params(16, 3.0), x in params(3, 1.0)) {
        let mut net = Mlp::zeros(&[3, 3, 1], &ACTS, 0.15).unwrap();
        net.set_params(&p).unwrap();
        let trace = net.forward(&x).unwrap();
        for h in trace.hidden().iter().flatten() {
            prop_assert!(h.abs() < 1.0);
        }
    }

    /// Past |x| of about 19, tanh rounds to exactly ±1 in double precision.
    #[test]
    fn saturated_activations_reach_at_most_one(p in params(16, 50.0), x in params(3, 1.0)) {
        let mut net = Mlp::zeros(&[3, 3, 1], &ACTS, 0.15).unwrap();
        net.set_params(&p).unwrap();
        let trace = net.forward(&x).unwrap();
        for h in trace.hidden().iter().flatten() {
            prop_assert!(h.abs() <= 1.0);
        }
    }

    #[test]
    fn commands_bounded_and_wiring_exact(
        pc in params(13, 20.0),
        pi in params(16, 20.0),
        daylight in prop::collection::vec(code(), 1..120),
        desired in code(),
    ) {
        let mut c = Mlp::zeros(&[2, 3, 1], &ACTS, 0.15).unwrap();
        c.set_params(&pc).unwrap();
        let mut i = Mlp::zeros(&[3, 3, 1], &ACTS, 0.15).unwrap();
        i.set_params(&pi).unwrap();
        let mut cl = ClosedLoop::new(
            ControllerNet::from_net(c).unwrap(),
            InverseModelNet::from_net(i).unwrap(),
            ProcessLut::default_synthetic(),
            LoopOptions::default(),
        );
        let mut prev_eps = 0;
        for (k, &day) in daylight.iter().enumerate() {
            let r = cl.step(desired, day).unwrap();
            prop_assert_eq!(r.k, k);
            prop_assert_eq!(r.eps, desired.as_i32() - r.e_measured.as_i32());
            prop_assert_eq!(r.deps, r.eps - prev_eps);
            prop_assert!(r.loss_inverse.is_finite());
            prop_assert_eq!(r.loss_controller.is_none(), k == 0);
            prev_eps = r.eps;
        }
    }
}

fn records_with_eps(eps: &[i32]) -> Vec<StepRecord> {
    eps.iter()
        .enumerate()
        .map(|(k, &e)| StepRecord {
            k,
            e_desired: D8bv::new(100),
            e_daylight: D8bv::new(0),
            e_electric: D8bv::new(0),
            e_measured: D8bv::new((100 - e) as u8),
            eps: e,
            deps: 0,
            u: D8bv::new(0),
            u_im: D8bv::new(0),
            loss_inverse: 0.0,
            loss_controller: None,
        })
        .collect()
}

/// Constant daylight and a command held for 50 steps give a constant error
/// one step later, since the plant is static.
#[test]
fn held_command_gives_constant_error() {
    let mut windows = 0;
    for seed in 1..=10 {
        let config = SimConfig {
            steps: 600,
            seed_controller: seed,
            seed_inverse: seed + 1000,
            daylight: DaylightSource::Constant(D8bv::new(30)),
            ..SimConfig::default()
        };
        let rec = run_simulation(&config).unwrap().records;
        for a in 0..rec.len() - 50 {
            let held = rec[a..a + 50].iter().all(|r| r.u == rec[a].u);
            if held {
                windows += 1;
                let eps = rec[a + 1].eps;
                assert!(
                    rec[a + 1..a + 50].iter().all(|r| r.eps == eps),
                    "seed {seed} window {a}"
                );
            }
        }
    }
    assert!(windows > 0, "no held-command window to check");
}

/// With the setpoint at 100 the perception band and |eps| <= 7 coincide.
#[test]
fn perception_band_matches_error_band() {
    let config = SimConfig {
        steps: 1500,
        ..SimConfig::default()
    };
    let rec = run_simulation(&config).unwrap().records;
    let r = band_report(&rec, config.warmup);
    let steady = &rec[config.warmup..];
    let by_eps = steady.iter().filter(|r| r.eps.abs() <= 7).count() as f64 / steady.len() as f64;
    assert_eq!(r.frac_meas_in_perception, by_eps);
}
