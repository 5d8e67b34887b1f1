use awsgd::data::{low_rank, LowRankSpec};
use awsgd::sampler::{Sampler, SoftmaxProduct};
use awsgd::seeding::{rng, Stream};
use awsgd::tasks::MatFac;
use awsgd::timeaware::{speedup_benchmark, AccessClock, ComputeTime, SpeedupConfig, TimeAware};
use awsgd::{AwSgd, ModelState, Schedule};

fn block_task(seed: u64) -> (MatFac, Vec<f64>) {
    let d = low_rank(&LowRankSpec::block_benchmark(), seed).unwrap();
    let task = MatFac::new(d.y, 10).unwrap();
    let w = task.init_params(&mut rng(seed, Stream::Init));
    (task, w)
}

fn uniform_task(n: usize, seed: u64) -> (MatFac, Vec<f64>) {
    let spec = LowRankSpec {
        n,
        m: n,
        rank: 10,
        block_size: 0,
        block_scale: 1.0,
    };
    let task = MatFac::new(low_rank(&spec, seed).unwrap().y, 10).unwrap();
    let w = task.init_params(&mut rng(seed, Stream::Init));
    (task, w)
}

const RHO: Schedule = Schedule::InverseTime {
    rate: 5.0,
    offset: 5000.0,
};

/// Runs time-aware AW-SGD with `eta` next to plain AW-SGD with `eta * scale`
/// and checks both trajectories coincide bit for bit.
fn assert_rescaled_equivalence(clock: AccessClock, eta: f64, scale: f64, seed: u64) {
    let (task, w) = block_task(seed);
    let mut m1 = ModelState::new(w.clone(), RHO).unwrap();
    let mut m2 = ModelState::new(w, RHO).unwrap();
    let sampler = SoftmaxProduct::uniform(100, 100).unwrap();
    let mut timed = TimeAware::new(
        AwSgd::new(sampler.clone(), Some(Schedule::Constant { rate: eta }), 4).unwrap(),
        clock,
    )
    .unwrap();
    let mut plain = AwSgd::new(sampler, Some(Schedule::Constant { rate: eta * scale }), 4).unwrap();
    let mut r1 = rng(seed, Stream::Sampling);
    let mut r2 = rng(seed, Stream::Sampling);
    for _ in 0..300 {
        let a = timed.step(&task, &mut m1, &mut r1).unwrap();
        let b = plain.step(&task, &mut m2, &mut r2).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(timed.sampler().tau(), plain.sampler().tau());
        assert_eq!(m1.w, m2.w);
    }
}

#[test]
fn constant_clock_is_a_rescaled_eta() {
    for seed in 1..4 {
        assert_rescaled_equivalence(AccessClock::Fixed { seconds: 0.25 }, 1e-9, 4.0, seed);
    }
}

#[test]
fn unit_slow_factor_reduces_to_plain_aw_sgd() {
    let clock = AccessClock::Simulated {
        base_seconds: 0.25,
        slow_factor: 1.0,
        slow_from_row: 50,
        compute: ComputeTime::Modeled { seconds: 0.25 },
    };
    assert_rescaled_equivalence(clock, 1e-9, 2.0, 7);
}

#[test]
fn w_update_is_untouched_by_the_clock() {
    let (task, w) = block_task(3);
    let mut m1 = ModelState::new(w.clone(), RHO).unwrap();
    let mut m2 = ModelState::new(w, RHO).unwrap();
    let eta = Some(Schedule::Constant { rate: 1e-8 });
    let sampler = SoftmaxProduct::uniform(100, 100).unwrap();
    let clock = AccessClock::half_slow(100, 5000.0, ComputeTime::Measured);
    let mut timed = TimeAware::new(AwSgd::new(sampler.clone(), eta, 8).unwrap(), clock).unwrap();
    let mut plain = AwSgd::new(sampler, eta, 8).unwrap();
    timed.step(&task, &mut m1, &mut rng(3, Stream::Sampling)).unwrap();
    plain.step(&task, &mut m2, &mut rng(3, Stream::Sampling)).unwrap();
    assert_eq!(m1.w, m2.w);
    assert_ne!(timed.sampler().tau(), plain.sampler().tau());
}

#[test]
fn access_cost_is_piecewise_in_the_row() {
    let clock = AccessClock::half_slow(1000, 200.0, ComputeTime::Modeled { seconds: 0.0 });
    assert_eq!(clock.access_seconds(0), 1e-7);
    assert_eq!(clock.access_seconds(499), 1e-7);
    assert_eq!(clock.access_seconds(500), 1e-7 * 200.0);
    assert_eq!(clock.access_seconds(999), 1e-7 * 200.0);
    assert!(clock.sample_seconds(3, 0.0) > 0.0);
    assert!(AccessClock::Fixed { seconds: 0.0 }.validate().is_err());
    assert!(AccessClock::half_slow(10, -1.0, ComputeTime::Measured).validate().is_err());
}

/// Fast-row mass at ten evenly spaced checkpoints of one epoch.
fn fast_mass_path(slow_factor: f64, eta: f64, seed: u64) -> Vec<f64> {
    let n = 1000;
    let (task, w) = uniform_task(n, seed);
    let mut model = ModelState::new(
        w,
        Schedule::InverseTime {
            rate: 1e4,
            offset: 5e5,
        },
    )
    .unwrap();
    let clock = AccessClock::half_slow(n, slow_factor, ComputeTime::Modeled { seconds: 1e-7 });
    let aw = AwSgd::new(
        SoftmaxProduct::uniform(n, n).unwrap(),
        Some(Schedule::Constant { rate: eta }),
        100,
    )
    .unwrap();
    let mut aw = TimeAware::new(aw, clock).unwrap();
    let mut r = rng(seed, Stream::Sampling);
    let per_checkpoint = n * n / 100 / 10;
    let mut out = Vec::new();
    for _ in 0..10 {
        for _ in 0..per_checkpoint {
            aw.step(&task, &mut model, &mut r).unwrap();
        }
        out.push(aw.sampler().row_mass(0..n / 2));
    }
    out
}

#[test]
fn slow_half_is_abandoned_after_one_epoch() {
    let path = fast_mass_path(5000.0, 3e-8, 1);
    assert!(path[9] > 0.9, "fast mass {}", path[9]);
}

#[test]
fn fast_mass_grows_over_the_epoch() {
    for (f, seed) in [(200.0, 2), (5000.0, 3)] {
        let path = fast_mass_path(f, 3e-9, seed);
        let drops = path.windows(2).filter(|p| p[1] < p[0]).count();
        assert!(drops <= 1, "fast mass path {path:?}");
        assert!(path[0] > 0.5 && path[9] > path[0]);
    }
}

fn small_speedup_config() -> SpeedupConfig {
    SpeedupConfig {
        n: 200,
        m: 200,
        rank: 5,
        slow_factors: vec![1.0, 5000.0],
        batch_size: 20,
        sgd_rho: Schedule::InverseTime {
            rate: 1e3,
            offset: 2e4,
        },
        aw_rho: Schedule::InverseTime {
            rate: 1e3,
            offset: 2e4,
        },
        eta: Schedule::Constant { rate: 3e-8 },
        compute: ComputeTime::Modeled { seconds: 1e-7 },
        epochs: 0.5,
    }
}

#[test]
fn simulated_totals_are_deterministic() {
    let cfg = small_speedup_config();
    let a = speedup_benchmark(&cfg, 4).unwrap();
    let b = speedup_benchmark(&cfg, 4).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.sgd_simulated_s, y.sgd_simulated_s);
        assert_eq!(x.aw_simulated_s, y.aw_simulated_s);
        assert_eq!(x.fast_mass, y.fast_mass);
    }
    // 20000 uniform draws, about half of them slow.
    let sgd = a[1].sgd_simulated_s;
    let expected = 20_000.0 * 1e-7 * (1.0 + 5000.0) / 2.0;
    assert!((sgd / expected - 1.0).abs() < 0.05, "{sgd} vs {expected}");
    assert!(a[1].aw_simulated_s < a[1].sgd_simulated_s);
}
