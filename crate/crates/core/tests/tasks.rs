use awsgd::data::{imbalanced_logistic, Matrix};
use awsgd::math::{log_sum_exp, softmax};
use awsgd::seeding::{rng, Stream};
use awsgd::stats::Welford;
use awsgd::tasks::gridworld::{log_prob, policy_gradient, GridWorld, PolicyTrainer, DOWN, NUM_ACTIONS, RIGHT};
use awsgd::{Sampler, Schedule};
use awsgd::tasks::{Logistic, MatFac, SparseGrad, Task, Terminal};
use proptest::prelude::*;
use rand::Rng;

fn random_vec(len: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed, Stream::Custom(9));
    (0..len).map(|_| r.random_range(-scale..scale)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

fn central_diff(f: impl Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|k| {
            let mut up = w.to_vec();
            up[k] += h;
            let mut down = w.to_vec();
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn matfac_sparse_gradients_sum_to_full_gradient(
        n in 1usize..21, m in 1usize..21, k in 1usize..6, seed in 0u64..1000
    ) {
        let y = Matrix::from_vec(n, m, random_vec(n * m, 3.0, seed)).unwrap();
        let task = MatFac::new(y, k).unwrap();
        let w = random_vec(task.dim(), 1.0, seed + 1);
        let mut full = vec![0.0; task.dim()];
        let mut g = SparseGrad::new();
        for x in task.atoms() {
            task.grad(&w, &x, &mut g);
            for (&i, &v) in g.idx.iter().zip(&g.val) {
                full[i] += v;
            }
        }
        let fd = central_diff(|w| task.exact_loss(w), &w, 1e-5);
        prop_assert!(rel_err(&full, &fd) < 1e-5);
    }
}

#[test]
fn matfac_gradient_touches_only_its_row_and_column() {
    let task = MatFac::new(Matrix::from_fn(4, 3, |i, j| (i + j) as f64), 2).unwrap();
    let w = random_vec(task.dim(), 1.0, 4);
    let mut g = SparseGrad::new();
    task.grad(&w, &(2, 1), &mut g);
    let mut expected: Vec<usize> = (task.u_offset(2)..task.u_offset(2) + 2)
        .chain(task.v_offset(1)..task.v_offset(1) + 2)
        .collect();
    let mut idx = g.idx.clone();
    idx.sort_unstable();
    expected.sort_unstable();
    assert_eq!(idx, expected);
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let (x, y) = imbalanced_logistic(5, 15, 4, 2.0, 3).unwrap();
    let task = Logistic::new(x, y).unwrap();
    let mut g = SparseGrad::new();
    for seed in 0..20 {
        let w = random_vec(4, 1.5, seed);
        for i in 0..task.len() {
            task.grad(&w, &i, &mut g);
            let fd = central_diff(|w| task.loss(w, &i), &w, 1e-6);
            assert!(rel_err(&g.to_dense(4), &fd) < 1e-6);
        }
    }
}

#[test]
fn logistic_optimum_has_vanishing_gradient() {
    let (x, y) = imbalanced_logistic(20, 40, 3, 1.0, 8).unwrap();
    let task = Logistic::new(x, y).unwrap();
    let n = task.len() as f64;
    // step 1/L with L = max_i |phi_i|^2 / 4 bounds the Hessian of the mean loss
    let l = (0..task.len())
        .map(|i| awsgd::math::norm_sq(task.features().row(i)))
        .fold(0.0, f64::max)
        / 4.0;
    let mut w = vec![0.0; 3];
    let mut g = SparseGrad::new();
    let full = |w: &[f64], g: &mut SparseGrad| {
        let mut out = vec![0.0; 3];
        for i in 0..task.len() {
            task.grad(w, &i, g);
            for (&k, &v) in g.idx.iter().zip(&g.val) {
                out[k] += v / n;
            }
        }
        out
    };
    for _ in 0..200_000 {
        let grad = full(&w, &mut g);
        if awsgd::math::norm_sq(&grad).sqrt() < 1e-9 {
            break;
        }
        for (wk, gk) in w.iter_mut().zip(&grad) {
            *wk -= gk / l;
        }
    }
    assert!(awsgd::math::norm_sq(&full(&w, &mut g)).sqrt() < 1e-6);
}

fn two_world(traps: Vec<usize>, t_max: usize) -> GridWorld {
    GridWorld::with_traps(2, traps, 0.99, t_max).unwrap()
}

/// Expected number of decisions taken in each state per episode, from the
/// absorbing Markov chain of the uniform policy.
fn expected_visits(world: &GridWorld) -> Vec<f64> {
    let s_count = world.num_states();
    let mut alive = vec![0.0; s_count];
    alive[world.start()] = 1.0;
    let mut visits = vec![0.0; s_count];
    for _ in 0..world.t_max() {
        let mut next = vec![0.0; s_count];
        for (s, &p) in alive.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            visits[s] += p;
            for a in 0..NUM_ACTIONS {
                let s2 = world.next_state(s, a);
                if s2 != world.goal() && !world.traps().contains(&s2) {
                    next[s2] += p / NUM_ACTIONS as f64;
                }
            }
        }
        alive = next;
    }
    visits
}

#[test]
fn uniform_rollout_visits_match_markov_chain() {
    let world = two_world(vec![2], GridWorld::default_horizon(2));
    let exact = expected_visits(&world);
    let logits = vec![0.0; world.num_params()];
    let mut r = rng(21, Stream::Sampling);
    let mut stats = vec![Welford::new(); world.num_states()];
    let episodes = 100_000;
    for _ in 0..episodes {
        let t = world.rollout(&logits, &mut r);
        let mut counts = vec![0.0; world.num_states()];
        for &s in &t.states {
            counts[s] += 1.0;
        }
        for (w, c) in stats.iter_mut().zip(counts) {
            w.push(c);
        }
    }
    for (s, w) in stats.iter().enumerate() {
        let sigma = (w.sample_variance().unwrap() / episodes as f64).sqrt();
        assert!(
            (w.mean() - exact[s]).abs() <= 3.0 * sigma + 1e-12,
            "state {s}: {} vs {}",
            w.mean(),
            exact[s]
        );
    }
}

#[test]
fn every_rollout_terminates_within_horizon() {
    let world = GridWorld::new(7, 0.99, 40, &mut rng(2, Stream::Data)).unwrap();
    let logits = random_vec(world.num_params(), 2.0, 3);
    let mut r = rng(3, Stream::Sampling);
    for _ in 0..2000 {
        let t = world.rollout(&logits, &mut r);
        assert!(t.len() <= 40);
        assert_eq!(t.states.len(), t.rewards.len());
        if t.terminal == Terminal::Timeout {
            assert_eq!(t.len(), 40);
        }
    }
}

#[test]
fn saturated_policy_always_succeeds() {
    let world = two_world(vec![2], 8);
    let mut logits = vec![-20.0; world.num_params()];
    logits[RIGHT] = 20.0;
    logits[NUM_ACTIONS + DOWN] = 20.0;
    let p = world.success_probability(&logits, 10_000, &mut rng(1, Stream::Evaluation));
    assert!(p > 0.999);
}

/// `E_{P_w}[-R]` by enumeration.
fn expected_loss(w: &[f64], trajs: &[awsgd::tasks::Trajectory]) -> f64 {
    trajs.iter().map(|t| -t.return_value * log_prob(w, t).exp()).sum()
}

/// `sum_traj P_w(traj) * (-R) * grad log P_w(traj)`: the on-policy gradient.
fn on_policy_gradient(w: &[f64], trajs: &[awsgd::tasks::Trajectory]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for t in trajs {
        let pg = policy_gradient(w, w, t, f64::INFINITY).unwrap();
        let p = log_prob(w, t).exp();
        for (o, d) in out.iter_mut().zip(pg.d) {
            *o += p * d;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn off_policy_gradient_is_unbiased(
        seed in 0u64..10_000, t_max in 1usize..4, trap in 0usize..3
    ) {
        let traps = if trap == 0 { vec![] } else { vec![trap] };
        let world = two_world(traps, t_max);
        let w = random_vec(world.num_params(), 2.0, seed);
        let tau = random_vec(world.num_params(), 2.0, seed + 7);
        let trajs = world.enumerate(1_000_000).unwrap();
        let mut off = vec![0.0; w.len()];
        for t in &trajs {
            let q = log_prob(&tau, t).exp();
            let pg = policy_gradient(&w, &tau, t, f64::INFINITY).unwrap();
            for (o, d) in off.iter_mut().zip(pg.d) {
                *o += q * d;
            }
        }
        let on = on_policy_gradient(&w, &trajs);
        for (a, b) in off.iter().zip(&on) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn policy_gradient_matches_finite_differences() {
    let world = two_world(vec![1], 2);
    let trajs = world.enumerate(1_000_000).unwrap();
    for seed in 0..20 {
        let w = random_vec(world.num_params(), 1.5, seed);
        let exact = on_policy_gradient(&w, &trajs);
        let fd = central_diff(|w| expected_loss(w, &trajs), &w, 1e-5);
        assert!(rel_err(&exact, &fd) < 1e-4, "{}", rel_err(&exact, &fd));
    }
}

#[test]
fn zero_return_gives_zero_gradient() {
    let world = two_world(vec![], 3);
    let t = awsgd::tasks::Trajectory {
        states: vec![0, 0],
        actions: vec![0, 3],
        rewards: vec![0.0, 0.0],
        terminal: Terminal::Timeout,
        return_value: 0.0,
    };
    let w = random_vec(world.num_params(), 1.0, 1);
    let tau = random_vec(world.num_params(), 1.0, 2);
    let pg = policy_gradient(&w, &tau, &t, 1e6).unwrap();
    assert!(pg.d.iter().all(|&v| v == 0.0));
}

#[test]
fn policy_log_prob_is_a_sum_of_softmax_terms() {
    let world = two_world(vec![], 3);
    let w = random_vec(world.num_params(), 1.0, 5);
    let t = world.rollout(&w, &mut rng(5, Stream::Sampling));
    let mut expected = 0.0;
    for (&s, &a) in t.states.iter().zip(&t.actions) {
        let z = &w[s * 4..s * 4 + 4];
        expected += softmax(z)[a].ln();
        assert!((z[a] - log_sum_exp(z) - softmax(z)[a].ln()).abs() < 1e-12);
    }
    assert!((log_prob(&w, &t) - expected).abs() < 1e-12);
}

#[test]
fn on_policy_training_improves_success() {
    let world = std::sync::Arc::new(GridWorld::new(6, 0.99, 144, &mut rng(4, Stream::Data)).unwrap());
    let mut trainer = PolicyTrainer::on_policy(world, Schedule::AdaGrad { rate: 0.3, eps: 1e-8 }).unwrap();
    let before = trainer.success_probability(400, &mut rng(4, Stream::Evaluation));
    let mut r = rng(4, Stream::Sampling);
    for _ in 0..300 {
        trainer.episode(&mut r).unwrap();
    }
    let after = trainer.success_probability(400, &mut rng(4, Stream::Evaluation));
    assert!(after > before + 0.2, "success {before} -> {after}");
    assert_eq!(trainer.episodes(), 300);
    assert!(trainer.exploration().is_none());
}

#[test]
fn adaptive_training_moves_the_exploration_policy() {
    let world = std::sync::Arc::new(GridWorld::new(4, 0.99, 64, &mut rng(6, Stream::Data)).unwrap());
    let rho = Schedule::AdaGrad { rate: 0.3, eps: 1e-8 };
    let eta = Schedule::AdaGrad { rate: 0.1, eps: 1e-8 };
    let mut trainer = PolicyTrainer::adaptive(world, rho, eta).unwrap();
    let mut r = rng(6, Stream::Sampling);
    let mut densities = Vec::new();
    for _ in 0..200 {
        let rec = trainer.episode(&mut r).unwrap();
        assert!(rec.loss.is_finite());
        densities.push(rec.density);
    }
    assert_eq!(densities[0], 1.0);
    assert!(densities.iter().any(|&q| q != 1.0));
    let tau = trainer.exploration().unwrap().tau();
    assert!(tau.iter().any(|&t| t != 0.0));
    assert!(trainer.target().iter().any(|&t| t != 0.0));
}

#[test]
fn oversized_weights_skip_the_update() {
    let world = std::sync::Arc::new(GridWorld::new(5, 0.99, 100, &mut rng(2, Stream::Data)).unwrap());
    let rho = Schedule::Constant { rate: 1e-3 };
    let eta = Schedule::Constant { rate: 1e-9 };
    let mut trainer = PolicyTrainer::adaptive(world, rho, eta).unwrap().with_weight_cap(1.0 + 1e-12);
    let mut r = rng(2, Stream::Sampling);
    let mut skipped = 0;
    for _ in 0..50 {
        if trainer.episode(&mut r).unwrap().skipped {
            skipped += 1;
        }
    }
    assert_eq!(skipped, trainer.skipped_updates());
    assert!(skipped > 0);
}
