use rand::Rng;
use rilir_core::diffcore::{AdamConfig, Tensor};
use rilir_core::envsim::{collect_expert, EnvId, HORIZON};
use rilir_core::repr::{EmbeddingSequence, Encoder, TargetEncoder};
use rilir_core::reward::{
    combine, cost_matrix, discriminator_reward, episode_rewards, nearest_expert, ot_rewards, sinkhorn, CostFunction,
    CostMatrix, Discriminator, ExpertEmbeddings, R2Variant, RewardConfig, RewardSpace, SinkhornConfig, R2_MAX,
};
use rilir_core::rng::{SeedTree, Stream};

fn random_cost(t: usize, rng: &mut impl Rng) -> CostMatrix {
    CostMatrix::new(t, t, (0..t * t).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Exact OT under uniform marginals: the optimum sits on a vertex of the
/// Birkhoff polytope, i.e. a permutation plan with mass 1/T per entry.
fn exact_ot(c: &CostMatrix) -> f64 {
    let n = c.rows();
    permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| c.at(i, j)).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Plain-domain Sinkhorn with scaling vectors, iterated to machine
/// precision; an implementation independent of the log-domain solver.
fn reference_rewards(c: &CostMatrix, eps: f64) -> Vec<f64> {
    let n = c.rows();
    let k: Vec<f64> = c.data().iter().map(|x| (-x / eps).exp()).collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; n];
    let m = 1.0 / n as f64;
    for _ in 0..100_000 {
        for i in 0..n {
            u[i] = m / (0..n).map(|j| k[i * n + j] * v[j]).sum::<f64>();
        }
        for j in 0..n {
            v[j] = m / (0..n).map(|i| k[i * n + j] * u[i]).sum::<f64>();
        }
        let err = (0..n)
            .map(|i| ((0..n).map(|j| u[i] * k[i * n + j] * v[j]).sum::<f64>() - m).abs())
            .fold(0.0, f64::max);
        if err < 1e-15 {
            break;
        }
    }
    (0..n).map(|i| -(0..n).map(|j| c.at(i, j) * u[i] * k[i * n + j] * v[j]).sum::<f64>()).collect()
}

fn random_seq(t: usize, d: usize, rng: &mut impl Rng) -> EmbeddingSequence {
    EmbeddingSequence::new(d, (0..t * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn converged_plans_meet_the_marginal_tolerance() {
    let mut rng = SeedTree::new(1).stream(Stream::Batches);
    let cfg = SinkhornConfig::default();
    let mut converged = 0;
    for i in 0..1000 {
        let t = 2 + i % 9;
        let out = sinkhorn(&random_cost(t, &mut rng), &cfg).unwrap();
        assert!(out.plan.data().iter().all(|&p| p >= 0.0));
        if out.converged {
            converged += 1;
            assert!(out.marginal_error < 1e-6, "T={t}: {}", out.marginal_error);
        }
    }
    assert!(converged >= 500, "only {converged} of 1000 converged within 200 iterations");
}

#[test]
fn non_convergence_is_reported_not_raised() {
    let mut rng = SeedTree::new(2).stream(Stream::Batches);
    let cfg = SinkhornConfig { epsilon: 0.001, max_iters: 1, tolerance: 1e-12 };
    let out = sinkhorn(&random_cost(6, &mut rng), &cfg).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 1);
    assert!(out.marginal_error > 0.0);
}

#[test]
fn entropic_cost_is_bounded_below_by_exact_ot_and_shrinks_with_epsilon() {
    let mut rng = SeedTree::new(3).stream(Stream::Batches);
    for i in 0..200 {
        let t = 2 + i % 3;
        let c = random_cost(t, &mut rng);
        let exact = exact_ot(&c);
        let mut prev = f64::INFINITY;
        for eps in [0.5, 0.1, 0.02] {
            // near-degenerate instances contract slowly at small ε
            let cfg = SinkhornConfig { epsilon: eps, max_iters: 100_000, tolerance: 1e-9 };
            let out = sinkhorn(&c, &cfg).unwrap();
            assert!(out.marginal_error < 1e-5, "T={t} eps={eps} err={}", out.marginal_error);
            let cost = out.plan.transport_cost(&c);
            assert!(cost >= exact - 1e-6, "entropic {cost} below exact {exact}");
            assert!(cost <= prev + 1e-6, "not monotone in epsilon");
            prev = cost;
        }
        assert!(prev - exact < 0.05);
    }
}

#[test]
fn ot_rewards_match_a_plain_domain_sinkhorn() {
    let mut rng = SeedTree::new(4).stream(Stream::Batches);
    let a = random_seq(12, 5, &mut rng);
    let b = random_seq(12, 5, &mut rng);
    let cfg = SinkhornConfig { epsilon: 0.05, max_iters: 100_000, tolerance: 1e-14 };
    let got = ot_rewards(&a, &b, CostFunction::Cosine, &cfg).unwrap();
    let expect = reference_rewards(&cost_matrix(&a, &b, CostFunction::Cosine).unwrap(), 0.05);
    for (g, e) in got.rewards.iter().zip(&expect) {
        assert!((g - e).abs() < 1e-8, "{g} vs {e}");
    }
}

#[test]
fn reward_sum_equals_transport_cost() {
    let mut rng = SeedTree::new(5).stream(Stream::Batches);
    for cost in [CostFunction::Cosine, CostFunction::Euclidean] {
        for _ in 0..50 {
            let t = rng.random_range(1..20);
            let a = random_seq(t, 4, &mut rng);
            let b = random_seq(t, 4, &mut rng);
            let r = ot_rewards(&a, &b, cost, &SinkhornConfig::default()).unwrap();
            assert!(r.rewards.iter().all(|&x| x <= 0.0));
            assert!((r.rewards.iter().sum::<f64>() + r.transport_cost).abs() < 1e-10);
        }
    }
}

#[test]
fn nearest_expert_agrees_with_the_permutation_oracle() {
    let mut rng = SeedTree::new(6).stream(Stream::Batches);
    let cfg = SinkhornConfig { epsilon: 0.005, max_iters: 50_000, tolerance: 1e-9 };
    let mut checked = 0;
    while checked < 50 {
        let behavior = random_seq(3, 3, &mut rng);
        let experts: Vec<_> = (0..5).map(|_| random_seq(3, 3, &mut rng)).collect();
        let exact: Vec<f64> = experts
            .iter()
            .map(|e| exact_ot(&cost_matrix(&behavior, e, CostFunction::Cosine).unwrap()))
            .collect();
        let mut sorted = exact.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted[1] - sorted[0] < 0.05 {
            continue;
        }
        let best = exact.iter().position(|&x| x == sorted[0]).unwrap();
        let (i, _) = nearest_expert(&behavior, &experts, CostFunction::Cosine, &cfg).unwrap();
        assert_eq!(i, best);
        checked += 1;
    }
}

#[test]
fn discriminator_learns_a_separable_set() {
    let mut rng = SeedTree::new(7).stream(Stream::Batches);
    let n = 64;
    let mut sample = |sign: f64| {
        let f: Vec<f64> = (0..n * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut f = f;
        for row in f.chunks_exact_mut(4) {
            row[0] = sign * rng.random_range(0.2..1.0);
        }
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (Tensor::matrix(n, 4, f).unwrap(), Tensor::matrix(n, 1, a).unwrap())
    };
    let (ef, ea) = sample(1.0);
    let (af, aa) = sample(-1.0);
    let mut nets = SeedTree::new(7).stream(Stream::Discriminator);
    let mut d = Discriminator::new(4, 1, &[32], AdamConfig::with_lr(3e-3), &mut nets);
    let first = d.update(&ef, &ea, &af, &aa).unwrap();
    for _ in 0..499 {
        d.update(&ef, &ea, &af, &aa).unwrap();
    }
    let last = d.loss(&ef, &ea, &af, &aa).unwrap();
    assert!(first > 1.0);
    assert!(last < 0.1, "L_D after training {last}");
}

#[test]
fn identical_batches_cannot_beat_two_ln_two() {
    let mut rng = SeedTree::new(8).stream(Stream::Batches);
    for seed in 0..10 {
        let mut nets = SeedTree::new(seed).stream(Stream::Discriminator);
        let d = Discriminator::new(3, 2, &[16], AdamConfig::default(), &mut nets);
        let f = Tensor::matrix(16, 3, (0..48).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let a = Tensor::matrix(16, 2, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        assert!(d.loss(&f, &a, &f, &a).unwrap() >= 2.0 * std::f64::consts::LN_2 - 1e-12);
    }
}

#[test]
fn discriminator_output_is_strictly_inside_the_unit_interval_and_r2_is_clipped() {
    let mut nets = SeedTree::new(9).stream(Stream::Discriminator);
    let mut d = Discriminator::new(2, 1, &[8], AdamConfig::default(), &mut nets);
    d.mlp_mut().params.value_mut(2).data_mut().iter_mut().for_each(|w| *w *= 1e6);
    for x in [-1e3, -1.0, 0.0, 1.0, 1e3] {
        let p = d.prob(&[x, -x], &[x]).unwrap();
        assert!(p > 0.0 && p < 1.0);
        for v in [R2Variant::PaperLiteral, R2Variant::ExpertLikeness] {
            let r = discriminator_reward(&d, &[x, -x], &[x], v).unwrap();
            assert!(r.abs() <= R2_MAX);
        }
    }
}

#[test]
fn combine_is_linear_in_r2() {
    let mut rng = SeedTree::new(10).stream(Stream::Batches);
    // dyadic inputs keep every sum exact, so the identity holds bit for bit
    let grid = |rng: &mut rilir_core::rng::Rng| rng.random_range(-1024i32..1024) as f64 / 1024.0;
    for _ in 0..100 {
        let r1: Vec<f64> = (0..8).map(|_| grid(&mut rng)).collect();
        let r2: Vec<f64> = (0..8).map(|_| grid(&mut rng)).collect();
        let eta = grid(&mut rng).abs();
        let full = combine(&r1, &r2, eta).unwrap();
        let base = combine(&r1, &vec![0.0; 8], eta).unwrap();
        for i in 0..8 {
            assert_eq!(full[i] - base[i], eta * r2[i]);
        }
    }
}

#[test]
fn expert_trajectory_earns_near_zero_imitation_reward() {
    let ds = collect_expert(EnvId::PointReach, 3, HORIZON, 1).unwrap();
    let mut nets = SeedTree::new(1).stream(Stream::Nets);
    let enc = Encoder::new(512, &[64], 16, &mut nets);
    let target = TargetEncoder::new(&enc, None);
    let cfg = RewardConfig { eta: 0.0, ..Default::default() };
    for space in [RewardSpace::Embedding, RewardSpace::RawPixels] {
        let experts = ExpertEmbeddings::build(&ds, &target, space).unwrap();
        let traj = &ds.trajectories()[1];
        let r = episode_rewards(traj, &experts, &target, None, &cfg).unwrap();
        assert_eq!(r.expert_index, 1);
        // entropic slack of a uniform-marginal plan is at most ε·ln T
        let bound = cfg.sinkhorn.epsilon * (HORIZON as f64).ln();
        assert!(r.r1.iter().map(|x| x.abs()).sum::<f64>() <= bound);
        assert_eq!(r.total, r.r1);
        let again = episode_rewards(traj, &experts, &target, None, &cfg).unwrap();
        assert_eq!(r, again);
    }
}

#[test]
fn stale_expert_embeddings_are_refused() {
    let ds = collect_expert(EnvId::PointReach, 1, HORIZON, 1).unwrap();
    let mut nets = SeedTree::new(1).stream(Stream::Nets);
    let mut enc = Encoder::new(512, &[8], 4, &mut nets);
    let mut target = TargetEncoder::new(&enc, Some(1));
    let experts = ExpertEmbeddings::build(&ds, &target, RewardSpace::Embedding).unwrap();
    enc.mlp_mut().params.value_mut(0).data_mut()[0] += 1.0;
    target.sync_target(&enc, 1).unwrap();
    let cfg = RewardConfig::default();
    assert!(episode_rewards(&ds.trajectories()[0], &experts, &target, None, &cfg).is_err());
    let mut experts = experts;
    assert!(experts.refresh(&ds, &target).unwrap());
    assert!(episode_rewards(&ds.trajectories()[0], &experts, &target, None, &cfg).is_ok());
}
