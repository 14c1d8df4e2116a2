use rilir_core::agent::{td_targets, ActionMode, ActorCritic, AgentConfig, Batch, Recorder, ReplayBuffer, TrainConfig, Trainer};
use rilir_core::diffcore::{AdamConfig, Mlp, Tensor};
use rilir_core::envsim::{collect_expert, EnvId, PixelObservation, Trajectory};
use rilir_core::rng::{SeedTree, Stream};

use rand::Rng as _;

const OBS: usize = 6;

fn small_cfg() -> AgentConfig {
    AgentConfig {
        encoder_hidden: vec![8],
        embed_dim: 4,
        head_hidden: vec![16],
        inverse_hidden: vec![8],
        ..AgentConfig::default()
    }
}

fn agent(cfg: AgentConfig, action_dim: usize, seed: u64) -> ActorCritic {
    ActorCritic::new(OBS, action_dim, cfg, &mut SeedTree::new(seed).stream(Stream::Nets)).unwrap()
}

fn obs(values: &[f64]) -> PixelObservation {
    PixelObservation::new(1, OBS, 1, values.to_vec()).unwrap()
}

fn random_batch(n: usize, action_dim: usize, seed: u64, done: bool) -> Batch {
    let mut rng = SeedTree::new(seed).stream(Stream::Batches);
    let mut gen = |k: usize, lo: f64, hi: f64| -> Vec<f64> { (0..k).map(|_| rng.random_range(lo..hi)).collect() };
    Batch {
        obs: Tensor::matrix(n, OBS, gen(n * OBS, 0.0, 1.0)).unwrap(),
        actions: Tensor::matrix(n, action_dim, gen(n * action_dim, -1.0, 1.0)).unwrap(),
        next_obs: Tensor::matrix(n, OBS, gen(n * OBS, 0.0, 1.0)).unwrap(),
        rewards: gen(n, -1.0, 1.0),
        dones: vec![done; n],
    }
}

fn same_values(a: &Mlp, b: &Mlp) -> bool {
    a.params.entries().iter().zip(b.params.entries()).all(|(x, y)| x.value.data() == y.value.data())
}

fn trajectory(seed: u64, len: usize) -> Trajectory {
    let mut rng = SeedTree::new(seed).stream(Stream::Env);
    let observations = (0..=len).map(|_| obs(&(0..OBS).map(|_| rng.random::<f64>()).collect::<Vec<_>>())).collect();
    let actions = (0..len).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    Trajectory::new(observations, actions, vec![]).unwrap()
}

#[test]
fn td_target_plug_in() {
    let y = td_targets(&[1.0], &[false], &[2.0], &[3.0], 0.99);
    assert!((y[0] - 2.98).abs() < 1e-12);
    assert_eq!(td_targets(&[1.0], &[true], &[2.0], &[3.0], 0.99), vec![1.0]);
}

#[test]
fn td_target_never_exceeds_either_critic() {
    let mut rng = SeedTree::new(4).stream(Stream::Batches);
    for _ in 0..1000 {
        let (r, q1, q2): (f64, f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let y = td_targets(&[r], &[false], &[q1], &[q2], 0.9)[0];
        assert!(y <= r + 0.9 * q1 && y <= r + 0.9 * q2);
    }
}

#[test]
fn smoothed_target_actions_stay_in_bounds() {
    let mut cfg = small_cfg();
    cfg.exploration.sigma_target = 5.0;
    cfg.exploration.noise_clip = 3.0;
    let ac = agent(cfg, 2, 1);
    let z = Tensor::matrix(50, 4, (0..200).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    let a = ac.smoothed_target_actions(&z, &mut SeedTree::new(2).stream(Stream::TargetNoise)).unwrap();
    assert!(a.data().iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn exploration_noise_contract() {
    let o = obs(&[0.1, 0.5, 0.9, 0.3, 0.0, 1.0]);
    let mut cfg = small_cfg();
    cfg.exploration.sigma_explore = 0.0;
    let quiet = agent(cfg, 2, 3);
    let mut rng = SeedTree::new(3).stream(Stream::Explore);
    assert_eq!(quiet.select_action(&o, ActionMode::Explore, &mut rng).unwrap(), quiet.greedy(&o).unwrap());

    let mut cfg = small_cfg();
    cfg.exploration.sigma_explore = 3.0;
    let noisy = agent(cfg, 2, 3);
    let draw = |seed| {
        let mut rng = SeedTree::new(seed).stream(Stream::Explore);
        (0..20).map(|_| noisy.select_action(&o, ActionMode::Explore, &mut rng).unwrap()).collect::<Vec<_>>()
    };
    let a = draw(9);
    assert_eq!(a, draw(9));
    assert_ne!(a, draw(10));
    assert!(a.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn polyak_rate_one_copies_live_networks() {
    let mut ac = agent(small_cfg(), 1, 5);
    let batch = random_batch(16, 1, 5, false);
    let mut rng = SeedTree::new(5).stream(Stream::TargetNoise);
    for _ in 0..3 {
        let (_, z) = ac.joint_update(&batch, None, &mut rng).unwrap();
        ac.actor_update(&z).unwrap();
    }
    assert!(!same_values(&ac.actor, &ac.target_actor));
    ac.update_targets(1.0).unwrap();
    assert!(same_values(&ac.actor, &ac.target_actor));
    assert!(same_values(&ac.critic1, &ac.target_critic1));
    assert!(same_values(&ac.critic2, &ac.target_critic2));
}

#[test]
fn policy_delay_schedule() {
    for (delay, n) in [(2u64, 7u64), (2, 10), (3, 10), (1, 4)] {
        let mut cfg = small_cfg();
        cfg.policy_delay = delay;
        let mut ac = agent(cfg, 1, 6);
        let batch = random_batch(8, 1, 6, false);
        let mut rng = SeedTree::new(6).stream(Stream::TargetNoise);
        for _ in 0..n {
            let (_, z) = ac.joint_update(&batch, None, &mut rng).unwrap();
            if ac.actor_due() {
                ac.actor_update(&z).unwrap();
            }
        }
        assert_eq!(ac.critic_updates(), n);
        assert_eq!(ac.actor_updates(), n / delay);
    }
}

#[test]
fn inverse_weight_zero_is_plain_critic_update() {
    let mut cfg = small_cfg();
    cfg.inverse_weight = 0.0;
    let mut a = agent(cfg.clone(), 1, 7);
    let mut b = agent(cfg, 1, 7);
    let rl = random_batch(16, 1, 7, false);
    let inv = random_batch(16, 1, 8, false);
    let (la, _) = a.joint_update(&rl, Some(&inv), &mut SeedTree::new(1).stream(Stream::TargetNoise)).unwrap();
    let lb = b.critic_update(&rl, &mut SeedTree::new(1).stream(Stream::TargetNoise)).unwrap();
    assert_eq!(la, lb);
    assert_eq!(la.inverse, 0.0);
    assert_eq!(a.parameters(), b.parameters());
}

#[test]
fn joint_loss_decreases_on_frozen_batch() {
    let cfg = AgentConfig { adam: AdamConfig::with_lr(1e-3), ..small_cfg() };
    let mut ac = agent(cfg, 1, 8);
    // terminal transitions make the regression targets fixed
    let rl = random_batch(32, 1, 9, true);
    let inv = random_batch(32, 1, 10, true);
    let mut rng = SeedTree::new(8).stream(Stream::TargetNoise);
    let mut totals = vec![];
    for _ in 0..100 {
        let (l, _) = ac.joint_update(&rl, Some(&inv), &mut rng).unwrap();
        assert!(l.inverse >= 0.0 && l.critic >= 0.0);
        assert!(l.inverse + l.critic >= l.inverse.max(l.critic));
        totals.push(l.inverse + l.critic);
    }
    let first = totals[..10].iter().sum::<f64>();
    let last = totals[90..].iter().sum::<f64>();
    assert!(last < 0.9 * first, "{first} -> {last}");
}

#[test]
fn bandit_actor_finds_the_argmax() {
    // one state, reward −(a − 0.3)², every transition terminal so Q = r
    let cfg = AgentConfig { adam: AdamConfig::with_lr(3e-3), inverse_weight: 0.0, ..small_cfg() };
    let mut ac = agent(cfg, 1, 11);
    let state = [0.2, 0.4, 0.6, 0.8, 0.1, 0.5];
    let mut rng = SeedTree::new(11).stream(Stream::Batches);
    let mut noise = SeedTree::new(11).stream(Stream::TargetNoise);
    let n = 64;
    for _ in 0..1500 {
        let actions: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = Batch {
            obs: Tensor::matrix(n, OBS, state.repeat(n)).unwrap(),
            actions: Tensor::matrix(n, 1, actions.clone()).unwrap(),
            next_obs: Tensor::matrix(n, OBS, state.repeat(n)).unwrap(),
            rewards: actions.iter().map(|a| -(a - 0.3) * (a - 0.3)).collect(),
            dones: vec![true; n],
        };
        ac.critic_update(&batch, &mut noise).unwrap();
    }
    let z = ac.encoder.encode(&obs(&state)).unwrap();
    let q = |a: f64| ac.critic1.infer_row(&[z.clone(), vec![a]].concat()).unwrap()[0];
    let grid: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 * 0.01).collect();
    let argmax = grid.iter().copied().fold(-1.0, |best, a| if q(a) > q(best) { a } else { best });
    assert!((argmax - 0.3).abs() < 0.1, "critic argmax {argmax}");

    let zb = Tensor::matrix(1, 4, z.clone()).unwrap();
    for _ in 0..500 {
        ac.actor_update(&zb).unwrap();
    }
    let a = ac.greedy(&obs(&state)).unwrap()[0];
    assert!((a - argmax).abs() < 0.05, "actor {a} vs argmax {argmax}");
}

#[test]
fn bc_zero_epochs_leaves_actor_unchanged() {
    let mut ac = agent(small_cfg(), 1, 12);
    let before = ac.clone();
    let trajs = vec![trajectory(1, 5)];
    let losses = ac.bc_pretrain(&trajs, 0, 4, &mut SeedTree::new(1).stream(Stream::Batches)).unwrap();
    assert!(losses.is_empty());
    assert_eq!(ac, before);
}

#[test]
fn bc_loss_trends_down() {
    let data = collect_expert(EnvId::PointReach, 5, 50, 1000).unwrap();
    let mut ac = ActorCritic::new(512, 2, AgentConfig::default(), &mut SeedTree::new(0).stream(Stream::Nets)).unwrap();
    let losses = ac.bc_pretrain(data.trajectories(), 20, 64, &mut SeedTree::new(0).stream(Stream::Batches)).unwrap();
    let window = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    for w in 0..3 {
        assert!(window(&losses[(w + 1) * 5..(w + 2) * 5]) <= window(&losses[w * 5..(w + 1) * 5]));
    }
    assert!(losses[19] < 0.2 * losses[0]);
}

#[test]
fn buffer_chaining_and_expert_separation() {
    let expert = vec![trajectory(100, 4), trajectory(101, 4)];
    let mut buf = ReplayBuffer::new(12, expert.clone()).unwrap();
    for id in 0..4 {
        let t = trajectory(id, 5);
        buf.push_episode(id, t, vec![id as f64; 5]).unwrap();
    }
    // capacity 12 holds two whole five-step episodes
    let ids: Vec<u64> = buf.episodes().map(|e| e.id).collect();
    assert_eq!(ids, vec![2, 3]);
    assert_eq!(buf.len(), 10);
    assert_eq!(buf.expert_len(), 8);

    for id in [2, 3] {
        let original = trajectory(id, 5);
        let steps: Vec<_> = (0..buf.len()).map(|i| buf.transition(i)).filter(|t| t.episode_id == id).collect();
        assert_eq!(steps.len(), 5);
        for (t, step) in steps.iter().enumerate() {
            let (o, a, n) = original.transition(t);
            assert_eq!((step.obs, step.action, step.next_obs), (o, a, n));
            assert_eq!(step.done, t == 4);
            if t > 0 {
                assert_eq!(steps[t - 1].next_obs, step.obs);
            }
        }
    }

    let mut rng = SeedTree::new(0).stream(Stream::Batches);
    let agent = buf.sample(500, &mut rng).unwrap();
    assert!(agent.iter().all(|t| !t.expert && t.reward == Some(t.episode_id as f64)));
    let experts = buf.sample_expert(500, &mut rng).unwrap();
    assert!(experts.iter().all(|t| t.expert && t.reward.is_none()));
    assert!(ReplayBuffer::new(5, vec![]).unwrap().sample(1, &mut rng).is_err());
}

fn tiny_train_cfg() -> TrainConfig {
    let mut cfg = TrainConfig {
        steps: 300,
        batch_size: 16,
        expert_batch_size: 16,
        update_after: 50,
        bc_epochs: 2,
        eval_interval: 100,
        eval_episodes: 2,
        disc_hidden: vec![16],
        target_sync_interval: 100,
        ..TrainConfig::default()
    };
    cfg.agent.encoder_hidden = vec![16];
    cfg.agent.embed_dim = 8;
    cfg.agent.head_hidden = vec![16];
    cfg.agent.inverse_hidden = vec![16];
    cfg
}

#[test]
fn training_is_deterministic() {
    let data = collect_expert(EnvId::PointReach, 2, 50, 1000).unwrap();
    let run = || {
        let mut trainer = Trainer::new(tiny_train_cfg(), data.clone()).unwrap();
        trainer.pretrain().unwrap();
        let mut rec = Recorder::default();
        trainer.run(&mut rec).unwrap();
        (rec, trainer.agent().parameters())
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a.rows.len(), 3);
    assert_eq!(a.episodes.len(), 6);
    let bits = |r: &Recorder| r.rows.iter().flat_map(|row| row.values().map(f64::to_bits)).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(pa, pb);
}
