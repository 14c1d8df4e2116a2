use proptest::prelude::*;
use rand::Rng as _;
use rilir_core::agent::{ActorCritic, AgentConfig};
use rilir_core::diffcore::{grad_check, Tape, Tensor, Var};
use rilir_core::rng::{Rng, SeedTree, Stream};
use rilir_core::Result;

const POINTS: usize = 100;
const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rng(seed: u64) -> Rng {
    SeedTree::new(seed).stream(Stream::Nets)
}

fn random(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Checks `f` at 100 random points of the given shape and range.
fn check<F>(name: &str, shape: &[usize], lo: f64, hi: f64, f: F)
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut r = rng(name.len() as u64 * 7919);
    let mut worst: f64 = 0.0;
    for _ in 0..POINTS {
        let p = random(&mut r, shape, lo, hi);
        let res = grad_check(&f, &p, STEP).unwrap();
        assert!(res.excluded.len() < p.len(), "{name}: every coordinate sat on a kink");
        worst = worst.max(res.max_relative_error);
    }
    assert!(worst < TOL, "{name}: max relative error {worst:e}");
}

/// Weighted sum so every output element reaches the scalar loss with a
/// distinct coefficient.
fn weighted(t: &mut Tape, y: Var) -> Result<Var> {
    let v = t.value(y);
    let w: Vec<f64> = (0..v.len()).map(|i| 0.3 + 0.17 * i as f64).collect();
    let w = t.constant(Tensor::new(v.shape().to_vec(), w).unwrap());
    let p = t.mul(y, w)?;
    t.mean(p)
}

#[test]
fn matmul_both_operands() {
    let mut r = rng(1);
    let b = random(&mut r, &[4, 3], -1.0, 1.0);
    check("matmul_lhs", &[2, 4], -1.0, 1.0, |t, x| {
        let bv = t.constant(b.clone());
        let y = t.matmul(x, bv)?;
        weighted(t, y)
    });
    let a = random(&mut r, &[2, 4], -1.0, 1.0);
    check("matmul_rhs", &[4, 3], -1.0, 1.0, |t, x| {
        let av = t.constant(a.clone());
        let y = t.matmul(av, x)?;
        weighted(t, y)
    });
}

#[test]
fn add_plain_and_broadcast() {
    let mut r = rng(2);
    let c = random(&mut r, &[3, 4], -1.0, 1.0);
    check("add", &[3, 4], -1.0, 1.0, |t, x| {
        let cv = t.constant(c.clone());
        let y = t.add(x, cv)?;
        weighted(t, y)
    });
    check("add_bias", &[4], -1.0, 1.0, |t, x| {
        let cv = t.constant(c.clone());
        let y = t.add(cv, x)?;
        weighted(t, y)
    });
}

#[test]
fn mul_sub_and_mse() {
    let mut r = rng(3);
    let c = random(&mut r, &[2, 5], -2.0, 2.0);
    check("mul", &[2, 5], -2.0, 2.0, |t, x| {
        let cv = t.constant(c.clone());
        let y = t.mul(x, cv)?;
        weighted(t, y)
    });
    check("mul_self", &[2, 5], -2.0, 2.0, |t, x| {
        let y = t.mul(x, x)?;
        weighted(t, y)
    });
    check("sub", &[2, 5], -2.0, 2.0, |t, x| {
        let cv = t.constant(c.clone());
        let y = t.sub(cv, x)?;
        weighted(t, y)
    });
    check("mse", &[2, 5], -2.0, 2.0, |t, x| {
        let cv = t.constant(c.clone());
        t.mse(x, cv)
    });
}

#[test]
fn unary_primitives() {
    check("relu", &[3, 4], -1.0, 1.0, |t, x| {
        let y = t.relu(x)?;
        weighted(t, y)
    });
    check("tanh", &[3, 4], -3.0, 3.0, |t, x| {
        let y = t.tanh(x)?;
        weighted(t, y)
    });
    check("sigmoid", &[3, 4], -6.0, 6.0, |t, x| {
        let y = t.sigmoid(x)?;
        weighted(t, y)
    });
    check("log", &[3, 4], 0.2, 3.0, |t, x| {
        let y = t.log(x)?;
        weighted(t, y)
    });
    check("square", &[3, 4], -2.0, 2.0, |t, x| {
        let y = t.square(x)?;
        weighted(t, y)
    });
    check("scale", &[3, 4], -2.0, 2.0, |t, x| {
        let y = t.scale(x, -1.7)?;
        weighted(t, y)
    });
    check("clip", &[3, 4], -2.0, 2.0, |t, x| {
        let y = t.clip(x, -0.5, 0.8)?;
        weighted(t, y)
    });
    check("mean", &[3, 4], -2.0, 2.0, |t, x| t.mean(x));
}

#[test]
fn concat_and_slice() {
    let mut r = rng(4);
    let c = random(&mut r, &[3, 2], -1.0, 1.0);
    check("concat", &[3, 4], -1.0, 1.0, |t, x| {
        let cv = t.constant(c.clone());
        let y = t.concat(&[cv, x, x])?;
        weighted(t, y)
    });
    check("slice", &[3, 6], -1.0, 1.0, |t, x| {
        let a = t.slice(x, 1, 3)?;
        let b = t.slice(x, 4, 2)?;
        let y = t.concat(&[b, a])?;
        weighted(t, y)
    });
}

fn small_agent(seed: u64) -> ActorCritic {
    let cfg = AgentConfig {
        encoder_hidden: vec![7],
        embed_dim: 4,
        head_hidden: vec![6],
        inverse_hidden: vec![5],
        ..AgentConfig::default()
    };
    ActorCritic::new(6, 2, cfg, &mut rng(seed)).unwrap()
}

fn jitter(t: &Tensor, rng: &mut Rng) -> Tensor {
    let noise = random(rng, t.shape(), -0.3, 0.3);
    Tensor::new(t.shape().to_vec(), t.data().iter().zip(noise.data()).map(|(a, b)| a + b).collect()).unwrap()
}

/// `L_inv + L_critic` of a batch, with the encoder parameter at `index`
/// replaced by the probe `x`.
fn joint_loss(agent: &ActorCritic, batch: &[Tensor; 4], index: usize, t: &mut Tape, x: Var) -> Result<Var> {
    let [obs, next_obs, actions, y] = batch;
    let mut enc = agent.encoder.mlp().bind_frozen(t);
    enc.vars[index] = x;
    let inv = agent.inverse.mlp().bind_frozen(t);
    let q = agent.critic1.bind_frozen(t);
    let o = t.constant(obs.clone());
    let o1 = t.constant(next_obs.clone());
    let a = t.constant(actions.clone());
    let yv = t.constant(y.clone());
    let z = agent.encoder.mlp().forward(t, &enc, o)?;
    let z1 = agent.encoder.mlp().forward(t, &enc, o1)?;
    let pair = t.concat(&[z, z1])?;
    let pred = agent.inverse.mlp().forward(t, &inv, pair)?;
    let l_inv = t.mse(pred, a)?;
    let za = t.concat(&[z, a])?;
    let qv = agent.critic1.forward(t, &q, za)?;
    let l_q = t.mse(qv, yv)?;
    t.add(l_inv, l_q)
}

#[test]
fn joint_representation_and_critic_loss() {
    let agent = small_agent(5);
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for i in 0..POINTS {
        let batch = [
            random(&mut r, &[3, 6], 0.0, 1.0),
            random(&mut r, &[3, 6], 0.0, 1.0),
            random(&mut r, &[3, 2], -1.0, 1.0),
            random(&mut r, &[3, 1], -2.0, 2.0),
        ];
        let index = i % agent.encoder.mlp().params.len();
        let point = jitter(agent.encoder.mlp().params.value(index), &mut r);
        let res = grad_check(|t, x| joint_loss(&agent, &batch, index, t, x), &point, STEP).unwrap();
        worst = worst.max(res.max_relative_error);
    }
    assert!(worst < TOL, "max relative error {worst:e}");
}

#[test]
fn actor_objective_through_frozen_critic() {
    let agent = small_agent(7);
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for i in 0..POINTS {
        let z = random(&mut r, &[4, 4], -1.0, 1.0);
        let index = i % agent.actor.params.len();
        let point = jitter(agent.actor.params.value(index), &mut r);
        let f = |t: &mut Tape, x: Var| {
            let mut pi = agent.actor.bind_frozen(t);
            pi.vars[index] = x;
            let q = agent.critic1.bind_frozen(t);
            let zv = t.constant(z.clone());
            let a = agent.actor.forward(t, &pi, zv)?;
            let za = t.concat(&[zv, a])?;
            let qv = agent.critic1.forward(t, &q, za)?;
            let m = t.mean(qv)?;
            t.scale(m, -1.0)
        };
        worst = worst.max(grad_check(f, &point, STEP).unwrap().max_relative_error);
    }
    assert!(worst < TOL, "max relative error {worst:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradients_are_linear_in_the_loss(xs in prop::collection::vec(-2.0f64..2.0, 6), c in -3.0f64..3.0) {
        let p = Tensor::matrix(2, 3, xs).unwrap();
        let grad = |scale: f64| {
            let mut t = Tape::new();
            let x = t.leaf(p.clone());
            let s = t.tanh(x).unwrap();
            let q = t.square(x).unwrap();
            let y = t.add(s, q).unwrap();
            let m = t.mean(y).unwrap();
            let l = t.scale(m, scale).unwrap();
            t.backward(l).unwrap().get(x).unwrap().clone()
        };
        let g1 = grad(1.0);
        let gc = grad(c);
        for (a, b) in g1.data().iter().zip(gc.data()) {
            prop_assert!((a * c - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn constants_never_receive_gradients(xs in prop::collection::vec(-1.0f64..1.0, 4)) {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(2, 2, xs.clone()).unwrap());
        let c = t.constant(Tensor::matrix(2, 2, xs).unwrap());
        let y = t.mul(x, c).unwrap();
        let m = t.mean(y).unwrap();
        let g = t.backward(m).unwrap();
        prop_assert!(g.get(c).is_none());
        prop_assert!(g.get(x).is_some());
    }
}
