use caselab::compose::{sample_loss, CaseModel, LatentVec, LossWeights, ModelConfig, Negatives, StepInputs, Variant};
use caselab::craftworld::{featurize_sparse, Action, GridState};
use caselab::datagen::random_map;
use caselab::nn::ops::{dense, dense_backward, relu, softmax_xent, sparse_dense, sparse_dense_backward, triplet_margin};
use caselab::nn::{ParamStore, SparseVec, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 24;
const EPS: f64 = 1e-6;
const TOL: f64 = 1e-4;

/// Relative error, with differences below the central-difference roundoff
/// floor (about `1e-16 / EPS`) counted as exact.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff < 1e-8 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

fn central(f: &mut dyn FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + EPS) - f(x - EPS)) / (2.0 * EPS)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_vec(shape, rand_vec(rng, shape.iter().product())).unwrap()
}

/// Scalarizes an output vector with fixed random weights.
fn probe(out: &[f64], c: &[f64]) -> f64 {
    out.iter().zip(c).map(|(a, b)| a * b).sum()
}

pub fn dense_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let x = rand_vec(&mut rng, n);
        let w = rand_tensor(&mut rng, &[n, m]);
        let b = rand_tensor(&mut rng, &[m]);
        let c = rand_vec(&mut rng, m);
        let (mut gw, mut gb) = (Tensor::zeros(&[n, m]), Tensor::zeros(&[m]));
        let dx = dense_backward(&x, &w, &c, &mut gw, &mut gb).unwrap();
        for i in 0..n {
            let mut f = |v: f64| {
                let mut x2 = x.clone();
                x2[i] = v;
                probe(&dense(&x2, &w, &b).unwrap(), &c)
            };
            assert!(rel_err(dx[i], central(&mut f, x[i])) < TOL);
        }
        for j in 0..n * m {
            let mut f = |v: f64| {
                let mut w2 = w.clone();
                w2.data_mut()[j] = v;
                probe(&dense(&x, &w2, &b).unwrap(), &c)
            };
            assert!(rel_err(gw.data()[j], central(&mut f, w.data()[j])) < TOL);
        }
        for j in 0..m {
            let mut f = |v: f64| {
                let mut b2 = b.clone();
                b2.data_mut()[j] = v;
                probe(&dense(&x, &w, &b2).unwrap(), &c)
            };
            assert!(rel_err(gb.data()[j], central(&mut f, b.data()[j])) < TOL);
        }
    }
}

pub fn sparse_dense_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (n, m) = (rng.gen_range(2..10), rng.gen_range(1..6));
        let idx: Vec<u32> = (0..n as u32).filter(|_| rng.gen_bool(0.5)).collect();
        let val = rand_vec(&mut rng, idx.len());
        let x = SparseVec::new(n, idx.clone(), val.clone()).unwrap();
        let w = rand_tensor(&mut rng, &[n, m]);
        let b = rand_tensor(&mut rng, &[m]);
        let c = rand_vec(&mut rng, m);
        let (mut gw, mut gb) = (Tensor::zeros(&[n, m]), Tensor::zeros(&[m]));
        let dx = sparse_dense_backward(&x, &w, &c, &mut gw, &mut gb, true).unwrap().unwrap();
        for e in 0..idx.len() {
            let mut f = |v: f64| {
                let mut val2 = val.clone();
                val2[e] = v;
                let x2 = SparseVec::new(n, idx.clone(), val2).unwrap();
                probe(&sparse_dense(&x2, &w, &b).unwrap(), &c)
            };
            assert!(rel_err(dx[e], central(&mut f, val[e])) < TOL);
        }
        for j in 0..n * m {
            let mut f = |v: f64| {
                let mut w2 = w.clone();
                w2.data_mut()[j] = v;
                probe(&sparse_dense(&x, &w2, &b).unwrap(), &c)
            };
            assert!(rel_err(gw.data()[j], central(&mut f, w.data()[j])) < TOL);
        }
    }
}

pub fn relu_gradients_away_from_kink() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let x: Vec<f64> = rand_vec(&mut rng, 6).into_iter().filter(|v| v.abs() > 1e-3).collect();
        let c = rand_vec(&mut rng, x.len());
        let y = relu(&x);
        let dx = caselab::nn::ops::relu_backward(&y, &c);
        for i in 0..x.len() {
            let mut f = |v: f64| {
                let mut x2 = x.clone();
                x2[i] = v;
                probe(&relu(&x2), &c)
            };
            assert!(rel_err(dx[i], central(&mut f, x[i])) < TOL);
        }
    }
}

pub fn softmax_xent_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let z: Vec<f64> = rand_vec(&mut rng, 6).iter().map(|v| v * 5.0).collect();
        let target = rng.gen_range(0..6);
        let (_, g) = softmax_xent(&z, target).unwrap();
        for i in 0..6 {
            let mut f = |v: f64| {
                let mut z2 = z.clone();
                z2[i] = v;
                softmax_xent(&z2, target).unwrap().0
            };
            assert!(rel_err(g[i], central(&mut f, z[i])) < TOL);
        }
    }
}

pub fn triplet_gradients() {
    let mut checked = 0;
    for seed in 0..INSTANCES * 4 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let d = rng.gen_range(1..6);
        let (a, p, n) = (rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d));
        let (loss, g) = triplet_margin(&a, &p, &n, 0.5).unwrap();
        if loss.abs() < 1e-3 {
            continue;
        }
        checked += 1;
        for (which, grads) in [(0, &g.anchor), (1, &g.positive), (2, &g.negative)] {
            for i in 0..d {
                let mut f = |v: f64| {
                    let mut xs = [a.clone(), p.clone(), n.clone()];
                    xs[which][i] = v;
                    triplet_margin(&xs[0], &xs[1], &xs[2], 0.5).unwrap().0
                };
                let x0 = [&a, &p, &n][which][i];
                let numeric = central(&mut f, x0);
                assert!(rel_err(grads[i], numeric) < TOL, "seed {seed} {which} {i}: {} vs {numeric}", grads[i]);
            }
        }
    }
    assert!(checked >= 20, "only {checked} active instances");
}

fn small_model(variant: Variant, seed: u64) -> CaseModel<f64> {
    let config = ModelConfig {
        variant,
        width: 4,
        height: 4,
        latent_dim: 6,
        encoder_hidden: vec![10, 8],
        policy_hidden: vec![12],
    };
    let mut model = CaseModel::new(config, seed).unwrap();
    // Zero-initialized biases can park a ReLU exactly on its kink; move off it.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        for v in model.store.param_mut(id).data_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
    }
    model
}

fn random_episode(rng: &mut ChaCha8Rng) -> Vec<SparseVec<f64>> {
    let mut counts = [0usize; 8];
    for c in counts.iter_mut() {
        *c = rng.gen_range(0..2);
    }
    let map: GridState = random_map(rng.gen(), 4, 4, &counts).unwrap();
    let actions: Vec<Action> = (0..rng.gen_range(3..8))
        .map(|_| Action::from_index(rng.gen_range(0..Action::COUNT)).unwrap())
        .collect();
    map.rollout(&actions).iter().map(featurize_sparse).collect()
}

/// Compares every stored gradient coordinate of a random subset against
/// central differences of `loss`.
fn check_params(
    model: &mut CaseModel<f64>,
    rng: &mut ChaCha8Rng,
    loss: &dyn Fn(&mut CaseModel<f64>) -> f64,
    label: &str,
) {
    model.store.zero_grads();
    let _ = loss(model);
    let grads: ParamStore<f64> = model.store.clone();
    let ids: Vec<_> = model.store.ids().collect();
    for _ in 0..40 {
        let id = ids[rng.gen_range(0..ids.len())];
        let j = rng.gen_range(0..model.store.param(id).len());
        let x0 = model.store.param(id).data()[j];
        let mut eval = |v: f64| {
            model.store.param_mut(id).data_mut()[j] = v;
            let l = loss(model);
            model.store.zero_grads();
            l
        };
        let numeric = central(&mut eval, x0);
        model.store.param_mut(id).data_mut()[j] = x0;
        let analytic = grads.grad(id).data()[j];
        let e = rel_err(analytic, numeric);
        assert!(e < TOL, "{label}: {} [{j}] analytic {analytic} numeric {numeric}", model.store.names()[id_index(&ids, id)]);
    }
}

fn id_index(ids: &[caselab::nn::ParamId], id: caselab::nn::ParamId) -> usize {
    ids.iter().position(|&x| x == id).unwrap()
}

pub fn policy_loss_through_encoder_subtraction() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let variant = Variant::ALL[seed as usize % Variant::ALL.len()];
        let mut model = small_model(variant, seed);
        let u = random_episode(&mut rng);
        let r = random_episode(&mut rng);
        let t = rng.gen_range(0..u.len());
        let i = rng.gen_range(0..r.len());
        let action = rng.gen_range(0..Action::COUNT);
        let loss = |m: &mut CaseModel<f64>| {
            let x = StepInputs {
                u0: &u[0],
                ut: &u[t],
                un: &u[u.len() - 1],
                r0: &r[0],
                ri: &r[i],
                rt: &r[r.len() - 1],
            };
            sample_loss(m, x, action, None, LossWeights::only(1.0, 0.0, 0.0, 1.0)).unwrap().total
        };
        check_params(&mut model, &mut rng, &loss, &format!("L_a {variant}"));
    }
}

fn triplet_case(seed: u64, lambda_h: f64, lambda_p: f64, attached: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = small_model(Variant::CaseCiL, seed);
    let u = random_episode(&mut rng);
    let r = random_episode(&mut rng);
    let nu = random_episode(&mut rng);
    let nr = random_episode(&mut rng);
    let t = rng.gen_range(0..u.len());
    let fixed_h = LatentVec(rand_vec(&mut rng, 6));
    let fixed_p = LatentVec(rand_vec(&mut rng, 6));
    let margin = 2.0;
    let loss = |m: &mut CaseModel<f64>| {
        let x = StepInputs {
            u0: &u[0],
            ut: &u[t],
            un: &u[u.len() - 1],
            r0: &r[0],
            ri: &r[0],
            rt: &r[r.len() - 1],
        };
        let neg = if attached {
            Negatives::States {
                u0: &nu[0],
                un: &nu[nu.len() - 1],
                r0: &nr[0],
                rt: &nr[nr.len() - 1],
            }
        } else {
            Negatives::Detached { h: &fixed_h, p: &fixed_p }
        };
        sample_loss(m, x, 0, Some(neg), LossWeights::only(0.0, lambda_h, lambda_p, margin))
            .unwrap()
            .total
    };
    check_params(&mut model, &mut rng, &loss, &format!("triplet h={lambda_h} p={lambda_p} attached={attached}"));
}

pub fn loss_h_gradients() {
    for seed in 0..INSTANCES {
        triplet_case(600 + seed, 1.0, 0.0, seed % 2 == 0);
    }
}

pub fn loss_p_gradients() {
    for seed in 0..INSTANCES {
        triplet_case(700 + seed, 0.0, 1.0, seed % 2 == 0);
    }
}

pub fn combined_loss_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        let mut model = small_model(Variant::CaseCiL, seed);
        let u = random_episode(&mut rng);
        let r = random_episode(&mut rng);
        let n = random_episode(&mut rng);
        let t = rng.gen_range(0..u.len());
        let i = rng.gen_range(0..r.len());
        let loss = |m: &mut CaseModel<f64>| {
            let x = StepInputs {
                u0: &u[0],
                ut: &u[t],
                un: &u[u.len() - 1],
                r0: &r[0],
                ri: &r[i],
                rt: &r[r.len() - 1],
            };
            let neg = Negatives::States {
                u0: &n[0],
                un: &n[n.len() - 1],
                r0: &n[0],
                rt: &n[n.len() - 1],
            };
            sample_loss(m, x, 3, Some(neg), LossWeights::only(1.0, 0.7, 1.3, 2.0)).unwrap().total
        };
        check_params(&mut model, &mut rng, &loss, "total");
    }
}
