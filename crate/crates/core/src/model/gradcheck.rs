//! Finite-difference verification of every differentiable piece of the
//! model, from the tensor primitives up to the joint loss of each mode.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, ModelConfig};
use super::network::{build_sample, init_model};
use super::{EncodedCaption, FeatureClip, NUM_SPECIAL};
use crate::autodiff::{grad_check, Graph, NodeId, Tensor, DEFAULT_FD_EPS};
use crate::layers::{
    attention_memory, attention_step, embed, grad_check_params, init_params, linear, lstm_step,
    Ctx, LayerSpec, LstmState, ParamStore,
};
use crate::Result;

/// Pass threshold for every component.
pub const TOLERANCE: f64 = 1e-4;

/// Central-difference step for the end-to-end loss. The loss is O(10), so
/// cancellation noise at the default step (about 1e-10 absolute) swamps
/// gradient entries near 1e-6; a larger step trades it for truncation error
/// that shrinks with the entry itself.
pub const MODEL_FD_EPS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentCheck {
    pub component: String,
    pub max_rel_err: f64,
}

impl ComponentCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let u = Uniform::new_inclusive(-2.0, 2.0);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| u.sample(rng)).collect()).expect("shape")
}

fn weighted_sum(g: &mut Graph, x: NodeId, w: NodeId) -> Result<NodeId> {
    let p = g.mul(x, w)?;
    Ok(g.sum(p))
}

/// Primitive ops on random inputs in [−2, 2].
pub fn primitive_checks(seed: u64) -> Result<Vec<ComponentCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut push = |name: &str, err: f64| {
        out.push(ComponentCheck {
            component: format!("primitive/{name}"),
            max_rel_err: err,
        })
    };

    let p = [random(&mut rng, &[3, 4]), random(&mut rng, &[4, 2]), random(&mut rng, &[3, 2]), random(&mut rng, &[4])];
    let r = grad_check(
        |g, x| {
            let c = g.matmul(x[0], x[1])?;
            let s1 = weighted_sum(g, c, x[2])?;
            let v = g.matmul(x[0], x[3])?;
            let u = g.matmul(x[3], x[1])?;
            let sv = g.tanh(v);
            let su = g.tanh(u);
            let a = g.sum(sv);
            let b = g.sum(su);
            let ab = g.add(a, b)?;
            g.add(s1, ab)
        },
        &p,
        DEFAULT_FD_EPS,
    )?;
    push("matmul", r.max_rel_err);

    let p = [random(&mut rng, &[2, 3]), random(&mut rng, &[2, 3]), random(&mut rng, &[3])];
    let r = grad_check(
        |g, x| {
            let t = g.tanh(x[0]);
            let s = g.sigmoid(x[1]);
            let m = g.mul(t, s)?;
            let a = g.add(m, x[2])?;
            let b = g.mul(a, x[2])?;
            let tt = g.tanh(b);
            Ok(g.sum(tt))
        },
        &p,
        DEFAULT_FD_EPS,
    )?;
    push("elementwise", r.max_rel_err);

    let p = [random(&mut rng, &[5]), random(&mut rng, &[5])];
    let r = grad_check(
        |g, x| {
            let s = g.softmax(x[0])?;
            weighted_sum(g, s, x[1])
        },
        &p,
        DEFAULT_FD_EPS,
    )?;
    push("softmax", r.max_rel_err);

    let p = [random(&mut rng, &[2, 5]), random(&mut rng, &[5]), random(&mut rng, &[5]), random(&mut rng, &[2, 5])];
    let r = grad_check(
        |g, x| {
            let y = g.layer_norm(x[0], x[1], x[2], 1e-5)?;
            let t = g.tanh(y);
            weighted_sum(g, t, x[3])
        },
        &p,
        DEFAULT_FD_EPS,
    )?;
    push("layer_norm", r.max_rel_err);

    let p = [random(&mut rng, &[3, 4]), random(&mut rng, &[4])];
    let r = grad_check(
        |g, x| {
            let t = g.tanh(x[0]);
            let s = g.reduce_time(t)?;
            weighted_sum(g, s, x[1])
        },
        &p,
        DEFAULT_FD_EPS,
    )?;
    push("reduce_time", r.max_rel_err);

    let p = [random(&mut rng, &[4, 6])];
    let r = grad_check(
        |g, x| g.cross_entropy(x[0], &[1, 5, 0, 3], &[true, true, false, true]),
        &p,
        DEFAULT_FD_EPS,
    )?;
    push("cross_entropy", r.max_rel_err);
    Ok(out)
}

fn worst(errs: &[(String, f64)]) -> f64 {
    errs.iter().map(|e| e.1).fold(0.0, f64::max)
}

/// Layers on randomly initialized parameters.
pub fn layer_checks(seed: u64) -> Result<Vec<ComponentCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut s = LayerSpec::new();
    s.linear("l", 4, 3, true);
    let store = init_params(&s, rng.gen())?;
    let x = random(&mut rng, &[4]);
    let errs = grad_check_params(
        &store,
        |ctx| {
            let xi = ctx.constant(x.clone());
            let y = linear(ctx, "l", xi, true)?;
            let t = ctx.graph.tanh(y);
            Ok(ctx.graph.sum(t))
        },
        DEFAULT_FD_EPS,
    )?;
    out.push(("linear", worst(&errs)));

    let mut s = LayerSpec::new();
    s.embedding("emb", 6, 4).linear("l", 4, 3, true);
    let store = init_params(&s, rng.gen())?;
    let errs = grad_check_params(
        &store,
        |ctx| {
            let a = embed(ctx, "emb", 2)?;
            let b = embed(ctx, "emb", 5)?;
            let s = ctx.graph.add(a, b)?;
            let y = linear(ctx, "l", s, true)?;
            let t = ctx.graph.tanh(y);
            Ok(ctx.graph.sum(t))
        },
        DEFAULT_FD_EPS,
    )?;
    out.push(("embed", worst(&errs)));

    let mut s = LayerSpec::new();
    s.lstm("cell", 3, 4);
    let store = init_params(&s, rng.gen())?;
    let xs: Vec<Tensor> = (0..3).map(|_| random(&mut rng, &[3])).collect();
    let w = random(&mut rng, &[4]);
    let errs = grad_check_params(
        &store,
        |ctx| {
            let mut st = LstmState::zeros(ctx, 4);
            for x in &xs {
                let xi = ctx.constant(x.clone());
                st = lstm_step(ctx, "cell", xi, st)?;
            }
            let wi = ctx.constant(w.clone());
            let a = weighted_sum(&mut ctx.graph, st.h, wi)?;
            let c = ctx.graph.sum(st.c);
            ctx.graph.add(a, c)
        },
        DEFAULT_FD_EPS,
    )?;
    out.push(("lstm_step", worst(&errs)));

    let mut s = LayerSpec::new();
    s.attention("att", 4, 3, 5);
    let store = init_params(&s, rng.gen())?;
    let feats = random(&mut rng, &[3, 4]);
    let h = random(&mut rng, &[3]);
    let (wc, ww) = (random(&mut rng, &[4]), random(&mut rng, &[3]));
    let errs = grad_check_params(
        &store,
        |ctx| {
            let f = ctx.constant(feats.clone());
            let mem = attention_memory(ctx, "att", f)?;
            let hi = ctx.constant(h.clone());
            let (c, a) = attention_step(ctx, "att", &mem, hi)?;
            let (wci, wwi) = (ctx.constant(wc.clone()), ctx.constant(ww.clone()));
            let x = weighted_sum(&mut ctx.graph, c, wci)?;
            let y = weighted_sum(&mut ctx.graph, a, wwi)?;
            ctx.graph.add(x, y)
        },
        DEFAULT_FD_EPS,
    )?;
    out.push(("attention_step", worst(&errs)));

    Ok(out
        .into_iter()
        .map(|(n, e)| ComponentCheck {
            component: format!("layer/{n}"),
            max_rel_err: e,
        })
        .collect())
}

/// Two random samples for a tiny configuration: captions of `words` words.
pub fn tiny_batch(cfg: &ModelConfig, words: usize, seed: u64) -> Result<Vec<(FeatureClip, EncodedCaption)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2)
        .map(|i| {
            let clip = FeatureClip::new(
                format!("tiny{i}"),
                random(&mut rng, &[cfg.frames, cfg.feature_dim]),
            )?;
            let ids: Vec<usize> = (0..words)
                .map(|_| rng.gen_range(NUM_SPECIAL..cfg.vocab_size))
                .collect();
            Ok((clip, EncodedCaption::from_words(&ids)?))
        })
        .collect()
}

/// Parameter group of a parameter name: the name without its final
/// `.w`/`.b`/`.gain`/`.bias` component.
pub fn param_group(name: &str) -> &str {
    for suffix in [".w", ".b", ".gain", ".bias"] {
        if let Some(g) = name.strip_suffix(suffix) {
            return g;
        }
    }
    name
}

/// Mean batch `L_all` against central differences for every parameter,
/// reported per parameter group, plus an overall `L_all` row. Guidance past
/// words are held at their values at the unperturbed point, matching the
/// detached argmax in training.
pub fn model_checks(cfg: &ModelConfig, params: &ParamStore, batch: &[(FeatureClip, EncodedCaption)]) -> Result<Vec<ComponentCheck>> {
    model_checks_eps(cfg, params, batch, MODEL_FD_EPS)
}

/// [`model_checks`] with an explicit finite-difference step.
pub fn model_checks_eps(
    cfg: &ModelConfig,
    params: &ParamStore,
    batch: &[(FeatureClip, EncodedCaption)],
    eps: f64,
) -> Result<Vec<ComponentCheck>> {
    let mut past = Vec::with_capacity(batch.len());
    {
        let mut ctx = Ctx::new(params);
        for (clip, gt) in batch {
            past.push(build_sample(&mut ctx, cfg, clip, gt, None)?.past_words);
        }
    }
    let n = batch.len() as f64;
    let errs = grad_check_params(
        params,
        |ctx| {
            let mut total = ctx.constant(Tensor::scalar(0.0));
            for ((clip, gt), p) in batch.iter().zip(&past) {
                let t = build_sample(ctx, cfg, clip, gt, Some(p))?;
                total = ctx.graph.add(total, t.l_all)?;
            }
            Ok(ctx.graph.scale(total, 1.0 / n))
        },
        eps,
    )?;
    let mut groups: Vec<ComponentCheck> = Vec::new();
    for (name, e) in &errs {
        let component = format!("{}/{}", cfg.mode, param_group(name));
        match groups.iter_mut().find(|g| g.component == component) {
            Some(g) => g.max_rel_err = g.max_rel_err.max(*e),
            None => groups.push(ComponentCheck {
                component,
                max_rel_err: *e,
            }),
        }
    }
    groups.push(ComponentCheck {
        component: format!("{}/L_all", cfg.mode),
        max_rel_err: worst(&errs),
    });
    Ok(groups)
}

/// The full suite on the tiny configuration (m=3, D=4, D'=6, E=5, H=5, V=7,
/// four-word captions) for all three modes.
pub fn run_suite(seed: u64) -> Result<Vec<ComponentCheck>> {
    let mut out = primitive_checks(seed)?;
    out.extend(layer_checks(seed.wrapping_add(1))?);
    for mode in Mode::ALL {
        let cfg = ModelConfig {
            seed,
            ..ModelConfig::tiny(mode)
        };
        let params = init_model(&cfg)?;
        let batch = tiny_batch(&cfg, 4, seed.wrapping_add(2))?;
        out.extend(model_checks(&cfg, &params, &batch)?);
    }
    Ok(out)
}
