use super::config::{layer_spec, ModelConfig, PastSource};
use super::{argmax, EncodedCaption, FeatureClip};
use crate::autodiff::{NodeId, Tensor};
use crate::layers::{
    attention_memory, attention_step, embed, init_params, linear, linear_rows, lstm_step,
    AttentionMemory, Ctx, LstmState, ParamGrads, ParamStore,
};
use crate::{Error, Result};

/// Guidance-branch parameters all live under this prefix.
pub fn is_guidance_param(name: &str) -> bool {
    name.starts_with("gd.")
}

/// Fresh parameters for `cfg` from `cfg.seed`.
pub fn init_model(cfg: &ModelConfig) -> Result<ParamStore> {
    cfg.validate()?;
    init_params(&layer_spec(cfg), cfg.seed)
}

/// Projects each frame `D → D'` and, with layer norm enabled, normalizes each
/// projected frame over its `D'` elements.
pub fn encode_features(ctx: &mut Ctx, cfg: &ModelConfig, clip: &FeatureClip) -> Result<NodeId> {
    if clip.frames() != cfg.frames || clip.dim() != cfg.feature_dim {
        return Err(Error::Data(format!(
            "clip {:?} has {}×{} features, model expects {}×{}",
            clip.id,
            clip.frames(),
            clip.dim(),
            cfg.frames,
            cfg.feature_dim
        )));
    }
    let x = ctx.constant(clip.features.clone());
    let y = linear_rows(ctx, "enc.proj", x, true)?;
    if cfg.mode.layer_norm() {
        let g = ctx.param("ln.enc.gain")?;
        let b = ctx.param("ln.enc.bias")?;
        ctx.graph.layer_norm(y, g, b, cfg.eps_ln)
    } else {
        Ok(y)
    }
}

/// Outputs of one main-decoder step.
#[derive(Clone, Copy, Debug)]
pub struct DecodeStep {
    pub logits: NodeId,
    /// Attention output, layer-normalized when layer norm is enabled.
    pub a_att: NodeId,
    pub weights: NodeId,
    pub state: LstmState,
}

/// Attend with the previous hidden state, feed `[embed(prev); A_att]` to the
/// decoder LSTM, project the new hidden state to vocabulary logits.
pub fn decode_step(
    ctx: &mut Ctx,
    cfg: &ModelConfig,
    mem: &AttentionMemory,
    prev_token: usize,
    state: LstmState,
) -> Result<DecodeStep> {
    if prev_token >= cfg.vocab_size {
        return Err(Error::Data(format!(
            "token {prev_token} out of range for vocabulary {}",
            cfg.vocab_size
        )));
    }
    let (context, weights) = attention_step(ctx, "att", mem, state.h)?;
    let a_att = if cfg.mode.layer_norm() {
        let g = ctx.param("ln.att.gain")?;
        let b = ctx.param("ln.att.bias")?;
        ctx.graph.layer_norm(context, g, b, cfg.eps_ln)?
    } else {
        context
    };
    let emb = embed(ctx, "dec.embed", prev_token)?;
    let x = ctx.graph.concat(&[emb, a_att])?;
    let state = lstm_step(ctx, "dec.lstm", x, state)?;
    let logits = linear(ctx, "dec.out", state.h, true)?;
    Ok(DecodeStep {
        logits,
        a_att,
        weights,
        state,
    })
}

/// Runs guidance encoder `prefix` over `ids` from a zero state and returns
/// the hidden state after each token.
pub fn encode_tokens(ctx: &mut Ctx, cfg: &ModelConfig, prefix: &str, ids: &[usize]) -> Result<Vec<NodeId>> {
    let mut state = LstmState::zeros(ctx, cfg.hidden);
    let mut rows = Vec::with_capacity(ids.len());
    for &id in ids {
        let x = embed(ctx, "gd.embed", id)?;
        state = lstm_step(ctx, prefix, x, state)?;
        rows.push(state.h);
    }
    Ok(rows)
}

/// `A_e = RD(W_p·A_p) + RD(W_f·A_f)` where `A_p`, `A_f` stack the given
/// hidden rows and `RD` sums over time. Empty inputs contribute zero.
pub fn fuse_hidden(ctx: &mut Ctx, cfg: &ModelConfig, past: &[NodeId], future: &[NodeId]) -> Result<NodeId> {
    let reduce = |ctx: &mut Ctx, rows: &[NodeId], w: &str| -> Result<NodeId> {
        let a = ctx.graph.stack_rows(rows, cfg.hidden)?;
        let t = linear_rows(ctx, w, a, false)?;
        ctx.graph.reduce_time(t)
    };
    let p = reduce(ctx, past, "gd.wp")?;
    let f = reduce(ctx, future, "gd.wf")?;
    ctx.graph.add(p, f)
}

/// Encodes past and future words with the two guidance encoders and fuses them.
pub fn guidance_fuse(ctx: &mut Ctx, cfg: &ModelConfig, past_ids: &[usize], future_ids: &[usize]) -> Result<NodeId> {
    let past = encode_tokens(ctx, cfg, "gd.past", past_ids)?;
    let future = encode_tokens(ctx, cfg, "gd.future", future_ids)?;
    fuse_hidden(ctx, cfg, &past, &future)
}

/// Learned projections of `A_e` (width H) and `A_att` (width D') to the
/// common width H.
pub fn project_guidance_inputs(ctx: &mut Ctx, a_e: NodeId, a_att: NodeId) -> Result<(NodeId, NodeId)> {
    let e = linear(ctx, "gd.proj_e", a_e, true)?;
    let att = linear(ctx, "gd.proj_att", a_att, true)?;
    Ok((e, att))
}

/// `A_F = LN_f(LN_e(A_e) + LN_att(A_att))` on equal-width inputs.
pub fn guidance_feature(ctx: &mut Ctx, cfg: &ModelConfig, a_e: NodeId, a_att: NodeId) -> Result<NodeId> {
    if ctx.graph.shape(a_e) != ctx.graph.shape(a_att) {
        return Err(Error::Config(format!(
            "guidance inputs differ in width: {:?} vs {:?}",
            ctx.graph.shape(a_e),
            ctx.graph.shape(a_att)
        )));
    }
    let ln = |ctx: &mut Ctx, x: NodeId, site: &str| -> Result<NodeId> {
        let g = ctx.param(&format!("{site}.gain"))?;
        let b = ctx.param(&format!("{site}.bias"))?;
        ctx.graph.layer_norm(x, g, b, cfg.eps_ln)
    };
    let ne = ln(ctx, a_e, "gd.ln_e")?;
    let na = ln(ctx, a_att, "gd.ln_att")?;
    let sum = ctx.graph.add(ne, na)?;
    ln(ctx, sum, "gd.ln_f")
}

/// Per-sample losses: `l_all = l + l_e`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Losses {
    pub l: f64,
    pub l_e: f64,
    pub l_all: f64,
}

/// Graph handles and side outputs of one teacher-forced pass.
#[derive(Debug)]
pub struct SampleTrace {
    pub l: NodeId,
    pub l_e: NodeId,
    pub l_all: NodeId,
    /// Main-decoder argmax at each step.
    pub predictions: Vec<usize>,
    /// Past words fed to the guidance encoder, one per step except the last.
    pub past_words: Vec<usize>,
    /// Attention weights at each step.
    pub attention: Vec<NodeId>,
}

fn check_caption(cfg: &ModelConfig, gt: &EncodedCaption) -> Result<()> {
    if gt.len() > cfg.max_len {
        return Err(Error::Data(format!(
            "caption of {} ids exceeds max_len {}",
            gt.len(),
            cfg.max_len
        )));
    }
    if let Some(&t) = gt.ids().iter().find(|&&t| t >= cfg.vocab_size) {
        return Err(Error::Data(format!(
            "token {t} out of range for vocabulary {}",
            cfg.vocab_size
        )));
    }
    Ok(())
}

/// Builds the teacher-forced training graph for one sample. `past_override`
/// replaces the guidance branch's past words (used to hold them fixed while
/// probing finite differences).
pub(crate) fn build_sample(
    ctx: &mut Ctx,
    cfg: &ModelConfig,
    clip: &FeatureClip,
    gt: &EncodedCaption,
    past_override: Option<&[usize]>,
) -> Result<SampleTrace> {
    check_caption(cfg, gt)?;
    let ids = gt.ids();
    let steps = gt.num_targets();
    let enc = encode_features(ctx, cfg, clip)?;
    let mem = attention_memory(ctx, "att", enc)?;
    let mut state = LstmState::zeros(ctx, cfg.hidden);
    let mut main_logits = Vec::with_capacity(steps);
    let mut predictions = Vec::with_capacity(steps);
    let mut attention = Vec::with_capacity(steps);

    let guided = cfg.mode.guidance();
    let mut guide_logits = Vec::new();
    let mut guide_state = LstmState::zeros(ctx, cfg.hidden);
    let mut past_state = LstmState::zeros(ctx, cfg.hidden);
    let mut past_rows: Vec<NodeId> = Vec::new();
    let mut past_words = Vec::new();

    for t in 1..=steps {
        // Teacher forcing: the input is always the groundtruth token t-1.
        let step = decode_step(ctx, cfg, &mem, ids[t - 1], state)?;
        state = step.state;
        let pred = argmax(ctx.value(step.logits).data());
        main_logits.push(step.logits);
        predictions.push(pred);
        attention.push(step.weights);

        if !guided {
            continue;
        }
        // Past rows cover words 1..t-1; the past encoder is causal, so the
        // states for a longer prefix extend those of a shorter one.
        let future = encode_tokens(ctx, cfg, "gd.future", &ids[t + 1..])?;
        let a_e = fuse_hidden(ctx, cfg, &past_rows, &future)?;
        let (pe, pa) = project_guidance_inputs(ctx, a_e, step.a_att)?;
        let a_f = guidance_feature(ctx, cfg, pe, pa)?;
        let emb = embed(ctx, "gd.embed", ids[t - 1])?;
        let x = ctx.graph.concat(&[emb, a_f])?;
        guide_state = lstm_step(ctx, "gd.lstm", x, guide_state)?;
        guide_logits.push(linear(ctx, "gd.out", guide_state.h, true)?);

        if t < steps {
            let word = match past_override {
                Some(p) => *p.get(t - 1).ok_or_else(|| {
                    Error::Data(format!("past override has no word for step {t}"))
                })?,
                None => match cfg.past_source {
                    PastSource::Argmax => pred,
                    PastSource::TeacherForced => ids[t],
                },
            };
            let x = embed(ctx, "gd.embed", word)?;
            past_state = lstm_step(ctx, "gd.past", x, past_state)?;
            past_rows.push(past_state.h);
            past_words.push(word);
        }
    }

    let targets = &ids[1..];
    let mask = vec![true; steps];
    let logits = ctx.graph.stack_rows(&main_logits, cfg.vocab_size)?;
    let l = ctx.graph.cross_entropy(logits, targets, &mask)?;
    let l_e = if guided {
        let gl = ctx.graph.stack_rows(&guide_logits, cfg.vocab_size)?;
        ctx.graph.cross_entropy(gl, targets, &mask)?
    } else {
        ctx.constant(Tensor::scalar(0.0))
    };
    let l_all = ctx.graph.add(l, l_e)?;
    Ok(SampleTrace {
        l,
        l_e,
        l_all,
        predictions,
        past_words,
        attention,
    })
}

fn losses_of(ctx: &Ctx, trace: &SampleTrace) -> Losses {
    Losses {
        l: ctx.value(trace.l).item(),
        l_e: ctx.value(trace.l_e).item(),
        l_all: ctx.value(trace.l_all).item(),
    }
}

/// Teacher-forced losses `(L, L_e, L_all)` for one sample.
pub fn forward_train(cfg: &ModelConfig, params: &ParamStore, clip: &FeatureClip, gt: &EncodedCaption) -> Result<Losses> {
    forward_train_with_past(cfg, params, clip, gt, None)
}

pub fn forward_train_with_past(
    cfg: &ModelConfig,
    params: &ParamStore,
    clip: &FeatureClip,
    gt: &EncodedCaption,
    past_override: Option<&[usize]>,
) -> Result<Losses> {
    let mut ctx = Ctx::new(params);
    let trace = build_sample(&mut ctx, cfg, clip, gt, past_override)?;
    Ok(losses_of(&ctx, &trace))
}

/// Losses and parameter gradients of `L_all` for one sample, plus the past
/// words the guidance branch consumed.
pub fn sample_gradients(
    cfg: &ModelConfig,
    params: &ParamStore,
    clip: &FeatureClip,
    gt: &EncodedCaption,
    past_override: Option<&[usize]>,
) -> Result<(Losses, ParamGrads, Vec<usize>)> {
    let mut ctx = Ctx::new(params);
    let trace = build_sample(&mut ctx, cfg, clip, gt, past_override)?;
    let losses = losses_of(&ctx, &trace);
    if !losses.l_all.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss for clip {:?}", clip.id)));
    }
    let grads = ctx.param_grads(trace.l_all)?;
    Ok((losses, grads, trace.past_words))
}
