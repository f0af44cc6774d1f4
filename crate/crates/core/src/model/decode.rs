use super::config::ModelConfig;
use super::network::{decode_step, encode_features};
use super::{FeatureClip, BOS, EOS};
use crate::layers::{attention_memory, Ctx, LstmState, ParamStore};
use crate::Result;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy inference with the encoder-decoder only. Returns the generated
/// words without sentinels; at most `max_len − 2` words are produced so the
/// framed caption fits in `max_len` ids.
pub fn greedy_decode(cfg: &ModelConfig, params: &ParamStore, clip: &FeatureClip, max_len: usize) -> Result<Vec<usize>> {
    let mut ctx = Ctx::new(params);
    let enc = encode_features(&mut ctx, cfg, clip)?;
    let mem = attention_memory(&mut ctx, "att", enc)?;
    let mut state = LstmState::zeros(&mut ctx, cfg.hidden);
    let mut prev = BOS;
    let mut words = Vec::new();
    while words.len() < max_len.saturating_sub(2) {
        let step = decode_step(&mut ctx, cfg, &mem, prev, state)?;
        state = step.state;
        let tok = argmax(ctx.value(step.logits).data());
        if tok == EOS {
            break;
        }
        words.push(tok);
        prev = tok;
    }
    debug_assert!(ctx.touched().iter().all(|n| !super::is_guidance_param(n)));
    Ok(words)
}
