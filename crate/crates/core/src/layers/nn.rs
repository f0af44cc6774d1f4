use super::Ctx;
use crate::autodiff::{NodeId, Tensor};
use crate::{Error, Result};

/// `W·x (+ b)` with `W = {name}.w` of shape `[N, K]`.
pub fn linear(ctx: &mut Ctx, name: &str, x: NodeId, with_bias: bool) -> Result<NodeId> {
    let w = ctx.param(&format!("{name}.w"))?;
    let y = ctx.graph.matmul(w, x)?;
    if with_bias {
        let b = ctx.param(&format!("{name}.b"))?;
        ctx.graph.add(y, b)
    } else {
        Ok(y)
    }
}

/// Row-wise [`linear`] over a `T×K` matrix, giving `T×N`.
pub fn linear_rows(ctx: &mut Ctx, name: &str, x: NodeId, with_bias: bool) -> Result<NodeId> {
    let w = ctx.param(&format!("{name}.w"))?;
    let wt = ctx.graph.transpose(w)?;
    let y = ctx.graph.matmul(x, wt)?;
    if with_bias {
        let b = ctx.param(&format!("{name}.b"))?;
        ctx.graph.add(y, b)
    } else {
        Ok(y)
    }
}

/// Row `id` of embedding table `table`.
pub fn embed(ctx: &mut Ctx, table: &str, id: usize) -> Result<NodeId> {
    let t = ctx.param(table)?;
    let rows = ctx.graph.shape(t)[0];
    if id >= rows {
        return Err(Error::Data(format!(
            "token id {id} out of range for embedding {table:?} with {rows} rows"
        )));
    }
    ctx.graph.row(t, id)
}

/// Hidden and cell vectors of an LSTM.
#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: NodeId,
    pub c: NodeId,
}

impl LstmState {
    pub fn zeros(ctx: &mut Ctx, hidden: usize) -> Self {
        let h = ctx.constant(Tensor::zeros(&[hidden]));
        let c = ctx.constant(Tensor::zeros(&[hidden]));
        LstmState { h, c }
    }
}

/// One LSTM step. Gate pre-activations are `W·[x; h] + b`, packed (i, f, g, o).
pub fn lstm_step(ctx: &mut Ctx, prefix: &str, x: NodeId, s: LstmState) -> Result<LstmState> {
    let w = ctx.param(&format!("{prefix}.w"))?;
    let b = ctx.param(&format!("{prefix}.b"))?;
    let hidden = ctx.graph.shape(s.h)[0];
    let ws = ctx.graph.shape(w).to_vec();
    let in_len = ctx.graph.shape(x).iter().product::<usize>();
    if ws != [4 * hidden, in_len + hidden] || ctx.graph.shape(s.c) != [hidden] {
        return Err(Error::dim(format!(
            "lstm {prefix:?}: weights {ws:?} do not fit input {in_len} and hidden {hidden}"
        )));
    }
    let g = &mut ctx.graph;
    let xh = g.concat(&[x, s.h])?;
    let z = g.matmul(w, xh)?;
    let z = g.add(z, b)?;
    let zi = g.slice(z, 0, hidden)?;
    let zf = g.slice(z, hidden, hidden)?;
    let zg = g.slice(z, 2 * hidden, hidden)?;
    let zo = g.slice(z, 3 * hidden, hidden)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, s.c)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok(LstmState { h, c })
}

/// Frame features and their key projections, computed once per sequence.
#[derive(Clone, Copy, Debug)]
pub struct AttentionMemory {
    pub features: NodeId,
    pub keys: NodeId,
}

pub fn attention_memory(ctx: &mut Ctx, prefix: &str, features: NodeId) -> Result<AttentionMemory> {
    let s = ctx.graph.shape(features);
    if s.len() != 2 || s[0] == 0 {
        return Err(Error::Data(format!(
            "attention needs at least one feature row, got shape {s:?}"
        )));
    }
    let keys = linear_rows(ctx, &format!("{prefix}.key"), features, false)?;
    Ok(AttentionMemory { features, keys })
}

/// Additive attention: `e_j = wᵀ·tanh(W_a·v_j + U_a·h_prev)`,
/// `α = softmax(e)`, context `Σ_j α_j·v_j`. Returns `(context, α)`.
pub fn attention_step(
    ctx: &mut Ctx,
    prefix: &str,
    mem: &AttentionMemory,
    h_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let q = linear(ctx, &format!("{prefix}.query"), h_prev, false)?;
    let w = ctx.param(&format!("{prefix}.score.w"))?;
    let g = &mut ctx.graph;
    let pre = g.add(mem.keys, q)?;
    let act = g.tanh(pre);
    let scores = g.matmul(act, w)?;
    let weights = g.softmax(scores)?;
    let context = g.matmul(weights, mem.features)?;
    Ok((context, weights))
}
