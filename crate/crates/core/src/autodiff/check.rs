use super::{Graph, NodeId, Tensor};
use crate::{Error, Result};

pub const DEFAULT_FD_EPS: f64 = 1e-5;

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest relative error per input, in input order.
    pub per_input: Vec<f64>,
    pub max_rel_err: f64,
    /// `(input, flat coordinate)` of the largest error.
    pub worst: (usize, usize),
}

/// Relative error with denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn eval<F>(f: &F, point: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let ids: Vec<NodeId> = point.iter().map(|t| g.leaf(t.clone())).collect();
    let root = f(&mut g, &ids)?;
    let v = g.value(root);
    if v.len() != 1 {
        return Err(Error::Usage("grad_check function must return a scalar".into()));
    }
    Ok(v.item())
}

/// Checks the gradient of the scalar function `f` at `point` against
/// `(f(x + eps) − f(x − eps)) / (2·eps)`, one coordinate at a time.
pub fn grad_check<F>(f: F, point: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(eps > 0.0) {
        return Err(Error::Config(format!("finite-difference eps must be > 0, got {eps}")));
    }
    let mut g = Graph::new();
    let ids: Vec<NodeId> = point.iter().map(|t| g.leaf(t.clone())).collect();
    let root = f(&mut g, &ids)?;
    let grads = g.backward(root)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| grads.get(id)).collect();
    drop(g);

    let mut probe = point.to_vec();
    let mut per_input = vec![0.0; point.len()];
    let mut worst = (0, 0);
    let mut max_rel_err = 0.0;
    for i in 0..point.len() {
        for j in 0..point[i].len() {
            let x = point[i].data()[j];
            probe[i].data_mut()[j] = x + eps;
            let fp = eval(&f, &probe)?;
            probe[i].data_mut()[j] = x - eps;
            let fm = eval(&f, &probe)?;
            probe[i].data_mut()[j] = x;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite function value probing input {i} coordinate {j}"
                )));
            }
            let numeric = (fp - fm) / (2.0 * eps);
            let rel = relative_error(analytic[i].data()[j], numeric);
            if rel > per_input[i] {
                per_input[i] = rel;
            }
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = (i, j);
            }
        }
    }
    Ok(GradCheckReport {
        per_input,
        max_rel_err,
        worst,
    })
}
