use super::{Ctx, ParamStore};
use crate::autodiff::{check::relative_error, NodeId};
use crate::{Error, Result};

/// Finite-difference check of a scalar function of the named leaves in
/// `store`. Returns the largest relative error for each parameter, in store
/// order.
pub fn grad_check_params<F>(store: &ParamStore, f: F, eps: f64) -> Result<Vec<(String, f64)>>
where
    F: Fn(&mut Ctx) -> Result<NodeId>,
{
    if !(eps > 0.0) {
        return Err(Error::Config(format!("finite-difference eps must be > 0, got {eps}")));
    }
    let mut ctx = Ctx::new(store);
    let root = f(&mut ctx)?;
    let grads = ctx.param_grads(root)?;
    drop(ctx);

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut ctx = Ctx::new(s);
        let r = f(&mut ctx)?;
        Ok(ctx.value(r).item())
    };
    let mut probe = store.clone();
    let mut out = Vec::with_capacity(store.len());
    for (i, p) in store.params.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for j in 0..p.value.len() {
            let x = p.value.data()[j];
            probe.params[i].value.data_mut()[j] = x + eps;
            let fp = eval(&probe)?;
            probe.params[i].value.data_mut()[j] = x - eps;
            let fm = eval(&probe)?;
            probe.params[i].value.data_mut()[j] = x;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite function value probing {:?}[{j}]",
                    p.name
                )));
            }
            let numeric = (fp - fm) / (2.0 * eps);
            let analytic = grads.get(i).map_or(0.0, |g| g[j]);
            worst = worst.max(relative_error(analytic, numeric));
        }
        out.push((p.name.clone(), worst));
    }
    Ok(out)
}
