use alloc::string::String;

use super::{Gradients, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

impl GradCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Relative error `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the gradients returned by `f` with central differences over
/// every parameter coordinate.
pub fn grad_check<F>(store: &mut ParamStore, eps: f64, f: F) -> Result<GradCheck>
where
    F: FnMut(&ParamStore) -> Result<(f64, Gradients)>,
{
    grad_check_sampled(store, eps, usize::MAX, f)
}

/// Like [`grad_check`] but visits at most `per_param` evenly spaced
/// coordinates of each parameter.
pub fn grad_check_sampled<F>(store: &mut ParamStore, eps: f64, per_param: usize, mut f: F) -> Result<GradCheck>
where
    F: FnMut(&ParamStore) -> Result<(f64, Gradients)>,
{
    let (loss, grads) = f(store)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("grad_check loss"));
    }
    let mut report = GradCheck { max_rel_error: 0.0, worst: None, checked: 0 };
    let ids: alloc::vec::Vec<_> = store.iter().map(|(id, p)| (id, p.value.len())).collect();
    for (id, len) in ids {
        let stride = if per_param >= len { 1 } else { len.div_ceil(per_param) };
        for k in (0..len).step_by(stride.max(1)) {
            let orig = store.value(id).data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + eps;
            let plus = f(store)?.0;
            store.get_mut(id).value.data_mut()[k] = orig - eps;
            let minus = f(store)?.0;
            store.get_mut(id).value.data_mut()[k] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite("grad_check loss"));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(grads.at(id, k), numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((store.get(id).name.clone(), k));
            }
        }
    }
    Ok(report)
}
