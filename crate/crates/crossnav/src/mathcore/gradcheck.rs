//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::mathcore::tensor::ParamSet;

/// Outcome of a gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Worst relative error across all coordinates.
    pub max_rel_error: f64,
    /// `(parameter name, flat index, analytic, numeric)` of the worst
    /// coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    /// Number of coordinates checked.
    pub coords: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Relative error between an analytic and a finite-difference value:
/// `|a − f| / max(|a|, |f|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare `analytic` gradients of `loss_fn` at `params` against central
/// finite differences, coordinate by coordinate.
///
/// `loss_fn` must be a pure deterministic scalar function of the
/// parameters. Returns the worst relative error seen.
pub fn grad_check<F>(
    loss_fn: F,
    params: &ParamSet,
    analytic: &ParamSet,
    epsilon: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamSet) -> Result<f64>,
{
    if epsilon <= 0.0 {
        return Err(Error::InvalidArgument("grad_check epsilon must be > 0".into()));
    }
    params.check_mirrors(analytic)?;
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coords: 0,
    };
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let len = params.get(name)?.len();
        for i in 0..len {
            let base = params.get(name)?.values()[i];
            work.get_mut(name)?.values_mut()[i] = base + epsilon;
            let plus = loss_fn(&work)?;
            work.get_mut(name)?.values_mut()[i] = base - epsilon;
            let minus = loss_fn(&work)?;
            work.get_mut(name)?.values_mut()[i] = base;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing {name}[{i}]"
                )));
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.get(name)?.values()[i];
            let err = relative_error(a, numeric);
            report.coords += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), i, a, numeric));
            }
        }
    }
    Ok(report)
}
