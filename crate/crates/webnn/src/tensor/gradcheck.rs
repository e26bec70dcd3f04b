use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of a central-difference gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (parameter index, flat coordinate) of the worst coordinate.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// `|a − b| / max(|a|, |b|, 1e−12)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Compares tape gradients of `loss_fn` against `(f(p+h) − f(p−h)) / 2h`
/// for every coordinate of every parameter.
///
/// `loss_fn` receives one `Var` per entry of `params`, in order, and must
/// return a single-element loss.
pub fn finite_difference_gradcheck<F>(loss_fn: F, params: &[Tensor<f64>], h: f64) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Validation(format!("step h={h} outside [1e-7, 1e-3]")));
    }

    let analytic: Vec<Tensor<f64>> = {
        let tape = Tape::new();
        let vars: Vec<_> = params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = loss_fn(&tape, &vars)?;
        let grads = tape.backward(loss)?;
        vars.iter()
            .map(|&v| grads.get(v).cloned().expect("every param has a gradient"))
            .collect()
    };

    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<_> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        loss_fn(&tape, &vars)?.value().item()
    };

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    for (pi, grad) in analytic.iter().enumerate() {
        for ci in 0..grad.len() {
            let orig = work[pi].data()[ci];
            work[pi].data_mut()[ci] = orig + h;
            let plus = eval(&work)?;
            work[pi].data_mut()[ci] = orig - h;
            let minus = eval(&work)?;
            work[pi].data_mut()[ci] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[ci];
            let err = relative_error(a, numeric);
            report.coordinates += 1;
            if err > report.max_rel_error || report.coordinates == 1 {
                report.max_rel_error = err;
                report.worst = (pi, ci);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
