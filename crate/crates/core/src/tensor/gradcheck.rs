use super::{Tape, Tensor, TensorError, Var};

/// Compares tape gradients of a scalar function against central finite
/// differences, coordinate by coordinate. Returns the largest relative error
/// `|a - g| / max(|a|, |g|, 1e-8)`.
///
/// `f` is called once on a tape whose inputs require gradients, then twice
/// per coordinate on fresh tapes.
pub fn finite_diff_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64, TensorError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, TensorError>,
{
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&tape, &vars)?;
        tape.backward(out)?;
        vars.iter()
            .zip(params)
            .map(|(v, p)| v.grad().unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols())))
            .collect()
    };

    let eval = |ps: &[Tensor]| -> Result<f64, TensorError> {
        let tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        f(&tape, &vars)?.item()
    };

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, grad) in analytic.iter().enumerate() {
        for k in 0..params[pi].len() {
            let orig = params[pi].data()[k];
            work[pi].data_mut()[k] = orig + eps;
            let plus = eval(&work)?;
            work[pi].data_mut()[k] = orig - eps;
            let minus = eval(&work)?;
            work[pi].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
