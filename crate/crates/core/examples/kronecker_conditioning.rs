//! Conditions a matrix normal window on its observed past columns and checks
//! the result against dense Gaussian conditioning of `vec(X)`.

use mnmr::gaussian;
use mnmr::linalg::{kron, vec, BlockSplit, Matrix};
use mnmr::matnorm::MatrixNormalParams;

fn main() -> mnmr::Result<()> {
    let u = Matrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.5]);
    let v = Matrix::from_fn(4, 4, |i, j| 0.7f64.powi((i as i32 - j as i32).abs()));
    let mean = Matrix::from_row_slice(2, 4, &[0.0, 0.1, 0.2, 0.3, 1.0, 1.0, 1.0, 1.0]);
    let mn = MatrixNormalParams::new(mean, u, v)?;

    let x = Matrix::from_row_slice(2, 4, &[0.3, -0.2, 0.5, 0.1, 1.2, 0.8, 1.1, 0.9]);
    let dense_cov = kron(&mn.col_cov, &mn.row_cov);
    println!("log-density, factored: {:.12}", mn.logpdf(&x)?);
    println!("log-density, dense:    {:.12}", gaussian::logpdf(&vec(&x), &vec(&mn.mean), &dense_cov)?);

    let observed = x.columns(0, 3).into_owned();
    let cond = mn.condition_cols(BlockSplit::new(3, 1)?, &observed)?;
    let obs: Vec<usize> = (0..6).collect();
    let dense = gaussian::condition(&vec(&mn.mean), &dense_cov, &obs, &vec(&observed), &[6, 7])?;
    println!("conditional mean, factored: {:?}", vec(&cond.mean).as_slice());
    println!("conditional mean, dense:    {:?}", dense.mean.as_slice());
    println!("max covariance difference:  {:.2e}", (kron(&cond.col_cov, &cond.row_cov) - &dense.cov).amax());

    let scaled = mn.rescaled(3.0);
    println!("log-density after (3U, V/3): {:.12}", scaled.logpdf(&x)?);
    println!("trace(V) after normalization: {}", mn.normalize_scale().col_cov.trace());
    Ok(())
}
