use nalgebra::{DMatrix, DVector};

/// Ordinary least squares `y ≈ X β`; returns `β` and `R²`.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    if x.nrows() < x.ncols() || x.nrows() == 0 {
        return None;
    }
    let svd = x.clone().svd(true, true);
    let beta = svd.solve(y, 1e-12).ok()?;
    let resid = y - x * &beta;
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res = resid.norm_squared();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Some((beta, r2))
}

/// Slope, intercept and `R²` of a straight-line fit.
pub(crate) fn line_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let x = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { xs[i] } else { 1.0 });
    let (b, r2) = least_squares(&x, &DVector::from_column_slice(ys))?;
    Some((b[0], b[1], r2))
}
