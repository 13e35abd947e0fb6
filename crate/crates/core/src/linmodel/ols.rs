use nalgebra::{DMatrix, DVector};

use super::LinModelError;

/// Singular values below this fraction of the largest mark a rank-deficient
/// design.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Conventional homoskedastic standard errors; NaN when `df == 0`.
    pub se: Vec<f64>,
    pub r_squared: f64,
    /// Residual degrees of freedom, `n - p`.
    pub df: usize,
    pub rss: f64,
    pub fitted: Vec<f64>,
}

impl LinearFit {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[i], self.se[i]))
    }

    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.fitted).map(|(a, b)| a - b).collect()
    }
}

pub fn ols_fit(design: &DMatrix<f64>, y: &[f64]) -> Result<LinearFit, LinModelError> {
    let names: Vec<String> = (0..design.ncols()).map(|j| format!("c{j}")).collect();
    ols_fit_named(design, y, &names)
}

/// Least squares through a Householder QR of the design. Rank is judged from
/// the singular values of the triangular factor, which equal those of the
/// design itself.
pub fn ols_fit_named(design: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LinearFit, LinModelError> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(LinModelError::Length(format!("design has {n} rows, y has {}", y.len())));
    }
    if names.len() != p {
        return Err(LinModelError::Length(format!("{} names for {p} columns", names.len())));
    }
    if n < p || p == 0 {
        return Err(LinModelError::TooFewRows { rows: n, cols: p });
    }

    let qr = design.clone().qr();
    let r = qr.r();
    let svd = r.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let small: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| !(s > RANK_TOLERANCE * smax) || smax == 0.0)
        .map(|(i, _)| i)
        .collect();
    if !small.is_empty() {
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut involved = vec![false; p];
        for &i in &small {
            let row = v_t.row(i);
            for j in 0..p {
                if row[j].abs() > 1e-6 {
                    involved[j] = true;
                }
            }
        }
        let columns = names
            .iter()
            .zip(involved)
            .filter(|(_, hit)| *hit)
            .map(|(n, _)| n.clone())
            .collect();
        return Err(LinModelError::Singular { columns });
    }

    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| LinModelError::Singular { columns: names.to_vec() })?;

    let fitted_v = design * &beta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };

    let df = n - p;
    let sigma2 = if df > 0 { rss / df as f64 } else { f64::NAN };
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| LinModelError::Singular { columns: names.to_vec() })?;
    let se = (0..p)
        .map(|j| (sigma2 * r_inv.row(j).iter().map(|v| v * v).sum::<f64>()).sqrt())
        .collect();

    Ok(LinearFit {
        names: names.to_vec(),
        coefficients: beta.iter().copied().collect(),
        se,
        r_squared,
        df,
        rss,
        fitted,
    })
}
