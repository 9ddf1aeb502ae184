//! Low-rank penalized thin-plate regression splines in one dimension (time).
//!
//! The full thin-plate problem puts one kernel function `|r|^3 / 12` at every
//! knot year, with the constant and linear functions forming the penalty null
//! space. The rank is reduced by keeping the leading eigenvectors of the
//! constrained kernel matrix, which are the smoothest directions. Each retained
//! column is rescaled to unit root-mean-square over the knots, and the
//! resulting diagonal penalty is scaled so that its largest eigenvalue is one.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map from calendar year to the standardized time coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScale {
    pub first_year: i32,
    pub last_year: i32,
}

impl TimeScale {
    pub fn new(first_year: i32, last_year: i32) -> Result<Self> {
        if last_year <= first_year {
            return Err(Error::Basis(format!(
                "time scale needs last_year > first_year (got {first_year}..{last_year})"
            )));
        }
        Ok(Self {
            first_year,
            last_year,
        })
    }

    #[inline]
    pub fn standardize(&self, year: f64) -> f64 {
        (year - self.first_year as f64) / (self.last_year - self.first_year) as f64
    }
}

impl Default for TimeScale {
    fn default() -> Self {
        Self {
            first_year: 1990,
            last_year: 2017,
        }
    }
}

#[inline]
fn kernel(r: f64) -> f64 {
    r.abs().powi(3) / 12.0
}

/// Design matrix and penalty for one time axis.
///
/// Column 0 of every row is the linear term (centred standardized time); the
/// remaining `k - 1` columns are the penalized thin-plate terms.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    years: Vec<i32>,
    k: usize,
    scale: TimeScale,
    knots: Vec<f64>,
    /// `knots.len() x (k - 1)` kernel weights for each penalized column.
    weights: DMatrix<f64>,
    /// Row-major `years.len() x k` design at the knot years.
    rows: Vec<f64>,
    penalty: DMatrix<f64>,
    penalty_diag: Vec<f64>,
    log_det_penalty: f64,
}

/// Builds the rank-`k` basis over strictly increasing `years`.
pub fn build_thin_plate_basis(years: &[i32], k: usize, scale: TimeScale) -> Result<SplineBasis> {
    SplineBasis::thin_plate(years, k, scale)
}

impl SplineBasis {
    pub fn thin_plate(years: &[i32], k: usize, scale: TimeScale) -> Result<Self> {
        if k < 3 {
            return Err(Error::Basis(format!(
                "basis dimension must be at least 3, got {k}"
            )));
        }
        if years.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Basis("years must be strictly increasing".into()));
        }
        let n = years.len();
        // The constrained kernel space has dimension n - 2 and must hold k - 1 columns.
        if k > n || k - 1 > n.saturating_sub(2) {
            return Err(Error::Basis(format!(
                "basis dimension {k} needs at least {} distinct years, got {n}",
                k + 1
            )));
        }

        let knots: Vec<f64> = years.iter().map(|&y| scale.standardize(y as f64)).collect();
        let kernel_matrix = DMatrix::from_fn(n, n, |i, j| kernel(knots[i] - knots[j]));

        // Orthonormal basis of {delta : T' delta = 0}, T = [1, s], from the
        // eigenvectors of the projector onto the orthogonal complement of T.
        let t = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { knots[i] });
        let gram = t.transpose() * &t;
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Basis("degenerate time knots".into()))?;
        let projector = DMatrix::identity(n, n) - &t * gram_inv * t.transpose();
        let proj_eig = SymmetricEigen::new(projector);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| proj_eig.eigenvalues[b].total_cmp(&proj_eig.eigenvalues[a]));
        let z = DMatrix::from_fn(n, n - 2, |i, j| proj_eig.eigenvectors[(i, order[j])]);

        let constrained = z.transpose() * &kernel_matrix * &z;
        let constrained = (&constrained + constrained.transpose()) * 0.5;
        let eig = SymmetricEigen::new(constrained);
        let mut order: Vec<usize> = (0..n - 2).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let keep = &order[..k - 1];
        if eig.eigenvalues[keep[k - 2]] <= 0.0 {
            return Err(Error::Basis(
                "thin-plate kernel is not positive on the constrained space".into(),
            ));
        }

        let u = DMatrix::from_fn(n - 2, k - 1, |i, j| eig.eigenvectors[(i, keep[j])]);
        let mut weights = &z * u;
        let at_knots = &kernel_matrix * &weights;
        let mut omega = Vec::with_capacity(k - 1);
        for m in 0..k - 1 {
            let col = at_knots.column(m);
            let rms = (col.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
            // Fix the sign so the column starts positive at the first knot with non-zero value.
            let lead = col
                .iter()
                .copied()
                .find(|x| x.abs() > 1e-12 * rms)
                .unwrap_or(1.0);
            let factor = lead.signum() / rms;
            weights.column_mut(m).scale_mut(factor);
            omega.push(eig.eigenvalues[keep[m]] / (rms * rms));
        }
        let max_omega = omega.iter().copied().fold(f64::MIN, f64::max);
        let penalty_diag: Vec<f64> = omega.iter().map(|w| w / max_omega).collect();
        let penalty = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(penalty_diag.clone()));
        let log_det_penalty = penalty_diag.iter().map(|w| w.ln()).sum();

        let mut basis = Self {
            years: years.to_vec(),
            k,
            scale,
            knots,
            weights,
            rows: Vec::with_capacity(n * k),
            penalty,
            penalty_diag,
            log_det_penalty,
        };
        let mut rows = Vec::with_capacity(n * k);
        for &y in years {
            rows.extend(basis.row_at(y));
        }
        basis.rows = rows;
        Ok(basis)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn scale(&self) -> TimeScale {
        self.scale
    }

    /// Position of `year` among the knot years.
    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.binary_search(&year).ok()
    }

    /// Design row (length `k`) at a knot-year index.
    #[inline]
    pub fn row(&self, index: usize) -> &[f64] {
        &self.rows[index * self.k..(index + 1) * self.k]
    }

    /// Design row for any year, including years outside the knot range.
    ///
    /// Kernel columns satisfy the thin-plate side conditions, so beyond the
    /// outermost knots every column continues linearly.
    pub fn row_at(&self, year: i32) -> Vec<f64> {
        let s = self.scale.standardize(year as f64);
        let mut row = Vec::with_capacity(self.k);
        row.push(s - 0.5);
        for m in 0..self.k - 1 {
            let value: f64 = self
                .knots
                .iter()
                .enumerate()
                .map(|(j, &knot)| self.weights[(j, m)] * kernel(s - knot))
                .sum();
            row.push(value);
        }
        row
    }

    /// Dense `T x k` design at the knot years.
    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.years.len(), self.k, &self.rows)
    }

    /// Penalty for the `k - 1` non-linear coefficients.
    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    /// Diagonal of the penalty (it is diagonal in this basis).
    pub fn penalty_diag(&self) -> &[f64] {
        &self.penalty_diag
    }

    pub fn log_det_penalty(&self) -> f64 {
        self.log_det_penalty
    }

    /// `sum_{m,n} a_m Omega_{mn} b_n`.
    #[inline]
    pub fn penalty_form(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.penalty_diag)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }
}

/// Coefficients and log smoothing parameter of one spline trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBlock {
    pub intercept: f64,
    pub linear: f64,
    pub nonlinear: Vec<f64>,
    pub log_lambda: f64,
}

impl SplineBlock {
    pub fn zeros(k: usize) -> Self {
        Self {
            intercept: 0.0,
            linear: 0.0,
            nonlinear: vec![0.0; k - 1],
            log_lambda: 0.0,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }

    /// Number of regression coefficients (`k + 1`).
    pub fn n_coefficients(&self) -> usize {
        self.nonlinear.len() + 2
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_coefficients());
        self.write_coefficients(&mut out);
        out
    }

    pub fn write_coefficients(&self, out: &mut Vec<f64>) {
        out.push(self.intercept);
        out.push(self.linear);
        out.extend_from_slice(&self.nonlinear);
    }

    pub fn set_coefficients(&mut self, values: &[f64]) {
        self.intercept = values[0];
        self.linear = values[1];
        self.nonlinear.copy_from_slice(&values[2..]);
    }

    /// Trend value at a design row.
    #[inline]
    pub fn eval_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self.linear * row[0]
            + self
                .nonlinear
                .iter()
                .zip(&row[1..])
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

/// `f(t) = b0 + b1 X_{t,1} + sum_k b_k X_{t,k}` at any year.
pub fn evaluate_trend(basis: &SplineBasis, block: &SplineBlock, year: i32) -> f64 {
    match basis.year_index(year) {
        Some(i) => block.eval_row(basis.row(i)),
        None => block.eval_row(&basis.row_at(year)),
    }
}

/// `lambda * b' Omega b` over the non-linear coefficients.
pub fn penalty_quadform(basis: &SplineBasis, block: &SplineBlock) -> f64 {
    let b = nalgebra::DVector::from_column_slice(&block.nonlinear);
    block.lambda() * (b.transpose() * basis.penalty() * &b)[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_basis() -> SplineBasis {
        let years: Vec<i32> = (1990..=2017).collect();
        build_thin_plate_basis(&years, 10, TimeScale::default()).unwrap()
    }

    /// Full design with a leading intercept column.
    fn full_design(basis: &SplineBasis) -> DMatrix<f64> {
        let x = basis.design();
        DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                x[(i, j - 1)]
            }
        })
    }

    #[test]
    fn dimensions_for_default_period() {
        let basis = default_basis();
        assert_eq!(basis.design().shape(), (28, 10));
        assert_eq!(basis.penalty().shape(), (9, 9));
    }

    #[test]
    fn rejects_bad_inputs() {
        let years: Vec<i32> = (2000..2008).collect();
        assert!(build_thin_plate_basis(&years, 10, TimeScale::default()).is_err());
        assert!(
            build_thin_plate_basis(&[2000, 2001, 2001, 2002], 3, TimeScale::default()).is_err()
        );
        assert!(build_thin_plate_basis(&years, 2, TimeScale::default()).is_err());
    }

    #[test]
    fn linear_column_is_affine_and_increasing() {
        let basis = default_basis();
        let x = basis.design();
        let d = x[(1, 0)] - x[(0, 0)];
        assert!(d > 0.0);
        for i in 1..28 {
            assert_relative_eq!(x[(i, 0)] - x[(i - 1, 0)], d, epsilon = 1e-12);
        }
    }

    #[test]
    fn penalty_is_symmetric_psd_with_unit_top_eigenvalue() {
        let basis = default_basis();
        let p = basis.penalty();
        assert_eq!(p, &p.transpose());
        let eig = SymmetricEigen::new(p.clone());
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10));
        let max = eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max);
        assert_relative_eq!(max, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_fits_are_unpenalized_and_reproduced() {
        let basis = default_basis();
        let mut block = SplineBlock::zeros(10);
        block.intercept = -0.7;
        block.linear = 2.3;
        block.log_lambda = 3.0;
        assert!(penalty_quadform(&basis, &block).abs() < 1e-10);

        // Least squares of an arbitrary linear function on the full design.
        let x = full_design(&basis);
        let y = DVector::from_iterator(
            28,
            basis
                .years()
                .iter()
                .map(|&t| 0.4 - 0.03 * (t - 1990) as f64),
        );
        let beta = (x.transpose() * &x)
            .lu()
            .solve(&(x.transpose() * &y))
            .unwrap();
        let resid = (&x * &beta - &y).norm();
        assert!(resid < 1e-8, "residual {resid}");
    }

    #[test]
    fn trend_evaluation_examples() {
        let basis = default_basis();
        let zero = SplineBlock::zeros(10);
        let mut constant = SplineBlock::zeros(10);
        constant.intercept = 1.25;
        for year in [1990, 2001, 2017, 2022] {
            assert_eq!(evaluate_trend(&basis, &zero, year), 0.0);
            assert_relative_eq!(
                evaluate_trend(&basis, &constant, year),
                1.25,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn least_squares_fit_is_reproduced() {
        let basis = default_basis();
        let x = full_design(&basis);
        let y = DVector::from_iterator(
            28,
            basis
                .years()
                .iter()
                .map(|&t| (0.2 * (t - 1990) as f64).sin() + 0.01 * (t - 1990) as f64),
        );
        let beta = (x.transpose() * &x)
            .lu()
            .solve(&(x.transpose() * &y))
            .unwrap();
        let fitted = &x * &beta;
        let mut block = SplineBlock::zeros(10);
        block.set_coefficients(beta.as_slice());
        for (i, &year) in basis.years().iter().enumerate() {
            assert!((evaluate_trend(&basis, &block, year) - fitted[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn quadform_matches_eigen_expansion() {
        let basis = default_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let eig = SymmetricEigen::new(basis.penalty().clone());
        for _ in 0..20 {
            let mut block = SplineBlock::zeros(10);
            block.nonlinear = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
            block.log_lambda = rng.random_range(-2.0..2.0);
            let b = DVector::from_column_slice(&block.nonlinear);
            let expected: f64 = block.lambda()
                * (0..9)
                    .map(|m| eig.eigenvalues[m] * eig.eigenvectors.column(m).dot(&b).powi(2))
                    .sum::<f64>();
            assert_relative_eq!(
                penalty_quadform(&basis, &block),
                expected,
                max_relative = 1e-10
            );
            let q = penalty_quadform(&basis, &block);
            block.log_lambda += 2f64.ln();
            assert_relative_eq!(
                penalty_quadform(&basis, &block),
                2.0 * q,
                max_relative = 1e-12
            );
        }
        assert_eq!(penalty_quadform(&basis, &SplineBlock::zeros(10)), 0.0);
    }

    #[test]
    fn larger_lambda_gives_smoother_fit() {
        let basis = default_basis();
        let x = full_design(&basis);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = DVector::from_iterator(
            28,
            basis
                .years()
                .iter()
                .map(|&t| (0.3 * (t - 1990) as f64).cos() + rng.random_range(-0.5..0.5)),
        );
        let mut roughness = Vec::new();
        for log_lambda in [-4.0, -2.0, 0.0, 2.0, 4.0] {
            let mut s = DMatrix::zeros(11, 11);
            for m in 0..9 {
                s[(m + 2, m + 2)] = f64::exp(log_lambda) * basis.penalty()[(m, m)];
            }
            let beta = (x.transpose() * &x + s)
                .lu()
                .solve(&(x.transpose() * &y))
                .unwrap();
            let nl: Vec<f64> = beta.as_slice()[2..].to_vec();
            roughness.push(basis.penalty_form(&nl, &nl));
        }
        assert!(roughness.windows(2).all(|w| w[1] < w[0]), "{roughness:?}");
    }

    #[test]
    fn extrapolation_is_linear_beyond_knots() {
        let basis = default_basis();
        let rows: Vec<Vec<f64>> = (2018..=2022).map(|y| basis.row_at(y)).collect();
        for m in 0..10 {
            let d1 = rows[1][m] - rows[0][m];
            for w in rows.windows(2) {
                assert!((w[1][m] - w[0][m] - d1).abs() < 1e-9);
            }
        }
        // Knot rows match the closed-form evaluation.
        let direct = basis.row_at(2003);
        let idx = basis.year_index(2003).unwrap();
        for (a, b) in direct.iter().zip(basis.row(idx)) {
            assert_eq!(a, b);
        }
    }
}
