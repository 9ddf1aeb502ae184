//! Generalized Dirichlet (GD), Generalized Dirichlet Multinomial (GDM) and
//! Beta-Binomial log densities, the Beta-Binomial/Uniform outlier mixture,
//! and the relative-mean/dispersion parameterisation used by the model.
//!
//! Everything is evaluated in log space through `ln Γ`, so totals of order
//! 10^6 are fine.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative means are kept inside `[NU_CLAMP, 1 - NU_CLAMP]` during likelihood evaluation.
pub const NU_CLAMP: f64 = 1e-12;

/// `ln B(a, b)`.
#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln C(n, k)`.
#[inline]
pub fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[inline]
pub fn clamp_nu(nu: f64) -> f64 {
    nu.clamp(NU_CLAMP, 1.0 - NU_CLAMP)
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Shape parameters of a Generalized Dirichlet over `k` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct GdParams {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl GdParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::Domain(format!(
                "GD parameter vectors must be non-empty and of equal length (got {} and {})",
                alpha.len(),
                beta.len()
            )));
        }
        if alpha
            .iter()
            .chain(beta.iter())
            .any(|&x| !(x > 0.0) || !x.is_finite())
        {
            return Err(Error::Domain(
                "GD parameters must be finite and strictly positive".into(),
            ));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Number of categories (`alpha.len() + 1`).
    pub fn categories(&self) -> usize {
        self.alpha.len() + 1
    }
}

/// The `(nu, phi)` form of [`GdParams`]: conditional expectations and dispersions.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeMeanParams {
    pub nu: Vec<f64>,
    pub phi: Vec<f64>,
}

impl RelativeMeanParams {
    pub fn new(nu: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if nu.len() != phi.len() || nu.is_empty() {
            return Err(Error::Domain(
                "nu and phi must have equal, non-zero length".into(),
            ));
        }
        for (&n, &p) in nu.iter().zip(&phi) {
            reparam(n, p)?;
        }
        Ok(Self { nu, phi })
    }

    pub fn to_gd(&self) -> GdParams {
        let (alpha, beta) = self
            .nu
            .iter()
            .zip(&self.phi)
            .map(|(&n, &p)| (n * p, (1.0 - n) * p))
            .unzip();
        GdParams { alpha, beta }
    }

    pub fn from_gd(params: &GdParams) -> Self {
        let (nu, phi) = params
            .alpha
            .iter()
            .zip(&params.beta)
            .map(|(&a, &b)| (a / (a + b), a + b))
            .unzip();
        Self { nu, phi }
    }
}

/// Counts over `k` categories together with their total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    /// Builds a count vector, checking that `counts` sums to `total`.
    pub fn with_total(counts: Vec<u64>, total: u64) -> Result<Self> {
        let sum: u64 = counts.iter().sum();
        if sum != total {
            return Err(Error::Domain(format!(
                "counts sum to {sum}, expected {total}"
            )));
        }
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Log density of the Generalized Dirichlet at a point `p` of the open simplex.
///
/// Evaluated through the stick-breaking representation
/// `z_i = p_i / S_i ~ Beta(alpha_i, beta_i)` with `S_i = sum_{j >= i} p_j`,
/// which expands to the closed-form product density.
pub fn log_pdf_gd(p: &[f64], params: &GdParams) -> Result<f64> {
    let k = params.categories();
    if p.len() != k {
        return Err(Error::Domain(format!(
            "point has {} components, parameters describe {k}",
            p.len()
        )));
    }
    if p.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("GD density requires every p_i > 0".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("point sums to {sum}, not 1")));
    }

    // S_i summed from the back so small tails keep their precision; S_1 is 1 by construction.
    let mut tails = vec![0.0; k + 1];
    for i in (0..k).rev() {
        tails[i] = tails[i + 1] + p[i];
    }
    tails[0] = 1.0;
    let mut out = 0.0;
    for i in 0..k - 1 {
        let (a, b) = (params.alpha[i], params.beta[i]);
        out += (a - 1.0) * p[i].ln() + (b - 1.0) * tails[i + 1].ln()
            - (a + b - 1.0) * tails[i].ln()
            - ln_beta(a, b);
    }
    Ok(out)
}

/// Log pmf of the GDM, assembled directly from the closed-form gamma-function
/// product (not from the Beta-Binomial chain).
pub fn log_pmf_gdm(counts: &CountVector, params: &GdParams) -> Result<f64> {
    let k = params.categories();
    if counts.len() != k {
        return Err(Error::Domain(format!(
            "count vector has {} categories, parameters describe {k}",
            counts.len()
        )));
    }
    let y = counts.counts();
    let n = counts.total() as f64;
    let mut tails = vec![0.0; k + 1];
    for i in (0..k).rev() {
        tails[i] = tails[i + 1] + y[i] as f64;
    }
    let mut out = ln_gamma(n + 1.0) - ln_gamma(y[k - 1] as f64 + 1.0);
    for i in 0..k - 1 {
        let (a, b) = (params.alpha[i], params.beta[i]);
        let yi = y[i] as f64;
        out += ln_gamma(yi + a) + ln_gamma(tails[i + 1] + b)
            - ln_beta(a, b)
            - ln_gamma(yi + 1.0)
            - ln_gamma(a + b + tails[i]);
    }
    Ok(out)
}

/// `ln[ C(n,v) B(v+alpha, n-v+beta) / B(alpha, beta) ]`.
pub fn log_pmf_beta_binomial(v: i64, alpha: f64, beta: f64, n: i64) -> Result<f64> {
    if v < 0 || v > n {
        return Err(Error::Domain(format!(
            "Beta-Binomial support is 0..={n}, got {v}"
        )));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Domain(
            "Beta-Binomial shapes must be positive".into(),
        ));
    }
    Ok(bb_unchecked(v as u64, n as u64, alpha, beta))
}

/// Beta-Binomial log pmf without argument checks; the model's hot path.
#[inline]
pub(crate) fn bb_unchecked(v: u64, n: u64, alpha: f64, beta: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (vf, nf) = (v as f64, n as f64);
    ln_choose(n, v) + ln_gamma(vf + alpha) + ln_gamma(nf - vf + beta)
        - ln_gamma(nf + alpha + beta)
        - ln_beta(alpha, beta)
}

/// Beta-Binomial / discrete-Uniform mixture with weight `rho` on the Beta-Binomial.
///
/// The uniform component lives on `{0, ..., n}` and so has mass `1/(n+1)`.
pub fn log_pmf_outlier_mixture(v: i64, alpha: f64, beta: f64, n: i64, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!(
            "mixture weight must lie in [0,1], got {rho}"
        )));
    }
    let bb = log_pmf_beta_binomial(v, alpha, beta, n)?;
    Ok(mixture_from_bb(bb, n as u64, rho))
}

#[inline]
pub(crate) fn mixture_from_bb(log_bb: f64, n: u64, rho: f64) -> f64 {
    let log_unif = -((n as f64) + 1.0).ln();
    if rho >= 1.0 {
        return log_bb;
    }
    if rho <= 0.0 {
        return log_unif;
    }
    log_add_exp(rho.ln() + log_bb, (1.0 - rho).ln() + log_unif)
}

/// `(nu, phi) -> (alpha, beta) = (nu*phi, (1-nu)*phi)`.
pub fn reparam(nu: f64, phi: f64) -> Result<(f64, f64)> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Domain(format!(
            "relative mean must lie in (0,1), got {nu}"
        )));
    }
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::Domain(format!(
            "dispersion must be positive, got {phi}"
        )));
    }
    Ok((nu * phi, (1.0 - nu) * phi))
}

/// Marginal means from relative means: `mu_j = nu_j * prod_{i<j} (1 - nu_i)`,
/// with the final category taking the remaining product.
pub fn marginal_means(nu: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nu.len() + 1);
    let mut remaining = 1.0;
    for &v in nu {
        out.push(v * remaining);
        remaining *= 1.0 - v;
    }
    out.push(remaining);
    out
}

/// Inverse of [`marginal_means`]: `nu_j = mu_j / sum_{i >= j} mu_i`.
pub fn relative_means_from_marginal(mu: &[f64]) -> Result<Vec<f64>> {
    if mu.len() < 2 {
        return Err(Error::Domain("need at least two categories".into()));
    }
    let mut tail: f64 = mu.iter().sum();
    let mut out = Vec::with_capacity(mu.len() - 1);
    for (j, &m) in mu[..mu.len() - 1].iter().enumerate() {
        if !(tail > 0.0) || m < 0.0 {
            return Err(Error::Domain(format!(
                "partial sum before category {j} leaves no mass"
            )));
        }
        out.push(m / tail);
        tail -= m;
    }
    Ok(out)
}

/// Same recursion as [`relative_means_from_marginal`] but never fails; categories
/// with no remaining mass get `nu = 0.5` and every value is clamped.
pub(crate) fn relative_means_clamped(mu: &[f64], out: &mut [f64]) {
    let mut tail: f64 = mu.iter().sum();
    for (j, &m) in mu[..mu.len() - 1].iter().enumerate() {
        out[j] = if tail > 0.0 { clamp_nu(m / tail) } else { 0.5 };
        tail -= m;
    }
}

/// Draws one Beta-Binomial variate.
pub fn sample_beta_binomial<R: Rng + ?Sized>(alpha: f64, beta: f64, n: u64, rng: &mut R) -> u64 {
    if n == 0 {
        return 0;
    }
    let p = Beta::new(alpha, beta)
        .expect("positive Beta shapes")
        .sample(rng);
    Binomial::new(n, p.clamp(0.0, 1.0))
        .expect("valid binomial probability")
        .sample(rng)
}

/// Draws a GDM count vector through the sequential Beta-Binomial factorisation.
pub fn sample_gdm<R: Rng + ?Sized>(params: &GdParams, n: u64, rng: &mut R) -> CountVector {
    let mut counts = Vec::with_capacity(params.categories());
    let mut remaining = n;
    for (&a, &b) in params.alpha.iter().zip(&params.beta) {
        let v = sample_beta_binomial(a, b, remaining, rng);
        counts.push(v);
        remaining -= v;
    }
    counts.push(remaining);
    CountVector { counts, total: n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// All compositions of `n` into `k` non-negative parts.
    fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
        if k == 1 {
            return vec![vec![n]];
        }
        let mut out = Vec::new();
        for first in 0..=n {
            for mut rest in compositions(n - first, k - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    fn dirichlet_log_pdf(p: &[f64], a: &[f64]) -> f64 {
        let total: f64 = a.iter().sum();
        ln_gamma(total) - a.iter().map(|&x| ln_gamma(x)).sum::<f64>()
            + p.iter()
                .zip(a)
                .map(|(&pi, &ai)| (ai - 1.0) * pi.ln())
                .sum::<f64>()
    }

    fn dirichlet_multinomial_log_pmf(y: &[u64], a: &[f64]) -> f64 {
        let n: u64 = y.iter().sum();
        let total: f64 = a.iter().sum();
        ln_gamma(n as f64 + 1.0) + ln_gamma(total) - ln_gamma(n as f64 + total)
            + y.iter()
                .zip(a)
                .map(|(&yi, &ai)| {
                    ln_gamma(yi as f64 + ai) - ln_gamma(ai) - ln_gamma(yi as f64 + 1.0)
                })
                .sum::<f64>()
    }

    /// GD parameters satisfying the Dirichlet-reduction condition for Dirichlet(a).
    fn dirichlet_as_gd(a: &[f64]) -> GdParams {
        let k = a.len();
        let alpha = a[..k - 1].to_vec();
        let beta = (0..k - 1).map(|i| a[i + 1..].iter().sum()).collect();
        GdParams::new(alpha, beta).unwrap()
    }

    fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let e: Vec<f64> = (0..k)
            .map(|_| -rng.random::<f64>().max(1e-300).ln())
            .collect();
        let s: f64 = e.iter().sum();
        let mut p: Vec<f64> = e.iter().map(|x| x / s).collect();
        let head: f64 = p[..k - 1].iter().sum();
        p[k - 1] = 1.0 - head;
        p
    }

    #[test]
    fn beta_one_one_is_uniform_density() {
        let params = GdParams::new(vec![1.0], vec![1.0]).unwrap();
        assert_relative_eq!(
            log_pdf_gd(&[0.3, 0.7], &params).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn gd_density_rejects_boundary_and_unnormalised_points() {
        let params = GdParams::new(vec![2.0, 3.0], vec![1.0, 2.0]).unwrap();
        assert!(log_pdf_gd(&[0.0, 0.5, 0.5], &params).is_err());
        assert!(log_pdf_gd(&[0.2, 0.2, 0.2], &params).is_err());
        assert!(log_pdf_gd(&[0.5, 0.5], &params).is_err());
    }

    #[test]
    fn gd_reduces_to_dirichlet() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let k = rng.random_range(2..6);
            let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..5.0)).collect();
            let gd = dirichlet_as_gd(&a);
            let p = random_simplex(&mut rng, k);
            assert_relative_eq!(
                log_pdf_gd(&p, &gd).unwrap(),
                dirichlet_log_pdf(&p, &a),
                epsilon = 1e-8,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn gd_density_integrates_to_one() {
        // p1 = z1, p2 = (1 - z1) z2, Jacobian (1 - z1); midpoint rule on the unit square.
        let params = GdParams::new(vec![2.0, 3.0], vec![1.0, 2.0]).unwrap();
        let m = 600;
        let h = 1.0 / m as f64;
        let mut total = 0.0;
        for a in 0..m {
            let z1 = (a as f64 + 0.5) * h;
            for b in 0..m {
                let z2 = (b as f64 + 0.5) * h;
                let p1 = z1;
                let p2 = (1.0 - z1) * z2;
                let p = [p1, p2, 1.0 - p1 - p2];
                total += log_pdf_gd(&p, &params).unwrap().exp() * (1.0 - z1) * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "integral = {total}");
    }

    #[test]
    fn gdm_with_two_categories_is_beta_binomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (a, b) = (rng.random_range(0.1..20.0), rng.random_range(0.1..20.0));
            let gd = GdParams::new(vec![a], vec![b]).unwrap();
            let v = rng.random_range(0..=20u64);
            let joint = log_pmf_gdm(&CountVector::new(vec![v, 20 - v]), &gd).unwrap();
            let bb = log_pmf_beta_binomial(v as i64, a, b, 20).unwrap();
            assert_relative_eq!(joint, bb, epsilon = 1e-10);
        }
    }

    #[test]
    fn gdm_normalises_over_compositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 2..=4 {
            for n in 0..=8u64 {
                let alpha: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.2..6.0)).collect();
                let beta: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.2..6.0)).collect();
                let gd = GdParams::new(alpha, beta).unwrap();
                let total: f64 = compositions(n, k)
                    .into_iter()
                    .map(|c| log_pmf_gdm(&CountVector::new(c), &gd).unwrap().exp())
                    .sum();
                assert!((total - 1.0).abs() < 1e-10, "k={k} n={n} total={total}");
            }
        }
        // The worked case: N = 4 into 3 parts.
        let gd = GdParams::new(vec![2.0, 3.0], vec![1.0, 2.0]).unwrap();
        let total: f64 = compositions(4, 3)
            .into_iter()
            .map(|c| log_pmf_gdm(&CountVector::new(c), &gd).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gdm_matches_dirichlet_multinomial_under_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let k = rng.random_range(2..5);
            let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..5.0)).collect();
            let gd = dirichlet_as_gd(&a);
            let y: Vec<u64> = (0..k).map(|_| rng.random_range(0..30)).collect();
            assert_relative_eq!(
                log_pmf_gdm(&CountVector::new(y.clone()), &gd).unwrap(),
                dirichlet_multinomial_log_pmf(&y, &a),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn gdm_rejects_length_mismatch() {
        let gd = GdParams::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(log_pmf_gdm(&CountVector::new(vec![1, 2]), &gd).is_err());
        assert!(GdParams::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(GdParams::new(vec![0.0], vec![1.0]).is_err());
        assert!(CountVector::with_total(vec![1, 2], 4).is_err());
    }

    #[test]
    fn beta_binomial_uniform_case() {
        for v in 0..=10 {
            assert_relative_eq!(
                log_pmf_beta_binomial(v, 1.0, 1.0, 10).unwrap(),
                (1.0f64 / 11.0).ln(),
                epsilon = 1e-12
            );
        }
        assert!(log_pmf_beta_binomial(-1, 1.0, 1.0, 10).is_err());
        assert!(log_pmf_beta_binomial(11, 1.0, 1.0, 10).is_err());
    }

    #[test]
    fn beta_binomial_sums_to_one() {
        let total: f64 = (0..=5)
            .map(|v| log_pmf_beta_binomial(v, 2.3, 0.7, 5).unwrap().exp())
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn huge_dispersion_approaches_binomial() {
        let (alpha, beta) = reparam(0.3, 1e8).unwrap();
        for v in 0..=50i64 {
            let binom =
                ln_choose(50, v as u64) + v as f64 * 0.3f64.ln() + (50 - v) as f64 * 0.7f64.ln();
            let bb = log_pmf_beta_binomial(v, alpha, beta, 50).unwrap();
            assert!((bb - binom).abs() < 1e-4, "v={v}: {bb} vs {binom}");
        }
    }

    #[test]
    fn mixture_endpoints_and_midpoint() {
        let bb = log_pmf_beta_binomial(4, 2.0, 3.0, 9).unwrap();
        assert_eq!(log_pmf_outlier_mixture(4, 2.0, 3.0, 9, 1.0).unwrap(), bb);
        for v in 0..=9 {
            assert_relative_eq!(
                log_pmf_outlier_mixture(v, 2.0, 3.0, 9, 0.0).unwrap(),
                -(10.0f64).ln(),
                epsilon = 1e-14
            );
            assert_relative_eq!(
                log_pmf_outlier_mixture(v, 1.0, 1.0, 9, 0.5).unwrap(),
                0.1f64.ln(),
                epsilon = 1e-12
            );
        }
        assert!(log_pmf_outlier_mixture(1, 1.0, 1.0, 9, 1.5).is_err());
    }

    #[test]
    fn mixture_normalises() {
        let total: f64 = (0..=12)
            .map(|v| {
                log_pmf_outlier_mixture(v, 0.8, 4.0, 12, 0.37)
                    .unwrap()
                    .exp()
            })
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reparam_examples_and_inverse() {
        assert_eq!(reparam(0.5, 2.0).unwrap(), (1.0, 1.0));
        assert_eq!(reparam(0.25, 4.0).unwrap(), (1.0, 3.0));
        assert!(reparam(0.0, 1.0).is_err());
        assert!(reparam(1.0, 1.0).is_err());
        assert!(reparam(0.5, 0.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let nu = rng.random_range(0.001..0.999);
            let phi = rng.random_range(0.01..1e4);
            let (a, b) = reparam(nu, phi).unwrap();
            assert_relative_eq!(a / (a + b), nu, max_relative = 1e-12);
            assert_relative_eq!(a + b, phi, max_relative = 1e-12);
        }
    }

    #[test]
    fn marginal_means_examples() {
        assert_eq!(
            marginal_means(&[0.5, 0.5, 0.5]),
            vec![0.5, 0.25, 0.125, 0.125]
        );
        let eps = 1e-13;
        let mu = marginal_means(&[1.0 - eps, 0.3, 0.6]);
        assert!((mu[0] - 1.0).abs() < 1e-12);
        assert!(mu[1..].iter().all(|&m| m < 1e-12));
        assert_eq!(
            relative_means_from_marginal(&[0.5, 0.25, 0.125, 0.125]).unwrap(),
            vec![0.5, 0.5, 0.5]
        );
    }

    #[test]
    fn uniform_marginal_gives_harmonic_relative_means() {
        for k in 2..8 {
            let mu = vec![1.0 / k as f64; k];
            let nu = relative_means_from_marginal(&mu).unwrap();
            for (j, &v) in nu.iter().enumerate() {
                assert_relative_eq!(v, 1.0 / (k - j) as f64, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn relative_means_reject_exhausted_mass() {
        assert!(relative_means_from_marginal(&[1.0, 0.0, 0.0]).is_err());
        assert!(relative_means_from_marginal(&[0.5]).is_err());
    }

    #[test]
    fn sample_gdm_zero_total() {
        let gd = GdParams::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_gdm(&gd, 0, &mut rng).counts(), &[0, 0, 0]);
    }

    #[test]
    fn sample_gdm_matches_enumerated_pmf() {
        let gd = GdParams::new(vec![1.5, 0.8], vec![2.0, 1.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let cells = compositions(5, 3);
        let draws = 1_000_000usize;
        let mut observed = vec![0usize; cells.len()];
        for _ in 0..draws {
            let c = sample_gdm(&gd, 5, &mut rng);
            let idx = cells
                .iter()
                .position(|x| x.as_slice() == c.counts())
                .unwrap();
            observed[idx] += 1;
        }
        let chi2: f64 = cells
            .iter()
            .zip(&observed)
            .map(|(cell, &o)| {
                let e = draws as f64
                    * log_pmf_gdm(&CountVector::new(cell.clone()), &gd)
                        .unwrap()
                        .exp();
                (o as f64 - e).powi(2) / e
            })
            .sum();
        let critical = ChiSquared::new((cells.len() - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 = {chi2}, critical = {critical}");
    }

    #[test]
    fn sample_gdm_concentrated_mean() {
        let gd = GdParams::new(vec![1e8, 1e8], vec![1e8, 1e8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (n, draws) = (100u64, 10_000);
        let mean = (0..draws)
            .map(|_| sample_gdm(&gd, n, &mut rng).counts()[0] as f64 / n as f64)
            .sum::<f64>()
            / draws as f64;
        let se = (0.25 / n as f64 / draws as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean = {mean}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn chain_rule_matches_joint(
                alpha in prop::collection::vec(0.05f64..30.0, 1..4),
                beta_seed in prop::collection::vec(0.05f64..30.0, 4),
                counts_seed in prop::collection::vec(0u64..40, 5),
            ) {
                let k = alpha.len() + 1;
                let beta = beta_seed[..k - 1].to_vec();
                let counts = counts_seed[..k].to_vec();
                let total: u64 = counts.iter().sum();
                let gd = GdParams::new(alpha.clone(), beta.clone()).unwrap();
                let joint = log_pmf_gdm(&CountVector::new(counts.clone()), &gd).unwrap();
                let mut remaining = total as i64;
                let mut chain = 0.0;
                for i in 0..k - 1 {
                    chain += log_pmf_beta_binomial(counts[i] as i64, alpha[i], beta[i], remaining).unwrap();
                    remaining -= counts[i] as i64;
                }
                prop_assert!((joint - chain).abs() < 1e-10 * joint.abs().max(1.0));
            }

            #[test]
            fn marginal_means_close_simplex_and_invert(nu in prop::collection::vec(0.001f64..0.999, 1..8)) {
                let mu = marginal_means(&nu);
                prop_assert!(mu.iter().all(|&m| (0.0..=1.0).contains(&m)));
                prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let back = relative_means_from_marginal(&mu).unwrap();
                for (a, b) in back.iter().zip(&nu) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }

            #[test]
            fn mixture_moves_monotonically_in_rho(
                v in 0i64..30, a in 0.2f64..10.0, b in 0.2f64..10.0, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0,
            ) {
                let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
                let bb = log_pmf_beta_binomial(v, a, b, 30).unwrap();
                let unif = -(31.0f64).ln();
                let m_lo = log_pmf_outlier_mixture(v, a, b, 30, lo).unwrap();
                let m_hi = log_pmf_outlier_mixture(v, a, b, 30, hi).unwrap();
                if bb > unif {
                    prop_assert!(m_hi >= m_lo - 1e-12);
                } else {
                    prop_assert!(m_hi <= m_lo + 1e-12);
                }
            }
        }
    }
}
