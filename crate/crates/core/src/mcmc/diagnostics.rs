use crate::error::{Error, Result};

/// Gelman-Rubin potential scale reduction factor, classic (unsplit) form.
///
/// Zero within- and between-chain variance gives 1.0; zero within-chain
/// variance with distinct chain means gives infinity.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::Config(format!(
            "PSRF needs at least 2 chains, got {m}"
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Config("PSRF needs chains of equal length".into()));
    }
    if n < 10 {
        return Err(Error::Config(format!(
            "PSRF needs at least 10 draws per chain, got {n}"
        )));
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = nf / (m as f64 - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m as f64;
    // relative thresholds: traces equal up to rounding count as degenerate
    let scale = grand.abs().max(1.0);
    let tiny = (scale * 1e-12).powi(2);
    if w <= tiny {
        return Ok(if b <= tiny * nf { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorts a copy and returns the requested type-7 quantiles.
pub fn quantiles(values: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quantiles of an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(probs.iter().map(|&p| quantile_sorted(&v, p)).collect())
}

/// Central `level` interval of a sample.
pub fn central_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    let q = quantiles(values, &[(1.0 - level) / 2.0, (1.0 + level) / 2.0])?;
    Ok((q[0], q[1]))
}

/// Fraction of observations inside the central `level` interval of their replicates.
pub fn coverage(replicates: &[Vec<f64>], observations: &[f64], level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "coverage level must lie in (0,1), got {level}"
        )));
    }
    if observations.is_empty() {
        return Err(Error::EmptyInput("no observations to score".into()));
    }
    if replicates.len() != observations.len() {
        return Err(Error::Config(format!(
            "{} replicate sets for {} observations",
            replicates.len(),
            observations.len()
        )));
    }
    let mut inside = 0usize;
    for (rep, &y) in replicates.iter().zip(observations) {
        let (lo, hi) = central_interval(rep, level)?;
        if lo <= y && y <= hi {
            inside += 1;
        }
    }
    Ok(inside as f64 / observations.len() as f64)
}

/// Counts per bin of `[lo, hi)` with `bins` equal widths plus an overflow bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<(f64, f64, usize)> = (0..bins)
        .map(|b| (lo + b as f64 * width, lo + (b + 1) as f64 * width, 0))
        .collect();
    out.push((hi, f64::INFINITY, 0));
    for &v in values {
        let b = if v >= hi || v.is_nan() {
            bins
        } else {
            (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
        };
        out[b].2 += 1;
    }
    out
}
