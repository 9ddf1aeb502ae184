//! Sampler coordinates of the spline blocks.
//!
//! Joint spline blocks are proposed as `[intercept, linear, z...]` with
//! `z_j = sqrt(lambda * w_j) * (b_j - parent_j)`, the non-linear deviations in
//! prior-standard units. The map depends only on other blocks, so its Jacobian
//! is constant during the update. Scale blocks move `log_lambda` with `z`
//! held fixed; [`Model::coordinate_log_jacobian`] is the matching correction.
//! Moving a region or super-region curve shifts every curve nested under it
//! by the same amount, so tightly pooled children follow their parent.

use super::assemble::Model;
use super::state::{BlockId, ModelState};
use crate::splines::SplineBlock;

impl Model {
    /// The spline a block acts on and the non-linear coefficients it is centred on.
    fn spline_pair<'a>(
        &self,
        s: &'a ModelState,
        block: BlockId,
    ) -> Option<(&'a SplineBlock, Option<&'a [f64]>)> {
        Some(match block {
            BlockId::Beta { q, c } | BlockId::BetaScale { q, c } => (
                &s.beta[q][c],
                Some(s.gamma[q][self.regions.region_of(c)].nonlinear.as_slice()),
            ),
            BlockId::Gamma { q, r } | BlockId::GammaScale { q, r } => (
                &s.gamma[q][r],
                Some(s.theta[q][self.regions.super_of(r)].nonlinear.as_slice()),
            ),
            BlockId::Theta { q, s: sr } | BlockId::ThetaScale { q, s: sr } => {
                (&s.theta[q][sr], None)
            }
            BlockId::Kappa { c } | BlockId::KappaScale { c } => (&s.kappa[c], None),
            _ => return None,
        })
    }

    fn spline_mut_ref<'a>(&self, s: &'a ModelState, block: BlockId) -> &'a SplineBlock {
        match block {
            BlockId::Beta { q, c } => &s.beta[q][c],
            BlockId::Gamma { q, r } => &s.gamma[q][r],
            other => unreachable!("{other:?} is not a nested curve"),
        }
    }

    fn spline_mut<'a>(&self, s: &'a mut ModelState, block: BlockId) -> &'a mut SplineBlock {
        match block {
            BlockId::Beta { q, c } | BlockId::BetaScale { q, c } => &mut s.beta[q][c],
            BlockId::Gamma { q, r } | BlockId::GammaScale { q, r } => &mut s.gamma[q][r],
            BlockId::Theta { q, s: sr } | BlockId::ThetaScale { q, s: sr } => &mut s.theta[q][sr],
            BlockId::Kappa { c } | BlockId::KappaScale { c } => &mut s.kappa[c],
            other => unreachable!("{other:?} is not a spline block"),
        }
    }

    /// Spline blocks nested under `block` (children before grandchildren).
    pub fn descendants(&self, block: BlockId) -> Vec<BlockId> {
        match block {
            BlockId::Gamma { q, r } => self
                .regions
                .countries_in(r)
                .map(|c| BlockId::Beta { q, c })
                .collect(),
            BlockId::Theta { q, s: sr } => {
                let regions: Vec<usize> = self.regions.regions_in(sr).collect();
                let mut out: Vec<BlockId> =
                    regions.iter().map(|&r| BlockId::Gamma { q, r }).collect();
                for &r in &regions {
                    out.extend(self.regions.countries_in(r).map(|c| BlockId::Beta { q, c }));
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Values of `block` in sampler coordinates.
    pub fn get_coordinates(&self, s: &ModelState, block: BlockId, out: &mut Vec<f64>) {
        if !block.is_spline() {
            s.get_block(block, out);
            return;
        }
        let (b, parent) = self.spline_pair(s, block).expect("spline block");
        out.clear();
        out.push(b.intercept);
        out.push(b.linear);
        let lambda = b.lambda();
        for (j, (&x, &w)) in b
            .nonlinear
            .iter()
            .zip(self.basis.penalty_diag())
            .enumerate()
        {
            let centre = parent.map_or(0.0, |p| p[j]);
            out.push((lambda * w).sqrt() * (x - centre));
        }
    }

    /// Inverse of [`Model::get_coordinates`].
    pub fn set_coordinates(&self, s: &mut ModelState, block: BlockId, values: &[f64]) {
        if block.is_scale() {
            let (b, parent) = self.spline_pair(s, block).expect("scale block");
            let factor = (-(values[0] - b.log_lambda) / 2.0).exp();
            let centre: Vec<f64> =
                parent.map_or_else(|| vec![0.0; b.nonlinear.len()], <[f64]>::to_vec);
            let target = self.spline_mut(s, block);
            for (x, c) in target.nonlinear.iter_mut().zip(&centre) {
                *x = c + (*x - c) * factor;
            }
            target.log_lambda = values[0];
            return;
        }
        if !block.is_spline() {
            s.set_block(block, values);
            return;
        }
        let (b, parent) = self.spline_pair(s, block).expect("spline block");
        let lambda = b.lambda();
        let centre: Vec<f64> = parent.map_or_else(|| vec![0.0; b.nonlinear.len()], <[f64]>::to_vec);
        let w = self.basis.penalty_diag().to_vec();
        let target = self.spline_mut(s, block);
        let old = target.coefficients();
        target.intercept = values[0];
        target.linear = values[1];
        for (j, x) in target.nonlinear.iter_mut().enumerate() {
            *x = centre[j] + values[j + 2] / (lambda * w[j]).sqrt();
        }
        let delta: Vec<f64> = target
            .coefficients()
            .iter()
            .zip(&old)
            .map(|(a, b)| a - b)
            .collect();
        for child in self.descendants(block) {
            let b = self.spline_mut(s, child);
            b.intercept += delta[0];
            b.linear += delta[1];
            for (x, d) in b.nonlinear.iter_mut().zip(&delta[2..]) {
                *x += d;
            }
        }
    }

    /// Log Jacobian of the sampler coordinates that varies with the block's own value.
    ///
    /// Non-zero only for scale blocks: `-(m / 2) log lambda` for `m` non-linear terms.
    pub fn coordinate_log_jacobian(&self, block: BlockId, s: &ModelState) -> f64 {
        if !block.is_scale() {
            return 0.0;
        }
        let (b, _) = self.spline_pair(s, block).expect("scale block");
        -0.5 * b.nonlinear.len() as f64 * b.log_lambda
    }

    /// Raw values touched by [`Model::set_coordinates`]: the block itself, the
    /// non-linear coefficients for scale blocks and the nested curves for
    /// region and super-region blocks.
    pub fn save_raw(&self, s: &ModelState, block: BlockId, out: &mut Vec<f64>) {
        s.get_block(block, out);
        if block.is_scale() {
            let (b, _) = self.spline_pair(s, block).expect("scale block");
            out.extend_from_slice(&b.nonlinear);
        }
        for child in self.descendants(block) {
            self.spline_mut_ref(s, child).write_coefficients(out);
        }
    }

    pub fn restore_raw(&self, s: &mut ModelState, block: BlockId, saved: &[f64]) {
        if block.is_scale() {
            s.set_block(block, &saved[..1]);
            self.spline_mut(s, block)
                .nonlinear
                .copy_from_slice(&saved[1..]);
            return;
        }
        if !block.is_spline() {
            s.set_block(block, saved);
            return;
        }
        let width = self.basis.k() + 1;
        s.set_block(block, &saved[..width]);
        for (i, child) in self.descendants(block).into_iter().enumerate() {
            s.set_block(child, &saved[(i + 1) * width..(i + 2) * width]);
        }
    }
}
