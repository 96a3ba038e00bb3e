//! Back-projection of a screen mask onto the Gaussians that produced it.

use serde::{Deserialize, Serialize};
use splathead_core::{record_contributions, Camera, GaussianSet, PixelMask};

use crate::error::Result;

/// Per-Gaussian influence over a pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Influence {
    /// `wᵢ = Σ_{p∈M} αᵢ(p)·Tᵢ(p)`.
    pub weights: Vec<f64>,
    /// Largest transmittance in front of the Gaussian over the masked pixels
    /// it reached; 0 when it reached none.
    pub front_transmittance: Vec<f32>,
    /// `Σ_{p∈M} (1 − T_final(p))`, the composited opacity over the mask.
    pub mask_opacity: f64,
}

impl Influence {
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Accumulates every logged opacity–transmittance product per Gaussian.
pub fn compute_influence_weights(set: &GaussianSet, camera: &Camera, mask: &PixelMask) -> Result<Influence> {
    let log = record_contributions(set, camera, mask)?;
    let mut weights = vec![0.0f64; set.len()];
    let mut front_transmittance = vec![0.0f32; set.len()];
    let mut mask_opacity = 0.0;
    for pixel in &log.pixels {
        let mut t_final = 1.0f64;
        for c in &pixel.entries {
            let i = c.gaussian as usize;
            weights[i] += c.alpha as f64 * c.transmittance as f64;
            front_transmittance[i] = front_transmittance[i].max(c.transmittance);
            t_final = c.transmittance as f64 * (1.0 - c.alpha as f64);
        }
        mask_opacity += 1.0 - t_final;
    }
    Ok(Influence { weights, front_transmittance, mask_opacity })
}

/// Thresholds for keeping a Gaussian as edited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionStrategy {
    /// Fraction of the largest weight a Gaussian must reach.
    pub relative: f64,
    /// Absolute weight floor, so a near-empty mask selects nothing.
    pub floor: f64,
    /// A Gaussian must have been seen through at least this much
    /// transmittance somewhere in the mask; filters back-face leakage.
    pub min_transmittance: f32,
}

impl Default for SelectionStrategy {
    fn default() -> Self {
        Self { relative: 0.05, floor: 1e-4, min_transmittance: 0.01 }
    }
}

/// Indices, ascending, of the Gaussians with significant front-facing weight.
pub fn select_edited_gaussians(influence: &Influence, strategy: &SelectionStrategy) -> Vec<usize> {
    let threshold = (strategy.relative * influence.max_weight()).max(strategy.floor);
    influence
        .weights
        .iter()
        .zip(&influence.front_transmittance)
        .enumerate()
        .filter(|(_, (w, t))| **w > 0.0 && **w >= threshold && **t > strategy.min_transmittance)
        .map(|(i, _)| i)
        .collect()
}
