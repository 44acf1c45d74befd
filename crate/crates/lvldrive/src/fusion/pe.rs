//! Sinusoidal 3D positional embeddings for reference points, LiDAR point
//! locations, and depth-distribution-weighted pixel rays.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor2D;
use super::FusionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeConfig {
    /// Frequency bands per axis; each contributes a sin and a cos entry.
    pub bands: usize,
    /// Output embedding width. Must satisfy 6 * bands <= out_dim; the tail
    /// is zero-padded when the inequality is strict.
    pub out_dim: usize,
    pub temperature: f64,
    /// Depth bins for pixel embeddings.
    pub depth_bins: usize,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl PeConfig {
    pub fn for_dim(out_dim: usize) -> Self {
        PeConfig {
            bands: out_dim / 6,
            out_dim,
            temperature: 1000.0,
            depth_bins: 8,
            depth_min: 1.0,
            depth_max: 60.0,
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if self.bands == 0 || 6 * self.bands > self.out_dim {
            return Err(FusionError::Config(format!(
                "pe config needs 0 < 6*bands <= out_dim, got bands={} out_dim={}",
                self.bands, self.out_dim
            )));
        }
        if self.depth_bins == 0 || self.depth_max <= self.depth_min {
            return Err(FusionError::Config("bad depth bin configuration".into()));
        }
        Ok(())
    }

    pub fn depth_at(&self, bin: usize) -> f64 {
        let step = (self.depth_max - self.depth_min) / self.depth_bins as f64;
        self.depth_min + (bin as f64 + 0.5) * step
    }
}

/// Per-axis interleaved sin/cos at geometric frequencies, concatenated over
/// x, y, z; zero padding fills any remaining columns.
pub fn pe_3d(points: &[[f64; 3]], cfg: &PeConfig) -> Result<Tensor2D, FusionError> {
    cfg.validate()?;
    let mut out = Tensor2D::zeros(points.len(), cfg.out_dim);
    for (i, p) in points.iter().enumerate() {
        let mut col = 0;
        for axis in 0..3 {
            for b in 0..cfg.bands {
                let freq = cfg.temperature.powf(-(b as f64) / cfg.bands as f64);
                let v = p[axis] * freq;
                *out.at_mut(i, col) = v.sin();
                *out.at_mut(i, col + 1) = v.cos();
                col += 2;
            }
        }
    }
    Ok(out)
}

/// A pixel token's viewing ray in the shared 3D frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
}

/// Probability-accumulation pixel embedding: for each token, the expectation
/// over depth bins of the 3D embedding of the ray point at that depth.
///
/// A one-hot distribution reduces exactly to `pe_3d` of the selected point.
pub fn pixel_pe(
    rays: &[Ray],
    depth_dist: &Tensor2D,
    cfg: &PeConfig,
) -> Result<Tensor2D, FusionError> {
    cfg.validate()?;
    if depth_dist.rows != rays.len() || depth_dist.cols != cfg.depth_bins {
        return Err(FusionError::Config(format!(
            "depth distribution shape {}x{} does not match {} rays x {} bins",
            depth_dist.rows, depth_dist.cols, rays.len(), cfg.depth_bins
        )));
    }
    for i in 0..depth_dist.rows {
        let row = depth_dist.row(i);
        if row.iter().any(|&p| p < 0.0) {
            return Err(FusionError::Domain(format!(
                "depth distribution row {i} has a negative entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(FusionError::Domain(format!(
                "depth distribution row {i} sums to {sum}, expected 1"
            )));
        }
    }
    let mut out = Tensor2D::zeros(rays.len(), cfg.out_dim);
    for d in 0..cfg.depth_bins {
        let depth = cfg.depth_at(d);
        let points: Vec<[f64; 3]> = rays
            .iter()
            .map(|r| {
                [
                    r.origin[0] + r.dir[0] * depth,
                    r.origin[1] + r.dir[1] * depth,
                    r.origin[2] + r.dir[2] * depth,
                ]
            })
            .collect();
        let pe = pe_3d(&points, cfg)?;
        for i in 0..rays.len() {
            let p = depth_dist.at(i, d);
            for j in 0..cfg.out_dim {
                *out.at_mut(i, j) += p * pe.at(i, j);
            }
        }
    }
    Ok(out)
}
