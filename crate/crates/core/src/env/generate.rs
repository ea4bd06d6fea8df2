use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{CtuModel, FrameModel, VideoModel};
use crate::error::{Error, Result};
use crate::rng;

/// Parameters for [`gen_model`]. Every `[lo, hi]` pair is a uniform range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub gop_size: usize,
    pub intra_factor: f64,
    pub prop_decay: f64,
    pub complexity: [f64; 2],
    pub rate_sensitivity: [f64; 2],
    /// Fraction of CTUs carrying semantic content; the rest get a mask ratio of exactly 0.
    pub semantic_fraction: f64,
    pub mask_ratio: [f64; 2],
    pub degrade_midpoint: [f64; 2],
    pub degrade_steepness: [f64; 2],
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            frames: 4,
            rows: 4,
            cols: 4,
            gop_size: 4,
            intra_factor: crate::env::DEFAULT_INTRA_FACTOR,
            prop_decay: 0.3,
            complexity: [200.0, 2000.0],
            rate_sensitivity: [0.8, 1.2],
            semantic_fraction: 0.5,
            mask_ratio: [0.05, 1.0],
            degrade_midpoint: [34.0, 46.0],
            degrade_steepness: [2.0, 5.0],
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.rows == 0 || self.cols == 0 || self.gop_size == 0 {
            return Err(Error::InvalidParameter(
                "frames, rows, cols and gop_size must be positive".into(),
            ));
        }
        let ranges = [
            ("complexity", self.complexity, 0.0, false),
            ("rate_sensitivity", self.rate_sensitivity, 0.0, false),
            ("mask_ratio", self.mask_ratio, 0.0, true),
            ("degrade_midpoint", self.degrade_midpoint, f64::NEG_INFINITY, true),
            ("degrade_steepness", self.degrade_steepness, 0.0, false),
        ];
        for (name, [lo, hi], floor, floor_inclusive) in ranges {
            let above_floor = if floor_inclusive { lo >= floor } else { lo > floor };
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && above_floor) {
                return Err(Error::InvalidParameter(format!(
                    "empty or illegal {name} range [{lo}, {hi}]"
                )));
            }
        }
        if self.mask_ratio[1] > 1.0 {
            return Err(Error::InvalidParameter("mask_ratio range exceeds 1".into()));
        }
        if !(0.0..=1.0).contains(&self.semantic_fraction) {
            return Err(Error::InvalidParameter("semantic_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws a synthetic model; deterministic in `(seed, spec)`.
///
/// CTUs are drawn independently in frame-major, raster order. For each CTU
/// the draws are: semantic flag, mask ratio (if semantic), complexity, rate
/// sensitivity, degradation midpoint, degradation steepness.
pub fn gen_model(seed: u64, spec: &GenSpec) -> Result<VideoModel> {
    spec.validate()?;
    let mut rng = rng::stream(seed, rng::DOMAIN_GEN_MODEL, 0);
    let per_frame = spec.rows * spec.cols;
    let frames = (0..spec.frames)
        .map(|t| {
            let ctus = (0..per_frame)
                .map(|_| {
                    let semantic = rng.random::<f64>() < spec.semantic_fraction;
                    let mask_ratio = if semantic {
                        uniform(&mut rng, spec.mask_ratio)
                    } else {
                        0.0
                    };
                    CtuModel {
                        mask_ratio,
                        complexity: uniform(&mut rng, spec.complexity),
                        rate_sensitivity: uniform(&mut rng, spec.rate_sensitivity),
                        degrade_midpoint: uniform(&mut rng, spec.degrade_midpoint),
                        degrade_steepness: uniform(&mut rng, spec.degrade_steepness),
                    }
                })
                .collect();
            FrameModel { ctus, is_intra: t == 0 }
        })
        .collect();
    VideoModel::new(
        frames,
        spec.gop_size,
        (spec.rows, spec.cols),
        spec.intra_factor,
        spec.prop_decay,
    )
}
