//! Codec environments: mode in, per-CTU rates and semantic fidelity out.
//!
//! [`encode`] is the analytic model. Rates follow `c · 2^{κ(QP_REF − q)/6}`
//! (times the intra factor on the first frame). Semantic damage per CTU is a
//! logistic in QP, carried forward from the previous frame through the
//! mask-weighted mean degradation scaled by `prop_decay`, and clipped at 1.
//! Fidelity is one minus the mask-weighted mean damage.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::ModeSelection;

pub mod generate;
pub mod modelfile;
pub mod synthetic;
pub mod trace;

pub use generate::{gen_model, GenSpec};
pub use synthetic::SyntheticEnv;
pub use trace::{load_trace, write_trace, TraceEnv};

pub const QP_MIN: i32 = 0;
pub const QP_MAX: i32 = 51;
/// QP at which a CTU produces exactly its `complexity` bits.
pub const QP_REF: i32 = 32;
/// Guards the mask-weighted means against all-background content.
pub const EPS_MASK: f64 = 1e-9;
pub const DEFAULT_INTRA_FACTOR: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtuModel {
    /// Bits at `QP_REF`.
    pub complexity: f64,
    /// Steepness of the rate curve; 1.0 halves the rate every +6 QP.
    pub rate_sensitivity: f64,
    /// Fraction of semantic (foreground) pixels.
    pub mask_ratio: f64,
    /// QP where local semantic degradation reaches 0.5.
    pub degrade_midpoint: f64,
    pub degrade_steepness: f64,
}

impl CtuModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.complexity.is_finite()
            && self.complexity > 0.0
            && self.rate_sensitivity.is_finite()
            && self.rate_sensitivity > 0.0
            && (0.0..=1.0).contains(&self.mask_ratio)
            && self.degrade_midpoint.is_finite()
            && self.degrade_steepness.is_finite()
            && self.degrade_steepness > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid CTU parameters {self:?}")))
        }
    }

    /// Local semantic degradation `logistic((q − μ)/τ)`.
    pub fn degradation(&self, qp: i32) -> f64 {
        let z = (f64::from(qp) - self.degrade_midpoint) / self.degrade_steepness;
        1.0 / (1.0 + (-z).exp())
    }
}

pub fn check_qp(qp: i32) -> Result<()> {
    if (QP_MIN..=QP_MAX).contains(&qp) {
        Ok(())
    } else {
        Err(Error::QpOutOfRange { qp })
    }
}

/// Bits produced by one CTU at `qp`.
pub fn ctu_rate(ctu: &CtuModel, qp: i32, is_intra: bool, intra_factor: f64) -> Result<f64> {
    check_qp(qp)?;
    Ok(ctu_rate_unchecked(ctu, qp, is_intra, intra_factor))
}

pub(crate) fn ctu_rate_unchecked(ctu: &CtuModel, qp: i32, is_intra: bool, intra_factor: f64) -> f64 {
    let exponent = ctu.rate_sensitivity * f64::from(QP_REF - qp) / 6.0;
    let bits = ctu.complexity * exponent.exp2();
    if is_intra {
        bits * intra_factor
    } else {
        bits
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameModel {
    pub ctus: Vec<CtuModel>,
    pub is_intra: bool,
}

/// Synthetic sequence description: Low-Delay-P GOP structure plus per-CTU
/// rate and semantic parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoModel {
    frames: Vec<FrameModel>,
    gop_size: usize,
    grid: (usize, usize),
    intra_factor: f64,
    prop_decay: f64,
    ref_rate: f64,
}

impl VideoModel {
    pub fn new(
        frames: Vec<FrameModel>,
        gop_size: usize,
        grid: (usize, usize),
        intra_factor: f64,
        prop_decay: f64,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidParameter("model has no frames".into()));
        }
        if gop_size == 0 || grid.0 == 0 || grid.1 == 0 {
            return Err(Error::InvalidParameter(
                "gop size and grid dimensions must be positive".into(),
            ));
        }
        if !(intra_factor.is_finite() && intra_factor >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "intra_factor must be >= 1, got {intra_factor}"
            )));
        }
        if !(0.0..1.0).contains(&prop_decay) {
            return Err(Error::InvalidParameter(format!(
                "prop_decay must lie in [0, 1), got {prop_decay}"
            )));
        }
        let per_frame = grid.0 * grid.1;
        for (t, frame) in frames.iter().enumerate() {
            if frame.ctus.len() != per_frame {
                return Err(Error::Dimension(format!(
                    "frame {t} has {} CTUs, grid needs {per_frame}",
                    frame.ctus.len()
                )));
            }
            if frame.is_intra != (t == 0) {
                return Err(Error::InvalidParameter(
                    "exactly one intra frame, at index 0, is required".into(),
                ));
            }
            frame.ctus.iter().try_for_each(CtuModel::validate)?;
        }
        let ref_rate = frames
            .iter()
            .map(|f| {
                f.ctus
                    .iter()
                    .map(|c| ctu_rate_unchecked(c, QP_REF, f.is_intra, intra_factor))
                    .sum::<f64>()
            })
            .sum();
        Ok(VideoModel {
            frames,
            gop_size,
            grid,
            intra_factor,
            prop_decay,
            ref_rate,
        })
    }

    pub fn frames(&self) -> &[FrameModel] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn gop_size(&self) -> usize {
        self.gop_size
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn ctus_per_frame(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn intra_factor(&self) -> f64 {
        self.intra_factor
    }

    pub fn prop_decay(&self) -> f64 {
        self.prop_decay
    }

    /// Total bits of the whole model at `QP_REF`.
    pub fn ref_rate(&self) -> f64 {
        self.ref_rate
    }

    /// Frame ranges of consecutive GOPs; the last one may be short.
    pub fn gop_ranges(&self) -> Vec<Range<usize>> {
        (0..self.frames.len())
            .step_by(self.gop_size)
            .map(|start| start..(start + self.gop_size).min(self.frames.len()))
            .collect()
    }

    pub fn ctus(&self) -> impl Iterator<Item = &CtuModel> {
        self.frames.iter().flat_map(|f| f.ctus.iter())
    }
}

/// Per-frame, per-CTU QP assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QpMap(Vec<Vec<i32>>);

impl QpMap {
    pub fn new(frames: Vec<Vec<i32>>) -> Self {
        QpMap(frames)
    }

    pub fn uniform(model: &VideoModel, qp: i32) -> Self {
        QpMap(vec![vec![qp; model.ctus_per_frame()]; model.num_frames()])
    }

    pub fn frames(&self) -> &[Vec<i32>] {
        &self.0
    }

    pub fn get(&self, frame: usize, ctu: usize) -> i32 {
        self.0[frame][ctu]
    }

    pub fn into_inner(self) -> Vec<Vec<i32>> {
        self.0
    }

    pub fn check_against(&self, model: &VideoModel) -> Result<()> {
        if self.0.len() != model.num_frames() {
            return Err(Error::Dimension(format!(
                "QP map has {} frames, model has {}",
                self.0.len(),
                model.num_frames()
            )));
        }
        for (t, row) in self.0.iter().enumerate() {
            if row.len() != model.ctus_per_frame() {
                return Err(Error::Dimension(format!(
                    "QP map frame {t} has {} CTUs, model has {}",
                    row.len(),
                    model.ctus_per_frame()
                )));
            }
            row.iter().try_for_each(|&q| check_qp(q))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodeOutcome {
    pub ctu_rates: Vec<Vec<f64>>,
    pub frame_rates: Vec<f64>,
    pub total_rate: f64,
    /// Semantic fidelity M_s in [0, 1].
    pub fidelity: f64,
    pub normalized_rate: f64,
}

impl EncodeOutcome {
    /// Builds an outcome whose frame and total rates are exact sums of `ctu_rates`.
    pub fn from_ctu_rates(ctu_rates: Vec<Vec<f64>>, fidelity: f64, ref_rate: f64) -> Self {
        let frame_rates: Vec<f64> = ctu_rates.iter().map(|r| r.iter().sum()).collect();
        let total_rate = frame_rates.iter().sum::<f64>();
        EncodeOutcome {
            normalized_rate: total_rate / ref_rate,
            ctu_rates,
            frame_rates,
            total_rate,
            fidelity,
        }
    }
}

/// Encodes `qp_map` with the analytic model.
pub fn encode(model: &VideoModel, qp_map: &QpMap) -> Result<EncodeOutcome> {
    qp_map.check_against(model)?;
    Ok(encode_with(
        model,
        qp_map,
        |t, i, q| {
            let frame = &model.frames[t];
            ctu_rate_unchecked(&frame.ctus[i], q, frame.is_intra, model.intra_factor)
        },
        |t, i, q| model.frames[t].ctus[i].degradation(q),
    ))
}

/// Shared accumulation for [`encode`] and the table-backed synthetic
/// environment; both produce bit-identical outcomes given identical
/// per-CTU rate and degradation values.
pub(crate) fn encode_with(
    model: &VideoModel,
    qp_map: &QpMap,
    rate: impl Fn(usize, usize, i32) -> f64,
    degradation: impl Fn(usize, usize, i32) -> f64,
) -> EncodeOutcome {
    let mut ctu_rates = Vec::with_capacity(model.num_frames());
    let mut weighted_damage = 0.0;
    let mut mask_total = 0.0;
    let mut prev_mean = 0.0;
    for (t, frame) in model.frames.iter().enumerate() {
        let qps = &qp_map.0[t];
        let carried = if frame.is_intra {
            0.0
        } else {
            model.prop_decay * prev_mean
        };
        let mut rates = Vec::with_capacity(qps.len());
        let mut frame_num = 0.0;
        let mut frame_den = 0.0;
        for (i, (ctu, &q)) in frame.ctus.iter().zip(qps).enumerate() {
            rates.push(rate(t, i, q));
            let effective = (degradation(t, i, q) + carried).min(1.0);
            frame_num += ctu.mask_ratio * effective;
            frame_den += ctu.mask_ratio;
        }
        prev_mean = frame_num / frame_den.max(EPS_MASK);
        weighted_damage += frame_num;
        mask_total += frame_den;
        ctu_rates.push(rates);
    }
    let fidelity = 1.0 - weighted_damage / mask_total.max(EPS_MASK);
    EncodeOutcome::from_ctu_rates(ctu_rates, fidelity, model.ref_rate)
}

/// Anything that maps a simplified mode to an encode outcome.
pub trait Environment: Send + Sync {
    fn evaluate(&self, mode: &ModeSelection) -> Result<EncodeOutcome>;

    /// Normalization constant for reward rate terms.
    fn ref_rate(&self) -> f64;
}
