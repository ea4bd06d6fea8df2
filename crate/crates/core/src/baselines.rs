//! Comparison methods: fixed-QP anchor, model-inverting rate control,
//! hand-crafted mask-ratio → ΔQP schemes, and flat single-agent RL.
//!
//! The first three act on QP maps directly, bypassing the mode space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{check_qp, ctu_rate, encode, EncodeOutcome, QpMap, VideoModel, QP_MAX, QP_MIN};
use crate::error::{Error, Result};
use crate::metrics::{RdCurve, RdPoint};

pub use crate::agent::train::{greedy_flat_mode, train_flat as train_flat_rl, FlatOutcome};

pub const ANCHOR_QPS: [i32; 4] = [22, 27, 32, 37];

/// Every CTU of every frame at `qp`, without GOP offsets or ΔQP.
pub fn fixed_qp_outcome(model: &VideoModel, qp: i32) -> Result<EncodeOutcome> {
    check_qp(qp)?;
    encode(model, &QpMap::uniform(model, qp))
}

pub fn fixed_qp_sweep(model: &VideoModel, qps: &[i32], label: &str) -> Result<RdCurve> {
    if qps.is_empty() {
        return Err(Error::InvalidParameter("fixed-QP sweep needs at least one QP".into()));
    }
    let points = qps
        .iter()
        .map(|&qp| fixed_qp_outcome(model, qp).and_then(|o| RdPoint::new(o.total_rate, o.fidelity)))
        .collect::<Result<Vec<_>>>()?;
    RdCurve::new(label, points)
}

/// Splits `target_bits` across frames in proportion to their summed
/// complexity, then gives each frame the uniform QP whose predicted rate is
/// closest to its share (ties to the lower QP).
pub fn rate_control_anchor(model: &VideoModel, target_bits: f64) -> Result<(QpMap, EncodeOutcome)> {
    if !(target_bits.is_finite() && target_bits > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target_bits {target_bits} must be positive"
        )));
    }
    let weights: Vec<f64> = model
        .frames()
        .iter()
        .map(|f| f.ctus.iter().map(|c| c.complexity).sum())
        .collect();
    let total_weight: f64 = weights.iter().sum();
    let mut qps = Vec::with_capacity(model.num_frames());
    for (frame, w) in model.frames().iter().zip(&weights) {
        let budget = target_bits * w / total_weight;
        let mut best = (QP_MIN, f64::INFINITY);
        for qp in QP_MIN..=QP_MAX {
            let mut predicted = 0.0;
            for c in &frame.ctus {
                predicted += ctu_rate(c, qp, frame.is_intra, model.intra_factor())?;
            }
            let miss = (predicted - budget).abs();
            if miss < best.1 {
                best = (qp, miss);
            }
        }
        qps.push(vec![best.0; frame.ctus.len()]);
    }
    let map = QpMap::new(qps);
    let outcome = encode(model, &map)?;
    Ok((map, outcome))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Linear,
    Exponential,
    Square,
    Log,
    Sqrt,
}

impl Shape {
    pub const ALL: [Shape; 5] = [
        Shape::Linear,
        Shape::Exponential,
        Shape::Square,
        Shape::Log,
        Shape::Sqrt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Linear => "linear",
            Shape::Exponential => "exponential",
            Shape::Square => "square",
            Shape::Log => "log",
            Shape::Sqrt => "sqrt",
        }
    }

    /// Increasing map of [0, 1] onto itself; `a` bends the exponential and log shapes.
    pub fn weight(self, s: f64, a: f64) -> f64 {
        match self {
            Shape::Linear => s,
            Shape::Exponential => (a * s).exp_m1() / a.exp_m1(),
            Shape::Square => s * s,
            Shape::Log => (a * s).ln_1p() / a.ln_1p(),
            Shape::Sqrt => s.sqrt(),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|shape| shape.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown shape `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandcraftedScheme {
    pub shape: Shape,
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    #[serde(default = "default_span")]
    pub delta_span: i32,
}

fn default_curvature() -> f64 {
    4.0
}

fn default_span() -> i32 {
    3
}

impl HandcraftedScheme {
    pub fn new(shape: Shape) -> Self {
        HandcraftedScheme {
            shape,
            curvature: default_curvature(),
            delta_span: default_span(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.curvature.is_finite() && self.curvature > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "curvature {} must be positive",
                self.curvature
            )));
        }
        if !(1..=QP_MAX).contains(&self.delta_span) {
            return Err(Error::InvalidParameter(format!(
                "delta_span {} outside [1, {QP_MAX}]",
                self.delta_span
            )));
        }
        Ok(())
    }

    /// `round(Δ · (1 − 2 g(S)))`: +Δ at S = 0, −Δ at S = 1.
    pub fn offset(&self, mask_ratio: f64) -> i32 {
        let g = self.shape.weight(mask_ratio, self.curvature);
        (f64::from(self.delta_span) * (1.0 - 2.0 * g)).round() as i32
    }

    pub fn label(&self) -> String {
        format!("handcrafted-{}", self.shape)
    }
}

/// Uniform frame QP with a per-CTU offset from the mask ratio, clamped to the legal range.
pub fn handcrafted_mode(
    model: &VideoModel,
    frame_qp: i32,
    scheme: &HandcraftedScheme,
) -> Result<(QpMap, EncodeOutcome)> {
    check_qp(frame_qp)?;
    scheme.validate()?;
    let map = QpMap::new(
        model
            .frames()
            .iter()
            .map(|f| {
                f.ctus
                    .iter()
                    .map(|c| (frame_qp + scheme.offset(c.mask_ratio)).clamp(QP_MIN, QP_MAX))
                    .collect()
            })
            .collect(),
    );
    let outcome = encode(model, &map)?;
    Ok((map, outcome))
}

pub fn handcrafted_sweep(
    model: &VideoModel,
    frame_qps: &[i32],
    scheme: &HandcraftedScheme,
) -> Result<Vec<(i32, EncodeOutcome)>> {
    frame_qps
        .iter()
        .map(|&qp| handcrafted_mode(model, qp, scheme).map(|(_, o)| (qp, o)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tests::{ctu, single_gop};
    use crate::env::{gen_model, FrameModel, GenSpec};
    use proptest::prelude::*;

    fn homogeneous() -> VideoModel {
        let frames = (0..4)
            .map(|t| FrameModel {
                ctus: vec![ctu(800.0, 1.1, 0.3, 40.0, 3.0); 4],
                is_intra: t == 0,
            })
            .collect();
        VideoModel::new(frames, 4, (2, 2), 1.0, 0.3).unwrap()
    }

    #[test]
    fn anchor_sweep_is_monotone() {
        let m = gen_model(4, &GenSpec::default()).unwrap();
        let c = fixed_qp_sweep(&m, &ANCHOR_QPS, "anchor").unwrap();
        assert_eq!(c.len(), 4);
        let outcomes: Vec<_> = ANCHOR_QPS.iter().map(|&q| fixed_qp_outcome(&m, q).unwrap()).collect();
        for (p, o) in c.points().iter().zip(outcomes.iter().rev()) {
            assert_eq!((p.rate, p.fidelity), (o.total_rate, o.fidelity));
        }
        for w in outcomes.windows(2) {
            assert!(w[0].total_rate > w[1].total_rate && w[0].fidelity >= w[1].fidelity);
        }
        assert_eq!(fixed_qp_sweep(&m, &[30], "one").unwrap().len(), 1);
        assert!(fixed_qp_sweep(&m, &[], "none").is_err());
        assert!(fixed_qp_sweep(&m, &[52], "bad").is_err());
    }

    #[test]
    fn rate_control_fixed_point() {
        let m = homogeneous();
        let target = fixed_qp_outcome(&m, 32).unwrap().total_rate;
        let (map, _) = rate_control_anchor(&m, target).unwrap();
        assert_eq!(map, QpMap::uniform(&m, 32));
    }

    #[test]
    fn rate_control_starved_clamps() {
        let m = gen_model(2, &GenSpec::default()).unwrap();
        let (map, _) = rate_control_anchor(&m, 1e-9).unwrap();
        assert_eq!(map, QpMap::uniform(&m, 51));
        let (map, _) = rate_control_anchor(&m, 1e30).unwrap();
        assert_eq!(map, QpMap::uniform(&m, 0));
        assert!(rate_control_anchor(&m, 0.0).is_err());
    }

    #[test]
    fn rate_control_hand_inversion() {
        // budgets 2000 / 6000; intra frame: 1500·2^((32−q)/6) is 1889.9 at 30 and 2121.3 at 29
        let m = single_gop(
            vec![
                vec![ctu(1000.0, 1.0, 0.5, 40.0, 3.0)],
                vec![ctu(3000.0, 1.0, 0.5, 40.0, 3.0)],
            ],
            (1, 1),
            0.3,
        );
        let (map, out) = rate_control_anchor(&m, 8000.0).unwrap();
        assert_eq!(map.frames(), &[vec![30], vec![26]]);
        assert!((out.frame_rates[1] - 6000.0).abs() < 1e-9);
    }

    #[test]
    fn handcrafted_endpoints_and_midpoint() {
        for shape in Shape::ALL {
            let s = HandcraftedScheme::new(shape);
            assert_eq!(s.offset(0.0), 3, "{shape}");
            assert_eq!(s.offset(1.0), -3, "{shape}");
        }
        assert_eq!(HandcraftedScheme::new(Shape::Linear).offset(0.5), 0);
    }

    #[test]
    fn handcrafted_quarter_mask() {
        // Δ(1 − 2g): square 2.625, sqrt 0, exponential 2.8077, log 0.4159, linear 1.5
        let at = |shape| HandcraftedScheme::new(shape).offset(0.25);
        assert_eq!(at(Shape::Square), 3);
        assert_eq!(at(Shape::Sqrt), 0);
        assert_eq!(at(Shape::Exponential), 3);
        assert_eq!(at(Shape::Log), 0);
        assert_eq!(at(Shape::Linear), 2);
    }

    #[test]
    fn handcrafted_map_is_clamped() {
        let m = gen_model(3, &GenSpec::default()).unwrap();
        let scheme = HandcraftedScheme::new(Shape::Square);
        let (map, _) = handcrafted_mode(&m, 50, &scheme).unwrap();
        map.check_against(&m).unwrap();
        assert!(map.frames().iter().flatten().all(|&q| (47..=51).contains(&q)));
        let (map, _) = handcrafted_mode(&m, 1, &scheme).unwrap();
        assert!(map.frames().iter().flatten().all(|&q| (0..=4).contains(&q)));
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("sqrt".parse::<Shape>().unwrap(), Shape::Sqrt);
        assert!("cubic".parse::<Shape>().is_err());
        let s: HandcraftedScheme = toml::from_str("shape = \"log\"").unwrap();
        assert_eq!(s, HandcraftedScheme::new(Shape::Log));
        assert!(HandcraftedScheme { delta_span: 0, ..s }.validate().is_err());
        assert!(HandcraftedScheme { curvature: 0.0, ..s }.validate().is_err());
    }

    proptest! {
        #[test]
        fn offset_non_increasing_in_mask(a in 0.0f64..=1.0, b in 0.0f64..=1.0, curv in 0.1f64..10.0, span in 1i32..8) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for shape in Shape::ALL {
                let s = HandcraftedScheme { shape, curvature: curv, delta_span: span };
                prop_assert!(s.offset(hi) <= s.offset(lo));
                prop_assert!(s.offset(lo).abs() <= span);
            }
        }
    }
}
