//! Simplified hierarchical action space.
//!
//! The parent decides the QPs of the first two frames of each GOP; later
//! frames take the second frame's QP plus a fixed offset. The child decides
//! one ΔQP for the semantic-related region (mask ratio ≥ θ) and one for the
//! rest. By default the pair is shared by every frame of the GOP; with
//! [`ChildGranularity::PerDecidedFrame`] each decided frame gets its own pair
//! and the offset frames inherit the second one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{VideoModel, QP_MAX, QP_MIN};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChildGranularity {
    #[default]
    PerGop,
    PerDecidedFrame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeSpace {
    pub frame_qp_set: Vec<i32>,
    pub delta_qp_set: Vec<i32>,
    /// Offsets applied to the second frame's QP for GOP positions 3, 4, ...
    pub gop_offsets: Vec<i32>,
    pub region_threshold: f64,
    pub child_granularity: ChildGranularity,
}

impl Default for ModeSpace {
    fn default() -> Self {
        ModeSpace {
            frame_qp_set: vec![22, 27, 32, 37],
            delta_qp_set: vec![-3, -2, -1, 0, 1, 2, 3],
            gop_offsets: vec![2, 1],
            region_threshold: 0.01,
            child_granularity: ChildGranularity::PerGop,
        }
    }
}

fn strictly_increasing(xs: &[i32]) -> bool {
    !xs.is_empty() && xs.windows(2).all(|w| w[0] < w[1])
}

impl ModeSpace {
    pub fn validate(&self) -> Result<()> {
        if !strictly_increasing(&self.frame_qp_set) || !strictly_increasing(&self.delta_qp_set) {
            return Err(Error::InvalidParameter(
                "action alphabets must be non-empty and strictly increasing".into(),
            ));
        }
        if let Some(&q) = self.frame_qp_set.iter().find(|q| !(QP_MIN..=QP_MAX).contains(*q)) {
            return Err(Error::QpOutOfRange { qp: q });
        }
        // stage-1 training encodes parent modes with an all-zero child action
        if !self.delta_qp_set.contains(&0) {
            return Err(Error::InvalidParameter("delta_qp_set must contain 0".into()));
        }
        if !(0.0..=1.0).contains(&self.region_threshold) {
            return Err(Error::InvalidParameter(format!(
                "region_threshold must lie in [0, 1], got {}",
                self.region_threshold
            )));
        }
        Ok(())
    }

    /// Checks that the offsets cover the model's GOP (`gop_size − 2` entries).
    pub fn validate_for(&self, model: &VideoModel) -> Result<()> {
        self.validate()?;
        let needed = model.gop_size().saturating_sub(2);
        if self.gop_offsets.len() != needed {
            return Err(Error::Dimension(format!(
                "gop_offsets has {} entries, GOP size {} needs {needed}",
                self.gop_offsets.len(),
                model.gop_size()
            )));
        }
        Ok(())
    }

    /// Number of (related, unrelated) ΔQP pairs per mode.
    pub fn child_slots(&self) -> usize {
        match self.child_granularity {
            ChildGranularity::PerGop => 1,
            ChildGranularity::PerDecidedFrame => 2,
        }
    }

    pub fn size(&self) -> u128 {
        let f = self.frame_qp_set.len() as u128;
        let d = self.delta_qp_set.len() as u128;
        f * f * d.pow(2 * self.child_slots() as u32)
    }

    pub fn min_frame_qp(&self) -> i32 {
        self.frame_qp_set[0]
    }

    pub fn max_frame_qp(&self) -> i32 {
        *self.frame_qp_set.last().unwrap()
    }

    pub fn min_delta(&self) -> i32 {
        self.delta_qp_set[0]
    }

    pub fn max_delta(&self) -> i32 {
        *self.delta_qp_set.last().unwrap()
    }

    pub fn frame_qp_index(&self, qp: i32) -> Option<usize> {
        self.frame_qp_set.iter().position(|&q| q == qp)
    }

    pub fn delta_index(&self, dqp: i32) -> Option<usize> {
        self.delta_qp_set.iter().position(|&d| d == dqp)
    }

    /// Mode with the given parent QPs and zero ΔQP everywhere.
    pub fn identity_child(&self, qp_frame1: i32, qp_frame2: i32) -> ModeSelection {
        ModeSelection {
            frame_qps: [qp_frame1, qp_frame2],
            deltas: vec![RegionDelta::default(); self.child_slots()],
        }
    }

    pub fn check_mode(&self, mode: &ModeSelection) -> Result<()> {
        for &q in &mode.frame_qps {
            if self.frame_qp_index(q).is_none() {
                return Err(Error::AlphabetViolation {
                    alphabet: "frame QP",
                    value: q,
                });
            }
        }
        if mode.deltas.len() != self.child_slots() {
            return Err(Error::Dimension(format!(
                "mode has {} ΔQP pairs, space expects {}",
                mode.deltas.len(),
                self.child_slots()
            )));
        }
        for d in &mode.deltas {
            for v in [d.related, d.unrelated] {
                if self.delta_index(v).is_none() {
                    return Err(Error::AlphabetViolation {
                        alphabet: "ΔQP",
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionDelta {
    pub related: i32,
    pub unrelated: i32,
}

/// One complete simplified mode: two frame QPs and the region ΔQP pair(s).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeSelection {
    pub frame_qps: [i32; 2],
    pub deltas: Vec<RegionDelta>,
}

impl ModeSelection {
    pub fn per_gop(qp_frame1: i32, qp_frame2: i32, dqp_related: i32, dqp_unrelated: i32) -> Self {
        ModeSelection {
            frame_qps: [qp_frame1, qp_frame2],
            deltas: vec![RegionDelta {
                related: dqp_related,
                unrelated: dqp_unrelated,
            }],
        }
    }

    pub fn qp_frame1(&self) -> i32 {
        self.frame_qps[0]
    }

    pub fn qp_frame2(&self) -> i32 {
        self.frame_qps[1]
    }

    /// ΔQP pair used by GOP position `k` (0-based).
    fn delta_for_position(&self, k: usize) -> RegionDelta {
        self.deltas[k.min(self.deltas.len() - 1)]
    }
}

/// Canonical mode key, e.g. `f22-27_r-1_u+3`.
pub fn mode_key(mode: &ModeSelection) -> String {
    mode.to_string()
}

impl fmt::Display for ModeSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}-{}", self.frame_qps[0], self.frame_qps[1])?;
        for d in &self.deltas {
            write!(f, "_r{:+}_u{:+}", d.related, d.unrelated)?;
        }
        Ok(())
    }
}

impl FromStr for ModeSelection {
    type Err = Error;

    fn from_str(key: &str) -> Result<Self> {
        let bad = || Error::MalformedModeKey(key.to_string());
        let mut parts = key.split('_');
        let frames = parts.next().and_then(|p| p.strip_prefix('f')).ok_or_else(bad)?;
        let (q1, q2) = frames.split_once('-').ok_or_else(bad)?;
        let parse_qp = |s: &str| -> Result<i32> {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            s.parse().map_err(|_| bad())
        };
        let parse_delta = |s: &str, prefix: char| -> Result<i32> {
            let body = s.strip_prefix(prefix).ok_or_else(bad)?;
            if !(body.starts_with('+') || body.starts_with('-')) {
                return Err(bad());
            }
            body.parse().map_err(|_| bad())
        };
        let frame_qps = [parse_qp(q1)?, parse_qp(q2)?];
        let rest: Vec<&str> = parts.collect();
        if rest.is_empty() || !rest.len().is_multiple_of(2) {
            return Err(bad());
        }
        let deltas = rest
            .chunks(2)
            .map(|c| {
                Ok(RegionDelta {
                    related: parse_delta(c[0], 'r')?,
                    unrelated: parse_delta(c[1], 'u')?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeSelection { frame_qps, deltas })
    }
}

/// Per-frame, per-CTU "semantic-related" flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionPartition(Vec<Vec<bool>>);

impl RegionPartition {
    pub fn flags(&self) -> &[Vec<bool>] {
        &self.0
    }

    pub fn is_related(&self, frame: usize, ctu: usize) -> bool {
        self.0[frame][ctu]
    }

    pub fn related_count(&self) -> usize {
        self.0.iter().flatten().filter(|&&b| b).count()
    }
}

/// A CTU is related iff its mask ratio is at least the threshold.
pub fn partition_regions(model: &VideoModel, space: &ModeSpace) -> RegionPartition {
    RegionPartition(
        model
            .frames()
            .iter()
            .map(|f| f.ctus.iter().map(|c| c.mask_ratio >= space.region_threshold).collect())
            .collect(),
    )
}

/// Expands a simplified mode into the full QP map (clamped to [0, 51]).
pub fn expand_mode(
    mode: &ModeSelection,
    model: &VideoModel,
    space: &ModeSpace,
    partition: &RegionPartition,
) -> Result<crate::env::QpMap> {
    space.check_mode(mode)?;
    if space.gop_offsets.len() + 2 < model.gop_size() {
        return Err(Error::Dimension(format!(
            "gop_offsets too short for GOP size {}",
            model.gop_size()
        )));
    }
    let mut frames = Vec::with_capacity(model.num_frames());
    for gop in model.gop_ranges() {
        for (k, t) in gop.enumerate() {
            let base = match k {
                0 => mode.frame_qps[0],
                1 => mode.frame_qps[1],
                _ => mode.frame_qps[1] + space.gop_offsets[k - 2],
            };
            let delta = mode.delta_for_position(k);
            let row = partition.0[t]
                .iter()
                .map(|&related| {
                    let d = if related { delta.related } else { delta.unrelated };
                    (base + d).clamp(QP_MIN, QP_MAX)
                })
                .collect();
            frames.push(row);
        }
    }
    Ok(crate::env::QpMap::new(frames))
}

/// All modes in lexicographic order over (qp1, qp2, Δ pairs in slot order).
pub fn enumerate_modes(space: &ModeSpace) -> Vec<ModeSelection> {
    let deltas = &space.delta_qp_set;
    let slots = space.child_slots();
    let d = deltas.len();
    let delta_combos = d.pow(2 * slots as u32);
    let mut out = Vec::with_capacity(space.size() as usize);
    for &q1 in &space.frame_qp_set {
        for &q2 in &space.frame_qp_set {
            for combo in 0..delta_combos {
                // most-significant digit first keeps lexicographic order
                let mut digits = vec![0usize; 2 * slots];
                let mut rem = combo;
                for digit in digits.iter_mut().rev() {
                    *digit = rem % d;
                    rem /= d;
                }
                let pairs = digits
                    .chunks(2)
                    .map(|c| RegionDelta {
                        related: deltas[c[0]],
                        unrelated: deltas[c[1]],
                    })
                    .collect();
                out.push(ModeSelection {
                    frame_qps: [q1, q2],
                    deltas: pairs,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tests::{ctu, single_gop};
    use proptest::prelude::*;

    fn mixed_model() -> VideoModel {
        let s = [0.0, 0.005, 0.01, 0.3, 1.0, 0.0, 0.02, 0.009];
        let frames = (0..4)
            .map(|t| {
                (0..4)
                    .map(|i| ctu(100.0, 1.0, s[(t + i) % s.len()], 38.0, 3.0))
                    .collect()
            })
            .collect();
        single_gop(frames, (2, 2), 0.3)
    }

    #[test]
    fn partition_all_background() {
        let model = single_gop(vec![vec![ctu(1.0, 1.0, 0.0, 30.0, 1.0); 4]; 2], (2, 2), 0.0);
        let p = partition_regions(&model, &ModeSpace::default());
        assert_eq!(p.related_count(), 0);
    }

    #[test]
    fn partition_threshold_is_inclusive() {
        let model = single_gop(vec![vec![ctu(1.0, 1.0, 0.01, 30.0, 1.0)]], (1, 1), 0.0);
        let p = partition_regions(&model, &ModeSpace::default());
        assert!(p.is_related(0, 0));
    }

    #[test]
    fn partition_matches_elementwise_comparison() {
        let model = mixed_model();
        let space = ModeSpace::default();
        let p = partition_regions(&model, &space);
        for (t, frame) in model.frames().iter().enumerate() {
            for (i, c) in frame.ctus.iter().enumerate() {
                let expected = c.mask_ratio >= 0.01;
                assert_eq!(p.is_related(t, i), expected, "frame {t} ctu {i}");
            }
        }
    }

    #[test]
    fn identity_child_gives_frame_bases() {
        let model = mixed_model();
        let space = ModeSpace::default();
        let p = partition_regions(&model, &space);
        let map = expand_mode(&ModeSelection::per_gop(27, 37, 0, 0), &model, &space, &p).unwrap();
        let bases = [27, 37, 39, 38];
        for (t, row) in map.frames().iter().enumerate() {
            assert!(row.iter().all(|&q| q == bases[t]), "frame {t}: {row:?}");
        }
    }

    #[test]
    fn region_deltas_applied() {
        let model = mixed_model();
        let space = ModeSpace::default();
        let p = partition_regions(&model, &space);
        let map = expand_mode(&ModeSelection::per_gop(22, 32, -2, 3), &model, &space, &p).unwrap();
        let bases = [22, 32, 34, 33];
        for (t, base) in bases.into_iter().enumerate() {
            for i in 0..4 {
                let d = if p.is_related(t, i) { -2 } else { 3 };
                assert_eq!(map.get(t, i), base + d);
            }
        }
    }

    #[test]
    fn expansion_clamps_to_legal_range() {
        let model = single_gop(vec![vec![ctu(1.0, 1.0, 0.5, 30.0, 1.0)]; 4], (1, 1), 0.0);
        let space = ModeSpace {
            frame_qp_set: vec![1, 51],
            delta_qp_set: vec![-3, 0, 3],
            ..ModeSpace::default()
        };
        let p = partition_regions(&model, &space);
        let map = expand_mode(&ModeSelection::per_gop(51, 51, 3, 3), &model, &space, &p).unwrap();
        assert!(map.frames().iter().flatten().all(|&q| q == 51));
        let map = expand_mode(&ModeSelection::per_gop(1, 1, -3, -3), &model, &space, &p).unwrap();
        assert_eq!(map.get(0, 0), 0);
    }

    #[test]
    fn alphabet_violation_rejected() {
        let model = mixed_model();
        let space = ModeSpace::default();
        let p = partition_regions(&model, &space);
        assert!(matches!(
            expand_mode(&ModeSelection::per_gop(23, 27, 0, 0), &model, &space, &p),
            Err(Error::AlphabetViolation { value: 23, .. })
        ));
        assert!(matches!(
            expand_mode(&ModeSelection::per_gop(22, 27, 0, 5), &model, &space, &p),
            Err(Error::AlphabetViolation { value: 5, .. })
        ));
    }

    #[test]
    fn per_decided_frame_granularity() {
        let model = mixed_model();
        let space = ModeSpace {
            child_granularity: ChildGranularity::PerDecidedFrame,
            ..ModeSpace::default()
        };
        let p = partition_regions(&model, &space);
        let mode = ModeSelection {
            frame_qps: [22, 27],
            deltas: vec![
                RegionDelta {
                    related: -1,
                    unrelated: 1,
                },
                RegionDelta {
                    related: -3,
                    unrelated: 3,
                },
            ],
        };
        let map = expand_mode(&mode, &model, &space, &p).unwrap();
        let bases = [22, 27, 29, 28];
        for (t, base) in bases.into_iter().enumerate() {
            let slot = mode.deltas[t.min(1)];
            for i in 0..4 {
                let d = if p.is_related(t, i) {
                    slot.related
                } else {
                    slot.unrelated
                };
                assert_eq!(map.get(t, i), base + d);
            }
        }
        assert_eq!(space.size(), 4 * 4 * 7u128.pow(4));
    }

    #[test]
    fn default_enumeration() {
        let space = ModeSpace::default();
        let modes = enumerate_modes(&space);
        assert_eq!(modes.len(), 784);
        assert_eq!(modes[0], ModeSelection::per_gop(22, 22, -3, -3));
        assert_eq!(modes[1], ModeSelection::per_gop(22, 22, -3, -2));
        assert_eq!(modes[783], ModeSelection::per_gop(37, 37, 3, 3));
        assert!(modes.windows(2).all(|w| w[0].frame_qps <= w[1].frame_qps));
        let mut sorted = modes.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, modes);
    }

    #[test]
    fn singleton_enumeration() {
        let space = ModeSpace {
            frame_qp_set: vec![30],
            delta_qp_set: vec![0],
            ..ModeSpace::default()
        };
        assert_eq!(enumerate_modes(&space), vec![ModeSelection::per_gop(30, 30, 0, 0)]);
    }

    #[test]
    fn key_format() {
        assert_eq!(mode_key(&ModeSelection::per_gop(22, 27, -1, 3)), "f22-27_r-1_u+3");
        assert_eq!(mode_key(&ModeSelection::per_gop(32, 32, 0, 0)), "f32-32_r+0_u+0");
    }

    #[test]
    fn key_round_trip_all_default_modes() {
        for m in enumerate_modes(&ModeSpace::default()) {
            assert_eq!(mode_key(&m).parse::<ModeSelection>().unwrap(), m);
        }
    }

    #[test]
    fn malformed_keys_rejected() {
        for key in [
            "",
            "f22",
            "f22-27",
            "g22-27_r+0_u+0",
            "f22-27_r0_u+0",
            "f22-27_r+0",
            "f-2-27_r+0_u+0",
            "f22-27_u+0_r+0",
        ] {
            assert!(key.parse::<ModeSelection>().is_err(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn raising_unrelated_delta_never_lowers_qp(q1 in 0usize..4, q2 in 0usize..4, r in 0usize..7, u in 0usize..6) {
            let model = mixed_model();
            let space = ModeSpace::default();
            let p = partition_regions(&model, &space);
            let f = &space.frame_qp_set;
            let d = &space.delta_qp_set;
            let lo = expand_mode(&ModeSelection::per_gop(f[q1], f[q2], d[r], d[u]), &model, &space, &p).unwrap();
            let hi = expand_mode(&ModeSelection::per_gop(f[q1], f[q2], d[r], d[u + 1]), &model, &space, &p).unwrap();
            for (a, b) in lo.frames().iter().flatten().zip(hi.frames().iter().flatten()) {
                prop_assert!(b >= a);
            }
        }

        #[test]
        fn expansion_invariant_to_ctu_order(perm_seed in 0u64..1000) {
            // reversing CTU order within each frame permutes the QP map the same way
            let model = mixed_model();
            let space = ModeSpace::default();
            let mut frames: Vec<Vec<_>> = model.frames().iter().map(|f| f.ctus.clone()).collect();
            let rot = (perm_seed % 4) as usize;
            for f in frames.iter_mut() { f.rotate_left(rot); }
            let permuted = single_gop(frames, (2, 2), 0.3);
            let mode = ModeSelection::per_gop(27, 32, -2, 2);
            let a = expand_mode(&mode, &model, &space, &partition_regions(&model, &space)).unwrap();
            let b = expand_mode(&mode, &permuted, &space, &partition_regions(&permuted, &space)).unwrap();
            for (ra, rb) in a.frames().iter().zip(b.frames()) {
                let mut ra = ra.clone();
                ra.rotate_left(rot);
                prop_assert_eq!(&ra, rb);
            }
        }
    }
}
