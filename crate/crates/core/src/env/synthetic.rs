use crate::env::{ctu_rate_unchecked, encode_with, EncodeOutcome, Environment, QpMap, VideoModel, QP_MAX};
use crate::error::Result;
use crate::mode::{expand_mode, partition_regions, ModeSelection, ModeSpace, RegionPartition};

const QP_LEVELS: usize = QP_MAX as usize + 1;

/// Analytic environment over a [`VideoModel`].
///
/// Per-CTU rates and local degradations are tabulated for every legal QP at
/// construction, so `evaluate` is a handful of lookups; results are
/// bit-identical to [`crate::env::encode`].
#[derive(Clone, Debug)]
pub struct SyntheticEnv {
    model: VideoModel,
    space: ModeSpace,
    partition: RegionPartition,
    rates: Vec<f64>,
    damage: Vec<f64>,
}

impl SyntheticEnv {
    pub fn new(model: VideoModel, space: ModeSpace) -> Result<Self> {
        space.validate_for(&model)?;
        let partition = partition_regions(&model, &space);
        let n = model.ctus_per_frame();
        let mut rates = Vec::with_capacity(model.num_frames() * n * QP_LEVELS);
        let mut damage = Vec::with_capacity(rates.capacity());
        for frame in model.frames() {
            for ctu in &frame.ctus {
                for q in 0..=QP_MAX {
                    rates.push(ctu_rate_unchecked(ctu, q, frame.is_intra, model.intra_factor()));
                    damage.push(ctu.degradation(q));
                }
            }
        }
        Ok(SyntheticEnv {
            model,
            space,
            partition,
            rates,
            damage,
        })
    }

    pub fn model(&self) -> &VideoModel {
        &self.model
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    pub fn partition(&self) -> &RegionPartition {
        &self.partition
    }

    pub fn expand(&self, mode: &ModeSelection) -> Result<QpMap> {
        expand_mode(mode, &self.model, &self.space, &self.partition)
    }

    /// Encodes an arbitrary QP map (used by the baselines, which leave the
    /// simplified mode space).
    pub fn encode_qp_map(&self, qp_map: &QpMap) -> Result<EncodeOutcome> {
        qp_map.check_against(&self.model)?;
        let n = self.model.ctus_per_frame();
        let idx = |t: usize, i: usize, q: i32| (t * n + i) * QP_LEVELS + q as usize;
        Ok(encode_with(
            &self.model,
            qp_map,
            |t, i, q| self.rates[idx(t, i, q)],
            |t, i, q| self.damage[idx(t, i, q)],
        ))
    }
}

impl Environment for SyntheticEnv {
    fn evaluate(&self, mode: &ModeSelection) -> Result<EncodeOutcome> {
        let map = self.expand(mode)?;
        self.encode_qp_map(&map)
    }

    fn ref_rate(&self) -> f64 {
        self.model.ref_rate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{encode, gen_model, GenSpec};
    use crate::mode::enumerate_modes;

    #[test]
    fn tables_match_direct_encode_bitwise() {
        let model = gen_model(3, &GenSpec::default()).unwrap();
        let env = SyntheticEnv::new(model.clone(), ModeSpace::default()).unwrap();
        for mode in enumerate_modes(env.space()).iter().step_by(37) {
            let map = env.expand(mode).unwrap();
            assert_eq!(env.evaluate(mode).unwrap(), encode(&model, &map).unwrap());
        }
    }

    #[test]
    fn offsets_must_match_gop() {
        let model = gen_model(3, &GenSpec::default()).unwrap();
        let space = ModeSpace {
            gop_offsets: vec![2],
            ..ModeSpace::default()
        };
        assert!(SyntheticEnv::new(model, space).is_err());
    }
}
