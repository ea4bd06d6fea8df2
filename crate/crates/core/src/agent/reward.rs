//! Frame- and CTU-level rewards and their zero-centering offsets.

use rand::Rng;

use crate::env::{EncodeOutcome, Environment};
use crate::error::{Error, Result};
use crate::mode::{ModeSelection, ModeSpace, RegionDelta};
use crate::rng;

/// Fidelity minus λ-weighted normalized rate, before the α offset.
pub fn raw_reward(outcome: &EncodeOutcome, lambda: f64) -> f64 {
    outcome.fidelity - lambda * outcome.normalized_rate
}

/// Parent reward; `outcome` comes from the parent mode with a zero child action.
pub fn reward_frame(outcome: &EncodeOutcome, lambda: f64, alpha_f: f64) -> f64 {
    raw_reward(outcome, lambda) - alpha_f
}

/// Child reward; `outcome` comes from the full (parent, child) mode.
pub fn reward_ctu(outcome: &EncodeOutcome, lambda: f64, alpha_c: f64) -> f64 {
    raw_reward(outcome, lambda) - alpha_c
}

/// Semantic RD objective `J_s = (1 − M_s) + λ · normalized rate`.
pub fn objective(outcome: &EncodeOutcome, lambda: f64) -> f64 {
    (1.0 - outcome.fidelity) + lambda * outcome.normalized_rate
}

/// Which modes the calibration sample draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibrationTarget {
    /// Random frame QPs, zero ΔQPs.
    Parent,
    /// Frame QPs fixed to the parent's greedy choice, random ΔQPs.
    Child { frame_qps: [i32; 2] },
    /// Uniform over the joint space.
    Joint,
}

fn random_mode(space: &ModeSpace, target: CalibrationTarget, rng: &mut impl Rng) -> ModeSelection {
    let f = &space.frame_qp_set;
    let frame_qps = match target {
        CalibrationTarget::Child { frame_qps } => frame_qps,
        _ => [f[rng.random_range(0..f.len())], f[rng.random_range(0..f.len())]],
    };
    let deltas = match target {
        CalibrationTarget::Parent => vec![RegionDelta::default(); space.child_slots()],
        _ => (0..space.child_slots())
            .map(|_| {
                let d = &space.delta_qp_set;
                let related = d[rng.random_range(0..d.len())];
                let unrelated = d[rng.random_range(0..d.len())];
                RegionDelta { related, unrelated }
            })
            .collect(),
    };
    ModeSelection { frame_qps, deltas }
}

fn domain(target: CalibrationTarget) -> u64 {
    match target {
        CalibrationTarget::Parent => rng::DOMAIN_CAL_PARENT,
        CalibrationTarget::Child { .. } => rng::DOMAIN_CAL_CHILD,
        CalibrationTarget::Joint => rng::DOMAIN_CAL_FLAT,
    }
}

/// Pre-α rewards of the calibration sample, in draw order.
pub fn calibration_rewards(
    env: &dyn Environment,
    space: &ModeSpace,
    target: CalibrationTarget,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::InvalidParameter("calibration needs at least one sample".into()));
    }
    let mut rng = rng::stream(seed, domain(target), 0);
    (0..samples)
        .map(|_| {
            let mode = random_mode(space, target, &mut rng);
            env.evaluate(&mode).map(|o| raw_reward(&o, lambda))
        })
        .collect()
}

/// Offset that centers the reward of `samples` random modes at zero.
pub fn calibrate_alpha(
    env: &dyn Environment,
    space: &ModeSpace,
    target: CalibrationTarget,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let rewards = calibration_rewards(env, space, target, lambda, samples, seed)?;
    Ok(rewards.iter().sum::<f64>() / rewards.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{gen_model, GenSpec, SyntheticEnv};
    use proptest::prelude::*;

    fn outcome(fidelity: f64, normalized_rate: f64) -> EncodeOutcome {
        EncodeOutcome::from_ctu_rates(vec![vec![normalized_rate * 100.0]], fidelity, 100.0)
    }

    #[test]
    fn rate_term_vanishes_at_zero_lambda() {
        let o = outcome(0.83, 1.7);
        assert_eq!(reward_frame(&o, 0.0, 0.0), 0.83);
        assert_eq!(reward_ctu(&o, 0.0, 0.0), 0.83);
    }

    #[test]
    fn direct_arithmetic() {
        let o = outcome(0.9, 0.5);
        assert!((reward_frame(&o, 0.4, 0.6) - 0.1).abs() < 1e-15);
        assert!((reward_ctu(&o, 0.4, 0.6) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn centering_identity() {
        let a = outcome(0.83, 1.7);
        let b = outcome(0.9, 0.5);
        let alpha = (raw_reward(&a, 0.0) + raw_reward(&b, 0.0)) / 2.0;
        let mean = (reward_frame(&a, 0.0, alpha) + reward_frame(&b, 0.0, alpha)) / 2.0;
        assert!(mean.abs() < 1e-15);
    }

    #[test]
    fn identity_child_rewards_coincide() {
        let env = SyntheticEnv::new(gen_model(2, &GenSpec::default()).unwrap(), ModeSpace::default()).unwrap();
        let o = env.evaluate(&env.space().identity_child(27, 32)).unwrap();
        assert_eq!(reward_ctu(&o, 0.3, 0.12), reward_frame(&o, 0.3, 0.12));
    }

    #[test]
    fn calibration_centers_sample() {
        let env = SyntheticEnv::new(gen_model(2, &GenSpec::default()).unwrap(), ModeSpace::default()).unwrap();
        for target in [
            CalibrationTarget::Parent,
            CalibrationTarget::Child { frame_qps: [22, 27] },
            CalibrationTarget::Joint,
        ] {
            let alpha = calibrate_alpha(&env, env.space(), target, 0.4, 256, 9).unwrap();
            let rewards = calibration_rewards(&env, env.space(), target, 0.4, 256, 9).unwrap();
            let mean = rewards.iter().map(|r| r - alpha).sum::<f64>() / 256.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_alpha() {
        let env = SyntheticEnv::new(gen_model(2, &GenSpec::default()).unwrap(), ModeSpace::default()).unwrap();
        let r = calibration_rewards(&env, env.space(), CalibrationTarget::Parent, 0.1, 1, 3).unwrap();
        assert_eq!(
            calibrate_alpha(&env, env.space(), CalibrationTarget::Parent, 0.1, 1, 3).unwrap(),
            r[0]
        );
        assert!(calibrate_alpha(&env, env.space(), CalibrationTarget::Parent, 0.1, 0, 3).is_err());
    }

    #[test]
    fn seeds_reproduce() {
        let env = SyntheticEnv::new(gen_model(2, &GenSpec::default()).unwrap(), ModeSpace::default()).unwrap();
        let t = CalibrationTarget::Joint;
        let a1 = calibrate_alpha(&env, env.space(), t, 0.4, 16, 1).unwrap();
        let a2 = calibrate_alpha(&env, env.space(), t, 0.4, 16, 2).unwrap();
        assert_ne!(a1, a2);
        assert_eq!(a1, calibrate_alpha(&env, env.space(), t, 0.4, 16, 1).unwrap());
        assert_eq!(a2, calibrate_alpha(&env, env.space(), t, 0.4, 16, 2).unwrap());
    }

    #[test]
    fn parent_calibration_uses_zero_deltas() {
        let space = ModeSpace::default();
        let mut rng = rng::stream(0, 0, 0);
        for _ in 0..50 {
            let m = random_mode(&space, CalibrationTarget::Parent, &mut rng);
            assert_eq!(m.deltas, vec![RegionDelta::default()]);
            let m = random_mode(&space, CalibrationTarget::Child { frame_qps: [32, 37] }, &mut rng);
            assert_eq!(m.frame_qps, [32, 37]);
        }
    }

    proptest! {
        #[test]
        fn uncentered_reward_non_increasing_in_lambda(f in 0.0f64..1.0, r in 0.01f64..5.0, l1 in 0.0f64..10.0, dl in 0.0f64..10.0) {
            let o = outcome(f, r);
            let alpha = 0.37;
            prop_assert!(reward_frame(&o, l1 + dl, alpha) + alpha <= reward_frame(&o, l1, alpha) + alpha);
        }
    }
}
