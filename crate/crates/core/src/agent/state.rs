//! Engineered agent states.
//!
//! Layout (all roles):
//!
//! | index            | entry                                                   |
//! |------------------|---------------------------------------------------------|
//! | 0                | mean mask ratio over the window                         |
//! | 1                | max mask ratio over the window                          |
//! | 2                | window complexity share: Σ c / ref_rate                 |
//! | 3                | mean rate sensitivity κ                                 |
//! | 4                | mean degradation midpoint μ / 51                        |
//! | 5                | fraction of semantic-related CTUs                       |
//! | 6 .. 6+S         | one-hot decision step (S = steps of the role)           |
//! | 6+S              | λ_s                                                     |
//! | 7+S              | previous action of this episode, normalized (0 at step 0)|
//! | 8+S, 9+S (child) | parent QPs / 51                                         |
//!
//! The window is three consecutive frames starting at the decided frame
//! (offset 0 or 1 within each GOP), pooled over all GOPs and clipped at the
//! end of the sequence. Previous actions are normalized as QP / 51 for the
//! parent and `index / (|Δ| − 1)` for the child.

use sha2::{Digest, Sha256};

use crate::agent::policy::Role;
use crate::env::{VideoModel, QP_MAX};
use crate::error::{Error, Result};
use crate::mode::ModeSpace;

pub type StateVector = Vec<f64>;

pub const WINDOW: usize = 3;
const CONTENT_FEATURES: usize = 6;

/// Number of sequential decisions one episode of `role` makes.
pub fn steps_for(role: Role, space: &ModeSpace) -> usize {
    match role {
        Role::Parent => 2,
        Role::Child => 2 * space.child_slots(),
        Role::Flat => 1,
    }
}

pub fn state_len(role: Role, space: &ModeSpace) -> usize {
    let parent_entries = if role == Role::Child { 2 } else { 0 };
    CONTENT_FEATURES + steps_for(role, space) + 2 + parent_entries
}

/// Stable digest of the layout, stored in policy files.
pub fn layout_hash(role: Role, space: &ModeSpace) -> String {
    let desc = format!(
        "v1;role={};window={WINDOW};content=mean_s,max_s,c_share,mean_kappa,mean_mu51,related_frac;steps={};lambda;prev;parent_qps={}",
        role.as_str(),
        steps_for(role, space),
        role == Role::Child,
    );
    let digest = Sha256::digest(desc.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn frame_offset(role: Role, step: usize) -> usize {
    match role {
        Role::Parent => step,
        Role::Child => (step / 2).min(1),
        Role::Flat => 0,
    }
}

pub fn build_state(
    model: &VideoModel,
    space: &ModeSpace,
    role: Role,
    step: usize,
    previous_action: Option<usize>,
    parent_choice: Option<[i32; 2]>,
    lambda: f64,
) -> Result<StateVector> {
    let steps = steps_for(role, space);
    if step >= steps {
        return Err(Error::InvalidParameter(format!(
            "step {step} out of range for {steps} steps"
        )));
    }
    if (role == Role::Child) != parent_choice.is_some() {
        return Err(Error::InvalidParameter(
            "parent choice is required for, and only for, the child role".into(),
        ));
    }
    if (step > 0) != previous_action.is_some() {
        return Err(Error::InvalidParameter(
            "previous action is required exactly when step > 0".into(),
        ));
    }
    let offset = frame_offset(role, step);
    let mut n = 0usize;
    let (mut sum_s, mut max_s, mut sum_c, mut sum_k, mut sum_mu, mut related) = (0.0, 0.0f64, 0.0, 0.0, 0.0, 0usize);
    for gop in model.gop_ranges() {
        let start = gop.start + offset;
        let end = (start + WINDOW).min(model.num_frames());
        for frame in model.frames().get(start..end).unwrap_or(&[]) {
            for c in &frame.ctus {
                n += 1;
                sum_s += c.mask_ratio;
                max_s = max_s.max(c.mask_ratio);
                sum_c += c.complexity;
                sum_k += c.rate_sensitivity;
                sum_mu += c.degrade_midpoint;
                related += usize::from(c.mask_ratio >= space.region_threshold);
            }
        }
    }
    let mean = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    let mut state = Vec::with_capacity(state_len(role, space));
    state.extend([
        mean(sum_s),
        max_s,
        sum_c / model.ref_rate(),
        mean(sum_k),
        mean(sum_mu) / f64::from(QP_MAX),
        mean(related as f64),
    ]);
    state.extend((0..steps).map(|k| if k == step { 1.0 } else { 0.0 }));
    state.push(lambda);
    let prev = match (role, previous_action) {
        (_, None) => 0.0,
        (Role::Parent, Some(a)) => {
            let qp = *space
                .frame_qp_set
                .get(a)
                .ok_or_else(|| Error::InvalidParameter(format!("previous action {a} out of range")))?;
            f64::from(qp) / f64::from(QP_MAX)
        }
        (_, Some(a)) => {
            let d = space.delta_qp_set.len();
            if a >= d {
                return Err(Error::InvalidParameter(format!("previous action {a} out of range")));
            }
            if d > 1 {
                a as f64 / (d - 1) as f64
            } else {
                0.0
            }
        }
    };
    state.push(prev);
    if let Some([q1, q2]) = parent_choice {
        state.push(f64::from(q1) / f64::from(QP_MAX));
        state.push(f64::from(q2) / f64::from(QP_MAX));
    }
    if let Some(bad) = state.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("state entry {bad}")));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tests::{ctu, single_gop};
    use crate::env::{gen_model, GenSpec};

    #[test]
    fn deterministic() {
        let model = gen_model(4, &GenSpec::default()).unwrap();
        let space = ModeSpace::default();
        let a = build_state(&model, &space, Role::Child, 1, Some(3), Some([22, 27]), 0.4).unwrap();
        let b = build_state(&model, &space, Role::Child, 1, Some(3), Some([22, 27]), 0.4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), state_len(Role::Child, &space));
    }

    #[test]
    fn background_masks_are_zero() {
        let spec = GenSpec {
            semantic_fraction: 0.0,
            ..GenSpec::default()
        };
        let model = gen_model(4, &spec).unwrap();
        let s = build_state(&model, &ModeSpace::default(), Role::Parent, 0, None, None, 0.1).unwrap();
        assert_eq!(&s[0..2], &[0.0, 0.0]);
        assert_eq!(s[5], 0.0);
    }

    #[test]
    fn hand_computed_vector() {
        // 1 GOP, 4 frames, 2×2; CTU (t, i) has c = 100(t+1), κ = 1, μ = 30 + t,
        // S = 0.1·i for i < 3 and S = 0 for i = 3.
        let frames = (0..4)
            .map(|t| {
                (0..4)
                    .map(|i| {
                        let s = if i < 3 { 0.1 * i as f64 } else { 0.0 };
                        ctu(100.0 * (t + 1) as f64, 1.0, s, 30.0 + t as f64, 2.0)
                    })
                    .collect()
            })
            .collect();
        let model = single_gop(frames, (2, 2), 0.3);
        // ref_rate = 400·1.5 + 800 + 1200 + 1600 = 4200
        assert_eq!(model.ref_rate(), 4200.0);
        let space = ModeSpace::default();
        let s = build_state(&model, &space, Role::Parent, 1, Some(2), None, 0.25).unwrap();
        // window = frames 1..4: mean S = (0.1 + 0.2)·3/12 = 0.075, share = 3600/4200
        let expected = [
            0.075,
            0.2,
            3600.0 / 4200.0,
            1.0,
            32.0 / 51.0,
            6.0 / 12.0,
            0.0,
            1.0,
            0.25,
            32.0 / 51.0,
        ];
        assert_eq!(s.len(), expected.len());
        for (k, (a, b)) in s.iter().zip(expected).enumerate() {
            assert!((a - b).abs() < 1e-15, "entry {k}: {a} vs {b}");
        }
        let c = build_state(&model, &space, Role::Child, 0, None, Some([27, 37]), 0.25).unwrap();
        // child step 0 looks at frames 0..3
        assert!((c[2] - 2400.0 / 4200.0).abs() < 1e-15);
        assert_eq!(&c[c.len() - 2..], &[27.0 / 51.0, 37.0 / 51.0]);
    }

    #[test]
    fn argument_contracts() {
        let model = gen_model(4, &GenSpec::default()).unwrap();
        let space = ModeSpace::default();
        assert!(build_state(&model, &space, Role::Parent, 0, None, Some([22, 22]), 0.1).is_err());
        assert!(build_state(&model, &space, Role::Child, 0, None, None, 0.1).is_err());
        assert!(build_state(&model, &space, Role::Parent, 2, Some(0), None, 0.1).is_err());
        assert!(build_state(&model, &space, Role::Parent, 1, None, None, 0.1).is_err());
        assert!(build_state(&model, &space, Role::Parent, 0, Some(1), None, 0.1).is_err());
    }

    #[test]
    fn child_state_depends_on_parent_choice() {
        let model = gen_model(4, &GenSpec::default()).unwrap();
        let space = ModeSpace::default();
        let a = build_state(&model, &space, Role::Child, 0, None, Some([22, 27]), 0.1).unwrap();
        let b = build_state(&model, &space, Role::Child, 0, None, Some([22, 32]), 0.1).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn window_clips_at_sequence_end() {
        let spec = GenSpec {
            frames: 2,
            gop_size: 4,
            ..GenSpec::default()
        };
        let model = gen_model(4, &spec).unwrap();
        let s = build_state(&model, &ModeSpace::default(), Role::Parent, 1, Some(0), None, 0.1).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
    }
}
