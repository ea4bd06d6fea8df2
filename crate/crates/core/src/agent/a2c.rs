//! Advantage actor–critic update.
//!
//! For a batch of terminal-reward episodes, step `k` of an `n`-step episode
//! with reward `R` has return `G = γ^{n−1−k} R` and advantage `A = G − V(s)`.
//! The loss is the mean over all steps of
//!
//! ```text
//! −log π(a|s) · A  +  ½ (G − V(s))²  −  β · H(π(·|s))
//! ```
//!
//! with `A` treated as a constant. Gradients are exact; steps that share a
//! state are backpropagated once with their output gradients summed.

use crate::agent::nn::Mlp;
use crate::agent::optim::Optimizer;
use crate::agent::policy::{softmax, AgentPolicy};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub reward: f64,
}

impl Trajectory {
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        let n = self.steps.len();
        (0..n).map(|k| gamma.powi((n - 1 - k) as i32) * self.reward).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateParams {
    pub gamma: f64,
    pub entropy_coef: f64,
}

/// Batch means of the loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub mean_reward: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub actor: Mlp,
    pub critic: Mlp,
}

struct Group<'a> {
    state: &'a [f64],
    actor_trace: Vec<Vec<f64>>,
    critic_trace: Vec<Vec<f64>>,
    probs: Vec<f64>,
    d_logits: Vec<f64>,
    d_value: f64,
}

fn check_batch(policy: &AgentPolicy, batch: &[Trajectory]) -> Result<usize> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let mut steps = 0;
    for t in batch {
        if t.steps.is_empty() {
            return Err(Error::InvalidParameter("trajectory without steps".into()));
        }
        for s in &t.steps {
            if s.state.len() != policy.state_width() {
                return Err(Error::Dimension(format!(
                    "state has {} entries, policy expects {}",
                    s.state.len(),
                    policy.state_width()
                )));
            }
            if s.action >= policy.num_actions() {
                return Err(Error::InvalidParameter(format!("action {} out of range", s.action)));
            }
        }
        steps += t.steps.len();
    }
    Ok(steps)
}

/// Loss and its output-layer gradients, grouped by distinct state.
/// `advantages` overrides `G − V(s)` (flattened in step order) so the loss
/// can be probed with the advantage held fixed.
fn evaluate<'a>(
    policy: &AgentPolicy,
    batch: &'a [Trajectory],
    gamma: f64,
    entropy_coef: f64,
    advantages: Option<&[f64]>,
) -> Result<(Vec<Group<'a>>, LossReport)> {
    let n_steps = check_batch(policy, batch)?;
    if let Some(a) = advantages {
        if a.len() != n_steps {
            return Err(Error::Dimension("advantage override length".into()));
        }
    }
    let scale = 1.0 / n_steps as f64;
    let mut groups: Vec<Group<'a>> = Vec::new();
    let mut report = LossReport {
        steps: n_steps,
        ..LossReport::default()
    };
    let mut flat = 0;
    for traj in batch {
        report.mean_reward += traj.reward / batch.len() as f64;
        for (step, g) in traj.steps.iter().zip(traj.returns(gamma)) {
            let idx = match groups.iter().position(|grp| grp.state == step.state.as_slice()) {
                Some(i) => i,
                None => {
                    let actor_trace = policy.actor.forward_trace(&step.state);
                    let critic_trace = policy.critic.forward_trace(&step.state);
                    let probs = softmax(actor_trace.last().unwrap());
                    groups.push(Group {
                        state: &step.state,
                        d_logits: vec![0.0; probs.len()],
                        probs,
                        actor_trace,
                        critic_trace,
                        d_value: 0.0,
                    });
                    groups.len() - 1
                }
            };
            let grp = &mut groups[idx];
            let value = grp.critic_trace.last().unwrap()[0];
            let adv = advantages.map_or(g - value, |a| a[flat]);
            flat += 1;
            let log_probs: Vec<f64> = grp.probs.iter().map(|p| p.ln()).collect();
            let entropy: f64 = -grp.probs.iter().zip(&log_probs).map(|(p, l)| p * l).sum::<f64>();
            let policy_term = -log_probs[step.action] * adv;
            let value_term = 0.5 * (g - value) * (g - value);
            report.policy += scale * policy_term;
            report.value += scale * value_term;
            report.entropy += scale * entropy;
            for (k, d) in grp.d_logits.iter_mut().enumerate() {
                let indicator = if k == step.action { 1.0 } else { 0.0 };
                let p = grp.probs[k];
                *d += scale * (-adv * (indicator - p) + entropy_coef * p * (log_probs[k] + entropy));
            }
            grp.d_value += scale * (value - g);
        }
    }
    report.total = report.policy + report.value - entropy_coef * report.entropy;
    if !report.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "policy {} value {} entropy {} over {} steps",
            report.policy, report.value, report.entropy, n_steps
        )));
    }
    Ok((groups, report))
}

/// Batch loss; with `advantages` the policy term uses the given constants.
pub fn a2c_loss(
    policy: &AgentPolicy,
    batch: &[Trajectory],
    gamma: f64,
    entropy_coef: f64,
    advantages: Option<&[f64]>,
) -> Result<LossReport> {
    evaluate(policy, batch, gamma, entropy_coef, advantages).map(|(_, r)| r)
}

/// Advantages `G − V(s)` under the current critic, flattened in step order.
pub fn advantages(policy: &AgentPolicy, batch: &[Trajectory], gamma: f64) -> Result<Vec<f64>> {
    check_batch(policy, batch)?;
    let mut out = Vec::new();
    for t in batch {
        for (s, g) in t.steps.iter().zip(t.returns(gamma)) {
            out.push(g - policy.critic.forward(&s.state)[0]);
        }
    }
    Ok(out)
}

pub fn a2c_gradients(
    policy: &AgentPolicy,
    batch: &[Trajectory],
    gamma: f64,
    entropy_coef: f64,
) -> Result<(Gradients, LossReport)> {
    let (groups, report) = evaluate(policy, batch, gamma, entropy_coef, None)?;
    let mut grads = Gradients {
        actor: policy.actor.zeros_like(),
        critic: policy.critic.zeros_like(),
    };
    for g in &groups {
        policy.actor.backward(&g.actor_trace, &g.d_logits, &mut grads.actor);
        policy.critic.backward(&g.critic_trace, &[g.d_value], &mut grads.critic);
    }
    Ok((grads, report))
}

/// One optimizer step on the batch loss.
pub fn a2c_update(
    policy: &mut AgentPolicy,
    optimizer: &mut Optimizer,
    batch: &[Trajectory],
    params: &UpdateParams,
) -> Result<LossReport> {
    let (grads, report) = a2c_gradients(policy, batch, params.gamma, params.entropy_coef)?;
    optimizer.apply(policy, &grads);
    if !policy.is_finite() {
        return Err(Error::NonFinite("parameters diverged after update".into()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::optim::OptimizerKind;
    use crate::agent::policy::{greedy_action, sample_action, Role};
    use crate::mode::ModeSpace;
    use crate::rng::stream;
    use rand::Rng;

    fn random_policy(seed: u64, hidden: &[usize]) -> AgentPolicy {
        let space = ModeSpace::default();
        let mut rng = stream(seed, 77, 0);
        let mut p = AgentPolicy::new(Role::Parent, &space, hidden, &mut rng);
        p.actor.params_mut().for_each(|w| *w = rng.random::<f64>() - 0.5);
        p.critic.params_mut().for_each(|w| *w = rng.random::<f64>() - 0.5);
        p
    }

    fn random_batch(p: &AgentPolicy, seed: u64, episodes: usize) -> Vec<Trajectory> {
        let mut rng = stream(seed, 78, 0);
        (0..episodes)
            .map(|_| Trajectory {
                steps: (0..2)
                    .map(|_| Step {
                        state: (0..p.state_width()).map(|_| rng.random::<f64>()).collect(),
                        action: rng.random_range(0..p.num_actions()),
                        log_prob: 0.0,
                        value: 0.0,
                    })
                    .collect(),
                reward: rng.random::<f64>() * 2.0 - 1.0,
            })
            .collect()
    }

    #[test]
    fn returns_discount_toward_start() {
        let t = Trajectory {
            steps: vec![
                Step {
                    state: vec![],
                    action: 0,
                    log_prob: 0.0,
                    value: 0.0
                };
                3
            ],
            reward: 2.0,
        };
        assert_eq!(t.returns(1.0), vec![2.0, 2.0, 2.0]);
        assert_eq!(t.returns(0.5), vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn zero_advantage_leaves_only_entropy_gradient() {
        // reward equal to the critic's prediction gives A = 0
        let p = random_policy(1, &[4]);
        let mut batch = random_batch(&p, 2, 1);
        batch[0].steps.truncate(1);
        batch[0].reward = p.critic.forward(&batch[0].steps[0].state)[0];
        let beta = 0.01;
        let (groups, _) = evaluate(&p, &batch, 1.0, beta, None).unwrap();
        let g = &groups[0];
        let h: f64 = -g.probs.iter().map(|q| q * q.ln()).sum::<f64>();
        for (k, d) in g.d_logits.iter().enumerate() {
            let entropy_only = beta * g.probs[k] * (g.probs[k].ln() + h);
            assert!((d - entropy_only).abs() < 1e-15);
        }
        assert!(g.d_value.abs() < 1e-15);
    }

    #[test]
    fn gradients_match_central_differences() {
        let p = random_policy(5, &[3, 3]);
        let batch = random_batch(&p, 6, 3);
        let (grads, _) = a2c_gradients(&p, &batch, 0.9, 0.05).unwrap();
        let adv = advantages(&p, &batch, 0.9).unwrap();
        let h = 1e-5;
        let loss = |q: &AgentPolicy| a2c_loss(q, &batch, 0.9, 0.05, Some(&adv)).unwrap().total;
        for net in 0..2 {
            let analytic: Vec<f64> = if net == 0 {
                grads.actor.params().copied().collect()
            } else {
                grads.critic.params().copied().collect()
            };
            for (k, a) in analytic.iter().enumerate() {
                let mut plus = p.clone();
                let mut minus = p.clone();
                let (pp, mm) = if net == 0 {
                    (&mut plus.actor, &mut minus.actor)
                } else {
                    (&mut plus.critic, &mut minus.critic)
                };
                *pp.params_mut().nth(k).unwrap() += h;
                *mm.params_mut().nth(k).unwrap() -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                assert!(rel < 1e-4, "net {net} param {k}: {a} vs {numeric}");
            }
        }
    }

    #[test]
    fn grouped_states_match_ungrouped_sum() {
        let p = random_policy(8, &[4]);
        let mut batch = random_batch(&p, 9, 4);
        let shared = batch[0].steps[0].state.clone();
        batch[2].steps[0].state = shared.clone();
        batch[3].steps[1].state = shared;
        let (grouped, _) = a2c_gradients(&p, &batch, 1.0, 0.01).unwrap();
        // one-trajectory batches weighted by their share of steps
        let mut sum = p.actor.zeros_like();
        for t in &batch {
            let (g, _) = a2c_gradients(&p, std::slice::from_ref(t), 1.0, 0.01).unwrap();
            sum.axpy(2.0 / 8.0, &g.actor);
        }
        for (a, b) in grouped.actor.params().zip(sum.params()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let mut p = random_policy(1, &[2]);
        let params = UpdateParams {
            gamma: 1.0,
            entropy_coef: 0.0,
        };
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1);
        assert!(a2c_update(&mut p, &mut opt, &[], &params).is_err());
    }

    #[test]
    fn non_finite_reward_aborts() {
        let mut p = random_policy(1, &[2]);
        let mut batch = random_batch(&p, 1, 2);
        batch[1].reward = f64::NAN;
        let params = UpdateParams {
            gamma: 1.0,
            entropy_coef: 0.0,
        };
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1);
        assert!(matches!(
            a2c_update(&mut p, &mut opt, &batch, &params),
            Err(Error::NonFinite(_))
        ));
    }

    fn bandit(kind: OptimizerKind, learning_rate: f64) -> Option<u64> {
        // single-step bandit over the 4 parent actions; arm 2 pays most
        let space = ModeSpace::default();
        let mut policy = AgentPolicy::new(Role::Parent, &space, &[16, 16], &mut stream(3, 0, 0));
        let state = vec![0.5; policy.state_width()];
        let payoff = [0.1, 0.3, 0.6, 0.2];
        let params = UpdateParams {
            gamma: 1.0,
            entropy_coef: 0.01,
        };
        let mut opt = Optimizer::new(kind, learning_rate);
        let mut converged_at = None;
        for it in 0..2000u64 {
            let (probs, value) = policy.forward(&state).unwrap();
            let mut rng = stream(11, 1, it);
            let batch: Vec<Trajectory> = (0..16)
                .map(|_| {
                    let a = sample_action(&probs, rng.random());
                    let noise = 0.1 * (rng.random::<f64>() - 0.5);
                    Trajectory {
                        steps: vec![Step {
                            state: state.clone(),
                            action: a,
                            log_prob: probs[a].ln(),
                            value,
                        }],
                        reward: payoff[a] + noise,
                    }
                })
                .collect();
            a2c_update(&mut policy, &mut opt, &batch, &params).unwrap();
            let (probs, _) = policy.forward(&state).unwrap();
            if greedy_action(&probs) != 2 {
                converged_at = None;
            } else if converged_at.is_none() {
                converged_at = Some(it);
            }
        }
        converged_at
    }

    #[test]
    fn bandit_converges_to_best_arm() {
        assert!(bandit(OptimizerKind::Sgd, 1e-2).is_some());
        assert!(bandit(OptimizerKind::Adam, 1e-3).is_some());
    }
}
