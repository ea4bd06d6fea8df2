//! Parameter updates from exact gradients: plain gradient descent or Adam.
//!
//! Adam keeps one first- and second-moment estimate per parameter, actor
//! parameters first, then critic, in [`Mlp::params`](crate::agent::nn::Mlp::params) order.

use serde::{Deserialize, Serialize};

use crate::agent::a2c::Gradients;
use crate::agent::policy::AgentPolicy;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    steps: i32,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer {
            kind,
            learning_rate,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Updates applied so far.
    pub fn steps(&self) -> i32 {
        self.steps
    }

    pub fn apply(&mut self, policy: &mut AgentPolicy, grads: &Gradients) {
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                policy.actor.axpy(-self.learning_rate, &grads.actor);
                policy.critic.axpy(-self.learning_rate, &grads.critic);
            }
            OptimizerKind::Adam => self.adam(policy, grads),
        }
    }

    fn adam(&mut self, policy: &mut AgentPolicy, grads: &Gradients) {
        let n = policy.actor.num_params() + policy.critic.num_params();
        if self.first.len() != n {
            self.first = vec![0.0; n];
            self.second = vec![0.0; n];
        }
        let c1 = 1.0 - ADAM_BETA1.powi(self.steps);
        let c2 = 1.0 - ADAM_BETA2.powi(self.steps);
        let params = policy.actor.params_mut().chain(policy.critic.params_mut());
        let g = grads.actor.params().chain(grads.critic.params());
        for (((p, &g), m), v) in params.zip(g).zip(&mut self.first).zip(&mut self.second) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::policy::Role;
    use crate::mode::ModeSpace;
    use crate::rng::stream;

    fn policy() -> AgentPolicy {
        AgentPolicy::new(Role::Parent, &ModeSpace::default(), &[3], &mut stream(2, 0, 0))
    }

    fn grads_of(p: &AgentPolicy, value: f64) -> Gradients {
        let mut g = Gradients {
            actor: p.actor.zeros_like(),
            critic: p.critic.zeros_like(),
        };
        g.actor
            .params_mut()
            .chain(g.critic.params_mut())
            .for_each(|x| *x = value);
        g
    }

    #[test]
    fn sgd_is_plain_descent() {
        let mut p = policy();
        let before: Vec<f64> = p.actor.params().copied().collect();
        let g = grads_of(&p, 2.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1);
        opt.apply(&mut p, &g);
        for (a, b) in p.actor.params().zip(&before) {
            assert!((a - (b - 0.2)).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // bias correction makes the first step lr · g / (|g| + ε)
        for value in [1e-6, 0.3, -50.0] {
            let mut p = policy();
            let before: Vec<f64> = p.critic.params().copied().collect();
            let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-3);
            let g = grads_of(&p, value);
            opt.apply(&mut p, &g);
            let expected = 1e-3 * value / (value.abs() + ADAM_EPSILON);
            for (a, b) in p.critic.params().zip(&before) {
                assert!(((b - a) - expected).abs() < 1e-15, "{value}");
            }
        }
    }

    #[test]
    fn adam_matches_hand_recurrence() {
        let mut p = policy();
        let start: f64 = *p.actor.params().next().unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01);
        let gs = [0.5, -0.2, 0.1];
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, start);
        for (t, &g) in gs.iter().enumerate() {
            let grads = grads_of(&p, g);
            opt.apply(&mut p, &grads);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let k = t as i32 + 1;
            x -= 0.01 * (m / (1.0 - 0.9f64.powi(k))) / ((v / (1.0 - 0.999f64.powi(k))).sqrt() + 1e-8);
        }
        assert!((p.actor.params().next().unwrap() - x).abs() < 1e-15);
        assert_eq!(opt.steps(), 3);
    }
}
