//! Staged (coarse-to-fine) hierarchical training, flat single-agent
//! training, and greedy decoding.
//!
//! An episode is one decision of the GOP mode: two parent steps (QP of frame
//! 1, then frame 2) or `2 × slots` child steps (related ΔQP, unrelated ΔQP per
//! slot), with a single terminal reward. Stage 1 trains the parent with the
//! child fixed at ΔQP = 0; stage 2 freezes the parent at its greedy choice and
//! trains the child. Rollout `e` of iteration `i` draws from RNG stream
//! `i · batch_size + e` of the role's rollout domain, so parallel and
//! sequential rollouts are bit-identical.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::a2c::{a2c_update, Step, Trajectory, UpdateParams};
use crate::agent::optim::{Optimizer, OptimizerKind};
use crate::agent::policy::{greedy_action, sample_action, AgentPolicy, Role, DEFAULT_HIDDEN};
use crate::agent::reward::{calibrate_alpha, raw_reward, CalibrationTarget};
use crate::agent::state::{build_state, steps_for, StateVector};
use crate::env::{Environment, SyntheticEnv, VideoModel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mode::{enumerate_modes, ModeSelection, ModeSpace, RegionDelta};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Updates per stage.
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_parent: f64,
    pub lr_child: f64,
    pub gamma: f64,
    pub entropy_coef: f64,
    pub optimizer: OptimizerKind,
    pub lambda: f64,
    pub calibration_samples: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub parallel_rollouts: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 10_000,
            batch_size: 30,
            lr_parent: 1e-3,
            lr_child: 1e-4,
            gamma: 1.0,
            entropy_coef: 0.01,
            optimizer: OptimizerKind::Adam,
            lambda: 0.1,
            calibration_samples: 256,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            parallel_rollouts: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.iterations == 0 || self.batch_size == 0 || self.calibration_samples == 0 {
            return Err(Error::InvalidParameter(
                "iterations, batch_size and calibration_samples must be positive".into(),
            ));
        }
        if !positive(self.lr_parent) || !positive(self.lr_child) {
            return Err(Error::InvalidParameter("learning rates must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter("gamma must lie in (0, 1]".into()));
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) || !self.lambda.is_finite() || self.lambda < 0.0
        {
            return Err(Error::InvalidParameter(
                "entropy_coef and lambda must be non-negative".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidParameter("hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Environment encodes consumed by [`train_hierarchical`].
    pub fn hierarchical_encodes(&self) -> u64 {
        2 * (self.calibration_samples as u64 + (self.iterations * self.batch_size) as u64)
    }

    /// Flat-RL configuration whose encode budget matches hierarchical
    /// training (rounded down to whole batches).
    pub fn matched_flat(&self) -> TrainConfig {
        let rollout_budget = self.hierarchical_encodes() - self.calibration_samples as u64;
        TrainConfig {
            iterations: (rollout_budget / self.batch_size as u64) as usize,
            ..self.clone()
        }
    }

    fn exec(&self) -> Exec {
        if self.parallel_rollouts {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Environment, the model its states are built from, and the action space.
#[derive(Clone, Copy)]
pub struct Scenario<'a> {
    pub env: &'a dyn Environment,
    pub model: &'a VideoModel,
    pub space: &'a ModeSpace,
}

impl<'a> Scenario<'a> {
    pub fn synthetic(env: &'a SyntheticEnv) -> Self {
        Scenario {
            env,
            model: env.model(),
            space: env.space(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub stage: Role,
    pub iteration: usize,
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Cumulative environment encodes, calibration included.
    pub encodes: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str = "stage,iteration,mean_reward,policy_loss,value_loss,entropy,encodes";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.stage, r.iteration, r.mean_reward, r.policy_loss, r.value_loss, r.entropy, r.encodes
            );
        }
        out
    }

    pub fn total_encodes(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.encodes)
    }
}

/// Decision process of one role on one scenario.
struct RoleTask<'a> {
    scenario: Scenario<'a>,
    role: Role,
    lambda: f64,
    parent_choice: Option<[i32; 2]>,
    joint_modes: Vec<ModeSelection>,
}

impl<'a> RoleTask<'a> {
    fn new(scenario: Scenario<'a>, role: Role, lambda: f64, parent_choice: Option<[i32; 2]>) -> Self {
        let joint_modes = if role == Role::Flat {
            enumerate_modes(scenario.space)
        } else {
            Vec::new()
        };
        RoleTask {
            scenario,
            role,
            lambda,
            parent_choice,
            joint_modes,
        }
    }

    fn steps(&self) -> usize {
        steps_for(self.role, self.scenario.space)
    }

    fn alphabet_len(&self) -> usize {
        match self.role {
            Role::Parent => self.scenario.space.frame_qp_set.len(),
            Role::Child => self.scenario.space.delta_qp_set.len(),
            Role::Flat => self.joint_modes.len(),
        }
    }

    /// `states[k][prev]`: the state of step `k` after action `prev` (one entry for k = 0).
    fn states(&self) -> Result<Vec<Vec<StateVector>>> {
        let s = self.scenario;
        (0..self.steps())
            .map(|k| {
                if k == 0 {
                    Ok(vec![build_state(
                        s.model,
                        s.space,
                        self.role,
                        0,
                        None,
                        self.parent_choice,
                        self.lambda,
                    )?])
                } else {
                    (0..self.alphabet_len())
                        .map(|prev| {
                            build_state(
                                s.model,
                                s.space,
                                self.role,
                                k,
                                Some(prev),
                                self.parent_choice,
                                self.lambda,
                            )
                        })
                        .collect()
                }
            })
            .collect()
    }

    fn mode(&self, actions: &[usize]) -> ModeSelection {
        let space = self.scenario.space;
        match self.role {
            Role::Parent => space.identity_child(space.frame_qp_set[actions[0]], space.frame_qp_set[actions[1]]),
            Role::Child => ModeSelection {
                frame_qps: self.parent_choice.expect("child task has a parent choice"),
                deltas: actions
                    .chunks(2)
                    .map(|c| RegionDelta {
                        related: space.delta_qp_set[c[0]],
                        unrelated: space.delta_qp_set[c[1]],
                    })
                    .collect(),
            },
            Role::Flat => self.joint_modes[actions[0]].clone(),
        }
    }

    fn check_policy(&self, policy: &AgentPolicy) -> Result<()> {
        if policy.role != self.role {
            return Err(Error::InvalidParameter(format!(
                "expected a {} policy, got {}",
                self.role, policy.role
            )));
        }
        policy.check_compatible(self.scenario.space)
    }

    fn greedy(&self, policy: &AgentPolicy) -> Result<Vec<usize>> {
        self.check_policy(policy)?;
        let states = self.states()?;
        let mut actions: Vec<usize> = Vec::with_capacity(self.steps());
        for (k, row) in states.iter().enumerate() {
            let state = if k == 0 { &row[0] } else { &row[actions[k - 1]] };
            let (probs, _) = policy.forward(state)?;
            actions.push(greedy_action(&probs));
        }
        Ok(actions)
    }

    fn rollout_domain(&self) -> u64 {
        match self.role {
            Role::Parent => rng::DOMAIN_ROLLOUT_PARENT,
            Role::Child => rng::DOMAIN_ROLLOUT_CHILD,
            Role::Flat => rng::DOMAIN_ROLLOUT_FLAT,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn train(
        &self,
        policy: &mut AgentPolicy,
        config: &TrainConfig,
        learning_rate: f64,
        alpha: f64,
        log: &mut TrainingLog,
        encodes: &mut u64,
    ) -> Result<()> {
        self.check_policy(policy)?;
        let states = self.states()?;
        let params = UpdateParams {
            gamma: config.gamma,
            entropy_coef: config.entropy_coef,
        };
        let mut optimizer = Optimizer::new(config.optimizer, learning_rate);
        let domain = self.rollout_domain();
        let exec = config.exec();
        for iteration in 0..config.iterations {
            // the policy is fixed during a batch, so every reachable state is evaluated once
            let dists = states
                .iter()
                .map(|row| row.iter().map(|s| policy.forward(s)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let batch = exec.try_map_range(config.batch_size, |e| {
                let mut rng = rng::stream(config.seed, domain, (iteration * config.batch_size + e) as u64);
                let mut actions = Vec::with_capacity(states.len());
                let mut steps = Vec::with_capacity(states.len());
                for k in 0..states.len() {
                    let slot = if k == 0 { 0 } else { actions[k - 1] };
                    let (probs, value) = &dists[k][slot];
                    let a = sample_action(probs, rng.random::<f64>());
                    steps.push(Step {
                        state: states[k][slot].clone(),
                        action: a,
                        log_prob: probs[a].ln(),
                        value: *value,
                    });
                    actions.push(a);
                }
                let outcome = self.scenario.env.evaluate(&self.mode(&actions))?;
                Ok::<_, Error>(Trajectory {
                    steps,
                    reward: raw_reward(&outcome, self.lambda) - alpha,
                })
            })?;
            *encodes += config.batch_size as u64;
            let report = a2c_update(policy, &mut optimizer, &batch, &params)?;
            log.rows.push(LogRow {
                stage: self.role,
                iteration,
                mean_reward: report.mean_reward,
                policy_loss: report.policy,
                value_loss: report.value,
                entropy: report.entropy,
                encodes: *encodes,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HierarchicalOutcome {
    pub parent: AgentPolicy,
    pub child: AgentPolicy,
    pub log: TrainingLog,
    pub alpha_frame: f64,
    pub alpha_ctu: f64,
    /// Greedy parent QPs the child was trained under.
    pub parent_choice: [i32; 2],
    pub encodes: u64,
}

pub fn train_hierarchical(scenario: Scenario<'_>, config: &TrainConfig) -> Result<HierarchicalOutcome> {
    config.validate()?;
    scenario.space.validate_for(scenario.model)?;
    let space = scenario.space;
    let mut log = TrainingLog::default();
    let mut encodes = 0u64;

    let parent_task = RoleTask::new(scenario, Role::Parent, config.lambda, None);
    let alpha_frame = calibrate_alpha(
        scenario.env,
        space,
        CalibrationTarget::Parent,
        config.lambda,
        config.calibration_samples,
        config.seed,
    )?;
    encodes += config.calibration_samples as u64;
    let mut parent = AgentPolicy::new(
        Role::Parent,
        space,
        &config.hidden,
        &mut rng::stream(config.seed, rng::DOMAIN_INIT_PARENT, 0),
    );
    parent_task.train(
        &mut parent,
        config,
        config.lr_parent,
        alpha_frame,
        &mut log,
        &mut encodes,
    )?;

    let greedy = parent_task.greedy(&parent)?;
    let parent_choice = [space.frame_qp_set[greedy[0]], space.frame_qp_set[greedy[1]]];
    let child_task = RoleTask::new(scenario, Role::Child, config.lambda, Some(parent_choice));
    let alpha_ctu = calibrate_alpha(
        scenario.env,
        space,
        CalibrationTarget::Child {
            frame_qps: parent_choice,
        },
        config.lambda,
        config.calibration_samples,
        config.seed,
    )?;
    encodes += config.calibration_samples as u64;
    let mut child = AgentPolicy::new(
        Role::Child,
        space,
        &config.hidden,
        &mut rng::stream(config.seed, rng::DOMAIN_INIT_CHILD, 0),
    );
    child_task.train(&mut child, config, config.lr_child, alpha_ctu, &mut log, &mut encodes)?;

    Ok(HierarchicalOutcome {
        parent,
        child,
        log,
        alpha_frame,
        alpha_ctu,
        parent_choice,
        encodes,
    })
}

/// Greedy parent QPs under `lambda`.
pub fn greedy_parent(parent: &AgentPolicy, scenario: Scenario<'_>, lambda: f64) -> Result<[i32; 2]> {
    let a = RoleTask::new(scenario, Role::Parent, lambda, None).greedy(parent)?;
    Ok([scenario.space.frame_qp_set[a[0]], scenario.space.frame_qp_set[a[1]]])
}

/// Argmax decoding of both levels; ties go to the lower action index.
pub fn greedy_mode(
    parent: &AgentPolicy,
    child: &AgentPolicy,
    scenario: Scenario<'_>,
    lambda: f64,
) -> Result<ModeSelection> {
    let parent_choice = greedy_parent(parent, scenario, lambda)?;
    let task = RoleTask::new(scenario, Role::Child, lambda, Some(parent_choice));
    let actions = task.greedy(child)?;
    Ok(task.mode(&actions))
}

#[derive(Clone, Debug)]
pub struct FlatOutcome {
    pub policy: AgentPolicy,
    pub log: TrainingLog,
    pub alpha: f64,
    pub encodes: u64,
}

/// Single agent over the joint mode space with one-step episodes; uses
/// `lr_parent` and the CTU-level reward on the full mode.
pub fn train_flat(scenario: Scenario<'_>, config: &TrainConfig) -> Result<FlatOutcome> {
    config.validate()?;
    scenario.space.validate_for(scenario.model)?;
    let task = RoleTask::new(scenario, Role::Flat, config.lambda, None);
    let alpha = calibrate_alpha(
        scenario.env,
        scenario.space,
        CalibrationTarget::Joint,
        config.lambda,
        config.calibration_samples,
        config.seed,
    )?;
    let mut encodes = config.calibration_samples as u64;
    let mut log = TrainingLog::default();
    let mut policy = AgentPolicy::new(
        Role::Flat,
        scenario.space,
        &config.hidden,
        &mut rng::stream(config.seed, rng::DOMAIN_INIT_FLAT, 0),
    );
    task.train(&mut policy, config, config.lr_parent, alpha, &mut log, &mut encodes)?;
    Ok(FlatOutcome {
        policy,
        log,
        alpha,
        encodes,
    })
}

pub fn greedy_flat_mode(policy: &AgentPolicy, scenario: Scenario<'_>, lambda: f64) -> Result<ModeSelection> {
    let task = RoleTask::new(scenario, Role::Flat, lambda, None);
    let actions = task.greedy(policy)?;
    Ok(task.mode(&actions))
}
