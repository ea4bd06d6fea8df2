//! Exhaustive search of the mode space for the exact minimum of
//! `J = (1 − fidelity) + λ · normalized_rate`.

use std::path::Path;

use crate::agent::reward::objective;
use crate::agent::train::{greedy_mode, Scenario};
use crate::agent::AgentPolicy;
use crate::env::trace::{trace_to_string, write_trace};
use crate::env::{EncodeOutcome, Environment};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mode::{enumerate_modes, mode_key, ModeSelection, ModeSpace};

pub const DEFAULT_SEARCH_CAP: u128 = 1_000_000;

/// Every mode of a space with its outcome, in enumeration order. Outcomes do
/// not depend on λ, so one evaluation serves a whole sweep.
#[derive(Clone, Debug)]
pub struct ModeEvaluations {
    modes: Vec<ModeSelection>,
    outcomes: Vec<EncodeOutcome>,
    ref_rate: f64,
}

pub fn evaluate_space(env: &dyn Environment, space: &ModeSpace, cap: u128, exec: Exec) -> Result<ModeEvaluations> {
    space.validate()?;
    let size = space.size();
    if size > cap {
        return Err(Error::SearchCap { size, cap });
    }
    let modes = enumerate_modes(space);
    let outcomes = exec.try_map(&modes, |m| env.evaluate(m))?;
    Ok(ModeEvaluations {
        modes,
        outcomes,
        ref_rate: env.ref_rate(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub lambda: f64,
    pub best_mode: ModeSelection,
    pub best_objective: f64,
    pub worst_objective: f64,
    /// `(mode_key, J)` in enumeration order, when requested.
    pub table: Option<Vec<(String, f64)>>,
}

impl OracleResult {
    /// Objective range over the whole space.
    pub fn spread(&self) -> f64 {
        self.worst_objective - self.best_objective
    }
}

impl ModeEvaluations {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeSelection, &EncodeOutcome)> {
        self.modes.iter().zip(&self.outcomes)
    }

    /// First minimum in enumeration order wins ties.
    pub fn search(&self, lambda: f64, keep_table: bool) -> Result<OracleResult> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda {lambda} must be non-negative")));
        }
        let mut best = 0;
        let mut best_j = f64::INFINITY;
        let mut worst_j = f64::NEG_INFINITY;
        let mut table = keep_table.then(|| Vec::with_capacity(self.len()));
        for (i, (mode, outcome)) in self.iter().enumerate() {
            let j = objective(outcome, lambda);
            if j < best_j {
                best = i;
                best_j = j;
            }
            worst_j = worst_j.max(j);
            if let Some(t) = table.as_mut() {
                t.push((mode_key(mode), j));
            }
        }
        if self.is_empty() {
            return Err(Error::InvalidParameter("empty mode space".into()));
        }
        Ok(OracleResult {
            lambda,
            best_mode: self.modes[best].clone(),
            best_objective: best_j,
            worst_objective: worst_j,
            table,
        })
    }

    pub fn trace_string(&self) -> String {
        trace_to_string(self.ref_rate, self.iter())
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        write_trace(path, self.ref_rate, self.iter())
    }
}

pub fn exhaustive_search(
    env: &dyn Environment,
    space: &ModeSpace,
    lambda: f64,
    keep_table: bool,
) -> Result<OracleResult> {
    evaluate_space(env, space, DEFAULT_SEARCH_CAP, Exec::default())?.search(lambda, keep_table)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub lambda: f64,
    pub mode: ModeSelection,
    pub objective: f64,
    pub oracle_objective: f64,
    /// `objective − oracle_objective`.
    pub gap: f64,
    /// Gap as a fraction of the oracle's objective spread; 0 when the spread is 0.
    pub relative_gap: f64,
}

pub fn mode_gap(env: &dyn Environment, mode: &ModeSelection, oracle: &OracleResult) -> Result<GapReport> {
    let objective = objective(&env.evaluate(mode)?, oracle.lambda);
    let gap = objective - oracle.best_objective;
    let spread = oracle.spread();
    Ok(GapReport {
        lambda: oracle.lambda,
        mode: mode.clone(),
        objective,
        oracle_objective: oracle.best_objective,
        gap,
        relative_gap: if spread > 0.0 { gap / spread } else { 0.0 },
    })
}

/// Gap of the greedy hierarchical decision.
pub fn policy_gap(
    parent: &AgentPolicy,
    child: &AgentPolicy,
    scenario: Scenario<'_>,
    oracle: &OracleResult,
) -> Result<GapReport> {
    let mode = greedy_mode(parent, child, scenario, oracle.lambda)?;
    mode_gap(scenario.env, &mode, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::policy::Role;
    use crate::env::{gen_model, GenSpec, SyntheticEnv};
    use crate::mode::ChildGranularity;
    use crate::rng;

    fn env(seed: u64) -> SyntheticEnv {
        SyntheticEnv::new(gen_model(seed, &GenSpec::default()).unwrap(), ModeSpace::default()).unwrap()
    }

    #[test]
    fn extreme_lambdas() {
        for seed in 0..3 {
            let e = env(seed);
            let lo = exhaustive_search(&e, e.space(), 0.0, false).unwrap();
            assert_eq!(lo.best_mode, ModeSelection::per_gop(22, 22, -3, -3));
            let hi = exhaustive_search(&e, e.space(), 100.0, false).unwrap();
            assert_eq!(hi.best_mode, ModeSelection::per_gop(37, 37, 3, 3));
        }
    }

    #[test]
    fn matches_independent_double_loop() {
        let e = env(7);
        let s = e.space();
        let lambda = 0.2;
        let r = exhaustive_search(&e, s, lambda, true).unwrap();
        let table = r.table.as_ref().unwrap();
        assert_eq!(table.len(), 784);
        let mut best: Option<(f64, ModeSelection)> = None;
        for &q1 in &s.frame_qp_set {
            for &q2 in &s.frame_qp_set {
                for &dr in &s.delta_qp_set {
                    for &du in &s.delta_qp_set {
                        let m = ModeSelection::per_gop(q1, q2, dr, du);
                        let qp = e.expand(&m).unwrap();
                        let o = crate::env::encode(e.model(), &qp).unwrap();
                        let j = (1.0 - o.fidelity) + lambda * o.total_rate / e.model().ref_rate();
                        if best.as_ref().is_none_or(|(bj, _)| j < *bj) {
                            best = Some((j, m));
                        }
                    }
                }
            }
        }
        let (bj, bm) = best.unwrap();
        assert_eq!(r.best_mode, bm);
        assert!((r.best_objective - bj).abs() < 1e-12);
        let min = table.iter().map(|(_, j)| *j).fold(f64::INFINITY, f64::min);
        assert_eq!(min, r.best_objective);
    }

    #[test]
    fn deterministic_across_exec() {
        let e = env(8);
        let seq = evaluate_space(&e, e.space(), DEFAULT_SEARCH_CAP, Exec::Sequential).unwrap();
        let par = evaluate_space(&e, e.space(), DEFAULT_SEARCH_CAP, Exec::Parallel).unwrap();
        assert_eq!(seq.search(0.3, true).unwrap(), par.search(0.3, true).unwrap());
        assert_eq!(seq.trace_string(), par.trace_string());
    }

    #[test]
    fn cap_enforced() {
        let e = env(1);
        let err = evaluate_space(&e, e.space(), 100, Exec::Sequential).unwrap_err();
        assert!(matches!(err, Error::SearchCap { size: 784, cap: 100 }));
        let fine = ModeSpace {
            child_granularity: ChildGranularity::PerDecidedFrame,
            ..ModeSpace::default()
        };
        assert_eq!(fine.size(), 38_416);
    }

    #[test]
    fn oracle_mode_has_zero_gap() {
        let e = env(5);
        let r = exhaustive_search(&e, e.space(), 0.4, false).unwrap();
        let g = mode_gap(&e, &r.best_mode, &r).unwrap();
        assert_eq!(g.gap, 0.0);
        assert_eq!(g.relative_gap, 0.0);
    }

    #[test]
    fn untrained_policy_gap_non_negative() {
        let e = env(5);
        let s = Scenario::synthetic(&e);
        let parent = AgentPolicy::new(Role::Parent, e.space(), &[8], &mut rng::stream(1, 0, 0));
        let child = AgentPolicy::new(Role::Child, e.space(), &[8], &mut rng::stream(1, 0, 1));
        for lambda in [0.0, 0.1, 1.0] {
            let r = exhaustive_search(&e, e.space(), lambda, false).unwrap();
            let g = policy_gap(&parent, &child, s, &r).unwrap();
            assert!(g.gap >= 0.0 && (0.0..=1.0).contains(&g.relative_gap));
        }
    }

    #[test]
    fn trace_export_reloads() {
        let e = env(6);
        let evals = evaluate_space(&e, e.space(), DEFAULT_SEARCH_CAP, Exec::Sequential).unwrap();
        let trace = crate::env::trace::parse_trace(&evals.trace_string(), Path::new("t.csv")).unwrap();
        assert_eq!(trace.len(), 784);
        let a = evals.search(0.15, false).unwrap();
        let b = exhaustive_search(&trace, e.space(), 0.15, false).unwrap();
        assert_eq!(a.best_mode, b.best_mode);
    }
}
