//! Actor–critic policy pairs and their text persistence.
//!
//! Policy file:
//!
//! ```text
//! format_version: 1
//! role: parent
//! actor_dims: 10 64 64 4
//! critic_dims: 10 64 64 1
//! actions: 22 27 32 37
//! state_layout: 3f9c0e51d2a4b788
//! weights:
//! actor.0.weight <values>
//! actor.0.bias <values>
//! ...
//! ```
//!
//! Values are written in shortest round-trip form; load(save(p)) == p.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::agent::nn::{Dense, Mlp};
use crate::agent::state::{layout_hash, state_len};
use crate::error::{Error, Result};
use crate::mode::{enumerate_modes, mode_key, ModeSpace};

pub const POLICY_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Frame-level QPs.
    Parent,
    /// Region ΔQPs, conditioned on the parent's choice.
    Child,
    /// Single agent over the joint mode space.
    Flat,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Parent => "parent",
            Role::Child => "child",
            Role::Flat => "flat",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parent" => Ok(Role::Parent),
            "child" => Ok(Role::Child),
            "flat" => Ok(Role::Flat),
            other => Err(Error::InvalidParameter(format!("unknown role `{other}`"))),
        }
    }
}

/// Action labels of a role under `space`.
pub fn action_labels(role: Role, space: &ModeSpace) -> Vec<String> {
    match role {
        Role::Parent => space.frame_qp_set.iter().map(|q| q.to_string()).collect(),
        Role::Child => space.delta_qp_set.iter().map(|d| format!("{d:+}")).collect(),
        Role::Flat => enumerate_modes(space).iter().map(mode_key).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentPolicy {
    pub role: Role,
    pub actions: Vec<String>,
    pub state_layout: String,
    pub actor: Mlp,
    pub critic: Mlp,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest probability; ties go to the lower index.
pub fn greedy_action(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from `probs` with `u` in [0, 1).
pub fn sample_action(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl AgentPolicy {
    pub fn new(role: Role, space: &ModeSpace, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let actions = action_labels(role, space);
        let input = state_len(role, space);
        let mut actor_dims = vec![input];
        actor_dims.extend_from_slice(hidden);
        let mut critic_dims = actor_dims.clone();
        actor_dims.push(actions.len());
        critic_dims.push(1);
        let actor = Mlp::new(&actor_dims, rng);
        let critic = Mlp::new(&critic_dims, rng);
        AgentPolicy {
            role,
            actions,
            state_layout: layout_hash(role, space),
            actor,
            critic,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_width(&self) -> usize {
        self.actor.input_width()
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_width() {
            return Err(Error::Dimension(format!(
                "state has {} entries, policy expects {}",
                state.len(),
                self.state_width()
            )));
        }
        Ok(())
    }

    /// Action distribution and state value.
    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_state(state)?;
        let probs = softmax(&self.actor.forward(state));
        let value = self.critic.forward(state)[0];
        Ok((probs, value))
    }

    /// Checks that the policy was built for `space`.
    pub fn check_compatible(&self, space: &ModeSpace) -> Result<()> {
        if self.actions != action_labels(self.role, space) || self.state_layout != layout_hash(self.role, space) {
            return Err(Error::InvalidParameter(format!(
                "{} policy does not match the configured mode space",
                self.role
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite()
    }

    pub fn to_text(&self) -> String {
        let dims = |m: &Mlp| m.dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let _ = writeln!(out, "format_version: {POLICY_FORMAT_VERSION}");
        let _ = writeln!(out, "role: {}", self.role);
        let _ = writeln!(out, "actor_dims: {}", dims(&self.actor));
        let _ = writeln!(out, "critic_dims: {}", dims(&self.critic));
        let _ = writeln!(out, "actions: {}", self.actions.join(" "));
        let _ = writeln!(out, "state_layout: {}", self.state_layout);
        out.push_str("weights:\n");
        for (name, net) in [("actor", &self.actor), ("critic", &self.critic)] {
            for (l, layer) in net.layers.iter().enumerate() {
                for (kind, values) in [("weight", &layer.weight), ("bias", &layer.bias)] {
                    let _ = write!(out, "{name}.{l}.{kind}");
                    for v in values {
                        let _ = write!(out, " {v:?}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(n, l)| (n as u64 + 1, l));
        let mut header = |key: &str| -> Result<(u64, String)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("missing `{key}`")))?;
            let value = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(':'))
                .ok_or_else(|| Error::parse(path, n, format!("expected `{key}:`")))?;
            Ok((n, value.trim().to_string()))
        };
        let (n, version) = header("format_version")?;
        let version: u32 = version
            .parse()
            .map_err(|_| Error::parse(path, n, "bad format_version"))?;
        if version != POLICY_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: version,
                expected: POLICY_FORMAT_VERSION,
            });
        }
        let (n, role) = header("role")?;
        let role: Role = role
            .parse()
            .map_err(|_| Error::parse(path, n, format!("unknown role `{role}`")))?;
        let parse_dims = |(n, s): (u64, String)| -> Result<Vec<usize>> {
            let dims = s
                .split_whitespace()
                .map(|d| {
                    d.parse::<usize>()
                        .map_err(|_| Error::parse(path, n, format!("bad dimension `{d}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if dims.len() < 2 || dims.contains(&0) {
                return Err(Error::parse(path, n, "need at least two positive dimensions"));
            }
            Ok(dims)
        };
        let actor_dims = parse_dims(header("actor_dims")?)?;
        let critic_dims = parse_dims(header("critic_dims")?)?;
        let (n, actions) = header("actions")?;
        let actions: Vec<String> = actions.split_whitespace().map(str::to_string).collect();
        if actions.len() != *actor_dims.last().unwrap() {
            return Err(Error::parse(path, n, "action count does not match actor output width"));
        }
        let (_, state_layout) = header("state_layout")?;
        let (n, rest) = header("weights")?;
        if !rest.is_empty() {
            return Err(Error::parse(path, n, "unexpected text after `weights:`"));
        }
        let mut actor = Mlp::zeros(&actor_dims);
        let mut critic = Mlp::zeros(&critic_dims);
        for (name, net) in [("actor", &mut actor), ("critic", &mut critic)] {
            for (l, layer) in net.layers.iter_mut().enumerate() {
                let Dense { weight, bias, .. } = layer;
                for (kind, values) in [("weight", weight), ("bias", bias)] {
                    let tag = format!("{name}.{l}.{kind}");
                    let (n, line) = lines
                        .next()
                        .ok_or_else(|| Error::parse(path, 0, format!("missing tensor `{tag}`")))?;
                    let mut fields = line.split_whitespace();
                    if fields.next() != Some(tag.as_str()) {
                        return Err(Error::parse(path, n, format!("expected tensor `{tag}`")));
                    }
                    let parsed = fields
                        .map(|v| {
                            v.parse::<f64>()
                                .map_err(|_| Error::parse(path, n, format!("bad value `{v}`")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if parsed.len() != values.len() {
                        return Err(Error::parse(
                            path,
                            n,
                            format!("`{tag}` has {} values, expected {}", parsed.len(), values.len()),
                        ));
                    }
                    *values = parsed;
                }
            }
        }
        if let Some((n, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::parse(path, n, format!("trailing content `{extra}`")));
        }
        let policy = AgentPolicy {
            role,
            actions,
            state_layout,
            actor,
            critic,
        };
        if !policy.is_finite() {
            return Err(Error::parse(path, 0, "non-finite weights"));
        }
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}
