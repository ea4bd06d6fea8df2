//! Parent (frame-level) and child (CTU-level) actor–critic agents.

pub mod a2c;
pub mod nn;
pub mod optim;
pub mod policy;
pub mod reward;
pub mod state;
pub mod train;

pub use a2c::{a2c_gradients, a2c_loss, a2c_update, LossReport, Step, Trajectory, UpdateParams};
pub use optim::{Optimizer, OptimizerKind};
pub use policy::{AgentPolicy, Role};
pub use reward::{calibrate_alpha, calibration_rewards, objective, reward_ctu, reward_frame, CalibrationTarget};
pub use state::{build_state, StateVector};
pub use train::{
    greedy_flat_mode, greedy_mode, greedy_parent, train_flat, train_hierarchical, FlatOutcome, HierarchicalOutcome,
    Scenario, TrainConfig, TrainingLog,
};
