//! Continual-learning stack: a small MLP, optimizers, EWC baselines and an
//! FN-synapse parameter store.

pub mod ewc;
pub mod mlp;
pub mod optim;
pub mod protocol;
pub mod store;

pub use ewc::{diagonal_fisher, Ewc, EwcConfig};
pub use mlp::{Activation, Mlp, MlpConfig, Scalar, Workspace};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use protocol::{
    evaluate, run_continual, run_continual_with_progress, train_task, usage_histogram,
    ContinualConfig, ContinualResult, EpochLog, Histogram, LayerUsage, Method, Task,
    TaskAccuracyMatrix, TaskData,
};
pub use store::{FnStoreConfig, FnWeightStore, ParamStore};
