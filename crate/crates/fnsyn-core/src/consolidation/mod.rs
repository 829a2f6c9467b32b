//! Memory-lifetime theory and Monte-Carlo experiments.

pub mod cascade;
pub mod lifetime;
pub mod theory;

pub use cascade::{cascade_step, CascadeSynapse};
pub use lifetime::{
    cfn_modulate, run_lifetime, LifetimeConfig, LifetimeCurves, LifetimePlan, PatternMode,
    SynapseModelKind,
};
pub use theory::{analytic_noise, analytic_signal, analytic_snr};
