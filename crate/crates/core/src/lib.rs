//! Rate and power adaptation for a cognitive link sharing a block-fading
//! interference channel with a primary link that uses adaptive modulation
//! and coding.
//!
//! The pieces, in the order a run uses them:
//!
//! * [`amc`]: exponential BER model, SNIR thresholds and mode selection.
//! * [`channel`]: scenario, Rayleigh block fading and SNIR.
//! * [`grid`]: partition of the scaled-SNIR plane and per-region statistics.
//! * [`adaptation`]: greedy variable-power policy, constant-power policy and
//!   an exhaustive oracle.
//! * [`baselines`]: underlay and interweave reference schemes.
//! * [`eval`]: block-level Monte Carlo measurement and tradeoff sweeps.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod amc;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod eval;
pub mod grid;
pub mod sim;

pub use adaptation::{
    brute_force_policy, compute_decisions, optimize_constant_power, optimize_variable_power, solve_greedy, Assignment,
    Averages, ConstantPowerModel, Constraints, DecisionState, DiscreteProblem, Policy, RegionTerms,
};
pub use amc::{ber, default_table, load_table, select_mode, snir_threshold, AmcMode, AmcTable, BerTargets};
pub use baselines::{interweave_tdma, underlay_block, TdmaConfig, UnderlayConfig};
pub use channel::{default_scenario, default_scenario_doc, FadingSample, ScaledSnir, Scenario, ScenarioDoc};
pub use error::{Error, Result};
pub use eval::{evaluate_policy, sweep_tradeoff, EvaluationReport, Scheme, SweepSettings, TradeoffCurve};
pub use grid::{build_grid, GridLayout, Region, RegionGrid};
