//! Decision-theoretic conditional planning under uncertainty.
//!
//! The crate plans over a STRIPS-style formalism extended with
//! probabilistic outcomes: applying an action is a lottery over `k`
//! successor states, each outcome carrying its own add/delete lists and
//! value change. A depth-limited AND/OR search backs expected utilities up
//! the tree and returns a conditional plan with a contingency branch for
//! every outcome. The utility function `U_R(V) = V^(1-R)` is parameterized
//! by a robustness factor `R`: raising it trades expected value for lower
//! variance.
//!
//! Modules:
//! - [`model`]: facts, states, operators, grounding, value models
//! - [`dsl`]: the textual domain/scenario language
//! - [`utility`]: normalization and the robustness-parameterized utility
//! - [`planner`]: exhaustive and branch-and-bound AND/OR search
//! - [`plan_io`]: plan JSON export/import
//! - [`sim`]: Monte Carlo execution and exact value distributions
//! - [`blocksworld`]: the built-in slippery blocks world
//! - [`cli`]: the `robust-planner` command-line tool

pub mod blocksworld;
pub mod cli;
pub mod dsl;
pub mod model;
pub mod plan_io;
pub mod planner;
pub mod sim;
pub mod utility;
