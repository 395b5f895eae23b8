// Negated comparisons are used on purpose: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demand;
pub mod desk;
pub mod disagg;
pub mod engine;
pub mod error;
pub mod io;
pub mod lifetable;
pub mod nutrition;
pub mod policy;
pub mod rescale;
pub mod textbox;
pub mod uncertainty;
pub mod validation;

pub use engine::{run_scenario, run_with, Params, ScenarioData, ScenarioOutcome, Settings};
pub use error::{Error, Result};
