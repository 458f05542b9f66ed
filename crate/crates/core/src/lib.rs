//! Risk-averse contextual bandits by reduction to online expectile regression.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decision;
pub mod environments;
pub mod harness;
pub mod regression;
pub mod risk;
pub mod verify;
