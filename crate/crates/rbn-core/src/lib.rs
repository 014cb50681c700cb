//! Parameterized verification of reconfigurable broadcast networks (RBN).
//!
//! An RBN is a finite-state protocol run by an arbitrary number of anonymous
//! agents. In one step a single agent broadcasts a letter and any subset of
//! agents with a matching receive transition moves simultaneously; the
//! communication topology is abstracted away, so a configuration is just a
//! multiset counting agents per state.
//!
//! The crate offers two layers that check each other:
//!
//! * explicit-state semantics and brute-force oracles ([`model`], [`asms`]),
//! * symbolic analysis over counting sets: cubes with possibly infinite upper
//!   bounds and their boolean algebra ([`counting`]), the symbolic graph of a
//!   given index ([`symbolic`]), exact forward/backward reachability closures
//!   ([`closure`]), expression evaluation ([`expr`]), almost-sure coverability
//!   cut-offs ([`almost_sure`]) and consensus-protocol verification
//!   ([`protocol`]).

pub mod almost_sure;
pub mod asms;
pub mod closure;
pub mod counting;
pub mod error;
pub mod expr;
pub mod model;
pub mod protocol;
pub mod symbolic;

pub use error::{Budget, Error, Result};
