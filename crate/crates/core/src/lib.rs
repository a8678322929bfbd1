//! Discrete-time simulation of a robot that has to find power before its
//! battery runs out.
//!
//! Behavior is written as hierarchical state machines in a small scenario
//! language ([`dsl`]). Choice nodes pick among alternative ways of finding
//! power using learned positive and negative weights ([`decision`]); the
//! simulator ([`sim`]) drives the machines against a grid world ([`world`])
//! and a battery/capacitor model ([`energy`]).

pub mod decision;
pub mod dsl;
pub mod energy;
pub mod fsm;
pub mod guard;
pub mod library;
pub mod sim;
pub mod world;
