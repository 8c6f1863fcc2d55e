//! Timing-coherent transactor synthesis and mixed-level co-simulation.
//!
//! The crate is organised as a pipeline:
//!
//! * [`ifsm`] holds interface-protocol state machines and the structural
//!   transforms applied before synthesis.
//! * [`dsl`] reads and writes the `.ifsm` / `.pmap` text formats.
//! * [`synth`] composes two complementary interface machines into a
//!   transactor machine over state pairs.
//! * [`sim`] executes master, transactor and slave on per-component local
//!   clocks and records transaction boundaries on both sides.
//! * [`protocols`] ships reference bus models, the conventional baseline and
//!   seeded workload generators.
//! * [`cli`] is the command-line driver.

pub mod cli;
pub mod dsl;
pub mod ifsm;
pub mod protocols;
pub mod sim;
pub mod synth;

/// Identifier of a state inside one interface machine.
pub type StateId = u32;

/// Simulated time in integer nanoseconds.
pub type TimeNs = u64;

pub use dsl::{parse_interface_spec, parse_payload_mapping, serialize_fsm, DslError, PayloadMapping};
pub use ifsm::{Action, InterfaceFsm, Level, Role, Transition};
pub use sim::{compare_traces, run_cosimulation, DelayModel, SimTrace, TransactionRecord};
pub use synth::{generate_transactor, StatePair, TransactorFsm};
