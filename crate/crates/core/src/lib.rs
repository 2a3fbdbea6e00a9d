//! Circuit-level simulation of MOSFET-based latch-up protection: a netlist
//! front end, device models, an MNA transient solver, a parameterized test
//! bench with waveform measurements, and closed-form design helpers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod devices;
pub mod netlist;
pub mod seltb;
pub mod solver;
