//! Multi-user front ends built on the ring linearity of the code: a linear
//! combination of codewords is the codeword of the same combination of
//! messages.
//!
//! [`cf`] decodes linear combinations of several users' messages from
//! their superposition; [`dpc`] pre-cancels integer interference known at
//! the transmitter.

pub mod cf;
pub mod dpc;
mod modular;

pub use cf::{
    cf_bin_app, cf_compute, cf_recover, cf_transmit, CfBinner, CfBlock, CfScenario, CfSource, MAX_CF_CANDIDATES,
    MAX_CF_USERS,
};
pub use dpc::{
    dpc_app, dpc_chain, dpc_encode, dpc_transmit, DpcBlock, DpcDemodulator, DpcScenario, DpcWindow,
    InterferencePrior, PriorTable, WINDOW_COVERAGE,
};
pub use modular::{det_mod, inverse_mod, linear_combo};
