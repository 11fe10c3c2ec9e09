//! Doubly-irregular repeat-accumulate (D-IRA) codes over the integer rings
//! Z_{2^m} with 2^m-PAM signaling.
//!
//! The crate covers code construction from a [`profile::CodeProfile`],
//! linear-time encoding, FFT-accelerated belief propagation over length-q
//! probability vectors, EXIT-chart profile design, compute-forward and
//! linear dirty-paper-coding front ends, and a Monte-Carlo harness.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bp;
pub mod codec;
pub mod error;
pub mod exit;
pub mod graph;
pub mod multiuser;
pub mod profile;
pub mod ring;
pub mod sim;

pub use codec::{encode, map_pam, PamMapper};
pub use error::{Error, Result};
pub use graph::{build_graph, parity_check, CodeGraph};
pub use ring::{RingParams, Sym};
