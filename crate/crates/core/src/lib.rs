//! Symbol-level selective full-duplex decode-and-forward relaying: a
//! link-level simulator, the closed-form outage analysis and the power and
//! location optimizers built on it.

pub mod analysis;
pub mod channel;
pub mod destination;
pub mod error;
pub mod fec;
pub mod harness;
pub mod modem;
pub mod optimize;
pub mod relay;
pub mod signalcore;

pub use error::{Error, Result};
