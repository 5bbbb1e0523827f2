//! Channel coding: the serially concatenated code with doped accumulator,
//! its BCJR decoder and the CRC used by the frame-level baseline.

pub mod crc;
pub mod interleaver;
pub mod sccc;
pub mod trellis;

pub use crc::{crc_attach, crc_check, CRC_BITS};
pub use interleaver::Interleaver;
pub use sccc::{sccc_decode, sccc_encode, CodecConfig};
pub use trellis::{bcjr, hard_decision, SisoOutput, Trellis, LLR_CLAMP};
