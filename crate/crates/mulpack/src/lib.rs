//! Pack several narrow signed multiplications into one emulated FPGA DSP
//! slice, and everything needed to use that trick end to end: parameter
//! decomposition and approximation, packed-operand construction, a bit-exact
//! datapath emulator, a ROM-dictionary weight codec with canonical Huffman
//! compression on top, and a weight-stationary systolic-array simulator.

pub mod bitio;
pub mod config;
pub mod dspemu;
pub mod error;
pub mod huffman;
pub mod io;
pub mod manipulate;
pub mod packer;
pub mod pipeline;
pub mod romdict;
pub mod sasim;
pub mod verify;

pub use error::{Error, Result};

// The guide's code blocks double as doctests so the chapters cannot drift
// from the crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/approximation.md")]
    mod approximation {}
    #[doc = include_str!("../../../book/src/packing.md")]
    mod packing {}
    #[doc = include_str!("../../../book/src/emulation.md")]
    mod emulation {}
    #[doc = include_str!("../../../book/src/dictionary.md")]
    mod dictionary {}
    #[doc = include_str!("../../../book/src/array.md")]
    mod array {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
