//! Alphabet Set Multiplier (ASM) and multiplier-less (MAN) datapaths.
//!
//! A weight magnitude is split into bit groups (a 3-bit group next to the
//! sign, then 4-bit quartets). Each non-zero group is produced by selecting
//! an odd multiple of the input from a pre-computer bank and shifting it;
//! the shifted partial products are summed and the sign applied last.

mod alphabet;
mod datapath;
mod quartet;

pub use alphabet::{AlphabetSet, MAX_GROUP_BITS};
pub use datapath::{
    asm_multiply, man_multiply, precompute_bank, DatapathOps, EncodedWeight, PrecomputeBank, Term,
};
pub use quartet::{
    decompose, decompose_raw, encode_group, GroupEncoding, GroupSlot, QuartetDecomposition,
    WeightLayout,
};
