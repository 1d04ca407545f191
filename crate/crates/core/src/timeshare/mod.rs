//! General p-ary time-sharing scheme.
//!
//! The block is split into `d` segments, each into `d` subsegments. In
//! subsegment `b` only sender `b` draws random letters; the others send
//! constants chosen so that the adder output in segment `c` is shifted by
//! `(c-1)(p-1)`. The shifts keep segments apart in the output alphabet, and
//! the mixed-radix map `h` packs the `d` per-sender parameters of a segment
//! into one mixture that the decoder can invert digit by digit.

mod decoder;
mod encoder;
mod lattice;
mod layout;

pub use decoder::{
    build_binary_decoder_matrices, build_decoder_matrices, decode_timeshare, decode_timeshare_binary,
    ideal_output_distribution, layout_output_distribution, segment_output_distribution,
    BinaryDecoderMatrices, BinaryTimeShareDecoder, DecoderMatrices, TimeShareDecoder, TsDecoding,
};
pub use encoder::{encode_timeshare, encode_timeshare_binary, sample_message, TsMessage};
pub use lattice::{
    binomial, build_lattice, denominator, lattice_size, multichoose, on_lattice, sample_lattice_point,
    LatticePoint, SimplexLattice,
};
pub use layout::{
    build_layout, build_layout_any_region, granularities, h_forward, h_inverse, proportions_sum_to_one,
    subsegment_proportions, MixedRadix, TimeShareLayout,
};

/// Which message set a time-sharing codec works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageSpace {
    /// `L_i^d`: one simplex-lattice point per segment.
    Lattice,
    /// `Θ_i^d` with `p = 2`: one grid value (probability of a one) per segment.
    Binary,
}
