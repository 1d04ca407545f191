//! Coding over a permutation adder multiple-access channel.
//!
//! `d` senders each transmit a length-`n` word over `{0, …, p-1}`. The channel
//! adds the words letterwise over the integers, passes each sum through a
//! discrete memoryless channel, and delivers the result in uniformly random
//! order. Two coding families are provided: a root-finding scheme for binary
//! alphabets ([`codec_root`]) and a time-sharing scheme for any alphabet
//! ([`codec_timeshare`]).

pub mod channel;
pub mod codec_root;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod timeshare;

/// Alias of [`timeshare`].
pub use timeshare as codec_timeshare;

pub use error::{Error, Result};
pub use model::{
    default_channel, rate_region_check, sum_capacity, ChannelSpec, Codeword, Distribution, RateTuple,
    RegionStatus, Symbol,
};
