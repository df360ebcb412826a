//! Private retrieval of a contiguous block of messages from replicated
//! servers, at the optimal download rate.
//!
//! A client wants messages `[j : j+D-1]` out of `K` stored on each of `N`
//! servers, without any single server learning `j`. This crate derives the
//! exact optimal rate and subpacketization bounds, builds rate-optimal query
//! plans for every demand position, runs the full query/answer/decode loop
//! in process, and audits the results (correctness, privacy, rate).

pub mod audit;
pub mod cli;
pub mod error;
pub mod field;
pub mod params;
pub mod protocol;
pub mod ratio;
pub mod scheme;

pub use error::{Error, Result};
pub use field::{FieldElement, MessageStore, SUPPORTED_PRIMES};
pub use params::{
    canonical_permutation, converse_bound, coprimality_tightness, optimal_rate, subpack_lower,
    subpack_upper, symbols_per_server, BoundsReport, Params, Permutation, Regime,
};
pub use protocol::{
    answer_all, answer_query, coefficient_matrix, decode, masked_round, oracle_decodable,
    run_round_trip, Answer, DecodeResult, RoundTripReport,
};
pub use scheme::{
    apply_masks, build_canonical_plan, build_partition, draw_perms, enumerate_supports,
    identity_perms, mask_plan, reduce_large_demand, render_table, QueryPlan, SideInfoRef, Support,
    SymbolSpec,
};
