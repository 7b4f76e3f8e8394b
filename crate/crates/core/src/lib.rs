//! HashTag+ erasure codes: systematic MDS array codes with flexible
//! sub-packetization and bandwidth-efficient repair of every node.

pub mod base;
pub mod codec;
pub mod error;
pub mod generator;
pub mod gf;
pub mod params;
pub mod plus;
pub mod repair;
pub mod report;
pub mod schedule;
pub mod shard;
pub mod verifier;

pub use base::{BaseCode, CoefficientTensor};
pub use codec::{decode_any_k, encode, DataBlock, Decoder};
pub use error::{Error, Result};
pub use gf::{Field, FieldMatrix, FieldSpec, Symbol};
pub use params::CodeParams;
pub use plus::{Codeword, PlusCode};
pub use repair::{execute_repair, measure_bandwidth, plan_repair, BandwidthReport, RepairPlan};
pub use report::{bench, BenchEntry, BenchReport};
pub use shard::{read_shard, write_shard, ShardHeader};
pub use verifier::{verify_mds, MdsReport};
