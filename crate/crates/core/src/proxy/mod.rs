//! Positional proxy graphs: construction, Laplacian, and Kron reduction.

mod codec;
mod graph;
mod kron;
mod laplacian;

pub use codec::{decode_proxy, encode_proxy, proxy_to_text, DecodeError, NODE_RECORD_BYTES};
pub(crate) use codec::{decode_proxy_from, encode_proxy_into, Reader};
pub use graph::{
    build_from_proxy_nodes, build_proxy, build_proxy_with, ProxyGraph, ProxyNode, ProxyParams,
    BRUTE_FORCE_LIMIT,
};
pub use kron::{
    alternate_selection, kron_reduce, kron_select, kron_select_or_alternate, prune_to_radius,
    FILL_IN_CLIP,
};
pub use laplacian::{laplacian, Laplacian};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxyError {
    #[error("cannot build a proxy graph from zero nodes")]
    EmptyGraph,
    #[error("radius ({radius}) and sigma ({sigma}) must be positive")]
    InvalidParams { radius: f64, sigma: f64 },
    #[error("node selection needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("largest Laplacian eigenvalue is repeated")]
    DegenerateSpectrum,
    #[error("eliminated block of the Laplacian is singular")]
    SingularElimination,
    #[error("keep set is empty")]
    EmptyKeepSet,
    #[error("node index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("eigendecomposition failed: {0}")]
    Spectral(String),
}
