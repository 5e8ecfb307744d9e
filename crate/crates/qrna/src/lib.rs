//! Simulator and protocol library for recursive quantum repeater networks.
//!
//! Applications ask the network for a distributed entangled state by name or
//! circuit, constrained by a minimum fidelity and a maximum entropy. The
//! protocol engine resolves such a request recursively: it picks a central
//! element from hierarchical routing tables, breaks the request into local
//! creation, Bell-pair construction (purify-and-swap over the physical
//! links) and teleportation sub-requests, forwards each piece toward its
//! executor, and finally checks the delivered density matrix against the
//! requested constraints. Whole networks abstract to single nodes at the
//! enclosing layer, so nothing outside a network ever sees its internals.
//!
//! Everything runs on an exact dense density-matrix backend, and every
//! physical operation lands in a deterministic trace that the flat replay
//! oracle in [`harness`] can re-execute independently to certify the result.
//!
//! The `examples/` directory demonstrates each capability in isolation:
//! routing tables, purification, swapping, teleportation, request
//! decomposition, end-to-end delivery and oracle replay. A thin `qrna`
//! binary exposes batch runs (`run`), routing-table dumps (`routes`) and
//! trace replay (`oracle`).

pub mod engine;
pub mod harness;
pub mod link;
pub mod protocol;
pub mod request;
pub mod topology;
pub mod trace;

pub use engine::{DensityMatrix, QubitLabel, StateVector};
pub use link::{EntangledPairHandle, SimConfig, SimContext};
pub use request::{ActionRequest, Request, Response, StateRequest, Status};
pub use topology::Topology;
