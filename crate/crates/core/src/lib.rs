//! Simulation and certification of scale-free linear synchronization
//! protocols for networks of discrete-time double integrators whose inputs
//! saturate at unit magnitude.
//!
//! The crate is organised bottom-up:
//!
//! * [`matkernel`]: small dense matrix kernel (Kronecker products, spectra,
//!   discrete Lyapunov equations).
//! * [`graph`]: weighted digraphs, Laplacians, root sets and the contraction
//!   matrix that drives the estimation error.
//! * [`dynamics`]: agent plant, saturation, network exchange and the two
//!   protocol controllers as pure step functions.
//! * [`analysis`]: gain zone, Lyapunov certificate and trajectory diagnostics.
//! * [`sim`]: synchronous closed-loop simulation and the three reference cases.
//! * [`io`]: configuration, CSV/JSON outputs and run manifests used by the CLI.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod graph;
pub mod io;
pub mod matkernel;
pub mod sim;

pub use analysis::{
    build_certificate, epsilon_margin, gain_zone_check, lyapunov_series, sync_metrics,
    LyapunovCertificate, LyapunovSeries, SyncMetrics,
};
pub use dynamics::{AgentState, ChiFeed, GainParams, ObserverGains, ProtocolGains};
pub use graph::{GraphAnalysis, NodeId, WeightedDigraph};
pub use matkernel::Matrix;
pub use sim::{build_case, run, sample_initials, Case, Coupling, SimConfig, Trajectory};
