//! Distributed output regulation for heterogeneous linear agents that talk
//! over intermittent, asynchronous, delayed and lossy sampled links.
//!
//! The numeric layers ([`linalg`], [`plant`], [`graph`], [`closedloop`] and the
//! predictor in [`comms`]) are generic over [`Scalar`]; the simulation
//! pipeline in [`sim`] runs in `f64`.

pub mod closedloop;
pub mod comms;
pub mod graph;
pub mod linalg;
pub mod plant;
pub mod scalar;
pub mod sim;
pub mod tolerance;

pub use num_complex::Complex;
pub use scalar::Scalar;
pub use tolerance::Tolerances;

pub type Matrix = linalg::Mat<f64>;
pub type Matrix32 = linalg::Mat<f32>;
pub type AgentModel = plant::AgentModel<f64>;
pub type ExoSystem = plant::ExoSystem<f64>;
pub type GainSet = plant::GainSet<f64>;
pub type RegulatorSolution = plant::RegulatorSolution<f64>;
pub type Topology = graph::Topology<f64>;
pub type LaplacianBlocks = graph::LaplacianBlocks<f64>;
pub type EdgeState = comms::EdgeState<f64>;
pub type AgentState = closedloop::AgentState<f64>;
pub type ClosedLoop = closedloop::ClosedLoop<f64>;
