//! Simulation and optimization library for repeater-swarm-assisted
//! cellular massive MIMO uplink.
//!
//! A swarm of full-duplex amplify-and-forward repeaters is deployed inside
//! a cell to assist the uplink. Because every repeater re-amplifies what
//! the others transmit, the swarm forms a positive feedback loop whose
//! stability must be certified before the repeaters can be used. This
//! crate provides:
//!
//! - dense complex matrix kernels and a small convex QP solver
//!   ([`numerics`]),
//! - reproducible scenario construction with deterministic random
//!   streams ([`scenario`], [`rng`]),
//! - channel synthesis from geometry and configurable pathloss models,
//!   including the swarm's effective transfer matrix ([`channel`]),
//! - stability certification: Nyquist determinant sweeps, Gershgorin
//!   bounds, and closed-form special cases ([`stability`]),
//! - uplink performance metrics: capacity, SINR, MMSE combining
//!   ([`uplink`]),
//! - joint optimization of repeater gains, user powers, and combiners by
//!   weighted-MMSE block coordinate descent ([`optimizer`]).

pub mod channel;
pub mod numerics;
pub mod optimizer;
pub mod rng;
pub mod scenario;
pub mod stability;
pub mod units;
pub mod uplink;

pub use channel::{ChannelSet, PathlossModel, RepeaterConfig};
pub use scenario::{Layout, Scenario};
pub use stability::{StabilityReport, SweepGrid};
pub use uplink::{UplinkSystem, UserState};
