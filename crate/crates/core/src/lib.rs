//! Joint port selection and beamforming for fluid-antenna assisted
//! integrated data and energy transfer.
//!
//! A transmitter with `M` antennas serves `K_D` data receivers (DRs) and
//! `K_E` energy receivers (ERs), each equipped with one fluid antenna that
//! can switch between `N` correlated ports. The crate generates the
//! correlated channels under imperfect CSI, evaluates SINR and harvested
//! power, solves the semidefinite relaxation of the beamforming problem,
//! selects ports in closed form and alternates the two until the weighted
//! harvested power stops improving. A fixed-antenna MIMO benchmark is
//! included for comparison.
//!
//! The crate is `no_std` and only needs `alloc`; IO, sweeps and the
//! command-line front end live in the `faidet` crate.

#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ao;
pub mod baseline;
pub mod beamforming;
pub mod channel;
pub mod linalg;
pub mod portselect;
pub mod rng;
pub mod sdp;
pub mod specfun;
pub mod sysmodel;

pub use ao::{initialize_ports, optimize, optimize_with, AoError, AoResult, AoSettings, AoStatus};
pub use baseline::{generate_mimo_scenario, optimize_mimo, receive_antennas, MimoResult, MimoScenario};
pub use beamforming::{recover_rank1, solve_p2, BeamformingError, P2Settings, P2Solution};
pub use channel::{generate_scenario, ChannelError, ChannelSet, CsiPair};
pub use portselect::{select_dr_port, select_er_port, update_ports};
pub use rng::trial_seed;
pub use specfun::port_correlation_mu;
pub use sysmodel::{
    eh_power_at_port, realized_weighted_eh, sinr_at_port, weighted_eh, BeamformingSolution, ConfigError, PortSelection,
    SystemConfig,
};
