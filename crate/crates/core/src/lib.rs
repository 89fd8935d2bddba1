//! Thermometry with a stream of ancilla qubits colliding with a thermalizing
//! probe.
//!
//! The modules build on one another:
//!
//! * [`qmat`]: dense complex matrices, density matrices, partial traces and
//!   local application of operators to a multi-qubit register.
//! * [`model`]: the thermal channel, collision unitaries, Gibbs states.
//! * [`engine`]: runs collision chains and finds stroboscopic steady states.
//! * [`fisher`]: quantum and classical Fisher information, closed-form
//!   increments and the two-parameter interdependence ratio.
//! * [`wtd`]: waiting-time laws, quadrature averages and Monte Carlo.
//! * [`correlations`]: mutual information and discord of ancilla pairs.
//!
//! ```
//! use colltherm::engine::ChainConfig;
//! use colltherm::fisher::{chain_qfi, delta_analytic, thermal_fi_nbar};
//! use colltherm::model::{CollisionSpec, EnvironmentParams};
//!
//! let env = EnvironmentParams::new(1.0, 1.0)?;
//! let cfg = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 4, 0.2)?;
//! let f = chain_qfi(&env, &cfg)?;
//! let expect = thermal_fi_nbar(1.0)? + 3.0 * delta_analytic(1.0, env.effective_rate(0.2))?;
//! assert!((f / expect - 1.0).abs() < 1e-6);
//! # Ok::<(), colltherm::Error>(())
//! ```

// `!(x > 0.0)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod engine;
pub mod error;
pub mod fisher;
pub mod model;
pub mod qmat;
pub mod wtd;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/chain.md")]
    mod chain {}
    #[doc = include_str!("../../../book/src/fisher.md")]
    mod fisher {}
    #[doc = include_str!("../../../book/src/waiting_times.md")]
    mod waiting_times {}
    #[doc = include_str!("../../../book/src/correlations.md")]
    mod correlations {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
