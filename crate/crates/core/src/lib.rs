//! Downlink cell-free massive MIMO under probabilistic LoS/NLoS channels.
//!
//! The crate is organised bottom-up:
//!
//! * [`config`] holds [`NetworkConfig`] and the flat `key = value` grammar.
//! * [`netgeom`] draws deployments and evaluates distances, angles, LoS
//!   probabilities and NLoS path loss.
//! * [`channel`] builds LoS vectors, [`LinkStatistics`] and fast-fading draws.
//! * [`estimation`] implements pilot de-spreading and both LMMSE estimators.
//! * [`precoder`] builds conjugate precoders and solves the power constraints.
//! * [`analysis`] evaluates closed-form moments, rate bounds, Monte-Carlo rates
//!   and the brute-force moment oracle.
//! * [`harness`] runs the experiment families and writes CSV/SVG output.

pub mod analysis;
pub mod channel;
pub mod config;
pub mod estimation;
pub mod harness;
pub mod netgeom;
pub mod precoder;
pub mod rng;
pub mod sum;

pub use analysis::{MomentSet, RateReport};
pub use channel::{ChannelRealization, LinkStatistics};
pub use config::{ConfigError, NetworkConfig};
pub use netgeom::Deployment;
pub use precoder::{PowerAllocation, PowerControlMode, Scheme};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
