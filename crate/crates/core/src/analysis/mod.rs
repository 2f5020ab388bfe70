//! Closed-form moments, rate bounds, Monte-Carlo rates and the brute-force
//! moment oracle.

mod moments;
mod oracle;
mod rate;
mod welford;

pub use moments::{moments, moments_accurate, moments_estimated, moments_statistical, MomentSet};
pub use oracle::{oracle_moments, Estimate, OracleMoments};
pub use rate::{mc_rate, mc_rate_sweep, rate_bound, McEstimate, McPoint, RateReport, SinrMode, LOG2};
pub use welford::Welford;
