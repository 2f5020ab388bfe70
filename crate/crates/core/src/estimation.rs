//! Pilot de-spreading and the two LMMSE estimators.
//!
//! Uplink: each AP estimates the NLoS part of every UE channel from the
//! de-spread pilot observation `y' = √β h̄ + σ_u w'`, LoS already removed.
//! Downlink: each UE estimates the fast-fading part `γ̄_kk` of its effective
//! gain from `ȳ = γ̄_kk + σ_d w`, using the closed-form `E|γ̄_kk|²`.
//!
//! Monte-Carlo loops use the fast paths ([`estimate_uplink`],
//! [`downlink_observation`]) that draw the de-spread noise directly. The
//! pilot-block functions simulate the full `T`-symbol exchange.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, ArrayView1};
use thiserror::Error;

use crate::channel::{cn01, ChannelRealization, LinkStatistics};
use crate::rng::Rng;
use crate::C64;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("pilot set is not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Rows of the unitary `K×K` DFT: `ψ_k[n] = e^{−ι2πkn/K}/√K`.
pub fn dft_pilots(k: usize) -> Array2<C64> {
    let s = 1.0 / (k as f64).sqrt();
    Array2::from_shape_fn((k, k), |(a, n)| C64::from_polar(s, -2.0 * PI * (a * n) as f64 / k as f64))
}

/// Checks `Σ_n ψ_k[n] ψ_l*[n] = δ[k−l]` to within 1e-10.
pub fn check_orthonormal(pilots: &Array2<C64>) -> Result<(), EstimationError> {
    let (k, _) = pilots.dim();
    let mut worst: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            let g: C64 = pilots.row(a).iter().zip(pilots.row(b)).map(|(x, y)| x * y.conj()).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((g - want).norm());
        }
    }
    if worst > 1e-10 {
        return Err(EstimationError::NotOrthonormal(worst));
    }
    Ok(())
}

/// Received uplink pilot block at AP `m`: `Y[:, n] = Σ_k h_mk ψ_k[n] + σ_u w[n]`
/// (`N×T`).
pub fn uplink_pilot_block(
    stats: &LinkStatistics,
    real: &ChannelRealization,
    m: usize,
    pilots: &Array2<C64>,
    sigma_u2: f64,
    rng: &mut Rng,
) -> Array2<C64> {
    let (k, t) = pilots.dim();
    let n = stats.antennas();
    let su = sigma_u2.sqrt();
    let h: Vec<Vec<C64>> = (0..k).map(|u| real.composite(stats, m, u)).collect();
    Array2::from_shape_fn((n, t), |(p, s)| {
        (0..k).map(|u| h[u][p] * pilots[[u, s]]).sum::<C64>()
    }) + Array2::from_shape_simple_fn((n, t), || cn01(rng) * su)
}

/// De-spreads `received` (`N×T`) with pilot `k` and removes the known LoS
/// term: `y' = Σ_n y[n] ψ_k*[n] − α ḣ`.
pub fn uplink_correlate(
    received: &Array2<C64>,
    pilots: &Array2<C64>,
    k: usize,
    los_component: ArrayView1<'_, C64>,
    alpha: u8,
) -> Result<Vec<C64>, EstimationError> {
    check_orthonormal(pilots)?;
    let (n, t) = received.dim();
    if pilots.dim().1 != t || los_component.len() != n || k >= pilots.dim().0 {
        return Err(EstimationError::Shape(format!(
            "received {n}x{t}, pilots {:?}, los {}, k {k}",
            pilots.dim(),
            los_component.len()
        )));
    }
    let a = f64::from(alpha);
    Ok((0..n)
        .map(|p| {
            let y: C64 = (0..t).map(|s| received[[p, s]] * pilots[[k, s]].conj()).sum();
            y - los_component[p] * a
        })
        .collect())
}

/// LMMSE estimate of `h̄` and its per-entry variances.
#[derive(Clone, Debug, PartialEq)]
pub struct UplinkEstimate {
    pub est: Vec<C64>,
    /// `σ_u²/(β+σ_u²)`.
    pub err_var: f64,
    /// `β/(β+σ_u²)`.
    pub est_var: f64,
}

/// Coefficient and variances of the uplink LMMSE for one link:
/// `(√β/(β+σ_u²), est_var, err_var)`. Zero gain and zero noise gives a zero
/// estimate.
pub fn uplink_coefficients(beta: f64, sigma_u2: f64) -> (f64, f64, f64) {
    let d = beta + sigma_u2;
    if d == 0.0 {
        return (0.0, 0.0, 1.0);
    }
    (beta.sqrt() / d, beta / d, sigma_u2 / d)
}

/// `ĥ = √β/(β+σ_u²) · y'`.
pub fn uplink_lmmse(yprime: &[C64], beta: f64, sigma_u2: f64) -> UplinkEstimate {
    let (c, est_var, err_var) = uplink_coefficients(beta, sigma_u2);
    UplinkEstimate { est: yprime.iter().map(|y| y * c).collect(), err_var, est_var }
}

/// Fast path: draws `y'_mk = √β h̄ + σ_u w'` for every link and stores the
/// LMMSE estimates in `real.est_nlos`.
pub fn estimate_uplink(stats: &LinkStatistics, real: &mut ChannelRealization, sigma_u2: f64, rng: &mut Rng) {
    let (m, k, n) = real.nlos.dim();
    let su = sigma_u2.sqrt();
    let mut est = Array3::zeros((m, k, n));
    for a in 0..m {
        for u in 0..k {
            let b = stats.beta[[a, u]];
            let (c, _, _) = uplink_coefficients(b, sigma_u2);
            let sb = b.sqrt();
            for p in 0..n {
                let y = real.nlos[[a, u, p]] * sb + cn01(rng) * su;
                est[[a, u, p]] = y * c;
            }
        }
    }
    real.est_nlos = Some(est);
}

/// Received downlink pilot block at UE `k`: `y[n] = Σ_i γ_ki ψ_i[n] + σ_d w[n]`.
pub fn downlink_pilot_block(gamma_row: &[C64], pilots: &Array2<C64>, sigma_d2: f64, rng: &mut Rng) -> Vec<C64> {
    let (k, t) = pilots.dim();
    assert_eq!(gamma_row.len(), k);
    let sd = sigma_d2.sqrt();
    (0..t)
        .map(|s| (0..k).map(|i| gamma_row[i] * pilots[[i, s]]).sum::<C64>() + cn01(rng) * sd)
        .collect()
}

/// De-spreads with pilot `k` and removes the known `γ̇_kk`: returns
/// `γ̄_kk + σ_d w'`.
pub fn downlink_correlate_and_strip(
    received: &[C64],
    pilots: &Array2<C64>,
    k: usize,
    dot_gamma_kk: C64,
) -> Result<C64, EstimationError> {
    check_orthonormal(pilots)?;
    if received.len() != pilots.dim().1 || k >= pilots.dim().0 {
        return Err(EstimationError::Shape(format!("received {}, pilots {:?}", received.len(), pilots.dim())));
    }
    let y: C64 = received.iter().zip(pilots.row(k)).map(|(y, p)| y * p.conj()).sum();
    Ok(y - dot_gamma_kk)
}

/// Fast path for [`downlink_correlate_and_strip`]: `γ̄ + σ_d w`.
pub fn downlink_observation(gamma_bar: C64, sigma_d2: f64, rng: &mut Rng) -> C64 {
    gamma_bar + cn01(rng) * sigma_d2.sqrt()
}

/// Downlink LMMSE estimate of `γ̄_kk` and its variances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DownlinkEstimate {
    pub gamma_hat: C64,
    /// `E|γ̂|² = G²/(G+σ_d²)`.
    pub hat_var: f64,
    /// `E|γ̃|² = Gσ_d²/(G+σ_d²)`.
    pub tilde_var: f64,
}

/// LMMSE coefficient `G/(G+σ_d²)`; zero when `G = 0`.
pub fn downlink_coefficient(gammabar_var: f64, sigma_d2: f64) -> f64 {
    if gammabar_var == 0.0 {
        0.0
    } else {
        gammabar_var / (gammabar_var + sigma_d2)
    }
}

/// `γ̂ = G ȳ/(G+σ_d²)` with `G = E|γ̄_kk|²` from the closed-form engine.
pub fn downlink_lmmse(ybar: C64, gammabar_var: f64, sigma_d2: f64) -> DownlinkEstimate {
    let c = downlink_coefficient(gammabar_var, sigma_d2);
    DownlinkEstimate {
        gamma_hat: ybar * c,
        hat_var: c * gammabar_var,
        tilde_var: gammabar_var * (1.0 - c),
    }
}
