//! Brute-force Monte-Carlo estimates of every [`MomentSet`](super::MomentSet)
//! field.
//!
//! The oracle samples `α`, `h̄`, uplink pilot noise and downlink pilot noise
//! itself, forms the channels, precoders and effective gains with plain
//! loops, and averages. It shares no code with the closed-form engine or the
//! channel/precoder modules; its only inputs are the link statistics, the
//! power coefficients and the downlink estimator's `E|γ̄_kk|²` (a parameter of
//! the estimator under test, not a quantity the oracle checks).

use std::f64::consts::FRAC_1_SQRT_2;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::welford::{merge_all, Welford};
use crate::channel::LinkStatistics;
use crate::precoder::{PowerAllocation, Scheme};
use crate::rng::{self, tag, Rng};
use crate::C64;

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl From<&Welford> for Estimate {
    fn from(w: &Welford) -> Self {
        Estimate { mean: w.mean, stderr: w.stderr() }
    }
}

/// Oracle estimates, field names as in `MomentSet`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleMoments {
    pub scheme: Scheme,
    pub trials: u64,
    pub gkk2: Vec<Estimate>,
    pub gki2: Array2<Estimate>,
    pub gdot2: Vec<Estimate>,
    pub gbar2: Vec<Estimate>,
    pub ghat2: Vec<Estimate>,
    pub gtilde2: Vec<Estimate>,
    pub cross_dot_bar: Vec<Estimate>,
    pub cross_dot_hat: Vec<Estimate>,
    pub mean_gkk: Vec<Estimate>,
    /// `E[|γ_kk|² − |γ̇_kk|²]`.
    pub bar_difference: Vec<Estimate>,
}

const BATCH: u64 = 4096;
/// Per-user scalar fields, in accumulator order.
const SCALARS: usize = 9;

fn gauss(r: &mut Rng) -> C64 {
    let a: f64 = StandardNormal.sample(r);
    let b: f64 = StandardNormal.sample(r);
    C64::new(a * FRAC_1_SQRT_2, b * FRAC_1_SQRT_2)
}

/// Estimates every moment of `scheme` from `trials` joint draws.
/// `gammabar_var[k]` is the `E|γ̄_kk|²` used by the downlink LMMSE.
#[allow(clippy::too_many_arguments)]
pub fn oracle_moments(
    scheme: Scheme,
    stats: &LinkStatistics,
    alloc: &PowerAllocation,
    sigma_u2: f64,
    sigma_d2: f64,
    gammabar_var: &[f64],
    trials: u64,
    seed: u64,
) -> OracleMoments {
    let (m, k, n) = stats.los.dim();
    assert_eq!(gammabar_var.len(), k);
    let fields = k * SCALARS + k * k;
    let batches = trials.div_ceil(BATCH);
    let parts: Vec<Vec<Welford>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[tag::ORACLE, b]);
            let mut acc = vec![Welford::default(); fields];
            let mut h = vec![C64::new(0.0, 0.0); m * k * n];
            let mut u = vec![C64::new(0.0, 0.0); m * k * n];
            let mut alpha = vec![0.0; m * k];
            let mut vals = vec![0.0; fields];
            for _ in 0..BATCH.min(trials - b * BATCH) {
                for a in 0..m {
                    for v in 0..k {
                        let l = a * k + v;
                        let al = if r.random::<f64>() < stats.q[[a, v]] { 1.0 } else { 0.0 };
                        alpha[l] = al;
                        let beta = stats.beta[[a, v]];
                        let sb = beta.sqrt();
                        for p in 0..n {
                            let los = stats.los[[a, v, p]] * al;
                            let nl = gauss(&mut r) * sb;
                            h[l * n + p] = los + nl;
                            u[l * n + p] = match scheme {
                                Scheme::AccurateCsi => los + nl,
                                Scheme::EstimatedCsi => {
                                    let y = nl + gauss(&mut r) * sigma_u2.sqrt();
                                    let d = beta + sigma_u2;
                                    // √β ĥ = √β (√β/(β+σ²)) y'.
                                    let est = if d > 0.0 { y * (beta / d) } else { C64::new(0.0, 0.0) };
                                    los + est
                                }
                                _ => los,
                            };
                        }
                    }
                }
                for v in 0..k {
                    let mut g_kk = C64::new(0.0, 0.0);
                    let mut dot = 0.0;
                    for i in 0..k {
                        let mut g = C64::new(0.0, 0.0);
                        for a in 0..m {
                            let (lk, li) = ((a * k + v) * n, (a * k + i) * n);
                            let mut t = C64::new(0.0, 0.0);
                            for p in 0..n {
                                t += h[lk + p] * u[li + p].conj();
                            }
                            g += t * alloc.x[[a, i]];
                            if i == v {
                                let mut z = 0.0;
                                for p in 0..n {
                                    z += stats.los[[a, v, p]].norm_sqr();
                                }
                                dot += alloc.x[[a, v]] * alpha[a * k + v] * z;
                            }
                        }
                        vals[k * SCALARS + v * k + i] = g.norm_sqr();
                        if i == v {
                            g_kk = g;
                        }
                    }
                    let dot = C64::new(dot, 0.0);
                    let bar = g_kk - dot;
                    let w = gauss(&mut r);
                    let hat = match scheme {
                        Scheme::AccurateCsi => bar,
                        Scheme::StatisticalNoDl => C64::new(0.0, 0.0),
                        _ => {
                            let gv = gammabar_var[v];
                            let c = if gv > 0.0 { gv / (gv + sigma_d2) } else { 0.0 };
                            (bar + w * sigma_d2.sqrt()) * c
                        }
                    };
                    let tilde = bar - hat;
                    let s = &mut vals[v * SCALARS..(v + 1) * SCALARS];
                    s[0] = g_kk.norm_sqr();
                    s[1] = dot.norm_sqr();
                    s[2] = bar.norm_sqr();
                    s[3] = hat.norm_sqr();
                    s[4] = tilde.norm_sqr();
                    s[5] = (dot * bar.conj()).re;
                    s[6] = (dot * hat.conj()).re;
                    s[7] = g_kk.re;
                    s[8] = g_kk.norm_sqr() - dot.norm_sqr();
                }
                for (w, &x) in acc.iter_mut().zip(&vals) {
                    w.push(x);
                }
            }
            acc
        })
        .collect();
    let tot = crate::sum::pairwise(&parts, &|a, b| merge_all(a, b)).expect("trials >= 1");
    let col = |j: usize| (0..k).map(|v| Estimate::from(&tot[v * SCALARS + j])).collect::<Vec<_>>();
    OracleMoments {
        scheme,
        trials,
        gkk2: col(0),
        gdot2: col(1),
        gbar2: col(2),
        ghat2: col(3),
        gtilde2: col(4),
        cross_dot_bar: col(5),
        cross_dot_hat: col(6),
        mean_gkk: col(7),
        bar_difference: col(8),
        gki2: Array2::from_shape_fn((k, k), |(v, i)| Estimate::from(&tot[k * SCALARS + v * k + i])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_los_has_no_fast_fading() {
        let los = ndarray::Array3::from_shape_fn((2, 2, 1), |(a, v, _)| C64::from_polar(1.0, (a * 3 + v) as f64));
        let s = LinkStatistics::new(los, Array2::ones((2, 2)), Array2::zeros((2, 2)));
        let x = PowerAllocation::from_matrix(Array2::from_elem((2, 2), 0.5), Array2::ones((2, 2)));
        let o = oracle_moments(Scheme::AccurateCsi, &s, &x, 0.1, 0.1, &[0.0, 0.0], 1000, 1);
        for e in &o.gbar2 {
            assert!(e.mean.abs() < 1e-20);
        }
    }

    #[test]
    fn stderr_scales_with_trials() {
        let los = ndarray::Array3::from_elem((2, 1, 1), C64::new(1.0, 0.0));
        let s = LinkStatistics::new(los, Array2::from_elem((2, 1), 0.5), Array2::ones((2, 1)));
        let x = PowerAllocation::from_matrix(Array2::ones((2, 1)), Array2::ones((2, 1)));
        let a = oracle_moments(Scheme::AccurateCsi, &s, &x, 0.0, 0.0, &[1.0], 40_000, 2);
        let b = oracle_moments(Scheme::AccurateCsi, &s, &x, 0.0, 0.0, &[1.0], 80_000, 3);
        let ratio = b.gkk2[0].stderr / a.gkk2[0].stderr;
        assert!((ratio - FRAC_1_SQRT_2).abs() < 0.05, "ratio {ratio}");
    }
}
