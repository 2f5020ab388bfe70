//! Jensen rate bounds and Monte-Carlo ergodic rates.
//!
//! For every scheme the useful signal is `γ̇_kk + γ̂_kk` and the effective
//! noise is `E|γ̃_kk|² + Σ_{i≠k} E|γ_ki|² + σ_o²`. Accurate CSI has `γ̂ = γ̄`
//! (so the signal is `γ_kk`), statistical precoding without downlink
//! training has `γ̂ = 0`. The bound moves the expectation inside the log:
//! `log(1 + E|γ̇ + γ̂|² / noise)`.

use std::io::Write;

use rayon::prelude::*;

use super::moments::MomentSet;
use super::welford::{merge_all, Welford};
use crate::channel::{cn01, sample_realization, LinkStatistics};
use crate::estimation::{downlink_coefficient, estimate_uplink};
use crate::precoder::{build_precoders, effective_channels, PowerAllocation, Scheme};
use crate::rng::{self, tag};
use crate::C64;

/// Log base giving bits.
pub const LOG2: f64 = 2.0;

/// Trials per independent RNG stream. Fixed so that results do not depend
/// on the thread count.
const BATCH: usize = 32;

/// Signal-power and effective-noise expectations of user `k`.
fn sinr_terms(m: &MomentSet, k: usize, sigma_o2: f64) -> (f64, f64) {
    let num = match m.scheme {
        Scheme::AccurateCsi => m.gkk2[k],
        _ => (m.gdot2[k] + m.ghat2[k] + 2.0 * m.cross_dot_hat[k]).max(0.0),
    };
    (num, m.gtilde2[k] + m.interference(k) + sigma_o2)
}

/// Per-user Jensen upper bound `log_base(1 + E[signal]/E[noise])`.
pub fn rate_bound(moments: &MomentSet, sigma_o2: f64, base: f64) -> Vec<f64> {
    (0..moments.num_users())
        .map(|k| {
            let (num, den) = sinr_terms(moments, k, sigma_o2);
            if num == 0.0 {
                0.0
            } else {
                (num / den).ln_1p() / base.ln()
            }
        })
        .collect()
}

/// Which SINR the Monte-Carlo average uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SinrMode {
    /// Instantaneous signal over the expected effective noise, as in the
    /// bound derivations. The default.
    Expected,
    /// `|γ_kk|² / (Σ_{i≠k} |γ_ki|² + σ_o²)`: a genie receiver that knows every
    /// instantaneous gain. A sensitivity study, not a bound counterpart.
    Instantaneous,
}

crate::config::keyword_enum!(SinrMode { "expected" => SinrMode::Expected, "instantaneous" => SinrMode::Instantaneous });

/// Monte-Carlo mean rate of one user.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// One noise operating point sharing the fading draws of a sweep.
#[derive(Clone, Copy, Debug)]
pub struct McPoint<'a> {
    /// Closed-form moments at this point's `σ_d²`.
    pub moments: &'a MomentSet,
    pub sigma_o2: f64,
    pub sigma_d2: f64,
}

/// Ergodic rate per user, averaged over `trials` fading draws (and pilot
/// noise) from the stream `(seed, key)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_rate(
    stats: &LinkStatistics,
    alloc: &PowerAllocation,
    moments: &MomentSet,
    sigma_o2: f64,
    sigma_u2: f64,
    sigma_d2: f64,
    trials: usize,
    seed: u64,
    key: &[u64],
    mode: SinrMode,
    base: f64,
) -> Vec<McEstimate> {
    let p = McPoint { moments, sigma_o2, sigma_d2 };
    mc_rate_sweep(stats, alloc, &[p], sigma_u2, trials, seed, key, mode, base).remove(0)
}

/// [`mc_rate`] for several noise points over common fading draws.
/// Returns `[point][user]`. All points must share one scheme.
#[allow(clippy::too_many_arguments)]
pub fn mc_rate_sweep(
    stats: &LinkStatistics,
    alloc: &PowerAllocation,
    points: &[McPoint<'_>],
    sigma_u2: f64,
    trials: usize,
    seed: u64,
    key: &[u64],
    mode: SinrMode,
    base: f64,
) -> Vec<Vec<McEstimate>> {
    assert!(trials >= 1, "trials must be >= 1");
    let Some(first) = points.first() else { return Vec::new() };
    let scheme = first.moments.scheme;
    assert!(points.iter().all(|p| p.moments.scheme == scheme), "mixed schemes");
    let k = stats.num_ues();
    let np = points.len();
    // Expected-noise terms and downlink coefficients per (point, user).
    let den: Vec<f64> = points.iter().flat_map(|p| (0..k).map(move |u| sinr_terms(p.moments, u, p.sigma_o2).1)).collect();
    let coef: Vec<f64> =
        points.iter().flat_map(|p| (0..k).map(move |u| downlink_coefficient(p.moments.gbar2[u], p.sigma_d2))).collect();
    let ln_base = base.ln();

    let batches = trials.div_ceil(BATCH);
    let parts: Vec<Vec<Welford>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut full_key = Vec::with_capacity(key.len() + 2);
            full_key.push(tag::FADING);
            full_key.extend_from_slice(key);
            full_key.push(b as u64);
            let mut r = rng::stream(seed, &full_key);
            let mut acc = vec![Welford::default(); np * k];
            let n_here = BATCH.min(trials - b * BATCH);
            for _ in 0..n_here {
                let mut real = sample_realization(stats, &mut r);
                if scheme == Scheme::EstimatedCsi {
                    estimate_uplink(stats, &mut real, sigma_u2, &mut r);
                }
                let pre = build_precoders(scheme, &real, stats, alloc).expect("estimates present");
                let g = effective_channels(&real, stats, &pre, alloc);
                for (pi, p) in points.iter().enumerate() {
                    for u in 0..k {
                        let idx = pi * k + u;
                        let w = cn01(&mut r);
                        let sinr = match mode {
                            SinrMode::Expected => {
                                let hat = match scheme {
                                    Scheme::AccurateCsi => g.bar[u],
                                    Scheme::StatisticalNoDl => C64::new(0.0, 0.0),
                                    _ => (g.bar[u] + w * p.sigma_d2.sqrt()) * coef[idx],
                                };
                                (g.dot[u] + hat).norm_sqr() / den[idx]
                            }
                            SinrMode::Instantaneous => {
                                let mut intf = crate::sum::Neumaier::new();
                                for i in 0..k {
                                    if i != u {
                                        intf.add(g.gamma[[u, i]].norm_sqr());
                                    }
                                }
                                g.gamma[[u, u]].norm_sqr() / (intf.value() + p.sigma_o2)
                            }
                        };
                        acc[idx].push(sinr.ln_1p() / ln_base);
                    }
                }
            }
            acc
        })
        .collect();
    let total = crate::sum::pairwise(&parts, &|a, b| merge_all(a, b)).expect("at least one batch");
    (0..np)
        .map(|pi| (0..k).map(|u| {
            let w = &total[pi * k + u];
            McEstimate { mean: w.mean, stderr: w.stderr() }
        }).collect())
        .collect()
}

/// Bound and Monte-Carlo rate per user for one scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub scheme: Scheme,
    pub bound: Vec<f64>,
    pub mc: Vec<McEstimate>,
}

impl RateReport {
    pub fn mean_bound(&self) -> f64 {
        crate::sum::sum(self.bound.iter().copied()) / self.bound.len() as f64
    }

    pub fn mean_mc(&self) -> f64 {
        crate::sum::sum(self.mc.iter().map(|e| e.mean)) / self.mc.len() as f64
    }

    /// Nearest-rank percentile (`p` in [0, 100]) of the per-user MC rates.
    pub fn mc_percentile(&self, p: f64) -> f64 {
        let mut v: Vec<f64> = self.mc.iter().map(|e| e.mean).collect();
        v.sort_by(f64::total_cmp);
        let i = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize - 1;
        v[i.min(v.len() - 1)]
    }

    /// Users with `bound < mc − z·stderr − tol`.
    pub fn jensen_violations(&self, z: f64, tol: f64) -> Vec<usize> {
        (0..self.bound.len())
            .filter(|&k| self.bound[k] < self.mc[k].mean - z * self.mc[k].stderr - tol)
            .collect()
    }

    /// CSV with header `scheme,user,bound,mc_mean,mc_stderr`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["scheme", "user", "bound", "mc_mean", "mc_stderr"])?;
        for (k, (b, e)) in self.bound.iter().zip(&self.mc).enumerate() {
            wr.write_record([
                self.scheme.to_string(),
                k.to_string(),
                b.to_string(),
                e.mean.to_string(),
                e.stderr.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::moments::{moments, moments_statistical};
    use crate::precoder::{solve_power, PowerControlMode, Split};
    use approx::assert_relative_eq;
    use ndarray::{Array2, Array3};

    fn ms(scheme: Scheme, k: usize) -> MomentSet {
        MomentSet {
            scheme,
            gkk2: vec![0.0; k],
            gki2: Array2::zeros((k, k)),
            gdot2: vec![0.0; k],
            gbar2: vec![0.0; k],
            ghat2: vec![0.0; k],
            gtilde2: vec![0.0; k],
            cross_dot_bar: vec![0.0; k],
            cross_dot_hat: vec![0.0; k],
            mean_gkk: vec![0.0; k],
        }
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(rate_bound(&ms(Scheme::AccurateCsi, 2), 1.0, LOG2), vec![0.0, 0.0]);
        let mut m = ms(Scheme::AccurateCsi, 1);
        m.gkk2[0] = 3.0;
        assert_relative_eq!(rate_bound(&m, 1.0, LOG2)[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(rate_bound(&m, 1.0, std::f64::consts::E)[0], 4f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn downlink_training_never_hurts() {
        // Same channel statistics; σ_d² = 0 moves all of γ̄ into the signal.
        let los = Array3::from_shape_fn((3, 2, 1), |(a, u, _)| C64::from_polar(1.0 + a as f64, u as f64));
        let s = LinkStatistics::new(los, Array2::from_elem((3, 2), 0.6), Array2::from_elem((3, 2), 0.8));
        let a = solve_power(PowerControlMode::PerAp, Split::EqualPower, Scheme::StatisticalNoDl, &s, 0.0, 1.0);
        let no = rate_bound(&moments_statistical(&s, &a, 0.0, false), 0.5, LOG2);
        let with = rate_bound(&moments_statistical(&s, &a, 0.0, true), 0.5, LOG2);
        for k in 0..2 {
            assert!(with[k] >= no[k]);
        }
    }

    #[test]
    fn deterministic_channel_mc_equals_bound() {
        let los = Array3::from_shape_fn((2, 2, 2), |(a, u, p)| C64::from_polar(0.5 + a as f64, 0.7 * (u * p) as f64));
        let s = LinkStatistics::new(los, Array2::ones((2, 2)), Array2::zeros((2, 2)));
        for sc in Scheme::ALL {
            let a = solve_power(PowerControlMode::PerAp, Split::EqualPower, sc, &s, 0.0, 1.0);
            let m = moments(sc, &s, &a, 0.0, 0.0);
            let b = rate_bound(&m, 0.1, LOG2);
            let mc = mc_rate(&s, &a, &m, 0.1, 0.0, 0.0, 40, 5, &[1], SinrMode::Expected, LOG2);
            for k in 0..2 {
                assert_relative_eq!(mc[k].mean, b[k], max_relative = 1e-12);
                assert!(mc[k].stderr < 1e-12);
            }
        }
    }

    #[test]
    fn mc_reproducible_and_thread_invariant() {
        let los = Array3::from_shape_fn((3, 2, 1), |(a, u, _)| C64::from_polar(1.0, (a + u) as f64));
        let s = LinkStatistics::new(los, Array2::from_elem((3, 2), 0.5), Array2::from_elem((3, 2), 0.5));
        let a = solve_power(PowerControlMode::PerUe, Split::EqualPower, Scheme::EstimatedCsi, &s, 0.1, 1.0);
        let m = moments(Scheme::EstimatedCsi, &s, &a, 0.1, 0.2);
        let run = || mc_rate(&s, &a, &m, 0.3, 0.1, 0.2, 100, 9, &[2, 3], SinrMode::Expected, LOG2);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        assert_eq!(one, many);
        let single = mc_rate(&s, &a, &m, 0.3, 0.1, 0.2, 1, 9, &[2, 3], SinrMode::Expected, LOG2);
        assert_eq!(single, mc_rate(&s, &a, &m, 0.3, 0.1, 0.2, 1, 9, &[2, 3], SinrMode::Expected, LOG2));
    }

    #[test]
    fn percentiles_and_violations() {
        let r = RateReport {
            scheme: Scheme::AccurateCsi,
            bound: vec![1.0, 2.0, 3.0, 4.0],
            mc: [0.5, 2.5, 2.9, 3.0].iter().map(|&m| McEstimate { mean: m, stderr: 0.1 }).collect(),
        };
        assert_eq!(r.mc_percentile(50.0), 2.5);
        assert_eq!(r.mc_percentile(0.0), 0.5);
        assert_eq!(r.mc_percentile(100.0), 3.0);
        assert_eq!(r.jensen_violations(3.0, 0.0), vec![1]);
    }
}
