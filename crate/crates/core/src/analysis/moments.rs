//! Closed-form second moments of the effective downlink gains.
//!
//! Per-AP terms are independent across APs, so every moment of a sum
//! `Σ_m x_m t_m` is evaluated as `Σ_m x_m² (E|t_m|² − |E t_m|²) + |Σ_m x_m E t_m|²`,
//! the full double sum over `m ≠ m'` rearranged into a variance plus a
//! squared mean. All three sums are compensated.
//!
//! With `w_mk` the per-entry power of the NLoS part of the precoder direction
//! (`β` for accurate CSI, `v = β²/(β+σ_u²)` for estimated CSI, `0` for the
//! statistical schemes), the per-AP terms are:
//!
//! * `γ_ki`, `i ≠ k`: mean `x_mi q_mk q_mi ζ_mki`, second moment
//!   `x_mi² (q_mk q_mi |ζ_mki|² + q_mk w_mi ζ_mkk + β_mk q_mi ζ_mii + N β_mk w_mi)`.
//! * `γ̇_kk`: mean `x_mk q_mk ζ_mkk`, second moment `x_mk² q_mk ζ_mkk²`.
//! * `γ̄_kk`: mean `x_mk N w_mk`, second moment `x_mk² B_mk` with
//!   `B = N(N+1)β² + 2qβζ` (accurate),
//!   `B = N(N+1)v² + qζ(β+v) + N(β−v)v` (estimated),
//!   `B = qβζ` (statistical).
//!
//! `γ̇` and `γ̄` are uncorrelated but not orthogonal when `E γ̄ ≠ 0`, so
//! `E|γ_kk|² = E|γ̇|² + E|γ̄|² + 2 Re E[γ̇ γ̄*]` with the cross moment
//! `(Σ x q ζ)(Σ x N w)`.

use std::io::Write;

use ndarray::Array2;

use crate::channel::LinkStatistics;
use crate::estimation::{downlink_coefficient, uplink_coefficients};
use crate::precoder::{PowerAllocation, Scheme};
use crate::sum::{Neumaier, NeumaierC};

/// Closed-form moments of one scheme, one entry per user.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSet {
    pub scheme: Scheme,
    /// `E|γ_kk|²`.
    pub gkk2: Vec<f64>,
    /// `[k, i] ↦ E|γ_ki|²`; the diagonal repeats `gkk2`.
    pub gki2: Array2<f64>,
    /// `E|γ̇_kk|²`.
    pub gdot2: Vec<f64>,
    /// `E|γ̄_kk|²`.
    pub gbar2: Vec<f64>,
    /// `E|γ̂_kk|²`: what the UE knows about `γ̄_kk`.
    pub ghat2: Vec<f64>,
    /// `E|γ̃_kk|²`: what it does not.
    pub gtilde2: Vec<f64>,
    /// `Re E[γ̇_kk γ̄_kk*]`.
    pub cross_dot_bar: Vec<f64>,
    /// `Re E[γ̇_kk γ̂_kk*]`.
    pub cross_dot_hat: Vec<f64>,
    /// `E γ_kk` (real).
    pub mean_gkk: Vec<f64>,
}

impl MomentSet {
    pub fn num_users(&self) -> usize {
        self.gkk2.len()
    }

    /// `Σ_{i≠k} E|γ_ki|²`.
    pub fn interference(&self, k: usize) -> f64 {
        let mut acc = Neumaier::new();
        for (i, &v) in self.gki2.row(k).iter().enumerate() {
            if i != k {
                acc.add(v);
            }
        }
        acc.value()
    }

    /// `E|γ_kk|² − E|γ̇_kk|²`, the textbook form of the fast-fading power that
    /// omits the cross moment. Equals `gbar2 + 2·cross_dot_bar`.
    pub fn bar_difference(&self, k: usize) -> f64 {
        self.gkk2[k] - self.gdot2[k]
    }

    /// Long-format CSV: `scheme,user,field,value`. `e_gki2` rows carry the
    /// stream index in the field name, e.g. `e_gki2[2]`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["scheme", "user", "field", "value"])?;
        let s = self.scheme.to_string();
        for k in 0..self.num_users() {
            let scalar = [
                ("e_gkk2", self.gkk2[k]),
                ("e_gdot2", self.gdot2[k]),
                ("e_gbar2", self.gbar2[k]),
                ("e_ghat2", self.ghat2[k]),
                ("e_gtilde2", self.gtilde2[k]),
                ("cross_dot_bar", self.cross_dot_bar[k]),
                ("cross_dot_hat", self.cross_dot_hat[k]),
                ("mean_gkk", self.mean_gkk[k]),
            ];
            for (f, v) in scalar {
                wr.write_record([s.as_str(), &k.to_string(), f, &v.to_string()])?;
            }
            for (i, v) in self.gki2.row(k).iter().enumerate() {
                if i != k {
                    wr.write_record([s.as_str(), &k.to_string(), &format!("e_gki2[{i}]"), &v.to_string()])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// How the UE-side knowledge of `γ̄` is modelled.
#[derive(Clone, Copy)]
enum UeSide {
    /// `γ̂ = γ̄`.
    Perfect,
    /// `γ̂ = 0`.
    Blind,
    /// LMMSE from pilots with noise `σ_d²`.
    Pilots(f64),
}

/// NLoS precoder-direction power `w_mk`.
fn nlos_power(scheme: Scheme, beta: f64, sigma_u2: f64) -> f64 {
    match scheme {
        Scheme::AccurateCsi => beta,
        Scheme::EstimatedCsi => beta * uplink_coefficients(beta, sigma_u2).1,
        Scheme::StatisticalNoDl | Scheme::StatisticalWithDl => 0.0,
    }
}

/// Per-AP second moment `E|t̄|²` of the fast-fading part of `h_kᵀ u_k*`.
fn bar_second(scheme: Scheme, q: f64, zeta: f64, beta: f64, w: f64, n: f64) -> f64 {
    match scheme {
        Scheme::AccurateCsi => n * (n + 1.0) * beta * beta + 2.0 * q * beta * zeta,
        Scheme::EstimatedCsi => n * (n + 1.0) * w * w + q * zeta * (beta + w) + n * (beta - w) * w,
        Scheme::StatisticalNoDl | Scheme::StatisticalWithDl => q * beta * zeta,
    }
}

fn core(scheme: Scheme, stats: &LinkStatistics, alloc: &PowerAllocation, sigma_u2: f64, ue: UeSide) -> MomentSet {
    let (m, k, n) = stats.los.dim();
    assert_eq!(alloc.x.dim(), (m, k), "allocation shape");
    let nf = n as f64;
    let x = &alloc.x;
    let w = Array2::from_shape_fn((m, k), |(a, u)| nlos_power(scheme, stats.beta[[a, u]], sigma_u2));

    let mut gki2 = Array2::zeros((k, k));
    let mut gdot2 = vec![0.0; k];
    let mut gbar2 = vec![0.0; k];
    let mut cross = vec![0.0; k];
    let mut mean_gkk = vec![0.0; k];

    for u in 0..k {
        // γ̇ and γ̄ per-AP pieces.
        let (mut dot_var, mut dot_mean) = (Neumaier::new(), Neumaier::new());
        let (mut bar_var, mut bar_mean) = (Neumaier::new(), Neumaier::new());
        for a in 0..m {
            let xa = x[[a, u]];
            if xa == 0.0 {
                continue;
            }
            let (q, b, z, wa) = (stats.q[[a, u]], stats.beta[[a, u]], stats.zeta_self(a, u), w[[a, u]]);
            let x2 = xa * xa;
            dot_var.add(x2 * (q * z * z - q * q * z * z));
            dot_mean.add(xa * q * z);
            let mb = nf * wa;
            bar_var.add(x2 * (bar_second(scheme, q, z, b, wa, nf) - mb * mb));
            bar_mean.add(xa * mb);
        }
        let (dm, bm) = (dot_mean.value(), bar_mean.value());
        gdot2[u] = dot_var.value() + dm * dm;
        gbar2[u] = bar_var.value() + bm * bm;
        cross[u] = dm * bm;
        mean_gkk[u] = dm + bm;
        // E|γ_kk|² = E|γ̇|² + E|γ̄|² + 2 Re E[γ̇γ̄*]; the variances add.
        let mut v = Neumaier::new();
        v.add(dot_var.value());
        v.add(bar_var.value());
        gki2[[u, u]] = v.value() + mean_gkk[u] * mean_gkk[u];

        for i in 0..k {
            if i == u {
                continue;
            }
            let mut var = Neumaier::new();
            let mut mean = NeumaierC::new();
            for a in 0..m {
                let xi = x[[a, i]];
                if xi == 0.0 {
                    continue;
                }
                let (qk, qi) = (stats.q[[a, u]], stats.q[[a, i]]);
                let (bk, wi) = (stats.beta[[a, u]], w[[a, i]]);
                let zki = stats.zeta(a, u, i);
                let (zkk, zii) = (stats.zeta_self(a, u), stats.zeta_self(a, i));
                let second = qk * qi * zki.norm_sqr() + qk * wi * zkk + bk * qi * zii + nf * bk * wi;
                let mu = zki * (qk * qi);
                var.add(xi * xi * (second - mu.norm_sqr()));
                mean.add(mu * xi);
            }
            gki2[[u, i]] = var.value() + mean.value().norm_sqr();
        }
    }

    let gkk2 = (0..k).map(|u| gki2[[u, u]]).collect();
    let (ghat2, gtilde2, cross_dot_hat) = match ue {
        UeSide::Perfect => (gbar2.clone(), vec![0.0; k], cross.clone()),
        UeSide::Blind => (vec![0.0; k], gbar2.clone(), vec![0.0; k]),
        UeSide::Pilots(sd2) => {
            let c: Vec<f64> = gbar2.iter().map(|&g| downlink_coefficient(g, sd2)).collect();
            (
                (0..k).map(|u| c[u] * gbar2[u]).collect(),
                (0..k).map(|u| gbar2[u] * (1.0 - c[u])).collect(),
                (0..k).map(|u| c[u] * cross[u]).collect(),
            )
        }
    };
    MomentSet { scheme, gkk2, gki2, gdot2, gbar2, ghat2, gtilde2, cross_dot_bar: cross, cross_dot_hat, mean_gkk }
}

/// Moments with perfect CSI at APs and UEs.
pub fn moments_accurate(stats: &LinkStatistics, alloc: &PowerAllocation) -> MomentSet {
    core(Scheme::AccurateCsi, stats, alloc, 0.0, UeSide::Perfect)
}

/// Moments with uplink-estimated CSI at the APs and downlink-estimated
/// `γ̄_kk` at the UEs.
pub fn moments_estimated(stats: &LinkStatistics, alloc: &PowerAllocation, sigma_u2: f64, sigma_d2: f64) -> MomentSet {
    core(Scheme::EstimatedCsi, stats, alloc, sigma_u2, UeSide::Pilots(sigma_d2))
}

/// Moments of LoS-only precoding, with or without downlink training.
pub fn moments_statistical(
    stats: &LinkStatistics,
    alloc: &PowerAllocation,
    sigma_d2: f64,
    with_dl_training: bool,
) -> MomentSet {
    if with_dl_training {
        core(Scheme::StatisticalWithDl, stats, alloc, 0.0, UeSide::Pilots(sigma_d2))
    } else {
        core(Scheme::StatisticalNoDl, stats, alloc, 0.0, UeSide::Blind)
    }
}

/// Dispatches to the scheme's moment function.
pub fn moments(scheme: Scheme, stats: &LinkStatistics, alloc: &PowerAllocation, sigma_u2: f64, sigma_d2: f64) -> MomentSet {
    match scheme {
        Scheme::AccurateCsi => moments_accurate(stats, alloc),
        Scheme::EstimatedCsi => moments_estimated(stats, alloc, sigma_u2, sigma_d2),
        Scheme::StatisticalNoDl => moments_statistical(stats, alloc, sigma_d2, false),
        Scheme::StatisticalWithDl => moments_statistical(stats, alloc, sigma_d2, true),
    }
}
