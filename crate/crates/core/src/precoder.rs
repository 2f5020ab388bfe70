//! Conjugate precoders for the four schemes and the two power normalizations.
//!
//! Every scheme precodes stream `k` at AP `m` with `p_mk = x_mk · u_mk*`,
//! where the direction `u_mk` is
//!
//! | scheme            | `u_mk`                 |
//! |-------------------|------------------------|
//! | accurate CSI      | `h_mk`                 |
//! | estimated CSI     | `α_mk ḣ_mk + √β_mk ĥ_mk` |
//! | statistical (both)| `α_mk ḣ_mk`            |
//!
//! and `x_mk ≥ 0` comes from [`solve_power`].

use std::io::Write;

use ndarray::{Array2, Array3};
use thiserror::Error;

use crate::channel::{ChannelRealization, LinkStatistics};
use crate::config::keyword_enum;
use crate::estimation::uplink_coefficients;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    AccurateCsi,
    EstimatedCsi,
    StatisticalNoDl,
    StatisticalWithDl,
}

keyword_enum!(Scheme {
    "accurate" => Scheme::AccurateCsi,
    "estimated" => Scheme::EstimatedCsi,
    "stat_no_dl" => Scheme::StatisticalNoDl,
    "stat_with_dl" => Scheme::StatisticalWithDl,
});

impl Scheme {
    pub const ALL: [Scheme; 4] =
        [Scheme::AccurateCsi, Scheme::EstimatedCsi, Scheme::StatisticalNoDl, Scheme::StatisticalWithDl];

    pub fn is_statistical(self) -> bool {
        matches!(self, Scheme::StatisticalNoDl | Scheme::StatisticalWithDl)
    }

    /// Human-readable label for plots.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::AccurateCsi => "Full BF, accurate CSI",
            Scheme::EstimatedCsi => "Full BF, estimated CSI",
            Scheme::StatisticalNoDl => "Statistical BF, no DL training",
            Scheme::StatisticalWithDl => "Statistical BF, DL training",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PowerControlMode {
    /// `E‖y_m‖² = E_a` for every AP.
    PerAp,
    /// `Σ_m E‖y_mk‖² = E_u` for every UE.
    PerUe,
}

keyword_enum!(PowerControlMode { "per_ap" => PowerControlMode::PerAp, "per_ue" => PowerControlMode::PerUe });

/// How a constraint group's budget is divided among its active streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    /// Equal expected power per active stream: `x² s = budget/|active|`.
    EqualPower,
    /// Equal coefficient for every active stream: `x² = budget/Σ s`.
    EqualCoefficient,
}

keyword_enum!(Split { "equal_power" => Split::EqualPower, "equal_coefficient" => Split::EqualCoefficient });

/// `E‖u_mk‖²` given the link's `q`, `ζ_mkk`, `β`, `N` and `σ_u²`.
pub fn stream_power_of(scheme: Scheme, q: f64, zeta_kk: f64, beta: f64, n: usize, sigma_u2: f64) -> f64 {
    let los = q * zeta_kk;
    match scheme {
        Scheme::AccurateCsi => los + n as f64 * beta,
        Scheme::EstimatedCsi => los + n as f64 * beta * uplink_coefficients(beta, sigma_u2).1,
        Scheme::StatisticalNoDl | Scheme::StatisticalWithDl => los,
    }
}

/// Expected squared norm of the unscaled beamformer column, `E‖p_mk‖²/x_mk²`.
pub fn expected_stream_power(scheme: Scheme, stats: &LinkStatistics, sigma_u2: f64, m: usize, k: usize) -> f64 {
    stream_power_of(scheme, stats.q[[m, k]], stats.zeta_self(m, k), stats.beta[[m, k]], stats.antennas(), sigma_u2)
}

/// [`expected_stream_power`] for every link.
pub fn stream_powers(scheme: Scheme, stats: &LinkStatistics, sigma_u2: f64) -> Array2<f64> {
    Array2::from_shape_fn(stats.q.dim(), |(m, k)| expected_stream_power(scheme, stats, sigma_u2, m, k))
}

/// Power coefficients `x_mk` with accounting metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation {
    pub x: Array2<f64>,
    /// Expected stream powers the allocation was solved against.
    pub stream_power: Array2<f64>,
    /// APs whose row of `x` is all zero.
    pub silent_aps: Vec<usize>,
    pub warnings: Vec<String>,
}

impl PowerAllocation {
    /// Wraps an externally chosen coefficient matrix.
    pub fn from_matrix(x: Array2<f64>, stream_power: Array2<f64>) -> Self {
        assert_eq!(x.dim(), stream_power.dim());
        assert!(x.iter().all(|&v| v >= 0.0 && v.is_finite()), "x must be finite and nonnegative");
        let silent_aps = silent_rows(&x);
        Self { x, stream_power, silent_aps, warnings: Vec::new() }
    }

    /// `Σ_mk x_mk² s_mk`.
    pub fn radiated_power(&self) -> f64 {
        crate::sum::sum(self.x.iter().zip(&self.stream_power).map(|(x, s)| x * x * s))
    }

    /// Expected power of AP `m`.
    pub fn ap_power(&self, m: usize) -> f64 {
        crate::sum::sum(self.x.row(m).iter().zip(self.stream_power.row(m)).map(|(x, s)| x * x * s))
    }

    /// Expected power spent on UE `k`.
    pub fn ue_power(&self, k: usize) -> f64 {
        crate::sum::sum(self.x.column(k).iter().zip(self.stream_power.column(k)).map(|(x, s)| x * x * s))
    }

    pub fn silent_fraction(&self) -> f64 {
        self.silent_aps.len() as f64 / self.x.nrows() as f64
    }

    /// CSV with header `ap,ue0,ue1,…`; one row per AP.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let k = self.x.ncols();
        let mut header = vec!["ap".to_string()];
        header.extend((0..k).map(|u| format!("ue{u}")));
        wr.write_record(&header)?;
        for (m, row) in self.x.rows().into_iter().enumerate() {
            let mut rec = vec![m.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn silent_rows(x: &Array2<f64>) -> Vec<usize> {
    x.rows().into_iter().enumerate().filter(|(_, r)| r.iter().all(|&v| v == 0.0)).map(|(m, _)| m).collect()
}

/// Solves the power constraint of `mode` with `budget` per group (`E_a` for
/// PerAp, `E_u` for PerUe). Streams with zero expected power get `x = 0`; a
/// group with no active stream gets a zero allocation and a warning.
pub fn solve_power(
    mode: PowerControlMode,
    split: Split,
    scheme: Scheme,
    stats: &LinkStatistics,
    sigma_u2: f64,
    budget: f64,
) -> PowerAllocation {
    assert!(budget > 0.0, "budget must be positive");
    let s = stream_powers(scheme, stats, sigma_u2);
    let mut x = Array2::zeros(s.dim());
    let mut warnings = Vec::new();
    let groups = match mode {
        PowerControlMode::PerAp => s.nrows(),
        PowerControlMode::PerUe => s.ncols(),
    };
    for g in 0..groups {
        let (sg, mut xg) = match mode {
            PowerControlMode::PerAp => (s.row(g), x.row_mut(g)),
            PowerControlMode::PerUe => (s.column(g), x.column_mut(g)),
        };
        let active = sg.iter().filter(|&&v| v > 0.0).count();
        if active == 0 {
            warnings.push(format!("{scheme} {mode}: group {g} has no usable stream"));
            continue;
        }
        let total = crate::sum::sum(sg.iter().copied());
        for (xv, &sv) in xg.iter_mut().zip(sg.iter()) {
            if sv > 0.0 {
                *xv = match split {
                    Split::EqualPower => (budget / (active as f64 * sv)).sqrt(),
                    Split::EqualCoefficient => (budget / total).sqrt(),
                };
            }
        }
    }
    let silent_aps = silent_rows(&x);
    PowerAllocation { x, stream_power: s, silent_aps, warnings }
}

#[derive(Debug, Error, PartialEq)]
pub enum PrecoderError {
    #[error("estimated-CSI precoding needs uplink estimates; run estimation first")]
    MissingEstimates,
}

/// Precoder columns `p_mk`, indexed `[m, k, n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    pub p: Array3<C64>,
}

/// Builds `p_mk = x_mk u_mk*` for every AP and stream.
pub fn build_precoders(
    scheme: Scheme,
    real: &ChannelRealization,
    stats: &LinkStatistics,
    alloc: &PowerAllocation,
) -> Result<PrecoderSet, PrecoderError> {
    let (m, k, n) = stats.los.dim();
    let est = match scheme {
        Scheme::EstimatedCsi => Some(real.est_nlos.as_ref().ok_or(PrecoderError::MissingEstimates)?),
        _ => None,
    };
    let mut p = Array3::zeros((m, k, n));
    for a in 0..m {
        for u in 0..k {
            let x = alloc.x[[a, u]];
            if x == 0.0 {
                continue;
            }
            let al = f64::from(real.alpha[[a, u]]);
            let sb = stats.beta[[a, u]].sqrt();
            for q in 0..n {
                let los = stats.los[[a, u, q]] * al;
                let dir = match scheme {
                    Scheme::AccurateCsi => los + real.nlos[[a, u, q]] * sb,
                    Scheme::EstimatedCsi => los + est.expect("checked")[[a, u, q]] * sb,
                    Scheme::StatisticalNoDl | Scheme::StatisticalWithDl => los,
                };
                p[[a, u, q]] = dir.conj() * x;
            }
        }
    }
    Ok(PrecoderSet { p })
}

/// Effective downlink gains of one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannels {
    /// `[k, i] ↦ γ_ki = Σ_m h_mkᵀ p_mi`.
    pub gamma: Array2<C64>,
    /// `γ̇_kk = Σ_m x_mk α_mk ζ_mkk`.
    pub dot: Vec<C64>,
    /// `γ̄_kk = γ_kk − γ̇_kk`.
    pub bar: Vec<C64>,
}

/// Evaluates every `γ_ki` and the split of `γ_kk`.
pub fn effective_channels(
    real: &ChannelRealization,
    stats: &LinkStatistics,
    pre: &PrecoderSet,
    alloc: &PowerAllocation,
) -> EffectiveChannels {
    let h = real.composite_all(stats);
    effective_channels_with(&h, real, stats, pre, alloc)
}

/// [`effective_channels`] with the composite channels already formed.
pub fn effective_channels_with(
    h: &Array3<C64>,
    real: &ChannelRealization,
    stats: &LinkStatistics,
    pre: &PrecoderSet,
    alloc: &PowerAllocation,
) -> EffectiveChannels {
    let (m, k, n) = h.dim();
    let mut gamma = Array2::<C64>::zeros((k, k));
    for a in 0..m {
        for u in 0..k {
            for i in 0..k {
                let mut acc = C64::new(0.0, 0.0);
                for q in 0..n {
                    acc += h[[a, u, q]] * pre.p[[a, i, q]];
                }
                gamma[[u, i]] += acc;
            }
        }
    }
    let dot: Vec<C64> = (0..k)
        .map(|u| {
            let v = crate::sum::sum(
                (0..m).map(|a| alloc.x[[a, u]] * f64::from(real.alpha[[a, u]]) * stats.zeta_self(a, u)),
            );
            C64::new(v, 0.0)
        })
        .collect();
    let bar = (0..k).map(|u| gamma[[u, u]] - dot[u]).collect();
    EffectiveChannels { gamma, dot, bar }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_realization;
    use approx::assert_relative_eq;

    fn stats(m: usize, k: usize, n: usize, q: f64, beta: f64, zeta: f64) -> LinkStatistics {
        let amp = (zeta / n as f64).sqrt();
        let los = Array3::from_shape_fn((m, k, n), |(a, u, p)| C64::from_polar(amp, 0.3 * (a + 2 * u + p) as f64));
        LinkStatistics::new(los, Array2::from_elem((m, k), q), Array2::from_elem((m, k), beta))
    }

    #[test]
    fn stream_power_values() {
        let s = stats(1, 1, 2, 0.5, 1.0, 4.0);
        let p = |sc| expected_stream_power(sc, &s, 1.0, 0, 0);
        assert_relative_eq!(p(Scheme::AccurateCsi), 4.0, max_relative = 1e-14);
        assert_relative_eq!(p(Scheme::EstimatedCsi), 3.0, max_relative = 1e-14);
        assert_relative_eq!(p(Scheme::StatisticalNoDl), 2.0, max_relative = 1e-14);
        let s = stats(1, 1, 3, 1.0, 0.0, 5.0);
        for sc in Scheme::ALL {
            assert_relative_eq!(expected_stream_power(sc, &s, 0.3, 0, 0), 5.0, max_relative = 1e-14);
        }
        let s = stats(1, 1, 3, 0.0, 1.0, 5.0);
        assert_eq!(expected_stream_power(Scheme::StatisticalWithDl, &s, 0.3, 0, 0), 0.0);
    }

    #[test]
    fn per_ap_symmetric_split() {
        let s = stats(1, 4, 2, 0.5, 1.0, 4.0);
        for split in [Split::EqualPower, Split::EqualCoefficient] {
            let a = solve_power(PowerControlMode::PerAp, split, Scheme::AccurateCsi, &s, 0.1, 2.0);
            for &x in a.x.iter() {
                assert_relative_eq!(x * x, 2.0 / (4.0 * 4.0), max_relative = 1e-14);
            }
            assert_relative_eq!(a.ap_power(0), 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn silent_ap_when_no_los() {
        let mut s = stats(3, 2, 1, 1.0, 0.2, 1.0);
        s.q.row_mut(1).fill(0.0);
        let a = solve_power(PowerControlMode::PerAp, Split::EqualPower, Scheme::StatisticalNoDl, &s, 0.1, 1.0);
        assert_eq!(a.silent_aps, vec![1]);
        assert_eq!(a.warnings.len(), 1);
        assert_relative_eq!(a.radiated_power(), 2.0, max_relative = 1e-14);
        let a = solve_power(PowerControlMode::PerAp, Split::EqualPower, Scheme::AccurateCsi, &s, 0.1, 1.0);
        assert!(a.silent_aps.is_empty());
    }

    #[test]
    fn per_ue_identity() {
        let mut s = stats(4, 3, 2, 0.7, 0.5, 2.0);
        s.q[[2, 1]] = 0.0;
        s.beta[[0, 0]] = 3.0;
        for sc in Scheme::ALL {
            for split in [Split::EqualPower, Split::EqualCoefficient] {
                let a = solve_power(PowerControlMode::PerUe, split, sc, &s, 0.2, 1.5);
                for k in 0..3 {
                    assert_relative_eq!(a.ue_power(k), 1.5, max_relative = 1e-13);
                }
            }
        }
    }

    #[test]
    fn estimated_needs_estimates() {
        let s = stats(2, 2, 1, 0.5, 1.0, 1.0);
        let a = solve_power(PowerControlMode::PerAp, Split::EqualPower, Scheme::EstimatedCsi, &s, 0.1, 1.0);
        let r = sample_realization(&s, &mut crate::rng::stream(0, &[0]));
        assert_eq!(build_precoders(Scheme::EstimatedCsi, &r, &s, &a), Err(PrecoderError::MissingEstimates));
    }

    #[test]
    fn single_link_accurate() {
        let s = stats(1, 1, 1, 0.5, 1.0, 1.0);
        let a = PowerAllocation::from_matrix(Array2::from_elem((1, 1), 0.7), Array2::ones((1, 1)));
        let r = sample_realization(&s, &mut crate::rng::stream(3, &[0]));
        let p = build_precoders(Scheme::AccurateCsi, &r, &s, &a).unwrap();
        let h = r.composite(&s, 0, 0)[0];
        assert!((p.p[[0, 0, 0]] - h.conj() * 0.7).norm() < 1e-15);
        let g = effective_channels(&r, &s, &p, &a);
        assert_relative_eq!(g.gamma[[0, 0]].re, 0.7 * h.norm_sqr(), max_relative = 1e-14);
        assert!(g.gamma[[0, 0]].im.abs() < 1e-15);
    }

    #[test]
    fn pure_los_schemes_coincide() {
        let s = stats(3, 2, 2, 1.0, 0.0, 2.0);
        let mut r = sample_realization(&s, &mut crate::rng::stream(4, &[0]));
        crate::estimation::estimate_uplink(&s, &mut r, 0.0, &mut crate::rng::stream(4, &[1]));
        let a = solve_power(PowerControlMode::PerAp, Split::EqualPower, Scheme::AccurateCsi, &s, 0.0, 1.0);
        let gammas: Vec<_> = Scheme::ALL
            .iter()
            .map(|&sc| effective_channels(&r, &s, &build_precoders(sc, &r, &s, &a).unwrap(), &a))
            .collect();
        for g in &gammas[1..] {
            for (u, v) in g.gamma.iter().zip(gammas[0].gamma.iter()) {
                assert!((u - v).norm() < 1e-12);
            }
        }
        for u in 0..2 {
            assert!(gammas[0].bar[u].norm() < 1e-12);
        }
    }

    #[test]
    fn allocation_csv() {
        let a = PowerAllocation::from_matrix(Array2::from_shape_vec((2, 2), vec![0.5, 0.0, 0.0, 0.0]).unwrap(), Array2::ones((2, 2)));
        assert_eq!(a.silent_aps, vec![1]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "ap,ue0,ue1\n0,0.5,0\n1,0,0\n");
    }
}
