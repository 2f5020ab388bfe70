//! LoS channel vectors, link statistics and fast-fading draws.
//!
//! The channel from AP `m` to UE `k` is `h_mk = α_mk ḣ_mk + √β_mk h̄_mk`
//! with `α_mk ~ Bernoulli(q_mk)` and `h̄_mk ~ CN(0, I_N)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{self, Read, Write};
use std::sync::OnceLock;

use ndarray::{Array2, Array3, ArrayView1};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::config::NetworkConfig;
use crate::netgeom::Deployment;
use crate::rng::Rng;
use crate::C64;

/// ULA steering vector; entry `p` is `exp(ι 2π p (d/λ) sin θ)`.
pub fn array_response(theta: f64, n_antennas: usize, spacing: f64, wavelength: f64) -> Vec<C64> {
    let step = 2.0 * PI * (spacing / wavelength) * theta.sin();
    (0..n_antennas).map(|p| C64::from_polar(1.0, step * p as f64)).collect()
}

/// Geometry and hardware constants of one link.
#[derive(Clone, Copy, Debug)]
pub struct LinkGeometry {
    pub dist3d: f64,
    pub angle: f64,
    pub ap_height: f64,
    pub ue_height: f64,
    pub ap_gain: f64,
    pub ue_gain: f64,
    pub wavelength: f64,
    pub spacing: f64,
    pub antennas: usize,
}

impl LinkGeometry {
    pub fn from_config(cfg: &NetworkConfig, dist3d: f64, angle: f64) -> Self {
        Self {
            dist3d,
            angle,
            ap_height: cfg.ap_height,
            ue_height: cfg.ue_height,
            ap_gain: cfg.ap_gain,
            ue_gain: cfg.ue_gain,
            wavelength: cfg.wavelength(),
            spacing: cfg.spacing(),
            antennas: cfg.antennas_per_ap,
        }
    }

    /// Per-antenna LoS amplitude `√(G_m G_k)·ℓ'ℓ/(4π x)`.
    pub fn los_amplitude(&self) -> f64 {
        (self.ap_gain * self.ue_gain).sqrt() * self.ue_height * self.ap_height
            / (4.0 * PI * self.dist3d)
    }
}

/// Deterministic LoS vector `ḣ = amplitude · exp(ι 2π x/λ) · a(θ)`.
pub fn los_channel(g: &LinkGeometry) -> Vec<C64> {
    let scalar = C64::from_polar(g.los_amplitude(), 2.0 * PI * g.dist3d / g.wavelength);
    array_response(g.angle, g.antennas, g.spacing, g.wavelength)
        .into_iter()
        .map(|a| a * scalar)
        .collect()
}

/// Second-order link quantities consumed by every closed-form moment.
///
/// `los` is indexed `[m, k, n]`; `q` and `beta` are `[m, k]`. The ζ tensor is
/// built lazily one AP slice at a time.
#[derive(Clone, Debug)]
pub struct LinkStatistics {
    pub los: Array3<C64>,
    pub q: Array2<f64>,
    pub beta: Array2<f64>,
    zeta: Vec<OnceLock<Array2<C64>>>,
}

impl LinkStatistics {
    pub fn new(los: Array3<C64>, q: Array2<f64>, beta: Array2<f64>) -> Self {
        let (m, k, _) = los.dim();
        assert_eq!(q.dim(), (m, k), "q shape");
        assert_eq!(beta.dim(), (m, k), "beta shape");
        Self { los, q, beta, zeta: (0..m).map(|_| OnceLock::new()).collect() }
    }

    pub fn from_deployment(dep: &Deployment, cfg: &NetworkConfig) -> Self {
        let (m, k) = dep.dist3d.dim();
        let n = cfg.antennas_per_ap;
        let mut los = Array3::zeros((m, k, n));
        for a in 0..m {
            for u in 0..k {
                let g = LinkGeometry::from_config(cfg, dep.dist3d[[a, u]], dep.angle[[a, u]]);
                for (p, v) in los_channel(&g).into_iter().enumerate() {
                    los[[a, u, p]] = v;
                }
            }
        }
        Self::new(los, dep.los_prob.clone(), dep.beta.clone())
    }

    /// Statistics given the LoS indicators: `q := α`. Shares the ζ cache.
    pub fn conditioned(&self, alpha: &Array2<u8>) -> Self {
        assert_eq!(alpha.dim(), self.q.dim());
        Self {
            los: self.los.clone(),
            q: alpha.mapv(f64::from),
            beta: self.beta.clone(),
            zeta: self.zeta.clone(),
        }
    }

    pub fn num_aps(&self) -> usize {
        self.los.dim().0
    }

    pub fn num_ues(&self) -> usize {
        self.los.dim().1
    }

    pub fn antennas(&self) -> usize {
        self.los.dim().2
    }

    pub fn los_vec(&self, m: usize, k: usize) -> ArrayView1<'_, C64> {
        self.los.slice(ndarray::s![m, k, ..])
    }

    /// `[k, i] ↦ ζ_mki = ḣ_mkᵀ ḣ_mi*` for AP `m`, computed once.
    pub fn zeta_slice(&self, m: usize) -> &Array2<C64> {
        self.zeta[m].get_or_init(|| {
            let k = self.num_ues();
            let mut z = Array2::zeros((k, k));
            for a in 0..k {
                let ha = self.los_vec(m, a);
                z[[a, a]] = C64::new(ha.iter().map(|v| v.norm_sqr()).sum(), 0.0);
                for b in 0..a {
                    let v: C64 = ha.iter().zip(self.los_vec(m, b)).map(|(x, y)| x * y.conj()).sum();
                    z[[a, b]] = v;
                    z[[b, a]] = v.conj();
                }
            }
            z
        })
    }

    pub fn zeta(&self, m: usize, k: usize, i: usize) -> C64 {
        self.zeta_slice(m)[[k, i]]
    }

    /// `ζ_mkk = ‖ḣ_mk‖²`.
    pub fn zeta_self(&self, m: usize, k: usize) -> f64 {
        self.zeta_slice(m)[[k, k]].re
    }
}

/// One fast-fading draw. `est_nlos` holds `ĥ_mk` once estimation has run.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub alpha: Array2<u8>,
    pub nlos: Array3<C64>,
    pub est_nlos: Option<Array3<C64>>,
}

impl ChannelRealization {
    /// `h_mk = α_mk ḣ_mk + √β_mk h̄_mk`.
    pub fn composite(&self, stats: &LinkStatistics, m: usize, k: usize) -> Vec<C64> {
        let a = f64::from(self.alpha[[m, k]]);
        let sb = stats.beta[[m, k]].sqrt();
        stats
            .los_vec(m, k)
            .iter()
            .zip(self.nlos.slice(ndarray::s![m, k, ..]))
            .map(|(l, n)| l * a + n * sb)
            .collect()
    }

    /// All composite channels, indexed `[m, k, n]`.
    pub fn composite_all(&self, stats: &LinkStatistics) -> Array3<C64> {
        let (m, k, n) = self.nlos.dim();
        let mut h = Array3::zeros((m, k, n));
        for a in 0..m {
            for u in 0..k {
                let al = f64::from(self.alpha[[a, u]]);
                let sb = stats.beta[[a, u]].sqrt();
                for p in 0..n {
                    h[[a, u, p]] = stats.los[[a, u, p]] * al + self.nlos[[a, u, p]] * sb;
                }
            }
        }
        h
    }

    /// Binary dump: little-endian u64 `M, K, N, has_est`, then `α` as M·K
    /// bytes, then `h̄` (and `ĥ` if present) as row-major `[m, k, n]` pairs of
    /// f32 (complex64).
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (m, k, n) = self.nlos.dim();
        for d in [m, k, n, self.est_nlos.is_some() as usize] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(self.alpha.as_standard_layout().as_slice().expect("contiguous"))?;
        for arr in std::iter::once(&self.nlos).chain(self.est_nlos.as_ref()) {
            for v in arr.iter() {
                w.write_all(&(v.re as f32).to_le_bytes())?;
                w.write_all(&(v.im as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Inverse of [`write_dump`](Self::write_dump), at f32 precision.
    pub fn read_dump<R: Read>(mut r: R) -> io::Result<Self> {
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *d = usize::try_from(u64::from_le_bytes(b))
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "dimension overflow"))?;
        }
        let [m, k, n, has_est] = dims;
        let mut alpha = vec![0u8; m * k];
        r.read_exact(&mut alpha)?;
        if alpha.iter().any(|&a| a > 1) {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "alpha not binary"));
        }
        let read_arr = |r: &mut R| -> io::Result<Array3<C64>> {
            let mut buf = vec![0u8; m * k * n * 8];
            r.read_exact(&mut buf)?;
            let vals = buf
                .chunks_exact(8)
                .map(|c| {
                    let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                    let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                    C64::new(f64::from(re), f64::from(im))
                })
                .collect();
            Ok(Array3::from_shape_vec((m, k, n), vals).expect("shape"))
        };
        let nlos = read_arr(&mut r)?;
        let est_nlos = if has_est == 1 { Some(read_arr(&mut r)?) } else { None };
        Ok(Self { alpha: Array2::from_shape_vec((m, k), alpha).expect("shape"), nlos, est_nlos })
    }
}

/// Circularly-symmetric unit-variance complex Gaussian.
#[inline]
pub fn cn01(rng: &mut Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * FRAC_1_SQRT_2
}

/// Draws `α ~ Bernoulli(q)` per link and `h̄ ~ CN(0, I_N)`, independently.
pub fn sample_realization(stats: &LinkStatistics, rng: &mut Rng) -> ChannelRealization {
    let (m, k, n) = stats.los.dim();
    let alpha = sample_alpha(&stats.q, rng);
    let nlos = Array3::from_shape_simple_fn((m, k, n), || cn01(rng));
    ChannelRealization { alpha, nlos, est_nlos: None }
}

/// Independent LoS indicators with per-link probabilities `q`.
pub fn sample_alpha(q: &Array2<f64>, rng: &mut Rng) -> Array2<u8> {
    q.mapv(|p| (rng.random::<f64>() < p) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn steering_vector_entries() {
        assert!(array_response(0.0, 5, 0.5, 1.0).iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(array_response(1.2, 1, 0.5, 1.0), vec![C64::new(1.0, 0.0)]);
        // θ = π/6, d = λ/2: phase step π·sin θ = π/2.
        let a = array_response(PI / 6.0, 4, 0.5, 1.0);
        for (p, v) in a.iter().enumerate() {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-15);
            let want = C64::from_polar(1.0, PI / 2.0 * p as f64);
            assert!((v - want).norm() < 1e-12, "entry {p}");
        }
    }

    fn geom(x: f64, n: usize) -> LinkGeometry {
        LinkGeometry {
            dist3d: x,
            angle: 0.3,
            ap_height: 10.0,
            ue_height: 1.5,
            ap_gain: 1.0,
            ue_gain: 1.0,
            wavelength: 0.1,
            spacing: 0.05,
            antennas: n,
        }
    }

    #[test]
    fn los_channel_amplitude_and_phase() {
        let h = los_channel(&geom(10.0, 1));
        assert_relative_eq!(h[0].norm(), 0.119_366_207_318_921_5, max_relative = 1e-14);
        let h2 = los_channel(&geom(20.0, 1));
        assert_relative_eq!(h2[0].norm(), h[0].norm() / 2.0, max_relative = 1e-14);
        let rot = (h2[0] / h[0]).arg();
        let want = (2.0 * PI * 10.0 / 0.1).rem_euclid(2.0 * PI);
        let d = (rot - want).rem_euclid(2.0 * PI);
        assert!(d.min(2.0 * PI - d) < 1e-9);
        let h4 = los_channel(&geom(10.0, 4));
        let norm2: f64 = h4.iter().map(|v| v.norm_sqr()).sum();
        assert_relative_eq!(norm2, 4.0 * geom(10.0, 4).los_amplitude().powi(2), max_relative = 1e-14);
    }

    fn two_link_stats(n: usize, s1: f64, s2: f64) -> LinkStatistics {
        let mut los = Array3::zeros((1, 2, n));
        for (u, s) in [s1, s2].into_iter().enumerate() {
            for (p, v) in array_response(s.asin(), n, 0.5, 1.0).into_iter().enumerate() {
                los[[0, u, p]] = v * (u as f64 + 1.0);
            }
        }
        LinkStatistics::new(los, Array2::from_elem((1, 2), 0.5), Array2::ones((1, 2)))
    }

    #[test]
    fn zeta_orthogonal_steering() {
        // sin θ differing by λ/(N d) = 2/N makes the geometric sum vanish.
        let n = 4;
        let s = two_link_stats(n, 0.1, 0.1 + 2.0 / n as f64);
        assert!(s.zeta(0, 0, 1).norm() < 1e-12);
        assert_relative_eq!(s.zeta_self(0, 1), 4.0 * n as f64, max_relative = 1e-14);
        let s = two_link_stats(1, 0.1, 0.7);
        assert_relative_eq!(s.zeta(0, 0, 1).norm(), 2.0, max_relative = 1e-14);
        assert_eq!(s.zeta(0, 0, 1), s.zeta(0, 1, 0).conj());
    }

    #[test]
    fn zeta_geometric_series() {
        // Σ_p e^{ιpφ} with φ = π(s1 − s2).
        let (n, s1, s2) = (3, 0.2, -0.45);
        let s = two_link_stats(n, s1, s2);
        let phi = PI * (s1 - s2);
        let want = (C64::from_polar(1.0, phi * n as f64) - 1.0) / (C64::from_polar(1.0, phi) - 1.0) * 2.0;
        assert!((s.zeta(0, 0, 1) - want).norm() < 1e-12);
    }

    #[test]
    fn degenerate_draws() {
        let mut s = two_link_stats(2, 0.1, 0.5);
        s.q.fill(0.0);
        let mut r = crate::rng::stream(1, &[0]);
        let z = sample_realization(&s, &mut r);
        assert!(z.alpha.iter().all(|&a| a == 0));
        let h = z.composite(&s, 0, 1);
        for (p, v) in h.iter().enumerate() {
            assert_eq!(*v, z.nlos[[0, 1, p]]);
        }
        s.q.fill(1.0);
        s.beta.fill(0.0);
        let z = sample_realization(&s, &mut r);
        let h = z.composite_all(&s);
        assert_eq!(h, s.los);
    }

    #[test]
    fn dump_round_trip() {
        let s = two_link_stats(3, 0.1, 0.5);
        let mut r = crate::rng::stream(2, &[0]);
        let mut z = sample_realization(&s, &mut r);
        z.est_nlos = Some(z.nlos.mapv(|v| v * 0.5));
        let mut buf = Vec::new();
        z.write_dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 2 + 2 * 2 * 3 * 8);
        assert_eq!(&buf[..8], &1u64.to_le_bytes());
        let back = ChannelRealization::read_dump(buf.as_slice()).unwrap();
        assert_eq!(back.alpha, z.alpha);
        for (a, b) in back.nlos.iter().zip(z.nlos.iter()) {
            assert!((a - b).norm() < 1e-6);
        }
        assert!(back.est_nlos.is_some());
        assert!(ChannelRealization::read_dump(&buf[..40]).is_err());
    }
}
