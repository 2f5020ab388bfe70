//! Network topologies and deterministic link geometry.
//!
//! APs and UEs are placed i.i.d. uniformly over a square (no wrap-around).
//! Each AP gets a uniformly random array orientation at deployment time; the
//! departure angle θ is measured from that array's broadside.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{ConfigError, LosExponent, NetworkConfig, NlosReference};
use crate::rng::{self, tag};

/// Standard error function.
///
/// The LoS model defines erf as `(1/√π)∫_{−z}^{z} e^{−t²} dt`, which is the
/// standard function.
pub fn erf(z: f64) -> f64 {
    libm::erf(z)
}

/// Blockage constant ω of the LoS model. Errors unless ω ∈ [0, 1].
pub fn omega(cfg: &NetworkConfig) -> Result<f64, ConfigError> {
    let (lm, lu, rho) = (cfg.ap_height, cfg.ue_height, cfg.avg_blockage_height);
    if lm <= lu {
        return Err(ConfigError::Invalid("ap_height must exceed ue_height".into()));
    }
    let s = rho * std::f64::consts::SQRT_2;
    let w = (PI / 2.0).sqrt() * rho / (lm - lu) * (erf(lm / s) - erf(lu / s));
    if !(0.0..=1.0).contains(&w) {
        return Err(ConfigError::Invalid(format!(
            "blockage parameters give omega = {w}, outside [0, 1]"
        )));
    }
    Ok(w)
}

/// LoS probability law with ω cached.
#[derive(Clone, Copy, Debug)]
pub struct LosModel {
    base: f64,
    eta_mu: f64,
    exponent: LosExponent,
}

impl LosModel {
    pub fn new(cfg: &NetworkConfig) -> Result<Self, ConfigError> {
        Ok(Self {
            base: 1.0 - omega(cfg)?,
            eta_mu: cfg.built_fraction * cfg.blockage_density,
            exponent: cfg.los_exponent,
        })
    }

    /// `(1 − ω)^e(d)`, clamped to [0, 1]. `d2d` must be ≥ 0.
    pub fn probability(&self, d2d: f64) -> f64 {
        let e = match self.exponent {
            LosExponent::Linear => self.eta_mu.sqrt() * d2d,
            LosExponent::Sqrt => (self.eta_mu * d2d).sqrt(),
        };
        if e == 0.0 {
            return 1.0;
        }
        self.base.powf(e).clamp(0.0, 1.0)
    }
}

/// LoS probability of a link with ground distance `d2d`.
pub fn los_probability(d2d: f64, cfg: &NetworkConfig) -> Result<f64, ConfigError> {
    Ok(LosModel::new(cfg)?.probability(d2d))
}

/// NLoS gain and whether the distance was clamped up to `d0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLoss {
    pub gain: f64,
    pub clamped: bool,
}

/// Gain of the NLoS log-distance law at `d0`.
pub fn nlos_reference_gain(cfg: &NetworkConfig) -> f64 {
    let d0 = cfg.pathloss_ref_distance;
    match cfg.nlos_reference {
        NlosReference::FreeSpace => (cfg.wavelength() / (4.0 * PI * d0)).powi(2),
        NlosReference::LosAnchored => {
            cfg.ap_gain * cfg.ue_gain * (cfg.ue_height * cfg.ap_height / (4.0 * PI * d0)).powi(2)
        }
    }
}

/// Log-distance NLoS gain `β = β(d0)·(d0/d)^n`. Distances below `d0` are
/// clamped to `d0` and flagged.
pub fn nlos_pathloss(d3d: f64, cfg: &NetworkConfig) -> PathLoss {
    let d0 = cfg.pathloss_ref_distance;
    let clamped = d3d < d0;
    let d = d3d.max(d0);
    PathLoss { gain: nlos_reference_gain(cfg) * (d0 / d).powf(cfg.pathloss_exponent), clamped }
}

/// A network drop and its per-link geometry. Matrices are indexed `[m, k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Deployment {
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// Broadside direction of each AP array (radians).
    pub ap_orientation: Vec<f64>,
    pub dist3d: Array2<f64>,
    pub dist2d: Array2<f64>,
    pub angle: Array2<f64>,
    pub los_prob: Array2<f64>,
    pub beta: Array2<f64>,
    /// Links whose 3-D distance was below the path-loss reference distance.
    pub clamped_links: usize,
}

/// Fixed positions overriding the random draw.
#[derive(Clone, Debug, Default)]
pub struct Placement {
    pub aps: Option<Vec<[f64; 2]>>,
    pub ues: Option<Vec<[f64; 2]>>,
    pub orientations: Option<Vec<f64>>,
}

/// Draws a deployment. Identical `(cfg, seed)` gives an identical result.
pub fn deploy(cfg: &NetworkConfig, seed: u64) -> Result<Deployment, ConfigError> {
    deploy_with(cfg, seed, &Placement::default())
}

/// [`deploy`] with any of positions or orientations pinned by `fixed`.
pub fn deploy_with(
    cfg: &NetworkConfig,
    seed: u64,
    fixed: &Placement,
) -> Result<Deployment, ConfigError> {
    cfg.validate()?;
    let (m, k) = (cfg.num_aps, cfg.num_ues);
    let mut r = rng::stream(seed, &[tag::DEPLOY]);
    let side = cfg.area_side;
    let mut draw = |n: usize| -> Vec<[f64; 2]> {
        (0..n).map(|_| [r.random::<f64>() * side, r.random::<f64>() * side]).collect()
    };
    let aps = draw(m);
    let ues = draw(k);
    let orient: Vec<f64> = (0..m).map(|_| r.random::<f64>() * 2.0 * PI).collect();
    let aps = pinned(fixed.aps.as_ref(), aps, m, "aps")?;
    let ues = pinned(fixed.ues.as_ref(), ues, k, "ues")?;
    let orient = pinned(fixed.orientations.as_ref(), orient, m, "orientations")?;

    let los = LosModel::new(cfg)?;
    let dh = cfg.ap_height - cfg.ue_height;
    let mut dep = Deployment {
        dist3d: Array2::zeros((m, k)),
        dist2d: Array2::zeros((m, k)),
        angle: Array2::zeros((m, k)),
        los_prob: Array2::zeros((m, k)),
        beta: Array2::zeros((m, k)),
        ap_positions: aps,
        ue_positions: ues,
        ap_orientation: orient,
        clamped_links: 0,
    };
    for a in 0..m {
        for u in 0..k {
            let dx = dep.ue_positions[u][0] - dep.ap_positions[a][0];
            let dy = dep.ue_positions[u][1] - dep.ap_positions[a][1];
            let d2 = dx.hypot(dy);
            let d3 = d2.hypot(dh);
            let pl = nlos_pathloss(d3, cfg);
            dep.dist2d[[a, u]] = d2;
            dep.dist3d[[a, u]] = d3;
            dep.angle[[a, u]] = wrap_angle(dy.atan2(dx) - dep.ap_orientation[a]);
            dep.los_prob[[a, u]] = los.probability(d2);
            dep.beta[[a, u]] = pl.gain;
            dep.clamped_links += pl.clamped as usize;
        }
    }
    if cfg.shadowing_db > 0.0 {
        // Frozen per deployment, drawn after all geometry.
        let ln10 = std::f64::consts::LN_10;
        for b in dep.beta.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut r);
            *b *= (z * cfg.shadowing_db * ln10 / 10.0).exp();
        }
    }
    Ok(dep)
}

fn pinned<T: Clone>(
    fixed: Option<&Vec<T>>,
    drawn: Vec<T>,
    n: usize,
    what: &str,
) -> Result<Vec<T>, ConfigError> {
    match fixed {
        None => Ok(drawn),
        Some(v) if v.len() == n => Ok(v.clone()),
        Some(v) => Err(ConfigError::Invalid(format!("placement: {} {what} given, need {n}", v.len()))),
    }
}

/// Maps an angle to (−π, π].
fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn omega_table_defaults() {
        // 40-digit evaluation of the ω expression.
        assert_relative_eq!(
            omega(&NetworkConfig::default()).unwrap(),
            0.952_930_522_760_983_5,
            max_relative = 1e-13
        );
    }

    #[test]
    fn los_probability_at_100m() {
        let mut cfg = NetworkConfig::default();
        assert_relative_eq!(los_probability(100.0, &cfg).unwrap(), 0.023_683_416_712_974_27, max_relative = 1e-11);
        cfg.los_exponent = LosExponent::Sqrt;
        assert_relative_eq!(los_probability(100.0, &cfg).unwrap(), 0.687_771_912_013_528, max_relative = 1e-11);
        assert_eq!(los_probability(0.0, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn omega_stays_in_unit_interval() {
        // erf is concave on [0, ∞), so ω ≤ 1 with equality only as ρ → ∞.
        for rho in [0.01, 1.0, 20.0, 1e3, 1e6] {
            let cfg = NetworkConfig { avg_blockage_height: rho, ..Default::default() };
            let w = omega(&cfg).unwrap();
            assert!((0.0..=1.0).contains(&w), "rho {rho}: {w}");
        }
        let cfg = NetworkConfig { ap_height: 1.5, ue_height: 1.5, ..Default::default() };
        assert!(matches!(omega(&cfg), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn pathloss_anchors() {
        let mut cfg = NetworkConfig { nlos_reference: NlosReference::FreeSpace, ..Default::default() };
        let lam = 299_792_458.0 / 3.5e9;
        let at_d0 = nlos_pathloss(1.0, &cfg);
        assert_relative_eq!(at_d0.gain, (lam / (4.0 * PI)).powi(2), max_relative = 1e-14);
        assert!(!at_d0.clamped);
        assert_relative_eq!(nlos_pathloss(100.0, &cfg).gain, 2.123_662_944_209_687e-12, max_relative = 1e-12);
        cfg.pathloss_exponent = 2.0;
        assert_relative_eq!(nlos_pathloss(2.0, &cfg).gain, at_d0.gain / 4.0, max_relative = 1e-14);
        let near = nlos_pathloss(0.5, &cfg);
        assert!(near.clamped);
        assert_eq!(near.gain, at_d0.gain);
        cfg = NetworkConfig::default();
        assert_relative_eq!(nlos_pathloss(100.0, &cfg).gain, 6.512_725_743_850_19e-8, max_relative = 1e-12);
    }

    #[test]
    fn coincident_positions() {
        let cfg = NetworkConfig { num_aps: 2, num_ues: 1, ..Default::default() };
        let fixed = Placement {
            aps: Some(vec![[10.0, 20.0], [10.0, 20.0]]),
            ues: Some(vec![[10.0, 20.0]]),
            orientations: None,
        };
        let d = deploy_with(&cfg, 1, &fixed).unwrap();
        assert_eq!(d.dist2d[[0, 0]], 0.0);
        assert_relative_eq!(d.dist3d[[0, 0]], 8.5);
        assert_eq!(d.los_prob[[0, 0]], 1.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = NetworkConfig::default();
        assert_eq!(deploy(&cfg, 9).unwrap(), deploy(&cfg, 9).unwrap());
        assert_ne!(deploy(&cfg, 9).unwrap().ap_positions, deploy(&cfg, 10).unwrap().ap_positions);
    }

    #[test]
    fn shadowing_is_off_by_default_and_frozen_when_on() {
        let cfg = NetworkConfig { num_aps: 8, num_ues: 2, ..Default::default() };
        let plain = deploy(&cfg, 3).unwrap();
        let sh = NetworkConfig { shadowing_db: 8.0, ..cfg.clone() };
        let a = deploy(&sh, 3).unwrap();
        assert_eq!(a, deploy(&sh, 3).unwrap());
        assert_eq!(a.ap_positions, plain.ap_positions);
        assert_ne!(a.beta, plain.beta);
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-10.0, -PI, 0.0, PI, 3.5, 100.0] {
            let w = wrap_angle(a);
            assert!(w > -PI - 1e-12 && w <= PI);
            assert_relative_eq!(w.sin(), a.sin(), epsilon = 1e-12);
        }
    }
}
