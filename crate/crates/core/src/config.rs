//! Scenario parameters and the flat `key = value` configuration grammar.
//!
//! A config file holds one `key = value` pair per line. `#` starts a comment,
//! blank lines are ignored and every key must name a [`NetworkConfig`] field.
//! Experiment specs extend the same grammar with their own keys.

use std::str::FromStr;

use thiserror::Error;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// One `key = value` line with its 1-based line number.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits config text into pairs. Does not interpret keys.
pub fn parse_pairs(text: &str) -> Result<Vec<Pair>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        }
        out.push(Pair { line: i + 1, key: k.to_string(), value: v.to_string() });
    }
    Ok(out)
}

/// Parses `pair.value` as `T`, mapping failures to [`ConfigError::BadValue`].
pub fn value_of<T: FromStr>(pair: &Pair) -> Result<T, ConfigError> {
    pair.value.parse().map_err(|_| ConfigError::BadValue {
        line: pair.line,
        key: pair.key.clone(),
        value: pair.value.clone(),
    })
}

/// Exponent applied to `1 − ω` in the LoS probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LosExponent {
    /// `d·√(ημ)`: expected number of blockers crossed along the ground path.
    Linear,
    /// `√(ημd)`, the printed form. Yields q ≈ 1 at all deployment distances.
    Sqrt,
}

/// Reference gain of the NLoS log-distance law at `d0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NlosReference {
    /// `G_m G_k (ℓ'ℓ/(4π d0))²`, the LoS gain at `d0`.
    LosAnchored,
    /// `(λ/(4π d0))²`, free-space gain at `d0`.
    FreeSpace,
}

macro_rules! keyword_enum {
    ($ty:ty { $($name:literal => $var:expr),+ $(,)? }) => {
        impl ::std::str::FromStr for $ty {
            type Err = ();
            fn from_str(s: &str) -> Result<Self, ()> {
                match s { $($name => Ok($var),)+ _ => Err(()) }
            }
        }
        impl ::std::fmt::Display for $ty {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                $(if *self == $var { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}
pub(crate) use keyword_enum;

keyword_enum!(LosExponent { "linear" => LosExponent::Linear, "sqrt" => LosExponent::Sqrt });
keyword_enum!(NlosReference {
    "los_anchored" => NlosReference::LosAnchored,
    "free_space" => NlosReference::FreeSpace,
});

/// All scenario parameters. Lengths in meters, powers linear.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_ues: usize,
    pub area_side: f64,
    pub ap_height: f64,
    pub ue_height: f64,
    pub carrier_freq: f64,
    /// `None` means half a wavelength.
    pub antenna_spacing: Option<f64>,
    pub ap_gain: f64,
    pub ue_gain: f64,
    pub built_fraction: f64,
    pub blockage_density: f64,
    pub avg_blockage_height: f64,
    pub noise_ul: f64,
    pub noise_dl: f64,
    pub noise_data: f64,
    pub pathloss_exponent: f64,
    pub pathloss_ref_distance: f64,
    pub power_budget: f64,
    pub los_exponent: LosExponent,
    pub nlos_reference: NlosReference,
    /// Lognormal shadowing standard deviation in dB; 0 disables it.
    pub shadowing_db: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_aps: 256,
            antennas_per_ap: 1,
            num_ues: 16,
            area_side: 1000.0,
            ap_height: 10.0,
            ue_height: 1.5,
            carrier_freq: 3.5e9,
            antenna_spacing: None,
            ap_gain: 1.0,
            ue_gain: 1.0,
            built_fraction: 0.5,
            blockage_density: 300e-6,
            avg_blockage_height: 20.0,
            noise_ul: 1e-9,
            noise_dl: 1e-6,
            noise_data: 1e-6,
            pathloss_exponent: 3.67,
            pathloss_ref_distance: 1.0,
            power_budget: 1.0,
            los_exponent: LosExponent::Linear,
            nlos_reference: NlosReference::LosAnchored,
            shadowing_db: 0.0,
        }
    }
}

impl NetworkConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn spacing(&self) -> f64 {
        self.antenna_spacing.unwrap_or(self.wavelength() / 2.0)
    }

    /// Applies one pair. Returns `Ok(false)` if the key is not a config field.
    pub fn apply(&mut self, p: &Pair) -> Result<bool, ConfigError> {
        match p.key.as_str() {
            "num_aps" => self.num_aps = value_of(p)?,
            "antennas_per_ap" => self.antennas_per_ap = value_of(p)?,
            "num_ues" => self.num_ues = value_of(p)?,
            "area_side" => self.area_side = value_of(p)?,
            "ap_height" => self.ap_height = value_of(p)?,
            "ue_height" => self.ue_height = value_of(p)?,
            "carrier_freq" => self.carrier_freq = value_of(p)?,
            "antenna_spacing" => self.antenna_spacing = Some(value_of(p)?),
            "ap_gain" => self.ap_gain = value_of(p)?,
            "ue_gain" => self.ue_gain = value_of(p)?,
            "built_fraction" => self.built_fraction = value_of(p)?,
            "blockage_density" => self.blockage_density = value_of(p)?,
            "avg_blockage_height" => self.avg_blockage_height = value_of(p)?,
            "noise_ul" => self.noise_ul = value_of(p)?,
            "noise_dl" => self.noise_dl = value_of(p)?,
            "noise_data" => self.noise_data = value_of(p)?,
            "pathloss_exponent" => self.pathloss_exponent = value_of(p)?,
            "pathloss_ref_distance" => self.pathloss_ref_distance = value_of(p)?,
            "power_budget" => self.power_budget = value_of(p)?,
            "los_exponent" => self.los_exponent = value_of(p)?,
            "nlos_reference" => self.nlos_reference = value_of(p)?,
            "shadowing_db" => self.shadowing_db = value_of(p)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Canonical `key = value` lines, one per field, in declaration order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("num_aps", self.num_aps.to_string()),
            ("antennas_per_ap", self.antennas_per_ap.to_string()),
            ("num_ues", self.num_ues.to_string()),
            ("area_side", self.area_side.to_string()),
            ("ap_height", self.ap_height.to_string()),
            ("ue_height", self.ue_height.to_string()),
            ("carrier_freq", self.carrier_freq.to_string()),
        ];
        if let Some(s) = self.antenna_spacing {
            v.push(("antenna_spacing", s.to_string()));
        }
        v.extend([
            ("ap_gain", self.ap_gain.to_string()),
            ("ue_gain", self.ue_gain.to_string()),
            ("built_fraction", self.built_fraction.to_string()),
            ("blockage_density", self.blockage_density.to_string()),
            ("avg_blockage_height", self.avg_blockage_height.to_string()),
            ("noise_ul", self.noise_ul.to_string()),
            ("noise_dl", self.noise_dl.to_string()),
            ("noise_data", self.noise_data.to_string()),
            ("pathloss_exponent", self.pathloss_exponent.to_string()),
            ("pathloss_ref_distance", self.pathloss_ref_distance.to_string()),
            ("power_budget", self.power_budget.to_string()),
            ("los_exponent", self.los_exponent.to_string()),
            ("nlos_reference", self.nlos_reference.to_string()),
            ("shadowing_db", self.shadowing_db.to_string()),
        ]);
        v
    }

    /// Checks every invariant, including that ω lies in [0, 1].
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.num_aps == 0 || self.antennas_per_ap == 0 || self.num_ues == 0 {
            return bad("num_aps, antennas_per_ap and num_ues must be positive");
        }
        if self.num_aps * self.antennas_per_ap <= self.num_ues {
            return bad("need num_aps * antennas_per_ap > num_ues");
        }
        let positive = [
            ("area_side", self.area_side),
            ("ap_height", self.ap_height),
            ("ue_height", self.ue_height),
            ("carrier_freq", self.carrier_freq),
            ("antenna_spacing", self.spacing()),
            ("ap_gain", self.ap_gain),
            ("ue_gain", self.ue_gain),
            ("blockage_density", self.blockage_density),
            ("avg_blockage_height", self.avg_blockage_height),
            ("noise_ul", self.noise_ul),
            ("noise_dl", self.noise_dl),
            ("noise_data", self.noise_data),
            ("pathloss_exponent", self.pathloss_exponent),
            ("pathloss_ref_distance", self.pathloss_ref_distance),
            ("power_budget", self.power_budget),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.built_fraction > 0.0 && self.built_fraction <= 1.0) {
            return bad("built_fraction must lie in (0, 1]");
        }
        if !(self.shadowing_db.is_finite() && self.shadowing_db >= 0.0) {
            return bad("shadowing_db must be >= 0");
        }
        if self.ap_height <= self.ue_height {
            return bad("ap_height must exceed ue_height");
        }
        crate::netgeom::omega(self).map(|_| ())
    }
}

impl FromStr for NetworkConfig {
    type Err = ConfigError;

    /// Parses a config file over the defaults, then validates.
    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = NetworkConfig::default();
        for p in parse_pairs(text)? {
            if !cfg.apply(&p)? {
                return Err(ConfigError::UnknownKey { line: p.line, key: p.key });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        NetworkConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let cfg: NetworkConfig = "# scenario\n\nnum_aps = 128 # APs\nnum_ues=8\nlos_exponent = sqrt\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.num_aps, 128);
        assert_eq!(cfg.num_ues, 8);
        assert_eq!(cfg.los_exponent, LosExponent::Sqrt);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = "num_aps = 4\nfoo = 1\n".parse::<NetworkConfig>().unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey { line: 2, key: "foo".into() });
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(matches!("num_aps 4".parse::<NetworkConfig>(), Err(ConfigError::Syntax { .. })));
        assert!(matches!("num_aps = four".parse::<NetworkConfig>(), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn invariants_are_enforced() {
        let cases = [
            "num_aps = 2\nnum_ues = 2",
            "ap_height = 1\nue_height = 1.5",
            "built_fraction = 1.5",
            "noise_data = 0",
            "blockage_density = -1",
        ];
        for c in cases {
            assert!(matches!(c.parse::<NetworkConfig>(), Err(ConfigError::Invalid(_))), "{c}");
        }
    }

    #[test]
    fn pairs_round_trip() {
        let mut cfg = NetworkConfig { antenna_spacing: Some(0.03), num_aps: 77, ..Default::default() };
        cfg.nlos_reference = NlosReference::FreeSpace;
        let text: String = cfg.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(text.parse::<NetworkConfig>().unwrap(), cfg);
    }
}
