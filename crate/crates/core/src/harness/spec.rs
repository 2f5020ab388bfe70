//! Experiment specifications: the config grammar plus experiment keys.
//!
//! Experiment keys: `kind`, `schemes`, `power_mode`, `sweep`, `drops`,
//! `trials_per_drop`, `alpha_mode`, `seed`, `split_per_ap`, `split_per_ue`,
//! `dl_noise`, `sinr_mode`, `log_base`. List values are comma-separated.
//! Every other key must be a [`NetworkConfig`] field.

use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::analysis::SinrMode;
use crate::config::{keyword_enum, parse_pairs, value_of, ConfigError, NetworkConfig, Pair};
use crate::precoder::{PowerControlMode, Scheme, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    LosPmf,
    RateVsSnr,
    RateCdf,
    RateVsDensity,
}

keyword_enum!(Kind {
    "los_pmf" => Kind::LosPmf,
    "rate_vs_snr" => Kind::RateVsSnr,
    "rate_cdf" => Kind::RateCdf,
    "rate_vs_density" => Kind::RateVsDensity,
});

/// Whether LoS indicators are frozen per drop or redrawn per fading draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaMode {
    PerDrop,
    PerRealization,
}

keyword_enum!(AlphaMode { "per_drop" => AlphaMode::PerDrop, "per_realization" => AlphaMode::PerRealization });

/// Downlink pilot noise policy in SNR sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DlNoise {
    /// `σ_d² = σ_o²`: pilots sent at data power.
    Track,
    /// `σ_d² = noise_dl` throughout.
    Fixed,
}

keyword_enum!(DlNoise { "track" => DlNoise::Track, "fixed" => DlNoise::Fixed });

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// M = 1024, K = 64.
    Paper,
    /// M = 256, K = 16.
    Desk,
}

keyword_enum!(Preset { "paper" => Preset::Paper, "desk" => Preset::Desk });

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub config: NetworkConfig,
    pub schemes: Vec<Scheme>,
    pub power_modes: Vec<PowerControlMode>,
    /// SNR points in dB for `rate_vs_snr`, AP counts otherwise.
    pub sweep: Vec<f64>,
    pub drops: usize,
    pub trials_per_drop: usize,
    pub alpha_mode: AlphaMode,
    pub seed: u64,
    pub split_per_ap: Split,
    pub split_per_ue: Split,
    pub dl_noise: DlNoise,
    pub sinr_mode: SinrMode,
    pub log_base: f64,
}

/// Default sweep of `kind` under `preset`.
pub fn default_sweep(kind: Kind, preset: Preset) -> Vec<f64> {
    match (kind, preset) {
        (Kind::LosPmf, _) => vec![128.0, 256.0, 512.0, 1024.0],
        (Kind::RateVsSnr, _) => vec![35.0, 45.0, 55.0, 65.0, 75.0],
        (Kind::RateCdf, Preset::Desk) => vec![256.0],
        (Kind::RateCdf, Preset::Paper) => vec![1024.0],
        (Kind::RateVsDensity, Preset::Desk) => vec![128.0, 256.0, 512.0, 1024.0],
        (Kind::RateVsDensity, Preset::Paper) => vec![128.0, 256.0, 512.0, 1024.0, 2048.0],
    }
}

impl ExperimentSpec {
    /// Preset defaults for `kind`.
    pub fn preset(kind: Kind, preset: Preset) -> Self {
        let (m, k, drops) = match preset {
            Preset::Paper => (1024, 64, 100),
            Preset::Desk => (256, 16, 100),
        };
        // The LoS PMF is cheap at full scale.
        let k = if kind == Kind::LosPmf { 64 } else { k };
        let config = NetworkConfig { num_aps: m, num_ues: k, ..NetworkConfig::default() };
        Self {
            kind,
            config,
            schemes: Scheme::ALL.to_vec(),
            power_modes: vec![PowerControlMode::PerAp, PowerControlMode::PerUe],
            sweep: default_sweep(kind, preset),
            drops,
            trials_per_drop: 200,
            alpha_mode: AlphaMode::PerDrop,
            seed: 1,
            split_per_ap: Split::EqualCoefficient,
            split_per_ue: Split::EqualPower,
            dl_noise: DlNoise::Track,
            sinr_mode: SinrMode::Expected,
            log_base: 2.0,
        }
    }

    /// Parses spec text over a preset. `kind` comes from the text unless
    /// `kind_override` is given; the preset's default sweep follows the kind
    /// unless the text sets `sweep`.
    pub fn parse(text: &str, preset: Preset, kind_override: Option<Kind>) -> Result<Self, ConfigError> {
        let pairs = parse_pairs(text)?;
        let kind = match kind_override {
            Some(k) => k,
            None => {
                let p = pairs
                    .iter()
                    .rfind(|p| p.key == "kind")
                    .ok_or_else(|| ConfigError::Invalid("spec needs a `kind`".into()))?;
                value_of(p)?
            }
        };
        let mut spec = Self::preset(kind, preset);
        for p in &pairs {
            if p.key == "kind" {
                continue;
            }
            if !spec.apply(p)? && !spec.config.apply(p)? {
                return Err(ConfigError::UnknownKey { line: p.line, key: p.key.clone() });
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    fn apply(&mut self, p: &Pair) -> Result<bool, ConfigError> {
        match p.key.as_str() {
            "schemes" => self.schemes = list(p)?,
            "power_mode" => self.power_modes = list(p)?,
            "sweep" => self.sweep = list(p)?,
            "drops" => self.drops = value_of(p)?,
            "trials_per_drop" => self.trials_per_drop = value_of(p)?,
            "alpha_mode" => self.alpha_mode = value_of(p)?,
            "seed" => self.seed = value_of(p)?,
            "split_per_ap" => self.split_per_ap = value_of(p)?,
            "split_per_ue" => self.split_per_ue = value_of(p)?,
            "dl_noise" => self.dl_noise = value_of(p)?,
            "sinr_mode" => self.sinr_mode = value_of(p)?,
            "log_base" => self.log_base = value_of(p)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.sweep.is_empty() {
            return bad("sweep must not be empty");
        }
        if self.drops == 0 || self.trials_per_drop == 0 {
            return bad("drops and trials_per_drop must be >= 1");
        }
        if self.schemes.is_empty() || self.power_modes.is_empty() {
            return bad("schemes and power_mode must not be empty");
        }
        if !(self.log_base > 0.0 && self.log_base != 1.0 && self.log_base.is_finite()) {
            return bad("log_base must be positive and not 1");
        }
        if self.kind != Kind::RateVsSnr {
            for &m in &self.sweep {
                if m < 1.0 || m.fract() != 0.0 {
                    return Err(ConfigError::Invalid(format!("sweep value {m} is not an AP count")));
                }
            }
        }
        for cfg in self.sweep_configs() {
            cfg.validate()?;
        }
        Ok(())
    }

    /// Config at each sweep point: AP count set for AP sweeps, `noise_data`
    /// (and `noise_dl` when tracking) set for SNR sweeps.
    pub fn sweep_configs(&self) -> Vec<NetworkConfig> {
        self.sweep
            .iter()
            .map(|&v| {
                let mut c = self.config.clone();
                match self.kind {
                    Kind::RateVsSnr => {
                        c.noise_data = 10f64.powf(-v / 10.0);
                        if self.dl_noise == DlNoise::Track {
                            c.noise_dl = c.noise_data;
                        }
                    }
                    _ => {
                        c.num_aps = v as usize;
                        if self.dl_noise == DlNoise::Track {
                            c.noise_dl = c.noise_data;
                        }
                    }
                }
                c
            })
            .collect()
    }

    /// Every resolved setting except the seed, one `key = value` per line.
    pub fn canonical(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind);
        for (k, v) in self.config.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "schemes = {}", join(self.schemes.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "power_mode = {}", join(self.power_modes.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "sweep = {}", join(self.sweep.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "drops = {}", self.drops);
        let _ = writeln!(s, "trials_per_drop = {}", self.trials_per_drop);
        let _ = writeln!(s, "alpha_mode = {}", self.alpha_mode);
        let _ = writeln!(s, "split_per_ap = {}", self.split_per_ap);
        let _ = writeln!(s, "split_per_ue = {}", self.split_per_ue);
        let _ = writeln!(s, "dl_noise = {}", self.dl_noise);
        let _ = writeln!(s, "sinr_mode = {}", self.sinr_mode);
        let _ = writeln!(s, "log_base = {}", self.log_base);
        s
    }

    /// First 12 hex digits of SHA-256 over [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical().as_bytes());
        d.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Output file stem `<kind>-<hash>-seed<seed>`.
    pub fn file_stem(&self) -> String {
        format!("{}-{}-seed{}", self.kind, self.hash(), self.seed)
    }

    pub fn split(&self, mode: PowerControlMode) -> Split {
        match mode {
            PowerControlMode::PerAp => self.split_per_ap,
            PowerControlMode::PerUe => self.split_per_ue,
        }
    }
}

fn list<T: FromStr>(p: &Pair) -> Result<Vec<T>, ConfigError> {
    p.value
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| ConfigError::BadValue {
                line: p.line,
                key: p.key.clone(),
                value: s.trim().to_string(),
            })
        })
        .collect()
}
