//! The four experiment families.
//!
//! Drops are the unit of parallelism. Every drop derives its deployment,
//! LoS and fading streams from `(seed, AP count, drop index)`, so results
//! depend only on the spec and seed. Per-drop outputs are collected in drop
//! order and reduced sequentially with compensated sums.

use rayon::prelude::*;

use super::spec::{AlphaMode, ExperimentSpec, Kind};
use crate::analysis::{mc_rate, mc_rate_sweep, moments, rate_bound, McEstimate, McPoint, MomentSet};
use crate::channel::{sample_alpha, LinkStatistics};
use crate::config::{ConfigError, NetworkConfig};
use crate::netgeom::deploy;
use crate::precoder::{solve_power, PowerControlMode, Scheme};
use crate::rng::{self, tag};
use crate::sum::Neumaier;

/// One output record. `power_mode` and `scheme` are `-` where not applicable.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub kind: String,
    pub power_mode: String,
    pub sweep: f64,
    pub scheme: String,
    pub statistic: String,
    pub value: f64,
    pub stderr: f64,
}

/// Rows of a completed experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Results {
    pub kind: Kind,
    pub rows: Vec<Row>,
}

impl Results {
    /// The row matching all keys, if any.
    pub fn get(&self, power_mode: &str, sweep: f64, scheme: &str, statistic: &str) -> Option<&Row> {
        self.rows.iter().find(|r| {
            r.power_mode == power_mode && r.sweep == sweep && r.scheme == scheme && r.statistic == statistic
        })
    }

    /// Value of [`get`](Self::get), panicking if absent.
    pub fn value(&self, power_mode: &str, sweep: f64, scheme: &str, statistic: &str) -> f64 {
        self.get(power_mode, sweep, scheme, statistic)
            .unwrap_or_else(|| panic!("no row {power_mode}/{sweep}/{scheme}/{statistic}"))
            .value
    }

    /// Values of every row with `statistic`, in row order.
    pub fn series(&self, power_mode: &str, sweep: f64, scheme: &str, statistic: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.power_mode == power_mode && r.sweep == sweep && r.scheme == scheme && r.statistic == statistic)
            .map(|r| r.value)
            .collect()
    }

    /// Sum of `statistic` over all rows (e.g. Jensen counters).
    pub fn total(&self, statistic: &str) -> f64 {
        self.rows.iter().filter(|r| r.statistic == statistic).map(|r| r.value).sum()
    }
}

/// Runs `spec` on a pool of `workers` threads.
pub fn run(spec: &ExperimentSpec, workers: usize) -> Result<Results, ConfigError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| match spec.kind {
        Kind::LosPmf => run_los_pmf(spec),
        Kind::RateVsSnr => run_rate_vs_snr(spec),
        Kind::RateCdf => run_rate_cdf(spec),
        Kind::RateVsDensity => run_rate_vs_density(spec),
    })
}

fn require(spec: &ExperimentSpec, kind: Kind) -> Result<(), ConfigError> {
    if spec.kind != kind {
        return Err(ConfigError::Invalid(format!("spec kind is {}, expected {kind}", spec.kind)));
    }
    spec.validate()
}

fn drop_seed(spec: &ExperimentSpec, m: usize, d: usize) -> u64 {
    rng::stream_id(&[spec.seed, tag::DEPLOY, m as u64, d as u64])
}

fn row(kind: Kind, mode: &str, sweep: f64, scheme: &str, stat: &str, value: f64, stderr: f64) -> Row {
    Row {
        kind: kind.to_string(),
        power_mode: mode.to_string(),
        sweep,
        scheme: scheme.to_string(),
        statistic: stat.to_string(),
        value,
        stderr,
    }
}

/// Mean and standard error of the mean.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mut s = Neumaier::new();
    v.iter().for_each(|&x| s.add(x));
    let mean = s.value() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let mut ss = Neumaier::new();
    v.iter().for_each(|&x| ss.add((x - mean) * (x - mean)));
    (mean, (ss.value() / (n - 1.0) / n).sqrt())
}

/// PMF of the number of LoS links per UE, one histogram per AP count.
/// Statistics are `pmf[c]` (c = count) and `mean_count`.
pub fn run_los_pmf(spec: &ExperimentSpec) -> Result<Results, ConfigError> {
    require(spec, Kind::LosPmf)?;
    let mut rows = Vec::new();
    for cfg in spec.sweep_configs() {
        let m = cfg.num_aps;
        let per_drop: Vec<Vec<usize>> = (0..spec.drops)
            .into_par_iter()
            .map(|d| {
                let dep = deploy(&cfg, drop_seed(spec, m, d))?;
                let alpha = sample_alpha(&dep.los_prob, &mut rng::stream(spec.seed, &[tag::ALPHA, m as u64, d as u64]));
                Ok(alpha.columns().into_iter().map(|c| c.iter().map(|&a| a as usize).sum()).collect())
            })
            .collect::<Result<_, ConfigError>>()?;
        let counts: Vec<usize> = per_drop.into_iter().flatten().collect();
        let n = counts.len() as f64;
        let max = counts.iter().copied().max().unwrap_or(0);
        let mut hist = vec![0usize; max + 1];
        counts.iter().for_each(|&c| hist[c] += 1);
        let x = m as f64;
        for (c, &h) in hist.iter().enumerate() {
            let p = h as f64 / n;
            rows.push(row(Kind::LosPmf, "-", x, "-", &format!("pmf[{c}]"), p, (p * (1.0 - p) / n).sqrt()));
        }
        let (mean, se) = mean_se(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
        rows.push(row(Kind::LosPmf, "-", x, "-", "mean_count", mean, se));
    }
    Ok(Results { kind: Kind::LosPmf, rows })
}

/// Per-user results of one (drop, mode, scheme, noise point).
#[derive(Clone, Debug)]
struct PointOut {
    bound: Vec<f64>,
    mc: Vec<McEstimate>,
    flagged: usize,
    confirmed: usize,
}

#[derive(Clone, Debug)]
struct GroupOut {
    mode: PowerControlMode,
    scheme: Scheme,
    silent: f64,
    radiated: f64,
    points: Vec<PointOut>,
}

/// Full pipeline for one drop at every `(σ_o², σ_d²)` point.
fn rate_drop(spec: &ExperimentSpec, cfg: &NetworkConfig, noise: &[(f64, f64)], d: usize) -> Result<Vec<GroupOut>, ConfigError> {
    let (m, k) = (cfg.num_aps, cfg.num_ues);
    let dep = deploy(cfg, drop_seed(spec, m, d))?;
    let base_stats = LinkStatistics::from_deployment(&dep, cfg);
    let stats = match spec.alpha_mode {
        AlphaMode::PerDrop => {
            let alpha = sample_alpha(&base_stats.q, &mut rng::stream(spec.seed, &[tag::ALPHA, m as u64, d as u64]));
            base_stats.conditioned(&alpha)
        }
        AlphaMode::PerRealization => base_stats,
    };
    let su2 = cfg.noise_ul;
    let ea = cfg.power_budget;
    let key = [m as u64, d as u64];
    let mut out = Vec::new();
    for &mode in &spec.power_modes {
        let budget = match mode {
            PowerControlMode::PerAp => ea,
            PowerControlMode::PerUe => ea * m as f64 / k as f64,
        };
        for &scheme in &spec.schemes {
            let alloc = solve_power(mode, spec.split(mode), scheme, &stats, su2, budget);
            let ms: Vec<MomentSet> = noise.iter().map(|&(_, sd2)| moments(scheme, &stats, &alloc, su2, sd2)).collect();
            let pts: Vec<McPoint> = ms
                .iter()
                .zip(noise)
                .map(|(mo, &(so2, sd2))| McPoint { moments: mo, sigma_o2: so2, sigma_d2: sd2 })
                .collect();
            let mc = mc_rate_sweep(&stats, &alloc, &pts, su2, spec.trials_per_drop, spec.seed, &key, spec.sinr_mode, spec.log_base);
            let mut points = Vec::new();
            for (pi, (mo, mcp)) in ms.iter().zip(mc).enumerate() {
                let (so2, sd2) = noise[pi];
                let bound = rate_bound(mo, so2, spec.log_base);
                let viol = |b: &[f64], e: &[McEstimate]| -> Vec<usize> {
                    (0..k).filter(|&u| b[u] < e[u].mean - 3.0 * e[u].stderr - 1e-9 * b[u].max(1.0)).collect()
                };
                let flagged = viol(&bound, &mcp);
                let mut confirmed = 0;
                if !flagged.is_empty() {
                    let trials = (16 * spec.trials_per_drop).max(4000);
                    let rkey = [tag::RETEST, m as u64, d as u64, pi as u64];
                    let re = mc_rate(&stats, &alloc, mo, so2, su2, sd2, trials, spec.seed, &rkey, spec.sinr_mode, spec.log_base);
                    let again = viol(&bound, &re);
                    confirmed = flagged.iter().filter(|u| again.contains(u)).count();
                }
                points.push(PointOut { bound, mc: mcp, flagged: flagged.len(), confirmed });
            }
            out.push(GroupOut {
                mode,
                scheme,
                silent: alloc.silent_fraction(),
                radiated: alloc.radiated_power() / (m as f64 * ea),
                points,
            });
        }
    }
    Ok(out)
}

fn run_drops(spec: &ExperimentSpec, cfg: &NetworkConfig, noise: &[(f64, f64)]) -> Result<Vec<Vec<GroupOut>>, ConfigError> {
    (0..spec.drops).into_par_iter().map(|d| rate_drop(spec, cfg, noise, d)).collect()
}

/// Mean-rate rows for group `g` at point `pi` across drops.
fn mean_rows(kind: Kind, drops: &[Vec<GroupOut>], g: usize, pi: usize, x: f64, rows: &mut Vec<Row>) {
    let head = &drops[0][g];
    let (mode, scheme) = (head.mode.to_string(), head.scheme.to_string());
    let user_mean = |v: &mut dyn Iterator<Item = f64>| -> f64 {
        let mut s = Neumaier::new();
        let mut n = 0;
        v.for_each(|x| {
            s.add(x);
            n += 1;
        });
        s.value() / n as f64
    };
    let b: Vec<f64> = drops.iter().map(|d| user_mean(&mut d[g].points[pi].bound.iter().copied())).collect();
    let mc: Vec<f64> = drops.iter().map(|d| user_mean(&mut d[g].points[pi].mc.iter().map(|e| e.mean))).collect();
    let silent: Vec<f64> = drops.iter().map(|d| d[g].silent).collect();
    let rad: Vec<f64> = drops.iter().map(|d| d[g].radiated).collect();
    let checked = drops.iter().map(|d| d[g].points[pi].bound.len()).sum::<usize>() as f64;
    let flagged = drops.iter().map(|d| d[g].points[pi].flagged).sum::<usize>() as f64;
    let confirmed = drops.iter().map(|d| d[g].points[pi].confirmed).sum::<usize>() as f64;
    for (stat, (v, se)) in [
        ("bound_mean", mean_se(&b)),
        ("mc_mean", mean_se(&mc)),
        ("silent_ap_fraction", mean_se(&silent)),
        ("radiated_power_fraction", mean_se(&rad)),
        ("jensen_checked", (checked, 0.0)),
        ("jensen_flagged", (flagged, 0.0)),
        ("jensen_confirmed", (confirmed, 0.0)),
    ] {
        rows.push(row(kind, &mode, x, &scheme, stat, v, se));
    }
}

/// Mean per-user bound and MC rate versus data SNR (dB). `σ_o² = 10^(−SNR/10)`.
pub fn run_rate_vs_snr(spec: &ExperimentSpec) -> Result<Results, ConfigError> {
    require(spec, Kind::RateVsSnr)?;
    let cfgs = spec.sweep_configs();
    let noise: Vec<(f64, f64)> = cfgs.iter().map(|c| (c.noise_data, c.noise_dl)).collect();
    let drops = run_drops(spec, &spec.config, &noise)?;
    let mut rows = Vec::new();
    for g in 0..drops[0].len() {
        for (pi, &x) in spec.sweep.iter().enumerate() {
            mean_rows(Kind::RateVsSnr, &drops, g, pi, x, &mut rows);
        }
    }
    Ok(Results { kind: Kind::RateVsSnr, rows })
}

/// Mean per-user rates versus AP count at the configured `noise_data`.
pub fn run_rate_vs_density(spec: &ExperimentSpec) -> Result<Results, ConfigError> {
    require(spec, Kind::RateVsDensity)?;
    let mut rows = Vec::new();
    for (cfg, &x) in spec.sweep_configs().iter().zip(&spec.sweep) {
        let drops = run_drops(spec, cfg, &[(cfg.noise_data, cfg.noise_dl)])?;
        for g in 0..drops[0].len() {
            mean_rows(Kind::RateVsDensity, &drops, g, 0, x, &mut rows);
        }
    }
    Ok(Results { kind: Kind::RateVsDensity, rows })
}

/// Rates at or below this count as zero in `p_zero`.
const ZERO_RATE: f64 = 1e-12;

/// Empirical CDF of per-user MC rates pooled over drops. Statistics:
/// `q05`, `q50`, `q95`, `p_zero`, the mean-rate rows, and one `sample` row per
/// pooled rate in ascending order.
pub fn run_rate_cdf(spec: &ExperimentSpec) -> Result<Results, ConfigError> {
    require(spec, Kind::RateCdf)?;
    let mut rows = Vec::new();
    for (cfg, &x) in spec.sweep_configs().iter().zip(&spec.sweep) {
        let drops = run_drops(spec, cfg, &[(cfg.noise_data, cfg.noise_dl)])?;
        for g in 0..drops[0].len() {
            let head = &drops[0][g];
            let (mode, scheme) = (head.mode.to_string(), head.scheme.to_string());
            let mut samples: Vec<f64> = drops.iter().flat_map(|d| d[g].points[0].mc.iter().map(|e| e.mean)).collect();
            samples.sort_by(f64::total_cmp);
            let n = samples.len() as f64;
            let p0 = samples.iter().filter(|&&r| r <= ZERO_RATE).count() as f64 / n;
            rows.push(row(Kind::RateCdf, &mode, x, &scheme, "p_zero", p0, (p0 * (1.0 - p0) / n).sqrt()));
            for (name, p) in [("q05", 5.0), ("q50", 50.0), ("q95", 95.0)] {
                rows.push(row(Kind::RateCdf, &mode, x, &scheme, name, quantile(&samples, p), 0.0));
            }
            mean_rows(Kind::RateCdf, &drops, g, 0, x, &mut rows);
            for s in samples {
                rows.push(row(Kind::RateCdf, &mode, x, &scheme, "sample", s, 0.0));
            }
        }
    }
    Ok(Results { kind: Kind::RateCdf, rows })
}

/// Nearest-rank percentile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let i = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize - 1;
    sorted[i.min(sorted.len() - 1)]
}
