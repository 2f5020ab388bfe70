mod common;

use cellfree::analysis::{moments, rate_bound, LOG2};
use cellfree::channel::LinkStatistics;
use cellfree::estimation::{downlink_lmmse, uplink_lmmse};
use cellfree::harness::emit::{read_csv, write_csv};
use cellfree::harness::run::Row;
use cellfree::harness::validate::random_instance;
use cellfree::netgeom::{deploy, erf, los_probability};
use cellfree::precoder::{solve_power, PowerControlMode, Scheme, Split};
use cellfree::{NetworkConfig, C64};
use common::{close, erf_reference};
use proptest::prelude::*;

fn small_config(m: usize, k: usize, n: usize) -> NetworkConfig {
    NetworkConfig { num_aps: m, num_ues: k, antennas_per_ap: n, area_side: 300.0, ..NetworkConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_obey_pythagoras(seed in any::<u64>(), m in 6usize..12, k in 1usize..6) {
        let cfg = small_config(m, k, 1);
        let d = deploy(&cfg, seed).unwrap();
        let dh = cfg.ap_height - cfg.ue_height;
        for (x3, x2) in d.dist3d.iter().zip(d.dist2d.iter()) {
            prop_assert!(close(x3 * x3, x2 * x2 + dh * dh, 1e-12));
            prop_assert!(*x3 >= dh);
        }
    }

    #[test]
    fn los_probability_is_a_decreasing_probability(a in 0.0f64..5e3, b in 0.0f64..5e3) {
        let cfg = NetworkConfig::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p_lo, p_hi) = (los_probability(lo, &cfg).unwrap(), los_probability(hi, &cfg).unwrap());
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
        prop_assert!(p_hi <= p_lo);
    }

    #[test]
    fn zeta_is_hermitian_and_bounded(seed in any::<u64>(), n in 1usize..5) {
        let cfg = small_config(5, 4, n);
        let s = LinkStatistics::from_deployment(&deploy(&cfg, seed).unwrap(), &cfg);
        for m in 0..3 {
            for k in 0..4 {
                for i in 0..4 {
                    let (a, b) = (s.zeta(m, k, i), s.zeta(m, i, k));
                    prop_assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1e-300));
                    prop_assert!(a.norm_sqr() <= s.zeta_self(m, k) * s.zeta_self(m, i) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn moment_identities(seed in any::<u64>(), idx in 0u64..50) {
        let inst = random_instance(seed, idx);
        for (si, &sc) in Scheme::ALL.iter().enumerate() {
            let mo = moments(sc, &inst.stats, &inst.allocs[si], inst.sigma_u2, inst.sigma_d2);
            for u in 0..mo.num_users() {
                // Second moments dominate squared means.
                prop_assert!(mo.gkk2[u] >= mo.mean_gkk[u].powi(2) * (1.0 - 1e-12));
                prop_assert!(close(mo.ghat2[u] + mo.gtilde2[u], mo.gbar2[u], 1e-12));
                prop_assert!(mo.ghat2[u] >= 0.0 && mo.gtilde2[u] >= 0.0);
                prop_assert!(mo.gki2.row(u).iter().all(|&v| v >= 0.0));
                prop_assert_eq!(mo.gki2[[u, u]], mo.gkk2[u]);
            }
        }
    }

    #[test]
    fn allocations_meet_their_budget(seed in any::<u64>(), idx in 0u64..50, budget in 0.1f64..10.0) {
        let inst = random_instance(seed, idx);
        let (m, k) = (inst.stats.num_aps(), inst.stats.num_ues());
        for sc in Scheme::ALL {
            for split in [Split::EqualPower, Split::EqualCoefficient] {
                let a = solve_power(PowerControlMode::PerAp, split, sc, &inst.stats, inst.sigma_u2, budget);
                for ap in 0..m {
                    let p = a.ap_power(ap);
                    prop_assert!(close(p, budget, 1e-12) || (p == 0.0 && a.silent_aps.contains(&ap)));
                }
                let a = solve_power(PowerControlMode::PerUe, split, sc, &inst.stats, inst.sigma_u2, budget);
                for ue in 0..k {
                    prop_assert!(close(a.ue_power(ue), budget, 1e-12) || a.ue_power(ue) == 0.0);
                }
                prop_assert!(close(a.radiated_power(), (0..k).map(|u| a.ue_power(u)).sum(), 1e-12));
            }
        }
    }

    #[test]
    fn bound_falls_with_noise(seed in any::<u64>(), idx in 0u64..50, lo in 1e-3f64..1.0, factor in 1.0f64..100.0) {
        let inst = random_instance(seed, idx);
        for (si, &sc) in Scheme::ALL.iter().enumerate() {
            let mo = moments(sc, &inst.stats, &inst.allocs[si], inst.sigma_u2, inst.sigma_d2);
            let (a, b) = (rate_bound(&mo, lo, LOG2), rate_bound(&mo, lo * factor, LOG2));
            for u in 0..a.len() {
                prop_assert!(a[u] >= 0.0 && b[u] >= 0.0 && b[u] <= a[u]);
            }
        }
    }

    #[test]
    fn estimators_are_linear(
        re in proptest::collection::vec(-5.0f64..5.0, 6),
        scale in -3.0f64..3.0,
        beta in 1e-3f64..5.0,
        s2 in 1e-4f64..2.0,
    ) {
        let y1: Vec<C64> = re.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        let y2: Vec<C64> = y1.iter().rev().map(|v| v * C64::new(0.3, -1.1)).collect();
        let mix: Vec<C64> = y1.iter().zip(&y2).map(|(a, b)| a * scale + b).collect();
        let (e1, e2, em) = (uplink_lmmse(&y1, beta, s2), uplink_lmmse(&y2, beta, s2), uplink_lmmse(&mix, beta, s2));
        for i in 0..3 {
            prop_assert!((em.est[i] - (e1.est[i] * scale + e2.est[i])).norm() <= 1e-12 * (1.0 + em.est[i].norm()));
        }
        let (d1, d2) = (downlink_lmmse(y1[0], beta, s2), downlink_lmmse(y1[0] * scale, beta, s2));
        prop_assert!((d2.gamma_hat - d1.gamma_hat * scale).norm() <= 1e-12 * (1.0 + d2.gamma_hat.norm()));
        prop_assert!(close(d1.hat_var + d1.tilde_var, beta, 1e-12));
    }

    #[test]
    fn erf_is_odd_monotone_and_accurate(a in -6.0f64..6.0, b in -6.0f64..6.0) {
        prop_assert_eq!(erf(-a), -erf(a));
        prop_assert!((erf(a) - erf_reference(a)).abs() <= 1e-12);
        if a <= b {
            prop_assert!(erf(a) <= erf(b));
        }
    }

    #[test]
    fn csv_rows_round_trip(values in proptest::collection::vec((any::<f64>(), -1e300f64..1e300, 0.0f64..1e3), 1..20)) {
        let rows: Vec<Row> = values
            .iter()
            .enumerate()
            .map(|(i, &(v, s, e))| Row {
                kind: "rate_cdf".into(),
                power_mode: if i % 2 == 0 { "per_ap".into() } else { "per_ue".into() },
                sweep: s,
                scheme: "stat_with_dl".into(),
                statistic: format!("pmf[{i}]"),
                value: if v.is_nan() { 0.0 } else { v },
                stderr: e,
            })
            .collect();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }
}
