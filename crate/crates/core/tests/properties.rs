use distortion_exponent::box_scheme::box_is_achievable;
use distortion_exponent::broadcast::bs_finite_closed_form_l;
use distortion_exponent::lp::{solve, LpBuilder};
use distortion_exponent::montecarlo::decoding_profile;
use distortion_exponent::*;
use proptest::prelude::*;

fn b(x: f64) -> BandwidthRatio {
    BandwidthRatio::new(x).unwrap()
}

fn channel() -> impl Strategy<Value = ChannelConfig> {
    (1usize..=4, 1usize..=4, 1usize..=3).prop_map(|(m, n, l)| ChannelConfig::new(m, n, l).unwrap())
}

fn single_block() -> impl Strategy<Value = ChannelConfig> {
    (1usize..=4, 1usize..=4).prop_map(|(m, n)| ChannelConfig::mimo(m, n).unwrap())
}

proptest! {
    #[test]
    fn decomposition_reconstructs_rate(cfg in channel(), dg in 0.05f64..1.0, u in 0.0f64..1.0) {
        let r = u * cfg.min_ant() as f64 * dg * 0.999;
        let d = decompose_rate(r, dg, &cfg).unwrap();
        prop_assert!(d.k < cfg.min_ant() && d.a < cfg.blocks());
        prop_assert!(d.delta >= 0.0 && d.delta < dg / cfg.blocks() as f64 + 1e-12);
        prop_assert!((d.reconstruct(dg, cfg.blocks()) - r).abs() < 1e-9);
    }

    #[test]
    fn dmt_is_non_increasing(cfg in single_block(), r1 in 0.0f64..4.0, r2 in 0.0f64..4.0) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(dmt_zheng_tse(hi, &cfg) <= dmt_zheng_tse(lo, &cfg) + 1e-12);
        prop_assert!((layer_diversity(lo.min(cfg.min_ant() as f64 - 1e-3), 1.0, 0.0, &cfg).unwrap()
            - dmt_zheng_tse(lo.min(cfg.min_ant() as f64 - 1e-3), &cfg)).abs() < 1e-12);
    }

    #[test]
    fn layer_diversity_scales_with_power(cfg in single_block(), s in 0.1f64..1.0, g in 0.0f64..0.9, u in 0.0f64..0.99) {
        let r = u * cfg.min_ant() as f64 * (1.0 - g);
        let base = layer_diversity(r, 1.0, g, &cfg).unwrap();
        let scaled = layer_diversity(r * s, s, g * s, &cfg).unwrap();
        prop_assert!((scaled - s * base).abs() < 1e-9);
    }

    #[test]
    fn single_block_layer_diversity_matches(cfg in single_block(), g in 0.0f64..0.9, u in 0.0f64..0.99) {
        let r = u * cfg.min_ant() as f64 * (1.0 - g);
        prop_assert_eq!(layer_diversity(r, 1.0, g, &cfg).unwrap(), layer_diversity_l(r, 1.0, g, &cfg).unwrap());
    }

    #[test]
    fn schemes_stay_below_informed_bound(cfg in channel(), x in 0.05f64..12.0) {
        let bound = informed_transmitter_bound(b(x), &cfg);
        let bs = bs_limit_exponent_l(b(x), &cfg).exponent;
        prop_assert!(bs <= bound + 1e-9, "bs {} > bound {}", bs, bound);
        let ls = lsblend_best_l(b(x), &cfg).unwrap().exponent;
        prop_assert!(ls <= bound + 1e-9, "lsblend {} > bound {}", ls, bound);
        prop_assert!(ls <= cfg.full_diversity() + 1e-9);
    }

    #[test]
    fn multi_block_reduces_to_single_block(cfg in single_block(), x in 0.05f64..12.0) {
        let one = bs_limit_exponent(b(x), &cfg).unwrap().exponent;
        prop_assert!((bs_limit_exponent_l(b(x), &cfg).exponent - one).abs() < 1e-9);
        for k in 1..=cfg.min_ant() {
            match (lsblend_exponent(b(x), &cfg, k), lsblend_exponent_l(b(x), &cfg, k, 0)) {
                (Ok(one), Ok(multi)) => prop_assert!((one.exponent - multi.exponent).abs() < 1e-9),
                (one, multi) => prop_assert_eq!(one.is_err(), multi.is_err()),
            }
        }
    }

    #[test]
    fn lsblend_is_non_decreasing_in_b(cfg in channel(), x in 0.05f64..10.0, dx in 0.0f64..2.0) {
        let lo = lsblend_best_l(b(x), &cfg).unwrap().exponent;
        let hi = lsblend_best_l(b(x + dx), &cfg).unwrap().exponent;
        prop_assert!(hi >= lo - 1e-9);
    }

    #[test]
    fn finite_closed_form_grows_with_layers(cfg in channel(), x in 0.05f64..10.0, n in 1usize..12) {
        let band = distortion_exponent::broadcast::locate_band(x, &cfg);
        prop_assume!(!band.flat && band.band.k < cfg.min_ant());
        let (k, a) = (band.band.k, band.band.a);
        let e1 = bs_finite_closed_form_l(b(x), &cfg, k, a, n).unwrap();
        let e2 = bs_finite_closed_form_l(b(x), &cfg, k, a, n + 1).unwrap();
        let limit = bs_limit_exponent_l(b(x), &cfg).exponent;
        prop_assert!(e2 >= e1 - 1e-9);
        prop_assert!(e2 <= limit + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greedy_success_is_sound(m in 1usize..=3, n in 1usize..=3, x in 0.1f64..4.0, d_frac in 0.0f64..1.0,
                               ns in 1usize..=4, nt in 1usize..=4, max_power in any::<bool>()) {
        let cfg = ChannelConfig::mimo(m, n).unwrap();
        let order = if max_power { FillOrder::MaxAvailablePower } else { FillOrder::Sequential };
        let d = d_frac * informed_transmitter_bound(b(x), &cfg);
        let (ok, grid) = box_is_achievable(d, b(x), &cfg, ns, nt, order).unwrap();
        if ok {
            let e = box_grid_exponent(&grid, b(x), &cfg).unwrap();
            prop_assert!(e >= d - 1e-6, "certified {} but grid gives {}", d, e);
        }
    }

    #[test]
    fn box_respects_bound(m in 1usize..=3, n in 1usize..=3, x in 0.1f64..6.0, ns in 1usize..=3, nt in 1usize..=3) {
        let cfg = ChannelConfig::mimo(m, n).unwrap();
        let e = box_max_exponent(b(x), &cfg, ns, nt, FillOrder::Sequential, 1e-4).unwrap().exponent;
        prop_assert!(e <= informed_transmitter_bound(b(x), &cfg) + 1e-6);
    }

    #[test]
    fn lp_optimum_dominates_feasible_points(
        c in prop::collection::vec(-2.0f64..2.0, 3),
        a in prop::collection::vec(prop::collection::vec(0.0f64..2.0, 3), 1..4),
        rhs in prop::collection::vec(0.5f64..3.0, 4),
        probes in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 32),
    ) {
        let mut builder = LpBuilder::new(3);
        for (v, &cv) in c.iter().enumerate() {
            builder = builder.maximize(v, cv);
        }
        for v in 0..3 {
            builder.bounds(v, 0.0, 4.0);
        }
        for (row, &r) in a.iter().zip(&rhs) {
            let terms: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
            builder.le(&terms, r);
        }
        let lp = builder.build().unwrap();
        let sol = solve(&lp);
        // the origin is feasible, so the program is always solvable
        prop_assert!(sol.is_optimal());
        let x = sol.x.unwrap();
        let best = sol.value.unwrap();
        prop_assert!(lp.violation(&x) < 1e-9);
        prop_assert!((lp.value_at(&x) - best).abs() < 1e-9);
        for p in probes {
            let y: Vec<f64> = p.iter().map(|v| v * 4.0).collect();
            if lp.violation(&y) <= 0.0 {
                prop_assert!(lp.value_at(&y) <= best + 1e-9);
            }
        }
    }
}

#[test]
fn box_exponent_does_not_fall_with_more_layers() {
    let cfg = ChannelConfig::mimo(2, 2).unwrap();
    for x in [0.5, 1.0, 2.0, 3.0] {
        let mut prev = 0.0;
        for ns in 1..=4 {
            let e = box_max_exponent(b(x), &cfg, ns, 3, FillOrder::Sequential, 1e-4).unwrap().exponent;
            assert!(e >= prev - 1e-3, "b={x} Ns={ns}: {e} < {prev}");
            prev = e;
        }
    }
}

#[test]
fn bruteforce_dominates_greedy_on_small_grids() {
    for (m, n) in [(1, 1), (2, 2)] {
        let cfg = ChannelConfig::mimo(m, n).unwrap();
        for x in [0.5, 1.0, 2.0] {
            let greedy = box_max_exponent(b(x), &cfg, 2, 2, FillOrder::Sequential, 1e-4).unwrap().exponent;
            let brute = box_bruteforce_small(b(x), &cfg, 2, 2).unwrap().exponent;
            assert!(brute >= greedy - 1e-3, "{m}x{n} b={x}: brute {brute} < greedy {greedy}");
        }
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn simulation_ignores_thread_count() {
    let cfg = ChannelConfig::mimo(2, 2).unwrap();
    let plan = SimPlan::new(20_000, 5, vec![10.0, 20.0]).unwrap();
    let run = || distortion_exponent::montecarlo::layer_outage_curve(1.0, 1.0, 0.0, &cfg, &plan).unwrap();
    assert_eq!(in_pool(1, run), in_pool(4, run));

    let alloc = Allocation::Layers(bs_allocation_thm1(b(2.0), &cfg, 0, 3, 0.03).unwrap());
    let sim = || distortion_exponent::montecarlo::scheme_distortion_curve(&alloc, b(2.0), &cfg, &plan).unwrap();
    assert_eq!(in_pool(1, sim), in_pool(4, sim));
}

#[test]
fn genie_outage_bounds_cascade_stops() {
    let cfg = ChannelConfig::mimo(1, 1).unwrap();
    let plan = SimPlan::new(50_000, 9, vec![15.0, 25.0]).unwrap();
    let alloc = Allocation::Layers(bs_allocation_thm1(b(0.5), &cfg, 0, 4, 0.03).unwrap());
    for p in decoding_profile(&alloc, b(0.5), &cfg, &plan).unwrap() {
        for (stop, genie) in p.stop.iter().zip(&p.genie) {
            assert!(genie >= stop, "snr {}: genie {genie} < stop {stop}", p.snr_db);
        }
        assert!(p.stop.iter().sum::<f64>() <= 1.0 + 1e-12);
    }
}
