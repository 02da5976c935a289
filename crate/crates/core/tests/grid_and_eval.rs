use cradapt_core::amc::{AmcMode, AmcTable, LinkThresholds};
use cradapt_core::baselines::{InterweaveRule, UnderlayRule};
use cradapt_core::channel::{sample_block_nonzero, scaled_snirs, ScaledSnir};
use cradapt_core::eval::{evaluate_rule, LinkContext};
use cradapt_core::grid::pilot_points;
use cradapt_core::sim::stream_rng;
use cradapt_core::*;
use proptest::prelude::*;
use std::sync::OnceLock;

fn default_grid() -> &'static RegionGrid {
    static GRID: OnceLock<RegionGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        RegionGrid::design(
            &default_table(),
            &default_scenario(),
            GridLayout { rays: 4, products: 60 },
            20_000,
            200_000,
            3,
        )
        .unwrap()
    })
}

#[test]
fn regions_tile_the_plane() {
    let grid = default_grid();
    let (l, c) = (grid.rays(), grid.products());
    assert_eq!(grid.regions().len(), l * c);
    for (i, r) in grid.regions().iter().enumerate() {
        assert_eq!(r.index, i);
        let (p, s) = (i / l, i % l);
        assert!(r.product_range.0 < r.product_range.1);
        assert!(r.ray_range.0 < r.ray_range.1);
        if s + 1 < l {
            assert_eq!(r.ray_range.1, grid.regions()[i + 1].ray_range.0);
        }
        if p + 1 < c {
            assert_eq!(r.product_range.1, grid.regions()[i + l].product_range.0);
        }
    }
    assert_eq!(grid.regions()[0].product_range.0, 0.0);
    assert_eq!(grid.regions()[0].ray_range.0, 0.0);
    assert!(grid.regions().last().unwrap().product_range.1.is_infinite());
    assert!(grid.regions().last().unwrap().ray_range.1.is_infinite());
    let n: u64 = grid.regions().iter().map(|r| r.samples).sum();
    assert_eq!(n, 200_000);
    let p: f64 = grid.regions().iter().map(|r| r.prob).sum();
    assert!((p - 1.0).abs() < 1e-12);
}

#[test]
fn every_threshold_product_is_a_boundary() {
    let grid = default_grid();
    for z in grid.rate_products() {
        assert!(grid.product_boundaries().contains(z), "{z} is not a cut");
    }
}

#[test]
fn rate_map_non_increasing_in_cognitive_mode() {
    for r in default_grid().regions() {
        for m in 2..r.rate_map.len() {
            assert!(
                r.rate_map[m] <= r.rate_map[m - 1],
                "region {}: {:?}",
                r.index,
                r.rate_map
            );
        }
        assert!(r.silent_primary_rate >= 0.0);
    }
}

/// Highest primary mode meeting its design threshold when the cognitive
/// link meets its own at mode `m`, for a point with `alpha * beta = z`.
fn primary_mode_at(z: f64, m: usize, th: &LinkThresholds) -> usize {
    let g1 = th.primary.as_slice();
    let g2 = th.cognitive.as_slice();
    (1..g1.len()).filter(|&n| g1[n] * g2[m] <= z).max().unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn rate_pairs_constant_within_region(la in -6.0f64..8.0, lb in -6.0f64..8.0) {
        let grid = default_grid();
        let p = ScaledSnir { alpha: 10f64.powf(la), beta: 10f64.powf(lb) };
        let region = &grid.regions()[grid.locate_region(&p)];
        for m in 1..region.rate_map.len() {
            prop_assert_eq!(region.rate_map[m], primary_mode_at(p.product(), m, grid.thresholds()));
        }
    }

    #[test]
    fn located_region_contains_point(la in -6.0f64..8.0, lb in -6.0f64..8.0) {
        let grid = default_grid();
        let p = ScaledSnir { alpha: 10f64.powf(la), beta: 10f64.powf(lb) };
        let r = &grid.regions()[grid.locate_region(&p)];
        prop_assert!(p.product() >= r.product_range.0 && p.product() < r.product_range.1);
        prop_assert!(p.ratio() >= r.ray_range.0 && p.ratio() < r.ray_range.1);
    }
}

/// `P(alpha * beta < z, beta / alpha < w)` for independent ratio variables
/// with CDFs `x r / (1 + x r)`, by quadrature over `ln alpha`.
fn quadrant_prob(z: f64, w: f64, ra: f64, rb: f64) -> f64 {
    let fb = |b: f64| b * rb / (1.0 + b * rb);
    let n = 200_000;
    let (lo, hi) = (-40.0f64, 40.0f64);
    let h = (hi - lo) / n as f64;
    let mut sum = 0.0;
    for k in 0..=n {
        let u = lo + k as f64 * h;
        let a = u.exp();
        // Density of alpha times da/du.
        let f = ra / (1.0 + a * ra).powi(2) * a;
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += weight * f * fb((z / a).min(w * a));
    }
    sum * h / 3.0
}

#[test]
fn two_by_two_probabilities_match_closed_form() {
    let table = AmcTable::new(vec![
        AmcMode::outage(),
        AmcMode {
            index: 1,
            rate: 1.0,
            coeff: 0.2,
            decay: 1.0,
        },
    ])
    .unwrap();
    let mut scenario = default_scenario();
    scenario.mean_gain = [[1.0, 0.2], [0.1, 2.0]];
    let grid = RegionGrid::design(
        &table,
        &scenario,
        GridLayout { rays: 2, products: 2 },
        50_000,
        400_000,
        11,
    )
    .unwrap();
    let z = grid.product_boundaries()[0];
    let w = grid.ray_boundaries()[0];
    let ra = scenario.mean_gain[1][0] / scenario.mean_gain[0][0];
    let rb = scenario.mean_gain[0][1] / scenario.mean_gain[1][1];
    let below_z = quadrant_prob(z, f64::INFINITY, ra, rb);
    let below_w = quadrant_prob(f64::INFINITY, w, ra, rb);
    let both = quadrant_prob(z, w, ra, rb);
    let expect = [both, below_z - both, below_w - both, 1.0 - below_z - below_w + both];
    for (r, e) in grid.regions().iter().zip(expect) {
        let tol = 4.0 * (e * (1.0 - e) / 400_000.0).sqrt();
        assert!((r.prob - e).abs() < tol, "region {}: {} vs {e}", r.index, r.prob);
    }
}

#[test]
fn region_probabilities_deterministic_under_thread_count() {
    let build = || {
        let pilot = pilot_points(&default_scenario(), 20_000, 5);
        let mut g = build_grid(
            &default_table(),
            &default_scenario().ber_targets,
            GridLayout { rays: 2, products: 50 },
            &pilot,
        )
        .unwrap();
        g.estimate_region_stats(&default_scenario(), 150_000, 5).unwrap();
        g
    };
    let a = build();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(build);
    assert_eq!(a, b);
}

#[test]
fn interweave_primary_linear_in_share() {
    let scenario = default_scenario();
    let table = default_table();
    let run = |tau: f64| {
        let rule = InterweaveRule {
            ctx: LinkContext::new(&scenario, &table).unwrap(),
            cfg: TdmaConfig { cognitive_share: tau },
            budget: scenario.cognitive_power_budget,
        };
        evaluate_rule(&rule, &scenario, 100_000, 9)
    };
    let solo = run(0.0);
    assert_eq!(solo.cognitive_ase.mean, 0.0);
    assert_eq!(solo.avg_cognitive_power.mean, 0.0);
    for tau in [0.1, 0.25, 0.5, 0.8, 1.0] {
        let r = run(tau);
        let expect = (1.0 - tau) * solo.primary_ase.mean;
        assert!(
            (r.primary_ase.mean - expect).abs() <= 1e-12 * (1.0 + expect),
            "tau {tau}"
        );
        // Burst power is budget / tau, so the average stays on budget.
        assert!((r.avg_cognitive_power.mean - scenario.cognitive_power_budget).abs() < 1e-12);
    }
}

#[test]
fn underlay_sweep_monotone_in_threshold() {
    let scenario = default_scenario();
    let table = default_table();
    let mut prev: Option<EvaluationReport> = None;
    for pth in [0.0, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 1.0] {
        let rule = UnderlayRule {
            ctx: LinkContext::new(&scenario, &table).unwrap(),
            cfg: UnderlayConfig {
                interference_threshold: pth,
                peak_power: 5.0,
            },
        };
        let r = evaluate_rule(&rule, &scenario, 100_000, 4);
        if let Some(p) = prev {
            // Common random numbers make per-block power, hence both rates,
            // monotone in the threshold.
            assert!(r.cognitive_ase.mean >= p.cognitive_ase.mean);
            assert!(r.primary_ase.mean <= p.primary_ase.mean);
            assert!(r.avg_cognitive_power.mean >= p.avg_cognitive_power.mean);
        }
        prev = Some(r);
    }
}

#[test]
fn evaluation_is_reproducible() {
    let scenario = Scenario {
        required_primary_ase: 2.5,
        ..default_scenario()
    };
    let table = default_table();
    let grid = RegionGrid::design(
        &table,
        &scenario,
        GridLayout { rays: 2, products: 50 },
        20_000,
        200_000,
        8,
    )
    .unwrap();
    let policy = optimize_variable_power(&grid, &scenario).unwrap();
    let eval = || evaluate_policy(&policy, Some(&grid), &scenario, &table, 100_000, 8).unwrap();
    let a = eval();
    assert_eq!(a, eval());
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(eval);
    assert_eq!(a, b);
    assert!(evaluate_policy(&policy, None, &scenario, &table, 1000, 8).is_err());
}

#[test]
fn alpha_samples_follow_ratio_distribution() {
    let scenario = default_scenario();
    let mut rng = stream_rng(21, 0);
    let r = scenario.mean_gain[1][0] / scenario.mean_gain[0][0];
    let n = 50_000;
    let below = (0..n)
        .filter(|_| scaled_snirs(&sample_block_nonzero(&scenario, &mut rng)).unwrap().alpha < 1.0 / r)
        .count();
    // The median of alpha is 1 / r.
    let frac = below as f64 / n as f64;
    assert!((frac - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{frac}");
}

#[test]
fn unconstrained_policy_uses_top_rate_outside_pinned_regions() {
    let scenario = Scenario {
        cognitive_power_budget: f64::INFINITY,
        ..default_scenario()
    };
    let grid = default_grid();
    let policy = optimize_variable_power(grid, &scenario).unwrap();
    assert!(policy.feasible);
    let problem = grid.problem();
    let pinned: f64 = problem.regions.iter().filter(|r| r.pinned).map(|r| r.prob).sum();
    let top = default_table().top_rate();
    assert!((policy.predicted.cognitive - top * (1.0 - pinned)).abs() < 1e-12);
}

#[test]
fn predicted_cognitive_ase_matches_measurement() {
    let table = default_table();
    let n_design = 400_000u64;
    let n_eval = 400_000u64;
    for k1 in [0.0, 2.5, 3.0] {
        let scenario = Scenario {
            required_primary_ase: k1,
            ..default_scenario()
        };
        let grid = RegionGrid::design(
            &table,
            &scenario,
            GridLayout { rays: 2, products: 50 },
            50_000,
            n_design,
            2,
        )
        .unwrap();
        let policy = optimize_variable_power(&grid, &scenario).unwrap();
        let r = evaluate_policy(&policy, Some(&grid), &scenario, &table, n_eval, 2).unwrap();
        // The prediction carries its own sampling error from the design draws.
        let se_pred = r.cognitive_ase.se * (n_eval as f64 / n_design as f64).sqrt();
        let se = (r.cognitive_ase.se.powi(2) + se_pred.powi(2)).sqrt();
        let gap = (policy.predicted.cognitive - r.cognitive_ase.mean).abs();
        assert!(
            gap <= 3.0 * se,
            "k1={k1}: predicted {} measured {}",
            policy.predicted.cognitive,
            r.cognitive_ase.mean
        );
    }
}

#[test]
fn constant_power_has_one_tight_constraint() {
    let scenario = default_scenario();
    let table = default_table();
    let model = ConstantPowerModel::new(&scenario, &table, 200_000, 4).unwrap();
    for k1 in [0.0, 2.0, 2.5, 3.0, 3.5] {
        let s = Scenario {
            required_primary_ase: k1,
            ..scenario.clone()
        };
        let policy = adaptation::optimize_constant_power_with(&model, &s).unwrap();
        let Assignment::Constant { power } = policy.assignment else {
            panic!("constant policy expected")
        };
        assert!(policy.feasible);
        let slack_power = scenario.cognitive_power_budget - power;
        let slack_primary = model.primary_ase(power) - k1;
        assert!(slack_power >= 0.0 && slack_primary >= 0.0);
        assert!(
            slack_power < 1e-6 || slack_primary < 1e-3,
            "k1={k1}: {slack_power} {slack_primary}"
        );
    }
    let unattainable = Scenario {
        required_primary_ase: 4.5,
        ..scenario
    };
    assert!(
        !adaptation::optimize_constant_power_with(&model, &unattainable)
            .unwrap()
            .feasible
    );
}

#[test]
fn standard_error_shrinks_with_blocks() {
    let scenario = default_scenario();
    let table = default_table();
    let rule = cradapt_core::eval::ConstantRule {
        ctx: LinkContext::new(&scenario, &table).unwrap(),
        power: 0.5,
    };
    let a = evaluate_rule(&rule, &scenario, 100_000, 6);
    let b = evaluate_rule(&rule, &scenario, 200_000, 6);
    let ratio = (b.cognitive_ase.se / a.cognitive_ase.se).powi(2);
    assert!((ratio - 0.5).abs() < 0.05, "variance ratio {ratio}");
}
