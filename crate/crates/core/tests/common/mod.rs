//! Property checks shared by the `properties` and `acceptance` targets.
//!
//! Each check runs a deterministic proptest runner for the given number of
//! cases and returns the first counterexample as an error string.

#![allow(dead_code)]

use std::sync::OnceLock;

use banzhaf_core::experiment::{run_zero_stop_curve, ExperimentKind, ExperimentSpec};
use banzhaf_core::solver::IterationAction;
use banzhaf_core::{
    build_exact_oracle, centroid_regular, d1_distance, error_bounds, max_d1_ordered, nearest,
    normalized_banzhaf, offset_target, run, sample_ordered_simplex, step, BanzhafAtlas, Omega0Mode,
    PowerVector, Provenance, SampleRng, SolverConfig, StopReason, TargetVector, ValuationRule,
    Variant, WeightedVotingGame,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Check = fn(u32) -> Result<(), String>;

/// Name and check for every property, in report order.
pub const PROPERTIES: &[(&str, Check)] = &[
    (
        "scaling(0) and mincoalition(1) trace-identical to base",
        variant_equivalence,
    ),
    ("scale invariance of beta under (lq, lw)", scale_invariance),
    ("weight monotonicity of beta", weight_monotonicity),
    ("d1 metric axioms", d1_metric),
    (
        "sampler output in the ordered simplex (1e5 seeds)",
        sampler_output,
    ),
    (
        "centroid start: one base step gives w1 = t",
        centroid_identity,
    ),
    ("error bounds 0 <= lower <= upper", error_bound_order),
    ("zero-stop curve monotone", zero_stop_monotone),
    (
        "min-size 1 rule equals qualified majority",
        rule_coincidence,
    ),
    (
        "unanimity and simple majority ignore weights",
        constant_rules,
    ),
    ("dictator gets all power", dictator),
    ("non-degenerate beta sums to 1", normalization),
    ("restart never worse than base", restart_dominance),
    ("trace distances re-verify", trace_honesty),
    ("base stops exactly on zero power", zero_stop_exact),
    ("budget-k prefix equals a budget-k run", truncation),
    ("nearest agrees with a linear scan", nearest_linear_scan),
    (
        "adding atlas vectors never raises a lower bound",
        monotone_refinement,
    ),
    (
        "offset target halves d1 to the regular centroid",
        offset_halves,
    ),
    ("d1 within the ordered simplex is at most 2 - 2/n", d1_bound),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        max_global_rejects: 100_000,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

pub fn target(n: usize, seed: u64) -> TargetVector {
    sample_ordered_simplex(n, &mut SampleRng::seed_from_u64(seed))
}

fn targets(max_n: usize) -> impl Strategy<Value = TargetVector> {
    (1..=max_n, any::<u64>()).prop_map(|(n, seed)| target(n, seed))
}

fn modes() -> impl Strategy<Value = Omega0Mode> {
    prop_oneof![
        Just(Omega0Mode::Target),
        Just(Omega0Mode::CentroidOrdered),
        Just(Omega0Mode::OffsetTarget)
    ]
}

/// Weights in `[0, 1)` and a quota as a fraction of their total.
fn games(max_n: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(0.0f64..1.0, 1..=max_n), 0.0f64..1.0).prop_map(|(w, f)| {
        let q = f * w.iter().sum::<f64>();
        (w, q)
    })
}

fn qualified(w: &[f64], q: f64, rule: ValuationRule) -> PowerVector {
    normalized_banzhaf(&WeightedVotingGame::new(w.to_vec(), q, rule).unwrap()).unwrap()
}

/// Smallest `|w(C) - q|` over all coalitions.
fn quota_gap(w: &[f64], q: f64) -> f64 {
    (0u32..1 << w.len())
        .map(|mask| {
            let s: f64 = w
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, x)| x)
                .sum();
            (s - q).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

fn oracle(n: usize) -> &'static BanzhafAtlas {
    static ORACLES: OnceLock<Vec<BanzhafAtlas>> = OnceLock::new();
    &ORACLES.get_or_init(|| {
        (1..=4)
            .map(|n| build_exact_oracle(n, 1 << n).unwrap())
            .collect()
    })[n - 1]
}

pub fn variant_equivalence(cases: u32) -> Result<(), String> {
    check(
        cases,
        (targets(8), 0.05f64..0.95, modes()),
        |(t, q, mode)| {
            let config = |v| {
                SolverConfig::new(q)
                    .with_omega0(mode.clone())
                    .with_variant(v)
                    .with_max_iterations(30)
            };
            let base = run(&t, &config(Variant::Base)).unwrap();
            for v in [Variant::Scaling(0.0), Variant::MinCoalition(1)] {
                let other = run(&t, &config(v)).unwrap();
                prop_assert_eq!(other.trace.len(), base.trace.len());
                for (a, b) in base.trace.iter().zip(&other.trace) {
                    prop_assert_eq!(&a.weights_before, &b.weights_before);
                    prop_assert_eq!(&a.power, &b.power);
                    prop_assert_eq!(a.action, b.action);
                }
            }
            Ok(())
        },
    )
}

pub fn scale_invariance(cases: u32) -> Result<(), String> {
    check(cases, (games(10), 0.01f64..100.0), |((w, q), lambda)| {
        prop_assume!(quota_gap(&w, q) > 1e-9 * lambda.max(1.0 / lambda));
        let scaled: Vec<f64> = w.iter().map(|x| x * lambda).collect();
        let rule = ValuationRule::QualifiedMajority;
        prop_assert_eq!(qualified(&w, q, rule), qualified(&scaled, q * lambda, rule));
        Ok(())
    })
}

pub fn weight_monotonicity(cases: u32) -> Result<(), String> {
    check(
        cases,
        (games(10), any::<prop::sample::Index>()),
        |((w, q), m)| {
            let n = w.len();
            let rules = [
                ValuationRule::QualifiedMajority,
                ValuationRule::QualifiedMajorityMinSize(1 + m.index(n)),
            ];
            for rule in rules {
                let b = qualified(&w, q, rule);
                for i in 0..n {
                    for j in 0..n {
                        if w[i] >= w[j] {
                            prop_assert!(
                                b.values[i] >= b.values[j],
                                "w={w:?} q={q} rule={rule:?} beta={b:?}"
                            );
                        }
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn d1_metric(cases: u32) -> Result<(), String> {
    let triple = (1usize..12).prop_flat_map(|n| {
        let v = || prop::collection::vec(-1.0f64..1.0, n);
        (v(), v(), v())
    });
    check(cases, triple, |(a, b, c)| {
        let d = |x: &[f64], y: &[f64]| d1_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &b) >= 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &b) == 0.0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        Ok(())
    })
}

/// Not randomized by proptest: a sweep over 10^5 consecutive seeds.
pub fn sampler_output(_cases: u32) -> Result<(), String> {
    for seed in 0..100_000u64 {
        let n = 1 + (seed % 12) as usize;
        let t = target(n, seed);
        let v = t.values();
        let ok = v.len() == n
            && v.iter().all(|&x| x > 0.0 && x.is_finite())
            && v.windows(2).all(|p| p[0] >= p[1])
            && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if !ok {
            return Err(format!("seed {seed}: {v:?}"));
        }
        if TargetVector::new(v.to_vec()).is_err() {
            return Err(format!("seed {seed}: rejected by TargetVector::new"));
        }
    }
    Ok(())
}

pub fn centroid_identity(cases: u32) -> Result<(), String> {
    check(cases, (targets(12), 0.05f64..0.95), |(t, q)| {
        let n = t.n();
        let c = centroid_regular(n).into_inner();
        let config = SolverConfig::new(q).with_omega0(Omega0Mode::Explicit(c.clone()));
        let out = step(&c, &t, &config, None).unwrap();
        prop_assume!(out.record.action == IterationAction::RatioUpdate);
        for (w, ti) in out.new_weights.iter().zip(t.values()) {
            prop_assert!(
                (w - ti).abs() <= 1e-12 * ti.max(1e-300),
                "w1={:?} t={:?}",
                out.new_weights,
                t
            );
        }
        Ok(())
    })
}

pub fn error_bound_order(cases: u32) -> Result<(), String> {
    check(cases, (targets(4), games(4)), |(t, (w, q))| {
        let n = t.n();
        let mut w = w;
        w.resize(n, 0.1);
        let out = qualified(&w, q, ValuationRule::QualifiedMajority);
        let b = error_bounds(&t, &out, oracle(n)).unwrap();
        prop_assert!(0.0 <= b.lower && b.lower <= b.upper, "{b:?}");
        Ok(())
    })
}

pub fn zero_stop_monotone(cases: u32) -> Result<(), String> {
    let strategy = (
        2usize..=8,
        any::<u64>(),
        prop::sample::select(vec![0.4, 0.5, 0.6, 0.7]),
    );
    check(cases, strategy, |(n, seed, q)| {
        let spec = ExperimentSpec {
            n,
            sample_count: 4,
            master_seed: seed,
            quota_grid: vec![q],
            omega0_modes: vec![
                Omega0Mode::Target,
                Omega0Mode::CentroidOrdered,
                Omega0Mode::OffsetTarget,
            ],
            variants: vec![Variant::Base.into()],
            iteration_grid: (1..=12).collect(),
            atlas_path: None,
            experiments: vec![ExperimentKind::ZeroStop],
            max_distance: None,
            exclude_unimprovable: false,
        };
        let report = run_zero_stop_curve(&spec).unwrap();
        for mode in ["target", "centroid", "offset"] {
            let curve: Vec<f64> = (1..=12)
                .map(|k| report.row(q, mode, "base", k).unwrap().zero_stop_frac)
                .collect();
            prop_assert!(curve.windows(2).all(|p| p[0] <= p[1]), "{mode}: {curve:?}");
        }
        Ok(())
    })
}

pub fn rule_coincidence(cases: u32) -> Result<(), String> {
    check(cases, games(10), |(w, q)| {
        prop_assert_eq!(
            qualified(&w, q, ValuationRule::QualifiedMajority),
            qualified(&w, q, ValuationRule::QualifiedMajorityMinSize(1))
        );
        Ok(())
    })
}

pub fn constant_rules(cases: u32) -> Result<(), String> {
    let pair = (1usize..=10).prop_flat_map(|n| {
        let v = || prop::collection::vec(0.0f64..1.0, n);
        (v(), v(), 0.0f64..1.0)
    });
    check(cases, pair, |(a, b, q)| {
        for rule in [ValuationRule::Unanimity, ValuationRule::SimpleMajority] {
            prop_assert_eq!(qualified(&a, q, rule), qualified(&b, q, rule));
        }
        Ok(())
    })
}

pub fn dictator(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(0.0f64..1.0, 0..8),
        0.05f64..0.95,
        0.0f64..1.0,
        any::<prop::sample::Index>(),
    );
    check(cases, strategy, |(rest, q, margin, at)| {
        let total: f64 = rest.iter().sum();
        // Others together stay at or below the quota; the dictator alone exceeds it.
        let mut w: Vec<f64> = rest
            .iter()
            .map(|x| {
                if total > 0.0 {
                    x / total * q * margin
                } else {
                    0.0
                }
            })
            .collect();
        let i = at.index(w.len() + 1);
        w.insert(i, q + 1e-9 + margin);
        let b = qualified(&w, q, ValuationRule::QualifiedMajority);
        for (j, &x) in b.values.iter().enumerate() {
            prop_assert_eq!(x, if j == i { 1.0 } else { 0.0 }, "w={:?} q={}", w, q);
        }
        Ok(())
    })
}

pub fn normalization(cases: u32) -> Result<(), String> {
    check(cases, games(12), |(w, q)| {
        let b = qualified(&w, q, ValuationRule::QualifiedMajority);
        if !b.is_degenerate() {
            prop_assert!((b.values.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        Ok(())
    })
}

pub fn restart_dominance(cases: u32) -> Result<(), String> {
    check(
        cases,
        (targets(8), 0.05f64..0.95, modes(), 1usize..60),
        |(t, q, mode, k)| {
            let config = |v| {
                SolverConfig::new(q)
                    .with_omega0(mode.clone())
                    .with_variant(v)
                    .with_max_iterations(k)
            };
            let base = run(&t, &config(Variant::Base)).unwrap();
            let restart = run(&t, &config(Variant::Restart)).unwrap();
            prop_assert!(restart.best_distance <= base.best_distance);
            Ok(())
        },
    )
}

fn any_variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::Base),
        Just(Variant::Restart),
        (1usize..=3).prop_map(Variant::MinCoalition),
        (0.0f64..2.0).prop_map(Variant::Scaling),
    ]
}

pub fn trace_honesty(cases: u32) -> Result<(), String> {
    check(
        cases,
        (targets(8), 0.05f64..0.95, modes(), any_variant()),
        |(t, q, mode, v)| {
            let v = match v {
                Variant::MinCoalition(m) => Variant::MinCoalition(m.min(t.n())),
                other => other,
            };
            let result = run(
                &t,
                &SolverConfig::new(q)
                    .with_omega0(mode)
                    .with_variant(v)
                    .with_max_iterations(40),
            )
            .unwrap();
            for r in &result.trace {
                let d = d1_distance(&r.power.values, t.values()).unwrap();
                prop_assert!((r.distance - d).abs() <= 1e-12);
            }
            let best = result
                .trace
                .iter()
                .map(|r| r.distance)
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(result.best_distance, best);
            Ok(())
        },
    )
}

pub fn zero_stop_exact(cases: u32) -> Result<(), String> {
    check(
        cases,
        (targets(8), 0.05f64..0.95, modes()),
        |(t, q, mode)| {
            let result = run(
                &t,
                &SolverConfig::new(q)
                    .with_omega0(mode)
                    .with_max_iterations(40),
            )
            .unwrap();
            for r in &result.trace {
                let zero = r.power.values.contains(&0.0);
                prop_assert_eq!(
                    zero,
                    r.action == IterationAction::Stopped(StopReason::ZeroPowerStop)
                );
            }
            Ok(())
        },
    )
}

pub fn truncation(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            targets(8),
            0.05f64..0.95,
            modes(),
            any_variant(),
            1usize..=30,
        ),
        |(t, q, mode, v, k)| {
            let v = match v {
                Variant::MinCoalition(m) => Variant::MinCoalition(m.min(t.n())),
                other => other,
            };
            let config = SolverConfig::new(q).with_omega0(mode).with_variant(v);
            let long = run(&t, &config.clone().with_max_iterations(30)).unwrap();
            let short = run(&t, &config.with_max_iterations(k)).unwrap();
            let o = long.outcome_at(k);
            prop_assert_eq!(o.best_distance, short.best_distance);
            prop_assert_eq!(o.iterations, short.iterations());
            prop_assert_eq!(o.stop_reason, short.stop_reason);
            Ok(())
        },
    )
}

/// Reference scan: smallest distance, ties to the lexicographically largest.
pub fn linear_scan(atlas: &BanzhafAtlas, t: &[f64]) -> (Vec<f64>, f64) {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for v in atlas.vectors() {
        let d: f64 = v.values.iter().zip(t).map(|(a, b)| (a - b).abs()).sum();
        let better = match &best {
            None => true,
            Some((bv, bd)) => {
                d < *bd
                    || (d == *bd && v.values.partial_cmp(bv) == Some(std::cmp::Ordering::Greater))
            }
        };
        if better {
            best = Some((v.values.clone(), d));
        }
    }
    best.expect("non-empty atlas")
}

pub fn nearest_linear_scan(cases: u32) -> Result<(), String> {
    let query = (1usize..=4).prop_flat_map(|n| (Just(n), prop::collection::vec(0.0f64..1.0, n)));
    check(cases.max(1000), query, |(n, t)| {
        let (v, d) = nearest(oracle(n), &t).unwrap();
        let (rv, rd) = linear_scan(oracle(n), &t);
        prop_assert_eq!(&v.values, &rv);
        prop_assert_eq!(d, rd);
        Ok(())
    })
}

pub fn monotone_refinement(cases: u32) -> Result<(), String> {
    let strategy = (
        targets(4),
        games(4),
        prop::collection::vec(any::<bool>(), 64),
    );
    check(cases, strategy, |(t, (w, q), keep)| {
        let n = t.n();
        let full = oracle(n);
        let mut partial = BanzhafAtlas::new(n, Provenance::RunTraces);
        for (v, &k) in full.vectors().iter().zip(keep.iter().cycle()) {
            if k {
                partial.insert(v);
            }
        }
        let mut w = w;
        w.resize(n, 0.1);
        let out = qualified(&w, q, ValuationRule::QualifiedMajority);
        // A non-empty subset holding the algorithm output, grown to the full oracle.
        partial.insert(&out);
        partial.insert(&full.vectors()[0]);
        let small = error_bounds(&t, &out, &partial).unwrap();
        let mut grown = partial.clone();
        for v in full.vectors() {
            grown.insert(v);
        }
        let big = error_bounds(&t, &out, &grown).unwrap();
        prop_assert!(big.lower >= small.lower - 1e-15, "{big:?} vs {small:?}");
        prop_assert!(
            d1_distance(&big.best_known.values, t.values()).unwrap()
                <= d1_distance(&small.best_known.values, t.values()).unwrap()
        );
        Ok(())
    })
}

pub fn offset_halves(cases: u32) -> Result<(), String> {
    check(cases, targets(16), |t| {
        let c = centroid_regular(t.n());
        let before = d1_distance(t.values(), c.values()).unwrap();
        let after = d1_distance(offset_target(&t).values(), c.values()).unwrap();
        prop_assert!((after - before / 2.0).abs() <= 1e-12);
        Ok(())
    })
}

pub fn d1_bound(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            1usize..=16,
            any::<u64>(),
            any::<u64>(),
            any::<prop::sample::Index>(),
        ),
        |(n, s1, s2, k)| {
            let t = target(n, s1);
            let max = max_d1_ordered(n);
            // The ordered simplex's vertices have k leading entries 1/k.
            let k = 1 + k.index(n);
            let vertex: Vec<f64> = (0..n)
                .map(|i| if i < k { 1.0 / k as f64 } else { 0.0 })
                .collect();
            for other in [target(n, s2).into_inner(), vertex] {
                prop_assert!(d1_distance(t.values(), &other).unwrap() <= max + 1e-9);
            }
            Ok(())
        },
    )
}
