mod common;

use proptest::prelude::*;

use rvfield::alignment::constants::centered_maxima;
use rvfield::alignment::{
    burn_in_length, connected_clusters, extremal_index_alignment, gumbel_check, gumbel_params,
    heatmap_export, lundberg_solve, max_score, relative_entropy, sample_cluster_q, score_field,
    tail_constant_c, tilt, FieldMode, GumbelParams, McConfig, ScoreModel,
};
use rvfield::tailproc::quantile_level;
use rvfield::{rng, stats};

fn four() -> ScoreModel {
    ScoreModel::match_mismatch(4, 1.0, -1.0).unwrap()
}

fn nonlattice() -> ScoreModel {
    ScoreModel::match_mismatch(2, 1.0, -(1.0 + 2f64.sqrt()) / 2.0).unwrap()
}

fn stationary(m: &ScoreModel) -> FieldMode {
    let t = lundberg_solve(m, 1e-12).unwrap();
    FieldMode::Stationary {
        burn_in: burn_in_length(m.drift(), t, 1e-6),
    }
}

#[test]
fn mgf_is_convex_with_a_single_positive_root() {
    for m in [
        four(),
        nonlattice(),
        ScoreModel::match_mismatch(2, 1.0, -2.0).unwrap(),
    ] {
        let t = lundberg_solve(&m, 1e-12).unwrap();
        let direct = |x: f64| {
            m.pair_masses()
                .iter()
                .map(|(s, w)| w * (x * s).exp())
                .sum::<f64>()
                - 1.0
        };
        let h = t / 50.0;
        for k in 1..150 {
            let x = k as f64 * h;
            let second = direct(x + h) - 2.0 * direct(x) + direct(x - h);
            assert!(second > 0.0);
            if (x - t).abs() > 1e-9 {
                assert_eq!(direct(x) < 0.0, x < t, "sign at {x}");
            }
        }
        assert!(direct(t).abs() <= 1e-12);
    }
}

fn random_model() -> impl Strategy<Value = ScoreModel> {
    (2usize..5)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0.05f64..1.0, k),
                prop::collection::vec(0.05f64..1.0, k),
                prop::collection::vec(prop::collection::vec(-3.0f64..1.5, k), k),
                Just(k),
            )
        })
        .prop_filter_map("valid model", |(a, b, mut s, k)| {
            let na: f64 = a.iter().sum();
            let nb: f64 = b.iter().sum();
            s[0][0] = s[0][0].abs() + 0.5;
            let alphabet = (0..k).map(|i| format!("x{i}")).collect();
            let m = ScoreModel::new(
                alphabet,
                a.iter().map(|v| v / na).collect(),
                b.iter().map(|v| v / nb).collect(),
                s,
            )
            .ok()?;
            (m.drift() < -0.05).then_some(m)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tilted_law_satisfies_legendre_identity(m in random_model()) {
        let t = lundberg_solve(&m, 1e-13).unwrap();
        let tm = tilt(&m, t);
        prop_assert!((tm.total_mass() - 1.0).abs() <= 1e-12);
        let nu: Vec<f64> = tm.mu.iter().flatten().copied().collect();
        let prod: Vec<f64> = m.pair_masses().iter().map(|p| p.1).collect();
        let h = relative_entropy(&nu, &prod).unwrap();
        prop_assert!((h - t * tm.mean_score(&m)).abs() <= 1e-10 * h.max(1.0));
        prop_assert!(tm.mean_score(&m) > 0.0);
    }
}

#[test]
fn extremal_index_matches_absorbing_chain_on_golden_model() {
    let m = ScoreModel::match_mismatch(2, 1.0, -2.0).unwrap();
    let t = lundberg_solve(&m, 1e-12).unwrap();
    let oracle = common::theta_integer_walk(&[(1, 0.5), (-2, 0.5)], t, 80);
    let e = extremal_index_alignment(&m, t, 200_000, 1e-8, 61);
    assert!(
        (e.value - oracle).abs() <= 3.0 * e.se,
        "{} +- {} vs {oracle}",
        e.value,
        e.se
    );
}

#[test]
fn extremal_index_stable_under_tolerance_halving() {
    let m = four();
    let t = lundberg_solve(&m, 1e-12).unwrap();
    let a = extremal_index_alignment(&m, t, 100_000, 1e-6, 62);
    let b = extremal_index_alignment(&m, t, 100_000, 5e-7, 62);
    assert!((a.value - b.value).abs() < a.se);
}

#[test]
fn extremal_index_grows_as_matches_become_rare() {
    let mut last = 0.0;
    for (k, seed) in [(4, 63), (8, 64)] {
        let m = ScoreModel::match_mismatch(k, 1.0, -1.0).unwrap();
        let t = lundberg_solve(&m, 1e-12).unwrap();
        let p = 1.0 / k as f64;
        let oracle = common::theta_integer_walk(&[(1, p), (-1, 1.0 - p)], t, 60);
        let e = extremal_index_alignment(&m, t, 100_000, 1e-8, seed);
        assert!((e.value - oracle).abs() <= 3.0 * e.se);
        assert!(e.value > last + 3.0 * e.se);
        last = e.value;
    }
}

#[test]
fn prefactor_ladder_is_stable() {
    let m = nonlattice();
    let t = lundberg_solve(&m, 1e-12).unwrap();
    let a = tail_constant_c(&m, t, 100_000, 4.0 / t, 65).unwrap();
    let b = tail_constant_c(&m, t, 100_000, 8.0 / t, 66).unwrap();
    let comb = (a.se.powi(2) + b.se.powi(2)).sqrt();
    assert!((a.value - b.value).abs() < 2.0 * comb, "{a:?} {b:?}");
}

#[test]
fn field_marginal_tail_matches_prefactor() {
    let m = four();
    let t = lundberg_solve(&m, 1e-12).unwrap();
    let mode = stationary(&m);
    for u in [4.0, 6.0] {
        // one estimate per independent field
        let per_field: Vec<f64> = (0..40)
            .map(|k| {
                let w = score_field(&m, 300, 670 + k, mode).unwrap();
                let p = w.values().iter().filter(|&&v| v > u).count() as f64 / w.len() as f64;
                p * (t * u).exp()
            })
            .collect();
        let (mean, se) = stats::mean_se(&per_field);
        let c = tail_constant_c(&m, t, 100_000, u, 68).unwrap();
        let comb = (se.powi(2) + c.se.powi(2)).sqrt();
        assert!(
            (mean - c.value).abs() <= 3.0 * comb,
            "u={u}: field {mean} +- {se}, Siegmund {c:?}"
        );
    }
}

#[test]
fn truncated_and_stationary_maxima_agree() {
    let m = four();
    let t = lundberg_solve(&m, 1e-12).unwrap();
    let reps = 2000;
    let draw = |mode: FieldMode, seed: u64| -> Vec<f64> {
        (0..reps)
            .map(|k| max_score(&m, 500, mode, &mut rng::stream(seed, k)))
            .collect()
    };
    let a = draw(FieldMode::Truncated, 69);
    let b = draw(stationary(&m), 70);
    let ks = stats::ks_two_sample(&a, &b);
    assert!(ks <= 0.05, "ks {ks} (theta* {t})");
}

#[test]
fn cluster_second_step_matches_conditioned_chain() {
    let m = four();
    let t = lundberg_solve(&m, 1e-12).unwrap();
    let tol = 1e-8;
    let s = sample_cluster_q(&m, t, tol, 20_000, 71).unwrap();
    assert!(s.paths.iter().all(|p| p.at(1) == Some(-1.0)));
    let depth = ((1.0f64 / tol).ln() / t).ceil() as usize;
    let oracle = common::conditioned_second_step(&[(1, 0.25), (-1, 0.75)], depth);
    let n = s.paths.len() as f64;
    let tv: f64 = 0.5
        * oracle
            .iter()
            .map(|&(v, p)| {
                let emp = s.paths.iter().filter(|q| q.at(2) == Some(v as f64)).count() as f64 / n;
                (emp - p).abs()
            })
            .sum::<f64>();
    assert!(tv <= 0.05, "tv {tv}");
}

#[test]
fn acceptance_rate_matches_survival_probabilities() {
    let m = four();
    let t = lundberg_solve(&m, 1e-12).unwrap();
    // forward: product walk never above 0; backward: tilted walk first steps down then never returns
    let forward = common::never_above_zero(&[(1, 0.25), (-1, 0.75)], 60)[0];
    let backward = 0.75 * common::never_above_zero(&[(1, 0.25), (-1, 0.75)], 60)[0];
    let exact = forward * backward;
    let a = sample_cluster_q(&m, t, 1e-8, 20_000, 72).unwrap();
    let b = sample_cluster_q(&m, t, 1e-8, 20_000, 73).unwrap();
    assert!(
        (a.acceptance - exact).abs() <= 3.0 * a.acceptance_se,
        "{} vs {exact}",
        a.acceptance
    );
    let comb = (a.acceptance_se.powi(2) + b.acceptance_se.powi(2)).sqrt();
    assert!((a.acceptance - b.acceptance).abs() <= 2.0 * comb);
}

#[test]
fn high_scores_cluster_along_diagonals() {
    let m = four();
    let w = score_field(&m, 1000, 74, stationary(&m)).unwrap();
    let thr = quantile_level(&w, 0.99999);
    let cells = heatmap_export(&w, thr).unwrap();
    let clusters = connected_clusters(&cells);
    assert!(!clusters.is_empty());
    let spread: f64 = clusters
        .iter()
        .map(|c| c.diagonal_spread as f64)
        .sum::<f64>()
        / clusters.len() as f64;
    assert_eq!(spread, 0.0);
}

#[test]
fn doubled_scale_constant_is_rejected() {
    let m = nonlattice();
    let mc = McConfig {
        theta_reps: 200_000,
        c_reps: 50_000,
        c_probe: 8.0,
        tol: 1e-8,
        seed: 75,
    };
    let p = gumbel_params(&m, &mc).unwrap();
    let centered = centered_maxima(&m, &p, 2000, 400, stationary(&m), 76);
    let good = stats::ks_one_sample(&centered, |x| p.cdf(x));
    let doubled = GumbelParams {
        k_star: 2.0 * p.k_star,
        ..p.clone()
    };
    let bad = stats::ks_one_sample(&centered, |x| doubled.cdf(x));
    assert!(bad >= 2.0 * good, "{bad} vs {good}");
    assert!(bad > stats::ks_critical(400, 400, 0.01) / 2f64.sqrt());
}

#[test]
fn lattice_model_carries_a_warning() {
    let m = four();
    let mc = McConfig {
        theta_reps: 20_000,
        c_reps: 5_000,
        c_probe: 8.0,
        tol: 1e-8,
        seed: 77,
    };
    let p = gumbel_params(&m, &mc).unwrap();
    let check = gumbel_check(&m, &p, 100, 50, stationary(&m), 78);
    assert!(check.lattice_warning);
    assert_eq!(check.centered.len(), 50);
}
