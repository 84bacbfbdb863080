use rvfield::lattice::cheb_ball;
use rvfield::tailproc::{
    collect_tail_samples, quantile_level, tail_expectation, time_change_check, Cmp, Functional,
};
use rvfield::{MaModel, MultiIndex};

fn mi(c: &[i64]) -> MultiIndex {
    MultiIndex::new(c.to_vec())
}

fn lags(r: i64) -> Vec<MultiIndex> {
    (-r..=r).map(|j| mi(&[j])).collect()
}

#[test]
fn iid_field_has_no_tail_dependence() {
    let model = MaModel::new(1, vec![(mi(&[0]), 1.0)], 1.0, 0.5).unwrap();
    let w = model.sample_window(&[200_000], 31).unwrap();
    let u = quantile_level(&w, 0.999);
    let s = collect_tail_samples(&w, u, &lags(2)).unwrap();
    assert!(s.len() > 150);
    for j in [-2, -1, 1, 2] {
        let frac =
            s.iter().filter(|t| t.ratio(&mi(&[j])).abs() > 0.5).count() as f64 / s.len() as f64;
        assert!(frac < 0.02, "lag {j}: {frac}");
    }
}

#[test]
fn moving_average_lag_one_exceeds_with_probability_two_thirds() {
    let model = MaModel::new(1, vec![(mi(&[0]), 1.0), (mi(&[1]), 0.5)], 1.0, 1.0).unwrap();
    let w = model.sample_window(&[5_000_000], 32).unwrap();
    let u = quantile_level(&w, 0.999);
    let s = collect_tail_samples(&w, u, &lags(1)).unwrap();
    let n = s.len() as f64;
    let p = s.iter().filter(|t| t.ratio(&mi(&[1])) > 0.4).count() as f64 / n;
    let se = (p * (1.0 - p) / n).sqrt();
    assert!((p - 2.0 / 3.0).abs() <= 3.0 * se, "{p} +- {se}");
}

#[test]
fn empirical_spectral_law_is_close_in_total_variation() {
    let model = MaModel::new(1, vec![(mi(&[0]), 1.0), (mi(&[1]), 0.5)], 1.0, 0.5).unwrap();
    // (Theta_-1, Theta_0, Theta_1) by jump and sign, worked out by hand
    let atoms: [([f64; 3], f64); 4] = [
        ([0.0, 1.0, 0.5], 1.0 / 3.0),
        ([0.0, -1.0, -0.5], 1.0 / 3.0),
        ([2.0, 1.0, 0.0], 1.0 / 6.0),
        ([-2.0, -1.0, 0.0], 1.0 / 6.0),
    ];
    let w = model.sample_window(&[6_000_000], 33).unwrap();
    let u = quantile_level(&w, 0.999);
    let s = collect_tail_samples(&w, u, &lags(1)).unwrap();
    assert!(s.len() >= 5000);
    let mut counts = [0usize; 4];
    for t in &s {
        let v = [t.ratio(&mi(&[-1])), t.ratio(&mi(&[0])), t.ratio(&mi(&[1]))];
        let dist = |a: &[f64; 3]| {
            a.iter()
                .zip(&v)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let k = (0..4)
            .min_by(|&a, &b| dist(&atoms[a].0).total_cmp(&dist(&atoms[b].0)))
            .unwrap();
        counts[k] += 1;
    }
    let tv: f64 = 0.5
        * (0..4)
            .map(|k| (counts[k] as f64 / s.len() as f64 - atoms[k].1).abs())
            .sum::<f64>();
    assert!(tv <= 0.05, "tv {tv}, counts {counts:?}");
}

fn planar() -> MaModel {
    MaModel::new(
        2,
        vec![
            (mi(&[0, 0]), 1.0),
            (mi(&[0, 1]), 0.6),
            (mi(&[1, 0]), -0.4),
            (mi(&[1, 1]), 0.3),
        ],
        1.5,
        0.7,
    )
    .unwrap()
}

#[test]
fn time_change_holds_on_a_planar_field() {
    let law = planar().tail_law();
    let at = |a: i64, b: i64| mi(&[a, b]);
    let battery = vec![
        Functional::Const(1.0),
        Functional::indicator(at(0, 0), Cmp::Gt, 1.5),
        Functional::indicator(at(0, 1), Cmp::AbsGt, 0.4),
        Functional::indicator(at(-1, 0), Cmp::Lt, -0.2),
        Functional::SupGt(2.5),
        Functional::Product(vec![
            Functional::clamp(at(0, 0), -1.0, 4.0),
            Functional::clamp(at(1, 1), -2.0, 2.0),
        ]),
        Functional::Sum(vec![
            Functional::Scaled(-0.3, Box::new(Functional::clamp(at(-1, -1), 0.0, 3.0))),
            Functional::indicator(at(1, -1), Cmp::AbsLt, 0.5),
        ]),
    ];
    for h in &battery {
        for j in cheb_ball(2, 2) {
            let (l, r) = time_change_check(&law, h, &j).unwrap();
            assert!((l - r).abs() <= 1e-12, "{h:?} at {j}: {l} vs {r}");
        }
    }
}

#[test]
fn time_change_vanishes_beyond_the_support() {
    let law = planar().tail_law();
    let h = Functional::indicator(mi(&[0, 0]), Cmp::AbsGt, 1.0);
    let (l, r) = time_change_check(&law, &h, &mi(&[3, -2])).unwrap();
    assert_eq!((l, r), (0.0, 0.0));
}

#[test]
fn sup_norm_tail_probability_by_hand() {
    // J = 0 gives sup |Theta| = 1, J = 1 gives 2; P(|Y_0| > t) = 1/t
    let model = MaModel::new(1, vec![(mi(&[0]), 1.0), (mi(&[1]), 0.5)], 1.0, 0.5).unwrap();
    let e = tail_expectation(&model.tail_law(), &Functional::SupGt(2.0)).unwrap();
    assert!((e - 2.0 / 3.0).abs() <= 1e-12);
}
