use canopyfuse::metrics::{Metric, MetricVector, NumericTable};
use canopyfuse::regression::{all_subsets, builtin_model, evaluate, fit_ols, DesignMatrix, RegressionError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn coefficients_match_normal_equation_oracle() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/oracles");
    let table = NumericTable::read_csv(&dir.join("ols_design.csv")).unwrap();
    let x = DesignMatrix::from_table(&table, "y", &names(&["a", "b", "c"])).unwrap();
    assert_eq!(x.n_rows(), 34);
    let m = fit_ols(&x, &names(&["a", "b", "c"])).unwrap();
    let oracle = NumericTable::read_csv(&dir.join("ols_coefficients.csv")).unwrap();
    for (r, term) in oracle.ids().iter().enumerate() {
        let want = oracle.value(r, 0).unwrap();
        let got = match term.as_str() {
            "intercept" => m.intercept,
            "a" => m.coefficients[0],
            "b" => m.coefficients[1],
            "c" => m.coefficients[2],
            t => panic!("unexpected term {t}"),
        };
        assert!(((got - want) / want).abs() < 1e-8, "{term}: {got} vs {want}");
    }
}

const CANDIDATES: [&str; 8] = ["ARVI", "DVI", "GNDVI", "NDVI", "OSAVI", "h25", "h75", "hcv"];

fn random_design(seed: u64, n: usize, planted: impl Fn(&[f64]) -> f64) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..CANDIDATES.len())
        .map(|j| (0..n).map(|_| rng.random_range(0.0..1.0) * (j as f64 + 1.0)).collect())
        .collect();
    let y = (0..n).map(|i| planted(&cols.iter().map(|c| c[i]).collect::<Vec<_>>())).collect();
    DesignMatrix::new((0..n).map(|i| format!("p{i}")).collect(), names(&CANDIDATES), cols, "agb", y).unwrap()
}

#[test]
fn planted_subset_is_selected_and_recovered() {
    // agb = 120 + 35 OSAVI - 80 DVI + 4 h75
    let x = random_design(6, 34, |r| 120.0 + 35.0 * r[4] - 80.0 * r[1] + 4.0 * r[6]);
    let rep = all_subsets(&x, 3, 20, false).unwrap();
    let best = rep.best().unwrap();
    let mut chosen = best.columns.clone();
    chosen.sort();
    assert_eq!(chosen, names(&["DVI", "OSAVI", "h75"]));
    let m = fit_ols(&x, &names(&["OSAVI", "DVI", "h75"])).unwrap();
    for (got, want) in m.coefficients.iter().zip([35.0, -80.0, 4.0]) {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
    assert!((m.intercept - 120.0).abs() < 1e-8);
    assert_eq!(rep.ranked.len(), 8 + 28 + 56);
}

#[test]
fn two_of_five_planted() {
    let x = random_design(9, 30, |r| 3.0 * r[0] - 2.0 * r[2] + 0.5);
    let five = DesignMatrix::new(
        x.ids().to_vec(),
        names(&CANDIDATES[..5]),
        CANDIDATES[..5].iter().map(|c| x.column(c).unwrap().to_vec()).collect(),
        "agb",
        x.response().to_vec(),
    )
    .unwrap();
    let rep = all_subsets(&five, 3, 20, false).unwrap();
    assert_eq!(rep.best_per_size[1].columns, names(&["ARVI", "GNDVI"]));
}

#[test]
fn single_predictor_ranking_follows_squared_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 40;
    let x = random_design(12, n, |r| r[0] + 0.7 * r[3] - 0.3 * r[5] + r[7] * 0.1);
    let noisy: Vec<f64> = x.response().iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
    let x = DesignMatrix::new(
        x.ids().to_vec(),
        x.names().to_vec(),
        x.names().iter().map(|c| x.column(c).unwrap().to_vec()).collect(),
        "agb",
        noisy,
    )
    .unwrap();
    let rep = all_subsets(&x, 1, 20, false).unwrap();
    let r2 = |c: &[f64], y: &[f64]| {
        let mc = c.iter().sum::<f64>() / c.len() as f64;
        let my = y.iter().sum::<f64>() / y.len() as f64;
        let sxy: f64 = c.iter().zip(y).map(|(a, b)| (a - mc) * (b - my)).sum();
        let sxx: f64 = c.iter().map(|a| (a - mc).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy * sxy / (sxx * syy)
    };
    let mut oracle: Vec<(String, f64)> =
        x.names().iter().map(|c| (c.clone(), r2(x.column(c).unwrap(), x.response()))).collect();
    oracle.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (f, (name, want)) in rep.ranked.iter().zip(&oracle) {
        assert_eq!(&f.columns[0], name);
        assert!((f.stats().r_squared - want).abs() < 1e-10);
    }
}

#[test]
fn builtin_model_hand_value() {
    let mv = MetricVector::new("cell").with(Metric::Osavi, 0.05).with(Metric::Dvi, 0.01).with(Metric::H75, 20.0);
    let p = builtin_model().predict(&mv).unwrap();
    assert!((p.value - 68.38).abs() < 1e-9);
}

#[test]
fn collinear_subsets_are_recorded_not_fatal() {
    let x = random_design(3, 20, |r| r[0] + r[1]);
    let mut cols: Vec<Vec<f64>> = x.names().iter().map(|c| x.column(c).unwrap().to_vec()).collect();
    cols[2] = cols[0].iter().map(|v| 2.0 * v).collect();
    let x = DesignMatrix::new(x.ids().to_vec(), x.names().to_vec(), cols, "agb", x.response().to_vec()).unwrap();
    let rep = all_subsets(&x, 2, 20, false).unwrap();
    assert_eq!(rep.failures.len(), 1);
    assert_eq!(rep.failures[0].0, names(&["ARVI", "GNDVI"]));
    assert!(matches!(
        fit_ols(&x, &names(&["ARVI", "GNDVI"])),
        Err(RegressionError::Collinear(_))
    ));
}

fn noisy_design(seed: u64, n: usize) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let base = random_design(seed, n, |r| 50.0 + 10.0 * r[0] - 3.0 * r[6]);
    let y = base.response().iter().map(|v| v + rng.random_range(-5.0..5.0)).collect();
    DesignMatrix::new(
        base.ids().to_vec(),
        base.names().to_vec(),
        base.names().iter().map(|c| base.column(c).unwrap().to_vec()).collect(),
        "agb",
        y,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residuals_orthogonal_and_stats_consistent(seed in 0u64..100_000, k in 1usize..5) {
        let x = noisy_design(seed, 34);
        let cols: Vec<String> = x.names()[..k].to_vec();
        let m = fit_ols(&x, &cols).unwrap();
        let y = x.response();
        let data: Vec<&[f64]> = cols.iter().map(|c| x.column(c).unwrap()).collect();
        let resid: Vec<f64> = (0..y.len())
            .map(|i| y[i] - m.linear_value(&data.iter().map(|c| c[i]).collect::<Vec<_>>()))
            .collect();
        let scale = y.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!(resid.iter().sum::<f64>().abs() < 1e-8 * scale);
        for c in &data {
            let dot: f64 = c.iter().zip(&resid).map(|(a, b)| a * b).sum();
            let cn: f64 = c.iter().map(|v| v.abs()).sum();
            prop_assert!(dot.abs() < 1e-8 * scale * cn.max(1.0));
        }
        let s = m.stats.as_ref().unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let identity = 1.0 - y.len() as f64 * s.rmse * s.rmse / sst;
        prop_assert!((s.r_squared - identity).abs() < 1e-9);
        prop_assert_eq!(evaluate(&m, &x).unwrap(), s.clone());
    }

    #[test]
    fn best_r2_grows_with_max_size(seed in 0u64..100_000) {
        let x = noisy_design(seed, 34);
        let mut prev = f64::NEG_INFINITY;
        for size in 1..=3 {
            let r2 = all_subsets(&x, size, 20, false).unwrap().best().unwrap().stats().r_squared;
            prop_assert!(r2 >= prev);
            prev = r2;
        }
        let rep = all_subsets(&x, 3, 20, false).unwrap();
        let per_size: Vec<f64> = rep.best_per_size.iter().map(|f| f.stats().r_squared).collect();
        prop_assert!(per_size.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(&rep, &all_subsets(&x, 3, 20, false).unwrap());
    }

    #[test]
    fn noiseless_predict_fit_identity(seed in 0u64..100_000, c in proptest::array::uniform3(-50.0f64..50.0)) {
        let x = random_design(seed, 34, |r| 7.0 + c[0] * r[1] + c[1] * r[3] + c[2] * r[5]);
        let cols = names(&["DVI", "NDVI", "h25"]);
        let m = fit_ols(&x, &cols).unwrap();
        for i in 0..x.n_rows() {
            let row: Vec<f64> = cols.iter().map(|c| x.column(c).unwrap()[i]).collect();
            prop_assert!((m.linear_value(&row) - x.response()[i]).abs() < 1e-8);
        }
    }
}
