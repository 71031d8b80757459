use canopyfuse::cloud::{BoundingBox, GridSpec, Point3D, PointCloud, SourceKind};
use canopyfuse::metrics::{
    band_means, spectral_indices, structural_metrics, HeightSource, Metric, SpectralBands, SpectralOptions,
};
use proptest::prelude::*;

const ORACLE: &str = include_str!("oracles/spectral_oracle.csv");

fn one_cell(bands: [f64; 5]) -> (SpectralBands, BoundingBox) {
    let g = GridSpec {
        origin: (0.0, 1.0),
        cell_size: 1.0,
        nrows: 1,
        ncols: 1,
    };
    (SpectralBands::constant(g, bands), BoundingBox::footprint(0.0, 0.0, 1.0, 1.0))
}

#[test]
fn indices_match_hand_evaluation() {
    let mut n = 0;
    for line in ORACLE.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (b, fp) = one_cell([f[0], f[1], f[2], f[3], f[4]]);
        let plain = spectral_indices(&b, &fp, &Metric::SPECTRAL, SpectralOptions::default()).unwrap();
        for (k, m) in Metric::SPECTRAL.iter().enumerate() {
            let got = plain.get(*m).unwrap();
            assert!((got - f[5 + k]).abs() < 1e-12, "{m}: {got} vs {}", f[5 + k]);
        }
        let corrected = spectral_indices(
            &b,
            &fp,
            &[Metric::Rgri, Metric::NormG],
            SpectralOptions {
                corrected: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((corrected.get(Metric::Rgri).unwrap() - f[12]).abs() < 1e-12);
        assert!((corrected.get(Metric::NormG).unwrap() - f[13]).abs() < 1e-12);
        n += 1;
    }
    assert_eq!(n, 20);
}

fn heights_cloud(h: &[f64]) -> PointCloud {
    PointCloud::new(
        h.iter().enumerate().map(|(i, &z)| Point3D::new((i % 100) as f64 * 0.3, (i / 100) as f64 * 0.3, z)).collect(),
        SourceKind::Dap,
    )
}

fn everything() -> BoundingBox {
    BoundingBox::footprint(-1.0, -1.0, 1000.0, 1000.0)
}

#[test]
fn fixed_percentile_set() {
    let m = structural_metrics(HeightSource::Cloud(&heights_cloud(&[1.0, 2.0, 3.0, 4.0, 5.0])), &everything(), 2.0).unwrap();
    assert_eq!(m.get(Metric::H25), Some(2.0));
    assert_eq!(m.get(Metric::H50), Some(3.0));
    assert_eq!(m.get(Metric::H75), Some(4.0));
    assert_eq!(m.get(Metric::H95), Some(4.8));
    let c = structural_metrics(HeightSource::Cloud(&heights_cloud(&[6.5; 40])), &everything(), 2.0).unwrap();
    assert_eq!(c.get(Metric::Hcv), Some(0.0));
}

proptest! {
    #[test]
    fn percentiles_ordered(h in proptest::collection::vec(0.0f64..50.0, 1..300)) {
        let m = structural_metrics(HeightSource::Cloud(&heights_cloud(&h)), &everything(), 2.0).unwrap();
        let p: Vec<f64> = [Metric::H25, Metric::H50, Metric::H75, Metric::H95].iter().map(|k| m.get(*k).unwrap()).collect();
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn scale_equivariance(h in proptest::collection::vec(2.5f64..50.0, 2..200), s in 0.1f64..10.0) {
        let base = structural_metrics(HeightSource::Cloud(&heights_cloud(&h)), &everything(), 2.0).unwrap();
        let scaled: Vec<f64> = h.iter().map(|v| v * s).collect();
        // Keep every height above the threshold so hcv's membership is fixed.
        let sm = structural_metrics(HeightSource::Cloud(&heights_cloud(&scaled)), &everything(), 0.0).unwrap();
        for k in [Metric::H25, Metric::H50, Metric::H75, Metric::H95, Metric::Hmean] {
            let (a, b) = (base.get(k).unwrap() * s, sm.get(k).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{}: {} vs {}", k, a, b);
        }
        let (a, b) = (base.get(Metric::Hcv).unwrap(), sm.get(Metric::Hcv).unwrap());
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn normalized_indices_bounded(b in proptest::array::uniform5(0.0f64..1.0)) {
        let (bands, fp) = one_cell(b);
        let m = spectral_indices(&bands, &fp, &[Metric::Ndvi, Metric::Gndvi], SpectralOptions::default()).unwrap();
        for k in [Metric::Ndvi, Metric::Gndvi] {
            if let Some(v) = m.get(k) {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn dvi_ignores_common_offset(b in proptest::array::uniform5(0.0f64..1.0), c in -0.5f64..0.5) {
        let (bands, fp) = one_cell(b);
        let mut shifted = b;
        shifted[2] += c;
        shifted[4] += c;
        let (bs, _) = one_cell(shifted);
        let d0 = spectral_indices(&bands, &fp, &[Metric::Dvi], SpectralOptions::default()).unwrap().get(Metric::Dvi).unwrap();
        let d1 = spectral_indices(&bs, &fp, &[Metric::Dvi], SpectralOptions::default()).unwrap().get(Metric::Dvi).unwrap();
        // Equal up to the rounding of the two additions.
        prop_assert!((d0 - d1).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn band_means_are_area_additive(seed in 0u64..10_000, split in 1usize..19) {
        let g = GridSpec { origin: (0.0, 10.0), cell_size: 0.5, nrows: 20, ncols: 20 };
        let mut k = seed;
        let mut vals = |_| {
            k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            Some((0..g.len()).map(|_| {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (k >> 11) as f64 / (1u64 << 53) as f64
            }).collect::<Vec<f64>>())
        };
        let bands = SpectralBands::from_values(g, [vals(0), vals(1), vals(2), vals(3), vals(4)]).unwrap();
        let x = split as f64 * 0.5;
        let whole = band_means(&bands, &BoundingBox::footprint(0.0, 0.0, 10.0, 10.0));
        let left = band_means(&bands, &BoundingBox::footprint(0.0, 0.0, x, 10.0));
        let right = band_means(&bands, &BoundingBox::footprint(x, 0.0, 10.0, 10.0));
        let wl = x / 10.0;
        for i in 0..5 {
            let combined = wl * left[i].unwrap() + (1.0 - wl) * right[i].unwrap();
            prop_assert!((whole[i].unwrap() - combined).abs() < 1e-9);
        }
    }
}
