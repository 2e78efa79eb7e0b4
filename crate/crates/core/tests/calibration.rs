use proptest::prelude::*;
use sgm_core::calibration::{
    compute_eof, decode_field, encode_field, list_snapshot_files, load_field, save_field,
    save_vector_field, CalibrationError, SnapshotEnsemble, SGMF_HEADER_LEN,
};
use sgm_core::field::{vector_inner_product, Field, FieldKind, Grid2D, VectorField};

fn grid() -> Grid2D {
    Grid2D::periodic_square(32).unwrap()
}

fn unit(v: VectorField) -> VectorField {
    let n = vector_inner_product(&v, &v).unwrap().sqrt();
    v.scaled(1.0 / n)
}

/// Three fields that are orthonormal under the quadrature pairing.
fn fourier_modes(g: Grid2D) -> Vec<VectorField> {
    vec![
        unit(VectorField::from_fn(g, |_, y| (y.sin(), 0.0))),
        unit(VectorField::from_fn(g, |x, _| (0.0, (2.0 * x).cos()))),
        unit(VectorField::from_fn(g, |x, y| ((x + y).cos(), -(x + y).cos()))),
    ]
}

fn combine(base: &VectorField, terms: &[(f64, &VectorField)]) -> VectorField {
    let mut out = base.clone();
    for (c, v) in terms {
        out.axpy(*c, v).unwrap();
    }
    out
}

/// Sum of squared sines of the principal angles between span(modes) and
/// the orthonormal basis `basis`, from the projection residual.
fn grassmann_distance(modes: &[VectorField], basis: &[VectorField]) -> f64 {
    modes
        .iter()
        .map(|m| {
            let mut r = m.clone();
            for b in basis {
                r.axpy(-vector_inner_product(b, m).unwrap(), b).unwrap();
            }
            vector_inner_product(&r, &r).unwrap()
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn identical_snapshots_give_zero_spectrum() {
    let g = grid();
    let s = VectorField::from_fn(g, |x, y| (x.sin() * y.cos(), 0.3));
    let ens = SnapshotEnsemble::new(vec![s.clone(); 4], "same").unwrap();
    let eof = compute_eof(&ens, 3).unwrap();
    assert_eq!(eof.singular_values, vec![0.0; 3]);
    assert!(eof.mean_field.l2_distance(&s) < 1e-15);
    assert_eq!(eof.captured_variance(), vec![0.0; 3]);
}

#[test]
fn orthogonal_pair_spans_the_same_plane() {
    let g = grid();
    let modes = fourier_modes(g);
    let (a, b) = (modes[0].scaled(1.7), modes[1].scaled(0.6));
    let snaps = vec![a.clone(), b.clone(), a.scaled(-1.0), b.scaled(-1.0)];
    let eof = compute_eof(&SnapshotEnsemble::new(snaps, "pair").unwrap(), 2).unwrap();
    assert!(grassmann_distance(&eof.modes, &modes[..2]) < 1e-10);
    // fluctuations are +-a, +-b, so the singular values are sqrt(2)|a|, sqrt(2)|b|
    let expected = [2f64.sqrt() * 1.7, 2f64.sqrt() * 0.6];
    for (s, e) in eof.singular_values.iter().zip(expected) {
        assert!((s - e).abs() < 1e-12 * e, "{s} vs {e}");
    }
}

/// Coefficient vectors orthonormal in R^8 and orthogonal to the constant.
fn walsh(k: usize) -> Vec<f64> {
    let s = 1.0 / 8f64.sqrt();
    (0..8)
        .map(|j: usize| if (j >> k) & 1 == 0 { s } else { -s })
        .collect()
}

fn constructed_ensemble() -> (SnapshotEnsemble, Vec<VectorField>, VectorField) {
    let g = grid();
    let modes = fourier_modes(g);
    let mean = VectorField::from_fn(g, |x, y| (0.2 + (x - y).sin(), -0.1));
    let amps = [3.0, 2.0, 1.0];
    let coeffs: Vec<Vec<f64>> = (0..3).map(walsh).collect();
    let snaps = (0..8)
        .map(|j| {
            let terms: Vec<(f64, &VectorField)> =
                (0..3).map(|k| (amps[k] * coeffs[k][j], &modes[k])).collect();
            combine(&mean, &terms)
        })
        .collect();
    (SnapshotEnsemble::new(snaps, "constructed").unwrap(), modes, mean)
}

#[test]
fn constructed_ensemble_recovers_amplitudes_and_modes() {
    let (ens, modes, mean) = constructed_ensemble();
    let eof = compute_eof(&ens, 3).unwrap();
    let s = &eof.singular_values;
    assert!((s[0] / s[2] - 3.0).abs() < 1e-8 && (s[1] / s[2] - 2.0).abs() < 1e-8, "{s:?}");
    assert!(eof.mean_field.l2_distance(&mean) < 1e-12);
    for i in 0..3 {
        for j in 0..3 {
            let ip = vector_inner_product(&eof.modes[i], &eof.modes[j]).unwrap();
            assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
        let overlap = vector_inner_product(&eof.modes[i], &modes[i]).unwrap();
        assert!((overlap.abs() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn full_rank_projection_reconstructs_snapshots() {
    let (ens, _, _) = constructed_ensemble();
    let eof = compute_eof(&ens, 3).unwrap();
    for s in ens.snapshots() {
        let back = eof.reconstruct(&eof.project(s).unwrap()).unwrap();
        assert!(back.l2_distance(s) <= 1e-8 * s.l2_norm());
    }
    let cv = eof.captured_variance();
    assert!(cv.windows(2).all(|w| w[1] <= w[0]));
    assert!((cv.iter().sum::<f64>() - 1.0).abs() < 1e-8);
}

#[test]
fn mode_signs_are_independent_of_snapshot_sign() {
    let (ens, _, _) = constructed_ensemble();
    let flipped: Vec<VectorField> = ens.snapshots().iter().map(|s| s.scaled(-1.0)).collect();
    let a = compute_eof(&ens, 3).unwrap();
    let b = compute_eof(&SnapshotEnsemble::new(flipped, "flipped").unwrap(), 3).unwrap();
    for (p, q) in a.modes.iter().zip(&b.modes) {
        assert!(p.l2_distance(q) < 1e-10);
    }
}

#[test]
fn eof_preconditions() {
    let (ens, _, _) = constructed_ensemble();
    assert!(matches!(
        compute_eof(&ens, 8),
        Err(CalibrationError::TooManyModes { requested: 8, max: 7 })
    ));
    let one = vec![VectorField::zeros(grid())];
    assert!(matches!(SnapshotEnsemble::new(one, "x"), Err(CalibrationError::TooFewSnapshots(1))));
    let mixed = vec![VectorField::zeros(grid()), VectorField::zeros(Grid2D::periodic_square(16).unwrap())];
    assert_eq!(SnapshotEnsemble::new(mixed, "x").unwrap_err().code(), "invalid_field");
}

#[test]
fn golden_bytes_for_a_small_scalar_field() {
    let g = Grid2D::new(8, 8, 1.0, 2.0).unwrap();
    let vals: Vec<f64> = (0..64).map(|i| i as f64 * 0.5 - 3.0).collect();
    let f = Field::new(FieldKind::Density, g, vals.clone()).unwrap();
    let mut expected = b"SGMF".to_vec();
    expected.extend([1, 0, 0, 0, 8, 0, 0, 0, 8, 0, 0, 0, 1, 0, 0, 0]);
    expected.extend(1.0f64.to_bits().to_le_bytes());
    expected.extend(2.0f64.to_bits().to_le_bytes());
    for v in &vals {
        expected.extend(v.to_bits().to_le_bytes());
    }
    assert_eq!(encode_field(&f), expected);
}

#[test]
fn sgmf_errors_are_distinct() {
    let f = Field::constant(FieldKind::Scalar, grid(), 2.0);
    let good = encode_field(&f);

    let mut bad = good.clone();
    bad[..4].copy_from_slice(b"XXXX");
    assert!(matches!(decode_field(&bad), Err(CalibrationError::BadMagic { found }) if &found == b"XXXX"));

    let mut v2 = good.clone();
    v2[4] = 2;
    assert!(matches!(decode_field(&v2), Err(CalibrationError::VersionMismatch { found: 2 })));

    let cut = &good[..good.len() - 3];
    assert!(matches!(decode_field(cut), Err(CalibrationError::TruncatedPayload { .. })));
    assert!(matches!(decode_field(&good[..10]), Err(CalibrationError::TruncatedPayload { .. })));

    let mut huge = good.clone();
    huge[8..16].copy_from_slice(&[0xff; 8]);
    assert!(matches!(decode_field(&huge), Err(CalibrationError::DimensionOverflow { .. })));

    let mut kind = good.clone();
    kind[16] = 9;
    assert!(matches!(decode_field(&kind), Err(CalibrationError::UnknownKind(9))));

    let mut long = good.clone();
    long.push(0);
    assert!(matches!(decode_field(&long), Err(CalibrationError::TrailingBytes { extra: 1 })));

    let codes: std::collections::BTreeSet<_> = [
        decode_field(&bad).unwrap_err().code(),
        decode_field(&v2).unwrap_err().code(),
        decode_field(cut).unwrap_err().code(),
        decode_field(&huge).unwrap_err().code(),
    ]
    .into_iter()
    .collect();
    assert_eq!(codes.len(), 4);
}

#[test]
fn directory_ingestion_is_lexicographic() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid();
    for (name, c) in [("t002.sgmf", 2.0), ("t000.sgmf", 0.0), ("t001.sgmf", 1.0)] {
        save_vector_field(&VectorField::uniform(g, c, -c), dir.path().join(name)).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let files = list_snapshot_files(dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let ens = SnapshotEnsemble::from_dir(dir.path()).unwrap();
    let firsts: Vec<f64> = ens.snapshots().iter().map(|s| s.x[0]).collect();
    assert_eq!(firsts, vec![0.0, 1.0, 2.0]);

    save_field(&Field::zeros(FieldKind::Scalar, g), dir.path().join("t003.sgmf")).unwrap();
    assert!(matches!(
        SnapshotEnsemble::from_dir(dir.path()),
        Err(CalibrationError::NotVector { index: 3, kind: FieldKind::Scalar })
    ));
}

#[test]
fn missing_file_reports_path() {
    let e = load_field("/nonexistent/field.sgmf").unwrap_err();
    assert_eq!(e.code(), "io");
    assert!(e.to_string().contains("/nonexistent/field.sgmf"));
}

fn any_kind() -> impl Strategy<Value = FieldKind> {
    prop_oneof![
        Just(FieldKind::Scalar),
        Just(FieldKind::Density),
        Just(FieldKind::OneForm),
        Just(FieldKind::Vector),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sgmf_round_trip_is_byte_exact(
        kind in any_kind(),
        nx in (4usize..10).prop_map(|n| 2 * n),
        ny in (4usize..10).prop_map(|n| 2 * n),
        lx in 0.1f64..100.0,
        seed in any::<u64>(),
    ) {
        let g = Grid2D::new(nx, ny, lx, lx * 0.5).unwrap();
        let n = g.len() * kind.components();
        // finite bit patterns, including subnormals and signed zeros
        let mut state = seed | 1;
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let v = f64::from_bits(state);
                if v.is_finite() { v } else { -0.0 }
            })
            .collect();
        let f = Field::new(kind, g, vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.sgmf");
        save_field(&f, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        prop_assert_eq!(bytes.len(), SGMF_HEADER_LEN + 8 * n);
        let back = load_field(&p).unwrap();
        prop_assert_eq!(back.kind(), kind);
        prop_assert_eq!(back.grid(), &g);
        let same = back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
        prop_assert_eq!(encode_field(&back), bytes);
    }
}
