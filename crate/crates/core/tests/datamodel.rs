use nalgebra::{DMatrix, DVector};
use odfm::datamodel::*;
use odfm::Error;
use proptest::prelude::*;
use std::io::Cursor;

fn read(text: &str, options: &CsvOptions) -> odfm::Result<MultiSeries<f64>> {
    read_csv(Cursor::new(text.as_bytes()), options)
}

#[test]
fn rows_are_components_without_header() {
    let text = "1,2,3,4,5\n6,7,8,9,10\n11,12,13,14,15\n";
    let opts = CsvOptions { has_header: false, orientation: Orientation::RowsAreComponents, ..Default::default() };
    let s = read(text, &opts).unwrap();
    assert_eq!((s.n(), s.t_len()), (3, 5));
    assert_eq!(s.values()[(1, 0)], 6.0);
    assert_eq!(s.values()[(2, 4)], 15.0);
    assert_eq!(s.labels(), ["y1", "y2", "y3"]);
}

#[test]
fn header_becomes_labels() {
    let text = "cpi,ip,rbndl\n1,2,3\n4,5,6\n";
    let s = read(text, &CsvOptions::default()).unwrap();
    assert_eq!(s.n(), 3);
    assert_eq!(s.t_len(), 2);
    assert_eq!(s.labels(), ["cpi", "ip", "rbndl"]);
    assert_eq!(s.at(2), DVector::from_vec(vec![4.0, 5.0, 6.0]));
}

#[test]
fn blank_cell_is_reported_with_position() {
    let text = "a,b\n1,2\n3,\n";
    match read(text, &CsvOptions::default()) {
        Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (3, 2)),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn non_numeric_and_ragged_rows_fail() {
    assert!(matches!(read("a,b\n1,x\n", &CsvOptions::default()), Err(Error::Parse { col: 2, .. })));
    assert!(matches!(read("a,b\n1,2\n3\n", &CsvOptions::default()), Err(Error::Ragged { .. })));
    assert!(read("a,b\n", &CsvOptions::default()).is_err());
    assert!(read("a,b\n1,inf\n2,3\n", &CsvOptions::default()).is_err());
}

#[test]
fn semicolon_delimiter() {
    let opts = CsvOptions { delimiter: b';', ..Default::default() };
    let s = read("u;v\n1.5;2\n3;4\n", &opts).unwrap();
    assert_eq!(s.values()[(0, 0)], 1.5);
}

#[test]
fn missing_file_is_io_error() {
    let err = load_csv::<f64>("/nonexistent/panel.csv", &CsvOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn csv_round_trip_both_orientations() {
    let dir = tempfile::tempdir().unwrap();
    let s = MultiSeries::from_matrix(DMatrix::from_fn(3, 7, |i, t| (i as f64 + 1.0) / 3.0 + (t as f64).sin())).unwrap();
    for orientation in [Orientation::ColumnsAreComponents, Orientation::RowsAreComponents] {
        let opts = CsvOptions { orientation, ..Default::default() };
        let path = dir.path().join("p.csv");
        write_csv(&s, &path, &opts).unwrap();
        let back: MultiSeries<f64> = load_csv(&path, &opts).unwrap();
        assert_eq!(back.values(), s.values());
    }
}

#[test]
fn sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let meta = SeriesMeta {
        labels: vec!["a".into(), "b".into()],
        transforms: vec![TransformKind::Diff, TransformKind::LogDiff],
        time_origin: Some("1970-01".into()),
    };
    let path = dir.path().join("p.json");
    write_sidecar(&path, &meta).unwrap();
    assert_eq!(read_sidecar(&path).unwrap(), meta);
    let s = MultiSeries::from_matrix(DMatrix::from_element(2, 3, 1.0)).unwrap().with_meta(&meta).unwrap();
    assert_eq!(s.labels(), ["a", "b"]);
    assert_eq!(s.time_origin(), Some("1970-01"));
}

#[test]
fn construction_invariants() {
    assert!(MultiSeries::from_matrix(DMatrix::<f64>::zeros(2, 1)).is_err());
    assert!(MultiSeries::from_matrix(DMatrix::<f64>::zeros(0, 4)).is_err());
    let mut v = DMatrix::<f64>::zeros(2, 3);
    v[(1, 2)] = f64::NAN;
    assert!(matches!(MultiSeries::from_matrix(v), Err(Error::Domain { component: 2, time: 3, .. })));
    assert!(MultiSeries::new(DMatrix::<f64>::zeros(2, 3), vec!["x".into()]).is_err());
    assert!(MultiSeries::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
}

#[test]
fn diff_of_constant_is_zero() {
    let s = MultiSeries::from_rows(&[vec![3.0; 6]]).unwrap();
    let d = apply_transform(&s, &[TransformKind::Diff]).unwrap();
    assert_eq!(d.t_len(), 5);
    assert!(d.values().iter().all(|x| *x == 0.0));
}

#[test]
fn log_diff_of_geometric_is_log_ratio() {
    let r: f64 = 1.03;
    let s = MultiSeries::from_rows(&[(0..20).map(|t| 2.5 * r.powi(t)).collect()]).unwrap();
    let d = apply_transform(&s, &[TransformKind::LogDiff]).unwrap();
    assert_eq!(d.t_len(), 19);
    for x in d.values().iter() {
        assert!((x - r.ln()).abs() < 1e-12);
    }
}

#[test]
fn double_log_diff_of_powers_of_two() {
    let s = MultiSeries::<f64>::from_rows(&[vec![1.0, 2.0, 4.0, 8.0]]).unwrap();
    let d = apply_transform(&s, &[TransformKind::DoubleLogDiff]).unwrap();
    assert_eq!(d.t_len(), 2);
    // ln 4 − 2 ln 2 + ln 1 = 0 and ln 8 − 2 ln 4 + ln 2 = 0.
    for x in d.values().iter() {
        assert!(x.abs() < 1e-12);
    }
}

#[test]
fn mixed_transforms_align_at_the_end() {
    let s = MultiSeries::from_rows(&[vec![1.0, 2.0, 4.0, 8.0, 16.0], vec![1.0, 3.0, 6.0, 10.0, 15.0]]).unwrap();
    let d = apply_transform(&s, &[TransformKind::DoubleLogDiff, TransformKind::Diff]).unwrap();
    assert_eq!(d.t_len(), 3);
    // Second row: diffs (2,3,4,5), last three kept.
    assert_eq!(d.values().row(1).iter().copied().collect::<Vec<_>>(), vec![3.0, 4.0, 5.0]);
}

#[test]
fn log_of_nonpositive_is_domain_error() {
    let s = MultiSeries::from_rows(&[vec![1.0, 2.0, 3.0], vec![1.0, 0.0, 2.0]]).unwrap();
    let err = apply_transform(&s, &[TransformKind::None, TransformKind::LogDiff]).unwrap_err();
    assert!(matches!(err, Error::Domain { component: 2, time: 2, .. }));
}

#[test]
fn transform_list_parsing() {
    assert_eq!(parse_transform_list("diff", 3).unwrap(), vec![TransformKind::Diff; 3]);
    assert_eq!(
        parse_transform_list("none,log-diff,double-log-diff", 3).unwrap(),
        vec![TransformKind::None, TransformKind::LogDiff, TransformKind::DoubleLogDiff]
    );
    assert!(parse_transform_list("diff,diff", 3).is_err());
    assert!(parse_transform_list("cube", 1).is_err());
}

#[test]
fn center_cases() {
    let zero = MultiSeries::from_matrix(DMatrix::<f64>::zeros(2, 4)).unwrap();
    let (c, m) = center(&zero);
    assert_eq!(c, zero);
    assert_eq!(m, DVector::zeros(2));

    let s = MultiSeries::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 4.0, 4.0]]).unwrap();
    let (c, m) = center(&s);
    assert_eq!(m, DVector::from_vec(vec![2.0, 4.0]));
    assert_eq!(c.values(), &DMatrix::from_row_slice(2, 3, &[-1.0, 0.0, 1.0, 0.0, 0.0, 0.0]));
}

#[test]
fn replace_at_cases() {
    let s = MultiSeries::from_matrix(DMatrix::from_fn(3, 5, |i, t| (i * 5 + t) as f64)).unwrap();
    assert_eq!(replace_at(&s, 2, &s.at(2)).unwrap(), s);
    let z = replace_at(&s, 5, &DVector::zeros(3)).unwrap();
    assert_eq!(z.at(5), DVector::zeros(3));
    let saved = s.at(3);
    let tmp = replace_at(&s, 3, &DVector::from_element(3, 9.0)).unwrap();
    assert_eq!(replace_at(&tmp, 3, &saved).unwrap(), s);
    assert!(replace_at(&s, 0, &saved).is_err());
    assert!(replace_at(&s, 6, &saved).is_err());
    assert!(replace_at(&s, 1, &DVector::zeros(2)).is_err());
}

#[test]
fn permutation_and_scaling() {
    let s = MultiSeries::from_matrix(DMatrix::from_fn(3, 4, |i, t| (i * 4 + t) as f64)).unwrap();
    let p = s.permuted(&[2, 0, 1]).unwrap();
    assert_eq!(p.values().row(0), s.values().row(2));
    assert_eq!(p.labels()[0], "y3");
    assert!(s.permuted(&[0, 0, 1]).is_err());
    assert_eq!(s.scaled(2.0).values()[(1, 1)], 10.0);
}

#[test]
fn f32_panel_reads() {
    let s: MultiSeries<f32> = read_csv(Cursor::new(b"a,b\n1,2\n3,4\n".as_slice()), &CsvOptions::default()).unwrap();
    assert_eq!(s.values()[(1, 1)], 4.0f32);
}

proptest! {
    #[test]
    fn diff_commutes_with_centering(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 12), 1..4)) {
        let s = MultiSeries::from_rows(&rows).unwrap();
        let spec = vec![TransformKind::Diff; s.n()];
        let a = apply_transform(&s, &spec).unwrap();
        let b = apply_transform(&center(&s).0, &spec).unwrap();
        prop_assert!((a.values() - b.values()).amax() < 1e-9);
    }

    #[test]
    fn transform_lengths(t in 4usize..30, kinds in prop::collection::vec(0usize..4, 1..4)) {
        let kinds: Vec<TransformKind> = kinds.iter().map(|k| [TransformKind::None, TransformKind::Diff, TransformKind::LogDiff, TransformKind::DoubleLogDiff][*k]).collect();
        let s = MultiSeries::from_matrix(DMatrix::from_fn(kinds.len(), t, |i, j| 1.0 + (i + j) as f64)).unwrap();
        let out = apply_transform(&s, &kinds).unwrap();
        let max_order = kinds.iter().map(|k| k.order()).max().unwrap();
        prop_assert_eq!(out.t_len(), t - max_order);
    }
}
