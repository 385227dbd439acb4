use super::*;
use std::io::Write as _;

fn write_temp(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

fn toy(labels: &[usize], m: usize) -> Dataset {
    let attrs = vec![AttributeSpec::numeric("x")];
    let rows: Vec<Vec<Cell>> = (0..labels.len())
        .map(|i| vec![Cell::Num(i as f64)])
        .collect();
    let names = (0..m).map(|k| format!("c{}", k)).collect();
    Dataset::new(attrs, rows, labels.to_vec(), names).unwrap()
}

#[test]
fn csv_mixed_columns_basic() {
    let f = write_temp("x,y,class\n1,red,a\n2,blue,b\n3,red,a\n4,green,b\n5,red,a\n");
    let d = load_csv(f.path(), LabelColumn::Name("class".into())).unwrap();
    assert_eq!(d.n_rows(), 5);
    assert_eq!(d.n_attrs(), 2);
    assert_eq!(d.n_classes(), 2);
    assert_eq!(d.class_names(), ["a", "b"]);
    assert!(d.attributes()[0].is_numeric());
    match &d.attributes()[1].kind {
        AttributeKind::Nominal { categories } => {
            assert_eq!(categories, &["red", "blue", "green"]);
        }
        _ => panic!("expected nominal"),
    }
    // first-appearance label order: a=0, b=1
    assert_eq!(d.labels(), [0, 1, 0, 1, 0]);
}

#[test]
fn csv_single_class_is_degenerate() {
    let f = write_temp("x,class\n1,a\n2,a\n");
    let err = load_csv(f.path(), LabelColumn::Name("class".into())).unwrap_err();
    assert!(matches!(err, DataError::DegenerateClasses(_)), "{err}");
}

#[test]
fn csv_missing_label_column() {
    let f = write_temp("x,y\n1,2\n");
    let err = load_csv(f.path(), LabelColumn::Name("class".into())).unwrap_err();
    assert!(matches!(err, DataError::Malformed(_)));
}

#[test]
fn csv_ragged_row_errors() {
    let f = write_temp("x,y,class\n1,2,a\n3,b\n");
    assert!(load_csv(f.path(), LabelColumn::Name("class".into())).is_err());
}

#[test]
fn csv_empty_cell_is_missing() {
    let f = write_temp("x,y,class\n1,2,a\n,3,b\n4,5,a\n6,7,b\n");
    let d = load_csv(f.path(), LabelColumn::Name("class".into())).unwrap();
    assert_eq!(d.n_rows(), 4);
    assert!(d.row(1)[0].is_missing());
    let p = preprocess(&d).unwrap();
    assert_eq!(p.n_rows(), 3);
}

#[test]
fn arff_minimal() {
    let f = write_temp(
        "@relation toy\n\
         @attribute x real\n\
         @attribute y numeric\n\
         @attribute class {pos,neg}\n\
         @data\n\
         1.0,2.0,pos\n\
         2.0,1.0,neg\n\
         % a comment\n\
         3.0,0.5,pos\n\
         0.5,3.0,neg\n",
    );
    let d = load_arff(f.path()).unwrap();
    assert_eq!(d.n_rows(), 4);
    assert_eq!(d.n_attrs(), 2);
    assert_eq!(d.class_names(), ["pos", "neg"]);
}

#[test]
fn arff_keel_outputs_column() {
    let f = write_temp(
        "@relation keelish\n\
         @attribute Class {yes,no}\n\
         @attribute a real [0.0, 5.0]\n\
         @attribute b integer\n\
         @inputs a, b\n\
         @outputs Class\n\
         @data\n\
         yes,1.0,2\n\
         no,2.0,3\n",
    );
    let d = load_arff(f.path()).unwrap();
    assert_eq!(d.n_attrs(), 2);
    assert_eq!(d.class_names(), ["yes", "no"]);
    assert_eq!(d.labels(), [0, 1]);
    assert_eq!(d.attributes()[0].name, "a");
}

#[test]
fn arff_missing_marker_survives_load_dropped_by_preprocess() {
    let f = write_temp(
        "@relation toy\n\
         @attribute x real\n\
         @attribute y real\n\
         @attribute class {pos,neg}\n\
         @data\n\
         1.0,?,pos\n\
         2.0,1.0,neg\n\
         3.0,0.0,pos\n\
         4.0,2.0,neg\n",
    );
    let d = load_arff(f.path()).unwrap();
    assert_eq!(d.n_rows(), 4);
    assert!(d.row(0)[1].is_missing());
    let p = preprocess(&d).unwrap();
    assert_eq!(p.n_rows(), 3);
}

#[test]
fn arff_undeclared_nominal_value_errors() {
    let f = write_temp(
        "@relation toy\n\
         @attribute x {a,b}\n\
         @attribute class {pos,neg}\n\
         @data\n\
         a,pos\n\
         c,neg\n",
    );
    let err = load_arff(f.path()).unwrap_err();
    assert!(matches!(err, DataError::Malformed(_)), "{err}");
}

#[test]
fn arff_arity_mismatch_errors() {
    let f = write_temp(
        "@relation toy\n\
         @attribute x real\n\
         @attribute class {pos,neg}\n\
         @data\n\
         1.0,pos\n\
         2.0,3.0,neg\n",
    );
    assert!(load_arff(f.path()).is_err());
}

#[test]
fn preprocess_drops_constant_attribute() {
    let attrs = vec![AttributeSpec::numeric("x"), AttributeSpec::numeric("c")];
    let rows = vec![
        vec![Cell::Num(1.0), Cell::Num(7.0)],
        vec![Cell::Num(2.0), Cell::Num(7.0)],
        vec![Cell::Num(3.0), Cell::Num(7.0)],
    ];
    let d = Dataset::new(attrs, rows, vec![0, 1, 0], vec!["a".into(), "b".into()]).unwrap();
    let p = preprocess(&d).unwrap();
    assert_eq!(p.n_rows(), 3);
    assert_eq!(p.n_attrs(), 1);
    assert_eq!(p.attributes()[0].name, "x");
}

#[test]
fn preprocess_identity_on_clean_data() {
    let d = toy(&[0, 1, 0, 1], 2);
    let p = preprocess(&d).unwrap();
    assert_eq!(p, d);
    // idempotence
    assert_eq!(preprocess(&p).unwrap(), p);
}

#[test]
fn preprocess_errors_when_class_vanishes() {
    let attrs = vec![AttributeSpec::numeric("x")];
    let rows = vec![
        vec![Cell::Missing],
        vec![Cell::Num(1.0)],
        vec![Cell::Num(2.0)],
    ];
    let d = Dataset::new(attrs, rows, vec![0, 1, 1], vec!["a".into(), "b".into()]).unwrap();
    assert!(matches!(
        preprocess(&d),
        Err(DataError::DegenerateClasses(_))
    ));
}

#[test]
fn class_priors_match_counts() {
    let d = toy(&[1, 0, 0, 0, 0, 0, 0, 0, 0, 0], 2);
    let p = class_priors(&d).unwrap();
    assert_eq!(p.as_slice(), &[0.9, 0.1]);

    let d = toy(&[1, 1, 0, 0, 0, 0, 0, 0, 0, 0], 2);
    let p = class_priors(&d).unwrap();
    assert_eq!(p.as_slice(), &[0.8, 0.2]);

    let d = toy(&[0, 1, 2], 3);
    let p = class_priors(&d).unwrap();
    for &v in p.as_slice() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn minority_class_tie_goes_to_higher_index() {
    let d = toy(&[0, 1, 0, 1], 2);
    assert_eq!(d.minority_class(), 1);
    let d = toy(&[0, 0, 0, 1], 2);
    assert_eq!(d.minority_class(), 1);
    let d = toy(&[0, 1, 1, 1], 2);
    assert_eq!(d.minority_class(), 0);
}

#[test]
fn five_by_two_stratification_arithmetic() {
    let labels: Vec<usize> = (0..100).map(|i| usize::from(i < 10)).collect();
    let d = toy(&labels, 2);
    let plan = five_by_two_cv(&d, 7).unwrap();
    assert_eq!(plan.folds.len(), 10);
    for (train, test) in &plan.folds {
        assert_eq!(test.len(), 50);
        assert_eq!(train.len(), 50);
        let min_in_test = test.iter().filter(|&&i| d.label(i) == 1).count();
        assert_eq!(min_in_test, 5);
        assert!(train.iter().all(|i| !test.contains(i)));
    }
    // within one repetition the two test sets partition the index set
    for rep in 0..5 {
        let mut all: Vec<usize> = plan.folds[2 * rep].1.clone();
        all.extend_from_slice(&plan.folds[2 * rep + 1].1);
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}

#[test]
fn five_by_two_is_deterministic() {
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let d = toy(&labels, 3);
    assert_eq!(
        five_by_two_cv(&d, 42).unwrap(),
        five_by_two_cv(&d, 42).unwrap()
    );
    assert_ne!(
        five_by_two_cv(&d, 42).unwrap(),
        five_by_two_cv(&d, 43).unwrap()
    );
}

#[test]
fn five_by_two_odd_counts_within_one() {
    let labels: Vec<usize> = (0..31).map(|i| usize::from(i < 7)).collect();
    let d = toy(&labels, 2);
    let plan = five_by_two_cv(&d, 3).unwrap();
    for (_, test) in &plan.folds {
        let min_in_test = test.iter().filter(|&&i| d.label(i) == 1).count();
        assert!((min_in_test as f64 - 3.5).abs() <= 0.5);
        let maj_in_test = test.len() - min_in_test;
        assert!((maj_in_test as f64 - 12.0).abs() <= 0.5);
    }
}

#[test]
fn five_by_two_rejects_singleton_class() {
    let d = toy(&[0, 0, 0, 1], 2);
    assert!(five_by_two_cv(&d, 1).is_err());
}

#[test]
fn gaussian_oracle_symmetry_point() {
    let priors = PriorVector::new(vec![0.9, 0.1]).unwrap();
    let mix = GaussianMixture::new(priors, vec![vec![-1.0], vec![1.0]], 1.0).unwrap();
    let post = mix.posterior(&[0.0]);
    // both densities equal at the midpoint, so the posterior is the prior
    assert!((post[1] - 0.1).abs() < 1e-12, "got {}", post[1]);
    assert!((post[0] - 0.9).abs() < 1e-12);
}

#[test]
fn gaussian_oracle_normalizes() {
    let priors = PriorVector::new(vec![0.7, 0.2, 0.1]).unwrap();
    let mix = GaussianMixture::new(
        priors,
        vec![vec![-2.0, 0.0], vec![0.0, 1.0], vec![2.0, 0.0]],
        0.5,
    )
    .unwrap();
    let mut rng = crate::rng::stream_rng(11, 0);
    use rand::Rng;
    for _ in 0..1000 {
        let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let post = mix.posterior(&x);
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(post.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

#[test]
fn gaussian_sample_frequencies_match_priors() {
    let priors = PriorVector::new(vec![0.9, 0.1]).unwrap();
    let (d, _) =
        gen_gaussian_imbalanced(10_000, priors, vec![vec![-1.0], vec![1.0]], 1.0, 5).unwrap();
    let counts = d.class_counts();
    let freq = counts[1] as f64 / 10_000.0;
    let se = (0.1f64 * 0.9 / 10_000.0).sqrt();
    assert!(
        (freq - 0.1).abs() <= 3.0 * se,
        "freq {} vs 0.1 (se {})",
        freq,
        se
    );
}

#[test]
fn csv_round_trip_identity() {
    let f = write_temp(
        "x,color,class\n1.5,red,a\n2.25,blue,b\n-3.125e-2,red,a\n,green,b\n0.1,blue,a\n",
    );
    let d1 = load_csv(f.path(), LabelColumn::Name("class".into())).unwrap();
    let out = tempfile::NamedTempFile::new().unwrap();
    write_csv(&d1, out.path()).unwrap();
    let d2 = load_csv(out.path(), LabelColumn::Name("class".into())).unwrap();
    assert_eq!(d1, d2);
}

#[test]
fn prior_vector_rejects_bad_inputs() {
    assert!(PriorVector::new(vec![0.5, 0.5]).is_ok());
    assert!(PriorVector::new(vec![1.0, 0.0]).is_err());
    assert!(PriorVector::new(vec![0.6, 0.6]).is_err());
    assert!(PriorVector::new(vec![0.5]).is_err());
}

#[test]
fn dataset_rejects_schema_violations() {
    let attrs = vec![AttributeSpec::nominal("c", vec!["u".into(), "v".into()])];
    // category index out of range
    assert!(Dataset::new(
        attrs.clone(),
        vec![vec![Cell::Cat(2)], vec![Cell::Cat(0)]],
        vec![0, 1],
        vec!["a".into(), "b".into()],
    )
    .is_err());
    // kind mismatch
    assert!(Dataset::new(
        attrs.clone(),
        vec![vec![Cell::Num(1.0)], vec![Cell::Cat(0)]],
        vec![0, 1],
        vec!["a".into(), "b".into()],
    )
    .is_err());
    // label out of range
    assert!(Dataset::new(
        attrs,
        vec![vec![Cell::Cat(0)], vec![Cell::Cat(1)]],
        vec![0, 2],
        vec!["a".into(), "b".into()],
    )
    .is_err());
}

mod round_trip_property {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec((any::<f32>(), 0usize..3, 0usize..2), 2..40)) {
            // need both classes present
            prop_assume!(rows.iter().any(|r| r.2 == 0) && rows.iter().any(|r| r.2 == 1));
            let attrs = vec![
                AttributeSpec::numeric("x"),
                AttributeSpec::nominal("c", vec!["u".into(), "v".into(), "w".into()]),
            ];
            let mut instances = Vec::new();
            let mut labels = Vec::new();
            for (x, c, y) in &rows {
                let x = if x.is_finite() { f64::from(*x) } else { 0.0 };
                instances.push(vec![Cell::Num(x), Cell::Cat(*c)]);
                labels.push(*y);
            }
            let d1 = Dataset::new(attrs, instances, labels, vec!["a".into(), "b".into()]).unwrap();
            // the invariant is stated for load_csv-produced datasets, whose
            // category and class orders follow first appearance; one write/load
            // canonicalizes d1 into that form, the second must be an identity
            let out = tempfile::NamedTempFile::new().unwrap();
            write_csv(&d1, out.path()).unwrap();
            let d2 = load_csv(out.path(), LabelColumn::Index(2)).unwrap();
            let out2 = tempfile::NamedTempFile::new().unwrap();
            write_csv(&d2, out2.path()).unwrap();
            let d3 = load_csv(out2.path(), LabelColumn::Index(2)).unwrap();
            prop_assert_eq!(&d2, &d3);
            prop_assert_eq!(d1.n_rows(), d2.n_rows());
        }
    }
}
