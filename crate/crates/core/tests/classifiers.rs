use hatebench::classifiers::{
    dt_fit, lr_fit, lr_loss_and_gradient, nb_fit, rf_fit, Classifier, ClassifierKind,
    ClassifierSpec, DtConfig, LrConfig, MaxFeatures, NbParams, NbVariant, Node, RfConfig,
    TrainedClassifier,
};
use hatebench::corpus::Label;
use hatebench::matrix::DenseMatrix;
use hatebench::rng;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn label(hate: bool) -> Label {
    if hate {
        Label::Hate
    } else {
        Label::NonHate
    }
}

fn accuracy(pred: &[Label], y: &[Label]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

fn xor() -> (DenseMatrix, Vec<Label>) {
    let x = DenseMatrix::from_rows(&[
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ])
    .unwrap();
    (
        x,
        vec![Label::NonHate, Label::Hate, Label::Hate, Label::NonHate],
    )
}

fn random_dataset(seed: u64, rows: usize, cols: usize) -> (DenseMatrix, Vec<Label>) {
    let mut r = rng::seeded(seed);
    let data: Vec<f64> = (0..rows * cols).map(|_| r.gen_range(0..5) as f64).collect();
    let mut y: Vec<Label> = (0..rows).map(|_| label(r.gen_bool(0.5))).collect();
    y[0] = Label::Hate;
    y[1] = Label::NonHate;
    (DenseMatrix::from_vec(rows, cols, data).unwrap(), y)
}

#[test]
fn lr_gradient_matches_finite_differences() {
    let mut r = rng::seeded(3);
    let (rows, cols) = (30, 119);
    let z = DenseMatrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let y: Vec<Label> = (0..rows).map(|_| label(r.gen_bool(0.5))).collect();
    let w: Vec<f64> = (0..cols).map(|_| r.gen_range(-0.5..0.5)).collect();
    let b = 0.3;
    let l2 = 0.01;
    let (_, gw, gb) = lr_loss_and_gradient(&w, b, &z, &y, l2);
    let eps = 1e-6;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    for j in 0..cols {
        let (mut up, mut down) = (w.clone(), w.clone());
        up[j] += eps;
        down[j] -= eps;
        let n = (lr_loss_and_gradient(&up, b, &z, &y, l2).0
            - lr_loss_and_gradient(&down, b, &z, &y, l2).0)
            / (2.0 * eps);
        assert!(rel(gw[j], n) < 1e-4, "w{j}: {} vs {n}", gw[j]);
    }
    let n = (lr_loss_and_gradient(&w, b + eps, &z, &y, l2).0
        - lr_loss_and_gradient(&w, b - eps, &z, &y, l2).0)
        / (2.0 * eps);
    assert!(rel(gb, n) < 1e-4);
}

#[test]
fn lr_separates_a_line() {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..50 {
        rows.push(vec![-1.0]);
        y.push(Label::NonHate);
        rows.push(vec![1.0]);
        y.push(Label::Hate);
    }
    let x = DenseMatrix::from_rows(&rows).unwrap();
    let m = lr_fit(&x, &y, &LrConfig::default()).unwrap();
    assert_eq!(accuracy(&m.predict(&x).unwrap(), &y), 1.0);
}

#[test]
fn tree_learns_xor() {
    let (x, y) = xor();
    let m = dt_fit(&x, &y, &DtConfig::default()).unwrap();
    assert_eq!(m.predict(&x).unwrap(), y);
    assert!(
        m.internal_count() >= 3,
        "{} internal nodes",
        m.internal_count()
    );
}

#[test]
fn leaf_counts_match_routed_rows() {
    let (x, y) = random_dataset(17, 100, 6);
    let cfg = DtConfig {
        max_depth: Some(4),
        ..DtConfig::default()
    };
    let m = dt_fit(&x, &y, &cfg).unwrap();
    let leaves = m.apply(&x).unwrap();
    for (i, node) in m.nodes.iter().enumerate() {
        if let Node::Leaf { counts, .. } = node {
            let routed: Vec<usize> = (0..y.len()).filter(|&r| leaves[r] == i).collect();
            assert_eq!(counts[0] + counts[1], routed.len(), "leaf {i}");
            let hate = routed.iter().filter(|&&r| y[r].is_hate()).count();
            assert_eq!(counts[1], hate, "leaf {i}");
        }
    }
    let total: usize = m
        .nodes
        .iter()
        .map(|n| match n {
            Node::Leaf { counts, .. } => counts[0] + counts[1],
            Node::Split { .. } => 0,
        })
        .sum();
    assert_eq!(total, 100);
}

#[test]
fn single_tree_forest_equals_tree() {
    for seed in 0..50 {
        let (x, y) = random_dataset(1000 + seed, 40, 5);
        let tree = dt_fit(&x, &y, &DtConfig::default()).unwrap();
        let forest = rf_fit(
            &x,
            &y,
            &RfConfig {
                n_trees: 1,
                max_features: MaxFeatures::All,
                bootstrap: false,
                seed,
                tree: DtConfig::default(),
            },
        )
        .unwrap();
        let (probe, _) = random_dataset(5000 + seed, 60, 5);
        assert_eq!(
            forest.predict(&probe).unwrap(),
            tree.predict(&probe).unwrap(),
            "dataset {seed}"
        );
        assert_eq!(
            forest.predict(&x).unwrap(),
            tree.predict(&x).unwrap(),
            "dataset {seed}"
        );
    }
}

#[test]
fn forest_beats_a_stump_on_xor() {
    let (x, y) = xor();
    let stump = dt_fit(
        &x,
        &y,
        &DtConfig {
            max_depth: Some(1),
            ..DtConfig::default()
        },
    )
    .unwrap();
    let forest = rf_fit(
        &x,
        &y,
        &RfConfig {
            n_trees: 101,
            seed: 4,
            ..RfConfig::default()
        },
    )
    .unwrap();
    let stump_acc = accuracy(&stump.predict(&x).unwrap(), &y);
    let forest_acc = accuracy(&forest.predict(&x).unwrap(), &y);
    assert!(
        forest_acc >= stump_acc,
        "forest {forest_acc} stump {stump_acc}"
    );
}

#[test]
fn gaussian_nb_separates_blobs() {
    let mut r = rng::seeded(8);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut sample = |n: usize| {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..2 * n {
            let hate = i % 2 == 0;
            let mu = if hate { 5.0 } else { -5.0 };
            rows.push(vec![mu + noise.sample(&mut r), mu + noise.sample(&mut r)]);
            y.push(label(hate));
        }
        (DenseMatrix::from_rows(&rows).unwrap(), y)
    };
    let (x, y) = sample(100);
    let (tx, ty) = sample(100);
    let m = nb_fit(&x, &y, NbVariant::Gaussian).unwrap();
    assert!(accuracy(&m.predict(&tx).unwrap(), &ty) >= 0.99);
}

#[test]
fn multinomial_posterior_by_hand() {
    // Word counts over ["w0", "w1"]: hate docs [2, 0], [1, 1]; nonhate doc [0, 3].
    let x = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0], vec![0.0, 3.0]]).unwrap();
    let y = [Label::Hate, Label::Hate, Label::NonHate];
    let m = nb_fit(&x, &y, NbVariant::Auto).unwrap();
    assert!(matches!(m.params, NbParams::Multinomial { .. }));
    // Laplace: hate rates (3+1)/(4+2), (1+1)/(4+2); nonhate (0+1)/(3+2), (3+1)/(3+2).
    let row = [1.0, 2.0];
    let hate = (2.0 / 3.0) * (4.0f64 / 6.0) * (2.0f64 / 6.0).powi(2);
    let nonhate = (1.0 / 3.0) * (1.0f64 / 5.0) * (4.0f64 / 5.0).powi(2);
    let want = hate / (hate + nonhate);
    let got = m
        .predict_proba(&DenseMatrix::from_rows(&[row.to_vec()]).unwrap())
        .unwrap()[0];
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn saved_models_predict_identically() {
    let (x, y) = random_dataset(21, 60, 4);
    let dir = tempfile::tempdir().unwrap();
    for kind in [
        ClassifierKind::Lr,
        ClassifierKind::Dt,
        ClassifierKind::Rf,
        ClassifierKind::Nb,
        ClassifierKind::Majority,
    ] {
        let m = ClassifierSpec::default_for(kind, 9).fit(&x, &y).unwrap();
        let p = dir.path().join(format!("{}.json", kind.label()));
        m.save(&p).unwrap();
        let back = TrainedClassifier::load(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            back.predict_proba(&x).unwrap(),
            m.predict_proba(&x).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn probabilities_are_in_unit_interval(seed in any::<u64>()) {
        let (x, y) = random_dataset(seed, 30, 3);
        for kind in [ClassifierKind::Lr, ClassifierKind::Dt, ClassifierKind::Nb] {
            let m = ClassifierSpec::default_for(kind, seed).fit(&x, &y).unwrap();
            let p = m.predict_proba(&x).unwrap();
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            let pred = m.predict(&x).unwrap();
            prop_assert_eq!(pred.len(), y.len());
        }
    }

    #[test]
    fn unlimited_tree_fits_distinct_rows(seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64, r.gen_range(0.0..1.0)]).collect();
        let y: Vec<Label> = (0..25).map(|i| label(i == 0 || r.gen_bool(0.5))).collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let m = dt_fit(&x, &y, &DtConfig::default()).unwrap();
        prop_assert_eq!(m.predict(&x).unwrap(), y);
    }
}
