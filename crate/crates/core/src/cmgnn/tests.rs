use ndarray::{array, Array2};
use rand::Rng as _;

use super::*;
use crate::graph::{generate_splits, Graph, Split};
use crate::htmp::{ForwardOptions, HtmpModel};
use crate::rng;
use crate::tensor::{grad_check, GradCheckConfig, ParamStore, Tape, Var};
use crate::testutil::{permutation, random_graph, random_matrix};
use crate::train::fit;

fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    (a - b).mapv(f64::abs).fold(0.0, |m: f64, &v| m.max(v))
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v.max(0.0))
}

fn random_guidance(n: usize, k: usize, seed: u64) -> Guidance {
    let mut soft = random_matrix(n, k, seed).mapv(|v| v.abs() + 0.05);
    crate::graph::l1_normalize_rows(&mut soft);
    let mut m = random_matrix(k, k, seed + 1).mapv(|v| v.abs() + 0.05);
    crate::graph::l1_normalize_rows(&mut m);
    Guidance {
        b_sup: soft.dot(&m),
        m_hat: m,
    }
}

struct Fixture {
    g: Graph,
    inputs: CmgnnInputs,
    model: CmgnnModel,
    store: ParamStore,
    guidance: Guidance,
}

fn fixture(g: Graph, arch: CmgnnArch, seed: u64) -> Fixture {
    let train: Vec<usize> = (0..g.n_nodes()).collect();
    let protos = build_prototypes(&g, &train).unwrap();
    let inputs = CmgnnInputs::new(&g, protos, arch.sym_raw).unwrap();
    let mut store = ParamStore::new();
    let mut r = rng::seeded(seed, rng::stream::INIT);
    let model = CmgnnModel::new(
        &arch,
        g.n_nodes(),
        g.n_features(),
        g.n_classes(),
        &mut store,
        &mut r,
    )
    .unwrap();
    let guidance = random_guidance(g.n_nodes(), g.n_classes(), seed);
    Fixture {
        g,
        inputs,
        model,
        store,
        guidance,
    }
}

fn eval(f: &Fixture, opts: &CmgnnOptions) -> (Tape, CmgnnOutput) {
    let mut t = Tape::eval();
    let mut r = rng::seeded(0, rng::stream::DROPOUT);
    let out = f
        .model
        .forward(&mut t, &f.store, &f.inputs, &f.guidance, &mut r, opts)
        .unwrap();
    (t, out)
}

/// Every class has a node, so prototypes exist whatever the split.
fn labeled_graph(n: usize, p: f64, d_f: usize, k: usize, seed: u64) -> Graph {
    let g = random_graph(n, p, d_f, k, seed);
    let labels: Vec<Option<usize>> = (0..n).map(|i| Some(i % k)).collect();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| {
            g.neighbors(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
        .collect();
    Graph::from_edges("toy", n, &edges, g.features().clone(), labels, k, false).unwrap()
}

#[test]
fn prototypes_of_identical_features() {
    let x = array![[1.0, 3.0], [1.0, 3.0], [2.0, 2.0], [2.0, 2.0]];
    let g = Graph::from_edges(
        "p",
        4,
        &[],
        x,
        vec![Some(0), Some(0), Some(1), Some(1)],
        2,
        false,
    )
    .unwrap();
    let p = build_prototypes(&g, &[0, 1, 2, 3]).unwrap();
    assert_eq!(p, array![[0.25, 0.75], [0.5, 0.5]]);
    let single = build_prototypes(&g, &[0, 2]).unwrap();
    assert_eq!(single, p);
}

#[test]
fn prototypes_match_brute_force() {
    let g = labeled_graph(20, 0.2, 5, 3, 11);
    let train: Vec<usize> = (0..20).filter(|i| i % 3 != 1 || *i < 6).collect();
    let p = build_prototypes(&g, &train).unwrap();
    for k in 0..3 {
        let rows: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&i| g.label(i) == Some(k))
            .collect();
        let mut mean = vec![0.0; 5];
        for &i in &rows {
            for j in 0..5 {
                mean[j] += g.features()[[i, j]] / rows.len() as f64;
            }
        }
        let l1: f64 = mean.iter().map(|v: &f64| v.abs()).sum();
        for j in 0..5 {
            assert!((p[[k, j]] - mean[j] / l1).abs() < 1e-12);
        }
    }
}

#[test]
fn prototypes_report_empty_classes() {
    let g = labeled_graph(12, 0.3, 2, 3, 1);
    match build_prototypes(&g, &[0, 3, 6]) {
        Err(crate::Error::InvalidArgument(m)) => assert!(m.contains("[1, 2]"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn identity_encoder_passes_features() {
    let g = labeled_graph(10, 0.3, 4, 2, 2);
    let arch = CmgnnArch {
        layers: 0,
        hidden: 4,
        dropout: 0.0,
        ..CmgnnArch::default()
    };
    let mut f = fixture(g, arch, 1);
    let id = f.store.id("input.w").unwrap();
    *f.store.value_mut(id) = Array2::eye(4);
    let (t, out) = eval(&f, &CmgnnOptions::default());
    assert_eq!(t.value(out.z), f.g.features());
    assert_eq!(t.value(out.z_ptt), &f.inputs.prototypes);
}

#[test]
fn structure_encoder_matches_dense_oracle() {
    let g = labeled_graph(6, 0.5, 3, 2, 4);
    let arch = CmgnnArch {
        layers: 0,
        hidden: 5,
        dropout: 0.0,
        structure_info: true,
        ..CmgnnArch::default()
    };
    let f = fixture(g, arch, 2);
    let (t, out) = eval(&f, &CmgnnOptions::default());
    let w = |name: &str| f.store.value(f.store.id(name).unwrap()).clone();
    let a_hat = f.g.row_normalized_adjacency().to_dense();
    let h = ndarray::concatenate![
        ndarray::Axis(1),
        f.g.features().dot(&w("input.x.w")),
        a_hat.dot(&w("input.a.w"))
    ];
    let want = h.dot(&w("input.w"));
    assert!(max_diff(t.value(out.z), &want) <= 1e-12);
}

#[test]
fn structure_encoder_on_edgeless_graph() {
    let g = Graph::from_edges(
        "e",
        4,
        &[],
        random_matrix(4, 3, 1),
        vec![Some(0), Some(1), Some(0), Some(1)],
        2,
        false,
    )
    .unwrap();
    let arch = CmgnnArch {
        layers: 0,
        hidden: 3,
        dropout: 0.0,
        structure_info: true,
        ..CmgnnArch::default()
    };
    let f = fixture(g, arch, 3);
    let (t, out) = eval(&f, &CmgnnOptions::default());
    let w = |name: &str| f.store.value(f.store.id(name).unwrap()).clone();
    let w0 = w("input.w");
    let want =
        f.g.features()
            .dot(&w("input.x.w"))
            .dot(&w0.slice(ndarray::s![..3, ..]));
    assert!(max_diff(t.value(out.z), &want) <= 1e-12);
}

#[test]
fn ego_only_alpha_equals_mlp_with_cat_fuse() {
    for (layers, relu_variant, seed) in [(1, false, 1), (2, false, 2), (3, true, 3)] {
        let g = labeled_graph(15, 0.3, 6, 3, seed);
        let arch = CmgnnArch {
            layers,
            hidden: 8,
            dropout: 0.3,
            relu_variant,
            ..CmgnnArch::default()
        };
        let f = fixture(g, arch, seed);
        let (t, out) = eval(
            &f,
            &CmgnnOptions {
                forced_alpha: Some([1.0, 0.0, 0.0]),
            },
        );

        let spec = mlp_cat_spec(&arch);
        let mut store = ParamStore::new();
        let mut r = rng::seeded(99, rng::stream::INIT);
        let mlp = HtmpModel::new(&spec, 6, 3, &mut store, &mut r).unwrap();
        let copied = store.copy_matching(&f.store);
        assert_eq!(copied, store.len());
        let bound = crate::htmp::BoundStructure::new(&spec, &f.g).unwrap();
        let mut t2 = Tape::eval();
        let x = t2.constant(f.g.features().clone()).unwrap();
        let out2 = mlp
            .forward(
                &mut t2,
                &store,
                &bound,
                x,
                &mut r,
                &ForwardOptions::default(),
            )
            .unwrap();
        assert!(max_diff(t.value(out.logits), t2.value(out2.logits)) <= 1e-10);
    }
}

#[test]
fn raw_only_alpha_matches_row_normalized_gcn_oracle() {
    let g = labeled_graph(12, 0.3, 4, 2, 5);
    let arch = CmgnnArch {
        layers: 1,
        hidden: 6,
        dropout: 0.0,
        fuse: CmgnnFuse::Last,
        ..CmgnnArch::default()
    };
    let f = fixture(g, arch, 5);
    let (t, out) = eval(
        &f,
        &CmgnnOptions {
            forced_alpha: Some([0.0, 1.0, 0.0]),
        },
    );
    let w = |name: &str| f.store.value(f.store.id(name).unwrap()).clone();
    let a_hat = f.g.row_normalized_adjacency().to_dense();
    let z0 = f.g.features().dot(&w("input.w"));
    let z1 = relu(&(a_hat.dot(&z0).dot(&w("layer0.ch1.w")) + &w("layer0.b")));
    let h = relu(&(z1.dot(&w("cla.0.w")) + &w("cla.0.b")));
    let logits = h.dot(&w("cla.1.w")) + &w("cla.1.b");
    assert!(max_diff(t.value(out.logits), &logits) <= 1e-12);
}

#[test]
fn adaptive_alpha_rows_are_distributions() {
    let g = labeled_graph(20, 0.2, 4, 3, 6);
    let f = fixture(
        g,
        CmgnnArch {
            hidden: 8,
            ..CmgnnArch::default()
        },
        6,
    );
    let (t, out) = eval(&f, &CmgnnOptions::default());
    assert_eq!(out.alphas.len(), 2);
    for &a in &out.alphas {
        assert_eq!(t.shape(a), (20, 3));
        for row in t.value(a).outer_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v > 0.0));
        }
    }
}

#[test]
fn fused_width_is_layers_plus_one_times_hidden() {
    for layers in [1, 2, 4] {
        let g = labeled_graph(10, 0.3, 3, 2, 7);
        let f = fixture(
            g,
            CmgnnArch {
                layers,
                hidden: 5,
                ..CmgnnArch::default()
            },
            7,
        );
        let (t, out) = eval(&f, &CmgnnOptions::default());
        assert_eq!(t.shape(out.z), (10, (layers + 1) * 5));
        assert_eq!(t.shape(out.z_ptt), (2, (layers + 1) * 5));
        assert_eq!(f.model.fused_width(), (layers + 1) * 5);
    }
}

#[test]
fn guidance_shape_is_checked() {
    let g = labeled_graph(10, 0.3, 3, 2, 8);
    let mut f = fixture(g, CmgnnArch::default(), 8);
    f.guidance.b_sup = Array2::zeros((9, 2));
    let mut t = Tape::eval();
    let mut r = rng::seeded(0, 0);
    assert!(f
        .model
        .forward(
            &mut t,
            &f.store,
            &f.inputs,
            &f.guidance,
            &mut r,
            &CmgnnOptions::default()
        )
        .is_err());
}

#[test]
fn forward_is_node_permutation_equivariant() {
    let g = labeled_graph(25, 0.2, 4, 3, 9);
    let arch = CmgnnArch {
        hidden: 6,
        dropout: 0.0,
        structure_info: false,
        ..CmgnnArch::default()
    };
    let f = fixture(g, arch, 9);
    let (t, out) = eval(&f, &CmgnnOptions::default());
    let perm = permutation(25, 4);
    let pg = f.g.permute_nodes(&perm).unwrap();
    let pinputs = CmgnnInputs::new(&pg, f.inputs.prototypes.clone(), false).unwrap();
    let pguid = Guidance {
        m_hat: f.guidance.m_hat.clone(),
        b_sup: f.guidance.b_sup.select(ndarray::Axis(0), &perm),
    };
    let mut t2 = Tape::eval();
    let mut r = rng::seeded(0, 0);
    let out2 = f
        .model
        .forward(
            &mut t2,
            &f.store,
            &pinputs,
            &pguid,
            &mut r,
            &CmgnnOptions::default(),
        )
        .unwrap();
    let want = t.value(out.logits).select(ndarray::Axis(0), &perm);
    assert!(max_diff(t2.value(out2.logits), &want) <= 1e-12);
    assert!(max_diff(t2.value(out2.z_ptt), t.value(out.z_ptt)) <= 1e-12);
}

fn dis(m: Array2<f64>, z: Array2<f64>) -> f64 {
    let mut t = Tape::eval();
    let z = t.constant(z).unwrap();
    let l = discrimination_loss(&mut t, &m, z).unwrap();
    t.scalar(l).unwrap()
}

#[test]
fn discrimination_loss_examples() {
    assert_eq!(dis(Array2::eye(3), Array2::eye(3)), 0.0);
    let same = Array2::from_elem((4, 4), 0.25);
    let l = dis(same, random_matrix(4, 5, 3));
    assert!((l - 12.0).abs() < 1e-12);

    // desired messages (0.8, 0.6) and (0.2, 0.9)
    let m = array![[0.8, 0.2], [0.2, 0.8]];
    let z = array![[1.0, 0.0], [0.0, 1.0]];
    let (a, b): ([f64; 2], [f64; 2]) = ([0.8, 0.2], [0.2, 0.8]);
    let cos = (a[0] * b[0] + a[1] * b[1])
        / (a[0] * a[0] + a[1] * a[1]).sqrt()
        / (b[0] * b[0] + b[1] * b[1]).sqrt();
    assert!((dis(m, z) - 2.0 * cos).abs() < 1e-12);

    let zero_row = array![[0.0, 0.0], [1.0, 2.0]];
    assert_eq!(dis(Array2::eye(2), zero_row), 0.0);
}

fn toy8() -> (Graph, Split) {
    let edges = [
        (0, 1),
        (1, 2),
        (2, 3),
        (3, 0),
        (4, 5),
        (5, 6),
        (6, 7),
        (0, 4),
        (2, 6),
        (1, 7),
    ];
    let labels = vec![
        Some(0),
        Some(1),
        Some(0),
        Some(1),
        Some(1),
        Some(0),
        Some(1),
        Some(0),
    ];
    let g =
        Graph::from_edges("toy8", 8, &edges, random_matrix(8, 3, 21), labels, 2, false).unwrap();
    let split = Split {
        train: vec![0, 1, 4, 5],
        valid: vec![2, 6],
        test: vec![3, 7],
        seed: 0,
    };
    (g, split)
}

#[test]
fn full_loss_gradients_match_finite_differences() {
    let (g, split) = toy8();
    for structure_info in [false, true] {
        let cfg = CmgnnConfig {
            hidden: 4,
            dropout: 0.0,
            lambda: 0.7,
            structure_info,
            ..CmgnnConfig::default()
        };
        let mut store = ParamStore::new();
        let t = CmgnnTrainable::new(&g, &split, &cfg, &mut store, 3).unwrap();
        let targets: Vec<(usize, usize)> = split
            .train
            .iter()
            .map(|&i| (i, g.label(i).unwrap()))
            .collect();
        let report = grad_check(
            &store,
            |tape, store| -> crate::Result<Var> {
                let mut r = rng::seeded(0, 0);
                let pass = crate::train::Trainable::forward(&t, tape, store, &mut r)?;
                let ce = tape.cross_entropy(pass.logits, &targets)?;
                tape.add(ce, pass.extra_loss.unwrap())
            },
            GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        assert_eq!(report.entries_checked, store.n_scalars());
    }
}

#[test]
fn gradient_check_refuses_dropout() {
    let (g, split) = toy8();
    let cfg = CmgnnConfig {
        hidden: 4,
        dropout: 0.5,
        ..CmgnnConfig::default()
    };
    let mut store = ParamStore::new();
    let t = CmgnnTrainable::new(&g, &split, &cfg, &mut store, 3).unwrap();
    let res = grad_check(
        &store,
        |tape, store| {
            let mut r = rng::seeded(0, 0);
            let pass = crate::train::Trainable::forward(&t, tape, store, &mut r)?;
            tape.sum(pass.logits)
        },
        GradCheckConfig::default(),
    );
    assert!(res.is_err());
}

#[test]
fn total_loss_adds_weighted_discrimination() {
    let (g, split) = toy8();
    let extra = |lambda: f64| {
        let cfg = CmgnnConfig {
            hidden: 4,
            dropout: 0.0,
            lambda,
            ..CmgnnConfig::default()
        };
        let mut store = ParamStore::new();
        let t = CmgnnTrainable::new(&g, &split, &cfg, &mut store, 3).unwrap();
        let mut tape = Tape::new(true);
        let mut r = rng::seeded(0, 0);
        let pass = crate::train::Trainable::forward(&t, &mut tape, &store, &mut r).unwrap();
        let extra = tape.scalar(pass.extra_loss.unwrap()).unwrap();

        let mut tape = Tape::new(true);
        let out = t
            .model
            .forward(
                &mut tape,
                &store,
                &t.inputs,
                &t.guidance,
                &mut r,
                &t.options,
            )
            .unwrap();
        let dis = discrimination_loss(&mut tape, &t.guidance.m_hat, out.z_ptt).unwrap();
        (extra, tape.scalar(dis).unwrap())
    };
    assert_eq!(extra(0.0).0, 0.0);
    let (e1, dis) = extra(1.0);
    assert!(dis > 0.0);
    assert_eq!(e1, dis);
}

#[test]
fn lambda_zero_matches_without_dl_bitwise() {
    let g = labeled_graph(60, 0.1, 5, 3, 12);
    let split = generate_splits(&g, 1, 12).unwrap().remove(0);
    let base = CmgnnConfig {
        hidden: 8,
        lambda: 0.0,
        patience: 15,
        max_epochs: 60,
        ..CmgnnConfig::default()
    };
    let a = train_cmgnn(&g, &split, 0, &base, 5).unwrap();
    let b = train_cmgnn(
        &g,
        &split,
        0,
        &CmgnnConfig {
            ablation: Ablation::WithoutDl,
            ..base
        },
        5,
    )
    .unwrap();
    assert!(a.loss_curve.len() > 1);
    assert_eq!(
        a.loss_curve.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.loss_curve.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(a.test_accuracy, b.test_accuracy);
}

#[test]
fn frozen_lr_stops_after_patience() {
    let g = labeled_graph(40, 0.15, 4, 2, 13);
    let split = generate_splits(&g, 1, 13).unwrap().remove(0);
    let cfg = CmgnnConfig {
        hidden: 8,
        lr: 0.0,
        patience: 5,
        ..CmgnnConfig::default()
    };
    let r = train_cmgnn(&g, &split, 0, &cfg, 1).unwrap();
    assert_eq!(r.best_epoch, 0);
    assert_eq!(r.epochs_run, 6);
}

#[test]
fn runs_are_deterministic() {
    let g = labeled_graph(50, 0.12, 4, 3, 14);
    let split = generate_splits(&g, 1, 14).unwrap().remove(0);
    let cfg = CmgnnConfig {
        hidden: 8,
        patience: 10,
        max_epochs: 50,
        ..CmgnnConfig::default()
    };
    let a = train_cmgnn(&g, &split, 0, &cfg, 2).unwrap();
    let b = train_cmgnn(&g, &split, 0, &cfg, 2).unwrap();
    assert_eq!(a.test_accuracy, b.test_accuracy);
    assert_eq!(a.estimate.m_hat, b.estimate.m_hat);
    assert_eq!(a.loss_curve, b.loss_curve);
    let json = serde_json::to_string(&a).unwrap();
    let back: RunResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back.estimate, a.estimate);
}

#[test]
fn refresh_reimposes_training_labels() {
    let (g, split) = toy8();
    let cfg = CmgnnConfig {
        hidden: 4,
        dropout: 0.0,
        ..CmgnnConfig::default()
    };
    let mut store = ParamStore::new();
    let mut t = CmgnnTrainable::new(&g, &split, &cfg, &mut store, 0).unwrap();
    // logits that predict class 1 everywhere with high confidence
    let logits = Array2::from_shape_fn((8, 2), |(_, j)| if j == 1 { 5.0 } else { 0.0 });
    assert!(t.refresh(3, &logits).unwrap());
    assert_eq!(t.estimate.epoch, Some(3));
    let mut soft = crate::tensor::softmax_rows(&logits);
    impose_training_labels(&mut soft, g.labels(), &split.train).unwrap();
    let want = estimate_cm(&g, soft.view(), DegreeWeighting::Thresholded).unwrap();
    assert_eq!(t.estimate.m_hat, want.m_hat);
    assert!(max_diff(&t.guidance.b_sup, &soft.dot(&want.m_hat.to_array())) < 1e-15);

    // uniform logits give zero confidence off the training set; training rows still count
    assert!(t.refresh(4, &Array2::zeros((8, 2))).unwrap());
    let iso = Graph::from_edges(
        "iso",
        8,
        &[],
        g.features().clone(),
        g.labels().to_vec(),
        2,
        false,
    )
    .unwrap();
    let mut isolated = CmgnnTrainable::new(&iso, &split, &cfg, &mut ParamStore::new(), 0).unwrap();
    assert_eq!(
        isolated.estimate.m_hat,
        crate::graph::CompatibilityMatrix::identity(2)
    );
    assert!(!isolated.refresh(5, &Array2::zeros((8, 2))).unwrap());
    assert_eq!(isolated.failed_refreshes.len(), 1);
}

#[test]
fn negative_lambda_is_a_config_error() {
    let (g, split) = toy8();
    let cfg = CmgnnConfig {
        lambda: -1.0,
        ..CmgnnConfig::default()
    };
    assert!(matches!(
        train_cmgnn(&g, &split, 0, &cfg, 0),
        Err(crate::Error::Config(_))
    ));
}

/// Two-block graph with compatibility `[[0.9, 0.1], [0.1, 0.9]]` and weakly informative features.
fn two_block_graph(n: usize, seed: u64) -> Graph {
    let mut r = rng::derived(seed, 77, 0);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let by_class: Vec<Vec<usize>> = (0..2)
        .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for _ in 0..5 {
            let c = if r.gen_bool(0.9) {
                labels[i]
            } else {
                1 - labels[i]
            };
            let j = by_class[c][r.gen_range(0..by_class[c].len())];
            if j != i {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let x = Array2::from_shape_fn((n, 8), |(i, _)| {
        r.gen_range(-1.0..1.0) + if labels[i] == 0 { 0.15 } else { -0.15 }
    });
    Graph::from_edges(
        "sbm",
        n,
        &edges,
        x,
        labels.into_iter().map(Some).collect(),
        2,
        false,
    )
    .unwrap()
}

#[test]
fn two_block_graph_is_learned() {
    let g = two_block_graph(200, 1);
    let split = generate_splits(&g, 1, 1).unwrap().remove(0);
    // neighbourhood-majority oracle
    let labels = g.dense_labels().unwrap();
    let hits = split
        .test
        .iter()
        .filter(|&&i| {
            let ones = g.neighbors(i).iter().filter(|&&j| labels[j] == 1).count();
            let zeros = g.neighbors(i).len() - ones;
            (if ones > zeros { 1 } else { 0 }) == labels[i]
        })
        .count();
    assert!(hits as f64 / split.test.len() as f64 >= 0.95);

    let cfg = CmgnnConfig {
        hidden: 16,
        dropout: 0.0,
        patience: 200,
        max_epochs: 200,
        ..CmgnnConfig::default()
    };
    let r = train_cmgnn(&g, &split, 0, &cfg, 0).unwrap();
    assert!(
        r.test_accuracy >= 0.95,
        "{} {:?} {:?}",
        r.test_accuracy,
        r.val_curve,
        r.loss_curve
    );
    assert!(r.epochs_run <= 200);
    assert!(!r.refresh_epochs.is_empty());
    assert!(r.estimate.m_hat.diagonal_mean() > 0.7);
}

#[test]
fn trainer_fit_matches_train_cmgnn() {
    let g = labeled_graph(40, 0.15, 4, 2, 15);
    let split = generate_splits(&g, 1, 15).unwrap().remove(0);
    let cfg = CmgnnConfig {
        hidden: 8,
        patience: 5,
        max_epochs: 30,
        ..CmgnnConfig::default()
    };
    let mut store = ParamStore::new();
    let mut t = CmgnnTrainable::new(&g, &split, &cfg, &mut store, 4).unwrap();
    let rep = fit(
        &mut t,
        &mut store,
        g.labels(),
        &split,
        &cfg.train_config(),
        4,
    )
    .unwrap();
    let run = train_cmgnn(&g, &split, 0, &cfg, 4).unwrap();
    assert_eq!(rep.loss_curve, run.loss_curve);
}
