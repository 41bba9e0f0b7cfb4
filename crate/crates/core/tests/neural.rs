use hatebench::corpus::Label;
use hatebench::neural::{
    bptt_train, cell_forward, CellKind, CellParams, CellState, RnnConfig, RnnModel, TokenIndex,
};
use hatebench::rng;
use hatebench::textprep::TokenSequence;
use rand::seq::SliceRandom;
use rand::Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn random_params(kind: CellKind, e: usize, h: usize, seed: u64) -> CellParams {
    let mut r = rng::seeded(seed);
    let mut p = CellParams::zeros(kind, e, h);
    for v in p.w.iter_mut().chain(p.u.iter_mut()).chain(p.b.iter_mut()) {
        *v = r.gen_range(-1.0..1.0);
    }
    p
}

/// Pre-activation of gate block `g`, unit `k`, with `hin` fed to the recurrent weights.
fn pre(p: &CellParams, g: usize, k: usize, x: &[f64], hin: &[f64]) -> f64 {
    let row = g * p.hidden + k;
    let mut s = p.b[row];
    for j in 0..p.input {
        s += p.w[row * p.input + j] * x[j];
    }
    for j in 0..p.hidden {
        s += p.u[row * p.hidden + j] * hin[j];
    }
    s
}

fn oracle_step(p: &CellParams, x: &[f64], st: &CellState) -> CellState {
    let h = p.hidden;
    match p.kind {
        CellKind::Gru => {
            let z: Vec<f64> = (0..h).map(|k| sig(pre(p, 0, k, x, &st.h))).collect();
            let r: Vec<f64> = (0..h).map(|k| sig(pre(p, 1, k, x, &st.h))).collect();
            let rh: Vec<f64> = (0..h).map(|k| r[k] * st.h[k]).collect();
            let n: Vec<f64> = (0..h).map(|k| pre(p, 2, k, x, &rh).tanh()).collect();
            CellState {
                h: (0..h)
                    .map(|k| z[k] * st.h[k] + (1.0 - z[k]) * n[k])
                    .collect(),
                c: vec![0.0; h],
            }
        }
        CellKind::Lstm => {
            let gate = |g: usize, k: usize| pre(p, g, k, x, &st.h);
            let c: Vec<f64> = (0..h)
                .map(|k| sig(gate(1, k)) * st.c[k] + sig(gate(0, k)) * gate(2, k).tanh())
                .collect();
            CellState {
                h: (0..h).map(|k| sig(gate(3, k)) * c[k].tanh()).collect(),
                c,
            }
        }
    }
}

#[test]
fn cell_forward_matches_oracle() {
    for kind in [CellKind::Gru, CellKind::Lstm] {
        for seed in 0..10 {
            let (e, h) = (3, 4);
            let p = random_params(kind, e, h, seed);
            let mut r = rng::seeded(seed + 100);
            let x: Vec<f64> = (0..e).map(|_| r.gen_range(-2.0..2.0)).collect();
            let mut st = CellState::zeros(h);
            if kind == CellKind::Lstm {
                st.c = (0..h).map(|_| r.gen_range(-1.0..1.0)).collect();
            }
            st.h = (0..h).map(|_| r.gen_range(-1.0..1.0)).collect();
            // Two chained steps.
            let got = cell_forward(&p, &x, &cell_forward(&p, &x, &st).unwrap()).unwrap();
            let want = oracle_step(&p, &x, &oracle_step(&p, &x, &st));
            for (a, b) in got.h.iter().zip(&want.h).chain(got.c.iter().zip(&want.c)) {
                assert!((a - b).abs() < 1e-12, "{kind:?} seed {seed}: {a} vs {b}");
            }
        }
    }
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn small_model(kind: CellKind, seed: u64, hidden: usize) -> RnnModel {
    let index = TokenIndex::from_tokens(toks("a b c d e f"));
    let cfg = RnnConfig {
        hidden,
        embed_dim: 3,
        max_len: 4,
        seed,
        trainable_embeddings: Some(true),
        ..RnnConfig::new(kind)
    };
    let mut m = RnnModel::new(index, None, &cfg).unwrap();
    // Nonzero biases so their gradients are exercised too; the leading zeros
    // are the pad and unknown embedding rows, which stay zero.
    let mut r = rng::seeded(seed ^ 0xb1a5);
    for p in m.params.iter_mut().filter(|p| **p == 0.0).skip(2 * 3) {
        *p = r.gen_range(-0.3..0.3);
    }
    m
}

#[test]
fn bptt_gradient_matches_finite_differences() {
    for kind in [CellKind::Gru, CellKind::Lstm] {
        let m = small_model(kind, 5, 4);
        let docs = [toks("a b c"), toks("d zz f")];
        let refs: Vec<&[String]> = docs.iter().map(Vec::as_slice).collect();
        let batch = m.encode(&refs, &[Label::Hate, Label::NonHate]).unwrap();
        assert_eq!(batch.lengths, vec![3, 3]);
        let (_, grad) = m.loss_and_gradient(&batch).unwrap();
        let mut r = rng::seeded(77);
        let mut coords: Vec<usize> = (0..m.params.len()).collect();
        coords.shuffle(&mut r);
        coords.truncate(220);
        assert!(
            coords.len() >= 200,
            "{kind:?} has only {} parameters",
            m.params.len()
        );
        let eps = 1e-6;
        for &i in &coords {
            let (mut up, mut down) = (m.clone(), m.clone());
            up.params[i] += eps;
            down.params[i] -= eps;
            let n = (up.loss(&batch).unwrap() - down.loss(&batch).unwrap()) / (2.0 * eps);
            let a = grad[i];
            let ok = (a - n).abs() <= 1e-4 * a.abs().max(n.abs()) || (a - n).abs() < 1e-9;
            assert!(ok, "{kind:?} param {i}: analytic {a} numeric {n}");
        }
    }
}

#[test]
fn mirrored_model_on_reversed_sequences_agrees() {
    for kind in [CellKind::Gru, CellKind::Lstm] {
        let m = small_model(kind, 9, 5);
        let docs = [toks("a b c d"), toks("f e"), toks("c")];
        let rev: Vec<Vec<String>> = docs
            .iter()
            .map(|d| d.iter().rev().cloned().collect())
            .collect();
        let labels = [Label::Hate, Label::NonHate, Label::Hate];
        let fwd: Vec<&[String]> = docs.iter().map(Vec::as_slice).collect();
        let bwd: Vec<&[String]> = rev.iter().map(Vec::as_slice).collect();
        let p = m.predict_proba(&m.encode(&fwd, &labels).unwrap()).unwrap();
        let mirror = m.mirrored();
        let q = mirror
            .predict_proba(&mirror.encode(&bwd, &labels).unwrap())
            .unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12, "{kind:?}: {a} vs {b}");
        }
    }
}

/// Label is Hate iff the document contains `trigger`.
fn presence_task(n: usize, seed: u64) -> (Vec<Vec<String>>, Vec<Label>) {
    let mut r = rng::seeded(seed);
    let filler: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
    let mut docs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let len = r.gen_range(3..9);
        let mut d: Vec<String> = (0..len)
            .map(|_| filler[r.gen_range(0..filler.len())].clone())
            .collect();
        let hate = i % 2 == 0;
        if hate {
            let at = r.gen_range(0..d.len());
            d[at] = "trigger".into();
        }
        docs.push(d);
        labels.push(if hate { Label::Hate } else { Label::NonHate });
    }
    (docs, labels)
}

#[test]
fn token_presence_is_learnable() {
    let (docs, labels) = presence_task(500, 1);
    let (train_d, test_d) = docs.split_at(350);
    let (train_y, test_y) = labels.split_at(350);
    let seqs: Vec<TokenSequence> = train_d
        .iter()
        .enumerate()
        .map(|(i, t)| TokenSequence {
            doc_id: i.to_string(),
            tokens: t.clone(),
        })
        .collect();
    for kind in [CellKind::Gru, CellKind::Lstm] {
        let cfg = RnnConfig {
            hidden: 16,
            embed_dim: 16,
            epochs: 20,
            max_len: 10,
            seed: 3,
            ..RnnConfig::new(kind)
        };
        let model = RnnModel::new(TokenIndex::build(&seqs, 1), None, &cfg).unwrap();
        let refs: Vec<&[String]> = train_d.iter().map(Vec::as_slice).collect();
        let report = bptt_train(&model, &model.encode(&refs, train_y).unwrap()).unwrap();
        let test_refs: Vec<&[String]> = test_d.iter().map(Vec::as_slice).collect();
        let pred = report
            .model
            .predict(&report.model.encode(&test_refs, test_y).unwrap())
            .unwrap();
        let acc =
            pred.iter().zip(test_y).filter(|(a, b)| a == b).count() as f64 / test_y.len() as f64;
        assert!(acc >= 0.95, "{kind:?} test accuracy {acc}");
    }
}

#[test]
fn small_learning_rate_loss_does_not_increase() {
    // Regression check on this fixture, not a general property of SGD.
    let (docs, labels) = presence_task(120, 2);
    let seqs: Vec<TokenSequence> = docs
        .iter()
        .enumerate()
        .map(|(i, t)| TokenSequence {
            doc_id: i.to_string(),
            tokens: t.clone(),
        })
        .collect();
    let cfg = RnnConfig {
        hidden: 8,
        embed_dim: 8,
        epochs: 10,
        lr: 0.01,
        max_len: 10,
        seed: 4,
        ..RnnConfig::new(CellKind::Gru)
    };
    let model = RnnModel::new(TokenIndex::build(&seqs, 1), None, &cfg).unwrap();
    let refs: Vec<&[String]> = docs.iter().map(Vec::as_slice).collect();
    let report = bptt_train(&model, &model.encode(&refs, &labels).unwrap()).unwrap();
    assert_eq!(report.losses.len(), 11);
    for w in report.losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "loss went up: {:?}", report.losses);
    }
}
