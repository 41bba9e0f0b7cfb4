//! Bidirectional GRU / LSTM sequence classifiers trained with BPTT.
//!
//! All parameters of a model live in one flat vector (embedding table, forward
//! cell, backward cell, dense head), which keeps momentum, clipping,
//! checkpoints and finite-difference checks uniform.
//!
//! Gate equations, with σ the logistic function:
//!
//! - GRU: `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
//!   `n = tanh(W_n x + U_n (r ⊙ h) + b_n)`, `h' = z ⊙ h + (1 − z) ⊙ n`.
//! - LSTM: blocks `i, f, g, o` with `i, f, o = σ(·)`, `g = tanh(·)`, `c' = f ⊙ c + i ⊙ g`,
//!   `h' = o ⊙ tanh(c')`.
//!
//! Gate blocks are stacked row-wise in `W`, `U`, `b` in the order above.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::embeddings::{sigmoid, EmbeddingTable};
use crate::textprep::TokenSequence;
use crate::{rng, Error, Result};

pub const PAD_ID: usize = 0;
pub const OOV_ID: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Gru,
    Lstm,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    /// Row label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            CellKind::Gru => "Bi-GRU",
            CellKind::Lstm => "Bi-LSTM",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gru" | "bigru" | "bi-gru" => Ok(CellKind::Gru),
            "lstm" | "bilstm" | "bi-lstm" => Ok(CellKind::Lstm),
            other => Err(Error::invalid(format!(
                "unknown cell kind {other:?} (gru, lstm)"
            ))),
        }
    }
}

/// Token → id map. Ids 0 and 1 are reserved for padding and unknown tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenIndex {
    tokens: Vec<String>,
    #[serde(skip)]
    map: HashMap<String, usize>,
}

impl TokenIndex {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let map = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 2))
            .collect();
        TokenIndex { tokens, map }
    }

    /// Tokens seen at least `min_count` times, ordered by descending count then text.
    pub fn build(corpus: &[TokenSequence], min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for d in corpus {
            for t in &d.tokens {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut v: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_tokens(v.into_iter().map(|(t, _)| t.to_string()).collect())
    }

    pub fn id(&self, token: &str) -> usize {
        self.map.get(token).copied().unwrap_or(OOV_ID)
    }

    /// Vocabulary size including the two reserved ids.
    pub fn size(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Truncate to `max_len`, map unknown tokens to [`OOV_ID`], right-pad with [`PAD_ID`].
pub fn pad_and_index(tokens: &[String], index: &TokenIndex, max_len: usize) -> (Vec<usize>, usize) {
    let len = tokens.len().min(max_len);
    let mut ids = vec![PAD_ID; max_len];
    for (slot, t) in ids.iter_mut().zip(tokens) {
        *slot = index.id(t);
    }
    (ids, len)
}

/// Row-major padded id matrix with per-row lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub max_len: usize,
    pub ids: Vec<usize>,
    pub lengths: Vec<usize>,
    pub labels: Vec<Label>,
}

impl SequenceBatch {
    pub fn encode(
        docs: &[&[String]],
        labels: &[Label],
        index: &TokenIndex,
        max_len: usize,
    ) -> Result<Self> {
        if docs.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                actual: labels.len(),
            });
        }
        if max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        let mut ids = Vec::with_capacity(docs.len() * max_len);
        let mut lengths = Vec::with_capacity(docs.len());
        for d in docs {
            let (row, len) = pad_and_index(d, index, max_len);
            ids.extend(row);
            lengths.push(len);
        }
        Ok(SequenceBatch {
            max_len,
            ids,
            lengths,
            labels: labels.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.ids[i * self.max_len..i * self.max_len + self.lengths[i]]
    }

    pub fn select(&self, rows: &[usize]) -> SequenceBatch {
        let mut ids = Vec::with_capacity(rows.len() * self.max_len);
        for &r in rows {
            ids.extend_from_slice(&self.ids[r * self.max_len..(r + 1) * self.max_len]);
        }
        SequenceBatch {
            max_len: self.max_len,
            ids,
            lengths: rows.iter().map(|&r| self.lengths[r]).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

/// Recurrent state; `c` is unused (kept at zero) for GRU cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        CellState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// One cell's weights: `w` is (gates·hidden × input), `u` is (gates·hidden × hidden).
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub kind: CellKind,
    pub input: usize,
    pub hidden: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl CellParams {
    pub fn zeros(kind: CellKind, input: usize, hidden: usize) -> Self {
        let g = kind.gates() * hidden;
        CellParams {
            kind,
            input,
            hidden,
            w: vec![0.0; g * input],
            u: vec![0.0; g * hidden],
            b: vec![0.0; g],
        }
    }
}

pub fn cell_forward(params: &CellParams, x: &[f64], state: &CellState) -> Result<CellState> {
    let (e, h) = (params.input, params.hidden);
    let g = params.kind.gates() * h;
    for (expected, actual) in [
        (e, x.len()),
        (h, state.h.len()),
        (h, state.c.len()),
        (g * e, params.w.len()),
        (g * h, params.u.len()),
        (g, params.b.len()),
    ] {
        if expected != actual {
            return Err(Error::DimensionMismatch { expected, actual });
        }
    }
    let cell = Cell {
        kind: params.kind,
        e,
        h,
        w: &params.w,
        u: &params.u,
        b: &params.b,
    };
    let s = cell.step(x, &state.h, &state.c);
    Ok(CellState { h: s.h, c: s.c })
}

fn matvec_add(m: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// out += mᵀ·y
fn matvec_t_add(m: &[f64], cols: usize, y: &[f64], out: &mut [f64]) {
    for (yi, row) in y.iter().zip(m.chunks_exact(cols)) {
        if *yi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += yi * a;
        }
    }
}

/// m += y·xᵀ
fn outer_add(m: &mut [f64], cols: usize, y: &[f64], x: &[f64]) {
    for (yi, row) in y.iter().zip(m.chunks_exact_mut(cols)) {
        if *yi == 0.0 {
            continue;
        }
        for (a, xv) in row.iter_mut().zip(x) {
            *a += yi * xv;
        }
    }
}

struct Cell<'a> {
    kind: CellKind,
    e: usize,
    h: usize,
    w: &'a [f64],
    u: &'a [f64],
    b: &'a [f64],
}

/// Activated gates and resulting state of one step.
struct Step {
    gates: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
}

impl Cell<'_> {
    fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Step {
        let h = self.h;
        let mut pre = self.b.to_vec();
        matvec_add(self.w, self.e, x, &mut pre);
        match self.kind {
            CellKind::Gru => {
                matvec_add(&self.u[..2 * h * h], h, h_prev, &mut pre[..2 * h]);
                for v in &mut pre[..2 * h] {
                    *v = sigmoid(*v);
                }
                let rh: Vec<f64> = pre[h..2 * h]
                    .iter()
                    .zip(h_prev)
                    .map(|(r, hp)| r * hp)
                    .collect();
                matvec_add(&self.u[2 * h * h..], h, &rh, &mut pre[2 * h..]);
                for v in &mut pre[2 * h..] {
                    *v = v.tanh();
                }
                let (z, n) = (&pre[..h], &pre[2 * h..]);
                let hn = (0..h)
                    .map(|k| z[k] * h_prev[k] + (1.0 - z[k]) * n[k])
                    .collect();
                Step {
                    gates: pre,
                    h: hn,
                    c: vec![0.0; h],
                }
            }
            CellKind::Lstm => {
                matvec_add(self.u, h, h_prev, &mut pre);
                for (k, v) in pre.iter_mut().enumerate() {
                    *v = if (2 * h..3 * h).contains(&k) {
                        v.tanh()
                    } else {
                        sigmoid(*v)
                    };
                }
                let (i, f, g, o) = (&pre[..h], &pre[h..2 * h], &pre[2 * h..3 * h], &pre[3 * h..]);
                let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
                let hn = (0..h).map(|k| o[k] * c[k].tanh()).collect();
                Step {
                    gates: pre,
                    h: hn,
                    c,
                }
            }
        }
    }

    /// Backward through one step. Accumulates weight gradients, writes the
    /// input gradient to `dx`, and returns the gradients w.r.t. `(h_prev, c_prev)`.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        s: &Step,
        dh: &[f64],
        dc_next: &[f64],
        gw: &mut [f64],
        gu: &mut [f64],
        gb: &mut [f64],
        dx: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let h = self.h;
        let mut dpre = vec![0.0; self.kind.gates() * h];
        let mut dh_prev = vec![0.0; h];
        let mut dc_prev = vec![0.0; h];
        match self.kind {
            CellKind::Gru => {
                let (z, r, n) = (&s.gates[..h], &s.gates[h..2 * h], &s.gates[2 * h..]);
                for k in 0..h {
                    let dz = dh[k] * (h_prev[k] - n[k]);
                    let dn = dh[k] * (1.0 - z[k]);
                    dh_prev[k] = dh[k] * z[k];
                    dpre[k] = dz * z[k] * (1.0 - z[k]);
                    dpre[2 * h + k] = dn * (1.0 - n[k] * n[k]);
                }
                let mut drh = vec![0.0; h];
                matvec_t_add(&self.u[2 * h * h..], h, &dpre[2 * h..], &mut drh);
                for k in 0..h {
                    dpre[h + k] = drh[k] * h_prev[k] * r[k] * (1.0 - r[k]);
                    dh_prev[k] += drh[k] * r[k];
                }
                let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
                outer_add(&mut gu[..2 * h * h], h, &dpre[..2 * h], h_prev);
                outer_add(&mut gu[2 * h * h..], h, &dpre[2 * h..], &rh);
                matvec_t_add(&self.u[..2 * h * h], h, &dpre[..2 * h], &mut dh_prev);
            }
            CellKind::Lstm => {
                let (i, f, g, o) = (
                    &s.gates[..h],
                    &s.gates[h..2 * h],
                    &s.gates[2 * h..3 * h],
                    &s.gates[3 * h..],
                );
                for k in 0..h {
                    let tc = s.c[k].tanh();
                    let dc = dc_next[k] + dh[k] * o[k] * (1.0 - tc * tc);
                    dpre[k] = dc * g[k] * i[k] * (1.0 - i[k]);
                    dpre[h + k] = dc * c_prev[k] * f[k] * (1.0 - f[k]);
                    dpre[2 * h + k] = dc * i[k] * (1.0 - g[k] * g[k]);
                    dpre[3 * h + k] = dh[k] * tc * o[k] * (1.0 - o[k]);
                    dc_prev[k] = dc * f[k];
                }
                outer_add(gu, h, &dpre, h_prev);
                matvec_t_add(self.u, h, &dpre, &mut dh_prev);
            }
        }
        outer_add(gw, self.e, &dpre, x);
        for (a, d) in gb.iter_mut().zip(&dpre) {
            *a += d;
        }
        matvec_t_add(self.w, self.e, &dpre, dx);
        (dh_prev, dc_prev)
    }
}

/// Offsets of each parameter block in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub kind: CellKind,
    pub vocab: usize,
    pub embed_dim: usize,
    pub hidden: usize,
}

impl Layout {
    pub fn embedding(&self) -> Range<usize> {
        0..self.vocab * self.embed_dim
    }

    fn cell_len(&self) -> usize {
        let g = self.kind.gates() * self.hidden;
        g * self.embed_dim + g * self.hidden + g
    }

    /// `(w, u, b)` ranges of the forward (`backward == false`) or backward cell.
    pub fn cell(&self, backward: bool) -> (Range<usize>, Range<usize>, Range<usize>) {
        let g = self.kind.gates() * self.hidden;
        let start = self.embedding().end + if backward { self.cell_len() } else { 0 };
        let w = start..start + g * self.embed_dim;
        let u = w.end..w.end + g * self.hidden;
        let b = u.end..u.end + g;
        (w, u, b)
    }

    pub fn head_weights(&self) -> Range<usize> {
        let start = self.embedding().end + 2 * self.cell_len();
        start..start + 2 * self.hidden
    }

    pub fn head_bias(&self) -> usize {
        self.head_weights().end
    }

    pub fn total(&self) -> usize {
        self.head_bias() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub kind: CellKind,
    pub hidden: usize,
    pub max_len: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Global gradient-norm clipping threshold.
    pub clip: f64,
    pub seed: u64,
    /// Embedding width when no pretrained table is given.
    pub embed_dim: usize,
    /// `None`: frozen with a pretrained table, trainable otherwise.
    pub trainable_embeddings: Option<bool>,
}

impl RnnConfig {
    pub fn new(kind: CellKind) -> Self {
        RnnConfig {
            kind,
            hidden: 64,
            max_len: 50,
            batch_size: 32,
            lr: 0.05,
            momentum: 0.9,
            epochs: 10,
            clip: 5.0,
            seed: 0,
            embed_dim: 50,
            trainable_embeddings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    pub layout: Layout,
    pub index: TokenIndex,
    pub params: Vec<f64>,
    pub trainable_embeddings: bool,
    pub config: RnnConfig,
}

/// Forward caches of one direction over one row.
struct DirTrace {
    steps: Vec<Step>,
}

impl RnnModel {
    /// Fresh model. Recurrent and head weights are U[-1/√hidden, 1/√hidden],
    /// biases zero. Embedding rows come from `pretrained` when the token is in
    /// the table, otherwise U[-0.1, 0.1]; the pad and unknown rows are zero.
    pub fn new(
        index: TokenIndex,
        pretrained: Option<&EmbeddingTable>,
        cfg: &RnnConfig,
    ) -> Result<Self> {
        if cfg.hidden == 0 || cfg.max_len == 0 || cfg.batch_size == 0 {
            return Err(Error::invalid(
                "hidden, max_len and batch_size must be positive",
            ));
        }
        let embed_dim = pretrained.map_or(cfg.embed_dim, |t| t.dim());
        if embed_dim == 0 {
            return Err(Error::invalid("embedding width must be positive"));
        }
        let layout = Layout {
            kind: cfg.kind,
            vocab: index.size(),
            embed_dim,
            hidden: cfg.hidden,
        };
        let mut params = vec![0.0; layout.total()];
        let mut r = rng::substream(cfg.seed, 0);
        let bound = 1.0 / (cfg.hidden as f64).sqrt();
        for backward in [false, true] {
            let (w, u, _) = layout.cell(backward);
            rng::fill_uniform(&mut r, &mut params[w], bound);
            rng::fill_uniform(&mut r, &mut params[u], bound);
        }
        rng::fill_uniform(
            &mut r,
            &mut params[layout.head_weights()],
            1.0 / (2.0 * cfg.hidden as f64).sqrt(),
        );
        for (i, tok) in index.tokens().iter().enumerate() {
            let row = &mut params[(i + 2) * embed_dim..(i + 3) * embed_dim];
            match pretrained.and_then(|t| t.get(tok)) {
                Some(v) => row.copy_from_slice(v),
                None => rng::fill_uniform(&mut r, row, 0.1),
            }
        }
        Ok(RnnModel {
            layout,
            index,
            params,
            trainable_embeddings: cfg.trainable_embeddings.unwrap_or(pretrained.is_none()),
            config: *cfg,
        })
    }

    fn cell(&self, backward: bool) -> Cell<'_> {
        let (w, u, b) = self.layout.cell(backward);
        Cell {
            kind: self.layout.kind,
            e: self.layout.embed_dim,
            h: self.layout.hidden,
            w: &self.params[w],
            u: &self.params[u],
            b: &self.params[b],
        }
    }

    fn embedding(&self, id: usize) -> &[f64] {
        let e = self.layout.embed_dim;
        &self.params[id * e..(id + 1) * e]
    }

    fn run(&self, ids: &[usize], backward: bool) -> DirTrace {
        let cell = self.cell(backward);
        let h = self.layout.hidden;
        let mut steps: Vec<Step> = Vec::with_capacity(ids.len());
        let order: Box<dyn Iterator<Item = &usize>> = if backward {
            Box::new(ids.iter().rev())
        } else {
            Box::new(ids.iter())
        };
        let zero = vec![0.0; h];
        for &id in order {
            let (hp, cp) = steps.last().map_or((&zero, &zero), |s| (&s.h, &s.c));
            let s = cell.step(self.embedding(id), hp, cp);
            steps.push(s);
        }
        DirTrace { steps }
    }

    fn final_h(trace: &DirTrace, h: usize) -> Vec<f64> {
        trace
            .steps
            .last()
            .map_or_else(|| vec![0.0; h], |s| s.h.clone())
    }

    fn head_logit(&self, hf: &[f64], hb: &[f64]) -> f64 {
        let hw = &self.params[self.layout.head_weights()];
        let h = self.layout.hidden;
        self.params[self.layout.head_bias()]
            + hw[..h].iter().zip(hf).map(|(a, b)| a * b).sum::<f64>()
            + hw[h..].iter().zip(hb).map(|(a, b)| a * b).sum::<f64>()
    }

    fn row_logit(&self, ids: &[usize]) -> f64 {
        let h = self.layout.hidden;
        let hf = Self::final_h(&self.run(ids, false), h);
        let hb = Self::final_h(&self.run(ids, true), h);
        self.head_logit(&hf, &hb)
    }

    fn check_ids(&self, batch: &SequenceBatch) -> Result<()> {
        if let Some(bad) = batch.ids.iter().find(|&&i| i >= self.layout.vocab) {
            return Err(Error::invalid(format!(
                "token id {bad} outside vocabulary of {}",
                self.layout.vocab
            )));
        }
        Ok(())
    }

    /// Per-row binary cross-entropy contribution and its full parameter gradient.
    fn row_gradient(&self, ids: &[usize], label: Label, scale: f64, grad: &mut [f64]) -> f64 {
        let h = self.layout.hidden;
        let e = self.layout.embed_dim;
        let fwd = self.run(ids, false);
        let bwd = self.run(ids, true);
        let hf = Self::final_h(&fwd, h);
        let hb = Self::final_h(&bwd, h);
        let logit = self.head_logit(&hf, &hb);
        let p = sigmoid(logit);
        let t = label.target();
        let loss = softplus(logit) - t * logit;
        let dlogit = (p - t) * scale;
        let hw_range = self.layout.head_weights();
        let hw: Vec<f64> = self.params[hw_range.clone()].to_vec();
        for k in 0..h {
            grad[hw_range.start + k] += dlogit * hf[k];
            grad[hw_range.start + h + k] += dlogit * hb[k];
        }
        grad[self.layout.head_bias()] += dlogit;
        let dhf: Vec<f64> = hw[..h].iter().map(|w| dlogit * w).collect();
        let dhb: Vec<f64> = hw[h..].iter().map(|w| dlogit * w).collect();

        let mut dx = vec![0.0; e];
        for (backward, trace, dfinal) in [(false, &fwd, dhf), (true, &bwd, dhb)] {
            let cell = self.cell(backward);
            let (wr, ur, br) = self.layout.cell(backward);
            let positions: Vec<usize> = if backward {
                (0..ids.len()).rev().collect()
            } else {
                (0..ids.len()).collect()
            };
            let mut dh = dfinal;
            let mut dc = vec![0.0; h];
            let zero = vec![0.0; h];
            // Split the gradient buffer so the three cell blocks and the embedding can be borrowed together.
            let (emb_part, rest) = grad.split_at_mut(wr.start);
            let (gw, rest) = rest.split_at_mut(wr.len());
            let (gu, rest) = rest.split_at_mut(ur.len());
            let gb = &mut rest[..br.len()];
            for step in (0..trace.steps.len()).rev() {
                let (hp, cp) = if step == 0 {
                    (&zero, &zero)
                } else {
                    (&trace.steps[step - 1].h, &trace.steps[step - 1].c)
                };
                let id = ids[positions[step]];
                dx.iter_mut().for_each(|v| *v = 0.0);
                let (dhp, dcp) = cell.backward(
                    self.embedding(id),
                    hp,
                    cp,
                    &trace.steps[step],
                    &dh,
                    &dc,
                    gw,
                    gu,
                    gb,
                    &mut dx,
                );
                if self.trainable_embeddings {
                    for (g, d) in emb_part[id * e..(id + 1) * e].iter_mut().zip(&dx) {
                        *g += d;
                    }
                }
                dh = dhp;
                dc = dcp;
            }
        }
        loss * scale
    }

    /// P(Hate) per row.
    pub fn predict_proba(&self, batch: &SequenceBatch) -> Result<Vec<f64>> {
        self.check_ids(batch)?;
        Ok((0..batch.len())
            .into_par_iter()
            .map(|i| sigmoid(self.row_logit(batch.row(i))))
            .collect())
    }

    /// Hate iff P(Hate) ≥ 0.5.
    pub fn predict(&self, batch: &SequenceBatch) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(batch)?
            .into_iter()
            .map(|p| {
                if p >= 0.5 {
                    Label::Hate
                } else {
                    Label::NonHate
                }
            })
            .collect())
    }

    /// Encode token sequences with this model's index and length cap.
    pub fn encode(&self, docs: &[&[String]], labels: &[Label]) -> Result<SequenceBatch> {
        SequenceBatch::encode(docs, labels, &self.index, self.config.max_len)
    }

    /// Mean binary cross-entropy over the batch and its gradient w.r.t. every
    /// parameter (embedding rows stay zero when embeddings are frozen).
    /// Rows are processed in parallel and summed in row order.
    pub fn loss_and_gradient(&self, batch: &SequenceBatch) -> Result<(f64, Vec<f64>)> {
        self.check_ids(batch)?;
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let scale = 1.0 / batch.len() as f64;
        let parts: Vec<(f64, Vec<f64>)> = (0..batch.len())
            .into_par_iter()
            .map(|i| {
                let mut g = vec![0.0; self.params.len()];
                let l = self.row_gradient(batch.row(i), batch.labels[i], scale, &mut g);
                (l, g)
            })
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((loss, grad))
    }

    pub fn loss(&self, batch: &SequenceBatch) -> Result<f64> {
        self.check_ids(batch)?;
        let logits: Vec<f64> = (0..batch.len())
            .into_par_iter()
            .map(|i| self.row_logit(batch.row(i)))
            .collect();
        Ok(logits
            .iter()
            .zip(&batch.labels)
            .map(|(s, l)| softplus(*s) - l.target() * s)
            .sum::<f64>()
            / batch.len() as f64)
    }

    /// Copy with the forward/backward cells and the two halves of the head swapped.
    pub fn mirrored(&self) -> RnnModel {
        let mut m = self.clone();
        let (fw, _, fb) = self.layout.cell(false);
        let (_, _, bb) = self.layout.cell(true);
        let cell = fb.end - fw.start;
        let bw_start = bb.end - cell;
        m.params[fw.start..fb.end].copy_from_slice(&self.params[bw_start..bb.end]);
        m.params[bw_start..bb.end].copy_from_slice(&self.params[fw.start..fb.end]);
        let hw = self.layout.head_weights();
        let h = self.layout.hidden;
        m.params[hw.start..hw.start + h].copy_from_slice(&self.params[hw.start + h..hw.end]);
        m.params[hw.start + h..hw.end].copy_from_slice(&self.params[hw.start..hw.start + h]);
        m
    }
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Result of [`bptt_train`]: the trained model and the full-training-set loss
/// before the first epoch and after each epoch.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: RnnModel,
    pub losses: Vec<f64>,
}

/// Mini-batch SGD with momentum (`v ← μ·v + g`, `θ ← θ − lr·v`) and global
/// norm clipping. Batch order is a seeded shuffle per epoch.
pub fn bptt_train(model: &RnnModel, data: &SequenceBatch) -> Result<TrainReport> {
    let cfg = model.config;
    let hate = data.labels.iter().filter(|l| l.is_hate()).count();
    if hate == 0 || hate == data.len() {
        return Err(Error::invalid("recurrent training needs both classes"));
    }
    let mut m = model.clone();
    let mut velocity = vec![0.0; m.params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut r = rng::substream(cfg.seed, 1);
    let mut losses = vec![m.loss(data)?];
    let emb = m.layout.embedding();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut r);
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = data.select(chunk);
            let (loss, mut grad) = m.loss_and_gradient(&batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}, batch {bi}"
                )));
            }
            if !m.trainable_embeddings {
                grad[emb.clone()].iter_mut().for_each(|g| *g = 0.0);
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.clip {
                let s = cfg.clip / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            for ((p, v), g) in m.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *p -= cfg.lr * *v;
            }
        }
        losses.push(m.loss(data)?);
    }
    Ok(TrainReport { model: m, losses })
}

pub const CHECKPOINT_MAGIC: &str = "hatebench-rnn v1";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    kind: CellKind,
    vocab: usize,
    embed_dim: usize,
    hidden: usize,
    n_params: usize,
    trainable_embeddings: bool,
    config: RnnConfig,
    tokens: Vec<String>,
}

impl RnnModel {
    /// Checkpoint: magic line, one JSON header line with dims and
    /// hyperparameters, then the flat parameter vector as little-endian f64.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = CheckpointHeader {
            kind: self.layout.kind,
            vocab: self.layout.vocab,
            embed_dim: self.layout.embed_dim,
            hidden: self.layout.hidden,
            n_params: self.params.len(),
            trainable_embeddings: self.trainable_embeddings,
            config: self.config,
            tokens: self.index.tokens().to_vec(),
        };
        let mut out = Vec::with_capacity(self.params.len() * 8 + 256);
        writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
        serde_json::to_writer(&mut out, &header)?;
        out.push(b'\n');
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rd = BufReader::new(f);
        let perr = |line, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut magic = String::new();
        rd.read_line(&mut magic).map_err(|e| Error::io(path, e))?;
        if magic.trim_end() != CHECKPOINT_MAGIC {
            return Err(perr(1, "not a recurrent model checkpoint".into()));
        }
        let mut header = String::new();
        rd.read_line(&mut header).map_err(|e| Error::io(path, e))?;
        let hd: CheckpointHeader =
            serde_json::from_str(&header).map_err(|e| perr(2, e.to_string()))?;
        let layout = Layout {
            kind: hd.kind,
            vocab: hd.vocab,
            embed_dim: hd.embed_dim,
            hidden: hd.hidden,
        };
        if hd.tokens.len() + 2 != hd.vocab {
            return Err(Error::DimensionMismatch {
                expected: hd.vocab,
                actual: hd.tokens.len() + 2,
            });
        }
        if hd.n_params != layout.total() {
            return Err(Error::DimensionMismatch {
                expected: layout.total(),
                actual: hd.n_params,
            });
        }
        let mut blob = Vec::new();
        rd.read_to_end(&mut blob).map_err(|e| Error::io(path, e))?;
        if blob.len() != hd.n_params * 8 {
            return Err(Error::DimensionMismatch {
                expected: hd.n_params * 8,
                actual: blob.len(),
            });
        }
        let params = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(RnnModel {
            layout,
            index: TokenIndex::from_tokens(hd.tokens),
            params,
            trainable_embeddings: hd.trainable_embeddings,
            config: hd.config,
        })
    }

    /// Load and require the given embedding width and hidden size.
    pub fn load_expecting(path: impl AsRef<Path>, embed_dim: usize, hidden: usize) -> Result<Self> {
        let m = Self::load(path)?;
        for (expected, actual) in [(embed_dim, m.layout.embed_dim), (hidden, m.layout.hidden)] {
            if expected != actual {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
        Ok(m)
    }
}
