use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_data, check_width, majority, Classifier};
use crate::corpus::Label;
use crate::matrix::DenseMatrix;
use crate::rng::StreamRng;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtConfig {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// A node becomes a leaf when the best split decreases weighted Gini
    /// impurity by less than this. With 0.0, zero-gain splits are still taken
    /// (needed for XOR-like interactions where no single split helps).
    pub min_impurity_decrease: f64,
}

impl Default for DtConfig {
    fn default() -> Self {
        DtConfig {
            max_depth: None,
            min_samples_split: 2,
            min_impurity_decrease: 0.0,
        }
    }
}

/// Nodes live in a flat arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: Label,
        /// `[nonhate, hate]` training rows routed here.
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtModel {
    pub width: usize,
    pub nodes: Vec<Node>,
}

impl DtModel {
    fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                leaf => return leaf,
            }
        }
    }

    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Index of the leaf each row lands in.
    pub fn apply(&self, x: &DenseMatrix) -> Result<Vec<usize>> {
        check_width(self.width, x)?;
        Ok(x.iter_rows()
            .map(|row| {
                let mut i = 0;
                while let Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } = &self.nodes[i]
                {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                i
            })
            .collect())
    }
}

impl Classifier for DtModel {
    fn width(&self) -> usize {
        self.width
    }

    fn predict_proba(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        check_width(self.width, x)?;
        Ok(x.iter_rows()
            .map(|r| match self.leaf_for(r) {
                Node::Leaf { counts, .. } => {
                    counts[1] as f64 / (counts[0] + counts[1]).max(1) as f64
                }
                Node::Split { .. } => unreachable!(),
            })
            .collect())
    }

    fn predict(&self, x: &DenseMatrix) -> Result<Vec<Label>> {
        check_width(self.width, x)?;
        Ok(x.iter_rows()
            .map(|r| match self.leaf_for(r) {
                Node::Leaf { class, .. } => *class,
                Node::Split { .. } => unreachable!(),
            })
            .collect())
    }
}

pub fn dt_fit(x: &DenseMatrix, y: &[Label], cfg: &DtConfig) -> Result<DtModel> {
    check_training_data(x, y, 1)?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(grow(x, y, rows, cfg, None))
}

/// Per-split feature sampling used by the forest.
pub(crate) struct FeatureSampler<'a> {
    pub rng: &'a mut StreamRng,
    pub k: usize,
}

pub(crate) fn grow(
    x: &DenseMatrix,
    y: &[Label],
    rows: Vec<usize>,
    cfg: &DtConfig,
    mut sampler: Option<FeatureSampler>,
) -> DtModel {
    let mut nodes = Vec::new();
    let mut scratch = Vec::with_capacity(rows.len());
    // (node slot, rows, depth)
    let mut stack = vec![(0usize, rows, 0usize)];
    nodes.push(Node::Leaf {
        class: Label::NonHate,
        counts: [0, 0],
    });
    while let Some((slot, rows, depth)) = stack.pop() {
        let hate = rows.iter().filter(|&&r| y[r].is_hate()).count();
        let counts = [rows.len() - hate, hate];
        let leaf = Node::Leaf {
            class: majority(hate, counts[0]),
            counts,
        };
        let pure = hate == 0 || hate == rows.len();
        if pure || rows.len() < cfg.min_samples_split || cfg.max_depth.is_some_and(|d| depth >= d) {
            nodes[slot] = leaf;
            continue;
        }
        let best = best_split(x, y, &rows, counts, sampler.as_mut(), &mut scratch);
        let Some(best) = best else {
            nodes[slot] = leaf;
            continue;
        };
        if best.decrease(counts) < cfg.min_impurity_decrease {
            nodes[slot] = leaf;
            continue;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| x.get(i, best.feature) <= best.threshold);
        let left = nodes.len();
        let right = left + 1;
        for _ in 0..2 {
            nodes.push(Node::Leaf {
                class: Label::NonHate,
                counts: [0, 0],
            });
        }
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        // Right first so the left subtree is numbered first.
        stack.push((right, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    DtModel {
        width: x.cols(),
        nodes,
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    /// Σ over children of (hate² + nonhate²) / size, kept as an exact fraction.
    num: u128,
    den: u128,
}

impl Candidate {
    fn new(feature: usize, threshold: f64, l: [usize; 2], r: [usize; 2]) -> Self {
        let (nl, nr) = ((l[0] + l[1]) as u128, (r[0] + r[1]) as u128);
        let sq = |c: [usize; 2]| (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
        Candidate {
            feature,
            threshold,
            num: sq(l) * nr + sq(r) * nl,
            den: nl * nr,
        }
    }

    /// Greater is better: higher purity score, then lower feature, then lower threshold.
    fn cmp_quality(&self, other: &Candidate) -> Ordering {
        (self.num * other.den)
            .cmp(&(other.num * self.den))
            .then_with(|| other.feature.cmp(&self.feature))
            .then_with(|| other.threshold.total_cmp(&self.threshold))
    }

    /// Weighted Gini decrease relative to the parent.
    fn decrease(&self, parent: [usize; 2]) -> f64 {
        let n = (parent[0] + parent[1]) as f64;
        let parent_score = ((parent[0] as f64).powi(2) + (parent[1] as f64).powi(2)) / n;
        ((self.num as f64 / self.den as f64) - parent_score) / n
    }
}

fn best_split(
    x: &DenseMatrix,
    y: &[Label],
    rows: &[usize],
    counts: [usize; 2],
    sampler: Option<&mut FeatureSampler>,
    scratch: &mut Vec<(f64, bool)>,
) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    let mut consider = |f: usize, best: &mut Option<Candidate>| -> bool {
        match best_threshold(x, y, rows, counts, f, scratch) {
            Some(c) => {
                if best.is_none_or(|b| c.cmp_quality(&b) == Ordering::Greater) {
                    *best = Some(c);
                }
                true
            }
            None => false,
        }
    };
    match sampler {
        None => {
            for f in 0..x.cols() {
                consider(f, &mut best);
            }
        }
        Some(s) => {
            // Draw features without replacement until k non-constant ones were seen.
            let mut order: Vec<usize> = (0..x.cols()).collect();
            let mut seen = 0;
            for i in 0..order.len() {
                let j = s.rng.gen_range(i..order.len());
                order.swap(i, j);
                if consider(order[i], &mut best) {
                    seen += 1;
                    if seen >= s.k {
                        break;
                    }
                }
            }
        }
    }
    best
}

/// Best midpoint threshold on one feature, or `None` if the feature is constant on `rows`.
fn best_threshold(
    x: &DenseMatrix,
    y: &[Label],
    rows: &[usize],
    counts: [usize; 2],
    f: usize,
    scratch: &mut Vec<(f64, bool)>,
) -> Option<Candidate> {
    scratch.clear();
    scratch.extend(rows.iter().map(|&r| (x.get(r, f), y[r].is_hate())));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    if scratch[0].0 == scratch[scratch.len() - 1].0 {
        return None;
    }
    let mut best: Option<Candidate> = None;
    let mut left = [0usize; 2];
    for i in 0..scratch.len() - 1 {
        left[scratch[i].1 as usize] += 1;
        let (v, next) = (scratch[i].0, scratch[i + 1].0);
        if v == next {
            continue;
        }
        let mut t = v + (next - v) / 2.0;
        if t >= next {
            t = v;
        }
        let right = [counts[0] - left[0], counts[1] - left[1]];
        let c = Candidate::new(f, t, left, right);
        // Thresholds ascend, so only strictly better candidates replace.
        if best.is_none_or(|b| c.cmp_quality(&b) == Ordering::Greater) {
            best = Some(c);
        }
    }
    best
}
