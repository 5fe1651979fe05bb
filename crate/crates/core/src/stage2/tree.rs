//! Binary decision trees on numeric features, grown greedily over
//! presorted sample lists.
//!
//! Splits are `x[feature] <= threshold` with thresholds at midpoints between
//! consecutive distinct values. Among equal gains the lowest feature index
//! and then the lowest threshold win.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Smallest gain accepted as a real improvement.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; all when `None`.
    pub max_features: Option<usize>,
}

impl TreeConfig {
    pub fn with_depth(max_depth: usize) -> Self {
        TreeConfig {
            max_depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

/// How node statistics are scored. Gain is `score(left) + score(right) -
/// score(parent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Weighted Gini impurity decrease; statistics are per-class weights.
    Gini { classes: usize },
    /// Second-order statistics `(G, H)`; score `G^2 / (H + lambda)`, leaf
    /// value `-G / (H + lambda)`. With `h = 1` and `lambda = 0` this is the
    /// squared-error criterion on `-g`.
    SecondOrder { lambda: f64, min_child_weight: f64 },
}

impl Objective {
    fn width(&self) -> usize {
        match *self {
            Objective::Gini { classes } => classes + 1,
            Objective::SecondOrder { .. } => 3,
        }
    }

    fn count(&self, s: &[f64]) -> f64 {
        s[s.len() - 1]
    }

    fn score(&self, s: &[f64]) -> f64 {
        match *self {
            Objective::Gini { classes } => {
                let w: f64 = s[..classes].iter().sum();
                if w <= 0.0 {
                    0.0
                } else {
                    s[..classes].iter().map(|v| v * v).sum::<f64>() / w
                }
            }
            Objective::SecondOrder { lambda, .. } => {
                let d = s[1] + lambda;
                if d <= 0.0 {
                    0.0
                } else {
                    s[0] * s[0] / d
                }
            }
        }
    }

    fn admissible(&self, s: &[f64], min_leaf: usize) -> bool {
        if self.count(s) < min_leaf as f64 {
            return false;
        }
        match *self {
            Objective::Gini { .. } => true,
            Objective::SecondOrder { min_child_weight, .. } => s[1] >= min_child_weight,
        }
    }

    fn leaf(&self, s: &[f64]) -> Vec<f64> {
        match *self {
            Objective::Gini { classes } => {
                let w: f64 = s[..classes].iter().sum();
                if w <= 0.0 {
                    vec![1.0 / classes as f64; classes]
                } else {
                    s[..classes].iter().map(|v| v / w).collect()
                }
            }
            Objective::SecondOrder { lambda, .. } => {
                let d = s[1] + lambda;
                vec![if d <= 0.0 { 0.0 } else { -s[0] / d }]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Index of the leaf node reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Replaces the value stored at leaf `index`.
    pub(crate) fn set_leaf(&mut self, index: usize, value: Vec<f64>) {
        if let Node::Leaf { value: v } = &mut self.nodes[index] {
            *v = value;
        }
    }

    /// Grows a tree. `stats[i]` is sample `i`'s contribution to node
    /// statistics (layout fixed by `objective`); samples not in `active` are
    /// ignored. `rng` is required when `config.max_features` is set.
    pub fn fit<R: Rng>(
        x: &[Vec<f64>],
        stats: &[Vec<f64>],
        active: &[usize],
        objective: Objective,
        config: &TreeConfig,
        mut rng: Option<&mut R>,
    ) -> Tree {
        let features = x.first().map_or(0, Vec::len);
        let width = objective.width();
        let sorted: Vec<Vec<usize>> = (0..features)
            .map(|f| {
                let mut idx = active.to_vec();
                idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut nodes = Vec::new();
        // (node slot, depth, per-feature sorted members)
        let mut stack = vec![(0usize, 0usize, sorted)];
        nodes.push(Node::Leaf { value: Vec::new() });
        let mut in_left = vec![false; x.len()];

        while let Some((slot, depth, lists)) = stack.pop() {
            let members: &[usize] = if features > 0 { &lists[0] } else { active };
            let mut total = vec![0.0; width];
            for &i in members {
                add(&mut total, &stats[i]);
            }
            let parent_score = objective.score(&total);

            let mut best: Option<(f64, usize, f64, usize)> = None; // gain, feature, threshold, left size
            let can_split =
                depth < config.max_depth && members.len() >= config.min_samples_split.max(2) && features > 0;
            if can_split {
                let candidates: Vec<usize> = match (config.max_features, rng.as_deref_mut()) {
                    (Some(k), Some(r)) if k < features => {
                        let mut c = sample(r, features, k.max(1)).into_vec();
                        c.sort_unstable();
                        c
                    }
                    _ => (0..features).collect(),
                };
                let mut left = vec![0.0; width];
                let mut right = vec![0.0; width];
                for &f in &candidates {
                    let list = &lists[f];
                    left.iter_mut().for_each(|v| *v = 0.0);
                    for j in 0..list.len() - 1 {
                        add(&mut left, &stats[list[j]]);
                        let (a, b) = (x[list[j]][f], x[list[j + 1]][f]);
                        if a == b {
                            continue;
                        }
                        for k in 0..width {
                            right[k] = total[k] - left[k];
                        }
                        if !objective.admissible(&left, config.min_samples_leaf)
                            || !objective.admissible(&right, config.min_samples_leaf)
                        {
                            continue;
                        }
                        let gain = objective.score(&left) + objective.score(&right) - parent_score;
                        if gain > best.map_or(MIN_GAIN, |b| b.0) {
                            best = Some((gain, f, a + (b - a) / 2.0, j + 1));
                        }
                    }
                }
            }

            match best {
                None => nodes[slot] = Node::Leaf { value: objective.leaf(&total) },
                Some((_, feature, threshold, left_size)) => {
                    for (pos, &i) in lists[feature].iter().enumerate() {
                        in_left[i] = pos < left_size;
                    }
                    let (mut l_lists, mut r_lists) = (Vec::with_capacity(features), Vec::with_capacity(features));
                    for list in &lists {
                        let (l, r): (Vec<usize>, Vec<usize>) = list.iter().partition(|&&i| in_left[i]);
                        l_lists.push(l);
                        r_lists.push(r);
                    }
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { value: Vec::new() });
                    nodes.push(Node::Leaf { value: Vec::new() });
                    nodes[slot] = Node::Split {
                        feature,
                        threshold,
                        left: l,
                        right: r,
                    };
                    stack.push((r, depth + 1, r_lists));
                    stack.push((l, depth + 1, l_lists));
                }
            }
        }
        Tree { nodes }
    }
}

fn add(acc: &mut [f64], s: &[f64]) {
    for (a, v) in acc.iter_mut().zip(s) {
        *a += v;
    }
}

/// Per-sample Gini statistics: weight in the class slot plus a count of one
/// for positively weighted samples.
pub fn gini_stats(y: &[usize], weights: &[f64], classes: usize) -> Vec<Vec<f64>> {
    y.iter()
        .zip(weights)
        .map(|(&c, &w)| {
            let mut s = vec![0.0; classes + 1];
            s[c] = w;
            s[classes] = if w > 0.0 { 1.0 } else { 0.0 };
            s
        })
        .collect()
}

pub fn second_order_stats(g: &[f64], h: &[f64]) -> Vec<Vec<f64>> {
    g.iter().zip(h).map(|(&g, &h)| vec![g, h, 1.0]).collect()
}
