//! Decision trees: exact-split classification trees for the forest and
//! histogram regression trees for boosting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

/// Flat tree; node 0 is the root. Samples with `x[feature] <= threshold` go
/// left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

pub struct ClassTreeParams {
    pub classes: usize,
    pub max_depth: Option<usize>,
    pub max_features: usize,
    pub min_samples_split: usize,
}

struct Pending {
    node: usize,
    samples: Vec<usize>,
    depth: usize,
}

/// Grow a gini classification tree on `samples` (indices may repeat, as in a
/// bootstrap). At each node features are visited in random order until
/// `max_features` non-constant ones have been scored.
pub fn grow_classifier<R: Rng>(
    x: &Matrix,
    y: &[usize],
    samples: Vec<usize>,
    p: &ClassTreeParams,
    rng: &mut R,
) -> Tree {
    let mut nodes = vec![Node::Leaf { value: Vec::new() }];
    let mut stack = vec![Pending {
        node: 0,
        samples,
        depth: 0,
    }];
    let mut features: Vec<usize> = (0..x.cols).collect();
    let mut pairs: Vec<(f64, usize)> = Vec::new();

    while let Some(Pending {
        node,
        samples,
        depth,
    }) = stack.pop()
    {
        let counts = class_counts(y, &samples, p.classes);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = p.max_depth.is_some_and(|m| depth >= m);
        let split = if pure || depth_capped || samples.len() < p.min_samples_split {
            None
        } else {
            best_class_split(x, y, &samples, &counts, p, &mut features, &mut pairs, rng)
        };
        match split {
            None => {
                let n = samples.len() as f64;
                nodes[node] = Node::Leaf {
                    value: counts.iter().map(|&c| c as f64 / n).collect(),
                };
            }
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = samples
                    .iter()
                    .partition(|&&i| x.get(i, feature) <= threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes[node] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right: left + 1,
                };
                stack.push(Pending {
                    node: left + 1,
                    samples: r,
                    depth: depth + 1,
                });
                stack.push(Pending {
                    node: left,
                    samples: l,
                    depth: depth + 1,
                });
            }
        }
    }
    Tree { nodes }
}

fn class_counts(y: &[usize], samples: &[usize], classes: usize) -> Vec<usize> {
    let mut c = vec![0; classes];
    for &i in samples {
        c[y[i]] += 1;
    }
    c
}

#[allow(clippy::too_many_arguments)]
fn best_class_split<R: Rng>(
    x: &Matrix,
    y: &[usize],
    samples: &[usize],
    counts: &[usize],
    p: &ClassTreeParams,
    features: &mut [usize],
    pairs: &mut Vec<(f64, usize)>,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let n = samples.len();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut scored = 0;
    let d = features.len();

    for f in 0..d {
        if scored >= p.max_features {
            break;
        }
        let j = rng.gen_range(f..d);
        features.swap(f, j);
        let feature = features[f];

        pairs.clear();
        pairs.extend(samples.iter().map(|&i| (x.get(i, feature), y[i])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[n - 1].0 {
            continue;
        }
        scored += 1;

        // maximize sum_c L_c^2 / n_L + sum_c R_c^2 / n_R, which minimizes the
        // weighted gini impurity of the children
        let mut left = vec![0usize; p.classes];
        let mut right = counts.to_vec();
        let mut sq_l = 0.0;
        let mut sq_r: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
        for k in 0..n - 1 {
            let c = pairs[k].1;
            sq_l += (2 * left[c] + 1) as f64;
            sq_r -= (2 * right[c] - 1) as f64;
            left[c] += 1;
            right[c] -= 1;
            if pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let nl = (k + 1) as f64;
            let score = sq_l / nl + sq_r / (n as f64 - nl);
            if best.is_none_or(|b| score > b.0) {
                best = Some((score, feature, midpoint(pairs[k].0, pairs[k + 1].0)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Per-feature quantile bins. Bin `b` holds values in `(edges[b-1], edges[b]]`.
#[derive(Debug, Clone)]
pub struct Binned {
    pub rows: usize,
    /// Column-major bin indices.
    pub bins: Vec<u16>,
    pub edges: Vec<Vec<f64>>,
}

impl Binned {
    pub fn new(x: &Matrix, max_bins: usize) -> Self {
        let n = x.rows;
        let mut bins = vec![0u16; n * x.cols];
        let mut edges = Vec::with_capacity(x.cols);
        let mut col: Vec<f64> = Vec::with_capacity(n);
        for j in 0..x.cols {
            col.clear();
            col.extend((0..n).map(|i| x.get(i, j)));
            let mut sorted = col.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            sorted.dedup();
            let e: Vec<f64> = if sorted.len() <= max_bins {
                sorted
            } else {
                let mut e: Vec<f64> = (1..=max_bins)
                    .map(|q| sorted[(q * sorted.len()) / max_bins - 1])
                    .collect();
                e.dedup();
                e
            };
            for (i, &v) in col.iter().enumerate() {
                bins[j * n + i] = e.partition_point(|&edge| edge < v) as u16;
            }
            edges.push(e);
        }
        Self {
            rows: n,
            bins,
            edges,
        }
    }

    #[inline]
    fn column(&self, j: usize) -> &[u16] {
        &self.bins[j * self.rows..(j + 1) * self.rows]
    }
}

/// Least-squares regression tree on binned features, grown level by level to
/// `max_depth`. Leaves hold `scale * mean(target)`.
pub fn grow_regressor(
    data: &Binned,
    target: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
    scale: f64,
) -> Tree {
    let mut nodes = vec![Node::Leaf { value: Vec::new() }];
    let mut frontier = vec![(0usize, (0..data.rows).collect::<Vec<usize>>())];
    let max_bins = data.edges.iter().map(Vec::len).max().unwrap_or(1);
    let mut sum = vec![0.0; max_bins];
    let mut cnt = vec![0usize; max_bins];

    for depth in 0..=max_depth {
        let mut next = Vec::new();
        for (node, samples) in frontier {
            let total: f64 = samples.iter().map(|&i| target[i]).sum();
            let n = samples.len();
            let mut best: Option<(f64, usize, usize)> = None;
            if depth < max_depth && n >= 2 * min_samples_leaf {
                let parent = total * total / n as f64;
                for (j, e) in data.edges.iter().enumerate() {
                    if e.len() < 2 {
                        continue;
                    }
                    let col = data.column(j);
                    sum[..e.len()].iter_mut().for_each(|s| *s = 0.0);
                    cnt[..e.len()].iter_mut().for_each(|c| *c = 0);
                    for &i in &samples {
                        let b = col[i] as usize;
                        sum[b] += target[i];
                        cnt[b] += 1;
                    }
                    let (mut sl, mut nl) = (0.0, 0usize);
                    for b in 0..e.len() - 1 {
                        sl += sum[b];
                        nl += cnt[b];
                        if cnt[b] == 0 || nl < min_samples_leaf {
                            continue;
                        }
                        let nr = n - nl;
                        if nr < min_samples_leaf {
                            break;
                        }
                        let sr = total - sl;
                        let score = sl * sl / nl as f64 + sr * sr / nr as f64;
                        if score > parent + 1e-12 && best.is_none_or(|bst| score > bst.0) {
                            best = Some((score, j, b));
                        }
                    }
                }
            }
            match best {
                None => {
                    let mean = if n == 0 { 0.0 } else { total / n as f64 };
                    nodes[node] = Node::Leaf {
                        value: vec![scale * mean],
                    };
                }
                Some((_, feature, b)) => {
                    let col = data.column(feature);
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        samples.iter().partition(|&&i| col[i] as usize <= b);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: Vec::new() });
                    nodes.push(Node::Leaf { value: Vec::new() });
                    nodes[node] = Node::Split {
                        feature,
                        threshold: data.edges[feature][b],
                        left,
                        right: left + 1,
                    };
                    next.push((left, l));
                    next.push((left + 1, r));
                }
            }
        }
        frontier = next;
    }
    Tree { nodes }
}
