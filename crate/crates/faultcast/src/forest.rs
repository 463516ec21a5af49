//! Fault classifiers: a from-scratch random forest (the default) and an
//! AdaBoost baseline over depth-1 stumps.
//!
//! Trees are grown greedily: at each node a sampled feature subset is
//! scanned, candidate thresholds are midpoints between consecutive distinct
//! sorted values, and the split with the largest Gini impurity decrease wins.
//! Ties go to the lowest feature index, then the lowest threshold, so a
//! refit with the same seed reproduces the same model byte for byte.
//! Zero-gain splits are accepted: on XOR-like data the root split buys
//! nothing by itself but enables pure grandchildren.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::rng::RngStream;
use crate::telemetry::{fmt_f64, FaultLabel};
use crate::{Error, Result};

const K: usize = FaultLabel::COUNT;

/// Per-tree growth limits.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features examined per node; `None` means ceil(sqrt(d)).
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 12,
            min_samples_split: 2,
            features_per_split: None,
        }
    }
}

/// Forest hyperparameters. `bootstrap: false` is a test hook that trains
/// every tree on the full sample instead of a resample.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: [u64; K],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub root: TreeNode,
}

impl DecisionTree {
    pub fn predict(&self, x: &ArrayView1<f64>) -> FaultLabel {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
                TreeNode::Leaf { counts } => return majority(counts),
            }
        }
    }
}

/// Majority class of a histogram; ties resolve to the lowest class code.
fn majority(counts: &[u64; K]) -> FaultLabel {
    let mut best = 0;
    for c in 1..K {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    FaultLabel::from_code(best as u8).expect("class code in range")
}

fn gini(counts: &[u64; K], total: f64) -> f64 {
    let mut acc = 0.0;
    for &c in counts {
        let p = c as f64 / total;
        acc += p * p;
    }
    1.0 - acc
}

fn histogram(labels: &[FaultLabel], indices: &[usize]) -> [u64; K] {
    let mut counts = [0u64; K];
    for &i in indices {
        counts[labels[i].code() as usize] += 1;
    }
    counts
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Scan the given features for the best Gini split over `indices`.
/// Candidate thresholds are midpoints between consecutive distinct sorted
/// values, nudged down to the lower value if rounding would put the midpoint
/// on top of the upper one (keeps both children non-empty).
fn best_split(
    data: &ArrayView2<f64>,
    labels: &[FaultLabel],
    indices: &[usize],
    features: &[usize],
    node_counts: &[u64; K],
) -> Option<BestSplit> {
    let n = indices.len();
    let n_f = n as f64;
    let parent = gini(node_counts, n_f);
    let mut best: Option<BestSplit> = None;

    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &f in features {
        pairs.clear();
        for &i in indices {
            pairs.push((data[[i, f]], labels[i].code()));
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

        let mut left = [0u64; K];
        let mut right = *node_counts;
        for w in 0..n - 1 {
            let c = pairs[w].1 as usize;
            left[c] += 1;
            right[c] -= 1;
            if pairs[w].0 < pairs[w + 1].0 {
                let mut thr = 0.5 * (pairs[w].0 + pairs[w + 1].0);
                if !(thr < pairs[w + 1].0) {
                    thr = pairs[w].0;
                }
                let nl = (w + 1) as f64;
                let nr = (n - w - 1) as f64;
                let gain = parent - (nl / n_f) * gini(&left, nl) - (nr / n_f) * gini(&right, nr);
                if best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold: thr,
                    });
                }
            }
        }
    }
    best
}

fn grow(
    data: &ArrayView2<f64>,
    labels: &[FaultLabel],
    indices: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut RngStream,
) -> TreeNode {
    let counts = histogram(labels, &indices);
    let n = indices.len();
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= params.max_depth || n < params.min_samples_split {
        return TreeNode::Leaf { counts };
    }

    let d = data.ncols();
    let n_features = params
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let features = rng.distinct_indices(d, n_features);

    let split = match best_split(data, labels, &indices, &features, &counts) {
        Some(s) => s,
        None => return TreeNode::Leaf { counts }, // all sampled features constant
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| data[[i, split.feature]] <= split.threshold);
    debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());

    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(data, labels, left_idx, depth + 1, params, rng)),
        right: Box::new(grow(data, labels, right_idx, depth + 1, params, rng)),
    }
}

/// Grow one tree on the full data with the supplied stream.
pub fn fit_tree(
    data: &ArrayView2<f64>,
    labels: &[FaultLabel],
    params: &TreeParams,
    rng: &mut RngStream,
) -> Result<DecisionTree> {
    if data.nrows() == 0 {
        return Err(Error::invalid("data", "no rows"));
    }
    if data.nrows() != labels.len() {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {} rows", labels.len(), data.nrows()),
        ));
    }
    let indices: Vec<usize> = (0..data.nrows()).collect();
    Ok(DecisionTree {
        root: grow(data, labels, indices, 0, params, rng),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
}

/// Train a forest; every tree gets its own stream derived from (seed, index)
/// so the result is independent of thread scheduling. Returns the model and
/// the out-of-bag accuracy (`None` when no sample was ever out of bag, e.g.
/// with bootstrapping disabled).
pub fn fit_forest(
    data: &ArrayView2<f64>,
    labels: &[FaultLabel],
    params: &ForestParams,
    seed: u64,
) -> Result<(ForestModel, Option<f64>)> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::invalid("data", format!("{n} rows; need at least 2")));
    }
    if n != labels.len() {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {n} rows", labels.len()),
        ));
    }
    let classes = labels
        .iter()
        .fold([false; K], |mut seen, l| {
            seen[l.code() as usize] = true;
            seen
        })
        .iter()
        .filter(|&&s| s)
        .count();
    if classes < 2 {
        return Err(Error::invalid(
            "labels",
            "single-class data; a forest needs at least two classes",
        ));
    }
    if params.n_trees == 0 {
        return Err(Error::invalid("n_trees", "must be at least 1"));
    }

    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        features_per_split: None,
    };

    let grown: Vec<(DecisionTree, Vec<(usize, u8)>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::derive(seed, "tree", t as u64);
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &i in &indices {
                in_bag[i] = true;
            }
            let tree = DecisionTree {
                root: grow(data, labels, indices, 0, &tree_params, &mut rng),
            };
            let oob: Vec<(usize, u8)> = if params.bootstrap {
                (0..n)
                    .filter(|&i| !in_bag[i])
                    .map(|i| (i, tree.predict(&data.row(i)).code()))
                    .collect()
            } else {
                Vec::new()
            };
            (tree, oob)
        })
        .collect();

    let mut votes = vec![[0u64; K]; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for (tree, oob) in grown {
        for (i, c) in oob {
            votes[i][c as usize] += 1;
        }
        trees.push(tree);
    }
    let mut covered = 0u64;
    let mut correct = 0u64;
    for (i, v) in votes.iter().enumerate() {
        if v.iter().sum::<u64>() > 0 {
            covered += 1;
            if majority(v) == labels[i] {
                correct += 1;
            }
        }
    }
    let oob_accuracy = (covered > 0).then(|| correct as f64 / covered as f64);

    Ok((
        ForestModel {
            trees,
            params: params.clone(),
            seed,
            n_features: data.ncols(),
        },
        oob_accuracy,
    ))
}

impl ForestModel {
    fn check_dim(&self, x: &ArrayView1<f64>) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::invalid(
                "x",
                format!("{} features, model expects {}", x.len(), self.n_features),
            ));
        }
        Ok(())
    }

    /// Majority vote across trees; ties resolve to the lowest class code.
    pub fn predict(&self, x: &ArrayView1<f64>) -> Result<FaultLabel> {
        self.check_dim(x)?;
        let mut votes = [0u64; K];
        for tree in &self.trees {
            votes[tree.predict(x).code() as usize] += 1;
        }
        Ok(majority(&votes))
    }

    /// Vote fractions per class.
    pub fn predict_proba(&self, x: &ArrayView1<f64>) -> Result<[f64; K]> {
        self.check_dim(x)?;
        let mut votes = [0u64; K];
        for tree in &self.trees {
            votes[tree.predict(x).code() as usize] += 1;
        }
        let total = self.trees.len() as f64;
        let mut proba = [0.0; K];
        for c in 0..K {
            proba[c] = votes[c] as f64 / total;
        }
        Ok(proba)
    }

    /// Row-parallel batch prediction, order-preserving.
    pub fn predict_rows(&self, rows: &ArrayView2<f64>) -> Result<Vec<FaultLabel>> {
        if rows.ncols() != self.n_features {
            return Err(Error::invalid(
                "rows",
                format!("{} features, model expects {}", rows.ncols(), self.n_features),
            ));
        }
        Ok((0..rows.nrows())
            .into_par_iter()
            .map(|i| self.predict(&rows.row(i)).expect("dim already checked"))
            .collect())
    }
}

fn write_node(w: &mut impl Write, node: &TreeNode, path: &Path) -> Result<()> {
    match node {
        TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(w, "I,{feature},{}", fmt_f64(*threshold)).map_err(|e| Error::io(path, e))?;
            write_node(w, left, path)?;
            write_node(w, right, path)
        }
        TreeNode::Leaf { counts } => {
            writeln!(w, "L,{},{},{},{}", counts[0], counts[1], counts[2], counts[3])
                .map_err(|e| Error::io(path, e))
        }
    }
}

/// Persist a forest: one header line, then each tree as a `tree,<idx>` marker
/// followed by its preorder node lines.
pub fn write_forest(path: &Path, model: &ForestModel) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "forest,n_trees={},max_depth={},min_samples_split={},bootstrap={},seed={},n_features={}",
        model.params.n_trees,
        model.params.max_depth,
        model.params.min_samples_split,
        model.params.bootstrap,
        model.seed,
        model.n_features,
    )
    .map_err(|e| Error::io(path, e))?;
    for (t, tree) in model.trees.iter().enumerate() {
        writeln!(w, "tree,{t}").map_err(|e| Error::io(path, e))?;
        write_node(&mut w, &tree.root, path)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_node<I>(lines: &mut I, path: &Path) -> Result<TreeNode>
where
    I: Iterator<Item = (usize, String)>,
{
    let (line_no, line) = lines.next().ok_or_else(|| Error::Model {
        path: path.into(),
        msg: "unexpected end of file inside a tree".into(),
    })?;
    let fmt_err = |msg: String| Error::Format {
        path: path.into(),
        line: line_no,
        msg,
    };
    let fields: Vec<&str> = line.split(',').collect();
    match fields[0] {
        "I" => {
            if fields.len() != 3 {
                return Err(fmt_err("internal node needs I,<feature>,<threshold>".into()));
            }
            let feature = fields[1]
                .parse::<usize>()
                .map_err(|e| fmt_err(format!("bad feature index: {e}")))?;
            let threshold = fields[2]
                .parse::<f64>()
                .map_err(|e| fmt_err(format!("bad threshold: {e}")))?;
            let left = Box::new(read_node(lines, path)?);
            let right = Box::new(read_node(lines, path)?);
            Ok(TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            })
        }
        "L" => {
            if fields.len() != 1 + K {
                return Err(fmt_err(format!("leaf needs L and {K} counts")));
            }
            let mut counts = [0u64; K];
            for c in 0..K {
                counts[c] = fields[1 + c]
                    .parse::<u64>()
                    .map_err(|e| fmt_err(format!("bad count: {e}")))?;
            }
            Ok(TreeNode::Leaf { counts })
        }
        other => Err(fmt_err(format!("unknown node tag {other:?}"))),
    }
}

/// Read a forest written by [`write_forest`].
pub fn read_forest(path: &Path) -> Result<ForestModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.expect("line read")))
        .peekable();

    let (line_no, header) = lines.next().ok_or_else(|| Error::Model {
        path: path.into(),
        msg: "empty file".into(),
    })?;
    let fmt_err = |line: usize, msg: String| Error::Format {
        path: path.into(),
        line,
        msg,
    };
    let mut fields = header.split(',');
    if fields.next() != Some("forest") {
        return Err(fmt_err(line_no, "expected forest header".into()));
    }
    let mut n_trees = None;
    let mut max_depth = None;
    let mut min_split = None;
    let mut bootstrap = None;
    let mut seed = None;
    let mut n_features = None;
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| fmt_err(line_no, format!("expected key=value, found {field:?}")))?;
        let parse_usize =
            |v: &str| v.parse::<usize>().map_err(|e| fmt_err(line_no, format!("{key}: {e}")));
        match key {
            "n_trees" => n_trees = Some(parse_usize(value)?),
            "max_depth" => max_depth = Some(parse_usize(value)?),
            "min_samples_split" => min_split = Some(parse_usize(value)?),
            "bootstrap" => {
                bootstrap = Some(value.parse::<bool>().map_err(|e| {
                    fmt_err(line_no, format!("bootstrap: {e}"))
                })?)
            }
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|e| {
                    fmt_err(line_no, format!("seed: {e}"))
                })?)
            }
            "n_features" => n_features = Some(parse_usize(value)?),
            other => return Err(fmt_err(line_no, format!("unknown header key {other:?}"))),
        }
    }
    let missing = |what: &str| Error::Model {
        path: path.into(),
        msg: format!("header missing {what}"),
    };
    let params = ForestParams {
        n_trees: n_trees.ok_or_else(|| missing("n_trees"))?,
        max_depth: max_depth.ok_or_else(|| missing("max_depth"))?,
        min_samples_split: min_split.ok_or_else(|| missing("min_samples_split"))?,
        bootstrap: bootstrap.ok_or_else(|| missing("bootstrap"))?,
    };
    let seed = seed.ok_or_else(|| missing("seed"))?;
    let n_features = n_features.ok_or_else(|| missing("n_features"))?;

    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let (line_no, marker) = lines.next().ok_or_else(|| Error::Model {
            path: path.into(),
            msg: format!("missing tree {t}"),
        })?;
        if marker != format!("tree,{t}") {
            return Err(fmt_err(line_no, format!("expected tree,{t}, found {marker:?}")));
        }
        trees.push(DecisionTree {
            root: read_node(&mut lines, path)?,
        });
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(fmt_err(line_no, "trailing content after final tree".into()));
    }
    Ok(ForestModel {
        trees,
        params,
        seed,
        n_features,
    })
}

// ---------------------------------------------------------------------------
// AdaBoost baseline: SAMME over depth-1 stumps.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: FaultLabel,
    pub right: FaultLabel,
}

impl Stump {
    pub fn predict(&self, x: &ArrayView1<f64>) -> FaultLabel {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostModel {
    pub stumps: Vec<Stump>,
    /// Per-stump vote weight, same order as `stumps`.
    pub alphas: Vec<f64>,
    pub n_features: usize,
}

/// Weighted error floor: a perfect stump gets a large finite weight instead
/// of an infinite one, and boosting stops afterwards.
const ERR_FLOOR: f64 = 1e-10;

/// SAMME learner weight for a K-class problem.
pub fn samme_alpha(err: f64, k: usize) -> f64 {
    let err = err.max(ERR_FLOOR);
    libm::log((1.0 - err) / err) + libm::log((k - 1) as f64)
}

/// Multiply misclassified weights up by exp(alpha), then renormalize to sum 1.
pub(crate) fn reweight(weights: &mut [f64], misclassified: &[bool], alpha: f64) {
    let boost = libm::exp(alpha);
    for (w, &miss) in weights.iter_mut().zip(misclassified) {
        if miss {
            *w *= boost;
        }
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// Best stump under sample weights: minimal weighted error, ties to the
/// lowest feature then lowest threshold. Leaf classes are the weighted
/// majority on each side (ties to the lowest class code).
fn best_stump(
    data: &ArrayView2<f64>,
    labels: &[FaultLabel],
    weights: &[f64],
) -> Option<(Stump, f64, Vec<bool>)> {
    let n = data.nrows();
    let d = data.ncols();
    let mut total = [0.0f64; K];
    for (i, &w) in weights.iter().enumerate() {
        total[labels[i].code() as usize] += w;
    }

    let mut best: Option<(f64, Stump)> = None;
    let mut pairs: Vec<(f64, u8, f64)> = Vec::with_capacity(n);
    for f in 0..d {
        pairs.clear();
        for i in 0..n {
            pairs.push((data[[i, f]], labels[i].code(), weights[i]));
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

        let mut left = [0.0f64; K];
        for w in 0..n - 1 {
            left[pairs[w].1 as usize] += pairs[w].2;
            if pairs[w].0 < pairs[w + 1].0 {
                let mut thr = 0.5 * (pairs[w].0 + pairs[w + 1].0);
                if !(thr < pairs[w + 1].0) {
                    thr = pairs[w].0;
                }
                let mut left_best = 0;
                let mut right_best = 0;
                for c in 1..K {
                    if left[c] > left[left_best] {
                        left_best = c;
                    }
                    if total[c] - left[c] > total[right_best] - left[right_best] {
                        right_best = c;
                    }
                }
                let correct = left[left_best] + (total[right_best] - left[right_best]);
                let err = 1.0 - correct;
                if best.as_ref().map_or(true, |(e, _)| err < *e) {
                    best = Some((
                        err,
                        Stump {
                            feature: f,
                            threshold: thr,
                            left: FaultLabel::from_code(left_best as u8).expect("class in range"),
                            right: FaultLabel::from_code(right_best as u8).expect("class in range"),
                        },
                    ));
                }
            }
        }
    }

    best.map(|(err, stump)| {
        let misclassified: Vec<bool> = (0..n)
            .map(|i| stump.predict(&data.row(i)) != labels[i])
            .collect();
        (stump, err.max(0.0), misclassified)
    })
}

/// Boost up to `n_rounds` stumps with SAMME weighting. Stops early on a
/// perfect stump or when no stump beats random K-class guessing.
pub fn fit_adaboost(
    data: &ArrayView2<f64>,
    labels: &[FaultLabel],
    n_rounds: usize,
) -> Result<AdaBoostModel> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::invalid("data", format!("{n} rows; need at least 2")));
    }
    if n != labels.len() {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {n} rows", labels.len()),
        ));
    }
    let classes = labels
        .iter()
        .fold([false; K], |mut seen, l| {
            seen[l.code() as usize] = true;
            seen
        })
        .iter()
        .filter(|&&s| s)
        .count();
    if classes < 2 {
        return Err(Error::invalid(
            "labels",
            "single-class data; boosting needs at least two classes",
        ));
    }
    if n_rounds == 0 {
        return Err(Error::invalid("n_rounds", "must be at least 1"));
    }

    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps = Vec::new();
    let mut alphas = Vec::new();
    for _ in 0..n_rounds {
        let (stump, err, misclassified) = match best_stump(data, labels, &weights) {
            Some(found) => found,
            None => break, // every feature constant: nothing left to fit
        };
        if err >= 1.0 - 1.0 / K as f64 {
            break; // no better than random guessing
        }
        let alpha = samme_alpha(err, K);
        stumps.push(stump);
        alphas.push(alpha);
        if err <= ERR_FLOOR {
            break; // perfect stump; further rounds would not change weights
        }
        reweight(&mut weights, &misclassified, alpha);
    }
    if stumps.is_empty() {
        return Err(Error::Training(
            "no stump beats random guessing on this data".into(),
        ));
    }
    Ok(AdaBoostModel {
        stumps,
        alphas,
        n_features: data.ncols(),
    })
}

/// Weighted vote across stumps; ties resolve to the lowest class code.
pub fn predict_adaboost(model: &AdaBoostModel, x: &ArrayView1<f64>) -> Result<FaultLabel> {
    if x.len() != model.n_features {
        return Err(Error::invalid(
            "x",
            format!("{} features, model expects {}", x.len(), model.n_features),
        ));
    }
    let mut scores = [0.0f64; K];
    for (stump, &alpha) in model.stumps.iter().zip(&model.alphas) {
        scores[stump.predict(x).code() as usize] += alpha;
    }
    let mut best = 0;
    for c in 1..K {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    Ok(FaultLabel::from_code(best as u8).expect("class in range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn labels_of(codes: &[u8]) -> Vec<FaultLabel> {
        codes
            .iter()
            .map(|&c| FaultLabel::from_code(c).unwrap())
            .collect()
    }

    /// Three well-separated Gaussian blobs, one per class 0..2.
    fn blobs(n_per: usize, seed: u64) -> (Array2<f64>, Vec<FaultLabel>) {
        let centers = [[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]];
        let mut rng = RngStream::derive(seed, "blobs", 0);
        let mut data = Array2::zeros((3 * n_per, 2));
        let mut labels = Vec::with_capacity(3 * n_per);
        for (c, center) in centers.iter().enumerate() {
            for i in 0..n_per {
                let row = c * n_per + i;
                data[[row, 0]] = center[0] + rng.normal();
                data[[row, 1]] = center[1] + rng.normal();
                labels.push(FaultLabel::from_code(c as u8).unwrap());
            }
        }
        (data, labels)
    }

    fn training_accuracy(tree: &DecisionTree, data: &Array2<f64>, labels: &[FaultLabel]) -> f64 {
        let correct = (0..data.nrows())
            .filter(|&i| tree.predict(&data.row(i)) == labels[i])
            .count();
        correct as f64 / data.nrows() as f64
    }

    #[test]
    fn gini_matches_direct_definition() {
        let mut rng = RngStream::derive(1, "gini", 0);
        for _ in 0..50 {
            let n = 1 + rng.below(40) as usize;
            let mut counts = [0u64; K];
            for _ in 0..n {
                counts[rng.below(K)] += 1;
            }
            let direct = {
                let mut acc = 1.0;
                for &c in &counts {
                    let p = c as f64 / n as f64;
                    acc -= p * p;
                }
                acc
            };
            assert!((gini(&counts, n as f64) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_data_yields_single_leaf() {
        let data = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let labels = labels_of(&[2, 2, 2]);
        let mut rng = RngStream::derive(2, "pure", 0);
        let tree = fit_tree(&data.view(), &labels, &TreeParams::default(), &mut rng).unwrap();
        match tree.root {
            TreeNode::Leaf { counts } => assert_eq!(counts, [0, 0, 3, 0]),
            other => panic!("expected leaf, got {other:?}"),
        }
        assert_eq!(tree.predict(&data.row(0)), FaultLabel::MemoryStress);
    }

    #[test]
    fn one_dimensional_split_lands_at_midpoint() {
        let data = array![[1.0], [2.0], [3.0], [4.0]];
        let labels = labels_of(&[0, 0, 1, 1]);
        let params = TreeParams {
            features_per_split: Some(1),
            ..TreeParams::default()
        };
        let mut rng = RngStream::derive(3, "mid", 0);
        let tree = fit_tree(&data.view(), &labels, &params, &mut rng).unwrap();
        match tree.root {
            TreeNode::Internal {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 2.5);
            }
            other => panic!("expected internal root, got {other:?}"),
        }
    }

    #[test]
    fn xor_needs_a_zero_gain_root_split() {
        let data = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let labels = labels_of(&[0, 1, 1, 0]);
        let params = TreeParams {
            max_depth: 2,
            features_per_split: Some(2),
            ..TreeParams::default()
        };
        let mut rng = RngStream::derive(4, "xor", 0);
        let tree = fit_tree(&data.view(), &labels, &params, &mut rng).unwrap();
        assert_eq!(training_accuracy(&tree, &data, &labels), 1.0);
    }

    #[test]
    fn ties_prefer_lowest_feature_and_threshold() {
        // Both features separate the classes identically; feature 0 must win.
        let data = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let labels = labels_of(&[0, 0, 1, 1]);
        let params = TreeParams {
            features_per_split: Some(2),
            ..TreeParams::default()
        };
        let mut rng = RngStream::derive(5, "tie", 0);
        let tree = fit_tree(&data.view(), &labels, &params, &mut rng).unwrap();
        match tree.root {
            TreeNode::Internal { feature, .. } => assert_eq!(feature, 0),
            other => panic!("expected internal root, got {other:?}"),
        }
    }

    #[test]
    fn single_tree_forest_without_bootstrap_equals_plain_tree() {
        let (data, labels) = blobs(30, 6);
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let (forest, oob) = fit_forest(&data.view(), &labels, &params, 99).unwrap();
        assert!(oob.is_none());
        let mut rng = RngStream::derive(99, "tree", 0);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            features_per_split: None,
        };
        let tree = fit_tree(&data.view(), &labels, &tree_params, &mut rng).unwrap();
        for i in 0..data.nrows() {
            assert_eq!(
                forest.predict(&data.row(i)).unwrap(),
                tree.predict(&data.row(i))
            );
        }
    }

    #[test]
    fn refit_with_same_seed_reproduces_identical_file() {
        let (data, labels) = blobs(20, 7);
        let params = ForestParams {
            n_trees: 8,
            ..ForestParams::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str| {
            let (model, _) = fit_forest(&data.view(), &labels, &params, 1234).unwrap();
            let path = dir.path().join(name);
            write_forest(&path, &model).unwrap();
            std::fs::read(&path).unwrap()
        };
        assert_eq!(write("a.txt"), write("b.txt"));
    }

    #[test]
    fn easy_blobs_reach_high_oob_accuracy() {
        // Separation is 5 sigma, so out-of-bag accuracy should be near 1.
        let (data, labels) = blobs(167, 8); // ~500 points
        let params = ForestParams {
            n_trees: 30,
            ..ForestParams::default()
        };
        let (_, oob) = fit_forest(&data.view(), &labels, &params, 42).unwrap();
        let oob = oob.expect("bootstrap leaves some rows out of bag");
        assert!(oob >= 0.95, "oob accuracy {oob}");
    }

    #[test]
    fn single_class_data_is_rejected() {
        let data = array![[1.0], [2.0], [3.0]];
        let labels = labels_of(&[1, 1, 1]);
        assert!(fit_forest(&data.view(), &labels, &ForestParams::default(), 1).is_err());
        assert!(fit_adaboost(&data.view(), &labels, 10).is_err());
    }

    #[test]
    fn vote_ties_break_to_lowest_class() {
        // Two trees vote CpuStress, two vote PacketLoss.
        let leaf = |c: usize| {
            let mut counts = [0u64; K];
            counts[c] = 1;
            DecisionTree {
                root: TreeNode::Leaf { counts },
            }
        };
        let model = ForestModel {
            trees: vec![leaf(1), leaf(3), leaf(1), leaf(3)],
            params: ForestParams {
                n_trees: 4,
                ..ForestParams::default()
            },
            seed: 0,
            n_features: 2,
        };
        let x = array![0.0, 0.0];
        assert_eq!(model.predict(&x.view()).unwrap(), FaultLabel::CpuStress);
        let proba = model.predict_proba(&x.view()).unwrap();
        assert_eq!(proba, [0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn probabilities_sum_to_one_and_ignore_tree_order() {
        let (data, labels) = blobs(25, 9);
        let params = ForestParams {
            n_trees: 15,
            ..ForestParams::default()
        };
        let (mut model, _) = fit_forest(&data.view(), &labels, &params, 5).unwrap();
        let mut rng = RngStream::derive(5, "probe", 0);
        for _ in 0..20 {
            let x = array![rng.uniform(-8.0, 8.0), rng.uniform(-3.0, 8.0)];
            let proba = model.predict_proba(&x.view()).unwrap();
            assert!((proba.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let before: Vec<FaultLabel> = (0..data.nrows())
            .map(|i| model.predict(&data.row(i)).unwrap())
            .collect();
        model.trees.reverse();
        let after: Vec<FaultLabel> = (0..data.nrows())
            .map(|i| model.predict(&data.row(i)).unwrap())
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn batch_prediction_preserves_row_order() {
        let (data, labels) = blobs(20, 10);
        let (model, _) = fit_forest(
            &data.view(),
            &labels,
            &ForestParams {
                n_trees: 9,
                ..ForestParams::default()
            },
            7,
        )
        .unwrap();
        let batch = model.predict_rows(&data.view()).unwrap();
        for i in 0..data.nrows() {
            assert_eq!(batch[i], model.predict(&data.row(i)).unwrap());
        }
    }

    #[test]
    fn forest_file_round_trips_and_rejects_damage() {
        let (data, labels) = blobs(15, 11);
        let (model, _) = fit_forest(
            &data.view(),
            &labels,
            &ForestParams {
                n_trees: 4,
                ..ForestParams::default()
            },
            3,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.txt");
        write_forest(&path, &model).unwrap();
        let back = read_forest(&path).unwrap();
        assert_eq!(back, model);

        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
        std::fs::write(&path, truncated.join("\n")).unwrap();
        assert!(read_forest(&path).is_err());
    }

    #[test]
    fn stump_separable_data_converges_in_one_round() {
        let data = array![[0.0], [0.2], [0.4], [5.0], [5.2], [5.4]];
        let labels = labels_of(&[0, 0, 0, 2, 2, 2]);
        let model = fit_adaboost(&data.view(), &labels, 25).unwrap();
        assert_eq!(model.stumps.len(), 1);
        for i in 0..data.nrows() {
            assert_eq!(predict_adaboost(&model, &data.row(i)).unwrap(), labels[i]);
        }
    }

    #[test]
    fn samme_alpha_matches_closed_form() {
        // err = 0.5 with K = 4: ln(1) + ln(3) = ln 3.
        assert!((samme_alpha(0.5, 4) - 3.0f64.ln()).abs() < 1e-12);
        // A perfect round gets the floored error.
        let capped = samme_alpha(0.0, 4);
        assert!(capped.is_finite());
        assert!(capped > 20.0);
    }

    #[test]
    fn reweighting_keeps_distribution_normalized() {
        let mut rng = RngStream::derive(12, "reweight", 0);
        for _ in 0..30 {
            let n = 2 + rng.below(50) as usize;
            let mut weights: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            let miss: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.3)).collect();
            reweight(&mut weights, &miss, 1.3);
            assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adaboost_fits_separable_blobs_reasonably() {
        let (data, labels) = blobs(40, 13);
        let model = fit_adaboost(&data.view(), &labels, 40).unwrap();
        let correct = (0..data.nrows())
            .filter(|&i| predict_adaboost(&model, &data.row(i)).unwrap() == labels[i])
            .count();
        let acc = correct as f64 / data.nrows() as f64;
        assert!(acc >= 0.9, "training accuracy {acc}");
    }
}
