//! Independent oracles for the acceptance suite. These re-derive results
//! from first principles with different algorithms (or a direct recursive
//! form) so agreement with the library is meaningful evidence, not a
//! tautology.

use ndarray::{Array1, Array2};

/// Dense symmetric eigendecomposition by cyclic Jacobi rotations: sweeps
/// over the strict upper triangle until the off-diagonal norm vanishes.
/// Completely disjoint from the library's Householder + QL route. Returns
/// eigenvalues ascending with matching eigenvector columns.
pub fn jacobi_eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);

    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // Rotate columns p and q of m, then rows p and q, then the
                // accumulated eigenvector columns.
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, dst]] = v[[k, src]];
        }
    }
    (eigenvalues, vectors)
}

const CLASSES: usize = 4;

fn histogram(labels: &[u8], idx: &[usize]) -> [u64; CLASSES] {
    let mut h = [0u64; CLASSES];
    for &i in idx {
        h[labels[i] as usize] += 1;
    }
    h
}

fn gini_of(counts: &[u64; CLASSES], total: f64) -> f64 {
    let mut acc = 0.0;
    for &c in counts {
        let p = c as f64 / total;
        acc += p * p;
    }
    1.0 - acc
}

fn majority_code(counts: &[u64; CLASSES]) -> u8 {
    let mut best = 0;
    for c in 1..CLASSES {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best as u8
}

/// Direct recursive CART with every rule spelled out inline: candidate
/// thresholds are midpoints between consecutive distinct sorted values
/// (snapped down when the midpoint rounds up to the larger value), the
/// winning split strictly maximizes Gini gain with ties going to the first
/// candidate in (feature, threshold) order, zero-gain splits are taken,
/// and leaves predict the majority class with ties to the lowest code.
/// Returns the number of training rows the grown tree classifies correctly.
pub fn oracle_tree_correct(
    data: &Array2<f64>,
    labels: &[u8],
    max_depth: usize,
    min_samples_split: usize,
) -> usize {
    assert_eq!(data.nrows(), labels.len());
    let idx: Vec<usize> = (0..data.nrows()).collect();
    let mut predicted = vec![0u8; labels.len()];
    assign_node(
        data,
        labels,
        idx,
        0,
        max_depth,
        min_samples_split,
        &mut predicted,
    );
    predicted
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count()
}

fn assign_node(
    data: &Array2<f64>,
    labels: &[u8],
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_samples_split: usize,
    predicted: &mut [u8],
) {
    let counts = histogram(labels, &idx);
    let n = idx.len();
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let split = if pure || depth >= max_depth || n < min_samples_split {
        None
    } else {
        best_candidate(data, labels, &idx, &counts)
    };
    match split {
        None => {
            let label = majority_code(&counts);
            for &i in &idx {
                predicted[i] = label;
            }
        }
        Some((feature, threshold)) => {
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.into_iter().partition(|&i| data[[i, feature]] <= threshold);
            assign_node(data, labels, left, depth + 1, max_depth, min_samples_split, predicted);
            assign_node(data, labels, right, depth + 1, max_depth, min_samples_split, predicted);
        }
    }
}

fn best_candidate(
    data: &Array2<f64>,
    labels: &[u8],
    idx: &[usize],
    counts: &[u64; CLASSES],
) -> Option<(usize, f64)> {
    let n = idx.len();
    let n_f = n as f64;
    let parent = gini_of(counts, n_f);
    let mut best: Option<(f64, usize, f64)> = None;

    for f in 0..data.ncols() {
        // Stable sort keeps equal values in index order, which pins the
        // exact float arithmetic per candidate and thus how ties land.
        let mut pairs: Vec<(f64, u8)> = idx.iter().map(|&i| (data[[i, f]], labels[i])).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left = [0u64; CLASSES];
        let mut right = *counts;
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
                let gain =
                    parent - (nl / n_f) * gini_of(&left, nl) - (nr / n_f) * gini_of(&right, nr);
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, f, thr));
                }
            }
        }
    }
    best.map(|(_, f, thr)| (f, thr))
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a continuous
/// CDF. The sample is sorted internally.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic two-sided KS critical value: reject at level alpha when the
/// statistic exceeds this. c(0.01) = 1.628 in the classic table.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = if (alpha - 0.01).abs() < 1e-12 {
        1.628
    } else if (alpha - 0.05).abs() < 1e-12 {
        1.358
    } else {
        panic!("unsupported alpha {alpha}");
    };
    c / (n as f64).sqrt()
}
