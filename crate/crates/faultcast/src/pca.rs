//! Principal component analysis over feature rows.
//!
//! The covariance matrix (divisor n-1) is eigendecomposed directly: the
//! feature dimension is a few hundred at most, so a dense symmetric solver
//! (Householder tridiagonalization followed by implicit-shift QL, the classic
//! EISPACK tred2/tql2 pair) is both fast and dependency-free. Components are
//! stored as rows, orthonormal, ordered by decreasing explained variance,
//! with each component's largest-magnitude entry made positive so the
//! decomposition is unique.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::telemetry::fmt_f64;
use crate::{Error, Result};

/// Fitted PCA basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Column means of the training rows, length d.
    pub mean: Array1<f64>,
    /// Component rows, `r x d`, orthonormal.
    pub components: Array2<f64>,
    /// Covariance eigenvalue per component, non-increasing, non-negative.
    pub explained_variance: Array1<f64>,
}

impl PcaModel {
    pub fn r(&self) -> usize {
        self.components.nrows()
    }

    pub fn d(&self) -> usize {
        self.components.ncols()
    }

    /// Project rows into the component basis: `(X - mean) C^T`.
    pub fn transform(&self, rows: &ArrayView2<f64>) -> Array2<f64> {
        let centered = rows - &self.mean;
        centered.dot(&self.components.t())
    }

    /// Reconstruct rows from latent vectors: `Z C + mean`.
    pub fn inverse_transform(&self, z: &ArrayView2<f64>) -> Array2<f64> {
        z.dot(&self.components) + &self.mean
    }

    /// Max absolute deviation of `C C^T` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.components.dot(&self.components.t());
        let mut worst = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - target).abs());
            }
        }
        worst
    }
}

/// Fit a PCA basis with `r` components on the given rows.
/// Requires `n >= 2` rows and `1 <= r <= min(n-1, d)`.
pub fn fit_pca(rows: &ArrayView2<f64>, r: usize) -> Result<PcaModel> {
    let n = rows.nrows();
    let d = rows.ncols();
    if n < 2 {
        return Err(Error::invalid("rows", format!("{n} rows; PCA needs at least 2")));
    }
    let r_max = (n - 1).min(d);
    if r == 0 || r > r_max {
        return Err(Error::invalid(
            "r",
            format!("r = {r} outside 1..={r_max} (min(n-1, d) with n = {n}, d = {d})"),
        ));
    }

    let mean = rows.mean_axis(Axis(0)).expect("n >= 2");
    let centered = rows - &mean;
    let mut cov = centered.t().dot(&centered);
    cov.mapv_inplace(|v| v / (n - 1) as f64);

    let (eigenvalues, vectors) = eigh(&cov);
    // eigh returns ascending order; take the top r from the back.
    let mut components = Array2::zeros((r, d));
    let mut explained = Array1::zeros(r);
    for c in 0..r {
        let src = d - 1 - c;
        explained[c] = eigenvalues[src].max(0.0); // clamp rounding noise
        let col = vectors.column(src);
        // Sign convention: the entry with the largest magnitude is positive.
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in col.iter().enumerate() {
            components[[c, j]] = flip * v;
        }
    }

    let model = PcaModel {
        mean,
        components,
        explained_variance: explained,
    };
    debug_assert!(model.orthonormality_defect() < 1e-8);
    Ok(model)
}

/// Symmetric eigendecomposition. Returns eigenvalues in ascending order and
/// the matching eigenvectors as columns of an orthogonal matrix.
///
/// Ports the EISPACK tred2/tql2 pair: Householder reduction to tridiagonal
/// form with accumulated transformations, then QL iterations with implicit
/// shifts on the tridiagonal matrix.
pub fn eigh(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut v = a.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e);
    (d, v)
}

fn tred2(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
                v[[j, i]] = 0.0;
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in j + 1..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[[k, j]] -= f * e[k] + g * d[k];
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    v[[k, j]] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = 0.0;
    }
    v[[n - 1, n - 1]] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = 2.0f64.powi(-52);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Ascending order, carrying eigenvector columns along.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in i + 1..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d.swap(k, i);
            for row in 0..n {
                let tmp = v[[row, i]];
                v[[row, i]] = v[[row, k]];
                v[[row, k]] = tmp;
            }
        }
    }
}

/// Persist a model: one `mean` line, `r` `component` lines, one
/// `explained_variance` line, all full precision.
pub fn write_pca(path: &Path, model: &PcaModel) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let join = |xs: &[f64]| xs.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",");
    writeln!(w, "mean,{}", join(model.mean.as_slice().unwrap())).map_err(|e| Error::io(path, e))?;
    for row in model.components.rows() {
        writeln!(w, "component,{}", join(row.as_slice().unwrap()))
            .map_err(|e| Error::io(path, e))?;
    }
    writeln!(
        w,
        "explained_variance,{}",
        join(model.explained_variance.as_slice().unwrap())
    )
    .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a model written by [`write_pca`], rejecting inconsistent shapes and
/// non-orthonormal components.
pub fn read_pca(path: &Path) -> Result<PcaModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut mean: Option<Vec<f64>> = None;
    let mut components: Vec<Vec<f64>> = Vec::new();
    let mut explained: Option<Vec<f64>> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fmt_err = |msg: String| Error::Format {
            path: path.into(),
            line: i + 1,
            msg,
        };
        let (tag, rest) = line
            .split_once(',')
            .ok_or_else(|| fmt_err("expected <tag>,<values>".into()))?;
        let values: Vec<f64> = rest
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fmt_err(format!("bad number: {e}")))?;
        match tag {
            "mean" => mean = Some(values),
            "component" => components.push(values),
            "explained_variance" => explained = Some(values),
            other => return Err(fmt_err(format!("unknown tag {other:?}"))),
        }
    }
    let model_err = |msg: &str| Error::Model {
        path: path.into(),
        msg: msg.into(),
    };
    let mean = mean.ok_or_else(|| model_err("missing mean line"))?;
    let explained = explained.ok_or_else(|| model_err("missing explained_variance line"))?;
    if components.is_empty() {
        return Err(model_err("no component lines"));
    }
    let d = mean.len();
    if components.iter().any(|c| c.len() != d) {
        return Err(model_err("component length differs from mean length"));
    }
    if explained.len() != components.len() {
        return Err(model_err("explained_variance length differs from component count"));
    }
    let r = components.len();
    let model = PcaModel {
        mean: Array1::from(mean),
        components: Array2::from_shape_vec((r, d), components.concat())
            .expect("row-major component buffer"),
        explained_variance: Array1::from(explained),
    };
    if model.orthonormality_defect() >= 1e-8 {
        return Err(model_err("components are not orthonormal"));
    }
    Ok(model)
}
