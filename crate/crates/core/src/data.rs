//! Dataset ingestion, synthetic generators and minibatch drawing.
//!
//! Datasets are immutable after construction and shared read-only between
//! chains. Rows are stored dense or sparse depending on dimension and
//! density; callers go through `dot` / `add_scaled` and never see the
//! difference.

use std::fs::File;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::Array1;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::potential::Minibatch;

/// Switch to sparse row storage above this dimension, or below this density.
const SPARSE_DIM_THRESHOLD: usize = 100;
const SPARSE_DENSITY_THRESHOLD: f64 = 0.2;

#[derive(Clone, Debug)]
enum Storage {
    /// Row-major n x d.
    Dense(Vec<f64>),
    /// Per-row (index, value) pairs.
    Sparse(Vec<Vec<(u32, f64)>>),
}

/// Immutable feature matrix with labels in {-1, +1}.
#[derive(Clone, Debug)]
pub struct Dataset {
    n: usize,
    d: usize,
    labels: Vec<f64>,
    storage: Storage,
}

fn check_label(y: f64) -> Result<f64> {
    if y == 1.0 || y == -1.0 {
        Ok(y)
    } else {
        Err(Error::Config(format!("label {y} is not +1/-1")))
    }
}

impl Dataset {
    pub fn from_dense(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let d = rows.first().map_or(0, |r| r.len());
        let mut flat = Vec::with_capacity(rows.len() * d);
        for r in &rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        for &y in &labels {
            check_label(y)?;
        }
        Ok(Dataset {
            n: labels.len(),
            d,
            labels,
            storage: Storage::Dense(flat),
        })
    }

    pub fn from_sparse(rows: Vec<Vec<(u32, f64)>>, labels: Vec<f64>, d: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        for r in &rows {
            for &(idx, _) in r {
                if idx as usize >= d {
                    return Err(Error::BadIndex {
                        index: idx as usize,
                        n: d,
                    });
                }
            }
        }
        for &y in &labels {
            check_label(y)?;
        }
        Ok(Dataset {
            n: labels.len(),
            d,
            labels,
            storage: Storage::Sparse(rows),
        })
    }

    /// Empty dataset carrying only a dimension; used by prior-only targets.
    pub fn empty(d: usize) -> Self {
        Dataset {
            n: 0,
            d,
            labels: Vec::new(),
            storage: Storage::Dense(Vec::new()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// x_i . w
    pub fn dot(&self, i: usize, w: &Array1<f64>) -> f64 {
        match &self.storage {
            Storage::Dense(flat) => {
                let row = &flat[i * self.d..(i + 1) * self.d];
                let mut s = 0.0;
                for (a, b) in row.iter().zip(w.iter()) {
                    s += a * b;
                }
                s
            }
            Storage::Sparse(rows) => rows[i]
                .iter()
                .map(|&(idx, v)| v * w[idx as usize])
                .sum(),
        }
    }

    /// out += alpha * x_i
    pub fn add_scaled(&self, i: usize, alpha: f64, out: &mut Array1<f64>) {
        match &self.storage {
            Storage::Dense(flat) => {
                let row = &flat[i * self.d..(i + 1) * self.d];
                for (o, v) in out.iter_mut().zip(row.iter()) {
                    *o += alpha * v;
                }
            }
            Storage::Sparse(rows) => {
                for &(idx, v) in &rows[i] {
                    out[idx as usize] += alpha * v;
                }
            }
        }
    }

    /// Row i as a dense vector (copies for sparse storage).
    pub fn dense_row(&self, i: usize) -> Array1<f64> {
        match &self.storage {
            Storage::Dense(flat) => {
                Array1::from_iter(flat[i * self.d..(i + 1) * self.d].iter().copied())
            }
            Storage::Sparse(rows) => {
                let mut x = Array1::zeros(self.d);
                for &(idx, v) in &rows[i] {
                    x[idx as usize] = v;
                }
                x
            }
        }
    }

    /// Content hash over dimensions, labels and feature values; used to check
    /// that experiments leave the dataset untouched.
    pub fn content_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.n.hash(&mut h);
        self.d.hash(&mut h);
        for y in &self.labels {
            y.to_bits().hash(&mut h);
        }
        match &self.storage {
            Storage::Dense(flat) => {
                for v in flat {
                    v.to_bits().hash(&mut h);
                }
            }
            Storage::Sparse(rows) => {
                for r in rows {
                    for &(idx, v) in r {
                        idx.hash(&mut h);
                        v.to_bits().hash(&mut h);
                    }
                }
            }
        }
        h.finish()
    }

    /// Seeded shuffle split into (train, test). `test_fraction` in [0, 1).
    pub fn split<R: Rng>(&self, test_fraction: f64, rng: &mut R) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!(
                "test_fraction {test_fraction} outside [0, 1)"
            )));
        }
        let n_test = (self.n as f64 * test_fraction).round() as usize;
        let mut order: Vec<usize> = (0..self.n).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let test_idx = &order[..n_test];
        let train_idx = &order[n_test..];
        Ok((self.take(train_idx)?, self.take(test_idx)?))
    }

    /// New dataset consisting of the given rows, in order.
    pub fn take(&self, indices: &[usize]) -> Result<Dataset> {
        for &i in indices {
            if i >= self.n {
                return Err(Error::BadIndex { index: i, n: self.n });
            }
        }
        let labels: Vec<f64> = indices.iter().map(|&i| self.labels[i]).collect();
        let storage = match &self.storage {
            Storage::Dense(flat) => {
                let mut out = Vec::with_capacity(indices.len() * self.d);
                for &i in indices {
                    out.extend_from_slice(&flat[i * self.d..(i + 1) * self.d]);
                }
                Storage::Dense(out)
            }
            Storage::Sparse(rows) => {
                Storage::Sparse(indices.iter().map(|&i| rows[i].clone()).collect())
            }
        };
        Ok(Dataset {
            n: indices.len(),
            d: self.d,
            labels,
            storage,
        })
    }
}

fn parse_label(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad label {tok:?}"),
    })?;
    if v == 1.0 || v == 0.0 || v == -1.0 {
        Ok(if v == 1.0 { 1.0 } else { -1.0 })
    } else {
        Err(Error::Parse {
            line,
            msg: format!("unknown label value {v}"),
        })
    }
}

/// Reads a libsvm-format text file: `<label> idx:val idx:val ...` with
/// 1-based feature indices. Labels 0/-1 map to -1, 1/+1 to +1. Files ending
/// in `.gz` are decompressed transparently.
///
/// The dimension is `expected_dim` when given (indices beyond it are a parse
/// error), otherwise the largest index seen.
pub fn read_libsvm<P: AsRef<Path>>(path: P, expected_dim: Option<usize>) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    let reader: Box<dyn Read> = if path.as_ref().extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    let reader = BufReader::new(reader);

    let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    let mut nnz = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let label = parse_label(toks.next().unwrap(), lineno)?;
        let mut row = Vec::new();
        for tok in toks {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index {idx_s:?}"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value {val_s:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if let Some(d) = expected_dim {
                if idx > d {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("feature index {idx} exceeds declared dimension {d}"),
                    });
                }
            }
            max_index = max_index.max(idx);
            row.push((idx as u32 - 1, val));
        }
        nnz += row.len();
        rows.push(row);
        labels.push(label);
    }
    let d = expected_dim.unwrap_or(max_index);
    let n = rows.len();
    let density = if n * d == 0 {
        1.0
    } else {
        nnz as f64 / (n * d) as f64
    };
    if d > SPARSE_DIM_THRESHOLD || density < SPARSE_DENSITY_THRESHOLD {
        Dataset::from_sparse(rows, labels, d)
    } else {
        let mut dense = Vec::with_capacity(n);
        for row in rows {
            let mut r = vec![0.0; d];
            for (idx, v) in row {
                r[idx as usize] = v;
            }
            dense.push(r);
        }
        Dataset::from_dense(dense, labels)
    }
}

/// Writes a dataset in libsvm text format; values round-trip exactly.
pub fn write_libsvm<P: AsRef<Path>>(data: &Dataset, path: P) -> Result<()> {
    let mut f = File::create(path)?;
    for i in 0..data.n() {
        let y = if data.label(i) > 0.0 { "1" } else { "-1" };
        let mut line = String::from(y);
        let row = data.dense_row(i);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                line.push_str(&format!(" {}:{}", j + 1, v));
            }
        }
        line.push('\n');
        f.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Hinge pseudo-likelihood, used by the label generator below.
fn hinge_lik(eta: &Array1<f64>, x: &Array1<f64>, y: f64, c: f64) -> f64 {
    (-c * (1.0 - y * eta.dot(x)).max(0.0)).exp()
}

/// Two-dimensional synthetic classification set: inputs uniform on the unit
/// square, weights drawn from N(0, I / lambda_prior), labels Bernoulli with
/// p(y=1) proportional to the hinge pseudo-likelihood of each class.
///
/// Returns the dataset and the generating weight vector.
pub fn gen_synthetic_svm2d<R: Rng>(
    n: usize,
    lambda_prior: f64,
    c: f64,
    rng: &mut R,
) -> (Dataset, Array1<f64>) {
    let sd = (1.0 / lambda_prior).sqrt();
    let eta = Array1::from_iter((0..2).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        z * sd
    }));
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = Array1::from_vec(vec![rng.random::<f64>(), rng.random::<f64>()]);
        let p_pos = hinge_lik(&eta, &x, 1.0, c);
        let p_neg = hinge_lik(&eta, &x, -1.0, c);
        let alpha = p_pos / (p_pos + p_neg);
        let y = if rng.random::<f64>() < alpha { 1.0 } else { -1.0 };
        rows.push(x.to_vec());
        labels.push(y);
    }
    (Dataset::from_dense(rows, labels).unwrap(), eta)
}

/// Sparse-truth logistic data: the generating weights have `support_size`
/// entries of +/-1 at random positions, inputs are standard normal and
/// labels follow Bernoulli(sigmoid(eta . x)).
pub fn gen_synthetic_sparse<R: Rng>(
    n: usize,
    d: usize,
    support_size: usize,
    rng: &mut R,
) -> Result<(Dataset, Array1<f64>)> {
    if support_size > d {
        return Err(Error::Config(format!(
            "support_size {support_size} exceeds dimension {d}"
        )));
    }
    let mut eta = Array1::<f64>::zeros(d);
    let support = sample(rng, d, support_size).into_vec();
    for j in support {
        eta[j] = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
    }
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = Array1::from_iter((0..d).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        }));
        let p = 1.0 / (1.0 + (-eta.dot(&x)).exp());
        let y = if rng.random::<f64>() < p { 1.0 } else { -1.0 };
        rows.push(x.to_vec());
        labels.push(y);
    }
    Ok((Dataset::from_dense(rows, labels)?, eta))
}

/// Uniform sample of `nb` distinct rows with scale N / nb.
///
/// `nb == n` returns the rows in order without touching the RNG, so a
/// full-size batch reproduces the exact full-data sums.
pub fn draw_minibatch<R: Rng>(data: &Dataset, nb: usize, rng: &mut R) -> Result<Minibatch> {
    let n = data.n();
    if nb == 0 || nb > n {
        return Err(Error::Config(format!(
            "batch size {nb} outside 1..={n}"
        )));
    }
    if nb == n {
        return Ok(Minibatch::full(n));
    }
    let indices = sample(rng, n, nb).into_vec();
    Ok(Minibatch {
        indices,
        scale: n as f64 / nb as f64,
    })
}
