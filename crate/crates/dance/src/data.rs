//! Dataset ingestion, synthetic generation, prefix windows, and worker partitioning.
//!
//! Rows live in a fixed order that is frozen at load time. Prefix windows over
//! that order are nested (`S_m ⊂ S_n` for `m ≤ n`), which is what lets a stage
//! at a larger sample size reuse every sample of the previous stage.

use std::io::{BufRead, Write};
use std::ops::Range;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Sparse row-major feature matrix with ±1 labels and a frozen row order.
///
/// Immutable after construction; prefix nesting depends on the order never
/// changing.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
    /// `order[i]` = original position of row `i` before the load-time shuffle.
    order: Vec<u32>,
}

/// Borrowed view of one sparse row.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn dot(&self, w: &DVector<f64>) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &x)| x * w[j as usize])
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    /// `out += alpha * x`.
    pub fn axpy_into(&self, alpha: f64, out: &mut DVector<f64>) {
        for (&j, &x) in self.indices.iter().zip(self.values) {
            out[j as usize] += alpha * x;
        }
    }
}

impl Dataset {
    /// Build a dataset from CSR parts, validating every invariant.
    pub fn from_parts(
        d: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        if indptr.len() != n + 1 || indptr[0] != 0 || *indptr.last().unwrap() != indices.len() {
            return Err(Error::InvalidArg("inconsistent CSR index pointers".into()));
        }
        if indices.len() != values.len() {
            return Err(Error::InvalidArg("indices/values length mismatch".into()));
        }
        for y in &labels {
            if *y != 1.0 && *y != -1.0 {
                return Err(Error::InvalidArg(format!("label {y} is not ±1")));
            }
        }
        for i in 0..n {
            let row = &indices[indptr[i]..indptr[i + 1]];
            for pair in row.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(Error::InvalidArg(format!(
                        "row {i}: column indices not strictly increasing"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last as usize >= d {
                    return Err(Error::InvalidArg(format!(
                        "row {i}: column index {last} out of bounds for d = {d}"
                    )));
                }
            }
        }
        let order = (0..n as u32).collect();
        Ok(Self {
            d,
            indptr,
            indices,
            values,
            labels,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        SparseRow {
            indices: &self.indices[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Original position of row `i` prior to any shuffle.
    pub fn original_index(&self, i: usize) -> u32 {
        self.order[i]
    }

    /// Apply the load-time permutation: a single seeded shuffle, after which
    /// the row order is frozen.
    pub fn shuffled(self, seed: u64) -> Dataset {
        let n = self.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perm.shuffle(&mut rng);
        self.permuted(&perm)
    }

    fn permuted(self, perm: &[usize]) -> Dataset {
        let n = self.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        let mut labels = Vec::with_capacity(n);
        let mut order = Vec::with_capacity(n);
        indptr.push(0);
        for &src in perm {
            let lo = self.indptr[src];
            let hi = self.indptr[src + 1];
            indices.extend_from_slice(&self.indices[lo..hi]);
            values.extend_from_slice(&self.values[lo..hi]);
            labels.push(self.labels[src]);
            order.push(self.order[src]);
            indptr.push(indices.len());
        }
        Dataset {
            d: self.d,
            indptr,
            indices,
            values,
            labels,
            order,
        }
    }

    /// Standalone copy of the first `m` rows (frozen order preserved).
    pub fn prefix(&self, m: usize) -> Result<Dataset> {
        if m == 0 || m > self.len() {
            return Err(Error::InvalidArg(format!(
                "prefix size {m} out of range 1..={}",
                self.len()
            )));
        }
        let end = self.indptr[m];
        Ok(Dataset {
            d: self.d,
            indptr: self.indptr[..=m].to_vec(),
            indices: self.indices[..end].to_vec(),
            values: self.values[..end].to_vec(),
            labels: self.labels[..m].to_vec(),
            order: self.order[..m].to_vec(),
        })
    }

    /// Standalone copy of rows `from..len` (the frozen order's tail, used as
    /// a held-out split).
    pub fn tail(&self, from: usize) -> Result<Dataset> {
        if from >= self.len() {
            return Err(Error::InvalidArg(format!(
                "tail start {from} leaves no rows (len = {})",
                self.len()
            )));
        }
        let base = self.indptr[from];
        Ok(Dataset {
            d: self.d,
            indptr: self.indptr[from..].iter().map(|p| p - base).collect(),
            indices: self.indices[base..].to_vec(),
            values: self.values[base..].to_vec(),
            labels: self.labels[from..].to_vec(),
            order: self.order[from..].to_vec(),
        })
    }

    /// Prefix window over the first `n` rows.
    pub fn window(&self, n: usize) -> Result<SampleWindow<'_>> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArg(format!(
                "window size {n} out of range 1..={}",
                self.len()
            )));
        }
        Ok(SampleWindow { ds: self, n })
    }
}

/// The active prefix `S_n`: the first `n` rows of the frozen order.
///
/// Windows over the same dataset nest: the window of size `m ≤ n` is exactly
/// the first `m` rows of the window of size `n`.
#[derive(Debug, Clone, Copy)]
pub struct SampleWindow<'a> {
    ds: &'a Dataset,
    n: usize,
}

impl<'a> SampleWindow<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.ds.dim()
    }

    pub fn row(&self, i: usize) -> SparseRow<'a> {
        debug_assert!(i < self.n);
        self.ds.row(i)
    }

    pub fn label(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        self.ds.label(i)
    }
}

/// Split the window into `k` contiguous, nearly equal shards.
///
/// Contiguity keeps shard membership stable as the window grows: a worker
/// only ever appends rows between stages.
pub fn partition(win: &SampleWindow<'_>, k: usize) -> Result<Vec<Range<usize>>> {
    let n = win.len();
    if k == 0 {
        return Err(Error::InvalidArg("worker count must be ≥ 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArg(format!(
            "cannot split {n} rows across {k} workers without empty shards"
        )));
    }
    let base = n / k;
    let rem = n % k;
    let mut shards = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < rem);
        shards.push(start..start + size);
        start += size;
    }
    Ok(shards)
}

/// Parse libsvm text: each nonempty line is `<label> <idx>:<val> ...` with
/// 1-based, strictly increasing indices. Labels ≤ 0 map to −1, otherwise +1.
///
/// The result keeps file order; apply [`Dataset::shuffled`] afterwards to fix
/// the load-time permutation.
pub fn parse_libsvm<R: BufRead>(reader: R, d_hint: Option<usize>) -> Result<Dataset> {
    let mut indptr = vec![0usize];
    let mut indices: Vec<u32> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut d = d_hint.unwrap_or(0);

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_ascii_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a first token");
        let raw: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("label `{label_tok}` is not a number"),
        })?;
        labels.push(if raw <= 0.0 { -1.0 } else { 1.0 });

        let mut prev: Option<u32> = None;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected `index:value`, got `{tok}`"),
            })?;
            let idx: u64 = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("index `{idx_s}` is not a positive integer"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "libsvm indices are 1-based; found 0".into(),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("value `{val_s}` is not a number"),
            })?;
            let col = (idx - 1) as u32;
            if let Some(p) = prev {
                if col <= p {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("indices not strictly increasing ({} after {})", idx, p + 1),
                    });
                }
            }
            prev = Some(col);
            d = d.max(idx as usize);
            indices.push(col);
            values.push(val);
        }
        indptr.push(indices.len());
    }

    Dataset::from_parts(d, indptr, indices, values, labels)
}

/// Write libsvm text (1-based indices, shortest round-trip float formatting).
pub fn serialize_libsvm<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    for i in 0..ds.len() {
        let row = ds.row(i);
        write!(out, "{}", if ds.label(i) > 0.0 { "1" } else { "-1" })?;
        for (&j, &x) in row.indices.iter().zip(row.values) {
            write!(out, " {}:{}", j + 1, x)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Generate a dense logistic instance: standard-normal features, labels from
/// a planted unit separator with Gaussian noise of amplitude `margin` added
/// to the score before taking the sign. Rows come out pre-shuffled.
///
/// Deterministic for a fixed `(n, d, seed, margin)`.
pub fn synth_logistic(n: usize, d: usize, seed: u64, margin: f64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArg(format!(
            "synthetic instance needs n ≥ 1 and d ≥ 1 (got n = {n}, d = {d})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planted: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let nrm = planted.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        planted.iter_mut().for_each(|x| *x /= nrm);
    }

    let mut indptr = vec![0usize];
    let mut indices = Vec::with_capacity(n * d);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut score = 0.0;
        for j in 0..d {
            let x: f64 = rng.sample(StandardNormal);
            score += x * planted[j];
            indices.push(j as u32);
            values.push(x);
        }
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(if score + margin * noise >= 0.0 { 1.0 } else { -1.0 });
        indptr.push(indices.len());
    }

    let shuffle_seed = rng.gen::<u64>();
    Ok(Dataset::from_parts(d, indptr, indices, values, labels)?.shuffled(shuffle_seed))
}
