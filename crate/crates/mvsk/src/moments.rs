//! Return data ingestion and sample co-moment estimation up to order four.
//!
//! Co-moment tensors are fully symmetric, so only sorted index tuples are
//! stored: C(n+1,2) covariance entries, C(n+2,3) coskewness entries,
//! C(n+3,4) cokurtosis entries, each addressed by an O(1) combinatorial
//! rank. Reads accept indices in any order. Contractions and derivatives
//! walk the stored entries once, weighting each by the count of distinct
//! permutations of its index tuple.
//!
//! Two read backends share one entry-computation path: [`MomentTensors`]
//! materializes every entry up front, while [`JitMoments`] keeps only the
//! centered return deviations and computes entries on demand. Identical
//! queries return bit-identical values on both.

use crate::poly::{quad_multiplicity, triple_multiplicity};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::fmt::Write as _;
use std::path::Path;

/// Per-period return rates for n assets over T periods, stored asset-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    n: usize,
    t: usize,
    /// data[i * t + s] is asset i's return in period s.
    data: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl ReturnMatrix {
    /// Build from asset-major rows: `rows[i]` is asset i's return series.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("need at least one asset".into()));
        }
        let t = rows[0].len();
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 periods, got {t}"
            )));
        }
        let mut data = Vec::with_capacity(n * t);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != t {
                return Err(Error::DimensionMismatch(format!(
                    "asset {} has {} periods, expected {}",
                    i,
                    row.len(),
                    t
                )));
            }
            for (s, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite return {v} for asset {i}, period {s}"
                    )));
                }
                data.push(v);
            }
        }
        Ok(ReturnMatrix {
            n,
            t,
            data,
            labels: None,
        })
    }

    /// Uniform i.i.d. returns in [low, high), deterministic per seed.
    pub fn synthetic(n: usize, t: usize, seed: u64, low: f64, high: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("need at least one asset".into()));
        }
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 periods, got {t}"
            )));
        }
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::InvalidInput(format!(
                "return bounds [{low}, {high}) are not a valid interval"
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut data = vec![0.0; n * t];
        // Sample period-major so the draw order matches the CSV layout.
        for s in 0..t {
            for i in 0..n {
                data[i * t + s] = rng.gen_range(low..high);
            }
        }
        Ok(ReturnMatrix {
            n,
            t,
            data,
            labels: Some((1..=n).map(|i| format!("asset_{i}")).collect()),
        })
    }

    /// Parse CSV text: rows are periods, columns are assets, first row an
    /// optional header of asset labels. Any non-numeric cell outside the
    /// header is an error.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::CsvParse {
                row: 1,
                col: 1,
                msg: "empty input".into(),
            });
        }
        let first_cells: Vec<&str> = lines[0].split(',').map(str::trim).collect();
        let n = first_cells.len();
        let header_is_labels = first_cells.iter().any(|c| c.parse::<f64>().is_err());
        let labels = if header_is_labels {
            Some(first_cells.iter().map(|s| s.to_string()).collect())
        } else {
            None
        };
        let data_lines = if header_is_labels {
            &lines[1..]
        } else {
            &lines[..]
        };
        let t = data_lines.len();
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 data rows, got {t}"
            )));
        }
        let mut data = vec![0.0; n * t];
        for (s, line) in data_lines.iter().enumerate() {
            let row_no = s + 1 + usize::from(header_is_labels);
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != n {
                return Err(Error::CsvParse {
                    row: row_no,
                    col: cells.len(),
                    msg: format!("expected {n} columns, found {}", cells.len()),
                });
            }
            for (i, cell) in cells.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::CsvParse {
                    row: row_no,
                    col: i + 1,
                    msg: format!("cannot parse {cell:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::CsvParse {
                        row: row_no,
                        col: i + 1,
                        msg: format!("non-finite value {cell:?}"),
                    });
                }
                data[i * t + s] = v;
            }
        }
        Ok(ReturnMatrix {
            n,
            t,
            data,
            labels,
        })
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    /// Serialize as CSV (periods as rows); includes a header row when
    /// labels are present. Values print in shortest round-trip form, so
    /// parse(to_csv_string(r)) reproduces r exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        if let Some(labels) = &self.labels {
            out.push_str(&labels.join(","));
            out.push('\n');
        }
        for s in 0..self.t {
            for i in 0..self.n {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{}", self.data[i * self.t + s]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn asset_count(&self) -> usize {
        self.n
    }

    pub fn period_count(&self) -> usize {
        self.t
    }

    pub fn value(&self, asset: usize, period: usize) -> f64 {
        self.data[asset * self.t + period]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Asset i's full return series.
    fn series(&self, i: usize) -> &[f64] {
        &self.data[i * self.t..(i + 1) * self.t]
    }
}

/// Read access to the four moment estimates, indices in any order.
///
/// Implementations must agree bit-for-bit when built from the same
/// [`ReturnMatrix`]; the solver stack is written against this trait.
pub trait MomentSource {
    fn asset_count(&self) -> usize;
    fn mean(&self, i: usize) -> f64;
    fn cov(&self, i: usize, j: usize) -> f64;
    fn coskew(&self, i: usize, j: usize, k: usize) -> f64;
    fn cokurt(&self, i: usize, j: usize, k: usize, l: usize) -> f64;
}

// Shared estimation path: both backends center once and compute each entry
// with the same expression over the same centered slices, which makes their
// reads bit-identical.

/// (mu, centered deviations asset-major).
fn center(r: &ReturnMatrix) -> (Vec<f64>, Vec<f64>) {
    let (n, t) = (r.n, r.t);
    let mut mu = vec![0.0; n];
    let mut dev = vec![0.0; n * t];
    for i in 0..n {
        let series = r.series(i);
        let mut acc = 0.0;
        for &v in series {
            acc += v;
        }
        mu[i] = acc / t as f64;
        for s in 0..t {
            dev[i * t + s] = series[s] - mu[i];
        }
    }
    (mu, dev)
}

fn cov_entry(dev: &[f64], t: usize, i: usize, j: usize) -> f64 {
    let (di, dj) = (&dev[i * t..(i + 1) * t], &dev[j * t..(j + 1) * t]);
    let mut acc = 0.0;
    for s in 0..t {
        acc += di[s] * dj[s];
    }
    acc / (t - 1) as f64
}

fn coskew_entry(dev: &[f64], t: usize, i: usize, j: usize, k: usize) -> f64 {
    let di = &dev[i * t..(i + 1) * t];
    let dj = &dev[j * t..(j + 1) * t];
    let dk = &dev[k * t..(k + 1) * t];
    let mut acc = 0.0;
    for s in 0..t {
        acc += di[s] * dj[s] * dk[s];
    }
    acc / t as f64
}

fn cokurt_entry(dev: &[f64], t: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let di = &dev[i * t..(i + 1) * t];
    let dj = &dev[j * t..(j + 1) * t];
    let dk = &dev[k * t..(k + 1) * t];
    let dl = &dev[l * t..(l + 1) * t];
    let mut acc = 0.0;
    for s in 0..t {
        acc += di[s] * dj[s] * dk[s] * dl[s];
    }
    acc / t as f64
}

// O(1) ranks for sorted tuples in colexicographic order.

fn c2(a: usize) -> usize {
    a * a.saturating_sub(1) / 2
}

fn c3(a: usize) -> usize {
    if a < 3 {
        0
    } else {
        a * (a - 1) * (a - 2) / 6
    }
}

fn c4(a: usize) -> usize {
    if a < 4 {
        0
    } else {
        a * (a - 1) * (a - 2) * (a - 3) / 24
    }
}

fn pair_rank(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    i + c2(j + 1)
}

fn triple_rank(i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i <= j && j <= k);
    i + c2(j + 1) + c3(k + 2)
}

fn quad_rank(i: usize, j: usize, k: usize, l: usize) -> usize {
    debug_assert!(i <= j && j <= k && k <= l);
    i + c2(j + 1) + c3(k + 2) + c4(l + 3)
}

fn sort2(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn sort3(a: usize, b: usize, c: usize) -> (usize, usize, usize) {
    let (a, b) = sort2(a, b);
    let (b, c) = sort2(b, c);
    let (a, b) = sort2(a, b);
    (a, b, c)
}

fn sort4(a: usize, b: usize, c: usize, d: usize) -> (usize, usize, usize, usize) {
    let (a, b) = sort2(a, b);
    let (c, d) = sort2(c, d);
    let (a, c) = sort2(a, c);
    let (b, d) = sort2(b, d);
    let (b, c) = sort2(b, c);
    (a, b, c, d)
}

/// Materialized sample moments: mean vector plus packed symmetric storage
/// for the order-2/3/4 co-moment tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensors {
    n: usize,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    skew: Vec<f64>,
    kurt: Vec<f64>,
}

impl MomentTensors {
    /// Estimate all four sample moments from return data: mean over T,
    /// covariance over T-1, third and fourth central co-moments over T.
    pub fn estimate(r: &ReturnMatrix) -> Self {
        let (n, t) = (r.n, r.t);
        let (mu, dev) = center(r);
        let mut sigma = vec![0.0; c2(n + 1)];
        let mut skew = vec![0.0; c3(n + 2)];
        let mut kurt = vec![0.0; c4(n + 3)];
        let mut r2 = 0;
        for j in 0..n {
            for i in 0..=j {
                sigma[r2] = cov_entry(&dev, t, i, j);
                r2 += 1;
            }
        }
        let mut r3 = 0;
        for k in 0..n {
            for j in 0..=k {
                for i in 0..=j {
                    skew[r3] = coskew_entry(&dev, t, i, j, k);
                    r3 += 1;
                }
            }
        }
        let mut r4 = 0;
        for l in 0..n {
            for k in 0..=l {
                for j in 0..=k {
                    for i in 0..=j {
                        kurt[r4] = cokurt_entry(&dev, t, i, j, k, l);
                        r4 += 1;
                    }
                }
            }
        }
        MomentTensors {
            n,
            mu,
            sigma,
            skew,
            kurt,
        }
    }

    /// Build directly from packed entries (sorted-tuple colexicographic
    /// order); lengths must be exactly C(n+1,2), C(n+2,3), C(n+3,4).
    pub fn from_sorted_entries(
        n: usize,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        skew: Vec<f64>,
        kurt: Vec<f64>,
    ) -> Result<Self> {
        let want = (n, c2(n + 1), c3(n + 2), c4(n + 3));
        let got = (mu.len(), sigma.len(), skew.len(), kurt.len());
        if got != want {
            return Err(Error::DimensionMismatch(format!(
                "entry counts (mu, sigma, skew, kurt) = {got:?}, expected {want:?}"
            )));
        }
        Ok(MomentTensors {
            n,
            mu,
            sigma,
            skew,
            kurt,
        })
    }

    pub fn asset_count(&self) -> usize {
        self.n
    }

    pub fn mean_vector(&self) -> &[f64] {
        &self.mu
    }

    /// Dense symmetric covariance matrix, mirrored from packed storage.
    pub fn covariance_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = self.cov(i, j);
            }
        }
        m
    }

    /// Entry for 2, 3, or 4 indices in any order, with range checking.
    pub fn tensor_entry(&self, indices: &[usize]) -> Result<f64> {
        for &i in indices {
            if i >= self.n {
                return Err(Error::IndexOutOfRange(format!(
                    "asset index {} out of range for {} assets",
                    i, self.n
                )));
            }
        }
        match *indices {
            [i, j] => Ok(self.cov(i, j)),
            [i, j, k] => Ok(self.coskew(i, j, k)),
            [i, j, k, l] => Ok(self.cokurt(i, j, k, l)),
            _ => Err(Error::InvalidInput(format!(
                "tensor_entry takes 2-4 indices, got {}",
                indices.len()
            ))),
        }
    }

    /// Visit each stored covariance entry once as (i, j, value) with i <= j.
    pub fn for_each_sorted_pair<F: FnMut(usize, usize, f64)>(&self, mut f: F) {
        let mut r = 0;
        for j in 0..self.n {
            for i in 0..=j {
                f(i, j, self.sigma[r]);
                r += 1;
            }
        }
    }

    /// Visit each stored coskewness entry once as (i, j, k, value), i<=j<=k.
    pub fn for_each_sorted_triple<F: FnMut(usize, usize, usize, f64)>(&self, mut f: F) {
        let mut r = 0;
        for k in 0..self.n {
            for j in 0..=k {
                for i in 0..=j {
                    f(i, j, k, self.skew[r]);
                    r += 1;
                }
            }
        }
    }

    /// Visit each stored cokurtosis entry once as (i, j, k, l, value),
    /// i<=j<=k<=l.
    pub fn for_each_sorted_quad<F: FnMut(usize, usize, usize, usize, f64)>(&self, mut f: F) {
        let mut r = 0;
        for l in 0..self.n {
            for k in 0..=l {
                for j in 0..=k {
                    for i in 0..=j {
                        f(i, j, k, l, self.kurt[r]);
                        r += 1;
                    }
                }
            }
        }
    }
}

impl MomentSource for MomentTensors {
    fn asset_count(&self) -> usize {
        self.n
    }

    fn mean(&self, i: usize) -> f64 {
        self.mu[i]
    }

    fn cov(&self, i: usize, j: usize) -> f64 {
        let (i, j) = sort2(i, j);
        self.sigma[pair_rank(i, j)]
    }

    fn coskew(&self, i: usize, j: usize, k: usize) -> f64 {
        let (i, j, k) = sort3(i, j, k);
        self.skew[triple_rank(i, j, k)]
    }

    fn cokurt(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let (i, j, k, l) = sort4(i, j, k, l);
        self.kurt[quad_rank(i, j, k, l)]
    }
}

/// On-demand backend: stores only the mean and centered deviations
/// (n x T numbers) and computes each queried entry from them.
#[derive(Debug, Clone)]
pub struct JitMoments {
    n: usize,
    t: usize,
    mu: Vec<f64>,
    dev: Vec<f64>,
}

impl JitMoments {
    pub fn new(r: &ReturnMatrix) -> Self {
        let (mu, dev) = center(r);
        JitMoments {
            n: r.n,
            t: r.t,
            mu,
            dev,
        }
    }
}

impl MomentSource for JitMoments {
    fn asset_count(&self) -> usize {
        self.n
    }

    fn mean(&self, i: usize) -> f64 {
        self.mu[i]
    }

    fn cov(&self, i: usize, j: usize) -> f64 {
        let (i, j) = sort2(i, j);
        cov_entry(&self.dev, self.t, i, j)
    }

    fn coskew(&self, i: usize, j: usize, k: usize) -> f64 {
        let (i, j, k) = sort3(i, j, k);
        coskew_entry(&self.dev, self.t, i, j, k)
    }

    fn cokurt(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let (i, j, k, l) = sort4(i, j, k, l);
        cokurt_entry(&self.dev, self.t, i, j, k, l)
    }
}

fn check_dim<S: MomentSource + ?Sized>(src: &S, x: &[f64]) -> Result<usize> {
    let n = src.asset_count();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "portfolio of dim {} for {} assets",
            x.len(),
            n
        )));
    }
    Ok(n)
}

/// Portfolio moments (m1, m2, m3, m4): linear, quadratic, cubic, and
/// quartic contractions of the stored tensors with x, each stored entry
/// weighted by its permutation multiplicity.
pub fn portfolio_moments<S: MomentSource + ?Sized>(src: &S, x: &[f64]) -> Result<[f64; 4]> {
    let n = check_dim(src, x)?;
    let mut m1 = 0.0;
    for i in 0..n {
        m1 += src.mean(i) * x[i];
    }
    let mut m2 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            let w = if i == j { 1.0 } else { 2.0 };
            m2 += w * src.cov(i, j) * x[i] * x[j];
        }
    }
    let mut m3 = 0.0;
    for k in 0..n {
        for j in 0..=k {
            for i in 0..=j {
                let v = src.coskew(i, j, k);
                if v != 0.0 {
                    m3 += triple_multiplicity(i, j, k) * v * x[i] * x[j] * x[k];
                }
            }
        }
    }
    let mut m4 = 0.0;
    for l in 0..n {
        for k in 0..=l {
            for j in 0..=k {
                for i in 0..=j {
                    let v = src.cokurt(i, j, k, l);
                    if v != 0.0 {
                        m4 += quad_multiplicity(i, j, k, l) * v * x[i] * x[j] * x[k] * x[l];
                    }
                }
            }
        }
    }
    Ok([m1, m2, m3, m4])
}

/// The matrix-vector product sigma * x.
pub fn sigma_times<S: MomentSource + ?Sized>(src: &S, x: &[f64]) -> Result<Vec<f64>> {
    let n = check_dim(src, x)?;
    let mut out = vec![0.0; n];
    for j in 0..n {
        for i in 0..=j {
            let v = src.cov(i, j);
            out[i] += v * x[j];
            if i != j {
                out[j] += v * x[i];
            }
        }
    }
    Ok(out)
}

/// Gradients of the cubic and quartic portfolio moments.
///
/// Each stored entry contributes through the product rule of its monomial:
/// for a sorted tuple with value v and multiplicity w, every index position
/// adds w*v times the product of the other positions' coordinates.
pub fn portfolio_moment_gradients<S: MomentSource + ?Sized>(
    src: &S,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = check_dim(src, x)?;
    let mut g3 = vec![0.0; n];
    for k in 0..n {
        for j in 0..=k {
            for i in 0..=j {
                let v = src.coskew(i, j, k);
                if v != 0.0 {
                    let wv = triple_multiplicity(i, j, k) * v;
                    g3[i] += wv * x[j] * x[k];
                    g3[j] += wv * x[i] * x[k];
                    g3[k] += wv * x[i] * x[j];
                }
            }
        }
    }
    let mut g4 = vec![0.0; n];
    for l in 0..n {
        for k in 0..=l {
            for j in 0..=k {
                for i in 0..=j {
                    let v = src.cokurt(i, j, k, l);
                    if v != 0.0 {
                        let wv = quad_multiplicity(i, j, k, l) * v;
                        g4[i] += wv * x[j] * x[k] * x[l];
                        g4[j] += wv * x[i] * x[k] * x[l];
                        g4[k] += wv * x[i] * x[j] * x[l];
                        g4[l] += wv * x[i] * x[j] * x[k];
                    }
                }
            }
        }
    }
    Ok((g3, g4))
}

/// Hessians of the cubic and quartic portfolio moments as dense symmetric
/// matrices. Satisfies the homogeneity identities H3*x = 2*grad m3 and
/// H4*x = 3*grad m4.
pub fn portfolio_moment_hessians<S: MomentSource + ?Sized>(
    src: &S,
    x: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = check_dim(src, x)?;
    let mut h3 = vec![vec![0.0; n]; n];
    for k in 0..n {
        for j in 0..=k {
            for i in 0..=j {
                let v = src.coskew(i, j, k);
                if v != 0.0 {
                    let wv = triple_multiplicity(i, j, k) * v;
                    let pos = [i, j, k];
                    for a in 0..3 {
                        for b in 0..3 {
                            if a != b {
                                let rest = pos[3 - a - b];
                                h3[pos[a]][pos[b]] += wv * x[rest];
                            }
                        }
                    }
                }
            }
        }
    }
    let mut h4 = vec![vec![0.0; n]; n];
    for l in 0..n {
        for k in 0..=l {
            for j in 0..=k {
                for i in 0..=j {
                    let v = src.cokurt(i, j, k, l);
                    if v != 0.0 {
                        let wv = quad_multiplicity(i, j, k, l) * v;
                        let pos = [i, j, k, l];
                        for a in 0..4 {
                            for b in 0..4 {
                                if a != b {
                                    let mut prod = wv;
                                    for (c, &p) in pos.iter().enumerate() {
                                        if c != a && c != b {
                                            prod *= x[p];
                                        }
                                    }
                                    h4[pos[a]][pos[b]] += prod;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((h3, h4))
}
