//! Oblivious lp subspace embedding operators: a hashed sign matrix S (s
//! nonzero blocks per column) composed with a diagonal D of reciprocal
//! exponentials raised to the 1/p power, plus a dense p-stable variant used
//! inside the low-p regression pipeline.
//!
//! Operators are built deterministically from `(mode, p, n, d, master_seed)`
//! and applied to sparse matrices in a single pass over the nonzeros. The
//! accumulation order is a fixed reduction tree over row ranges, so partial
//! sketches computed on halving-aligned row shards combine to exactly the
//! same floating-point output as a centralized application; the distributed
//! module leans on that for bit-level reproducibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pnorm_unchecked, DenseMatrix, SparseMatrix, REDUCE_LEAF};
use crate::randsource::{exp_sample, pstable_sample, Stream};

/// Leading constants of the analysis-level quantities. `log` is natural.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    pub c1: f64,
    pub c2: f64,
}

impl Default for GlobalParams {
    fn default() -> Self {
        GlobalParams { c1: 1.0, c2: 1.0 }
    }
}

impl GlobalParams {
    /// rho = c1 * d * ln d
    pub fn rho(&self, d: usize) -> f64 {
        self.c1 * d as f64 * (d as f64).ln()
    }

    /// iota = 1 / (2 rho^(1/p))
    pub fn iota(&self, d: usize, p: f64) -> f64 {
        1.0 / (2.0 * self.rho(d).powf(1.0 / p))
    }

    /// eta = c2 * d * ln d * ln n
    pub fn eta(&self, n: usize, d: usize) -> f64 {
        self.c2 * d as f64 * (d as f64).ln() * (n as f64).ln()
    }

    /// tau = iota / (d * eta)
    pub fn tau(&self, n: usize, d: usize, p: f64) -> f64 {
        self.iota(d, p) / (d as f64 * self.eta(n, d))
    }
}

/// Tunable constants for sketch sizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchParams {
    pub global: GlobalParams,
    /// Row-count multiplier for the LowP and L1 modes.
    pub c_ose: f64,
    /// Exponent bump in the LowP row count c_ose * d^(1+gamma).
    pub gamma: f64,
    /// Row-count multiplier for the dense p-stable mode.
    pub c_dense: f64,
    /// Nonzero blocks per column in LowP mode.
    pub s_low: usize,
    /// Hard ceiling on the HighP row count, which otherwise grows like
    /// n^(1-2/p) * poly(d) and quickly leaves desk scale.
    pub practical_cap: Option<usize>,
}

impl Default for SketchParams {
    fn default() -> Self {
        SketchParams {
            global: GlobalParams::default(),
            c_ose: 8.0,
            gamma: 0.1,
            c_dense: 4.0,
            s_low: 2,
            practical_cap: None,
        }
    }
}

/// Largest row count an uncapped mode is allowed to request.
const MAX_ROWS: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchMode {
    /// p > 2; single nonzero per column, sup-norm estimator downstream.
    HighP,
    /// 1 <= p < 2; s nonzero blocks per column, l2 estimator downstream.
    LowP,
    /// l1 variant of LowP with s = ceil(log2(d)^2) blocks.
    L1,
    /// Dense matrix of i.i.d. p-stable entries, no diagonal.
    DensePStable,
    /// Testing hook: m = n, one nonzero per column at its own row, all
    /// signs +1 and unit diagonal, so the operator is the identity.
    Identity,
}

impl SketchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SketchMode::HighP => "high_p",
            SketchMode::LowP => "low_p",
            SketchMode::L1 => "l1",
            SketchMode::DensePStable => "dense_pstable",
            SketchMode::Identity => "identity",
        }
    }
}

impl std::str::FromStr for SketchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high_p" | "highp" | "high-p" => Ok(SketchMode::HighP),
            "low_p" | "lowp" | "low-p" => Ok(SketchMode::LowP),
            "l1" => Ok(SketchMode::L1),
            "dense_pstable" | "dense-pstable" | "dense" => Ok(SketchMode::DensePStable),
            "identity" => Ok(SketchMode::Identity),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

fn round_up_to_multiple(m: usize, s: usize) -> usize {
    m.div_ceil(s) * s
}

/// Sketch dimensions (m, s) for a mode at problem size (n, d) and norm p.
///
/// - HighP: m = ceil(6 n^(1-2/p) eta / iota^2 + d^(5+4p)), s = 1, capped at
///   `practical_cap` when given.
/// - LowP: m = ceil(c_ose * d^(1+gamma)), s = s_low.
/// - L1: s = ceil(log2(d)^2), m = ceil(c_ose * d * log2(d)^2).
/// - DensePStable: m = ceil(c_dense * d * log2(d)), s = 1.
///
/// m is always rounded up to a multiple of s.
pub fn target_dim(
    mode: SketchMode,
    n: usize,
    d: usize,
    p: f64,
    params: &SketchParams,
) -> Result<(usize, usize)> {
    if d < 2 || n < d {
        return Err(Error::InvalidParameter(format!(
            "target_dim requires n >= d >= 2, got n={n} d={d}"
        )));
    }
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "target_dim requires finite p >= 1, got {p}"
        )));
    }
    let df = d as f64;
    let (m_raw, s) = match mode {
        SketchMode::HighP => {
            if p <= 2.0 {
                return Err(Error::InvalidParameter(format!(
                    "HighP mode requires p > 2, got {p}"
                )));
            }
            let g = &params.global;
            let iota = g.iota(d, p);
            let m = 6.0 * (n as f64).powf(1.0 - 2.0 / p) * g.eta(n, d) / (iota * iota)
                + df.powf(5.0 + 4.0 * p);
            let m = match params.practical_cap {
                Some(cap) => m.min(cap as f64),
                None => m,
            };
            (m, 1usize)
        }
        SketchMode::LowP => {
            if p >= 2.0 {
                return Err(Error::InvalidParameter(format!(
                    "LowP mode requires p < 2, got {p}"
                )));
            }
            if params.s_low == 0 {
                return Err(Error::InvalidParameter("s_low must be positive".into()));
            }
            (params.c_ose * df.powf(1.0 + params.gamma), params.s_low)
        }
        SketchMode::L1 => {
            if p >= 2.0 {
                return Err(Error::InvalidParameter(format!(
                    "L1 mode requires p < 2, got {p}"
                )));
            }
            let lg2 = df.log2() * df.log2();
            (params.c_ose * df * lg2, lg2.ceil() as usize)
        }
        SketchMode::DensePStable => {
            if p > 2.0 {
                return Err(Error::InvalidParameter(format!(
                    "DensePStable mode requires p <= 2, got {p}"
                )));
            }
            (params.c_dense * df * df.log2(), 1usize)
        }
        SketchMode::Identity => (n as f64, 1usize),
    };
    if !m_raw.is_finite() || m_raw > MAX_ROWS {
        return Err(Error::InvalidParameter(format!(
            "sketch row count {m_raw:.3e} is impractical; set practical_cap"
        )));
    }
    let m = round_up_to_multiple((m_raw.ceil() as usize).max(s), s);
    Ok((m, s))
}

/// The hashed sign matrix S: per column i, one nonzero sigma(i,j)/sqrt(s) in
/// each of the s row blocks of size m/s, at block offset h(i,j).
#[derive(Debug, Clone)]
pub struct HashOse {
    pub m: usize,
    pub s: usize,
    block: usize,
    h: Vec<u32>,
    sign: Vec<i8>,
    inv_sqrt_s: f64,
}

impl HashOse {
    fn build(n: usize, m: usize, s: usize, master_seed: u64) -> Self {
        let block = m / s;
        let mut h_stream = Stream::new(master_seed, "ose.h");
        let mut sigma_stream = Stream::new(master_seed, "ose.sigma");
        let mut h = Vec::with_capacity(n * s);
        let mut sign = Vec::with_capacity(n * s);
        for _ in 0..n {
            for _ in 0..s {
                h.push((h_stream.next_u64() % block as u64) as u32);
                sign.push(if sigma_stream.next_u64() >> 63 == 0 { 1 } else { -1 });
            }
        }
        HashOse {
            m,
            s,
            block,
            h,
            sign,
            inv_sqrt_s: 1.0 / (s as f64).sqrt(),
        }
    }

    fn identity(n: usize) -> Self {
        HashOse {
            m: n,
            s: 1,
            block: n,
            h: (0..n as u32).collect(),
            sign: vec![1; n],
            inv_sqrt_s: 1.0,
        }
    }

    /// The nonzero positions and values of column i of S.
    pub fn rows_of(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.s).map(move |j| {
            (
                j * self.block + self.h[i * self.s + j] as usize,
                f64::from(self.sign[i * self.s + j]) * self.inv_sqrt_s,
            )
        })
    }
}

/// The diagonal D: entry i is u_i^(-1/p) for i.i.d. unit exponentials u_i.
#[derive(Debug, Clone)]
pub struct ExpDiagonal {
    pub p: f64,
    u: Vec<f64>,
    scale: Vec<f64>,
}

impl ExpDiagonal {
    fn build(n: usize, p: f64, master_seed: u64) -> Self {
        let mut stream = Stream::new(master_seed, "diag.u");
        let u: Vec<f64> = (0..n).map(|_| exp_sample(&mut stream)).collect();
        let scale = u.iter().map(|&x| x.powf(-1.0 / p)).collect();
        ExpDiagonal { p, u, scale }
    }

    fn unit(n: usize, p: f64) -> Self {
        ExpDiagonal {
            p,
            u: vec![1.0; n],
            scale: vec![1.0; n],
        }
    }

    /// The underlying exponentials u_i.
    pub fn exponentials(&self) -> &[f64] {
        &self.u
    }

    /// Diagonal entries u_i^(-1/p).
    pub fn entries(&self) -> &[f64] {
        &self.scale
    }
}

/// Everything needed to rebuild an operator deterministically; what the CLI
/// reports and tests serialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchDescriptor {
    pub mode: SketchMode,
    pub p: f64,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub s: usize,
    pub master_seed: u64,
    pub params: SketchParams,
}

/// A realized sketching operator Pi mapping R^n to R^m.
#[derive(Debug, Clone)]
pub struct SketchOperator {
    pub mode: SketchMode,
    pub p: f64,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub s: usize,
    pub master_seed: u64,
    params: SketchParams,
    hash: Option<HashOse>,
    diag: Option<ExpDiagonal>,
    dense: Option<DenseMatrix>,
}

impl SketchOperator {
    pub fn descriptor(&self) -> SketchDescriptor {
        SketchDescriptor {
            mode: self.mode,
            p: self.p,
            n: self.n,
            d: self.d,
            m: self.m,
            s: self.s,
            master_seed: self.master_seed,
            params: self.params,
        }
    }

    pub fn hash(&self) -> Option<&HashOse> {
        self.hash.as_ref()
    }

    pub fn diagonal(&self) -> Option<&ExpDiagonal> {
        self.diag.as_ref()
    }

    pub fn dense_entries(&self) -> Option<&DenseMatrix> {
        self.dense.as_ref()
    }
}

/// Builds the operator for `mode` over n input rows with d downstream
/// columns (d only sizes derived row counts, not the operator itself).
pub fn build_sketch(
    mode: SketchMode,
    p: f64,
    n: usize,
    d: usize,
    master_seed: u64,
    params: &SketchParams,
) -> Result<SketchOperator> {
    let (m, s) = target_dim(mode, n, d, p, params)?;
    build_with_dims(mode, p, n, d, m, s, master_seed, params)
}

/// Rebuilds an operator from its descriptor; bit-identical to the original.
pub fn rebuild_sketch(desc: &SketchDescriptor) -> Result<SketchOperator> {
    build_with_dims(
        desc.mode,
        desc.p,
        desc.n,
        desc.d,
        desc.m,
        desc.s,
        desc.master_seed,
        &desc.params,
    )
}

#[allow(clippy::too_many_arguments)]
fn build_with_dims(
    mode: SketchMode,
    p: f64,
    n: usize,
    d: usize,
    m: usize,
    s: usize,
    master_seed: u64,
    params: &SketchParams,
) -> Result<SketchOperator> {
    let (hash, diag, dense) = match mode {
        SketchMode::HighP | SketchMode::LowP | SketchMode::L1 => (
            Some(HashOse::build(n, m, s, master_seed)),
            Some(ExpDiagonal::build(n, p, master_seed)),
            None,
        ),
        SketchMode::DensePStable => {
            let mut stream = Stream::new(master_seed, "dense.entries");
            let mut entries = DenseMatrix::zeros(m, n);
            for v in entries.data.iter_mut() {
                *v = pstable_sample(p, &mut stream)?;
            }
            (None, None, Some(entries))
        }
        SketchMode::Identity => (Some(HashOse::identity(n)), Some(ExpDiagonal::unit(n, p)), None),
    };
    Ok(SketchOperator {
        mode,
        p,
        n,
        d,
        m,
        s,
        master_seed,
        params: *params,
        hash,
        diag,
        dense,
    })
}

/// Pi * M in one pass over the nonzeros of M.
pub fn apply_sketch(op: &SketchOperator, m: &SparseMatrix) -> Result<DenseMatrix> {
    if m.n_rows != op.n {
        return Err(Error::DimensionMismatch(format!(
            "operator built for {} rows, matrix has {}",
            op.n, m.n_rows
        )));
    }
    Ok(apply_sketch_range(op, m, 0, m.n_rows))
}

/// Applies S alone (unit diagonal) for hashed modes: the plain l2-style
/// sign-hash operator. Used by the orthonormal-basis sanity checks.
pub fn apply_hash_only(op: &SketchOperator, m: &SparseMatrix) -> Result<DenseMatrix> {
    let hash = op.hash.as_ref().ok_or_else(|| {
        Error::InvalidParameter("apply_hash_only requires a hashed mode".into())
    })?;
    if m.n_rows != op.n {
        return Err(Error::DimensionMismatch(format!(
            "operator built for {} rows, matrix has {}",
            op.n, m.n_rows
        )));
    }
    let unit = ExpDiagonal::unit(op.n, op.p);
    Ok(reduce_rows(m, 0, m.n_rows, &mut |out, lo, hi| {
        scatter_hashed(out, m, lo, hi, hash, &unit)
    }, hash.m))
}

/// Shard-local application over the row range [lo, hi); rows outside the
/// range are ignored. Partials over halving-aligned ranges add up (in
/// machine order) to exactly the full-range result.
pub(crate) fn apply_sketch_range(
    op: &SketchOperator,
    m: &SparseMatrix,
    lo: usize,
    hi: usize,
) -> DenseMatrix {
    match op.mode {
        SketchMode::HighP | SketchMode::LowP | SketchMode::L1 | SketchMode::Identity => {
            let hash = op.hash.as_ref().unwrap();
            let diag = op.diag.as_ref().unwrap();
            reduce_rows(m, lo, hi, &mut |out, a, b| {
                scatter_hashed(out, m, a, b, hash, diag)
            }, op.m)
        }
        SketchMode::DensePStable => {
            let dense = op.dense.as_ref().unwrap();
            reduce_rows(m, lo, hi, &mut |out, a, b| {
                scatter_dense(out, m, a, b, dense)
            }, op.m)
        }
    }
}

/// Fixed-order reduction over row ranges: halve down to runs of at most
/// REDUCE_LEAF rows, scatter each run left to right, add partials pairwise.
fn reduce_rows(
    m: &SparseMatrix,
    lo: usize,
    hi: usize,
    scatter: &mut dyn FnMut(&mut DenseMatrix, usize, usize),
    out_rows: usize,
) -> DenseMatrix {
    if hi - lo <= REDUCE_LEAF {
        let mut out = DenseMatrix::zeros(out_rows, m.n_cols);
        scatter(&mut out, lo, hi);
        return out;
    }
    let mid = lo + (hi - lo).div_ceil(2);
    let mut left = reduce_rows(m, lo, mid, scatter, out_rows);
    let right = reduce_rows(m, mid, hi, scatter, out_rows);
    left.add_assign(&right);
    left
}

fn scatter_hashed(
    out: &mut DenseMatrix,
    m: &SparseMatrix,
    lo: usize,
    hi: usize,
    hash: &HashOse,
    diag: &ExpDiagonal,
) {
    for i in lo..hi {
        let (cols, vals) = m.row(i);
        if cols.is_empty() {
            continue;
        }
        let d_i = diag.scale[i];
        for j in 0..hash.s {
            let row = j * hash.block + hash.h[i * hash.s + j] as usize;
            let coeff = f64::from(hash.sign[i * hash.s + j]) * hash.inv_sqrt_s * d_i;
            let dst = out.row_mut(row);
            for (&c, &v) in cols.iter().zip(vals) {
                dst[c] += coeff * v;
            }
        }
    }
}

fn scatter_dense(
    out: &mut DenseMatrix,
    m: &SparseMatrix,
    lo: usize,
    hi: usize,
    dense: &DenseMatrix,
) {
    for i in lo..hi {
        let (cols, vals) = m.row(i);
        if cols.is_empty() {
            continue;
        }
        for r in 0..dense.n_rows {
            let coeff = dense.at(r, i);
            let dst = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                dst[c] += coeff * v;
            }
        }
    }
}

/// Norm used on the sketched side of a distortion ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutNorm {
    Inf,
    Two,
    One,
}

impl OutNorm {
    pub fn exponent(&self) -> f64 {
        match self {
            OutNorm::Inf => f64::INFINITY,
            OutNorm::Two => 2.0,
            OutNorm::One => 1.0,
        }
    }
}

impl std::str::FromStr for OutNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "infinity" => Ok(OutNorm::Inf),
            "2" | "two" => Ok(OutNorm::Two),
            "1" | "one" => Ok(OutNorm::One),
            other => Err(Error::InvalidParameter(format!("unknown out norm {other:?}"))),
        }
    }
}

/// Per-direction distortion ratios ||Pi M x||_out / ||M x||_p over the
/// supplied directions plus all d coordinate directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    pub in_p: f64,
    pub out_norm: OutNorm,
    /// "dir:k" for supplied directions, "coord:j" for coordinate ones.
    pub labels: Vec<String>,
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub max_over_min: f64,
}

pub fn distortion_report(
    op: &SketchOperator,
    m: &SparseMatrix,
    in_p: f64,
    out_norm: OutNorm,
    directions: &[Vec<f64>],
) -> Result<DistortionReport> {
    if !in_p.is_finite() || in_p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "distortion_report requires finite p >= 1, got {in_p}"
        )));
    }
    let sketched = apply_sketch(op, m)?;
    let d = m.n_cols;
    let out_p = out_norm.exponent();
    let mut labels = Vec::with_capacity(directions.len() + d);
    let mut ratios = Vec::with_capacity(directions.len() + d);
    let mut eval = |label: String, x: &[f64]| -> Result<()> {
        if x.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "direction {label} has length {}, expected {d}",
                x.len()
            )));
        }
        let den = pnorm_unchecked(&m.matvec(x), in_p);
        if den == 0.0 {
            return Err(Error::ZeroDirection(format!(
                "||M x||_p = 0 for direction {label}"
            )));
        }
        let num = pnorm_unchecked(&sketched.matvec(x), out_p);
        labels.push(label);
        ratios.push(num / den);
        Ok(())
    };
    for (k, x) in directions.iter().enumerate() {
        eval(format!("dir:{k}"), x)?;
    }
    let mut e = vec![0.0; d];
    for j in 0..d {
        e[j] = 1.0;
        eval(format!("coord:{j}"), &e)?;
        e[j] = 0.0;
    }
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().cloned().fold(0.0f64, f64::max);
    Ok(DistortionReport {
        in_p,
        out_norm,
        labels,
        ratios,
        min_ratio,
        max_ratio,
        max_over_min: max_ratio / min_ratio,
    })
}
