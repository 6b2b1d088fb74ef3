//! Well-conditioned bases for lp row sampling.
//!
//! A certificate here is an invertible upper-triangular R such that
//! U = M R^{-1} is (alpha, beta, p)-well-conditioned: the elementwise p-norm
//! of U is at most alpha, and ||x||_q <= beta ||U x||_p for every x, with q
//! the dual exponent. Two constructions are provided: a plain QR factor
//! (cheap, quality depends on the matrix) and a minimum-volume enclosing
//! ellipsoid of the symmetrized rows (quality bounded by the dimension
//! alone). Certificates carry claimed bounds; [`verify_well_conditioned`]
//! measures both quantities against the matrix and checks the claims.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    apply_r_inverse, cholesky, dual_exponent, pnorm_unchecked, qr_thin, solve_lower_into,
    DenseMatrix, SparseMatrix,
};
use crate::randsource::{normal_sample, Stream};

/// Relative slack used when checking measured values against claimed bounds;
/// absorbs roundoff in the triangular solves.
const CLAIM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CondMethod {
    Qr,
    Mvee {
        kappa_max: f64,
        iterations: usize,
        tol: f64,
    },
}

/// An upper-triangular change of basis with claimed conditioning bounds for
/// the matrix it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellCondCertificate {
    pub r: DenseMatrix,
    pub p: f64,
    pub method: CondMethod,
    /// Claimed bound on the elementwise p-norm of M R^{-1}.
    pub alpha_bound: f64,
    /// Claimed bound on the product alpha * beta.
    pub alphabeta_bound: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "conditioning requires finite p >= 1, got {p}"
        )));
    }
    Ok(())
}

/// QR-based certificate: R from a thin Householder factorization, so
/// M R^{-1} is the orthonormal factor Q.
///
/// alpha is the elementwise p-norm of Q, computed outright. For p <= 2 the
/// dual bound is beta <= 1, since ||x||_q <= ||x||_2 = ||Qx||_2 <= ||Qx||_p.
/// For p > 2 both inequalities pick up dimension factors and the claim
/// becomes beta <= (n d)^(1/2 - 1/p).
pub fn qr_conditioner(m: &DenseMatrix, p: f64) -> Result<WellCondCertificate> {
    check_p(p)?;
    let (q, r) = qr_thin(m)?;
    let alpha = q.elementwise_pnorm(p)?;
    let beta = if p <= 2.0 {
        1.0
    } else {
        ((m.n_rows * m.n_cols) as f64).powf(0.5 - 1.0 / p)
    };
    Ok(WellCondCertificate {
        r,
        p,
        method: CondMethod::Qr,
        alpha_bound: alpha,
        alphabeta_bound: alpha * beta,
    })
}

/// Ellipsoid-based certificate via the minimum-volume ellipsoid of the
/// points {+-row_i}, computed with a Frank-Wolfe ascent on the log-volume
/// (Khachiyan's scheme) with away steps.
///
/// With weights u on the rows, M_u = sum_i u_i a_i a_i^T and
/// kappa_i = a_i^T M_u^{-1} a_i. R is the transposed Cholesky factor of
/// kappa_max * M_u, which puts every row of U = M R^{-1} inside the unit
/// 2-ball and guarantees ||U x||_inf >= ||x||_2 / sqrt(kappa_max) for all x
/// (the weighted quadratic mean of the row inner products never exceeds
/// their maximum). Iterating until kappa_max <= d (1 + tol) makes the beta
/// claim sqrt(d (1 + tol)) up to the dual-norm dimension factor; the row
/// bound costs n^(1/p) in alpha.
///
/// Fails with [`Error::RankDeficient`] when the rows do not span, and
/// [`Error::NoConvergence`] when the iteration budget runs out first; the
/// caller may retry with a larger `max_iter`.
pub fn mvee_conditioner(
    m: &DenseMatrix,
    p: f64,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<WellCondCertificate> {
    check_p(p)?;
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "mvee_conditioner requires tol > 0, got {tol}"
        )));
    }
    let (n, d) = (m.n_rows, m.n_cols);
    if n < d {
        return Err(Error::InvalidParameter(format!(
            "mvee_conditioner needs at least d = {d} rows, got {n}"
        )));
    }
    let budget = max_iter
        .unwrap_or_else(|| (50.0 * d as f64 * (n as f64).ln()).ceil().max(1000.0) as usize);

    let mut u = vec![1.0 / n as f64; n];
    let mut kappa = vec![0.0; n];
    let mut iterations = 0usize;
    let mut kappa_max = f64::INFINITY;
    let mut converged = false;
    for it in 0..=budget {
        iterations = it;
        let mu = weighted_gram(m, &u);
        let l = cholesky(&mu).map_err(|_| {
            if it == 0 {
                Error::RankDeficient("rows do not span; ellipsoid is degenerate".into())
            } else {
                Error::NoConvergence("ellipsoid update lost positive definiteness".into())
            }
        })?;
        // kappa_i = || L^{-1} a_i ||^2
        let mut z = vec![0.0; d];
        let mut i_max = 0usize;
        let mut i_min = 0usize;
        let mut k_min_active = f64::INFINITY;
        kappa_max = 0.0;
        for i in 0..n {
            solve_lower_into(&l, m.row(i), &mut z);
            let k: f64 = z.iter().map(|v| v * v).sum();
            kappa[i] = k;
            if k > kappa_max {
                kappa_max = k;
                i_max = i;
            }
            if u[i] > 0.0 && k < k_min_active {
                k_min_active = k;
                i_min = i;
            }
        }
        if kappa_max <= d as f64 * (1.0 + tol) {
            converged = true;
            break;
        }
        if it == budget {
            break;
        }
        let df = d as f64;
        let gap_toward = kappa_max - df;
        let gap_away = df - k_min_active;
        if gap_toward >= gap_away {
            let lam = gap_toward / (df * (kappa_max - 1.0));
            for w in u.iter_mut() {
                *w *= 1.0 - lam;
            }
            u[i_max] += lam;
        } else {
            let k = k_min_active;
            let cap = u[i_min] / (1.0 - u[i_min]).max(f64::MIN_POSITIVE);
            let lam = if k > 1.0 + 1e-12 {
                (gap_away / (df * (k - 1.0))).min(cap)
            } else {
                cap
            };
            for w in u.iter_mut() {
                *w *= 1.0 + lam;
            }
            u[i_min] = (u[i_min] - lam).max(0.0);
        }
        let total: f64 = u.iter().sum();
        for w in u.iter_mut() {
            *w /= total;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "ellipsoid ascent at kappa_max = {kappa_max:.6} after {budget} iterations \
             (target {:.6})",
            m.n_cols as f64 * (1.0 + tol)
        )));
    }

    // G = kappa_max * M_u; R its upper Cholesky factor. Rows of U then have
    // squared 2-norm kappa_i / kappa_max <= 1.
    let mut g = weighted_gram(m, &u);
    for v in g.data.iter_mut() {
        *v *= kappa_max;
    }
    let r = cholesky(&g)
        .map_err(|_| Error::NoConvergence("final ellipsoid factor is not definite".into()))?
        .transpose();

    let df = d as f64;
    let nf = n as f64;
    let alpha = if p >= 2.0 {
        nf.powf(1.0 / p)
    } else {
        nf.powf(1.0 / p) * df.powf(1.0 / p - 0.5)
    };
    let beta = df.powf((0.5 - 1.0 / p).max(0.0)) * kappa_max.sqrt();
    Ok(WellCondCertificate {
        r,
        p,
        method: CondMethod::Mvee {
            kappa_max,
            iterations,
            tol,
        },
        alpha_bound: alpha,
        alphabeta_bound: alpha * beta,
    })
}

/// sum_i u_i a_i a_i^T
fn weighted_gram(m: &DenseMatrix, u: &[f64]) -> DenseMatrix {
    let d = m.n_cols;
    let mut g = DenseMatrix::zeros(d, d);
    for (i, &w) in u.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = m.row(i);
        for a in 0..d {
            let wa = w * row[a];
            for b in a..d {
                g.data[a * d + b] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            g.data[a * d + b] = g.data[b * d + a];
        }
    }
    g
}

/// Unit directions with independent normal coordinates.
pub fn sample_directions(d: usize, count: usize, stream: &mut Stream) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| loop {
            let mut v: Vec<f64> = (0..d).map(|_| normal_sample(stream)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for x in v.iter_mut() {
                    *x /= norm;
                }
                return v;
            }
        })
        .collect()
}

/// Measured conditioning of M R^{-1} against a certificate's claims.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondVerification {
    /// Elementwise p-norm of M R^{-1}, computed exactly column by column.
    pub alpha_exact: f64,
    /// max ||x||_q / ||M R^{-1} x||_p over the probe directions; a lower
    /// estimate of the true beta.
    pub beta_lower_est: f64,
    pub product: f64,
    pub alpha_ok: bool,
    pub product_ok: bool,
    pub n_directions: usize,
}

/// Measures alpha exactly and beta from below (d coordinate directions plus
/// `n_dirs` sampled ones) and compares both against the certificate.
pub fn verify_well_conditioned(
    m: &SparseMatrix,
    cert: &WellCondCertificate,
    n_dirs: usize,
    seed: u64,
) -> Result<CondVerification> {
    let d = cert.r.n_rows;
    if m.n_cols != d {
        return Err(Error::DimensionMismatch(format!(
            "certificate is {d}-dimensional, matrix has {} columns",
            m.n_cols
        )));
    }
    let p = cert.p;
    let q = dual_exponent(p);
    let mut alpha_sum = 0.0;
    let mut beta_lower: f64 = 0.0;
    let mut probe = |x: &[f64]| -> Result<f64> {
        let ux = apply_r_inverse(m, &cert.r, x)?;
        let norm_p = pnorm_unchecked(&ux, p);
        if norm_p == 0.0 {
            return Err(Error::RankDeficient(
                "M R^{-1} annihilates a probe direction".into(),
            ));
        }
        Ok(pnorm_unchecked(x, q) / norm_p)
    };
    let mut e = vec![0.0; d];
    for j in 0..d {
        e[j] = 1.0;
        let col = apply_r_inverse(m, &cert.r, &e)?;
        alpha_sum += col.iter().map(|v| v.abs().powf(p)).sum::<f64>();
        beta_lower = beta_lower.max(probe(&e)?);
        e[j] = 0.0;
    }
    let mut stream = Stream::new(seed, "cond.verify");
    for x in sample_directions(d, n_dirs, &mut stream) {
        beta_lower = beta_lower.max(probe(&x)?);
    }
    let alpha_exact = alpha_sum.powf(1.0 / p);
    let product = alpha_exact * beta_lower;
    Ok(CondVerification {
        alpha_exact,
        beta_lower_est: beta_lower,
        product,
        alpha_ok: alpha_exact <= cert.alpha_bound * (1.0 + CLAIM_SLACK),
        product_ok: product <= cert.alphabeta_bound * (1.0 + CLAIM_SLACK),
        n_directions: d + n_dirs,
    })
}
