//! Small statistical helpers shared by the invariant checks and the
//! `verify` subcommand.

/// Two-sample Kolmogorov-Smirnov statistic: sup_x |F_a(x) - F_b(x)| over the
/// empirical CDFs of the two samples. Inputs need not be sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Fraction of values less than or equal to `t`.
pub fn empirical_cdf_at(sample: &[f64], t: f64) -> f64 {
    assert!(!sample.is_empty());
    sample.iter().filter(|&&x| x <= t).count() as f64 / sample.len() as f64
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
/// ascending. A verification helper (singular-value checks on sketched
/// bases), not a general-purpose eigensolver.
pub fn sym_eigenvalues(a: &crate::linalg::DenseMatrix) -> Vec<f64> {
    assert_eq!(a.n_rows, a.n_cols, "symmetric eigenvalues need a square matrix");
    let d = a.n_rows;
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..d {
            for j in i + 1..d {
                off = off.max(m.at(i, j).abs());
            }
        }
        let scale = (0..d).fold(0.0f64, |s, i| s.max(m.at(i, i).abs())).max(1e-300);
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m.at(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = m.at(k, p);
                    let akq = m.at(k, q);
                    *m.at_mut(k, p) = c * akp - s * akq;
                    *m.at_mut(k, q) = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = m.at(p, k);
                    let aqk = m.at(q, k);
                    *m.at_mut(p, k) = c * apk - s * aqk;
                    *m.at_mut(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..d).map(|i| m.at(i, i)).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}
