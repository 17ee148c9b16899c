//! Independent reference implementations used only by tests.
//!
//! None of these share code paths with the library: the CART oracle
//! enumerates every (feature, threshold) pair and recomputes child variances
//! from scratch, least squares goes through the normal equations with
//! Gaussian elimination, and eigenpairs come from cyclic Jacobi rotations on
//! an explicitly formed covariance matrix.

#![allow(dead_code, clippy::needless_range_loop)]

/// Greedy CART tree as nested enum, grown on all rows (no bootstrap, all
/// features considered at every node).
#[derive(Debug, Clone, PartialEq)]
pub enum OracleTree {
    Split {
        feature: usize,
        lo: f64,
        hi: f64,
        left: Box<OracleTree>,
        right: Box<OracleTree>,
    },
    Leaf(f64),
}

impl OracleTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            OracleTree::Leaf(v) => *v,
            OracleTree::Split {
                feature,
                lo,
                left,
                right,
                ..
            } => {
                // Any threshold in [lo, hi) routes the training values alike.
                if row[*feature] <= *lo {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

fn mean(ys: &[f64]) -> f64 {
    let mut s = 0.0;
    for y in ys {
        s += y;
    }
    s / ys.len() as f64
}

fn sse(ys: &[f64]) -> f64 {
    let m = mean(ys);
    ys.iter().map(|y| (y - m) * (y - m)).sum()
}

/// `rows[i]` is a feature vector, `ys[i]` its target.
pub fn cart_oracle(rows: &[Vec<f64>], ys: &[f64], idx: &[usize], min_leaf: usize) -> OracleTree {
    let targets: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let all_equal = targets.iter().all(|&y| y == targets[0]);
    if idx.len() <= min_leaf || all_equal {
        return OracleTree::Leaf(if all_equal { targets[0] } else { mean(&targets) });
    }
    let p = rows[0].len();
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for f in 0..p {
        let mut values: Vec<f64> = idx.iter().map(|&i| rows[i][f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let left: Vec<f64> = idx.iter().filter(|&&i| rows[i][f] <= lo).map(|&i| ys[i]).collect();
            let right: Vec<f64> = idx.iter().filter(|&&i| rows[i][f] > lo).map(|&i| ys[i]).collect();
            let total = sse(&left) + sse(&right);
            if best.map_or(true, |b| total < b.0) {
                best = Some((total, f, lo, hi));
            }
        }
    }
    match best {
        None => OracleTree::Leaf(mean(&targets)),
        Some((_, feature, lo, hi)) => {
            let left: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][feature] <= lo).collect();
            let right: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][feature] > lo).collect();
            OracleTree::Split {
                feature,
                lo,
                hi,
                left: Box::new(cart_oracle(rows, ys, &left, min_leaf)),
                right: Box::new(cart_oracle(rows, ys, &right, min_leaf)),
            }
        }
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x
}

/// Least squares with intercept via `(A^T A) beta = A^T y`, `A = [1 | X]`.
/// Returns `(intercept, coefficients)`.
pub fn normal_equations(rows: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
    let p = rows[0].len() + 1;
    let aug: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (r, y) in aug.iter().zip(ys) {
        for i in 0..p {
            aty[i] += r[i] * y;
            for j in 0..p {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let beta = gauss_solve(ata, aty);
    (beta[0], beta[1..].to_vec())
}

/// Sample covariance (denominator n - 1) of row vectors.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let p = rows[0].len();
    let means: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; p]; p];
    for r in rows {
        for i in 0..p {
            for j in 0..p {
                c[i][j] += (r[i] - means[i]) * (r[j] - means[j]);
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    c
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// `(eigenvalues, eigenvectors)` sorted by decreasing eigenvalue, each vector
/// flipped so its largest-magnitude entry is positive.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut col: Vec<f64> = (0..n).map(|r| v[r][i]).collect();
            let big = col
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    (values, vectors)
}
