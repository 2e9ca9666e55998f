//! Small dense vector/matrix helpers shared by the solver modules.
//!
//! Everything here works on plain `&[f64]` slices and `Vec<Vec<f64>>`
//! matrices; problem sizes are tens of assets, so no BLAS is warranted.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

/// a + s*b
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Eigenvalues of a symmetric matrix, ascending, by the cyclic Jacobi method.
///
/// Deterministic and exact enough (off-diagonal mass is driven below
/// `1e-14 * frobenius`) for the PSD certificates used in tests; matrices are
/// at most a few dozen rows in every workload here.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m[0][0]];
    }
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let fro: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    let tol = 1e-14 * (1.0 + fro);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &[Vec<f64>]) -> f64 {
    symmetric_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Solve the dense system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns None when a pivot falls below roundoff scale, which
/// callers treat as "singular enough" and handle with a fallback.
pub fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let scale: f64 = m
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let pivot_floor = 1e-14 * (1.0 + scale);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| m[p][col].abs().partial_cmp(&m[q][col].abs()).unwrap())?;
        if m[pivot_row][col].abs() <= pivot_floor {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Central-difference Hessian of a scalar function; used by tests as an
/// oracle independent of formal differentiation.
pub fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        out[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in (i + 1)..n {
            xp[i] = x[i] + h;
            xp[j] = x[j] + h;
            let fpp = f(&xp);
            xp[j] = x[j] - h;
            let fpm = f(&xp);
            xp[i] = x[i] - h;
            let fmm = f(&xp);
            xp[j] = x[j] + h;
            let fmp = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_matches_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-12, "min eig {} != 1", e[0]);
        assert!((e[1] - 3.0).abs() < 1e-12, "max eig {} != 3", e[1]);
    }

    #[test]
    fn jacobi_diagonal_passthrough() {
        let m = vec![
            vec![3.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 7.0],
        ];
        let e = symmetric_eigenvalues(&m);
        assert_eq!(e, vec![-1.0, 3.0, 7.0]);
    }

    #[test]
    fn solve_linear_recovers_known_solution() {
        // Built from x = (1, -2, 3): b = A x.
        let a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ];
        let b = vec![2.0, -8.0, 8.0];
        let x = solve_linear(&a, &b).expect("nonsingular system");
        for (got, want) in x.iter().zip([1.0, -2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "component {got} != {want}");
        }
    }

    #[test]
    fn solve_linear_rejects_singular_matrix() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(
            solve_linear(&a, &[1.0, 2.0]).is_none(),
            "rank-1 matrix should be reported as singular"
        );
    }

    #[test]
    fn solve_linear_handles_indefinite_saddle_systems() {
        // KKT-style block [[H, a], [a^T, 0]] is indefinite but nonsingular.
        let a = vec![
            vec![2.0, 0.0, 1.0],
            vec![0.0, 6.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        let b = vec![1.0, 0.0, 0.0];
        let x = solve_linear(&a, &b).expect("saddle system is nonsingular");
        // Residual check instead of hand-solved values.
        for (row, &bi) in a.iter().zip(&b) {
            let r: f64 = row.iter().zip(&x).map(|(m, v)| m * v).sum::<f64>() - bi;
            assert!(r.abs() < 1e-12, "residual {r} too large");
        }
    }

    #[test]
    fn fd_hessian_of_quadratic_is_exact() {
        // f(x) = x0^2 + 3 x0 x1 has constant Hessian [[2,3],[3,0]].
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1];
        let h = fd_hessian(f, &[0.4, -0.2], 1e-3);
        assert!((h[0][0] - 2.0).abs() < 1e-6);
        assert!((h[0][1] - 3.0).abs() < 1e-6);
        assert!((h[1][1] - 0.0).abs() < 1e-6);
    }
}
