//! Small dense helpers: least squares, finite-difference weights, complex LU.

use num_complex::Complex64;

/// Least-squares coefficients for `y ≈ sum_j c_j cols[j]`, by modified
/// Gram–Schmidt with one re-orthogonalization pass.
pub fn lstsq(cols: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let m = cols.len();
    let n = y.len();
    if m == 0 || n < m || cols.iter().any(|c| c.len() != n) {
        return None;
    }
    let mut q: Vec<Vec<f64>> = cols.to_vec();
    let mut r = vec![vec![0.0; m]; m];
    for j in 0..m {
        for _pass in 0..2 {
            for i in 0..j {
                let d: f64 = (0..n).map(|t| q[i][t] * q[j][t]).sum();
                r[i][j] += d;
                for t in 0..n {
                    q[j][t] -= d * q[i][t];
                }
            }
        }
        let norm = q[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale || norm == 0.0 {
            return None;
        }
        r[j][j] = norm;
        for t in 0..n {
            q[j][t] /= norm;
        }
    }
    let qty: Vec<f64> = (0..m).map(|j| (0..n).map(|t| q[j][t] * y[t]).sum()).collect();
    let mut c = vec![0.0; m];
    for j in (0..m).rev() {
        let mut s = qty[j];
        for i in j + 1..m {
            s -= r[j][i] * c[i];
        }
        c[j] = s / r[j][j];
    }
    Some(c)
}

/// Fornberg's weights: `w[d][i]` approximates the `d`-th derivative at `x0`
/// from samples at `xs[i]`, for `d = 0..=max_d`.
pub fn fd_weights(x0: f64, xs: &[f64], max_d: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_d + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_d);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// LU factorization with partial pivoting of a square complex matrix.
pub struct ComplexLu {
    lu: Vec<Vec<Complex64>>,
    perm: Vec<usize>,
    sign: f64,
}

impl ComplexLu {
    pub fn new(mut a: Vec<Vec<Complex64>>) -> Option<Self> {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let p = (col..n).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))?;
            if a[p][col].norm() == 0.0 {
                return None;
            }
            if p != col {
                a.swap(p, col);
                perm.swap(p, col);
                sign = -sign;
            }
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                a[row][col] = f;
                for j in col + 1..n {
                    let v = a[col][j];
                    a[row][j] -= f * v;
                }
            }
        }
        Some(ComplexLu { lu: a, perm, sign })
    }

    pub fn det(&self) -> Complex64 {
        let mut d = Complex64::new(self.sign, 0.0);
        for i in 0..self.lu.len() {
            d *= self.lu[i][i];
        }
        d
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.len();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let v = x[j];
                x[i] -= self.lu[i][j] * v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = x[j];
                x[i] -= self.lu[i][j] * v;
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    /// Columns of the inverse, returned as a row-major matrix.
    pub fn inverse(&self) -> Vec<Vec<Complex64>> {
        let n = self.lu.len();
        let mut inv = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for j in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e);
            for i in 0..n {
                inv[i][j] = col[i];
            }
        }
        inv
    }
}
