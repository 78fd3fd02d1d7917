//! Truncated Taylor arithmetic in one variable.
//!
//! A [`Jet`] stores the Taylor coefficients `c[0..=4]` of a function at a
//! point, so `f(x + h) = c0 + c1 h + ... + c4 h^4 + O(h^5)`. Composing
//! closed-form expressions on jets gives exact derivatives up to order four,
//! which is what the curvature formulas need.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number of stored coefficients (orders 0 through 4).
pub const ORDER: usize = 5;

const FACT: [f64; ORDER] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [f64; ORDER],
}

impl Jet {
    pub fn constant(x: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = x;
        Jet { c }
    }

    /// The identity function seeded at `x`.
    pub fn var(x: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = x;
        c[1] = 1.0;
        Jet { c }
    }

    /// Builds a jet from derivative values `f, f', f'', f''', f''''`.
    pub fn from_derivs(d: [f64; ORDER]) -> Self {
        let mut c = [0.0; ORDER];
        for i in 0..ORDER {
            c[i] = d[i] / FACT[i];
        }
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Derivatives `f, f', f'', f''', f''''`.
    pub fn derivs(&self) -> [f64; ORDER] {
        let mut d = [0.0; ORDER];
        for i in 0..ORDER {
            d[i] = self.c[i] * FACT[i];
        }
        d
    }

    pub fn scale(self, a: f64) -> Self {
        let mut c = self.c;
        for x in c.iter_mut() {
            *x *= a;
        }
        Jet { c }
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0) / self
    }

    pub fn exp(self) -> Self {
        // e' = e * a'  =>  k e_k = sum_{j=1..k} j a_j e_{k-j}
        let a = self.c;
        let mut e = [0.0; ORDER];
        e[0] = a[0].exp();
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e }
    }

    pub fn ln(self) -> Self {
        // l' = a' / a  =>  a0 k l_k = k a_k - sum_{j=1..k-1} j l_j a_{k-j}
        let a = self.c;
        let mut l = [0.0; ORDER];
        l[0] = a[0].ln();
        for k in 1..ORDER {
            let mut s = k as f64 * a[k];
            for j in 1..k {
                s -= j as f64 * l[j] * a[k - j];
            }
            l[k] = s / (k as f64 * a[0]);
        }
        Jet { c: l }
    }

    /// `self^p` for real `p`; requires a positive constant term unless `p`
    /// is a non-negative integer.
    pub fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Jet::constant(1.0);
        }
        if p.fract() == 0.0 && p > 0.0 && p <= 8.0 {
            let mut r = Jet::constant(1.0);
            for _ in 0..p as usize {
                r = r * self;
            }
            return r;
        }
        // b = a^p  =>  a0 k b_k = sum_{j=1..k} (p j - (k - j)) a_j b_{k-j}
        let a = self.c;
        let mut b = [0.0; ORDER];
        b[0] = a[0].powf(p);
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += (p * j as f64 - (k - j) as f64) * a[j] * b[k - j];
            }
            b[k] = s / (k as f64 * a[0]);
        }
        Jet { c: b }
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.c;
        for i in 0..ORDER {
            c[i] += o.c[i];
        }
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let mut c = self.c;
        for i in 0..ORDER {
            c[i] -= o.c[i];
        }
        Jet { c }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; ORDER];
        for i in 0..ORDER {
            for j in 0..ORDER - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut q = [0.0; ORDER];
        for k in 0..ORDER {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= o.c[j] * q[k - j];
            }
            q[k] = s / o.c[0];
        }
        Jet { c: q }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, x: f64) -> Jet {
        self.c[0] += x;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, x: f64) -> Jet {
        self.c[0] -= x;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, x: f64) -> Jet {
        self.scale(x)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, x: f64) -> Jet {
        self.scale(1.0 / x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn exp_of_linear_is_exp() {
        let d = Jet::var(0.7).exp().derivs();
        for x in d {
            assert!(close(x, 0.7f64.exp()));
        }
    }

    #[test]
    fn ln_derivatives() {
        let x = 1.3;
        let d = Jet::var(x).ln().derivs();
        let want = [x.ln(), 1.0 / x, -1.0 / x.powi(2), 2.0 / x.powi(3), -6.0 / x.powi(4)];
        for i in 0..ORDER {
            assert!(close(d[i], want[i]), "{i}: {} vs {}", d[i], want[i]);
        }
    }

    #[test]
    fn powf_matches_falling_factorials() {
        let (x, p) = (2.5, -1.5);
        let d = Jet::var(x).powf(p).derivs();
        let mut coef = 1.0;
        for i in 0..ORDER {
            assert!(close(d[i], coef * x.powf(p - i as f64)));
            coef *= p - i as f64;
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = Jet::var(0.4).exp() + 2.0;
        let b = Jet::var(0.4).powf(3.0) + 1.0;
        let r = (a * b) / b;
        for i in 0..ORDER {
            assert!(close(r.c[i], a.c[i]));
        }
    }
}
