//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] carries the normalized Taylor coefficients `f^(k)(x0) / k!` of a
//! function up to a fixed order. Composing jets through the elementary
//! operations below yields exact (to rounding) derivatives of closed-form
//! expressions, which is what the classifier needs when probing vanishing
//! orders up to twenty-odd derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    /// The independent variable `x` expanded at `x0`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        if order >= 1 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Jet { c }
    }

    pub fn zero(order: usize) -> Self {
        Jet::constant(0.0, order)
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for j in 2..=k {
            fact *= j as f64;
        }
        self.c[k] * fact
    }

    /// All derivatives `f, f', ..., f^(order)`.
    pub fn derivatives(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.c
            .iter()
            .enumerate()
            .map(|(k, &ck)| {
                if k >= 2 {
                    fact *= k as f64;
                }
                ck * fact
            })
            .collect()
    }

    fn map_coeffs(&self, f: impl Fn(f64) -> f64) -> Jet {
        Jet { c: self.c.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: f64) -> Jet {
        self.map_coeffs(|v| v * s)
    }

    pub fn offset(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    pub fn exp(&self) -> Jet {
        let n = self.c.len();
        let e0 = self.c[0].exp();
        if e0 == 0.0 {
            // Underflow: the whole expansion is zero and the higher
            // coefficients of the argument may be infinite.
            return Jet::zero(n - 1);
        }
        let mut e = vec![0.0; n];
        e[0] = e0;
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e }
    }

    /// Returns `(sin, cos)` of the jet.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.c.len();
        let mut s = vec![0.0; n];
        let mut co = vec![0.0; n];
        s[0] = self.c[0].sin();
        co[0] = self.c[0].cos();
        for k in 1..n {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                let w = j as f64 * self.c[j];
                ss += w * co[k - j];
                cc += w * s[k - j];
            }
            s[k] = ss / k as f64;
            co[k] = -cc / k as f64;
        }
        (Jet { c: s }, Jet { c: co })
    }

    pub fn sin(&self) -> Jet {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Jet {
        self.sin_cos().1
    }

    /// Real power; requires a positive constant term.
    pub fn powf(&self, r: f64) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        debug_assert!(a0 > 0.0, "powf of a jet with non-positive value");
        let mut p = vec![0.0; n];
        p[0] = a0.powf(r);
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += (r * j as f64 - (k - j) as f64) * self.c[j] * p[k - j];
            }
            p[k] = s / (k as f64 * a0);
        }
        Jet { c: p }
    }

    /// Non-negative integer power by repeated multiplication.
    pub fn powi(&self, m: u32) -> Jet {
        let mut out = Jet::constant(1.0, self.order());
        for _ in 0..m {
            out = &out * self;
        }
        out
    }

    pub fn ln(&self) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut l = vec![0.0; n];
        l[0] = a0.ln();
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * l[j] * self.c[k - j];
            }
            l[k] = (self.c[k] - s / k as f64) / a0;
        }
        Jet { c: l }
    }

    pub fn recip(&self) -> Jet {
        &Jet::constant(1.0, self.order()) / self
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.c.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..n - i {
                out[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Jet { c: out }
    }
}

impl<'a> Div<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        let n = self.c.len();
        let b0 = rhs.c[0];
        let mut q = vec![0.0; n];
        for k in 0..n {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= rhs.c[j] * q[k - j];
            }
            q[k] = s / b0;
        }
        Jet { c: q }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sin_derivatives_cycle() {
        let x = Jet::variable(0.3, 8);
        let d = x.sin().derivatives();
        let expect = [0.3f64.sin(), 0.3f64.cos(), -0.3f64.sin(), -0.3f64.cos()];
        for k in 0..=8 {
            assert_relative_eq!(d[k], expect[k % 4], epsilon = 1e-13);
        }
    }

    #[test]
    fn quotient_and_power_agree() {
        let x = Jet::variable(0.7, 6);
        let a = x.cos().offset(2.0);
        let inv_sq = a.powf(-2.0);
        let via_div = Jet::constant(1.0, 6) / (&a * &a);
        for k in 0..=6 {
            assert_relative_eq!(inv_sq.c[k], via_div.c[k], epsilon = 1e-13, max_relative = 1e-12);
        }
    }

    #[test]
    fn exp_ln_roundtrip() {
        let x = Jet::variable(0.4, 10);
        let f = x.sin().offset(1.5);
        let g = f.ln().exp();
        for k in 0..=10 {
            assert_relative_eq!(f.c[k], g.c[k], epsilon = 1e-13);
        }
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // (x^5)^(5) = 120 at any point, higher ones vanish.
        let x = Jet::variable(-1.3, 7);
        let d = x.powi(5).derivatives();
        assert_relative_eq!(d[5], 120.0, epsilon = 1e-10);
        assert_eq!(d[6], 0.0);
        assert_eq!(d[7], 0.0);
    }

    #[test]
    fn underflowing_exp_is_flat() {
        let t = Jet::variable(1e-12, 12);
        let f = t.powf(-2.0).scale(-1.0).exp();
        assert!(f.c.iter().all(|&v| v == 0.0));
    }
}
