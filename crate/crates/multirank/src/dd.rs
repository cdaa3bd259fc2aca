//! Double-double arithmetic: an unevaluated sum hi + lo of two f64 values
//! carrying roughly 32 significant decimal digits.
//!
//! The partial-fraction sum in the spacing-statistic transform cancels
//! catastrophically (individual terms grow combinatorially while the result
//! stays of order one), so it is accumulated in this extended precision.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Double-double number. Invariant: `lo` is a rounding correction to `hi`,
/// |lo| <= ulp(hi)/2 after every public operation.
#[derive(Clone, Copy, Debug)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Error-free sum of two f64 (Knuth): returns (fl(a+b), rounding error).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    let e = (a - (s - v)) + (b - v);
    (s, e)
}

/// Error-free sum assuming |a| >= |b|.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Error-free product via fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

impl Neg for Dd {
    type Output = Dd;

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;

    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;

    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;

    fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;

    /// Long division with two correction passes.
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs.mul_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs.mul_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e } + Dd::from_f64(q3)
    }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// ln 2 to double-double precision: the rounded f64 plus the residual.
    const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn mul_f64(self, x: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, x);
        let (hi, lo) = quick_two_sum(p1, p2 + self.lo * x);
        Dd { hi, lo }
    }

    /// Integer power by binary exponentiation.
    pub fn powi(self, n: u64) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    /// exp(self) by range reduction (x = m ln2 + 512 r) and a Taylor series
    /// for e^r - 1, squared back up. Accurate to ~1e-31 relative on the
    /// argument ranges the transform produces.
    pub fn exp(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ONE;
        }
        let m = (self.hi / std::f64::consts::LN_2).round();
        let r = (self - Dd::LN2.mul_f64(m)).mul_f64(1.0 / 512.0);

        // e^r - 1 with |r| <= ln2 / 1024: nine terms reach ~1e-34.
        let mut term = r;
        let mut sum = r;
        for i in 2..=10u64 {
            term = term * r / Dd::from_f64(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-35 * sum.hi.abs() {
                break;
            }
        }
        // (1+f)^2 - 1 = f^2 + 2f, applied 9 times to undo the /512.
        let mut f = sum;
        for _ in 0..9 {
            f = f * f + f.mul_f64(2.0);
        }
        let scale = libm_ldexp(1.0, m as i32);
        (f + Dd::ONE).mul_f64(scale)
    }
}

/// 2^e scaling without a libm dependency; exact for the exponent ranges used.
fn libm_ldexp(x: f64, e: i32) -> f64 {
    x * 2f64.powi(e)
}
