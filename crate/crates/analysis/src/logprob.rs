use std::cmp::Ordering;
use std::fmt;

use num_traits::Float;

/// A probability stored as its natural logarithm. `-inf` is probability 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogProb<F> {
    ln: F,
}

impl<F: Float> LogProb<F> {
    pub fn zero() -> Self {
        LogProb { ln: F::neg_infinity() }
    }

    pub fn one() -> Self {
        LogProb { ln: F::zero() }
    }

    /// Wraps a log value, clamping tiny positive rounding error to 0.
    pub fn from_ln(ln: F) -> Self {
        assert!(!ln.is_nan(), "NaN log-probability");
        LogProb { ln: ln.min(F::zero()) }
    }

    pub fn from_prob(p: F) -> Self {
        assert!(p >= F::zero() && p <= F::one(), "probability out of range");
        Self::from_ln(p.ln())
    }

    pub fn ln(self) -> F {
        self.ln
    }

    pub fn log10(self) -> F {
        self.ln / F::from(std::f64::consts::LN_10).unwrap()
    }

    pub fn prob(self) -> F {
        self.ln.exp()
    }

    pub fn is_zero(self) -> bool {
        self.ln == F::neg_infinity()
    }

    /// Product of two probabilities.
    pub fn and(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self::from_ln(self.ln + other.ln)
    }

    /// `p^k` for real `k >= 0`.
    pub fn powf(self, k: F) -> Self {
        if k == F::zero() {
            return Self::one();
        }
        if self.is_zero() {
            return Self::zero();
        }
        Self::from_ln(self.ln * k)
    }

    /// `p · m` for a real multiplier `m >= 0`, capped at 1 (union bound).
    pub fn scale_capped(self, ln_multiplier: F) -> Self {
        if self.is_zero() {
            return self;
        }
        Self::from_ln(self.ln + ln_multiplier)
    }

    /// Sum of probabilities via log-sum-exp.
    pub fn or_sum<I: IntoIterator<Item = Self>>(items: I) -> Self {
        let items: Vec<F> = items.into_iter().map(|p| p.ln).collect();
        let max = items.iter().copied().fold(F::neg_infinity(), F::max);
        if max == F::neg_infinity() {
            return Self::zero();
        }
        let s = items.iter().fold(F::zero(), |acc, &l| acc + (l - max).exp());
        Self::from_ln(max + s.ln())
    }

    /// `1 - p`, accurate when `p` is tiny.
    pub fn complement(self) -> Self {
        if self.is_zero() {
            return Self::one();
        }
        // ln(1 - e^x), switching form at x = -ln 2.
        let x = self.ln;
        let ln2 = F::from(std::f64::consts::LN_2).unwrap();
        let v = if x > -ln2 { (-x.exp_m1()).ln() } else { (-x.exp()).ln_1p() };
        if v.is_nan() {
            Self::zero()
        } else {
            Self::from_ln(v)
        }
    }
}

impl<F: Float> PartialOrd for LogProb<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln.partial_cmp(&other.ln)
    }
}

impl<F: Float + fmt::Display> fmt::Display for LogProb<F> {
    /// Scientific notation with four significant digits, computed from the
    /// log so values below the float range still print.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&sci4(*self))
    }
}

/// Formats a probability as `d.ddde±XX` from its logarithm.
pub fn sci4<F: Float>(p: LogProb<F>) -> String {
    if p.is_zero() {
        return "0.000e0".to_string();
    }
    let l10 = p.log10().to_f64().unwrap();
    let mut exp = l10.floor();
    let mut mant = 10f64.powf(l10 - exp);
    if (mant * 1000.0).round() >= 10_000.0 {
        mant /= 10.0;
        exp += 1.0;
    }
    format!("{:.3}e{}", mant, exp as i64)
}
