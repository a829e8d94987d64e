use num_traits::Float;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn c<F: Float>(x: f64) -> F {
    F::from(x).unwrap()
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<F: Float>(x: F) -> F {
    assert!(x > F::zero(), "ln_gamma domain");
    if x < c(0.5) {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        let pi = c::<F>(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(F::one() - x);
    }
    let x = x - F::one();
    let mut a = c::<F>(LANCZOS[0]);
    let t = x + c(LANCZOS_G + 0.5);
    for (i, &k) in LANCZOS.iter().enumerate().skip(1) {
        a = a + c::<F>(k) / (x + F::from(i).unwrap());
    }
    c::<F>(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + c(0.5)) * t.ln() - t + a.ln()
}

/// `ln C(n, k)`.
pub fn ln_choose<F: Float>(n: u64, k: u64) -> F {
    assert!(k <= n);
    if k == 0 || k == n {
        return F::zero();
    }
    let f = |v: u64| F::from(v).unwrap();
    ln_gamma(f(n) + F::one()) - ln_gamma(f(k) + F::one()) - ln_gamma(f(n - k) + F::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_factorials() {
        let mut fact = 1f64;
        for n in 1..30u32 {
            fact *= n as f64;
            let got = ln_gamma(n as f64 + 1.0);
            assert!((got - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0), "n = {n}");
        }
        assert!((ln_gamma(0.5f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn choose_small_values() {
        assert!((ln_choose::<f64>(10, 3).exp() - 120.0).abs() < 1e-10);
        assert!((ln_choose::<f64>(100, 50).exp() / 1.008_913_445_455_642e29 - 1.0).abs() < 1e-12);
    }
}
