//! Small numeric helpers shared across modules.

/// k! as a double. Saturates to +inf above 170! like the underlying type.
pub(crate) fn factorial(k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 2..=k {
        acc *= i as f64;
    }
    acc
}

/// Binomial coefficient C(n, k) as a double, multiplicative form.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_small() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(factorial(12), 479001600.0);
    }

    #[test]
    fn binomial_matches_pascal() {
        for n in 0..20usize {
            for k in 0..=n {
                let pascal = factorial(n) / (factorial(k) * factorial(n - k));
                assert!((binomial(n, k) - pascal).abs() <= 1e-6 * pascal.max(1.0));
            }
        }
        assert_eq!(binomial(3, 5), 0.0);
    }
}
