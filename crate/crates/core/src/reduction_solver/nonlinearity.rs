//! The odd power `f(s) = |s|^{p-1} s` and differences of it that stay
//! accurate when the arguments are huge and nearly equal.

pub fn nonlinearity(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(p - 1.0) * s
    }
}

pub fn nonlinearity_deriv(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        p * s.abs().powf(p - 1.0)
    }
}

/// `|s|^{p+1}/(p+1)`.
pub fn primitive(s: f64, p: f64) -> f64 {
    s.abs().powf(p + 1.0) / (p + 1.0)
}

/// `(1+x)^a - 1`.
pub fn pow1p_m1(x: f64, a: f64) -> f64 {
    (a * x.ln_1p()).exp_m1()
}

/// `(1+x)^a - 1 - a x`, with a series near 0 to avoid cancellation.
pub fn pow1p_m1_linear(x: f64, a: f64) -> f64 {
    if x.abs() < 1e-2 {
        let mut term = a * (a - 1.0) / 2.0 * x * x;
        let mut sum = term;
        for k in 2..14 {
            term *= (a - k as f64) / (k as f64 + 1.0) * x;
            sum += term;
        }
        sum
    } else {
        pow1p_m1(x, a) - a * x
    }
}

/// Below this `|delta/base|` the shifted forms factor out the base.
const RELATIVE_SHIFT: f64 = 0.5;

/// `f(base + delta) - f(base)`.
pub fn f_shift(base: f64, delta: f64, p: f64) -> f64 {
    if base != 0.0 && delta.abs() < RELATIVE_SHIFT * base.abs() {
        nonlinearity(base, p) * pow1p_m1(delta / base, p)
    } else {
        nonlinearity(base + delta, p) - nonlinearity(base, p)
    }
}

/// `f'(base + delta) - f'(base)`.
pub fn fprime_shift(base: f64, delta: f64, p: f64) -> f64 {
    if base != 0.0 && delta.abs() < RELATIVE_SHIFT * base.abs() {
        nonlinearity_deriv(base, p) * pow1p_m1(delta / base, p - 1.0)
    } else {
        nonlinearity_deriv(base + delta, p) - nonlinearity_deriv(base, p)
    }
}

/// `f(base + delta) - f(base) - f'(base) delta`.
pub fn f_taylor_remainder(base: f64, delta: f64, p: f64) -> f64 {
    if base != 0.0 && delta.abs() < RELATIVE_SHIFT * base.abs() {
        nonlinearity(base, p) * pow1p_m1_linear(delta / base, p)
    } else {
        nonlinearity(base + delta, p) - nonlinearity(base, p) - nonlinearity_deriv(base, p) * delta
    }
}

/// `F(base + delta) - F(base)` for the primitive `F`.
pub fn primitive_shift(base: f64, delta: f64, p: f64) -> f64 {
    if base != 0.0 && delta.abs() < RELATIVE_SHIFT * base.abs() {
        primitive(base, p) * pow1p_m1(delta / base, p + 1.0)
    } else {
        primitive(base + delta, p) - primitive(base, p)
    }
}

/// `F(base + delta) - F(base) - f(base) delta`.
pub fn primitive_taylor_remainder(base: f64, delta: f64, p: f64) -> f64 {
    if base != 0.0 && delta.abs() < RELATIVE_SHIFT * base.abs() {
        primitive(base, p) * pow1p_m1_linear(delta / base, p + 1.0)
    } else {
        primitive(base + delta, p) - primitive(base, p) - nonlinearity(base, p) * delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn values_at_special_points() {
        let p = 5.0 / 3.0;
        assert_eq!(nonlinearity(0.0, p), 0.0);
        assert_eq!(nonlinearity_deriv(0.0, p), 0.0);
        assert_eq!(nonlinearity(-1.0, p), -1.0);
        assert_eq!(nonlinearity_deriv(-1.0, p), p);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s: f64 = rng.gen_range(-10.0..10.0);
            let p: f64 = rng.gen_range(1.2..2.0);
            let h = 1e-6 * s.abs().max(1e-3);
            let fd = (nonlinearity(s + h, p) - nonlinearity(s - h, p)) / (2.0 * h);
            assert_relative_eq!(fd, nonlinearity_deriv(s, p), max_relative = 1e-6);
        }
    }

    #[test]
    fn shifted_forms_agree_with_direct_evaluation() {
        let p = 9.0 / 5.0;
        for (b, d) in [(3.0, 0.7), (-2.0, 0.3), (1.0, -0.4), (0.5, 2.0), (0.0, 1.5)] {
            assert_relative_eq!(f_shift(b, d, p), nonlinearity(b + d, p) - nonlinearity(b, p), max_relative = 1e-12);
            assert_relative_eq!(primitive_shift(b, d, p), primitive(b + d, p) - primitive(b, p), max_relative = 1e-12);
            let direct = nonlinearity(b + d, p) - nonlinearity(b, p) - nonlinearity_deriv(b, p) * d;
            assert_relative_eq!(f_taylor_remainder(b, d, p), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn shifted_forms_survive_huge_bases() {
        let p = 5.0 / 3.0;
        let b = 1e21;
        let d = 1e5;
        let exact = nonlinearity(b, p) * p * (d / b);
        assert_relative_eq!(f_shift(b, d, p), exact, max_relative = 1e-10);
        let rem = f_taylor_remainder(b, d, p);
        let expected = nonlinearity(b, p) * p * (p - 1.0) / 2.0 * (d / b).powi(2);
        assert_relative_eq!(rem, expected, max_relative = 1e-10);
    }

    #[test]
    fn series_matches_closed_form_away_from_zero() {
        for a in [1.4, 2.33, 3.0] {
            for x in [-9e-3, -1e-4, 5e-3, 9.9e-3] {
                let closed = (1.0f64 + x).powf(a) - 1.0 - a * x;
                assert_relative_eq!(pow1p_m1_linear(x, a), closed, max_relative = 1e-9);
            }
        }
    }
}
