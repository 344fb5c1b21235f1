//! Elementary inequalities for powers and for `f(s) = |s|^{p-1} s`, sampled at random.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::reduction_solver::nonlinearity::{nonlinearity, nonlinearity_deriv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LemmaTag {
    /// `(x+y)^a <= x^a + y^a`, `a <= 1`.
    SubadditivePower,
    /// `(x+y)^a <= 2^{a-1}(x^a + y^a)`, `a >= 1`.
    ConvexPower,
    /// `||a+b|^q - |a|^q| <= c (|a|^{q-1}|b| + |b|^q)`, `q >= 1`.
    PowerIncrement,
    /// `|f(a+b) - f(a) - f'(a) b| <= c |b|^p`.
    TaylorRemainder,
    /// `|f(a-b) - f(a) + f(b)| <= c (|a|^{p-1}|b| + |b|^p)`.
    DifferenceSmallB,
    /// `|f(a-b) - f(a) + f(b)| <= c (|b|^{p-1}|a| + |a|^p)`.
    DifferenceSmallA,
    /// `|f(a+b1) - f(a+b2) - f'(a)(b1-b2)| <= c (|b1|^{p-1} + |b2|^{p-1}) |b1-b2|`.
    Lipschitz,
}

impl LemmaTag {
    pub const ALL: [LemmaTag; 7] = [
        LemmaTag::SubadditivePower,
        LemmaTag::ConvexPower,
        LemmaTag::PowerIncrement,
        LemmaTag::TaylorRemainder,
        LemmaTag::DifferenceSmallB,
        LemmaTag::DifferenceSmallA,
        LemmaTag::Lipschitz,
    ];

    /// Short label used on the command line and in tables.
    pub fn label(self) -> &'static str {
        match self {
            LemmaTag::SubadditivePower => "2.1a",
            LemmaTag::ConvexPower => "2.1b",
            LemmaTag::PowerIncrement => "2.2",
            LemmaTag::TaylorRemainder => "2.3",
            LemmaTag::DifferenceSmallB => "2.4a",
            LemmaTag::DifferenceSmallA => "2.4b",
            LemmaTag::Lipschitz => "2.5",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown inequality tag {s}")))
    }

    /// Number of real arguments taken by [`check_inequality`].
    pub fn arity(self) -> usize {
        match self {
            LemmaTag::SubadditivePower | LemmaTag::ConvexPower | LemmaTag::PowerIncrement => 3,
            LemmaTag::Lipschitz => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityValues {
    pub lhs: f64,
    pub rhs_shape: f64,
}

impl InequalityValues {
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs_shape
        }
    }
}

/// Both sides of one inequality with its constant removed from the right.
///
/// Arguments: `[x, y, a]` for the two power inequalities, `[a, b, q]` for the
/// power increment, `[a, b]` for the `f` remainders and `[a, b1, b2]` for the
/// Lipschitz bound.
pub fn check_inequality(tag: LemmaTag, args: &[f64], p: f64) -> Result<InequalityValues> {
    if args.len() != tag.arity() {
        return Err(Error::InvalidParameter(format!(
            "{} takes {} arguments, got {}",
            tag.label(),
            tag.arity(),
            args.len()
        )));
    }
    let f = |s: f64| nonlinearity(s, p);
    let v = match tag {
        LemmaTag::SubadditivePower | LemmaTag::ConvexPower => {
            let (x, y, a) = (args[0], args[1], args[2]);
            if !(x > 0.0 && y > 0.0) {
                return Err(Error::InvalidParameter("power inequalities need x, y > 0".into()));
            }
            let ok = if tag == LemmaTag::SubadditivePower { a > 0.0 && a <= 1.0 } else { a >= 1.0 };
            if !ok {
                return Err(Error::InvalidParameter(format!("exponent {a} outside the range of {}", tag.label())));
            }
            InequalityValues { lhs: (x + y).powf(a), rhs_shape: x.powf(a) + y.powf(a) }
        }
        LemmaTag::PowerIncrement => {
            let (a, b, q) = (args[0], args[1], args[2]);
            if q < 1.0 {
                return Err(Error::InvalidParameter(format!("power increment needs q >= 1, got {q}")));
            }
            InequalityValues {
                lhs: ((a + b).abs().powf(q) - a.abs().powf(q)).abs(),
                rhs_shape: a.abs().powf(q - 1.0) * b.abs() + b.abs().powf(q),
            }
        }
        LemmaTag::TaylorRemainder => {
            let (a, b) = (args[0], args[1]);
            let lhs = match small_ratio(a, &[b]) {
                Some(s) => a.abs().powf(p) * binomial_tail_difference(s[0], 0.0, p).abs(),
                None => (f(a + b) - f(a) - nonlinearity_deriv(a, p) * b).abs(),
            };
            InequalityValues { lhs, rhs_shape: b.abs().powf(p) }
        }
        LemmaTag::DifferenceSmallB | LemmaTag::DifferenceSmallA => {
            let (a, b) = (args[0], args[1]);
            let lhs = (f(a - b) - f(a) + f(b)).abs();
            let (big, small) = if tag == LemmaTag::DifferenceSmallB { (a, b) } else { (b, a) };
            InequalityValues { lhs, rhs_shape: big.abs().powf(p - 1.0) * small.abs() + small.abs().powf(p) }
        }
        LemmaTag::Lipschitz => {
            let (a, b1, b2) = (args[0], args[1], args[2]);
            let lhs = match small_ratio(a, &[b1, b2]) {
                Some(s) => a.abs().powf(p) * binomial_tail_difference(s[0], s[1], p).abs(),
                None => (f(a + b1) - f(a + b2) - nonlinearity_deriv(a, p) * (b1 - b2)).abs(),
            };
            InequalityValues { lhs, rhs_shape: (b1.abs().powf(p - 1.0) + b2.abs().powf(p - 1.0)) * (b1 - b2).abs() }
        }
    };
    Ok(v)
}

/// `b / a` for every perturbation when all are at most half of `|a|`.
fn small_ratio<const K: usize>(a: f64, b: &[f64; K]) -> Option<[f64; K]> {
    let s = b.map(|b| b / a);
    (a != 0.0 && s.iter().all(|s| s.abs() <= 0.5)).then_some(s)
}

/// `sum_{k>=2} C(p,k) (s1^k - s2^k)` for `|s1|, |s2| <= 1/2`.
///
/// This is `(1+s1)^p - (1+s2)^p - p (s1 - s2)` without the cancellation of
/// the direct form; `s1^k - s2^k` is carried as `(s1 - s2) h_k`.
fn binomial_tail_difference(s1: f64, s2: f64, p: f64) -> f64 {
    let mut coeff = p;
    let mut h = 1.0;
    let mut s2_pow = 1.0;
    let mut sum = 0.0;
    for k in 2..200 {
        s2_pow *= s2;
        h = s1 * h + s2_pow;
        coeff *= (p - (k - 1) as f64) / k as f64;
        let term = coeff * h;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    (s1 - s2) * sum
}

/// Largest observed ratio over one batch of random arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalitySample {
    pub tag: LemmaTag,
    pub samples: usize,
    pub max_ratio: f64,
    pub all_finite: bool,
}

/// Exponent used for the power inequalities when sampling.
fn sampled_exponent(tag: LemmaTag, p: f64) -> f64 {
    match tag {
        LemmaTag::SubadditivePower => 0.5,
        LemmaTag::ConvexPower | LemmaTag::PowerIncrement => p + 1.0,
        _ => f64::NAN,
    }
}

/// Ratios `lhs / rhs_shape` over `samples` argument tuples with magnitudes
/// log-uniform in `[1e-6, 1e6]` and random signs where allowed.
pub fn sample_inequality(tag: LemmaTag, p: f64, samples: usize, seed: u64) -> Result<InequalitySample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let magnitude = |rng: &mut ChaCha8Rng| 10f64.powf(rng.gen_range(-6.0..=6.0));
    let mut max_ratio = 0.0f64;
    let mut all_finite = true;
    for _ in 0..samples {
        let args: Vec<f64> = match tag {
            LemmaTag::SubadditivePower | LemmaTag::ConvexPower => {
                vec![magnitude(&mut rng), magnitude(&mut rng), sampled_exponent(tag, p)]
            }
            _ => {
                let k = if tag == LemmaTag::PowerIncrement { 2 } else { tag.arity() };
                let mut v: Vec<f64> = (0..k)
                    .map(|_| {
                        let m = magnitude(&mut rng);
                        if rng.gen::<bool>() {
                            m
                        } else {
                            -m
                        }
                    })
                    .collect();
                if tag == LemmaTag::PowerIncrement {
                    v.push(sampled_exponent(tag, p));
                }
                v
            }
        };
        let r = check_inequality(tag, &args, p)?.ratio();
        if !r.is_finite() {
            all_finite = false;
        } else {
            max_ratio = max_ratio.max(r);
        }
    }
    Ok(InequalitySample { tag, samples, max_ratio, all_finite })
}
