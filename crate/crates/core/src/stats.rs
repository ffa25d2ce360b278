//! Small statistics toolkit: descriptive statistics, student-t and binomial
//! distribution helpers, and the Mann-Whitney U test.

use alloc::vec;
use alloc::vec::Vec;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator; zero for a single value.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

// Lentz's continued fraction for the incomplete beta function.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// CDF of the student-t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * inc_beta(df / (df + t * t), df / 2.0, 0.5);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Quantile of the student-t distribution, found by bisection on the CDF.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must lie in (0, 1)");
    if p == 0.5 {
        return 0.0;
    }
    if df == 1.0 {
        return libm::tan(core::f64::consts::PI * (p - 0.5));
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while student_t_cdf(lo, df) > p {
        lo *= 2.0;
    }
    while student_t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    inc_beta(1.0 - p, (n - k) as f64, k as f64 + 1.0)
}

/// Upper confidence limit on an error rate: the probability `p` at which
/// observing at most `errors` failures in `n` trials has probability `cf`.
pub fn binomial_upper_bound(errors: u64, n: u64, cf: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if errors >= n {
        return 1.0;
    }
    if errors == 0 {
        return 1.0 - libm::pow(cf, 1.0 / n as f64);
    }
    // Newton on cdf(p) - cf, kept inside a shrinking bisection bracket.
    // d/dp P(X <= k; n, p) = -n * pmf(k; n - 1, p).
    let (k, nf) = (errors as f64, n as f64);
    let ln_coef = libm::lgamma(nf) - libm::lgamma(k + 1.0) - libm::lgamma(nf - k);
    let (mut lo, mut hi) = (k / nf, 1.0);
    let mut p = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = binomial_cdf(errors, n, p) - cf;
        if f > 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let slope = -nf * libm::exp(ln_coef + k * libm::log(p) + (nf - 1.0 - k) * libm::log1p(-p));
        let mut next = p - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - p).abs() <= 1e-15 * p.max(1e-300) || hi - lo <= 1e-15 {
            return next;
        }
        p = next;
    }
    p
}

/// Midranks (1-based, ties averaged) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Largest `|a| * |b|` for which the exact null distribution is enumerated.
pub const EXACT_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u_a: f64,
    /// U statistic of the second sample; `u_a + u_b = |a| * |b|`.
    pub u_b: f64,
    /// Two-sided p-value in `(0, 1]`.
    pub p: f64,
    /// Whether `p` comes from exact enumeration or the normal approximation.
    pub exact: bool,
}

/// Two-sided Mann-Whitney U test with midrank ties.
///
/// The p-value is exact (conditional on the observed ties) when
/// `|a| * |b| <= 400`, otherwise it uses the tie-corrected normal
/// approximation with continuity correction.
///
/// # Panics
/// If either sample is empty.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> MannWhitney {
    assert!(!a.is_empty() && !b.is_empty(), "Mann-Whitney samples must be non-empty");
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    if na * nb <= EXACT_LIMIT {
        let mut doubled: Vec<u64> = ranks.iter().map(|r| libm::round(2.0 * r) as u64).collect();
        // The two-sided p is the same from either side; enumerate the smaller.
        let side = if na <= nb {
            na
        } else {
            doubled.rotate_left(na);
            nb
        };
        let p = exact_p(&doubled, side);
        MannWhitney { u_a, u_b, p, exact: true }
    } else {
        let n = (na + nb) as f64;
        let ties = tie_term(&pooled);
        let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
        let p = if var <= 0.0 {
            1.0
        } else {
            let dev = (u_a - (na * nb) as f64 / 2.0).abs();
            let z = ((dev - 0.5).max(0.0)) / libm::sqrt(var);
            libm::erfc(z / core::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
        };
        MannWhitney { u_a, u_b, p, exact: false }
    }
}

fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Exact two-sided p-value by counting, over all `C(N, na)` ways to assign
/// the pooled (doubled) ranks to the first sample, how many deviate from the
/// null mean at least as much as the observed assignment.
fn exact_p(doubled_ranks: &[u64], na: usize) -> f64 {
    let n = doubled_ranks.len();
    let observed: u64 = doubled_ranks[..na].iter().sum();
    // Twice the null mean of the rank sum: na * (N + 1).
    let center = (na * (n + 1)) as i64;
    let obs_dev = (observed as i64 - center).abs();

    let max_sum: u64 = {
        let mut r = doubled_ranks.to_vec();
        r.sort_unstable_by(|x, y| y.cmp(x));
        r[..na].iter().sum()
    };
    let width = max_sum as usize + 1;
    // counts[k * width + s]: subsets of size k with doubled rank sum s
    let mut counts = vec![0u128; (na + 1) * width];
    counts[0] = 1;
    for (seen, &r) in doubled_ranks.iter().enumerate() {
        let r = r as usize;
        let top = na.min(seen + 1);
        for k in (1..=top).rev() {
            let (lower, upper) = counts.split_at_mut(k * width);
            let src = &lower[(k - 1) * width..];
            let dst = &mut upper[..width];
            for s in (r..width).rev() {
                let c = src[s - r];
                if c != 0 {
                    dst[s] += c;
                }
            }
        }
    }
    let row = &counts[na * width..(na + 1) * width];
    let total: u128 = row.iter().sum();
    let extreme: u128 = row
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as i64 - center).abs() >= obs_dev)
        .map(|(_, &c)| c)
        .sum();
    (extreme as f64 / total as f64).min(1.0)
}
