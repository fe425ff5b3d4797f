//! Exact distribution oracles: chi-square survival function and the
//! Clopper–Pearson binomial upper confidence bound.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100_000;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("gamma_q needs a > 0, x >= 0 (a = {a}, x = {x})")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // P(a, x) = e^{-x} x^a / Γ(a) · Σ x^n / (a (a+1) ... (a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITERATIONS {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                return Ok((1.0 - sum * log_prefactor.exp()).max(0.0));
            }
        }
    } else {
        // Modified Lentz on the continued fraction for Q(a, x).
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITERATIONS {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                return Ok((log_prefactor.exp() * h).min(1.0));
            }
        }
    }
    Err(Error::NoConvergence {
        routine: "incomplete gamma",
        iterations: MAX_ITERATIONS,
    })
}

/// `P[χ²_d > x]`.
pub fn chi_square_sf(d: usize, x: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("chi-square needs d >= 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    gamma_q(d as f64 / 2.0, x / 2.0)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "beta_reg needs a, b > 0 and x in [0, 1] (a = {a}, b = {b}, x = {x})"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let log_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(log_front.exp() * beta_continued_fraction(a, b, x)? / a)
    } else {
        Ok(1.0 - log_front.exp() * beta_continued_fraction(b, a, 1.0 - x)? / b)
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITERATIONS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        routine: "incomplete beta",
        iterations: MAX_ITERATIONS,
    })
}

/// Exact one-sided Clopper–Pearson upper bound on a binomial proportion after
/// `k` successes in `n` trials: the `p` with `P[Bin(n, p) ≤ k] = 1 − confidence`.
pub fn clopper_pearson_upper(k: u64, n: u64, confidence: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Empty("binomial sample"));
    }
    if k > n {
        return Err(Error::Domain(format!("{k} successes exceed {n} trials")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    if k == n {
        return Ok(1.0);
    }
    let alpha = 1.0 - confidence;
    if k == 0 {
        return Ok(-((alpha.ln()) / n as f64).exp_m1());
    }
    // I_p(k + 1, n − k) is increasing in p; bisect for the confidence level.
    let (a, b) = ((k + 1) as f64, (n - k) as f64);
    let mut lo = k as f64 / n as f64;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid)? < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// `Q(k, x) = e^{-x} Σ_{j<k} x^j / j!` for integer `k`.
    fn gamma_q_integer(k: usize, x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for j in 0..k {
            if j > 0 {
                term *= x / j as f64;
            }
            sum += term;
        }
        (-x).exp() * sum
    }

    fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
        (0..=k)
            .map(|j| {
                let log_choose =
                    ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0);
                (log_choose + j as f64 * p.ln() + (n - j) as f64 * (-p).ln_1p()).exp()
            })
            .sum()
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_sf(3, 0.0).unwrap(), 1.0);
        for t in [0.1, 1.0, 2.5, 7.0, 30.0] {
            assert_relative_eq!(chi_square_sf(2, 2.0 * t).unwrap(), (-t).exp(), max_relative = 1e-12);
        }
        let x = 5.0 + 2.0 * 5f64.sqrt() + 2.0;
        assert!(chi_square_sf(5, x).unwrap() <= (-1.0f64).exp());
        assert!(chi_square_sf(0, 1.0).is_err());
        assert!(chi_square_sf(1, -1.0).is_err());
    }

    #[test]
    fn gamma_q_matches_closed_form_for_even_degrees() {
        for k in 1..=30 {
            for &x in &[0.01, 0.5, 1.0, 3.0, 10.0, 25.0, 60.0] {
                let exact = gamma_q_integer(k, x);
                assert_abs_diff_eq!(gamma_q(k as f64, x).unwrap(), exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn chi_square_one_degree_is_erfc() {
        use statrs::function::erf::erfc;
        // statrs erfc is good to about 1e-10
        for &x in &[0.01, 0.3, 1.0, 4.0, 16.0] {
            assert_abs_diff_eq!(chi_square_sf(1, x).unwrap(), erfc((x / 2.0).sqrt()), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(chi_square_sf(1, 1.0).unwrap(), 0.317_310_507_862_914_1, epsilon = 1e-15);
    }

    #[test]
    fn clopper_pearson_zero_successes() {
        let u = clopper_pearson_upper(0, 1000, 0.99).unwrap();
        assert_relative_eq!(u, 1.0 - 0.01f64.powf(1e-3), max_relative = 1e-12);
        assert_abs_diff_eq!(u, 0.004595, epsilon = 1e-6);
        assert_eq!(clopper_pearson_upper(7, 7, 0.99).unwrap(), 1.0);
    }

    #[test]
    fn clopper_pearson_matches_binomial_sum() {
        for &(k, n) in &[(1u64, 10u64), (3, 50), (17, 200), (100, 1000)] {
            let u = clopper_pearson_upper(k, n, 0.95).unwrap();
            assert!(u > k as f64 / n as f64);
            assert_abs_diff_eq!(binomial_cdf(k, n, u), 0.05, epsilon = 1e-10);
        }
    }

    #[test]
    fn clopper_pearson_large_n() {
        let u = clopper_pearson_upper(50_000, 1_000_000, 0.99).unwrap();
        // normal approximation: p + z·sqrt(p(1-p)/n) with z = 2.326
        let approx = 0.05 + 2.326 * (0.05f64 * 0.95 / 1e6).sqrt();
        assert_abs_diff_eq!(u, approx, epsilon = 2e-5);
    }

    #[test]
    fn clopper_pearson_rejects_bad_input() {
        assert!(clopper_pearson_upper(0, 0, 0.9).is_err());
        assert!(clopper_pearson_upper(3, 2, 0.9).is_err());
        assert!(clopper_pearson_upper(1, 2, 1.0).is_err());
    }
}
