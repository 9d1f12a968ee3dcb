//! Special functions: regularized incomplete beta and its inverse, Student t
//! tails, and the (doubly) noncentral t distribution.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const EPS: f64 = 1e-15;
const FPMIN: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Standard normal CDF.
pub fn norm_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

/// Continued fraction for I_x(a, b) by the modified Lentz method.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
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
    for m in 1..=CF_MAX_ITER {
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
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= EPS {
            break;
        }
    }
    h
}

/// Returns `(I_x(a,b), 1 - I_x(a,b))` with both members accurate to relative
/// precision. `y` must equal `1 - x`; callers pass it separately so that it
/// can be formed without cancellation.
pub fn beta_reg_pair(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if y <= 0.0 {
        return (1.0, 0.0);
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = ln_front.exp() * beta_cf(a, b, x) / a;
        (lower, 1.0 - lower)
    } else {
        let upper = ln_front.exp() * beta_cf(b, a, y) / b;
        (1.0 - upper, upper)
    }
}

/// Regularized incomplete beta function I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    beta_reg_pair(a, b, x, 1.0 - x).0
}

/// Inverse of `x -> I_x(a, b)`: Halley iterations from the usual asymptotic
/// starting point, with a bisection fallback.
pub fn inv_beta_reg(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let a1 = a - 1.0;
    let b1 = b - 1.0;
    let mut x;
    if a >= 1.0 && b >= 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            x = -x;
        }
        let al = (x * x - 3.0) / 6.0;
        let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        let w = x * (al + h).sqrt() / h
            - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        x = a / (a + b * (2.0 * w).exp());
    } else {
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let u = (b * lnb).exp() / b;
        let w = t + u;
        x = if p < t / w {
            (a * w * p).powf(1.0 / a)
        } else {
            1.0 - (b * w * (1.0 - p)).powf(1.0 / b)
        };
    }
    let afac = -ln_beta(a, b);
    let mut converged = false;
    for j in 0..64 {
        if x <= 0.0 || x >= 1.0 {
            break;
        }
        let err = beta_reg(a, b, x) - p;
        let dens = (a1 * x.ln() + b1 * (1.0 - x).ln() + afac).exp();
        if !dens.is_finite() || dens == 0.0 {
            break;
        }
        let u = err / dens;
        let step = u / (1.0 - 0.5 * (u * (a1 / x - b1 / (1.0 - x))).min(1.0));
        x -= step;
        if x <= 0.0 {
            x = 0.5 * (x + step);
        }
        if x >= 1.0 {
            x = 0.5 * (x + step + 1.0);
        }
        if step.abs() < 1e-14 * x && j > 0 {
            converged = true;
            break;
        }
    }
    if converged && (beta_reg(a, b, x) - p).abs() <= 1e-9 * p.min(1.0 - p) {
        return x;
    }
    bisect_beta(a, b, p)
}

fn bisect_beta(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Upper tail P(T > t) of Student's t with `df` degrees of freedom.
pub fn t_sf(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    let half = 0.5 * beta_reg_pair(df / 2.0, 0.5, x, y).0;
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

/// Critical value t with P(T_df > t) = alpha, for alpha in (0, 0.5].
pub fn t_quantile_upper(alpha: f64, df: f64) -> f64 {
    let x = inv_beta_reg(df / 2.0, 0.5, 2.0 * alpha);
    (df * (1.0 - x) / x).sqrt()
}

/// CDF of the noncentral t distribution, algorithm AS 243 (Lenth, 1989).
pub fn nct_cdf(t: f64, df: f64, ncp: f64) -> f64 {
    const ERRMAX: f64 = 1e-13;
    const ITRMAX: usize = 2000;
    let (tt, del, negdel) = if t < 0.0 { (-t, -ncp, true) } else { (t, ncp, false) };
    let x = tt * tt / (tt * tt + df);
    let mut tnc = 0.0;
    if x > 0.0 {
        let lambda = del * del;
        let mut p = 0.5 * (-0.5 * lambda).exp();
        let mut q = (2.0 / std::f64::consts::PI).sqrt() * p * del;
        let mut s = 0.5 - p;
        if s < 1e-7 {
            s = -0.5 * (-0.5 * lambda).exp_m1();
        }
        let mut a = 0.5;
        let b = 0.5 * df;
        let omx = df / (tt * tt + df);
        let rxb = omx.powf(b);
        let albeta = 0.5 * std::f64::consts::PI.ln() + ln_gamma(b) - ln_gamma(0.5 + b);
        let mut xodd = beta_reg_pair(a, b, x, omx).0;
        let mut godd = 2.0 * rxb * (a * x.ln() - albeta).exp();
        let mut xeven = if b * x <= 1e-7 { b * x } else { 1.0 - rxb };
        let mut geven = b * x * rxb;
        tnc = p * xodd + q * xeven;
        let mut en = 1.0;
        loop {
            a += 1.0;
            xodd -= godd;
            xeven -= geven;
            godd *= x * (a + b - 1.0) / a;
            geven *= x * (a + b - 0.5) / (a + 0.5);
            p *= lambda / (2.0 * en);
            q *= lambda / (2.0 * en + 1.0);
            s -= p;
            en += 1.0;
            tnc += p * xodd + q * xeven;
            let errbd = 2.0 * s * (xodd - godd);
            if errbd.abs() <= ERRMAX || en as usize > ITRMAX {
                break;
            }
        }
    }
    tnc += norm_cdf(-del);
    let tnc = tnc.clamp(0.0, 1.0);
    if negdel {
        1.0 - tnc
    } else {
        tnc
    }
}

/// Upper tail of the noncentral t distribution.
pub fn nct_sf(t: f64, df: f64, ncp: f64) -> f64 {
    1.0 - nct_cdf(t, df, ncp)
}

/// Upper tail P(T > t) of the doubly noncentral t variable
/// `(Z + ncp) / sqrt(X / df)`, with `X` noncentral chi-square on `df` degrees
/// of freedom and noncentrality `lambda`. Evaluated as a Poisson mixture of
/// singly noncentral t tails.
pub fn dnct_sf(t: f64, df: f64, ncp: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return nct_sf(t, df, ncp);
    }
    let half = 0.5 * lambda;
    let mut weight = (-half).exp();
    let mut cum = 0.0;
    let mut total = 0.0;
    let mut j = 0.0_f64;
    // The tail bound (1 - cum) is exact because each term is at most 1.
    while 1.0 - cum > 1e-15 && j < 10_000.0 {
        let dfj = df + 2.0 * j;
        total += weight * nct_sf(t * (dfj / df).sqrt(), dfj, ncp);
        cum += weight;
        j += 1.0;
        weight *= half / j;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composite Simpson on [lo, hi] with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + i as f64 * h);
        }
        s * h / 3.0
    }

    /// I_x(a,b) by quadrature of the beta density, substituting u^(1/a) to
    /// remove the endpoint singularity at 0 (valid for b >= 1 or x < 1).
    fn beta_quadrature(a: f64, b: f64, x: f64) -> f64 {
        let lb = ln_beta(a, b);
        if a >= 1.0 {
            let dens = |t: f64| ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - lb).exp();
            return simpson(|t| if t <= 0.0 { if a == 1.0 { (-lb).exp() } else { 0.0 } } else { dens(t) }, 0.0, x, 20_000);
        }
        // t = u^(1/a), dt = (1/a) u^(1/a - 1) du, t^(a-1) dt = du / a
        let g = |u: f64| {
            let t = u.powf(1.0 / a);
            ((b - 1.0) * (1.0 - t).ln() - lb).exp() / a
        };
        simpson(g, 0.0, x.powf(a), 20_000)
    }

    #[test]
    fn incomplete_beta_matches_quadrature() {
        for &(a, b) in &[(0.5, 1.5), (0.5, 49.0), (2.0, 3.0), (49.0, 0.5 + 1.0), (5.0, 5.0)] {
            for &x in &[0.01, 0.2, 0.5, 0.7, 0.95] {
                let q = beta_quadrature(a, b, x);
                assert_relative_eq!(beta_reg(a, b, x), q, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1/2, 1/2) = (2/pi) asin(sqrt x)
        for &x in &[0.0f64, 0.1, 0.3, 0.77, 1.0] {
            let want = 2.0 / std::f64::consts::PI * x.sqrt().asin();
            assert!((beta_reg(0.5, 0.5, x) - want).abs() < 1e-13);
        }
        // I_x(1, b) = 1 - (1-x)^b
        for &x in &[0.05, 0.5, 0.9] {
            assert_relative_eq!(beta_reg(1.0, 7.5, x), 1.0 - (1.0 - x).powf(7.5), max_relative = 1e-13);
        }
    }

    #[test]
    fn complement_is_accurate_in_the_tail() {
        // 1 - I_x(1, b) = (1-x)^b, tiny when x is close to 1
        let (lower, upper) = beta_reg_pair(1.0, 50.0, 0.9, 0.1);
        assert_relative_eq!(upper, 0.1_f64.powi(50), max_relative = 1e-11);
        assert!(lower == 1.0 || 1.0 - lower < 1e-40);
    }

    #[test]
    fn inverse_round_trips() {
        for &(a, b) in &[(0.5, 0.5), (0.5, 49.0), (49.0, 0.5), (1.0, 1.0), (3.0, 0.7), (0.2, 0.3)] {
            for &p in &[1e-8, 1e-3, 0.05, 0.3, 0.5, 0.9, 0.999] {
                let x = inv_beta_reg(a, b, p);
                assert_relative_eq!(beta_reg(a, b, x), p, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn t_tail_matches_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &df in &[1.0, 3.0, 10.0, 98.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for &t in &[-2.0, -0.3, 0.0, 0.4, 1.66, 5.0] {
                assert!((t_sf(t, df) - dist.sf(t)).abs() < 1e-10, "df {df} t {t}");
            }
            let q = t_quantile_upper(0.05, df);
            assert!((t_sf(q, df) - 0.05).abs() < 1e-12);
        }
    }

    /// Noncentral t tail by quadrature over the chi-square mixing variable.
    fn nct_sf_quadrature(t: f64, df: f64, ncp: f64, lambda: f64) -> f64 {
        // X = sum of df standard normals squared plus noncentrality; only the
        // central case (lambda = 0) is integrated directly here.
        assert_eq!(lambda, 0.0);
        let ln_norm = -(df / 2.0) * 2f64.ln() - ln_gamma(df / 2.0);
        let dens = |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            (ln_norm + (df / 2.0 - 1.0) * v.ln() - v / 2.0).exp()
        };
        let hi = df + 40.0 * (2.0 * df).sqrt() + 60.0;
        simpson(|v| dens(v) * (1.0 - norm_cdf(t * (v / df).sqrt() - ncp)), 0.0, hi, 200_000)
    }

    #[test]
    fn noncentral_t_matches_quadrature() {
        for &df in &[4.0, 10.0, 98.0] {
            for &(t, ncp) in &[(1.66, 2.5), (0.5, 0.0), (2.0, 1.0), (-1.0, 0.5), (3.0, 4.0)] {
                let q = nct_sf_quadrature(t, df, ncp, 0.0);
                assert!((nct_sf(t, df, ncp) - q).abs() < 1e-8, "df {df} t {t} ncp {ncp}: {} vs {q}", nct_sf(t, df, ncp));
            }
        }
    }

    #[test]
    fn noncentral_t_reduces_to_central() {
        for &t in &[-1.0, 0.0, 0.7, 2.2] {
            assert!((nct_sf(t, 12.0, 0.0) - t_sf(t, 12.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn doubly_noncentral_monotone_in_denominator_noncentrality() {
        let base = dnct_sf(1.66, 98.0, 2.0, 0.0);
        let inflated = dnct_sf(1.66, 98.0, 2.0, 4.0);
        assert!(inflated < base);
        assert_eq!(base, nct_sf(1.66, 98.0, 2.0));
    }
}
