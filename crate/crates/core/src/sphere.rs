//! Sphere-level primitives: the contrast basis, standardization onto the unit
//! sphere, spherical-cap volumes and samplers, and the projected-normal
//! (angular Gaussian) density.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::McRng;
use crate::special::{beta_reg_pair, inv_beta_reg, norm_cdf};

/// Helmert basis of the contrast space {a : aᵀ1 = 0}.
///
/// Row k (k = 1, …, n−1) is `(1, …, 1, −k, 0, …, 0) / sqrt(k(k+1))` with k
/// leading ones. The matrix is never stored; products with B and Bᵀ are O(n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastBasis {
    n: usize,
}

impl ContrastBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDesign(format!("contrast basis needs n >= 2, got {n}")));
        }
        Ok(Self { n })
    }

    /// Observation count n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the ambient space of the sphere, n − 1.
    pub fn dim(&self) -> usize {
        self.n - 1
    }

    /// Row k (1-based, 1 ≤ k ≤ n−1) of B.
    pub fn row(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1 && k < self.n, "row index out of range");
        let s = 1.0 / ((k * (k + 1)) as f64).sqrt();
        let mut row = vec![0.0; self.n];
        row[..k].iter_mut().for_each(|v| *v = s);
        row[k] = -(k as f64) * s;
        row
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (1..self.n).map(|k| self.row(k)).collect()
    }

    /// Bx.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must equal n");
        let mut out = Vec::with_capacity(self.n - 1);
        let mut prefix = 0.0;
        for k in 1..self.n {
            prefix += x[k - 1];
            let kf = k as f64;
            out.push((prefix - kf * x[k]) / (kf * (kf + 1.0)).sqrt());
        }
        out
    }

    /// Bᵀv; equals the Moore–Penrose pseudoinverse B⁺v since B has orthonormal rows.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n - 1, "vector length must equal n - 1");
        let mut out = vec![0.0; self.n];
        let mut suffix = 0.0;
        for i in (1..=self.n).rev() {
            // contributions of rows k >= i (entry 1/sqrt(k(k+1)))
            if i < self.n {
                let kf = i as f64;
                suffix += v[i - 1] / (kf * (kf + 1.0)).sqrt();
            }
            let mut value = suffix;
            if i >= 2 {
                let kf = (i - 1) as f64;
                value -= kf * v[i - 2] / (kf * (kf + 1.0)).sqrt();
            }
            out[i - 1] = value;
        }
        out
    }
}

/// A point on the unit sphere of R^(d+1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `v`; fails if `v` is zero or not finite.
    pub fn normalize(mut v: Vec<f64>) -> Result<Self> {
        let norm = norm(&v);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain("cannot normalize a zero or non-finite vector".into()));
        }
        v.iter_mut().for_each(|c| *c /= norm);
        Ok(Self(v))
    }

    /// Wraps coordinates that are already unit length (checked to 1e−10).
    pub fn from_unit(v: Vec<f64>) -> Result<Self> {
        if (norm(&v) - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("vector norm {} is not 1", norm(&v))));
        }
        Ok(Self(v))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Intrinsic dimension d of the sphere containing this vector.
    pub fn sphere_dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn neg(&self) -> UnitVector {
        UnitVector(self.0.iter().map(|c| -c).collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Centered, scaled image Bx/‖Bx‖ of `x` on the unit sphere.
pub fn standardize(x: &[f64], basis: &ContrastBasis) -> Result<UnitVector> {
    if x.len() != basis.n() {
        return Err(Error::InvalidDesign(format!(
            "vector has length {}, basis expects {}",
            x.len(),
            basis.n()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("shape values are not finite".into()));
    }
    let bx = basis.apply(x);
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let nb = norm(&bx);
    if nb == 0.0 || nb <= 1e-13 * scale * (x.len() as f64).sqrt() {
        return Err(Error::DegenerateShape(None));
    }
    Ok(UnitVector(bx.into_iter().map(|v| v / nb).collect()))
}

/// Fraction of the sphere S^d covered by a cap {v : sᵀv > r}.
pub fn cap_volume_fraction(r: f64, d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::Domain(format!("sphere dimension {d}")));
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("cap radius {r}")));
    }
    Ok(cap_fraction(r, d))
}

pub(crate) fn cap_fraction(r: f64, d: usize) -> f64 {
    if r < 0.0 {
        return 1.0 - cap_fraction(-r, d);
    }
    // (1 − F(r², 1/2, d/2)) / 2 = I_{1−r²}(d/2, 1/2) / 2
    0.5 * beta_reg_pair(d as f64 / 2.0, 0.5, (1.0 - r) * (1.0 + r), r * r).0
}

/// Uniform point on S^d (a normalized standard normal vector in R^(d+1)).
pub fn sample_uniform_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitVector {
    loop {
        let g: Vec<f64> = (0..=d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = UnitVector::normalize(g) {
            return u;
        }
    }
}

/// Inverse of the upper-tail cap fraction: the cosine t with
/// `cap_fraction(t, d) = q`, for q in (0, 1).
pub(crate) fn cap_cosine_for_tail(q: f64, d: usize) -> f64 {
    let df = d as f64;
    if q <= 0.5 {
        let x = inv_beta_reg(df / 2.0, 0.5, 2.0 * q);
        (1.0 - x).max(0.0).sqrt()
    } else {
        -inv_beta_reg(0.5, df / 2.0, 2.0 * q - 1.0).sqrt()
    }
}

/// Uniform point on the cap {v : wᵀv > r}.
///
/// The cosine t = wᵀV is drawn by inverting its marginal (the tail mass of a
/// cap is an incomplete beta function), and the remaining direction uniformly
/// from the unit sphere of w⊥.
pub fn sample_uniform_cap<R: Rng + ?Sized>(w: &UnitVector, r: f64, rng: &mut R) -> Result<UnitVector> {
    if r >= 1.0 {
        return Err(Error::EmptyCap(r));
    }
    let d = w.sphere_dim();
    if d < 1 {
        return Err(Error::Domain("cap sampling needs d >= 1".into()));
    }
    let tail = cap_fraction(r.max(-1.0), d);
    Ok(sample_cap_with_tail(w, r, tail, rng))
}

/// Cap sampler with the tail mass `cap_fraction(r, d)` precomputed.
pub(crate) fn sample_cap_with_tail<R: Rng + ?Sized>(
    w: &UnitVector,
    r: f64,
    tail: f64,
    rng: &mut R,
) -> UnitVector {
    let d = w.sphere_dim();
    // q uniform on (0, tail]
    let q = tail * (1.0 - rng.random::<f64>());
    let mut t = cap_cosine_for_tail(q, d).clamp(-1.0, 1.0);
    if t < r {
        t = r;
    }
    let wc = w.coords();
    let perp = loop {
        let mut g: Vec<f64> = (0..wc.len()).map(|_| rng.sample(StandardNormal)).collect();
        let proj = dot(&g, wc);
        g.iter_mut().zip(wc).for_each(|(gi, wi)| *gi -= proj * wi);
        let ng = norm(&g);
        if ng > 1e-12 {
            g.iter_mut().for_each(|gi| *gi /= ng);
            break g;
        }
    };
    let s = ((1.0 - t) * (1.0 + t)).max(0.0).sqrt();
    let v: Vec<f64> = wc.iter().zip(&perp).map(|(wi, ui)| t * wi + s * ui).collect();
    UnitVector::normalize(v).expect("cap sample has unit norm")
}

/// A density on the sphere with respect to the uniform probability measure.
pub trait SphereDensity: Sync {
    fn density(&self, v: &[f64]) -> f64;

    fn log_density(&self, v: &[f64]) -> f64 {
        self.density(v).ln()
    }

    /// A draw from the law itself, when it can be sampled directly.
    fn sample_point(&self, _rng: &mut McRng) -> Option<UnitVector> {
        None
    }

    /// True when the density is identically one.
    fn is_uniform(&self) -> bool {
        false
    }
}

/// The uniform law, f ≡ 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl SphereDensity for Uniform {
    fn density(&self, _v: &[f64]) -> f64 {
        1.0
    }

    fn is_uniform(&self) -> bool {
        true
    }
}

/// Mean parameter of the projected normal law of X/‖X‖, X ~ N(m, I).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGaussianParam {
    pub m: Vec<f64>,
}

/// Projected normal density with the dimension-dependent constants cached.
#[derive(Debug, Clone)]
pub struct AngularGaussian {
    m: Vec<f64>,
    p: usize,
    log_const: f64,
    uniform: bool,
}

impl AngularGaussian {
    pub fn new(param: &AngularGaussianParam) -> Result<Self> {
        let m = param.m.clone();
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("angular Gaussian mean must be finite".into()));
        }
        let p = m.len();
        if p < 2 {
            return Err(Error::Domain("angular Gaussian needs dimension >= 2".into()));
        }
        let pf = p as f64;
        let nsq = dot(&m, &m);
        // A_p (2π)^(−p/2) = 2^(1 − p/2) / Γ(p/2)
        let log_const = std::f64::consts::LN_2 * (1.0 - pf / 2.0) - ln_gamma(pf / 2.0) - nsq / 2.0;
        Ok(Self { m, p, log_const, uniform: nsq == 0.0 })
    }

    pub fn log_density(&self, v: &[f64]) -> f64 {
        if self.uniform {
            return 0.0;
        }
        self.log_const + ln_radial_moment(self.p, dot(v, &self.m))
    }
}

impl SphereDensity for AngularGaussian {
    fn density(&self, v: &[f64]) -> f64 {
        self.log_density(v).exp()
    }

    fn log_density(&self, v: &[f64]) -> f64 {
        AngularGaussian::log_density(self, v)
    }

    fn sample_point(&self, rng: &mut McRng) -> Option<UnitVector> {
        Some(crate::tube::standardized_response(&self.m, rng))
    }

    fn is_uniform(&self) -> bool {
        self.uniform
    }
}

/// Density of X/‖X‖, X ~ N(m, I_p), at `v`, relative to the uniform
/// probability measure on the sphere.
pub fn projected_normal_density(v: &UnitVector, m: &AngularGaussianParam) -> Result<f64> {
    if v.dim() != m.m.len() {
        return Err(Error::Domain("dimension mismatch between point and mean".into()));
    }
    Ok(AngularGaussian::new(m)?.density(v.coords()))
}

/// ln I_p(t), where I_p(t) = ∫₀^∞ ρ^(p−1) exp(−ρ²/2 + tρ) dρ.
///
/// For t ≥ 0 the three-term recursion I_p = (p−2) I_{p−2} + t I_{p−1} has only
/// positive terms and is run forward on the ratios I_k / I_{k−1}. For t < 0 the
/// wanted solution is subdominant and forward recursion loses all precision,
/// so the integral is evaluated directly by the trapezoid rule in ln ρ.
pub fn ln_radial_moment(p: usize, t: f64) -> f64 {
    assert!(p >= 1);
    if t >= 0.0 {
        ln_radial_moment_recursion(p, t)
    } else {
        ln_radial_moment_quadrature(p, t)
    }
}

pub(crate) fn ln_radial_moment_recursion(p: usize, t: f64) -> f64 {
    let ln_i1 = 0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 * t * t + norm_cdf(t).ln();
    if p == 1 {
        return ln_i1;
    }
    let mut ratio = (-ln_i1).exp() + t;
    let mut log_acc = ln_i1;
    let mut prod = ratio;
    for k in 3..=p {
        ratio = (k as f64 - 2.0) / ratio + t;
        prod *= ratio;
        if !(1e-200..=1e200).contains(&prod) {
            log_acc += prod.ln();
            prod = 1.0;
        }
    }
    log_acc + prod.ln()
}

pub(crate) fn ln_radial_moment_quadrature(p: usize, t: f64) -> f64 {
    let pf = p as f64;
    let disc = (t * t + 4.0 * pf).sqrt();
    let rho = if t < 0.0 { 2.0 * pf / (disc - t) } else { 0.5 * (t + disc) };
    let s0 = rho.ln();
    let h = |s: f64| {
        let e = s.exp();
        pf * s - 0.5 * e * e + t * e
    };
    let h0 = h(s0);
    let sigma = 1.0 / (rho * (2.0 * rho - t)).sqrt();
    let step = (sigma / 4.0).min(0.1);
    let mut sum = 1.0;
    for dir in [-1.0, 1.0] {
        let mut k = 1.0;
        loop {
            let v = h(s0 + dir * k * step) - h0;
            sum += v.exp();
            if v < -46.0 || k > 1e6 {
                break;
            }
            k += 1.0;
        }
    }
    h0 + (sum * step).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    #[test]
    fn helmert_small_cases() {
        let b2 = ContrastBasis::new(2).unwrap().matrix();
        let s = 1.0 / 2f64.sqrt();
        assert_eq!(b2, vec![vec![s, -s]]);
        let b3 = ContrastBasis::new(3).unwrap().matrix();
        assert_relative_eq!(b3[0][0], s);
        assert_relative_eq!(b3[0][1], -s);
        assert_eq!(b3[0][2], 0.0);
        let s6 = 1.0 / 6f64.sqrt();
        assert_relative_eq!(b3[1][0], s6);
        assert_relative_eq!(b3[1][1], s6);
        assert_relative_eq!(b3[1][2], -2.0 * s6);
        assert!(ContrastBasis::new(1).is_err());
    }

    #[test]
    fn helmert_orthonormal_and_centered() {
        for n in [2usize, 3, 7, 50, 200, 500] {
            let b = ContrastBasis::new(n).unwrap().matrix();
            for (i, ri) in b.iter().enumerate() {
                assert!(ri.iter().sum::<f64>().abs() <= 1e-12);
                // sparse check of BBᵀ: rows i and j overlap on the first i+1 entries
                for (j, rj) in b.iter().enumerate().skip(i.saturating_sub(2)).take(5) {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(ri, rj) - want).abs() <= 1e-12, "n={n} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn fast_products_match_matrix() {
        let basis = ContrastBasis::new(9).unwrap();
        let mat = basis.matrix();
        let x: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let bx = basis.apply(&x);
        for (k, row) in mat.iter().enumerate() {
            assert_relative_eq!(bx[k], dot(row, &x), epsilon = 1e-14);
        }
        let v: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).cos()).collect();
        let btv = basis.apply_transpose(&v);
        for i in 0..9 {
            let want: f64 = (0..8).map(|k| mat[k][i] * v[k]).sum();
            assert_relative_eq!(btv[i], want, epsilon = 1e-14);
        }
    }

    #[test]
    fn standardize_examples() {
        let b2 = ContrastBasis::new(2).unwrap();
        let u = standardize(&[0.0, 1.0], &b2).unwrap();
        assert_relative_eq!(u.coords()[0], -1.0, epsilon = 1e-15);
        let b3 = ContrastBasis::new(3).unwrap();
        assert!(matches!(standardize(&[1.0, 1.0, 1.0], &b3), Err(Error::DegenerateShape(_))));
        let a = standardize(&[0.0, 1.0, 2.0], &b3).unwrap();
        let b = standardize(&[5.0, 7.0, 9.0], &b3).unwrap();
        for (x, y) in a.coords().iter().zip(b.coords()) {
            assert!((x - y).abs() <= 1e-12);
        }
        let c = standardize(&[3.0, 1.0, -1.0], &b3).unwrap();
        for (x, y) in a.coords().iter().zip(c.coords()) {
            assert!((x + y).abs() <= 1e-12);
        }
    }

    #[test]
    fn cap_fraction_examples() {
        for d in [1, 2, 5, 98] {
            assert_eq!(cap_volume_fraction(0.0, d).unwrap(), 0.5);
            assert_eq!(cap_volume_fraction(1.0, d).unwrap(), 0.0);
            assert_eq!(cap_volume_fraction(-1.0, d).unwrap(), 1.0);
        }
        for i in 0..=20 {
            let theta = std::f64::consts::PI * i as f64 / 20.0;
            let c = cap_volume_fraction(theta.cos(), 1).unwrap();
            assert!((c - theta / std::f64::consts::PI).abs() < 1e-12);
        }
        // Archimedes: on S² the cap fraction is linear in r
        assert_relative_eq!(cap_volume_fraction(0.3, 2).unwrap(), 0.35, epsilon = 1e-13);
        assert!(cap_volume_fraction(1.2, 3).is_err());
        assert!(cap_volume_fraction(0.2, 0).is_err());
    }

    #[test]
    fn cap_inverse_round_trip() {
        for d in [1, 2, 10, 98] {
            for &r in &[-0.8, -0.1, 0.0, 0.197, 0.6, 0.95] {
                let q = cap_fraction(r, d);
                if q > 1.0 - 1e-12 {
                    continue;
                }
                assert!((cap_cosine_for_tail(q, d) - r).abs() < 1e-9, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn cap_samples_stay_in_cap() {
        let mut rng = stream_rng(11, 0);
        for d in [1, 2, 10, 98] {
            let w = sample_uniform_sphere(d, &mut rng);
            for &r in &[-0.5, 0.0, 0.3, 0.99] {
                for _ in 0..200 {
                    let v = sample_uniform_cap(&w, r, &mut rng).unwrap();
                    assert!((norm(v.coords()) - 1.0).abs() < 1e-12);
                    assert!(w.dot(&v) >= r - 1e-12);
                }
            }
        }
        let w = sample_uniform_sphere(3, &mut rng);
        assert!(matches!(sample_uniform_cap(&w, 1.0, &mut rng), Err(Error::EmptyCap(_))));
    }

    #[test]
    fn uniform_density_is_one() {
        let g = AngularGaussian::new(&AngularGaussianParam { m: vec![0.0; 99] }).unwrap();
        assert_eq!(g.density(&[1.0; 99]), 1.0);
        // the radial moment route must agree with the closed form as well
        for p in [2usize, 3, 10, 99, 200] {
            let pf = p as f64;
            let closed = (pf / 2.0 - 1.0) * std::f64::consts::LN_2 + ln_gamma(pf / 2.0);
            assert!((ln_radial_moment(p, 0.0) - closed).abs() < 1e-12 * closed.abs().max(1.0));
        }
    }

    /// ln I_p(t) by composite Simpson in ρ around the mode, independent of the
    /// recursion and of the log-variable trapezoid rule.
    fn ln_moment_oracle(p: usize, t: f64) -> f64 {
        let pf = p as f64;
        let g = |rho: f64| (pf - 1.0) * rho.ln() - 0.5 * rho * rho + t * rho;
        let mode = 0.5 * (t + (t * t + 4.0 * (pf - 1.0)).sqrt()).max(1e-3);
        let gmax = g(mode);
        let hi = mode + 40.0;
        let n = 400_000;
        let h = hi / n as f64;
        let f = |rho: f64| if rho <= 0.0 { if p == 1 { (-gmax).exp() } else { 0.0 } } else { (g(rho) - gmax).exp() };
        let mut s = f(0.0) + f(hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        gmax + (s * h / 3.0).ln()
    }

    #[test]
    fn radial_moment_matches_quadrature_oracle() {
        for &p in &[1usize, 2, 3, 10, 99, 200] {
            for &t in &[-30.0, -5.0, -0.5, 0.0, 0.7, 4.0, 30.0] {
                let want = ln_moment_oracle(p, t);
                let got = ln_radial_moment(p, t);
                assert!((got - want).abs() < 1e-8, "p={p} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn recursion_and_log_quadrature_agree() {
        for &p in &[2usize, 5, 99, 200] {
            for &t in &[0.0, 0.3, 2.0, 10.0] {
                let a = ln_radial_moment_recursion(p, t);
                let b = ln_radial_moment_quadrature(p, t);
                assert!((a - b).abs() < 1e-10, "p={p} t={t}");
            }
        }
    }

    #[test]
    fn p3_density_example() {
        let v = UnitVector::from_unit(vec![0.0, 0.0, 1.0]).unwrap();
        let m = AngularGaussianParam { m: vec![0.0, 0.0, 2.0] };
        let f = projected_normal_density(&v, &m).unwrap();
        // A_3 (2π)^(-3/2) e^(-2) I_3(2), I_3 by Simpson
        let n = 200_000;
        let hi = 40.0;
        let h = hi / n as f64;
        let g = |x: f64| x * x * (-0.5 * x * x + 2.0 * x).exp();
        let mut s = g(0.0) + g(hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        let i3 = s * h / 3.0;
        let a3 = 4.0 * std::f64::consts::PI;
        let want = a3 * (2.0 * std::f64::consts::PI).powf(-1.5) * (-2.0f64).exp() * i3;
        assert!((f - want).abs() < 1e-8 * want);
    }
}
