//! Monte Carlo estimation of probability content of tubes around the model
//! manifold, and everything built on it: p-values, critical values, power
//! and sample size.
//!
//! Each draw pairs an anchor W on the manifold with a point V uniform on the
//! cap of radius r around W. The tube integral of a density f is estimated by
//! c_r Σ_k f(V_k) / m_k, where m_k counts the anchors whose cap contains V_k.
//! Inner products between anchors and cap points only need the coordinates of
//! V in the span of the manifold, which for dose-based shapes has dimension
//! (number of doses − 1); counting therefore costs O(κ · anchors · G).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{map_chunks, pairwise_sum, stream_rng};
use crate::shapes::{CandidateModel, Design, Family, Manifold, Provenance};
use crate::special::{dnct_sf, t_quantile_upper};
use crate::sphere::{
    cap_cosine_for_tail, cap_fraction, sample_cap_with_tail, AngularGaussian, AngularGaussianParam,
    SphereDensity, Uniform, UnitVector,
};

/// Sample sizes below this are flagged as unreliable.
pub const MIN_RELIABLE_KAPPA: usize = 1000;

/// Monte Carlo controls shared by every tube computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    /// Initial number of draws κ.
    pub kappa: usize,
    pub seed: u64,
    /// Double κ until the standard error is at most this (None: single pass).
    pub se_target: Option<f64>,
    pub max_kappa: usize,
    /// Count cap membership against at most this many anchors.
    pub max_anchors: Option<usize>,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { kappa: 20_000, seed: 0, se_target: Some(0.001), max_kappa: 1_000_000, max_anchors: Some(50_000) }
    }
}

impl McOptions {
    /// Single pass with exactly κ draws and exact counting.
    pub fn fixed(kappa: usize, seed: u64) -> Self {
        Self { kappa, seed, se_target: None, max_kappa: kappa, max_anchors: None }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.kappa < 2 {
            return Err(Error::Config(format!("kappa = {} is too small", self.kappa)));
        }
        if self.max_kappa < self.kappa {
            return Err(Error::Config("max kappa is below kappa".into()));
        }
        if let Some(t) = self.se_target {
            if !(t > 0.0) {
                return Err(Error::Config("standard-error target must be positive".into()));
            }
        }
        if self.max_anchors == Some(0) {
            return Err(Error::Config("anchor count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeEstimate {
    pub value: f64,
    pub se: f64,
    pub kappa: usize,
    pub r: f64,
    /// Anchors used for counting (κ when counting is exact).
    pub anchors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// The raw draws behind one estimate.
#[derive(Debug, Clone)]
pub struct TubeSampleBatch {
    pub r: f64,
    pub w: Vec<UnitVector>,
    pub v: Vec<UnitVector>,
    /// Number of anchors W_j whose cap contains V_k (exact counting).
    pub m: Vec<usize>,
    pub provenance: Vec<Provenance>,
}

impl TubeSampleBatch {
    pub fn kappa(&self) -> usize {
        self.w.len()
    }
}

/// Coordinates stored dimension-major so the counting loop vectorizes.
struct Soa {
    cols: Vec<Vec<f32>>,
}

struct Draws {
    w: Soa,
    v: Soa,
    /// ln f(V_k)
    f: Vec<f64>,
}

struct ChunkDraws {
    w: Vec<f64>,
    v: Vec<f64>,
    f: Vec<f64>,
    full: Option<(Vec<UnitVector>, Vec<UnitVector>, Vec<Provenance>)>,
}

fn draw_chunk(
    man: &Manifold,
    r: f64,
    tail: f64,
    f: &dyn SphereDensity,
    seed: u64,
    chunk: u64,
    len: usize,
    keep: bool,
) -> Result<ChunkDraws> {
    let q = man.frame().dim();
    let mut wrng = stream_rng(seed, 2 * chunk);
    let mut vrng = stream_rng(seed, 2 * chunk + 1);
    let mut out = ChunkDraws {
        w: vec![0.0; len * q],
        v: vec![0.0; len * q],
        f: Vec::with_capacity(len),
        full: keep.then(|| (Vec::new(), Vec::new(), Vec::new())),
    };
    let uniform = f.is_uniform();
    for i in 0..len {
        let (w, prov) = man.sample(&mut wrng)?;
        let v = sample_cap_with_tail(&w, r, tail, &mut vrng);
        man.frame().project_into(w.coords(), &mut out.w[i * q..(i + 1) * q]);
        man.frame().project_into(v.coords(), &mut out.v[i * q..(i + 1) * q]);
        out.f.push(if uniform { 0.0 } else { f.log_density(v.coords()) });
        if let Some((ws, vs, ps)) = &mut out.full {
            ws.push(w);
            vs.push(v);
            ps.push(prov);
        }
    }
    Ok(out)
}

fn draw(
    man: &Manifold,
    r: f64,
    f: &dyn SphereDensity,
    kappa: usize,
    seed: u64,
    keep: bool,
) -> Result<(Draws, Option<TubeSampleBatch>)> {
    let tail = cap_fraction(r, man.d());
    let chunks = map_chunks(kappa, |c, range| draw_chunk(man, r, tail, f, seed, c, range.len(), keep));
    let q = man.frame().dim();
    let mut w = Soa { cols: vec![Vec::with_capacity(kappa); q] };
    let mut v = Soa { cols: vec![Vec::with_capacity(kappa); q] };
    let mut fs = Vec::with_capacity(kappa);
    let mut batch = keep.then(|| TubeSampleBatch { r, w: vec![], v: vec![], m: vec![], provenance: vec![] });
    for c in chunks {
        let c = c?;
        for (dst, src) in [(&mut w, &c.w), (&mut v, &c.v)] {
            for row in src.chunks_exact(q) {
                dst.cols.iter_mut().zip(row).for_each(|(col, x)| col.push(*x as f32));
            }
        }
        fs.extend_from_slice(&c.f);
        if let (Some(b), Some((ws, vs, ps))) = (&mut batch, c.full) {
            b.w.extend(ws);
            b.v.extend(vs);
            b.provenance.extend(ps);
        }
    }
    Ok((Draws { w, v, f: fs }, batch))
}

const TILE: usize = 2048;

const LANES: usize = 8;

fn count_tile<const Q: usize>(w: [&[f32]; Q], v: [f32; Q], r: f32) -> u32 {
    let len = w[0].len();
    let body = len - len % LANES;
    let mut hits = [0u32; LANES];
    for base in (0..body).step_by(LANES) {
        let lane = |dim: usize| -> &[f32; LANES] { w[dim][base..base + LANES].try_into().unwrap() };
        let mut s = [0.0f32; LANES];
        let w0 = lane(0);
        for l in 0..LANES {
            s[l] = w0[l] * v[0];
        }
        for dim in 1..Q {
            let wd = lane(dim);
            for l in 0..LANES {
                s[l] += wd[l] * v[dim];
            }
        }
        for l in 0..LANES {
            hits[l] += (s[l] > r) as u32;
        }
    }
    let mut count: u32 = hits.iter().sum();
    for j in body..len {
        let mut s = w[0][j] * v[0];
        for dim in 1..Q {
            s += w[dim][j] * v[dim];
        }
        count += (s > r) as u32;
    }
    count
}

fn count_tile_dyn(w: &[&[f32]], v: &[f32], r: f32, acc: &mut [f32]) -> u32 {
    acc.iter_mut().zip(w[0]).for_each(|(a, x)| *a = x * v[0]);
    for dim in 1..w.len() {
        acc.iter_mut().zip(w[dim]).for_each(|(a, x)| *a += x * v[dim]);
    }
    acc.iter().map(|&a| (a > r) as u32).sum()
}

fn count_block(w: &Soa, v: &Soa, range: std::ops::Range<usize>, start: usize, end: usize, r: f32, counts: &mut [u32]) {
    let q = w.cols.len();
    macro_rules! fixed {
        ($q:literal) => {{
            let w: [&[f32]; $q] = std::array::from_fn(|i| &w.cols[i][start..end]);
            for (c, k) in counts.iter_mut().zip(range) {
                let v: [f32; $q] = std::array::from_fn(|i| v.cols[i][k]);
                *c += count_tile::<$q>(w, v, r);
            }
        }};
    }
    match q {
        1 => fixed!(1),
        2 => fixed!(2),
        3 => fixed!(3),
        4 => fixed!(4),
        5 => fixed!(5),
        6 => fixed!(6),
        7 => fixed!(7),
        8 => fixed!(8),
        _ => {
            let wt: Vec<&[f32]> = w.cols.iter().map(|c| &c[start..end]).collect();
            let mut acc = vec![0.0f32; end - start];
            let mut vk = vec![0.0f32; q];
            for (c, k) in counts.iter_mut().zip(range) {
                vk.iter_mut().zip(&v.cols).for_each(|(x, col)| *x = col[k]);
                *c += count_tile_dyn(&wt, &vk, r, &mut acc);
            }
        }
    }
}

/// For each point k of `v`, the number of anchors j < `anchors` with W_jᵀV_k > r.
fn count_hits(w: &Soa, v: &Soa, len: usize, anchors: usize, r: f32) -> Vec<u32> {
    let blocks = map_chunks(len, |_, range| {
        let mut counts = vec![0u32; range.len()];
        let mut start = 0;
        while start < anchors {
            let end = (start + TILE).min(anchors);
            count_block(w, v, range.clone(), start, end, r, &mut counts);
            start = end;
        }
        counts
    });
    blocks.into_iter().flatten().collect()
}

/// For each cap point k, the number of anchors j < `anchors` with W_jᵀV_k > r,
/// and whether V_k's own anchor passes the same test.
fn count_in_caps(d: &Draws, anchors: usize, r: f64) -> Vec<(u32, bool)> {
    let q = d.w.cols.len();
    let r = r as f32;
    count_hits(&d.w, &d.v, d.f.len(), anchors, r)
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let mut s = d.w.cols[0][k] * d.v.cols[0][k];
            for dim in 1..q {
                s += d.w.cols[dim][k] * d.v.cols[dim][k];
            }
            (c, s > r)
        })
        .collect()
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > -1.0 && r < 1.0) {
        return Err(Error::Domain(format!("tube radius {r} must lie in (-1, 1)")));
    }
    Ok(())
}

fn mean_and_se(a: &[f64]) -> (f64, f64) {
    let k = a.len() as f64;
    let mean = pairwise_sum(a) / k;
    if a.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = a.iter().map(|x| (x - mean) * (x - mean)).collect();
    let sd = (pairwise_sum(&dev) / (k - 1.0)).sqrt();
    (mean, sd / k.sqrt())
}

/// Draws taken directly from f, per κ tube draws, when f can be sampled.
const DIRECT_SHARE: usize = 4;

/// Stream offset separating direct draws from the tube draws of the same seed.
const DIRECT_STREAMS: u64 = 1 << 48;

/// Points drawn from f itself, projected like the cap points, with ln f.
fn draw_direct(man: &Manifold, f: &dyn SphereDensity, n: usize, seed: u64) -> Option<(Soa, Vec<f64>, Vec<UnitVector>)> {
    let q = man.frame().dim();
    let chunks = map_chunks(n, |c, range| {
        let mut rng = stream_rng(seed, DIRECT_STREAMS + c);
        let mut proj = vec![0.0; q];
        let mut out = (Vec::with_capacity(range.len() * q), Vec::with_capacity(range.len()), Vec::with_capacity(range.len()));
        for _ in range {
            let v = f.sample_point(&mut rng)?;
            man.frame().project_into(v.coords(), &mut proj);
            out.0.extend(proj.iter().map(|x| *x as f32));
            out.1.push(f.log_density(v.coords()));
            out.2.push(v);
        }
        Some(out)
    });
    let mut v = Soa { cols: vec![Vec::with_capacity(n); q] };
    let mut lf = Vec::with_capacity(n);
    let mut pts = Vec::with_capacity(n);
    for c in chunks {
        let (x, l, p) = c?;
        for row in x.chunks_exact(q) {
            v.cols.iter_mut().zip(row).for_each(|(col, x)| col.push(*x));
        }
        lf.extend(l);
        pts.extend(p);
    }
    Some((v, lf, pts))
}

fn estimate_once(man: &Manifold, r: f64, f: &dyn SphereDensity, kappa: usize, seed: u64, max_anchors: Option<usize>) -> Result<TubeEstimate> {
    let cr = cap_fraction(r, man.d());
    let (draws, _) = draw(man, r, f, kappa, seed, false)?;
    let single = man.is_single_point();
    let anchors = if single { kappa } else { max_anchors.map_or(kappa, |a| a.min(kappa)) };
    // c_r times the density of the cap draws is estimated by hits / size
    let rel: Vec<f64> = if single {
        vec![1.0; kappa]
    } else {
        count_in_caps(&draws, anchors, r)
            .iter()
            .enumerate()
            .map(|(k, &(c, own))| {
                let in_set = k < anchors;
                let hits = c as f64 + if in_set { (!own) as u8 as f64 } else { 1.0 };
                let size = anchors as f64 + if in_set { 0.0 } else { 1.0 };
                size / hits
            })
            .collect()
    };
    let warning = (kappa < MIN_RELIABLE_KAPPA)
        .then(|| format!("kappa = {kappa} is below {MIN_RELIABLE_KAPPA}; the standard error is unreliable"));
    let n = (kappa / DIRECT_SHARE).max(1);
    let direct = if f.is_uniform() { None } else { draw_direct(man, f, n, seed) };
    let Some((dv, dlf, dpts)) = direct else {
        let summands: Vec<f64> = draws.f.iter().zip(&rel).map(|(lf, x)| lf.exp() * x).collect();
        let (mean, se) = mean_and_se(&summands);
        return Ok(TubeEstimate { value: cr * mean, se: cr * se, kappa, r, anchors, warning });
    };
    // Balance-heuristic mixture of the cap draws and the direct draws: every
    // weight is at most 1/b, so mass deep inside the tube, which cap draws
    // rarely reach, is still estimated with bounded variance.
    let a = kappa as f64 / (kappa + n) as f64;
    let b = 1.0 - a;
    let weight = |lf: f64, lg: f64| 1.0 / (a * (lg - lf).exp() + b);
    let tube: Vec<f64> = draws.f.iter().zip(&rel).map(|(&lf, &x)| weight(lf, -(cr * x).ln())).collect();
    let hits = count_hits(&draws.w, &dv, n, anchors, r as f32);
    let profiler = crate::lr::Profiler::new(man.set(), man.design())?;
    let direct_terms = map_chunks(n, |_, range| {
        range
            .map(|k| {
                let inside = hits[k] > 0 || (!single && profiler.max_correlation(&dpts[k])? > r);
                Ok(match (inside, hits[k]) {
                    (false, _) => 0.0,
                    (true, 0) => 1.0 / b,
                    (true, h) => weight(dlf[k], (h as f64 / (anchors as f64 * cr)).ln()),
                })
            })
            .collect::<Result<Vec<f64>>>()
    });
    let own: Vec<f64> = direct_terms.into_iter().collect::<Result<Vec<_>>>()?.concat();
    let (mt, st) = mean_and_se(&tube);
    let (md, sd) = mean_and_se(&own);
    let value = (a * mt + b * md).min(1.0);
    let se = ((a * st).powi(2) + (b * sd).powi(2)).sqrt();
    Ok(TubeEstimate { value, se, kappa, r, anchors, warning })
}

/// ∫ over the tube of radius r around the manifold of the density `f`.
pub fn estimate_tube_integral(man: &Manifold, r: f64, f: &dyn SphereDensity, opts: &McOptions) -> Result<TubeEstimate> {
    opts.validate()?;
    check_radius(r)?;
    let mut kappa = opts.kappa;
    loop {
        let est = estimate_once(man, r, f, kappa, opts.seed, opts.max_anchors)?;
        let done = match opts.se_target {
            None => true,
            Some(t) => est.se <= t || kappa >= opts.max_kappa,
        };
        if done {
            return Ok(est);
        }
        kappa = (2 * kappa).min(opts.max_kappa);
    }
}

/// The κ draws of one estimate with exact neighbour counts, for inspection.
pub fn sample_tube_batch(man: &Manifold, r: f64, kappa: usize, seed: u64) -> Result<TubeSampleBatch> {
    check_radius(r)?;
    let (draws, batch) = draw(man, r, &Uniform, kappa, seed, true)?;
    let mut batch = batch.expect("batch requested");
    batch.m = count_in_caps(&draws, kappa, r)
        .into_iter()
        .map(|(c, own)| c as usize + (!own) as usize)
        .collect();
    Ok(batch)
}

/// Null probability P₀(R > r) that the maximal correlation exceeds r.
pub fn tail_probability(man: &Manifold, r: f64, opts: &McOptions) -> Result<TubeEstimate> {
    let exact = |value: f64| TubeEstimate { value, se: 0.0, kappa: 0, r, anchors: 0, warning: None };
    if r >= 1.0 {
        return Ok(exact(0.0));
    }
    if r <= -1.0 {
        return Ok(exact(1.0));
    }
    if man.is_single_point() {
        return Ok(exact(cap_fraction(r, man.d())));
    }
    estimate_tube_integral(man, r, &Uniform, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub r_crit: f64,
    pub alpha: f64,
    /// Estimated null tail probability at `r_crit`.
    pub p: f64,
    pub mc_se: f64,
    pub kappa: usize,
}

/// Draw count used to locate the root before the full-precision search.
const COARSE_KAPPA: usize = 4096;

/// The radius r with P₀(R > r) = α.
///
/// Every evaluation reuses the same seed, so p̂(r) is a smooth, almost surely
/// monotone function of r and plain bisection applies. A cheap pass locates
/// the root; the full-size estimator then bisects a narrow bracket around it.
pub fn critical_value(man: &Manifold, alpha: f64, tol: f64, opts: &McOptions) -> Result<CriticalValue> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Config(format!("alpha = {alpha} must lie in (0, 0.5]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    opts.validate()?;
    let d = man.d();
    if man.is_single_point() {
        let r = cap_cosine_for_tail(alpha, d);
        return Ok(CriticalValue { r_crit: r, alpha, p: alpha, mc_se: 0.0, kappa: 0 });
    }
    let coarse = McOptions { kappa: opts.kappa.min(COARSE_KAPPA), se_target: None, ..opts.clone() };
    let p0 = tail_probability(man, 0.0, &coarse)?;
    if p0.value < alpha {
        return Err(Error::Numerical(format!(
            "P(R > 0) is estimated at {:.4} < alpha; negative critical values are not supported, use a larger alpha",
            p0.value
        )));
    }
    // a single cap lies inside the tube, so its critical value is a lower bound
    let mut lo = cap_cosine_for_tail(alpha, d).max(0.0);
    let mut hi = 1.0 - 1e-12;
    let coarse_tol = tol.max(1e-3);
    while hi - lo > coarse_tol {
        let mid = 0.5 * (lo + hi);
        if tail_probability(man, mid, &coarse)?.value > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let guess = 0.5 * (lo + hi);
    let floor = cap_cosine_for_tail(alpha, d).max(0.0);
    let mut width = 4.0 * coarse_tol;
    let (mut lo, mut hi) = loop {
        let a = (guess - width).max(floor);
        let b = (guess + width).min(1.0 - 1e-12);
        let pa = if a <= floor { f64::INFINITY } else { tail_probability(man, a, opts)?.value };
        let pb = tail_probability(man, b, opts)?.value;
        if pa > alpha && pb <= alpha {
            break (a, b);
        }
        if a <= floor && b >= 1.0 - 1e-12 {
            return Err(Error::Numerical("could not bracket the critical value".into()));
        }
        width *= 2.0;
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if tail_probability(man, mid, opts)?.value > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let est = tail_probability(man, r, opts)?;
    Ok(CriticalValue { r_crit: r, alpha, p: est.value, mc_se: est.se, kappa: est.kappa })
}

/// A true mean shape and its non-centrality δ = β‖Bx_γ‖/σ.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub family: Family,
    pub gamma: Vec<f64>,
    pub delta: f64,
}

impl Alternative {
    pub fn new(family: Family, gamma: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("non-centrality {delta} must be finite and >= 0")));
        }
        family.check_param(&gamma)?;
        Ok(Self { family, gamma, delta })
    }

    /// Standardized true prediction x̃_true.
    pub fn direction(&self, design: &Design) -> Result<UnitVector> {
        CandidateModel::new(self.family, crate::shapes::ParamSpace::Fixed(self.gamma.clone()), crate::shapes::Direction::Increasing)
            .point(&self.gamma, 1.0, design, &design.basis())
    }

    /// Mean parameter m = δ x̃_true of the law of the standardized response.
    pub fn param(&self, design: &Design) -> Result<AngularGaussianParam> {
        let x = self.direction(design)?;
        Ok(AngularGaussianParam { m: x.coords().iter().map(|v| v * self.delta).collect() })
    }
}

/// Power P₁(R > r_crit) of the test over `man` against `alt`.
pub fn power(man: &Manifold, r_crit: f64, alt: &Alternative, opts: &McOptions) -> Result<TubeEstimate> {
    if !(r_crit > 0.0 && r_crit < 1.0) {
        return Err(Error::Domain(format!("critical value {r_crit} must lie in (0, 1)")));
    }
    let f = AngularGaussian::new(&alt.param(man.design())?)?;
    if f.is_uniform() {
        return tail_probability(man, r_crit, opts);
    }
    estimate_tube_integral(man, r_crit, &f, opts)
}

/// Power of the one-sided t-test with regressor correlation ρ to the true
/// direction, at non-centrality δ on d degrees of freedom.
///
/// The component of the signal orthogonal to the test direction inflates the
/// residual sum of squares, so the statistic is doubly noncentral t with
/// numerator shift δρ and denominator non-centrality δ²(1 − ρ²).
pub fn t_test_power(rho: f64, delta: f64, d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    let crit = t_quantile_upper(alpha, df);
    let rho = rho.clamp(-1.0, 1.0);
    dnct_sf(crit, df, delta * rho, delta * delta * (1.0 - rho * rho).max(0.0))
}

/// Power of the locally optimal test using the direction `x_test`.
pub fn local_t_power(x_test: &UnitVector, alt: &Alternative, design: &Design, alpha: f64) -> Result<f64> {
    let truth = alt.direction(design)?;
    if truth.dim() != x_test.dim() {
        return Err(Error::Domain("test direction does not match the design".into()));
    }
    Ok(t_test_power(x_test.dot(&truth), alt.delta, design.d(), alpha))
}

/// Non-centrality at which the locally optimal test has power `target`.
/// It does not depend on the shape, only on d and α.
pub fn solve_delta(d: usize, target: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(target >= alpha && target < 1.0) {
        return Err(Error::Config(format!("target power {target} must lie in [alpha, 1)")));
    }
    if target == alpha {
        return Ok(0.0);
    }
    let pw = |delta: f64| t_test_power(1.0, delta, d, alpha);
    let mut hi = 1.0;
    while pw(hi) < target {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Numerical("target power unreachable".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pw(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inputs of a sample-size search.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeProblem {
    pub models: crate::shapes::CandidateSet,
    pub doses: Vec<f64>,
    /// Relative allocation per dose; arm sizes are `k * allocation[g]`.
    pub allocation: Vec<usize>,
    pub truth: Family,
    pub gamma: Vec<f64>,
    /// Standardized effect β/σ.
    pub effect: f64,
    pub target: f64,
    pub alpha: f64,
    pub max_multiplier: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeResult {
    /// Allocation multiplier k; arm g receives k · allocation[g] subjects.
    pub multiplier: usize,
    pub n_per_dose: Vec<usize>,
    pub n_total: usize,
    pub power: f64,
    pub mc_se: f64,
    pub r_crit: f64,
    pub delta: f64,
}

fn power_at(p: &SampleSizeProblem, k: usize, opts: &McOptions) -> Result<SampleSizeResult> {
    let counts: Vec<usize> = p.allocation.iter().map(|a| a * k).collect();
    let design = Design::new(p.doses.clone(), counts.clone())?;
    let man = Manifold::new(&p.models, &design)?;
    let crit = critical_value(&man, p.alpha, 2.5e-4, opts)?;
    let raw = p.truth.values(&p.gamma, &design)?;
    let bnorm = crate::sphere::norm(&design.basis().apply(&raw));
    let delta = p.effect * bnorm;
    let alt = Alternative::new(p.truth, p.gamma.clone(), delta)?;
    let est = power(&man, crit.r_crit, &alt, opts)?;
    Ok(SampleSizeResult {
        multiplier: k,
        n_total: design.n(),
        n_per_dose: counts,
        power: est.value,
        mc_se: est.se,
        r_crit: crit.r_crit,
        delta,
    })
}

/// Smallest allocation multiplier whose estimated power reaches the target.
pub fn sample_size(p: &SampleSizeProblem, opts: &McOptions) -> Result<SampleSizeResult> {
    if !(p.effect > 0.0) {
        return Err(Error::Config("effect size beta/sigma must be positive".into()));
    }
    if p.allocation.len() != p.doses.len() || p.allocation.iter().any(|&a| a == 0) {
        return Err(Error::Config("allocation must give a positive weight to every dose".into()));
    }
    if !(p.target >= p.alpha && p.target < 1.0) {
        return Err(Error::Config(format!("target power {} must lie in [alpha, 1)", p.target)));
    }
    let total: usize = p.allocation.iter().sum();
    let k_min = 3usize.div_ceil(total).max(1);
    let reaches = |res: &SampleSizeResult| res.power >= p.target;
    let first = power_at(p, k_min, opts)?;
    if p.target <= p.alpha || reaches(&first) {
        return Ok(first);
    }
    let mut lo = k_min;
    let mut hi = k_min;
    let mut best;
    loop {
        hi = (hi * 2).min(p.max_multiplier);
        let res = power_at(p, hi, opts)?;
        if reaches(&res) {
            best = res;
            break;
        }
        if hi >= p.max_multiplier {
            return Err(Error::Numerical(format!(
                "power {:.3} at the largest allowed size is below the target",
                res.power
            )));
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let res = power_at(p, mid, opts)?;
        if reaches(&res) {
            hi = mid;
            best = res;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Standardized response X/‖X‖ with X ~ N(m, I).
pub fn standardized_response<R: Rng + ?Sized>(m: &[f64], rng: &mut R) -> UnitVector {
    use rand_distr::StandardNormal;
    loop {
        let g: Vec<f64> = m.iter().map(|mi| mi + rng.sample::<f64, _>(StandardNormal)).collect();
        if let Ok(u) = UnitVector::normalize(g) {
            return u;
        }
    }
}
