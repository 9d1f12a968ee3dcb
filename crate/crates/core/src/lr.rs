//! The likelihood-ratio trend test: correlation statistics, profiling over
//! the nonlinear parameter, fitting, and multiplicity-adjusted reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::shapes::{CandidateModel, CandidateSet, Design, Family, Manifold};
use crate::sphere::{cap_fraction, dot, norm, standardize, ContrastBasis, UnitVector};
use crate::tube::{critical_value, tail_probability, CriticalValue, McOptions};

/// Grid size used when profiling a one-parameter model.
pub const PROFILE_GRID: usize = 512;

/// R_γ = x̃ᵀỹ.
pub fn correlation_statistic(y: &UnitVector, x: &UnitVector) -> f64 {
    y.dot(x).clamp(-1.0, 1.0)
}

/// S(R) = (1 − 1{R>0} R²)^(n/2).
pub fn lr_statistic_from_r(r: f64, n: usize) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    let r = r.min(1.0);
    ((1.0 - r) * (1.0 + r)).powf(n as f64 / 2.0)
}

/// P₀(x̃ᵀỹ > r) for a single fixed shape on S^d.
pub fn single_shape_pvalue(r: f64, d: usize) -> f64 {
    cap_fraction(r.clamp(-1.0, 1.0), d)
}

/// Maximizer of the correlation over one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub r: f64,
    pub gamma: Vec<f64>,
    pub sign: f64,
}

/// The standardized response in the form the profiler consumes.
enum Target {
    /// Group sums of Bᵀỹ; correlations with dose-based shapes need only these.
    Groups(Vec<f64>),
    Full(Vec<f64>),
}

/// Precomputed standardized predictions over parameter grids.
#[derive(Debug, Clone)]
pub struct Profiler {
    set: CandidateSet,
    design: Design,
    basis: ContrastBasis,
    grids: Vec<Grid>,
    grouped: bool,
}

#[derive(Debug, Clone)]
struct Grid {
    /// grid steps per axis
    shape: Vec<usize>,
    fracs: Vec<Vec<f64>>,
    /// group-level (or full) standardized prediction, None when degenerate
    points: Vec<Option<Vec<f64>>>,
}

/// Group-level standardization: u_g = (x_g − x̄)/‖x − x̄‖ with the
/// count-weighted mean, so that x̃ᵀỹ = Σ_g u_g s_g.
fn group_unit(x: &[f64], counts: &[usize]) -> Option<Vec<f64>> {
    let n: usize = counts.iter().sum();
    let mean = x.iter().zip(counts).map(|(v, &c)| v * c as f64).sum::<f64>() / n as f64;
    let ss: f64 = x.iter().zip(counts).map(|(v, &c)| c as f64 * (v - mean) * (v - mean)).sum();
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let nrm = ss.sqrt();
    if nrm == 0.0 || nrm <= 1e-13 * scale * (n as f64).sqrt() {
        return None;
    }
    Some(x.iter().map(|v| (v - mean) / nrm).collect())
}

impl Profiler {
    pub fn new(set: &CandidateSet, design: &Design) -> Result<Self> {
        Self::with_grid(set, design, PROFILE_GRID)
    }

    pub fn with_grid(set: &CandidateSet, design: &Design, grid: usize) -> Result<Self> {
        if grid < 3 {
            return Err(Error::Config("profile grid needs at least 3 points".into()));
        }
        set.validate(design)?;
        let grouped = set.models.iter().all(|m| m.family.dose_based());
        let mut p = Self { set: set.clone(), design: design.clone(), basis: design.basis(), grids: vec![], grouped };
        p.grids = set.models.iter().map(|m| p.build_grid(m, grid)).collect();
        Ok(p)
    }

    pub fn set(&self) -> &CandidateSet {
        &self.set
    }

    fn build_grid(&self, model: &CandidateModel, size: usize) -> Grid {
        let shape: Vec<usize> = match &model.space {
            s if s.is_point() => vec![],
            s => {
                let free = s.lower().iter().zip(s.upper()).filter(|(l, h)| l != h).count();
                let per_axis = if free <= 1 { size } else { (size as f64).powf(1.0 / free as f64).ceil() as usize };
                s.lower().iter().zip(s.upper()).map(|(l, h)| if l == h { 1 } else { per_axis }).collect()
            }
        };
        let total: usize = shape.iter().product();
        let mut fracs = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let f: Vec<f64> = shape
                .iter()
                .map(|&s| {
                    let i = rem % s;
                    rem /= s;
                    if s == 1 { 0.0 } else { i as f64 / (s - 1) as f64 }
                })
                .collect();
            fracs.push(f);
        }
        let points = fracs.iter().map(|f| self.unit(model, &model.at_fraction(f))).collect();
        Grid { shape, fracs, points }
    }

    fn unit(&self, model: &CandidateModel, gamma: &[f64]) -> Option<Vec<f64>> {
        if self.grouped {
            let x = model.family.dose_values(gamma, self.design.doses()).ok()?;
            group_unit(&x, self.design.counts())
        } else {
            model.point(gamma, 1.0, &self.design, &self.basis).ok().map(UnitVector::into_coords)
        }
    }

    fn target(&self, y: &UnitVector) -> Result<Target> {
        if y.dim() != self.basis.dim() {
            return Err(Error::Domain(format!(
                "standardized response has {} coordinates, the design needs {}",
                y.dim(),
                self.basis.dim()
            )));
        }
        if !self.grouped {
            return Ok(Target::Full(y.coords().to_vec()));
        }
        let centered = self.basis.apply_transpose(y.coords());
        let mut sums = Vec::with_capacity(self.design.groups());
        let mut start = 0;
        for &c in self.design.counts() {
            sums.push(centered[start..start + c].iter().sum());
            start += c;
        }
        Ok(Target::Groups(sums))
    }

    fn score(target: &Target, point: &Option<Vec<f64>>) -> f64 {
        match (target, point) {
            (_, None) => f64::NEG_INFINITY,
            (Target::Groups(s), Some(u)) | (Target::Full(s), Some(u)) => dot(s, u).clamp(-1.0, 1.0),
        }
    }

    /// Best correlation over model `i` and its permitted signs.
    fn profile_model(&self, i: usize, target: &Target) -> Result<Profile> {
        let model = &self.set.models[i];
        let grid = &self.grids[i];
        let base: Vec<f64> = grid.points.iter().map(|p| Self::score(target, p)).collect();
        if base.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::DegenerateShape(Some(format!("{} is constant on every grid point", model.name()))));
        }
        let mut best: Option<Profile> = None;
        for &sign in model.direction.signs() {
            let vals: Vec<f64> = base.iter().map(|v| if v.is_finite() { sign * v } else { *v }).collect();
            let cand = self.refine(model, grid, &vals, sign, target);
            if best.as_ref().is_none_or(|b| cand.r > b.r) {
                best = Some(cand);
            }
        }
        Ok(best.expect("at least one sign"))
    }

    fn refine(&self, model: &CandidateModel, grid: &Grid, vals: &[f64], sign: f64, target: &Target) -> Profile {
        let argmax = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        let mut best = Profile { r: vals[argmax], gamma: model.at_fraction(&grid.fracs[argmax]), sign };
        if grid.shape.is_empty() {
            return best;
        }
        let objective = |f: &[f64]| {
            let g = model.at_fraction(f);
            let v = Self::score(target, &self.unit(model, &g));
            if v.is_finite() { sign * v } else { v }
        };
        for idx in local_maxima(&grid.shape, vals, 3) {
            let step: Vec<f64> = grid.shape.iter().map(|&s| if s > 1 { 1.0 / (s - 1) as f64 } else { 0.0 }).collect();
            let mut x = grid.fracs[idx].clone();
            let mut fx = vals[idx];
            let sweeps = if x.len() == 1 { 1 } else { 6 };
            for _ in 0..sweeps {
                for axis in 0..x.len() {
                    if step[axis] == 0.0 {
                        continue;
                    }
                    let lo = (x[axis] - step[axis]).max(0.0);
                    let hi = (x[axis] + step[axis]).min(1.0);
                    let mut probe = x.clone();
                    let (t, ft) = golden_max(lo, hi, 1e-10, |t| {
                        probe[axis] = t;
                        objective(&probe)
                    });
                    if ft > fx {
                        x[axis] = t;
                        fx = ft;
                    }
                }
            }
            if fx > best.r {
                best = Profile { r: fx, gamma: model.at_fraction(&x), sign };
            }
        }
        best
    }

    /// Per-model profiles for the standardized response `y`.
    pub fn profile(&self, y: &UnitVector) -> Result<Vec<Profile>> {
        let target = self.target(y)?;
        (0..self.set.models.len()).map(|i| self.profile_model(i, &target)).collect()
    }

    /// R = max over models of the profiled correlation.
    pub fn max_correlation(&self, y: &UnitVector) -> Result<f64> {
        Ok(self.profile(y)?.iter().map(|p| p.r).fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Indices of the `k` largest grid values that are not exceeded by any
/// axis-neighbour.
fn local_maxima(shape: &[usize], vals: &[f64], k: usize) -> Vec<usize> {
    let strides: Vec<usize> = shape.iter().scan(1, |acc, &s| {
        let st = *acc;
        *acc *= s;
        Some(st)
    }).collect();
    let mut maxima: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i].is_finite())
        .filter(|&i| {
            shape.iter().zip(&strides).all(|(&s, &st)| {
                let pos = (i / st) % s;
                (pos == 0 || vals[i - st] <= vals[i]) && (pos + 1 == s || vals[i + st] <= vals[i])
            })
        })
        .collect();
    maxima.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    maxima.truncate(k);
    maxima
}

/// Golden-section search for a maximum of `f` on [a, b]; returns the best
/// point seen (endpoints included).
fn golden_max(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (fa, fb) = (f(a), f(b));
    let mut best = if fa >= fb { (a, fa) } else { (b, fb) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// sup over Γ (and the permitted signs) of the correlation with `y`.
pub fn profile_sup_correlation(y: &UnitVector, model: &CandidateModel, design: &Design) -> Result<Profile> {
    let set = CandidateSet::new(vec![model.clone()])?;
    let prof = Profiler::new(&set, design)?;
    Ok(prof.profile(y)?.remove(0))
}

/// Least-squares fit of α + β·sign·x_γ with β ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: Vec<f64>,
    pub r: f64,
    pub sign: f64,
    /// S(r) for this model alone.
    pub lr_statistic: f64,
}

impl FitResult {
    /// Fitted mean at every observation.
    pub fn fitted(&self, family: Family, design: &Design) -> Result<Vec<f64>> {
        let x = family.values(&self.gamma_hat, design)?;
        Ok(x.iter().map(|v| self.alpha_hat + self.sign * self.beta_hat * v).collect())
    }
}

fn check_response(y: &[f64], design: &Design) -> Result<()> {
    if y.len() != design.n() {
        return Err(Error::DegenerateData(format!("{} responses for a design with n = {}", y.len(), design.n())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("responses must be finite".into()));
    }
    Ok(())
}

fn standardized_or_constant(y: &[f64], basis: &ContrastBasis) -> Result<Option<UnitVector>> {
    match standardize(y, basis) {
        Ok(u) => Ok(Some(u)),
        Err(Error::DegenerateShape(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn fit_from_profile(y: &[f64], design: &Design, model: &CandidateModel, prof: Option<&Profile>) -> Result<FitResult> {
    let ybar = mean(y);
    let Some(prof) = prof else {
        let sign = model.direction.signs()[0];
        return Ok(FitResult {
            alpha_hat: ybar,
            beta_hat: 0.0,
            gamma_hat: model.at_fraction(&vec![0.5; model.space.dim()]),
            r: 0.0,
            sign,
            lr_statistic: 1.0,
        });
    };
    let x = model
        .family
        .values(&prof.gamma, design)
        .map_err(|e| Error::Numerical(format!("cannot evaluate the fitted shape: {e}")))?;
    let basis = design.basis();
    let bx = norm(&basis.apply(&x));
    let by = norm(&basis.apply(y));
    let beta = if prof.r > 0.0 && bx > 0.0 { by / bx * prof.r } else { 0.0 };
    Ok(FitResult {
        alpha_hat: ybar - prof.sign * beta * mean(&x),
        beta_hat: beta,
        gamma_hat: prof.gamma.clone(),
        r: prof.r,
        sign: prof.sign,
        lr_statistic: lr_statistic_from_r(prof.r, design.n()),
    })
}

/// Profile least-squares fit of one candidate model.
pub fn fit_model(y: &[f64], design: &Design, model: &CandidateModel) -> Result<FitResult> {
    check_response(y, design)?;
    let basis = design.basis();
    match standardized_or_constant(y, &basis)? {
        None => fit_from_profile(y, design, model, None),
        Some(u) => {
            let prof = profile_sup_correlation(&u, model, design)?;
            fit_from_profile(y, design, model, Some(&prof))
        }
    }
}

/// Settings of a full test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrOptions {
    /// One-sided level α.
    pub alpha: f64,
    /// Bracket width at which the critical-value search stops.
    pub tol: f64,
    pub mc: McOptions,
}

impl Default for LrOptions {
    fn default() -> Self {
        Self { alpha: 0.05, tol: 2.5e-4, mc: McOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub r: f64,
    pub gamma_hat: Vec<f64>,
    pub fit: FitResult,
    /// P₀(R > r_i) over the whole candidate set.
    pub p_adjusted: f64,
    pub mc_se_adjusted: f64,
    /// P₀(R_i > r_i) over this model alone.
    pub p_unadjusted: f64,
    pub mc_se_unadjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTestReport {
    pub models: Vec<ModelReport>,
    /// Index of the model attaining the maximal correlation.
    pub best: usize,
    pub r: f64,
    pub lr_statistic: f64,
    pub p: f64,
    pub mc_se: f64,
    pub critical: CriticalValue,
    pub reject: bool,
    pub n: usize,
    pub d: usize,
}

/// Multiplicity-adjusted likelihood-ratio test of a flat dose response
/// against the candidate set.
pub fn run_lr_test(y: &[f64], design: &Design, cs: &CandidateSet, opts: &LrOptions) -> Result<LrTestReport> {
    check_response(y, design)?;
    let man = Manifold::new(cs, design)?;
    let adjusted_mc = opts.mc.with_seed(derive_seed(opts.mc.seed, 1));
    let critical = critical_value(&man, opts.alpha, opts.tol, &adjusted_mc)?;
    let u = standardized_or_constant(y, &design.basis())?;
    let mut models = Vec::with_capacity(cs.models.len());
    match &u {
        None => {
            for m in &cs.models {
                let fit = fit_from_profile(y, design, m, None)?;
                models.push(ModelReport {
                    model: m.name(),
                    r: 0.0,
                    gamma_hat: fit.gamma_hat.clone(),
                    fit,
                    p_adjusted: 1.0,
                    mc_se_adjusted: 0.0,
                    p_unadjusted: 1.0,
                    mc_se_unadjusted: 0.0,
                });
            }
        }
        Some(u) => {
            let profiles = Profiler::new(cs, design)?.profile(u)?;
            for (i, (m, prof)) in cs.models.iter().zip(&profiles).enumerate() {
                let fit = fit_from_profile(y, design, m, Some(prof))?;
                let adj = tail_probability(&man, prof.r, &adjusted_mc)?;
                let own = man.sub_manifold(i)?;
                let unadj = tail_probability(&own, prof.r, &opts.mc.with_seed(derive_seed(opts.mc.seed, 2 + i as u64)))?;
                models.push(ModelReport {
                    model: m.name(),
                    r: prof.r,
                    gamma_hat: prof.gamma.clone(),
                    fit,
                    p_adjusted: adj.value,
                    mc_se_adjusted: adj.se,
                    p_unadjusted: unadj.value,
                    mc_se_unadjusted: unadj.se,
                });
            }
        }
    }
    let best = (0..models.len()).max_by(|&a, &b| models[a].r.total_cmp(&models[b].r).then(b.cmp(&a))).unwrap();
    let r = if u.is_none() { 0.0 } else { models[best].r };
    let (p, mc_se) = (models[best].p_adjusted, models[best].mc_se_adjusted);
    Ok(LrTestReport {
        best,
        r,
        lr_statistic: if u.is_none() { 1.0 } else { lr_statistic_from_r(r, design.n()) },
        p,
        mc_se,
        reject: u.is_some() && r > critical.r_crit,
        critical,
        models,
        n: design.n(),
        d: design.d(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::shapes::{Direction, ParamSpace};
    use crate::special::t_sf;
    use crate::sphere::sample_uniform_sphere;
    use proptest::prelude::*;
    use rand::Rng;

    fn biom() -> Design {
        Design::balanced(vec![0.0, 0.05, 0.2, 0.6, 1.0], 20).unwrap()
    }

    fn emax(lo: f64, hi: f64) -> CandidateModel {
        CandidateModel::new(Family::Emax, ParamSpace::interval(lo, hi), Direction::Increasing)
    }

    fn expo(lo: f64, hi: f64) -> CandidateModel {
        CandidateModel::new(Family::Exponential, ParamSpace::interval(lo, hi), Direction::Increasing)
    }

    #[test]
    fn correlation_extremes() {
        let a = UnitVector::from_unit(vec![1.0, 0.0]).unwrap();
        let b = UnitVector::from_unit(vec![0.0, 1.0]).unwrap();
        assert_eq!(correlation_statistic(&a, &a), 1.0);
        assert_eq!(correlation_statistic(&a, &b), 0.0);
        assert_eq!(correlation_statistic(&a, &a.neg()), -1.0);
    }

    #[test]
    fn lr_statistic_values() {
        assert_eq!(lr_statistic_from_r(-0.4, 10), 1.0);
        assert_eq!(lr_statistic_from_r(0.0, 10), 1.0);
        assert_eq!(lr_statistic_from_r(1.0, 10), 0.0);
        assert!((lr_statistic_from_r(0.5, 4) - 0.5625).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let s = lr_statistic_from_r(-1.0 + 0.02 * i as f64, 7);
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn single_shape_pvalue_is_a_t_test() {
        assert!((single_shape_pvalue(0.0, 5) - 0.5).abs() < 1e-15);
        for d in [3usize, 10, 98] {
            for i in 1..=9 {
                let r = i as f64 / 10.0;
                let t = r * (d as f64 / (1.0 - r * r)).sqrt();
                let want = t_sf(t, d as f64);
                assert!((single_shape_pvalue(r, d) - want).abs() < 1e-10, "r={r} d={d}");
            }
        }
    }

    #[test]
    fn exponential_example_profile() {
        let design = Design::balanced(vec![0.0, 1.0, 2.0, 3.0], 1).unwrap();
        let y = standardize(&[-0.6, -0.2, 0.0, 0.8], &design.basis()).unwrap();
        let prof = profile_sup_correlation(&y, &expo(0.05, 100.0), &design).unwrap();
        assert!((prof.gamma[0] - 1.7).abs() < 0.1, "{prof:?}");
    }

    #[test]
    fn self_correlation_recovers_gamma() {
        let design = biom();
        let model = emax(0.001, 1.5);
        for g0 in [0.001, 0.03, 0.2, 0.9, 1.5] {
            let y = model.point(&[g0], 1.0, &design, &design.basis()).unwrap();
            let prof = profile_sup_correlation(&y, &model, &design).unwrap();
            assert!((prof.r - 1.0).abs() < 1e-12);
            assert!((prof.gamma[0] - g0).abs() <= 1e-6 * 1.5, "{g0} -> {prof:?}");
        }
    }

    #[test]
    fn singleton_profile_is_plain_correlation() {
        let design = biom();
        let model = CandidateModel::new(Family::Emax, ParamSpace::Fixed(vec![0.2]), Direction::Increasing);
        let mut rng = stream_rng(5, 0);
        let y = sample_uniform_sphere(98, &mut rng);
        let x = model.point(&[0.2], 1.0, &design, &design.basis()).unwrap();
        let prof = profile_sup_correlation(&y, &model, &design).unwrap();
        assert!((prof.r - correlation_statistic(&y, &x)).abs() < 1e-13);
    }

    #[test]
    fn sup_dominates_random_probes() {
        let design = biom();
        let models = [emax(0.001, 1.5), expo(0.1, 2.0)];
        let mut rng = stream_rng(6, 0);
        let basis = design.basis();
        for model in &models {
            for _ in 0..10 {
                let y = sample_uniform_sphere(98, &mut rng);
                let prof = profile_sup_correlation(&y, model, &design).unwrap();
                for _ in 0..100 {
                    let g = model.at_fraction(&[rng.random::<f64>()]);
                    let x = model.point(&g, 1.0, &design, &basis).unwrap();
                    assert!(correlation_statistic(&y, &x) <= prof.r + 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_parameter_profile() {
        let design = biom();
        let model = CandidateModel::new(
            Family::SigEmax,
            ParamSpace::Box { lo: vec![0.01, 0.5], hi: vec![1.0, 8.0] },
            Direction::Increasing,
        );
        let y = model.point(&[0.1, 3.0], 1.0, &design, &design.basis()).unwrap();
        let prof = profile_sup_correlation(&y, &model, &design).unwrap();
        assert!(prof.r > 1.0 - 1e-9, "{prof:?}");
    }

    #[test]
    fn both_directions_pick_the_better_sign() {
        let design = biom();
        let model = CandidateModel::new(Family::Emax, ParamSpace::interval(0.001, 1.5), Direction::Both);
        let y = model.point(&[0.3], -1.0, &design, &design.basis()).unwrap();
        let prof = profile_sup_correlation(&y, &model, &design).unwrap();
        assert_eq!(prof.sign, -1.0);
        assert!((prof.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_emax_fit() {
        let design = biom();
        let y: Vec<f64> = design.z().iter().map(|z| 0.32 + 0.75 * z / (z + 0.14)).collect();
        let fit = fit_model(&y, &design, &emax(0.001, 1.5)).unwrap();
        assert!((fit.alpha_hat - 0.32).abs() < 1e-6, "{fit:?}");
        assert!((fit.beta_hat - 0.75).abs() < 1e-6);
        assert!((fit.gamma_hat[0] - 0.14).abs() < 1e-6);
    }

    #[test]
    fn wrong_direction_clamps_slope() {
        let design = biom();
        let y: Vec<f64> = design.z().iter().map(|z| 1.0 - z).collect();
        let fit = fit_model(&y, &design, &emax(0.001, 1.5)).unwrap();
        assert_eq!(fit.beta_hat, 0.0);
        assert!(fit.r <= 0.0);
        assert!((fit.alpha_hat - mean(&y)).abs() < 1e-12);
    }

    #[test]
    fn fit_is_least_squares() {
        let design = biom();
        let mut rng = stream_rng(8, 0);
        let model = emax(0.001, 1.5);
        let y: Vec<f64> = design.z().iter().map(|z| 0.2 + 0.5 * z / (z + 0.3) + 0.3 * (rng.random::<f64>() - 0.5)).collect();
        let fit = fit_model(&y, &design, &model).unwrap();
        assert!(fit.beta_hat > 0.0);
        let x = Family::Emax.values(&fit.gamma_hat, &design).unwrap();
        let rss = |a: f64, b: f64| y.iter().zip(&x).map(|(yi, xi)| (yi - a - b * xi).powi(2)).sum::<f64>();
        let base = rss(fit.alpha_hat, fit.beta_hat);
        for da in [-1e-3, 0.0, 1e-3] {
            for db in [-1e-3, 0.0, 1e-3] {
                assert!(rss(fit.alpha_hat + da, fit.beta_hat + db) >= base - 1e-12);
            }
        }
    }

    #[test]
    fn constant_response() {
        let design = biom();
        let y = vec![2.5; design.n()];
        let fit = fit_model(&y, &design, &emax(0.001, 1.5)).unwrap();
        assert_eq!((fit.r, fit.lr_statistic, fit.beta_hat), (0.0, 1.0, 0.0));
        let set = CandidateSet::new(vec![emax(0.001, 1.5), CandidateModel::linear()]).unwrap();
        let opts = LrOptions { mc: McOptions::fixed(2000, 1), ..LrOptions::default() };
        let rep = run_lr_test(&y, &design, &set, &opts).unwrap();
        assert_eq!((rep.p, rep.lr_statistic, rep.reject), (1.0, 1.0, false));
    }

    #[test]
    fn response_length_is_checked() {
        let design = biom();
        assert!(matches!(fit_model(&[1.0, 2.0], &design, &emax(0.1, 1.0)), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn singleton_test_is_exact() {
        let design = biom();
        let mut rng = stream_rng(9, 0);
        let y: Vec<f64> = design.z().iter().map(|z| 0.3 * z + rng.random::<f64>()).collect();
        let set = CandidateSet::new(vec![CandidateModel::linear()]).unwrap();
        let rep = run_lr_test(&y, &design, &set, &LrOptions::default()).unwrap();
        assert_eq!(rep.p, single_shape_pvalue(rep.r, 98));
        assert_eq!(rep.mc_se, 0.0);
        let u = standardize(&y, &design.basis()).unwrap();
        let t = rep.r * (98.0 / (1.0 - rep.r * rep.r)).sqrt();
        assert!((rep.p - t_sf(t, 98.0)).abs() < 1e-10);
        assert!((rep.r - correlation_statistic(&u, &CandidateModel::linear().point(&[], 1.0, &design, &design.basis()).unwrap())).abs() < 1e-14);
    }

    #[test]
    fn report_structure() {
        let design = biom();
        let mut rng = stream_rng(10, 0);
        let y: Vec<f64> = design.z().iter().map(|z| 0.25 * z / (z + 0.2) + 0.6 * (rng.random::<f64>() - 0.5)).collect();
        let set = CandidateSet::new(vec![CandidateModel::linear(), emax(0.001, 1.5), expo(0.1, 2.0)]).unwrap();
        let opts = LrOptions { mc: McOptions::fixed(6000, 3), ..LrOptions::default() };
        let rep = run_lr_test(&y, &design, &set, &opts).unwrap();
        for m in &rep.models {
            let tol = 3.0 * (m.mc_se_adjusted + m.mc_se_unadjusted) + 1e-12;
            assert!(m.p_adjusted >= m.p_unadjusted - tol, "{m:?}");
            assert!(rep.p <= m.p_adjusted + 1e-12);
        }
        let mut order: Vec<&ModelReport> = rep.models.iter().collect();
        order.sort_by(|a, b| b.r.total_cmp(&a.r));
        assert!(order.windows(2).all(|w| w[0].p_adjusted <= w[1].p_adjusted));
        assert_eq!(rep.reject, rep.r > rep.critical.r_crit);
        assert_eq!(rep.reject, rep.p < 0.05 || (rep.p - 0.05).abs() < 3.0 * rep.mc_se);
    }

    #[test]
    fn report_is_affine_invariant() {
        let design = biom();
        let mut rng = stream_rng(12, 0);
        let y: Vec<f64> = design.z().iter().map(|z| 0.4 * z / (z + 0.1) + (rng.random::<f64>() - 0.5)).collect();
        let y2: Vec<f64> = y.iter().map(|v| -3.0 + 2.5 * v).collect();
        let set = CandidateSet::new(vec![CandidateModel::linear(), emax(0.001, 1.5)]).unwrap();
        let opts = LrOptions { mc: McOptions::fixed(3000, 3), ..LrOptions::default() };
        let a = run_lr_test(&y, &design, &set, &opts).unwrap();
        let b = run_lr_test(&y2, &design, &set, &opts).unwrap();
        for (ma, mb) in a.models.iter().zip(&b.models) {
            assert!((ma.r - mb.r).abs() < 1e-12);
            assert!((ma.p_adjusted - mb.p_adjusted).abs() < 1e-9);
            assert!(ma.gamma_hat.iter().zip(&mb.gamma_hat).all(|(x, y)| (x - y).abs() < 1e-6));
            assert!((mb.fit.alpha_hat - (-3.0 + 2.5 * ma.fit.alpha_hat)).abs() < 1e-6);
            assert!((mb.fit.beta_hat - 2.5 * ma.fit.beta_hat).abs() < 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn profile_is_affine_invariant(seed in 0u64..1000, a in -5.0f64..5.0, b in 0.1f64..10.0) {
            let design = Design::balanced(vec![0.0, 0.05, 0.2, 0.6, 1.0], 4).unwrap();
            let mut rng = stream_rng(seed, 0);
            let y: Vec<f64> = design.z().iter().map(|z| z / (z + 0.2) + rng.random::<f64>()).collect();
            let y2: Vec<f64> = y.iter().map(|v| a + b * v).collect();
            let model = emax(0.001, 1.5);
            let f1 = fit_model(&y, &design, &model).unwrap();
            let f2 = fit_model(&y2, &design, &model).unwrap();
            prop_assert!((f1.r - f2.r).abs() < 1e-12);
            prop_assert!((f1.gamma_hat[0] - f2.gamma_hat[0]).abs() < 1e-5);
            prop_assert!((f2.alpha_hat - (a + b * f1.alpha_hat)).abs() < 1e-6 * (1.0 + a.abs() + b));
            prop_assert!((f2.beta_hat - b * f1.beta_hat).abs() < 1e-6 * b);
        }

        #[test]
        fn lr_statistic_is_monotone(r1 in -1.0f64..1.0, r2 in -1.0f64..1.0, n in 3usize..200) {
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(lr_statistic_from_r(lo, n) >= lr_statistic_from_r(hi, n));
        }
    }
}
