//! Dose-response shape families, candidate sets, and the composite model
//! manifold of standardized predictions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{dot, norm, standardize, ContrastBasis, UnitVector};

/// Dose levels with per-dose sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignSpec", into = "DesignSpec")]
pub struct Design {
    doses: Vec<f64>,
    counts: Vec<usize>,
    z: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSpec {
    pub doses: Vec<f64>,
    pub n_per_dose: Vec<usize>,
}

impl TryFrom<DesignSpec> for Design {
    type Error = Error;
    fn try_from(s: DesignSpec) -> Result<Self> {
        Design::new(s.doses, s.n_per_dose)
    }
}

impl From<Design> for DesignSpec {
    fn from(d: Design) -> Self {
        DesignSpec { doses: d.doses, n_per_dose: d.counts }
    }
}

impl Design {
    pub fn new(doses: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if doses.len() != counts.len() {
            return Err(Error::InvalidDesign("doses and counts differ in length".into()));
        }
        if doses.len() < 2 {
            return Err(Error::InvalidDesign("at least two distinct doses are required".into()));
        }
        if doses.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidDesign("doses must be finite".into()));
        }
        if doses.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDesign("doses must be strictly ascending".into()));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidDesign("every dose needs at least one observation".into()));
        }
        let n: usize = counts.iter().sum();
        if n < 3 {
            return Err(Error::InvalidDesign(format!("n = {n}; at least 3 observations are required")));
        }
        let z = doses
            .iter()
            .zip(&counts)
            .flat_map(|(&d, &c)| std::iter::repeat_n(d, c))
            .collect();
        Ok(Self { doses, counts, z })
    }

    /// Same count at every dose.
    pub fn balanced(doses: Vec<f64>, per_dose: usize) -> Result<Self> {
        let counts = vec![per_dose; doses.len()];
        Self::new(doses, counts)
    }

    pub fn doses(&self) -> &[f64] {
        &self.doses
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn groups(&self) -> usize {
        self.doses.len()
    }

    /// Expanded dose vector, one entry per observation.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Degrees of freedom d = n − 2; the sphere is S^d ⊂ R^(d+1).
    pub fn d(&self) -> usize {
        self.n() - 2
    }

    pub fn basis(&self) -> ContrastBasis {
        ContrastBasis::new(self.n()).expect("design has n >= 3")
    }
}

/// Shape families x_γ(z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FamilyKind {
    Linear,
    Emax,
    Exponential,
    SigEmax,
    Cosine,
    PowerRatio,
    Spiral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// x = z
    Linear,
    /// x = z / (z + γ)
    Emax,
    /// x = exp(z / γ) − 1
    Exponential,
    /// x = z^h / (z^h + g^h), γ = (g, h)
    SigEmax,
    /// x = cos(z + γ)
    Cosine,
    /// x = z^γ / (z^γ + 1.5)
    PowerRatio,
    /// Space-filling curve on the sphere: spherical angles γ, λγ, …, λ^(d−1)γ,
    /// mapped back to the observation space by Bᵀ.
    Spiral { lambda: u32 },
}

impl Family {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Linear => FamilyKind::Linear,
            Family::Emax => FamilyKind::Emax,
            Family::Exponential => FamilyKind::Exponential,
            Family::SigEmax => FamilyKind::SigEmax,
            Family::Cosine => FamilyKind::Cosine,
            Family::PowerRatio => FamilyKind::PowerRatio,
            Family::Spiral { .. } => FamilyKind::Spiral,
        }
    }

    pub fn param_dim(&self) -> usize {
        match self {
            Family::Linear => 0,
            Family::SigEmax => 2,
            _ => 1,
        }
    }

    /// Scale-type parameters are gridded on a log scale.
    pub fn log_scale(&self) -> bool {
        matches!(self, Family::Emax | Family::Exponential | Family::SigEmax | Family::PowerRatio)
    }

    /// Shapes that depend on the observation only through its dose.
    pub fn dose_based(&self) -> bool {
        !matches!(self, Family::Spiral { .. })
    }

    pub fn check_param(&self, gamma: &[f64]) -> Result<()> {
        if gamma.len() != self.param_dim() {
            return Err(Error::Domain(format!(
                "{:?} takes {} parameter(s), got {}",
                self.kind(),
                self.param_dim(),
                gamma.len()
            )));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::Domain("parameter must be finite".into()));
        }
        if self.log_scale() && gamma.iter().any(|&g| g <= 0.0) {
            return Err(Error::Domain(format!("{:?} parameter must be positive", self.kind())));
        }
        if let Family::Spiral { lambda } = self {
            if *lambda == 0 {
                return Err(Error::Domain("spiral lambda must be a positive integer".into()));
            }
        }
        Ok(())
    }

    /// Shape values at every observation of the design.
    pub fn values(&self, gamma: &[f64], design: &Design) -> Result<Vec<f64>> {
        self.check_param(gamma)?;
        let z = design.z();
        let out: Vec<f64> = match *self {
            Family::Linear => z.to_vec(),
            Family::Emax => z.iter().map(|&z| z / (z + gamma[0])).collect(),
            Family::Exponential => z.iter().map(|&z| (z / gamma[0]).exp_m1()).collect(),
            Family::SigEmax => z.iter().map(|&z| sig_emax(z, gamma[0], gamma[1])).collect(),
            Family::Cosine => z.iter().map(|&z| (z + gamma[0]).cos()).collect(),
            Family::PowerRatio => z
                .iter()
                .map(|&z| {
                    let p = z.powf(gamma[0]);
                    p / (p + 1.5)
                })
                .collect(),
            Family::Spiral { lambda } => {
                let unit = spiral_point(lambda, gamma[0], design.d());
                design.basis().apply_transpose(&unit)
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{:?} shape is not finite at {:?}", self.kind(), gamma)));
        }
        Ok(out)
    }

    /// Values affinely equivalent to [`Family::values`] (same standardized
    /// prediction) that stay finite where the raw formula overflows.
    pub(crate) fn stable_values(&self, gamma: &[f64], design: &Design) -> Result<Vec<f64>> {
        if !self.dose_based() {
            return self.values(gamma, design);
        }
        let per_dose = self.dose_values(gamma, design.doses())?;
        Ok(per_dose
            .iter()
            .zip(design.counts())
            .flat_map(|(&v, &c)| std::iter::repeat_n(v, c))
            .collect())
    }

    /// Stable shape values at the distinct doses (dose-based families only).
    pub(crate) fn dose_values(&self, gamma: &[f64], doses: &[f64]) -> Result<Vec<f64>> {
        self.check_param(gamma)?;
        let out: Vec<f64> = match *self {
            Family::Linear => doses.to_vec(),
            Family::Emax => doses.iter().map(|&z| z / (z + gamma[0])).collect(),
            Family::Exponential => {
                let zmax = doses.iter().fold(f64::NEG_INFINITY, |m, &z| m.max(z));
                doses.iter().map(|&z| ((z - zmax) / gamma[0]).exp()).collect()
            }
            Family::SigEmax => doses.iter().map(|&z| sig_emax(z, gamma[0], gamma[1])).collect(),
            Family::Cosine => doses.iter().map(|&z| (z + gamma[0]).cos()).collect(),
            Family::PowerRatio => doses
                .iter()
                .map(|&z| {
                    let p = z.powf(gamma[0]);
                    p / (p + 1.5)
                })
                .collect(),
            Family::Spiral { .. } => return Err(Error::Domain("spiral is not a function of dose".into())),
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{:?} shape is not finite at {:?}", self.kind(), gamma)));
        }
        Ok(out)
    }
}

fn sig_emax(z: f64, g: f64, h: f64) -> f64 {
    if z <= 0.0 {
        return if z == 0.0 { 0.0 } else { f64::NAN };
    }
    1.0 / (1.0 + (g / z).powf(h))
}

/// Cartesian coordinates of the point with spherical angles
/// γ, λγ, …, λ^(d−1)γ on S^d.
pub fn spiral_point(lambda: u32, gamma: f64, d: usize) -> Vec<f64> {
    let lam = lambda as f64;
    let angle = |e: usize| lam.powi(e as i32) * gamma;
    (1..=d + 1)
        .map(|k| {
            let lead = if k > 1 { angle(k - 2).cos() } else { 1.0 };
            let tail: f64 = (k..=d).map(|l| angle(l - 1).sin()).product();
            lead * tail
        })
        .collect()
}

/// Sign constraint on the slope β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    Increasing,
    Decreasing,
    Both,
}

impl Direction {
    pub fn signs(&self) -> &'static [f64] {
        match self {
            Direction::Increasing => &[1.0],
            Direction::Decreasing => &[-1.0],
            Direction::Both => &[1.0, -1.0],
        }
    }
}

/// Parameter space Γ of one candidate: a point or a closed box.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSpace {
    Fixed(Vec<f64>),
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ParamSpace {
    pub fn interval(lo: f64, hi: f64) -> Self {
        ParamSpace::Box { lo: vec![lo], hi: vec![hi] }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParamSpace::Fixed(v) => v.len(),
            ParamSpace::Box { lo, .. } => lo.len(),
        }
    }

    pub fn is_point(&self) -> bool {
        match self {
            ParamSpace::Fixed(_) => true,
            ParamSpace::Box { lo, hi } => lo == hi,
        }
    }

    pub fn lower(&self) -> &[f64] {
        match self {
            ParamSpace::Fixed(v) => v,
            ParamSpace::Box { lo, .. } => lo,
        }
    }

    pub fn upper(&self) -> &[f64] {
        match self {
            ParamSpace::Fixed(v) => v,
            ParamSpace::Box { hi, .. } => hi,
        }
    }

    pub fn contains(&self, gamma: &[f64]) -> bool {
        gamma.len() == self.dim()
            && gamma
                .iter()
                .zip(self.lower().iter().zip(self.upper()))
                .all(|(g, (lo, hi))| *lo <= *g && *g <= *hi)
    }

    /// Sum of box side lengths, the scale for location tolerances.
    pub fn extent(&self) -> f64 {
        self.lower().iter().zip(self.upper()).map(|(l, h)| h - l).sum()
    }
}

/// One candidate dose-response model: a family, its Γ, and its slope sign.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    pub family: Family,
    pub space: ParamSpace,
    pub direction: Direction,
    pub label: Option<String>,
}

impl CandidateModel {
    pub fn new(family: Family, space: ParamSpace, direction: Direction) -> Self {
        Self { family, space, direction, label: None }
    }

    pub fn linear() -> Self {
        Self::new(Family::Linear, ParamSpace::Fixed(vec![]), Direction::Increasing)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn name(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let fam = serde_json::to_value(self.family.kind()).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match &self.space {
            ParamSpace::Fixed(v) if v.is_empty() => fam,
            ParamSpace::Fixed(v) => format!("{fam}({})", list(v)),
            ParamSpace::Box { lo, hi } if lo.len() == 1 => format!("{fam}[{},{}]", lo[0], hi[0]),
            ParamSpace::Box { lo, hi } => format!("{fam}[{}]..[{}]", list(lo), list(hi)),
        }
    }

    /// Standardized prediction x̃_γ with slope sign `sign`.
    pub fn point(&self, gamma: &[f64], sign: f64, design: &Design, basis: &ContrastBasis) -> Result<UnitVector> {
        let x = self.family.stable_values(gamma, design)?;
        let u = standardize(&x, basis)?;
        Ok(if sign < 0.0 { u.neg() } else { u })
    }

    /// Checks Γ against the family domain and rejects spaces on which the
    /// shape is constant at every probe point.
    pub fn validate(&self, design: &Design) -> Result<()> {
        let dim = self.family.param_dim();
        if self.space.dim() != dim {
            return Err(Error::Config(format!(
                "{} expects a {dim}-dimensional parameter space",
                self.name()
            )));
        }
        for (l, h) in self.space.lower().iter().zip(self.space.upper()) {
            if !(l.is_finite() && h.is_finite()) || l > h {
                return Err(Error::Config(format!("{}: invalid bounds [{l}, {h}]", self.name())));
            }
        }
        self.family.check_param(self.space.lower()).map_err(|e| Error::Config(format!("{}: {e}", self.name())))?;
        self.family.check_param(self.space.upper()).map_err(|e| Error::Config(format!("{}: {e}", self.name())))?;
        if let Family::Spiral { .. } = self.family {
            if design.d() < 1 {
                return Err(Error::Config("spiral needs d >= 1".into()));
            }
        }
        let basis = design.basis();
        let probes = 9;
        let mut any_ok = false;
        for i in 0..probes {
            let frac = i as f64 / (probes - 1) as f64;
            let g = self.at_fraction(&vec![frac; dim]);
            if self.point(&g, 1.0, design, &basis).is_ok() {
                any_ok = true;
                break;
            }
        }
        if !any_ok {
            return Err(Error::DegenerateShape(Some(format!(
                "{} is constant on the design throughout its parameter space",
                self.name()
            ))));
        }
        Ok(())
    }

    /// Parameter at relative position `frac` ∈ [0,1]^dim of the box, on the
    /// family's grid scale (logarithmic for scale parameters).
    pub fn at_fraction(&self, frac: &[f64]) -> Vec<f64> {
        let log = self.family.log_scale();
        self.space
            .lower()
            .iter()
            .zip(self.space.upper())
            .enumerate()
            .map(|(i, (&lo, &hi))| {
                let f = frac.get(i).copied().unwrap_or(0.0);
                if lo == hi {
                    lo
                } else if log {
                    (lo.ln() + f * (hi.ln() - lo.ln())).exp().clamp(lo, hi)
                } else {
                    (lo + f * (hi - lo)).clamp(lo, hi)
                }
            })
            .collect()
    }
}

/// A nonempty list of candidate models evaluated on one design.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub models: Vec<CandidateModel>,
}

/// One sign branch of one model; `direction = both` contributes two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub model: usize,
    pub sign: f64,
}

impl CandidateSet {
    pub fn new(models: Vec<CandidateModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Config("candidate set is empty".into()));
        }
        Ok(Self { models })
    }

    pub fn validate(&self, design: &Design) -> Result<()> {
        self.models.iter().try_for_each(|m| m.validate(design))
    }

    pub fn branches(&self) -> Vec<Branch> {
        self.models
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.direction.signs().iter().map(move |&sign| Branch { model: i, sign }))
            .collect()
    }

    /// The sub-set consisting of model `i` alone.
    pub fn single(&self, i: usize) -> CandidateSet {
        CandidateSet { models: vec![self.models[i].clone()] }
    }
}

/// How anchor parameters are drawn within a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AnchorSampling {
    /// γ uniform on Γ.
    #[default]
    Uniform,
    /// γ such that the anchor is uniform in arc length along the curve
    /// (one-dimensional boxes only; others fall back to uniform).
    ArcLength,
}

/// Where a sampled anchor came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: usize,
    pub sign: f64,
    pub gamma: Vec<f64>,
}

/// Orthonormal vectors (in contrast coordinates) spanning every standardized
/// prediction the candidate set can produce. Inner products between manifold
/// points and arbitrary sphere points only need these coordinates.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    vectors: Option<Vec<Vec<f64>>>,
    dim: usize,
}

impl Frame {
    fn build(set: &CandidateSet, design: &Design, basis: &ContrastBasis) -> Frame {
        let full = basis.dim();
        if !set.models.iter().all(|m| m.family.dose_based()) || design.groups() > full {
            return Frame { vectors: None, dim: full };
        }
        // B·1_g for each dose group, orthonormalized (twice, for stability)
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut start = 0;
        for &c in design.counts() {
            let mut ind = vec![0.0; design.n()];
            ind[start..start + c].iter_mut().for_each(|v| *v = 1.0);
            start += c;
            let mut v = basis.apply(&ind);
            for _ in 0..2 {
                for q in &out {
                    let p = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= p * qi);
                }
            }
            let nv = norm(&v);
            if nv > 1e-9 {
                v.iter_mut().for_each(|vi| *vi /= nv);
                out.push(v);
            }
        }
        let dim = out.len();
        Frame { vectors: Some(out), dim }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn project_into(&self, v: &[f64], out: &mut [f64]) {
        match &self.vectors {
            None => out.copy_from_slice(v),
            Some(q) => q.iter().zip(out.iter_mut()).for_each(|(qi, o)| *o = dot(qi, v)),
        }
    }
}

/// The composite manifold 𝕄 of a candidate set on a design.
#[derive(Debug, Clone)]
pub struct Manifold {
    set: CandidateSet,
    design: Design,
    basis: ContrastBasis,
    branches: Vec<Branch>,
    sampling: AnchorSampling,
    boundary_mass: f64,
    arc_tables: Vec<Option<ArcTable>>,
    frame: Frame,
}

#[derive(Debug, Clone)]
struct ArcTable {
    /// grid fractions of the box, ascending
    fracs: Vec<f64>,
    /// cumulative chord length at each grid point
    cum: Vec<f64>,
}

const ARC_GRID: usize = 2049;
pub const DEFAULT_BOUNDARY_MASS: f64 = 0.25;

impl Manifold {
    /// Anchors uniform in arc length with a quarter of the mass on the box
    /// boundaries; see [`Manifold::with_sampling`] for plain uniform γ.
    pub fn new(set: &CandidateSet, design: &Design) -> Result<Self> {
        Ok(Self::with_sampling(set, design, AnchorSampling::ArcLength)?.with_boundary_mass(DEFAULT_BOUNDARY_MASS))
    }

    pub fn with_sampling(set: &CandidateSet, design: &Design, sampling: AnchorSampling) -> Result<Self> {
        set.validate(design)?;
        let basis = design.basis();
        let branches = set.branches();
        let arc_tables = set
            .models
            .iter()
            .map(|m| match sampling {
                AnchorSampling::ArcLength if m.space.dim() == 1 && !m.space.is_point() => {
                    Some(build_arc_table(m, design, &basis))
                }
                _ => None,
            })
            .collect();
        let frame = Frame::build(set, design, &basis);
        Ok(Self { set: set.clone(), design: design.clone(), basis, branches, sampling, boundary_mass: 0.0, arc_tables, frame })
    }

    pub fn set(&self) -> &CandidateSet {
        &self.set
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn basis(&self) -> &ContrastBasis {
        &self.basis
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Puts probability `q` on the boundary of each parameter box: every free
    /// coordinate is, with probability `q`, pinned to one of its two ends.
    /// Anchors then cover the manifold edges densely, which bounds the
    /// neighbour counts of cap samples drawn near the edges of the tube.
    pub fn with_boundary_mass(mut self, q: f64) -> Self {
        self.boundary_mass = q.clamp(0.0, 1.0);
        self
    }

    pub fn boundary_mass(&self) -> f64 {
        self.boundary_mass
    }

    pub fn sampling(&self) -> AnchorSampling {
        self.sampling
    }

    /// Sphere dimension d.
    pub fn d(&self) -> usize {
        self.design.d()
    }

    pub(crate) fn frame(&self) -> &Frame {
        &self.frame
    }

    /// True when 𝕄 consists of exactly one point.
    pub fn is_single_point(&self) -> bool {
        self.branches.len() == 1 && self.set.models[self.branches[0].model].space.is_point()
    }

    /// Restriction of the manifold to model `i`.
    pub fn sub_manifold(&self, i: usize) -> Result<Manifold> {
        Ok(Manifold::with_sampling(&self.set.single(i), &self.design, self.sampling)?.with_boundary_mass(self.boundary_mass))
    }

    pub fn point(&self, branch: Branch, gamma: &[f64]) -> Result<UnitVector> {
        self.set.models[branch.model].point(gamma, branch.sign, &self.design, &self.basis)
    }

    /// Draws an anchor W on 𝕄: a branch uniformly, then γ within the model.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(UnitVector, Provenance)> {
        for _ in 0..1000 {
            let b = self.branches[rng.random_range(0..self.branches.len())];
            let model = &self.set.models[b.model];
            let q = self.boundary_mass;
            let edge = |rng: &mut R| -> Option<f64> {
                (q > 0.0 && rng.random::<f64>() < q).then(|| if rng.random::<bool>() { 1.0 } else { 0.0 })
            };
            let gamma = match (&model.space, &self.arc_tables[b.model]) {
                (ParamSpace::Fixed(v), _) => v.clone(),
                (_, Some(table)) => {
                    let f = edge(rng).unwrap_or_else(|| table.invert(rng.random::<f64>()));
                    model.at_fraction(&[f])
                }
                (ParamSpace::Box { lo, hi }, None) => lo
                    .iter()
                    .zip(hi)
                    .map(|(&l, &h)| {
                        if l == h {
                            l
                        } else {
                            match edge(rng) {
                                Some(e) => if e > 0.5 { h } else { l },
                                None => l + (h - l) * rng.random::<f64>(),
                            }
                        }
                    })
                    .collect(),
            };
            match self.point(b, &gamma) {
                Ok(w) => return Ok((w, Provenance { model: b.model, sign: b.sign, gamma })),
                Err(Error::DegenerateShape(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::DegenerateShape(Some("no admissible anchor found".into())))
    }
}

fn build_arc_table(model: &CandidateModel, design: &Design, basis: &ContrastBasis) -> ArcTable {
    let mut fracs = Vec::with_capacity(ARC_GRID);
    let mut pts: Vec<Option<UnitVector>> = Vec::with_capacity(ARC_GRID);
    for i in 0..ARC_GRID {
        let f = i as f64 / (ARC_GRID - 1) as f64;
        fracs.push(f);
        pts.push(model.point(&model.at_fraction(&[f]), 1.0, design, basis).ok());
    }
    let mut cum = vec![0.0; ARC_GRID];
    for i in 1..ARC_GRID {
        let step = match (&pts[i - 1], &pts[i]) {
            (Some(a), Some(b)) => a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            _ => 0.0,
        };
        cum[i] = cum[i - 1] + step;
    }
    ArcTable { fracs, cum }
}

impl ArcTable {
    fn invert(&self, u: f64) -> f64 {
        let total = *self.cum.last().unwrap();
        if total <= 0.0 {
            return u;
        }
        let target = u * total;
        let idx = self.cum.partition_point(|&c| c < target).clamp(1, self.cum.len() - 1);
        let (c0, c1) = (self.cum[idx - 1], self.cum[idx]);
        let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        self.fracs[idx - 1] + w * (self.fracs[idx] - self.fracs[idx - 1])
    }
}

/// `count` parameter values equally spaced in arc length along the curve of a
/// one-parameter model (endpoints included).
pub fn equal_arc_gammas(model: &CandidateModel, design: &Design, count: usize) -> Result<Vec<f64>> {
    if model.space.dim() != 1 {
        return Err(Error::Config("arc-length spacing needs a one-parameter model".into()));
    }
    if count < 2 {
        return Ok(vec![model.space.lower()[0]]);
    }
    let table = build_arc_table(model, design, &design.basis());
    Ok((0..count)
        .map(|i| model.at_fraction(&[table.invert(i as f64 / (count - 1) as f64)])[0])
        .collect())
}
