//! Multiple contrast tests in the style of MCP-Mod: one optimal contrast per
//! guessed shape, combined through the maximum t statistic.

use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{map_chunks, stream_rng};
use crate::shapes::{Design, Family};

/// c ∝ diag(n)(μ⁰ − μ̄_w 1), scaled to unit length.
pub fn optimal_contrast(mu0: &[f64], counts: &[usize]) -> Result<Vec<f64>> {
    if mu0.len() != counts.len() || mu0.len() < 2 {
        return Err(Error::Config("need at least two groups with matching sizes".into()));
    }
    let n: usize = counts.iter().sum();
    let wmean = mu0.iter().zip(counts).map(|(m, &c)| m * c as f64).sum::<f64>() / n as f64;
    let c: Vec<f64> = mu0.iter().zip(counts).map(|(m, &k)| k as f64 * (m - wmean)).collect();
    let nrm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = mu0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if nrm == 0.0 || nrm <= 1e-13 * scale * n as f64 {
        return Err(Error::DegenerateShape(Some("constant shape has no contrast".into())));
    }
    Ok(c.into_iter().map(|v| v / nrm).collect())
}

/// One unit-norm, zero-sum contrast per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastMatrix {
    pub contrasts: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl ContrastMatrix {
    pub fn new(contrasts: Vec<Vec<f64>>, counts: Vec<usize>) -> Result<Self> {
        if contrasts.is_empty() {
            return Err(Error::Config("no contrasts".into()));
        }
        let mut out = Vec::with_capacity(contrasts.len());
        for c in contrasts {
            if c.len() != counts.len() {
                return Err(Error::Config("contrast length differs from the number of groups".into()));
            }
            let nrm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(nrm > 0.0) || c.iter().sum::<f64>().abs() > 1e-10 * nrm {
                return Err(Error::Config("contrasts must be nonzero and sum to zero".into()));
            }
            out.push(c.into_iter().map(|v| v / nrm).collect());
        }
        Ok(Self { contrasts: out, counts })
    }

    /// Optimal contrasts for the given (family, γ) guesses.
    pub fn for_shapes(design: &Design, shapes: &[(Family, Vec<f64>)]) -> Result<Self> {
        let contrasts = shapes
            .iter()
            .map(|(f, g)| optimal_contrast(&f.dose_values(g, design.doses())?, design.counts()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(contrasts, design.counts().to_vec())
    }

    fn scales(&self) -> Vec<f64> {
        self.contrasts
            .iter()
            .map(|c| c.iter().zip(&self.counts).map(|(v, &n)| v * v / n as f64).sum::<f64>().sqrt())
            .collect()
    }

    fn df(&self) -> Result<usize> {
        let n: usize = self.counts.iter().sum();
        let g = self.counts.len();
        if n <= g {
            return Err(Error::DegenerateData(format!(
                "pooled variance needs more observations ({n}) than groups ({g})"
            )));
        }
        Ok(n - g)
    }

    /// max_i cᵢᵀȳ / (s · √(Σ c²/n)) for given group means and pooled sd.
    fn max_t(&self, means: &[f64], s: f64, scales: &[f64]) -> f64 {
        self.contrasts
            .iter()
            .zip(scales)
            .map(|(c, sc)| c.iter().zip(means).map(|(a, b)| a * b).sum::<f64>() / (s * sc))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Simulated null distribution of the maximum contrast t statistic, sorted.
#[derive(Debug, Clone)]
pub struct MaxTNull {
    sorted: Vec<f64>,
}

impl MaxTNull {
    pub fn simulate(c: &ContrastMatrix, reps: usize, seed: u64) -> Result<Self> {
        if reps < 100 {
            return Err(Error::Config("null simulation needs at least 100 replicates".into()));
        }
        let mut sorted = simulate_max_t(c, None, reps, seed)?;
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn reps(&self) -> usize {
        self.sorted.len()
    }

    /// P₀(max T ≥ t).
    pub fn p_value(&self, t: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v < t);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    /// Upper α quantile.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        let k = self.sorted.len();
        let idx = ((1.0 - alpha) * k as f64).ceil() as usize;
        self.sorted[idx.clamp(1, k) - 1]
    }
}

/// Max-t statistics for data whose group means are `shift + N(0, 1/n_g)`
/// and whose residual variance is χ²_df/df.
fn simulate_max_t(c: &ContrastMatrix, shift: Option<&[f64]>, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let df = c.df()?;
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let scales = c.scales();
    let sd: Vec<f64> = c.counts.iter().map(|&n| 1.0 / (n as f64).sqrt()).collect();
    let chunks = map_chunks(reps, |idx, range| {
        let mut rng = stream_rng(seed, idx);
        let mut means = vec![0.0; sd.len()];
        range
            .map(|_| {
                for (g, m) in means.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *m = shift.map_or(0.0, |s| s[g]) + sd[g] * z;
                }
                let s = (rng.sample(chi) / df as f64).sqrt();
                c.max_t(&means, s, &scales)
            })
            .collect::<Vec<f64>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastTestResult {
    pub t: Vec<f64>,
    pub p_adjusted: Vec<f64>,
    pub t_max: f64,
    pub p: f64,
    pub critical_value: f64,
    pub df: usize,
    pub reject: bool,
    pub reps: usize,
}

/// Group means and pooled standard deviation of y under the design.
fn group_summary(y: &[f64], design: &Design) -> Result<(Vec<f64>, f64)> {
    if y.len() != design.n() {
        return Err(Error::DegenerateData(format!("{} responses for a design with n = {}", y.len(), design.n())));
    }
    let mut means = Vec::with_capacity(design.groups());
    let mut ss = 0.0;
    let mut start = 0;
    for &c in design.counts() {
        let grp = &y[start..start + c];
        let m = grp.iter().sum::<f64>() / c as f64;
        ss += grp.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        means.push(m);
        start += c;
    }
    let df = design.n().checked_sub(design.groups()).filter(|&d| d > 0).ok_or_else(|| {
        Error::DegenerateData("pooled variance is undefined with one observation per group".into())
    })?;
    let s = (ss / df as f64).sqrt();
    if !(s > 0.0) {
        return Err(Error::DegenerateData("zero residual variance".into()));
    }
    Ok((means, s))
}

/// Multiple contrast test with adjusted p-values from a simulated null.
pub fn max_t_contrast_test(
    y: &[f64],
    design: &Design,
    c: &ContrastMatrix,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<ContrastTestResult> {
    if c.counts != design.counts() {
        return Err(Error::Config("contrast group sizes differ from the design".into()));
    }
    let (means, s) = group_summary(y, design)?;
    let scales = c.scales();
    let t: Vec<f64> = c
        .contrasts
        .iter()
        .zip(&scales)
        .map(|(ci, sc)| ci.iter().zip(&means).map(|(a, b)| a * b).sum::<f64>() / (s * sc))
        .collect();
    let null = MaxTNull::simulate(c, reps, seed)?;
    let p_adjusted: Vec<f64> = t.iter().map(|&ti| null.p_value(ti)).collect();
    let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let crit = null.critical_value(alpha);
    Ok(ContrastTestResult {
        p: null.p_value(t_max),
        reject: t_max > crit,
        t,
        p_adjusted,
        t_max,
        critical_value: crit,
        df: c.df()?,
        reps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPower {
    pub power: f64,
    pub mc_se: f64,
    pub reps: usize,
    pub critical_value: f64,
}

/// Power of the max-t contrast test when the standardized group means are
/// δ · u with u the unit-norm centered true shape (so δ = β‖Bx‖/σ).
pub fn contrast_power(
    c: &ContrastMatrix,
    design: &Design,
    truth: Family,
    gamma: &[f64],
    delta: f64,
    alpha: f64,
    reps: usize,
    null_reps: usize,
    seed: u64,
) -> Result<SimulatedPower> {
    let x = truth.dose_values(gamma, design.doses())?;
    let n = design.n() as f64;
    let mean = x.iter().zip(design.counts()).map(|(v, &k)| v * k as f64).sum::<f64>() / n;
    let ss: f64 = x.iter().zip(design.counts()).map(|(v, &k)| k as f64 * (v - mean) * (v - mean)).sum();
    if !(ss > 0.0) {
        return Err(Error::DegenerateShape(None));
    }
    let shift: Vec<f64> = x.iter().map(|v| delta * (v - mean) / ss.sqrt()).collect();
    let crit = MaxTNull::simulate(c, null_reps, crate::rng::derive_seed(seed, 1))?.critical_value(alpha);
    let sims = simulate_max_t(c, Some(&shift), reps, crate::rng::derive_seed(seed, 2))?;
    let hits = sims.iter().filter(|&&t| t > crit).count() as f64;
    let p = hits / reps as f64;
    Ok(SimulatedPower { power: p, mc_se: (p * (1.0 - p) / reps as f64).sqrt(), reps, critical_value: crit })
}
