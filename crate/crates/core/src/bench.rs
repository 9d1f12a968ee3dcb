//! Power comparisons between the likelihood-ratio test, locally optimal
//! t-tests and multiple contrast tests.

use serde::{Deserialize, Serialize};

use crate::contrast::{contrast_power, ContrastMatrix};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::shapes::{equal_arc_gammas, CandidateModel, CandidateSet, Design, Direction, Family, Manifold, ParamSpace};
use crate::tube::{critical_value, local_t_power, power, solve_delta, Alternative, McOptions};

/// A true mean shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub family: Family,
    pub gamma: Vec<f64>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, family: Family, gamma: Vec<f64>) -> Self {
        Self { name: name.into(), family, gamma }
    }

    fn direction(&self, design: &Design) -> Result<crate::sphere::UnitVector> {
        Alternative::new(self.family, self.gamma.clone(), 0.0)?.direction(design)
    }
}

/// Doses 0, 0.05, 0.2, 0.6, 1 with equal arms.
pub fn biom_design(per_arm: usize) -> Design {
    Design::balanced(vec![0.0, 0.05, 0.2, 0.6, 1.0], per_arm).expect("valid design")
}

/// Linear, exponential γ = 0.1 and 0.5/ln 6, Emax γ = 0.2, and a steep
/// sigmoid Emax that none of the candidates contains.
pub fn table3_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::new("Linear", Family::Linear, vec![]),
        Scenario::new("Emax", Family::Emax, vec![0.2]),
        Scenario::new("Exponential", Family::Exponential, vec![0.1]),
        Scenario::new("Exponential", Family::Exponential, vec![0.5 / 6f64.ln()]),
        Scenario::new("SigEmax", Family::SigEmax, vec![0.05, 4.0]),
    ]
}

/// Linear, Emax on [0.001, 1.5] and exponential on [0.1, 2], all increasing.
pub fn table3_candidates() -> CandidateSet {
    CandidateSet::new(vec![
        CandidateModel::linear(),
        CandidateModel::new(Family::Emax, ParamSpace::interval(0.001, 1.5), Direction::Increasing),
        CandidateModel::new(Family::Exponential, ParamSpace::interval(0.1, 2.0), Direction::Increasing),
    ])
    .expect("nonempty")
}

/// A full comparison: truths × target local powers.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub design: Design,
    pub candidates: CandidateSet,
    pub scenarios: Vec<Scenario>,
    /// Shapes whose locally optimal t-tests are reported.
    pub local_tests: Vec<Scenario>,
    /// Shapes of the multiple contrast test.
    pub contrast_shapes: Vec<Scenario>,
    pub targets: Vec<f64>,
}

impl BenchmarkConfig {
    pub fn table3() -> Self {
        let scenarios = table3_scenarios();
        Self {
            design: biom_design(20),
            candidates: table3_candidates(),
            local_tests: scenarios[..4].to_vec(),
            contrast_shapes: scenarios[..4].to_vec(),
            scenarios,
            targets: vec![0.5, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub alpha: f64,
    pub mc: McOptions,
    /// Bracket width of the critical-value search.
    pub tol: f64,
    /// Use this critical value instead of computing one.
    pub r_crit: Option<f64>,
    pub contrast_reps: usize,
    pub null_reps: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            mc: McOptions { kappa: 100_000, se_target: None, max_kappa: 100_000, max_anchors: Some(20_000), seed: 0 },
            tol: 2.5e-4,
            r_crit: None,
            contrast_reps: 100_000,
            null_reps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub target: f64,
    pub scenario: usize,
    pub name: String,
    pub delta: f64,
    pub lr: f64,
    pub lr_se: f64,
    pub local: Vec<f64>,
    pub mcp: f64,
    pub mcp_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub r_crit: f64,
    pub r_crit_se: f64,
    pub rows: Vec<BenchmarkRow>,
    pub seed: u64,
    pub kappa: usize,
}

fn resolve_critical(man: &Manifold, opts: &BenchOptions) -> Result<(f64, f64)> {
    match opts.r_crit {
        Some(r) => Ok((r, 0.0)),
        None => {
            let cv = critical_value(man, opts.alpha, opts.tol, &opts.mc.with_seed(derive_seed(opts.mc.seed, 1)))?;
            Ok((cv.r_crit, cv.mc_se))
        }
    }
}

/// One row: LR, locally optimal and contrast power for one truth and target.
pub fn benchmark_row(
    cfg: &BenchmarkConfig,
    man: &Manifold,
    r_crit: f64,
    scenario: usize,
    target: f64,
    opts: &BenchOptions,
) -> Result<BenchmarkRow> {
    let s = cfg.scenarios.get(scenario).ok_or_else(|| Error::Config(format!("no scenario {scenario}")))?;
    let design = &cfg.design;
    let delta = solve_delta(design.d(), target, opts.alpha)?;
    let alt = Alternative::new(s.family, s.gamma.clone(), delta)?;
    let tag = 1000 * (scenario as u64 + 1) + (target * 100.0).round() as u64;
    let lr = power(man, r_crit, &alt, &opts.mc.with_seed(derive_seed(opts.mc.seed, tag)))?;
    let local = cfg
        .local_tests
        .iter()
        .map(|t| local_t_power(&t.direction(design)?, &alt, design, opts.alpha))
        .collect::<Result<Vec<_>>>()?;
    let (mcp, mcp_se) = if cfg.contrast_shapes.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let shapes: Vec<(Family, Vec<f64>)> = cfg.contrast_shapes.iter().map(|c| (c.family, c.gamma.clone())).collect();
        let c = ContrastMatrix::for_shapes(design, &shapes)?;
        let sim = contrast_power(
            &c,
            design,
            s.family,
            &s.gamma,
            delta,
            opts.alpha,
            opts.contrast_reps,
            opts.null_reps,
            derive_seed(opts.mc.seed, tag + 1),
        )?;
        (sim.power, sim.mc_se)
    };
    Ok(BenchmarkRow {
        target,
        scenario: scenario + 1,
        name: s.name.clone(),
        delta,
        lr: lr.value,
        lr_se: lr.se,
        local,
        mcp,
        mcp_se,
    })
}

pub fn run_benchmark(cfg: &BenchmarkConfig, opts: &BenchOptions) -> Result<BenchmarkResult> {
    let man = Manifold::new(&cfg.candidates, &cfg.design)?;
    let (r_crit, r_crit_se) = resolve_critical(&man, opts)?;
    let mut rows = Vec::new();
    for &target in &cfg.targets {
        for i in 0..cfg.scenarios.len() {
            rows.push(benchmark_row(cfg, &man, r_crit, i, target, opts)?);
        }
    }
    Ok(BenchmarkResult { r_crit, r_crit_se, rows, seed: opts.mc.seed, kappa: opts.mc.kappa })
}

impl BenchmarkResult {
    /// CSV in percent: target, scenario, LR, one column per local test,
    /// contrast test, then the Monte Carlo standard errors.
    pub fn write_csv<W: std::io::Write>(&self, cfg: &BenchmarkConfig, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["power".to_string(), "scenario".into(), "LR".into()];
        header.extend((1..=cfg.local_tests.len()).map(|i| format!("local{i}")));
        header.extend(["MCP-Mod".into(), "LR_se".into(), "MCP-Mod_se".into()]);
        w.write_record(&header).map_err(csv_err)?;
        let pct = |v: f64| format!("{:.1}", 100.0 * v);
        let pct_se = |v: f64| format!("{:.2}", 100.0 * v);
        for r in &self.rows {
            let mut rec = vec![format!("{:.0}", 100.0 * r.target), format!("{} ({})", r.scenario, r.name), pct(r.lr)];
            rec.extend(r.local.iter().map(|v| pct(*v)));
            rec.extend([pct(r.mcp), pct_se(r.lr_se), pct_se(r.mcp_se)]);
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv output: {e}"))
}

/// Power of the LR test and of locally optimal tests as the true parameter
/// of a one-parameter model moves along its curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub r_crit: f64,
    pub r_crit_se: f64,
    pub delta: f64,
    pub local_gammas: Vec<f64>,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    /// Relative arc-length position along the curve, in [0, 1].
    pub position: f64,
    pub lr: f64,
    pub lr_se: f64,
    pub local: Vec<f64>,
}

/// Power curve over `points` true parameters equally spaced in arc length,
/// with `locals` locally optimal tests also equally spaced.
pub fn power_curve(
    design: &Design,
    model: &CandidateModel,
    points: usize,
    locals: usize,
    target: f64,
    opts: &BenchOptions,
) -> Result<PowerCurve> {
    let set = CandidateSet::new(vec![model.clone()])?;
    let man = Manifold::new(&set, design)?;
    let (r_crit, r_crit_se) = resolve_critical(&man, opts)?;
    let delta = solve_delta(design.d(), target, opts.alpha)?;
    let local_gammas = equal_arc_gammas(model, design, locals)?;
    let basis = design.basis();
    let local_dirs = local_gammas
        .iter()
        .map(|g| model.point(&[*g], 1.0, design, &basis))
        .collect::<Result<Vec<_>>>()?;
    let gammas = equal_arc_gammas(model, design, points)?;
    let mut out = Vec::with_capacity(points);
    for (i, &g) in gammas.iter().enumerate() {
        let alt = Alternative::new(model.family, vec![g], delta)?;
        let lr = power(&man, r_crit, &alt, &opts.mc.with_seed(derive_seed(opts.mc.seed, 10 + i as u64)))?;
        let local = local_dirs
            .iter()
            .map(|x| local_t_power(x, &alt, design, opts.alpha))
            .collect::<Result<Vec<_>>>()?;
        out.push(CurvePoint {
            gamma: g,
            position: if points > 1 { i as f64 / (points - 1) as f64 } else { 0.0 },
            lr: lr.value,
            lr_se: lr.se,
            local,
        });
    }
    Ok(PowerCurve { r_crit, r_crit_se, delta, local_gammas, points: out })
}
