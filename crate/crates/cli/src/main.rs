use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use trendtube::bench::{power_curve, run_benchmark, BenchOptions, BenchmarkConfig};
use trendtube::io::{
    candidates_to_json, design_from_data, parse_candidates, read_data, write_power_curve, write_shape_curves,
    BenchmarkFile, CandidateSpec, RunConfig, TestInputs, TestReportFile,
};
use trendtube::lr::run_lr_test;
use trendtube::shapes::{CandidateModel, CandidateSet, Design, Direction, Family, Manifold, ParamSpace};
use trendtube::tube::{critical_value, power, sample_size, solve_delta, Alternative, SampleSizeProblem};
use trendtube::Error;

#[derive(Parser)]
#[command(name = "trendtube", version, about = "Likelihood-ratio trend tests over candidate dose-response models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a data set against a candidate set; writes a JSON report.
    Test {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Critical value of the maximal correlation at level alpha.
    CriticalValue {
        #[arg(long)]
        candidates: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Power of the test against one true shape.
    Power {
        #[arg(long)]
        candidates: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        truth: TruthArgs,
        /// Non-centrality delta = beta ||B x|| / sigma.
        #[arg(long, conflicts_with = "local_power")]
        delta: Option<f64>,
        /// Choose delta so the locally optimal test has this power.
        #[arg(long)]
        local_power: Option<f64>,
        /// Use this critical value instead of computing it.
        #[arg(long)]
        r_crit: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Smallest allocation multiple reaching a target power.
    Samplesize {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        doses: Vec<f64>,
        /// Relative arm sizes (default: equal).
        #[arg(long, value_delimiter = ',')]
        allocation: Option<Vec<usize>>,
        #[command(flatten)]
        truth: TruthArgs,
        /// Standardized effect beta / sigma.
        #[arg(long)]
        effect: f64,
        #[arg(long, default_value_t = 0.8)]
        target: f64,
        #[arg(long, default_value_t = 1000)]
        max_multiplier: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Power comparison tables and curves as CSV.
    Benchmark {
        /// The five-scenario comparison at 50% and 80% local power.
        #[arg(long, group = "which")]
        table3: bool,
        /// Power along the Emax curve on [0.001, 1.5].
        #[arg(long, group = "which")]
        fig4: bool,
        /// A benchmark definition file.
        #[arg(long, group = "which")]
        bench_config: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        contrast_reps: usize,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Zero-one standardized shape curves of a candidate set as CSV.
    Curves {
        #[arg(long)]
        candidates: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        /// Curves per parameter box.
        #[arg(long, default_value_t = 5)]
        per_model: usize,
        /// Dose grid points per curve.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    doses: Vec<f64>,
    #[arg(long, conflicts_with = "counts")]
    per_dose: Option<usize>,
    /// Observations per dose, comma separated.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
}

impl DesignArgs {
    fn design(&self) -> Result<Design, Error> {
        let counts = match (&self.counts, self.per_dose) {
            (Some(c), _) => c.clone(),
            (None, Some(k)) => vec![k; self.doses.len()],
            (None, None) => return Err(Error::Config("give --per-dose or --counts".into())),
        };
        Design::new(self.doses.clone(), counts)
    }
}

#[derive(Args)]
struct TruthArgs {
    /// True shape family.
    #[arg(long)]
    family: String,
    /// True shape parameter(s), comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gamma: Vec<f64>,
}

impl TruthArgs {
    fn family(&self) -> Result<Family, Error> {
        let spec: CandidateSpec = serde_json::from_value(json!({ "family": self.family }))
            .map_err(|e| Error::Config(format!("family: {e}")))?;
        let gamma = if self.gamma.is_empty() { None } else { Some(json!({ "fixed": self.gamma })) };
        let spec: CandidateSpec = serde_json::from_value(json!({ "family": spec.family, "gamma": gamma }))
            .map_err(|e| Error::Config(e.to_string()))?;
        let model = spec.to_model()?;
        model.family.check_param(&self.gamma)?;
        Ok(model.family)
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    se_target: Option<f64>,
    #[arg(long)]
    max_kappa: Option<usize>,
    /// Anchors used for cap counting (0: all).
    #[arg(long)]
    max_anchors: Option<usize>,
    /// Bracket width of the critical-value search.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Worker threads (0: all cores); results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Also record wall-clock runtime in the output.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Error::Parse {
                line: e.line() as u64,
                message: format!("{}: {e}", p.display()),
            })?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { c.$f = v; })*};
        }
        set!(seed, kappa, alpha, se_target, max_kappa, max_anchors, tolerance, threads);
        if c.max_kappa < c.kappa && self.max_kappa.is_none() {
            c.max_kappa = c.kappa;
        }
        c.validate()?;
        Ok(c)
    }
}

fn read(p: &Path) -> Result<String, Error> {
    fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
}

fn load_candidates(p: &Path) -> Result<CandidateSet, Error> {
    parse_candidates(&read(p)?).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", p.display()) },
        other => other,
    })
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::Config(e.to_string())),
    }
}

fn emit_json<T: Serialize>(run: &RunArgs, value: &T, started: Instant) -> Result<(), Error> {
    let mut v = serde_json::to_value(value).expect("serializable");
    let secs = started.elapsed().as_secs_f64();
    if run.timing {
        v["runtime_seconds"] = json!(secs);
    } else {
        eprintln!("runtime: {secs:.2} s");
    }
    let mut text = serde_json::to_string_pretty(&v).expect("serializable");
    text.push('\n');
    emit(&run.out, text.as_bytes())
}

fn init_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let started = Instant::now();
    match cli.command {
        Command::Test { data, candidates, run } => {
            let cfg = run.config()?;
            init_threads(cfg.threads);
            let set = load_candidates(&candidates)?;
            let text = read(&data)?;
            let obs = read_data(text.as_bytes()).map_err(|e| match e {
                Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", data.display()) },
                other => other,
            })?;
            let (design, y) = design_from_data(&obs)?;
            let report = run_lr_test(&y, &design, &set, &cfg.lr())?;
            let inputs = TestInputs {
                data: obs,
                candidates: set.models.iter().map(CandidateSpec::from_model).collect(),
                config: cfg,
            };
            emit_json(&run, &TestReportFile { inputs, report }, started)
        }
        Command::CriticalValue { candidates, design, run } => {
            let cfg = run.config()?;
            init_threads(cfg.threads);
            let set = load_candidates(&candidates)?;
            let design = design.design()?;
            let man = Manifold::new(&set, &design)?;
            let cv = critical_value(&man, cfg.alpha, cfg.tolerance, &cfg.mc())?;
            let out = json!({
                "r_crit": cv.r_crit,
                "alpha": cv.alpha,
                "p": cv.p,
                "mc_se": cv.mc_se,
                "kappa": cv.kappa,
                "seed": cfg.seed,
                "design": design,
                "candidates": serde_json::from_str::<serde_json::Value>(&candidates_to_json(&set)).unwrap(),
                "config": cfg,
            });
            emit_json(&run, &out, started)
        }
        Command::Power { candidates, design, truth, delta, local_power, r_crit, run } => {
            let cfg = run.config()?;
            init_threads(cfg.threads);
            let set = load_candidates(&candidates)?;
            let design = design.design()?;
            let family = truth.family()?;
            let delta = match (delta, local_power) {
                (Some(d), _) => d,
                (None, Some(p)) => solve_delta(design.d(), p, cfg.alpha)?,
                (None, None) => return Err(Error::Config("give --delta or --local-power".into())),
            };
            let man = Manifold::new(&set, &design)?;
            let (r, r_se) = match r_crit {
                Some(r) => (r, 0.0),
                None => {
                    let cv = critical_value(&man, cfg.alpha, cfg.tolerance, &cfg.mc())?;
                    (cv.r_crit, cv.mc_se)
                }
            };
            let alt = Alternative::new(family, truth.gamma.clone(), delta)?;
            let est = power(&man, r, &alt, &cfg.mc())?;
            let out = json!({
                "power": est.value,
                "mc_se": est.se,
                "kappa": est.kappa,
                "r_crit": r,
                "r_crit_mc_se": r_se,
                "delta": delta,
                "truth": { "family": truth.family, "gamma": truth.gamma },
                "seed": cfg.seed,
                "design": design,
                "config": cfg,
            });
            emit_json(&run, &out, started)
        }
        Command::Samplesize { candidates, doses, allocation, truth, effect, target, max_multiplier, run } => {
            let cfg = run.config()?;
            init_threads(cfg.threads);
            let set = load_candidates(&candidates)?;
            let allocation = allocation.unwrap_or_else(|| vec![1; doses.len()]);
            let problem = SampleSizeProblem {
                models: set,
                doses,
                allocation,
                truth: truth.family()?,
                gamma: truth.gamma.clone(),
                effect,
                target,
                alpha: cfg.alpha,
                max_multiplier,
            };
            let res = sample_size(&problem, &cfg.mc())?;
            let mut v = serde_json::to_value(&res).unwrap();
            v["seed"] = json!(cfg.seed);
            v["config"] = json!(cfg);
            emit_json(&run, &v, started)
        }
        Command::Benchmark { table3, fig4, bench_config, contrast_reps, points, run } => {
            let cfg = run.config()?;
            init_threads(cfg.threads);
            let opts = BenchOptions {
                alpha: cfg.alpha,
                mc: trendtube::tube::McOptions { se_target: run.se_target, ..cfg.mc() },
                tol: cfg.tolerance,
                r_crit: None,
                contrast_reps,
                null_reps: contrast_reps,
            };
            let mut buf = Vec::new();
            if fig4 {
                let design = trendtube::bench::biom_design(20);
                let model = CandidateModel::new(Family::Emax, ParamSpace::interval(0.001, 1.5), Direction::Increasing);
                let curve = power_curve(&design, &model, points, 4, 0.8, &opts)?;
                write_power_curve(&curve, &mut buf)?;
            } else {
                let bc = match (&bench_config, table3) {
                    (Some(p), _) => serde_json::from_str::<BenchmarkFile>(&read(p)?)
                        .map_err(|e| Error::Parse { line: e.line() as u64, message: format!("{}: {e}", p.display()) })?
                        .to_config()?,
                    (None, true) => BenchmarkConfig::table3(),
                    (None, false) => return Err(Error::Config("choose --table3, --fig4 or --bench-config".into())),
                };
                let res = run_benchmark(&bc, &opts)?;
                res.write_csv(&bc, &mut buf)?;
                eprintln!("critical value {:.4} (mc_se {:.4}), seed {}, kappa {}", res.r_crit, res.r_crit_se, res.seed, res.kappa);
            }
            eprintln!("runtime: {:.2} s", started.elapsed().as_secs_f64());
            emit(&run.out, &buf)
        }
        Command::Curves { candidates, design, per_model, grid, out } => {
            let set = load_candidates(&candidates)?;
            let design = design.design()?;
            set.validate(&design)?;
            let mut buf = Vec::new();
            write_shape_curves(&set, &design, per_model, grid, &mut buf)?;
            emit(&out, &buf)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Config(_) | Error::InvalidDesign(_) | Error::Domain(_) => 2,
        Error::DegenerateData(_) | Error::DegenerateShape(_) => 3,
        Error::Numerical(_) | Error::EmptyCap(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
