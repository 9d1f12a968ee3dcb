//! File formats: candidate-set JSON, dose/response CSV, run configuration,
//! report JSON and curve CSV exports.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bench::{BenchmarkConfig, PowerCurve, Scenario};
use crate::error::{Error, Result};
use crate::lr::{LrOptions, LrTestReport};
use crate::shapes::{equal_arc_gammas, CandidateModel, CandidateSet, Design, Direction, Family, FamilyKind, ParamSpace};
use crate::tube::McOptions;

/// Parameter space as written in candidate files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Interval([f64; 2]),
    Box(Vec<[f64; 2]>),
    Fixed { fixed: FixedValue },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixedValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSpec>,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    /// Spiral frequency λ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_direction() -> Direction {
    Direction::Increasing
}

fn family_from_kind(kind: FamilyKind, lambda: Option<u32>) -> Result<Family> {
    if lambda.is_some() && kind != FamilyKind::Spiral {
        return Err(Error::Config("\"lambda\" only applies to the spiral family".into()));
    }
    Ok(match kind {
        FamilyKind::Linear => Family::Linear,
        FamilyKind::Emax => Family::Emax,
        FamilyKind::Exponential => Family::Exponential,
        FamilyKind::SigEmax => Family::SigEmax,
        FamilyKind::Cosine => Family::Cosine,
        FamilyKind::PowerRatio => Family::PowerRatio,
        FamilyKind::Spiral => Family::Spiral {
            lambda: lambda.ok_or_else(|| Error::Config("spiral needs \"lambda\"".into()))?,
        },
    })
}

impl CandidateSpec {
    pub fn to_model(&self) -> Result<CandidateModel> {
        let family = family_from_kind(self.family, self.lambda)?;
        let space = match &self.gamma {
            None if family.param_dim() == 0 => ParamSpace::Fixed(vec![]),
            None => return Err(Error::Config(format!("{:?} needs \"gamma\"", self.family))),
            Some(GammaSpec::Interval([lo, hi])) => ParamSpace::Box { lo: vec![*lo], hi: vec![*hi] },
            Some(GammaSpec::Box(b)) => ParamSpace::Box {
                lo: b.iter().map(|i| i[0]).collect(),
                hi: b.iter().map(|i| i[1]).collect(),
            },
            Some(GammaSpec::Fixed { fixed: FixedValue::Scalar(v) }) => ParamSpace::Fixed(vec![*v]),
            Some(GammaSpec::Fixed { fixed: FixedValue::Vector(v) }) => ParamSpace::Fixed(v.clone()),
        };
        let mut m = CandidateModel::new(family, space, self.direction);
        m.label = self.label.clone();
        Ok(m)
    }

    pub fn from_model(m: &CandidateModel) -> Self {
        let lambda = match m.family {
            Family::Spiral { lambda } => Some(lambda),
            _ => None,
        };
        let gamma = match &m.space {
            ParamSpace::Fixed(v) if v.is_empty() => None,
            ParamSpace::Fixed(v) if v.len() == 1 => Some(GammaSpec::Fixed { fixed: FixedValue::Scalar(v[0]) }),
            ParamSpace::Fixed(v) => Some(GammaSpec::Fixed { fixed: FixedValue::Vector(v.clone()) }),
            ParamSpace::Box { lo, hi } if lo.len() == 1 => Some(GammaSpec::Interval([lo[0], hi[0]])),
            ParamSpace::Box { lo, hi } => Some(GammaSpec::Box(lo.iter().zip(hi).map(|(l, h)| [*l, *h]).collect())),
        };
        Self { family: m.family.kind(), gamma, direction: m.direction, lambda, label: m.label.clone() }
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line() as u64, message: e.to_string() }
}

pub fn parse_candidates(text: &str) -> Result<CandidateSet> {
    let specs: Vec<CandidateSpec> = serde_json::from_str(text).map_err(json_err)?;
    CandidateSet::new(specs.iter().map(CandidateSpec::to_model).collect::<Result<_>>()?)
}

pub fn candidates_to_json(set: &CandidateSet) -> String {
    let specs: Vec<CandidateSpec> = set.models.iter().map(CandidateSpec::from_model).collect();
    serde_json::to_string_pretty(&specs).expect("serializable")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub dose: f64,
    pub response: f64,
}

/// Reads `dose,response` rows. Errors carry the 1-based line number.
pub fn read_data<R: Read>(input: R) -> Result<Vec<Observation>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    if headers.len() != 2 || &headers[0] != "dose" || &headers[1] != "response" {
        return Err(Error::Parse { line: 1, message: "header must be `dose,response`".into() });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("{name} `{}` is not a number", &rec[i]) })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("{name} must be finite") });
            }
            Ok(v)
        };
        out.push(Observation { dose: field(0, "dose")?, response: field(1, "response")? });
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 1, message: "no observations".into() });
    }
    Ok(out)
}

/// Groups observations by dose: the design and the responses in design order.
pub fn design_from_data(obs: &[Observation]) -> Result<(Design, Vec<f64>)> {
    let mut sorted = obs.to_vec();
    sorted.sort_by(|a, b| a.dose.total_cmp(&b.dose));
    let mut doses: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for o in &sorted {
        if doses.last() == Some(&o.dose) {
            *counts.last_mut().unwrap() += 1;
        } else {
            doses.push(o.dose);
            counts.push(1);
        }
    }
    let design = Design::new(doses, counts)?;
    Ok((design, sorted.iter().map(|o| o.response).collect()))
}

pub fn write_data<W: Write>(obs: &[Observation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dose", "response"]).map_err(csv_err)?;
    for o in obs {
        w.write_record([o.dose.to_string(), o.response.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv output: {e}"))
}

/// Everything that determines a randomized run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub kappa: usize,
    pub alpha: f64,
    /// Bracket width of critical-value searches.
    pub tolerance: f64,
    pub max_kappa: usize,
    /// Stop doubling kappa once the Monte Carlo error is below this (0: fixed kappa).
    pub se_target: f64,
    /// Anchors used for counting (0: all).
    pub max_anchors: usize,
    /// Worker threads (0: all cores). Results do not depend on it, so it is not written out.
    #[serde(default, skip_serializing)]
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            kappa: 20_000,
            alpha: 0.05,
            tolerance: 2.5e-4,
            max_kappa: 1_000_000,
            se_target: 0.001,
            max_anchors: 50_000,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 0.5]", self.alpha)));
        }
        if self.kappa < 100 {
            return Err(Error::Config(format!("kappa = {} must be at least 100", self.kappa)));
        }
        if self.max_kappa < self.kappa {
            return Err(Error::Config("max-kappa must be at least kappa".into()));
        }
        if !(self.se_target >= 0.0) {
            return Err(Error::Config("se-target must be non-negative".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn mc(&self) -> McOptions {
        McOptions {
            kappa: self.kappa,
            seed: self.seed,
            se_target: (self.se_target > 0.0).then_some(self.se_target),
            max_kappa: self.max_kappa,
            max_anchors: (self.max_anchors > 0).then_some(self.max_anchors),
        }
    }

    pub fn lr(&self) -> LrOptions {
        LrOptions { alpha: self.alpha, tol: self.tolerance, mc: self.mc() }
    }
}

/// Inputs recorded alongside a test report so the run can be repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestInputs {
    pub data: Vec<Observation>,
    pub candidates: Vec<CandidateSpec>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReportFile {
    pub inputs: TestInputs,
    pub report: LrTestReport,
}

/// A true shape in benchmark files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub family: FamilyKind,
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u32>,
}

impl ScenarioSpec {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let family = family_from_kind(self.family, self.lambda)?;
        family.check_param(&self.gamma).map_err(|e| Error::Config(e.to_string()))?;
        let name = self.name.clone().unwrap_or_else(|| format!("{:?}", self.family));
        Ok(Scenario::new(name, family, self.gamma.clone()))
    }
}

/// Benchmark definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFile {
    pub doses: Vec<f64>,
    pub n_per_dose: Vec<usize>,
    pub candidates: Vec<CandidateSpec>,
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default)]
    pub local_tests: Vec<ScenarioSpec>,
    #[serde(default)]
    pub contrast_shapes: Vec<ScenarioSpec>,
    pub targets: Vec<f64>,
}

impl BenchmarkFile {
    pub fn to_config(&self) -> Result<BenchmarkConfig> {
        let scen = |v: &[ScenarioSpec]| v.iter().map(ScenarioSpec::to_scenario).collect::<Result<Vec<_>>>();
        let candidates = CandidateSet::new(self.candidates.iter().map(CandidateSpec::to_model).collect::<Result<_>>()?)?;
        Ok(BenchmarkConfig {
            design: Design::new(self.doses.clone(), self.n_per_dose.clone())?,
            candidates,
            scenarios: scen(&self.scenarios)?,
            local_tests: scen(&self.local_tests)?,
            contrast_shapes: scen(&self.contrast_shapes)?,
            targets: self.targets.clone(),
        })
    }
}

/// Zero-one standardized shape curves over a dose grid, long format
/// `curve,dose,value`. Parameter boxes contribute `per_model` curves
/// spaced evenly along the model manifold.
pub fn write_shape_curves<W: Write>(set: &CandidateSet, design: &Design, per_model: usize, grid: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["curve", "dose", "value"]).map_err(csv_err)?;
    let (z0, z1) = (design.doses()[0], design.doses()[design.groups() - 1]);
    let zs: Vec<f64> = (0..grid.max(2)).map(|i| z0 + (z1 - z0) * i as f64 / (grid.max(2) - 1) as f64).collect();
    for m in &set.models {
        if !m.family.dose_based() {
            continue;
        }
        let gammas: Vec<Vec<f64>> = if m.space.is_point() {
            vec![m.space.lower().to_vec()]
        } else if m.space.dim() == 1 {
            equal_arc_gammas(m, design, per_model.max(2))?.into_iter().map(|g| vec![g]).collect()
        } else {
            (0..per_model.max(2)).map(|i| m.at_fraction(&vec![i as f64 / (per_model.max(2) - 1) as f64; m.space.dim()])).collect()
        };
        for g in gammas {
            let v = m.family.dose_values(&g, &zs)?;
            let (a, b) = (v[0], v[v.len() - 1]);
            let (lo, span) = if (b - a).abs() > 0.0 {
                (a, b - a)
            } else {
                let mn = v.iter().copied().fold(f64::INFINITY, f64::min);
                let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (mn, (mx - mn).max(f64::MIN_POSITIVE))
            };
            let id = curve_id(m, &g);
            for (z, x) in zs.iter().zip(&v) {
                w.write_record([id.clone(), fmt(*z), fmt((x - lo) / span)]).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

fn curve_id(m: &CandidateModel, g: &[f64]) -> String {
    let fam = format!("{:?}", m.family.kind()).to_lowercase();
    if g.is_empty() {
        fam
    } else {
        let parts: Vec<String> = g.iter().map(|v| fmt(*v)).collect();
        format!("{fam}({})", parts.join(";"))
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}").trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Power curve in long format `curve,gamma,position,value`; `position` is the
/// relative arc length of the true parameter along the model curve.
pub fn write_power_curve<W: Write>(curve: &PowerCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["curve", "gamma", "position", "value"]).map_err(csv_err)?;
    for p in &curve.points {
        w.write_record(["LR".to_string(), fmt(p.gamma), fmt(p.position), fmt(p.lr)]).map_err(csv_err)?;
    }
    for (j, lg) in curve.local_gammas.iter().enumerate() {
        let id = format!("local({})", fmt(*lg));
        for p in &curve.points {
            w.write_record([id.clone(), fmt(p.gamma), fmt(p.position), fmt(p.local[j])]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_schema() {
        let text = r#"[
            {"family": "emax", "gamma": [0.001, 1.5], "direction": "increasing"},
            {"family": "linear", "direction": "both"},
            {"family": "exponential", "gamma": {"fixed": 0.3}},
            {"family": "sigEmax", "gamma": [[0.01, 1.0], [1.0, 6.0]]},
            {"family": "spiral", "gamma": [0, 6.283185307179586], "lambda": 64}
        ]"#;
        let set = parse_candidates(text).unwrap();
        assert_eq!(set.models.len(), 5);
        assert_eq!(set.models[0].space, ParamSpace::interval(0.001, 1.5));
        assert_eq!(set.models[1].direction, Direction::Both);
        assert_eq!(set.models[2].space, ParamSpace::Fixed(vec![0.3]));
        assert_eq!(set.models[3].space.dim(), 2);
        assert_eq!(set.models[4].family, Family::Spiral { lambda: 64 });
        let again = parse_candidates(&candidates_to_json(&set)).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn candidate_errors() {
        assert!(matches!(parse_candidates(r#"[{"family": "quadratic"}]"#), Err(Error::Parse { .. })));
        assert!(matches!(parse_candidates(r#"[{"family": "emax"}]"#), Err(Error::Config(_))));
        assert!(matches!(parse_candidates("[]"), Err(Error::Config(_))));
        assert!(parse_candidates(r#"[{"family": "spiral", "gamma": [0, 1]}]"#).is_err());
        assert!(parse_candidates(r#"[{"family": "emax", "gamma": [0, 1], "colour": 1}]"#).is_err());
    }

    #[test]
    fn data_round_trip() {
        let text = "dose,response\n0.2,1.5\n0,1.0\n0.2,1.7\n0,0.9\n";
        let obs = read_data(text.as_bytes()).unwrap();
        let (design, y) = design_from_data(&obs).unwrap();
        assert_eq!(design.doses(), &[0.0, 0.2]);
        assert_eq!(design.counts(), &[2, 2]);
        assert_eq!(y, vec![1.0, 0.9, 1.5, 1.7]);
        let mut buf = Vec::new();
        write_data(&obs, &mut buf).unwrap();
        assert_eq!(read_data(buf.as_slice()).unwrap(), obs);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = "dose,response\n0,1\n0.5,2\nhigh,3\n";
        assert_eq!(read_data(text.as_bytes()).unwrap_err(), Error::Parse { line: 4, message: "dose `high` is not a number".into() });
        assert!(matches!(read_data("x,y\n1,2\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_data("dose,response\n1\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn benchmark_file() {
        let text = r#"{
            "doses": [0, 0.5, 1], "n_per_dose": [5, 5, 5],
            "candidates": [{"family": "emax", "gamma": [0.01, 2]}],
            "scenarios": [{"family": "linear"}, {"name": "steep", "family": "sigEmax", "gamma": [0.05, 4]}],
            "local_tests": [{"family": "emax", "gamma": [0.2]}],
            "targets": [0.8]
        }"#;
        let file: BenchmarkFile = serde_json::from_str(text).unwrap();
        let cfg = file.to_config().unwrap();
        assert_eq!(cfg.scenarios[1].family, Family::SigEmax);
        assert_eq!(cfg.scenarios[1].name, "steep");
        assert!(cfg.contrast_shapes.is_empty());
        let bad: BenchmarkFile = serde_json::from_str(&text.replace("[0.05, 4]", "[0.05]")).unwrap();
        assert!(bad.to_config().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { alpha: 0.6, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { kappa: 50, ..RunConfig::default() }.validate().is_err());
    }

    #[test]
    fn shape_curves_are_zero_one() {
        let set = parse_candidates(r#"[{"family": "emax", "gamma": {"fixed": 0.2}}, {"family": "linear"}]"#).unwrap();
        let design = Design::balanced(vec![0.0, 0.5, 1.0], 2).unwrap();
        let mut buf = Vec::new();
        write_shape_curves(&set, &design, 3, 11, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        let emax: Vec<_> = rows.iter().filter(|r| r[0] == "emax(0.2)").collect();
        assert_eq!((emax[0][1], emax[0][2]), ("0", "0"));
        assert_eq!((emax[10][1], emax[10][2]), ("1", "1"));
        for r in rows.iter().filter(|r| r[0] == "linear") {
            assert_eq!(r[1], r[2]);
        }
    }
}
