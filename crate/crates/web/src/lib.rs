//! wasm-bindgen bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and JSON text and returns JSON (or CSV)
//! text, so the page needs no generated glue beyond the exports themselves.

use serde_json::json;
use wasm_bindgen::prelude::*;

use trendtube::bench::{power_curve, BenchOptions};
use trendtube::io::{parse_candidates, write_shape_curves};
use trendtube::shapes::{CandidateModel, Design, Direction, Family, Manifold, ParamSpace};
use trendtube::tube::{critical_value, McOptions};

fn design(doses: &str, per_dose: u32) -> Result<Design, String> {
    let doses = doses
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad dose `{}`", s.trim())))
        .collect::<Result<Vec<_>, _>>()?;
    let k = doses.len();
    Design::new(doses, vec![per_dose as usize; k]).map_err(|e| e.to_string())
}

fn mc(kappa: u32, seed: u32) -> McOptions {
    McOptions { max_anchors: Some(4000), ..McOptions::fixed(kappa as usize, seed as u64) }
}

pub fn critical_value_json(
    candidates: &str,
    doses: &str,
    per_dose: u32,
    alpha: f64,
    kappa: u32,
    seed: u32,
) -> Result<String, String> {
    let set = parse_candidates(candidates).map_err(|e| e.to_string())?;
    let design = design(doses, per_dose)?;
    let man = Manifold::new(&set, &design).map_err(|e| e.to_string())?;
    let cv = critical_value(&man, alpha, 1e-3, &mc(kappa, seed)).map_err(|e| e.to_string())?;
    Ok(json!({ "r_crit": cv.r_crit, "p": cv.p, "mc_se": cv.mc_se, "kappa": cv.kappa, "seed": seed }).to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn emax_power_curve_json(
    gamma_lo: f64,
    gamma_hi: f64,
    doses: &str,
    per_dose: u32,
    points: u32,
    target: f64,
    kappa: u32,
    seed: u32,
) -> Result<String, String> {
    let design = design(doses, per_dose)?;
    let model = CandidateModel::new(Family::Emax, ParamSpace::interval(gamma_lo, gamma_hi), Direction::Increasing);
    let opts = BenchOptions { mc: mc(kappa, seed), tol: 1e-3, ..BenchOptions::default() };
    let curve = power_curve(&design, &model, points as usize, 3, target, &opts).map_err(|e| e.to_string())?;
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

pub fn shape_curves_csv(candidates: &str, doses: &str, per_model: u32, grid: u32) -> Result<String, String> {
    let set = parse_candidates(candidates).map_err(|e| e.to_string())?;
    let design = design(doses, 2)?;
    set.validate(&design).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_shape_curves(&set, &design, per_model as usize, grid as usize, &mut buf).map_err(|e| e.to_string())?;
    String::from_utf8(buf).map_err(|e| e.to_string())
}

/// Critical value of the maximal correlation for a candidate set.
#[wasm_bindgen(js_name = criticalValue)]
pub fn critical_value_js(
    candidates: &str,
    doses: &str,
    per_dose: u32,
    alpha: f64,
    kappa: u32,
    seed: u32,
) -> Result<String, JsError> {
    critical_value_json(candidates, doses, per_dose, alpha, kappa, seed).map_err(|e| JsError::new(&e))
}

/// Power of the test and of three locally optimal tests along an Emax curve.
#[wasm_bindgen(js_name = emaxPowerCurve)]
#[allow(clippy::too_many_arguments)]
pub fn emax_power_curve_js(
    gamma_lo: f64,
    gamma_hi: f64,
    doses: &str,
    per_dose: u32,
    points: u32,
    target: f64,
    kappa: u32,
    seed: u32,
) -> Result<String, JsError> {
    emax_power_curve_json(gamma_lo, gamma_hi, doses, per_dose, points, target, kappa, seed)
        .map_err(|e| JsError::new(&e))
}

/// Zero-one standardized curves of each candidate, as CSV.
#[wasm_bindgen(js_name = shapeCurves)]
pub fn shape_curves_js(candidates: &str, doses: &str, per_model: u32, grid: u32) -> Result<String, JsError> {
    shape_curves_csv(candidates, doses, per_model, grid).map_err(|e| JsError::new(&e))
}
