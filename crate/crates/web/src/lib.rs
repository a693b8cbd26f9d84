//! Browser bindings for a few planar frame computations.
//!
//! Points cross the boundary as a flat `[x0, y0, x1, y1, ..]` array and
//! results come back as JSON strings.

use framekit::canon::CanonMethod;
use framekit::diagnostics::{
    probe_frame_continuity, probe_operator_continuity, random_direction, ProbeSchedule,
};
use framekit::frames::{critical_angles_d2, frame_argsort_exact_d2, frame_so2, FrameKind};
use framekit::project::DEFAULT_QUADRATURE;
use framekit::{GroupElement, PointCloud};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn cloud(points: &[f64]) -> Result<PointCloud, String> {
    if points.is_empty() || !points.len().is_multiple_of(2) {
        return Err(format!(
            "expected an even, nonzero number of coordinates, got {}",
            points.len()
        ));
    }
    let cols: Vec<&[f64]> = points.chunks(2).collect();
    PointCloud::from_columns(&cols).map_err(|e| e.to_string())
}

/// Arc boundaries and the permutation of every atom of the exact argsort frame.
pub fn argsort_json(points: &[f64]) -> Result<Value, String> {
    let x = cloud(points)?;
    let frame = frame_argsort_exact_d2(&x).map_err(|e| e.to_string())?;
    let atoms: Vec<Value> = frame
        .atoms()
        .iter()
        .map(|a| {
            let perm = a
                .element
                .as_perm()
                .map(|p| p.map().to_vec())
                .unwrap_or_default();
            json!({ "weight": a.weight, "perm": perm })
        })
        .collect();
    Ok(json!({ "angles": critical_angles_d2(&x), "atoms": atoms }))
}

/// Rotation angle and weight of every atom of the SO(2) frame.
pub fn so2_json(points: &[f64], eta: f64) -> Result<Value, String> {
    let x = cloud(points)?;
    let frame = frame_so2(&x, eta).map_err(|e| e.to_string())?;
    let atoms: Vec<Value> = frame
        .atoms()
        .iter()
        .map(|a| {
            let angle = match &a.element {
                GroupElement::Rotation(r) => r.matrix()[(1, 0)].atan2(r.matrix()[(0, 0)]),
                _ => 0.0,
            };
            json!({ "weight": a.weight, "angle": angle })
        })
        .collect();
    Ok(json!({ "atoms": atoms }))
}

/// Distances along `X + 2^-k Δ` for the lexicographic canonicalization and
/// the exact argsort frame, with a seeded direction `Δ`.
pub fn probe_json(points: &[f64], steps: usize, seed: u64) -> Result<Value, String> {
    let x = cloud(points)?;
    let delta = random_direction(2, x.n(), &mut ChaCha8Rng::seed_from_u64(seed));
    let sched =
        ProbeSchedule::with_steps(x, delta, steps.max(2), 0.5).map_err(|e| e.to_string())?;
    let canon = probe_operator_continuity(|y| Ok(CanonMethod::Lex.apply(y)?.flatten()), &sched)
        .map_err(|e| e.to_string())?;
    let frame = probe_frame_continuity(&FrameKind::ArgsortExact, &sched, DEFAULT_QUADRATURE)
        .map_err(|e| e.to_string())?;
    serde_json::to_value(json!({ "canon_lex": canon, "argsort_frame": frame }))
        .map_err(|e| e.to_string())
}

fn to_js(v: Result<Value, String>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn argsort_frame(points: &[f64]) -> Result<String, JsValue> {
    to_js(argsort_json(points))
}

#[wasm_bindgen]
pub fn so2_frame(points: &[f64], eta: f64) -> Result<String, JsValue> {
    to_js(so2_json(points, eta))
}

#[wasm_bindgen]
pub fn continuity_probe(points: &[f64], steps: usize, seed: u64) -> Result<String, JsValue> {
    to_js(probe_json(points, steps, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argsort_weights_sum_to_one() {
        let v = argsort_json(&[0.0, 0.0, 1.0, 0.2, -0.3, 0.9]).unwrap();
        let total: f64 = v["atoms"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a["weight"].as_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(v["angles"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn so2_single_point_rotates_onto_axis() {
        let v = so2_json(&[0.0, 2.0], 0.5).unwrap();
        let atoms = v["atoms"].as_array().unwrap();
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0]["angle"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn probe_separates_canon_from_frame_at_a_tie() {
        let v = probe_json(&[0.5, 0.0, 0.5, 1.0, -0.4, 0.3], 20, 1).unwrap();
        assert_eq!(v["argsort_frame"]["verdict"], "converges");
        assert_eq!(v["canon_lex"]["distances"].as_array().unwrap().len(), 20);
    }

    #[test]
    fn odd_coordinate_count_is_rejected() {
        assert!(argsort_json(&[1.0, 2.0, 3.0]).is_err());
    }
}
