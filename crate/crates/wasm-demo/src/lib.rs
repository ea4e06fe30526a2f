//! WebAssembly bindings behind `www/index.html`.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented on
//! each function. Errors surface as JS exceptions carrying the core error text.

use stimclone::{
    bracketing_curves, evolve_master, mean_outputs, optimal_fidelity, postselect_total,
    stimulated_weights, AmplifierParams, CloneProcess, InputState,
};
use wasm_bindgen::prelude::*;

/// Rows of `[mu_in, f_q0, f_qfit, f_q1]` on `points` evenly spaced inputs in
/// `(0, mu_max]`, all evaluated at the output level the `(gain, merit)`
/// amplifier produces.
pub fn curves(gain: f64, merit: f64, mu_max: f64, points: usize) -> stimclone::Result<Vec<f64>> {
    if !(mu_max > 0.0 && mu_max.is_finite()) || points < 2 {
        return Err(stimclone::Error::InvalidArgument(
            "need mu_max > 0 and at least 2 points".into(),
        ));
    }
    AmplifierParams::from_gain_merit(gain, merit)?;
    let grid: Vec<f64> = (1..=points)
        .map(|i| mu_max * i as f64 / points as f64)
        .collect();
    let rows = bracketing_curves(merit, gain, &grid)?;
    Ok(rows
        .iter()
        .flat_map(|p| [p.mu_in, p.f_q0, p.f_qfit.unwrap_or(f64::NAN), p.f_q1])
        .collect())
}

/// `[optimal_fidelity, w_0, ..., w_{M-N}]`.
pub fn optimal(n: u32, m: u32) -> stimclone::Result<Vec<f64>> {
    let process = CloneProcess::new(n, m)?;
    let mut out = vec![optimal_fidelity(process)];
    out.extend(stimulated_weights(process).weights);
    Ok(out)
}

/// Master-equation post-selection of a Fock(`n`) input on `m` output photons:
/// `[fidelity, P(M|N), optimal_fidelity, mean_v, mean_h, w_0, ..., w_{M-N}]`.
pub fn postselected(gain: f64, merit: f64, n: u32, m: u32) -> stimclone::Result<Vec<f64>> {
    let params = AmplifierParams::from_gain_merit(gain, merit)?;
    let process = CloneProcess::new(n, m)?;
    let dist = evolve_master(InputState::Fock(n), &params, None)?;
    let sel = postselect_total(&dist, n, m)?;
    let means = mean_outputs(&params, n as f64)?;
    let mut out = vec![
        sel.clone.fidelity,
        sel.probability,
        optimal_fidelity(process),
        means.mu_v,
        means.mu_h,
    ];
    out.extend(sel.clone.weights);
    Ok(out)
}

fn js(r: stimclone::Result<Vec<f64>>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = fidelityCurves)]
pub fn fidelity_curves(
    gain: f64,
    merit: f64,
    mu_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    js(curves(gain, merit, mu_max, points))
}

#[wasm_bindgen(js_name = optimalCloner)]
pub fn optimal_cloner(n: u32, m: u32) -> Result<Vec<f64>, JsError> {
    js(optimal(n, m))
}

#[wasm_bindgen(js_name = postselectedCloner)]
pub fn postselected_cloner(gain: f64, merit: f64, n: u32, m: u32) -> Result<Vec<f64>, JsError> {
    js(postselected(gain, merit, n, m))
}
