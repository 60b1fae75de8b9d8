//! Browser bindings for the static demo page in `www/`.
//!
//! Every exported function returns a JSON string; the page parses it and
//! draws on a canvas. The `*_json` functions hold the logic and are plain
//! Rust so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use vibronica::analytic::{analytic_absorption_spectrum, analytic_emission_spectrum};
use vibronica::cavity::{polaritons, transmission_analytic, PolaritonPair};
use vibronica::franck_condon::{fc_series, FcKind, DEFAULT_TAIL_TOL};
use vibronica::model::{CavityParams, MoleculeParams};
use vibronica::spectrum::linspace;

/// Grid sizes above this are refused so a slider cannot hang the tab.
pub const MAX_POINTS: usize = 4001;

fn molecule(nu_g: f64, nu_e: f64, lambda1: f64, gamma: f64, big_gamma: f64, eta_l: f64) -> Result<MoleculeParams, String> {
    MoleculeParams::new(nu_g, nu_e, lambda1)
        .and_then(|p| p.with_rates(gamma, big_gamma))
        .and_then(|p| p.with_drive(eta_l, 0.0))
        .map_err(|e| e.to_string())
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("need lo < hi and 2..={MAX_POINTS} points"));
    }
    Ok(linspace(lo, hi, points))
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FcOut {
    lambda2: f64,
    emission: Vec<f64>,
    absorption: Vec<f64>,
}

/// Franck-Condon weights in units of `nu_g`.
pub fn fc_json(lambda1: f64, nu_e: f64) -> Result<String, String> {
    let p = molecule(1.0, nu_e, lambda1, 0.0, 0.0, 0.0)?;
    let em = fc_series(&p, FcKind::Emission, DEFAULT_TAIL_TOL).map_err(|e| e.to_string())?;
    let ab = fc_series(&p, FcKind::Absorption, DEFAULT_TAIL_TOL).map_err(|e| e.to_string())?;
    to_json(&FcOut {
        lambda2: p.lambda2(),
        emission: em.weights,
        absorption: ab.weights,
    })
}

#[derive(Serialize)]
struct SpectraOut {
    omega: Vec<f64>,
    absorption: Vec<f64>,
    emission: Vec<f64>,
}

/// Peak-normalized analytic spectra in units of `nu_g`.
pub fn spectra_json(
    lambda1: f64,
    nu_e: f64,
    gamma: f64,
    big_gamma: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<String, String> {
    let p = molecule(1.0, nu_e, lambda1, gamma, big_gamma, 1e-3)?;
    let omega = grid(lo, hi, points)?;
    let ab = analytic_absorption_spectrum(&p, &omega).map_err(|e| e.to_string())?;
    let em = analytic_emission_spectrum(&p, &omega).map_err(|e| e.to_string())?;
    to_json(&SpectraOut {
        absorption: ab.peak_normalized().values,
        emission: em.peak_normalized().values,
        omega,
    })
}

#[derive(Serialize)]
struct TransmissionOut {
    omega: Vec<f64>,
    t_power: Vec<f64>,
    polaritons: PolaritonPair,
}

/// `|T|²` of a cavity with `n_molecules` molecules, in units of `kappa`,
/// cavity resonant with the zero-phonon line and split equally between
/// the two mirrors.
#[allow(clippy::too_many_arguments)]
pub fn transmission_json(
    lambda1: f64,
    nu_g: f64,
    nu_e: f64,
    gamma: f64,
    big_gamma: f64,
    g: f64,
    n_molecules: u32,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<String, String> {
    let p = molecule(nu_g, nu_e, lambda1, gamma, big_gamma, 0.0)?;
    let c = CavityParams {
        omega_c: 0.0,
        g,
        kappa1: 0.5,
        kappa2: 0.5,
        eta_c: 1e-3,
        n_molecules,
    };
    let omega = grid(lo, hi, points)?;
    let t = transmission_analytic(&p, &c, &omega).map_err(|e| e.to_string())?;
    let pol = polaritons(&p, &c).map_err(|e| e.to_string())?;
    to_json(&TransmissionOut {
        omega,
        t_power: t.t_power,
        polaritons: pol,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fc(lambda1: f64, nu_e: f64) -> Result<String, JsError> {
    js(fc_json(lambda1, nu_e))
}

#[wasm_bindgen]
pub fn spectra(
    lambda1: f64,
    nu_e: f64,
    gamma: f64,
    big_gamma: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<String, JsError> {
    js(spectra_json(lambda1, nu_e, gamma, big_gamma, lo, hi, points))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn transmission(
    lambda1: f64,
    nu_g: f64,
    nu_e: f64,
    gamma: f64,
    big_gamma: f64,
    g: f64,
    n_molecules: u32,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<String, JsError> {
    js(transmission_json(lambda1, nu_g, nu_e, gamma, big_gamma, g, n_molecules, lo, hi, points))
}
