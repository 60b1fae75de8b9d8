//! One function per subcommand. Each returns the artifacts to write and
//! fills in the provenance it knows about.

use rayon::prelude::*;
use rayon::ThreadPool;
use vibronica::analytic::{
    analytic_absorption_spectrum, analytic_emission_spectrum, steady_population,
    vibrational_correlation, RateModel,
};
use vibronica::cavity::{polaritons, transmission_analytic, transmission_numeric, TransmissionScan};
use vibronica::fock::FockSpace;
use vibronica::franck_condon::{fc_series, FcKind};
use vibronica::ladder::{Ladder, LadderState};
use vibronica::lindblad::{
    correlator_absorption_spectrum, molecule_liouvillian, numeric_emission_spectrum,
    numeric_steady_population, steady_state, two_time_correlation,
};
use vibronica::model::{CavityParams, MolecularOperators, MoleculeParams};
use vibronica::spectrum::{linspace, SpectrumSeries};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Artifact, Cell, PlotStyle, Provenance, Table};

/// Laser-frequency axis label used by the plot scripts.
const LASER: &str = "laser frequency";

/// Splits `grid` into contiguous chunks, evaluates them on the pool and
/// concatenates in order. Each point is computed independently, so the
/// result does not depend on how the grid is cut.
fn par_chunked<T, R, F>(pool: &ThreadPool, grid: &[T], f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> Result<Vec<R>, CliError> + Sync,
{
    let chunk = grid.len().div_ceil(4 * pool.current_num_threads()).max(1);
    let parts: Vec<Vec<R>> = pool.install(|| grid.par_chunks(chunk).map(&f).collect::<Result<_, _>>())?;
    Ok(parts.into_iter().flatten().collect())
}

fn space(dim: usize) -> Result<FockSpace, CliError> {
    Ok(FockSpace::new(dim)?)
}

fn cavity(cfg: &RunConfig, sub: &str) -> Result<CavityParams, CliError> {
    cfg.cavity
        .as_ref()
        .ok_or_else(|| CliError::usage(format!("`{sub}` needs a `cavity` block in the config")))?
        .to_params()
}

fn note_warnings(prov: &mut Provenance, label: &str, s: &SpectrumSeries) {
    for w in &s.warnings {
        prov.notes.push(format!("{label}: {w}"));
    }
}

pub fn fc(cfg: &RunConfig, prov: &mut Provenance) -> Result<Vec<Artifact>, CliError> {
    let p = cfg.molecule.to_params()?;
    let em = fc_series(&p, FcKind::Emission, cfg.numerics.tail_tol)?;
    let ab = fc_series(&p, FcKind::Absorption, cfg.numerics.tail_tol)?;
    prov.truncation.insert("m_max_em".into(), em.m_max);
    prov.truncation.insert("m_max_ab".into(), ab.m_max);
    let mut t = Table::new(&["m", "S_em", "S_ab"]);
    let at = |w: &[f64], m: usize| w.get(m).copied().unwrap_or(0.0);
    for m in 0..=em.m_max.max(ab.m_max) {
        t.push(vec![m.into(), at(&em.weights, m).into(), at(&ab.weights, m).into()]);
    }
    Ok(vec![Artifact::new("fc", t, PlotStyle::Bars).with_payload([&em, &ab])?])
}

pub fn spectrum(
    cfg: &RunConfig,
    prov: &mut Provenance,
    pool: &ThreadPool,
    normalize: bool,
) -> Result<Vec<Artifact>, CliError> {
    let p = cfg.molecule.to_params()?;
    if !(p.eta_l() > 0.0) {
        return Err(CliError::config("`spectrum` needs molecule.eta_l > 0 (spectra scale with eta_l^2)"));
    }
    let grid = cfg.laser_grid()?;
    let vib = space(cfg.numerics.fock_dim)?;
    prov.truncation.insert("fock_dim".into(), vib.dim());

    let mut out = Vec::new();
    for kind in [FcKind::Absorption, FcKind::Emission] {
        let (stem, mut ana, num_values) = match kind {
            FcKind::Absorption => (
                "absorption",
                analytic_absorption_spectrum(&p, &grid)?,
                par_chunked(pool, &grid, |g| Ok(correlator_absorption_spectrum(&p, vib, g)?.values))?,
            ),
            FcKind::Emission => (
                "emission",
                analytic_emission_spectrum(&p, &grid)?,
                par_chunked(pool, &grid, |g| Ok(numeric_emission_spectrum(&p, vib, g)?.values))?,
            ),
        };
        if let Some(m) = ana.m_max {
            prov.truncation.insert(format!("m_max_{stem}"), m);
        }
        note_warnings(prov, stem, &ana);
        let mut num = SpectrumSeries::new(grid.clone(), num_values, format!("numeric {stem}"))?;
        num.fock_dim = Some(vib.dim());
        if normalize {
            ana = ana.peak_normalized();
            num = num.peak_normalized();
        }
        let mut t = Table::new(&["omega", "analytic", "numeric", "abs_diff"]);
        for k in 0..grid.len() {
            let (a, n) = (ana.values[k], num.values[k]);
            t.push(vec![grid[k].into(), a.into(), n.into(), (a - n).abs().into()]);
        }
        let plot = PlotStyle::Overlay { x_label: "frequency".into() };
        out.push(Artifact::new(stem, t, plot).with_payload([&ana, &num])?);
    }
    Ok(out)
}

pub fn population(
    cfg: &RunConfig,
    prov: &mut Provenance,
    pool: &ThreadPool,
    ladder: bool,
) -> Result<Vec<Artifact>, CliError> {
    let p = cfg.molecule.to_params()?;
    let grid = cfg.laser_grid()?;
    let vib = space(cfg.numerics.fock_dim)?;
    prov.truncation.insert("fock_dim".into(), vib.dim());
    prov.truncation.insert("m_max".into(), RateModel::new(&p)?.m_max());

    let rows: Vec<Vec<f64>> = par_chunked(pool, &grid, |g| {
        g.iter()
            .map(|&w| {
                let q = p.with_drive(p.eta_l(), w)?;
                let a = steady_population(&q)?;
                let n = numeric_steady_population(&q, vib)?;
                let mut row = vec![w, a, n, (a - n).abs()];
                if ladder {
                    row.push(Ladder::new(&q)?.steady_state()?.excited_total());
                }
                Ok(row)
            })
            .collect::<Result<_, CliError>>()
    })?;
    let mut cols = vec!["omega_l", "analytic", "numeric", "abs_diff"];
    if ladder {
        cols.push("ladder");
    }
    let mut t = Table::new(&cols);
    for r in rows {
        t.push(r.into_iter().map(Cell::from).collect());
    }
    let mut out = vec![Artifact::new("population", t, PlotStyle::Lines { x_label: LASER.into() })];

    if ladder {
        // relaxation from the ground state at the configured laser frequency
        let l = Ladder::new(&p)?;
        let reduced = l.reduced();
        let t_end = 5.0 / reduced.relaxation_rate();
        let times = linspace(0.0, t_end, 201);
        let traj = l.evolve(&LadderState::ground(l.m_max()), &times, cfg.numerics.ode_tol)?;
        prov.truncation.insert("ladder_m_max".into(), l.m_max());
        let mut t = Table::new(&["t", "ladder", "reduced", "abs_diff"]);
        for (s, &time) in traj.iter().zip(&times) {
            let (a, b) = (s.excited_total(), reduced.at(0.0, time));
            t.push(vec![time.into(), a.into(), b.into(), (a - b).abs().into()]);
        }
        out.push(Artifact::new("ladder_dynamics", t, PlotStyle::Lines { x_label: "time".into() }));
    }
    Ok(out)
}

fn transmission_rows(t: &mut Table, scan: &TransmissionScan, source: &str) {
    for k in 0..scan.omega_l_grid.len() {
        let z = scan.t_complex[k];
        t.push(vec![
            scan.omega_l_grid[k].into(),
            z.re.into(),
            z.im.into(),
            scan.t_power[k].into(),
            source.into(),
        ]);
    }
}

pub fn cavity_scan(
    cfg: &RunConfig,
    prov: &mut Provenance,
    pool: &ThreadPool,
) -> Result<Vec<Artifact>, CliError> {
    let p = cfg.molecule.to_params()?;
    let c = cavity(cfg, "cavity")?;
    let grid = cfg.laser_grid()?;
    let ana = par_chunked(pool, &grid, |g| Ok(vec![transmission_analytic(&p, &c, g)?]))?;
    let ana = merge(ana);
    let mut t = Table::new(&["omega_l", "T_re", "T_im", "T_power", "source"]);
    transmission_rows(&mut t, &ana, "analytic");
    let mut scans = vec![ana];
    if cfg.numerics.cavity_numeric {
        if c.n_molecules == 1 {
            let vib = space(cfg.numerics.vib_dim)?;
            let ph = cfg.numerics.photon_dim;
            prov.truncation.insert("photon_dim".into(), ph);
            prov.truncation.insert("vib_dim".into(), vib.dim());
            let num = par_chunked(pool, &grid, |g| Ok(vec![transmission_numeric(&p, &c, g, ph, vib)?]))?;
            let num = merge(num);
            transmission_rows(&mut t, &num, "numeric");
            scans.push(num);
        } else {
            prov.notes.push("numeric transmission skipped: the master-equation oracle handles one molecule only".into());
        }
    }
    let pol = polaritons(&p, &c)?;
    let mut pt = Table::new(&["quantity", "value"]);
    for (name, v) in [
        ("omega_plus", pol.omega_plus),
        ("omega_minus", pol.omega_minus),
        ("gamma_plus", pol.gamma_plus),
        ("gamma_minus", pol.gamma_minus),
        ("gamma_eff", pol.gamma_eff),
        ("delta_eff", pol.delta_eff),
    ] {
        pt.push(vec![name.into(), v.into()]);
    }
    Ok(vec![
        Artifact::new("transmission", t, PlotStyle::Transmission).with_payload(&scans)?,
        Artifact::new("polaritons", pt, PlotStyle::None).with_payload(pol)?,
    ])
}

fn merge(parts: Vec<TransmissionScan>) -> TransmissionScan {
    let mut it = parts.into_iter();
    let mut all = it.next().expect("grid has at least two points");
    for s in it {
        all.omega_l_grid.extend(s.omega_l_grid);
        all.t_complex.extend(s.t_complex);
        all.t_power.extend(s.t_power);
    }
    all
}

pub fn correlate(cfg: &RunConfig, prov: &mut Provenance) -> Result<Vec<Artifact>, CliError> {
    let p = cfg.molecule.to_params()?;
    let vib = space(cfg.numerics.fock_dim)?;
    prov.truncation.insert("fock_dim".into(), vib.dim());
    let l = molecule_liouvillian(&p, vib)?;
    let rho = steady_state(&l)?;
    let v = MolecularOperators::new(&p, vib)?.relaxation;
    let taus = linspace(0.0, cfg.numerics.tau_max, cfg.numerics.tau_points);
    let num = two_time_correlation(&l, &v, &v.adjoint(), &rho, &taus, cfg.numerics.ode_tol)?;
    let ana = vibrational_correlation(&p, steady_population(&p)?, &taus);
    let mut t = Table::new(&["tau", "analytic_re", "analytic_im", "numeric_re", "numeric_im", "abs_diff"]);
    for k in 0..taus.len() {
        let (a, n) = (ana[k], num.values[k]);
        t.push(vec![
            taus[k].into(),
            a.re.into(),
            a.im.into(),
            n.re.into(),
            n.im.into(),
            (a - n).norm().into(),
        ]);
    }
    Ok(vec![Artifact::new("correlation", t, PlotStyle::Lines { x_label: "delay".into() })])
}

/// Applies one sweep value to a copy of the config.
fn with_value(cfg: &RunConfig, var: &str, v: f64) -> Result<(MoleculeParams, Option<CavityParams>), CliError> {
    let mut m = cfg.molecule.clone();
    let mut c = cfg.cavity.clone();
    let need_cavity = || CliError::usage(format!("sweeping `{var}` needs a `cavity` block"));
    match var {
        "n_molecules" => {
            let n = v.round();
            if (n - v).abs() > 1e-9 || n < 1.0 {
                return Err(CliError::config(format!("sweep value {v} is not a positive molecule count")));
            }
            c.as_mut().ok_or_else(need_cavity)?.n_molecules = n as u32;
        }
        "g" => c.as_mut().ok_or_else(need_cavity)?.g = v,
        "lambda1" => m.lambda1 = v,
        "eta_l" => m.eta_l = v,
        "Gamma" => m.big_gamma = v,
        "gamma" => m.gamma = v,
        other => return Err(CliError::config(format!("unknown sweep variable `{other}`"))),
    }
    let c = c.as_ref().map(|c| c.to_params()).transpose()?;
    Ok((m.to_params()?, c))
}

/// Heatmap over (sweep value, laser frequency): `|T|²` when a cavity block
/// is present, otherwise the analytic excited population.
pub fn sweep(cfg: &RunConfig, prov: &mut Provenance, pool: &ThreadPool) -> Result<Vec<Artifact>, CliError> {
    let axis = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::usage("`sweep` needs a `sweep` block naming the second axis"))?;
    let grid = cfg.laser_grid()?;
    let values = axis.values();
    let var = axis.variable.as_str();
    // fail on a bad value before spending time on the others
    for &v in &values {
        with_value(cfg, var, v)?;
    }
    let rows: Vec<Vec<f64>> = par_chunked(pool, &values, |vs| {
        vs.iter()
            .map(|&v| {
                let (p, c) = with_value(cfg, var, v)?;
                match c {
                    Some(c) => Ok(transmission_analytic(&p, &c, &grid)?.t_power),
                    None => grid
                        .iter()
                        .map(|&w| Ok(steady_population(&p.with_drive(p.eta_l(), w)?)?))
                        .collect(),
                }
            })
            .collect()
    })?;
    let quantity = if cfg.cavity.is_some() { "T_power" } else { "p_e" };
    prov.notes.push(format!("rows: {var}; columns: laser frequency; values: {quantity}"));
    let header: Vec<String> = std::iter::once(var.to_string())
        .chain(grid.iter().map(|w| crate::output::fmt_num(*w)))
        .collect();
    let mut t = Table {
        columns: header,
        rows: Vec::new(),
    };
    for (v, r) in values.iter().zip(rows) {
        t.push(std::iter::once(Cell::from(*v)).chain(r.into_iter().map(Cell::from)).collect());
    }
    let profiles = if var == "n_molecules" {
        vec![25.0, 100.0]
    } else {
        vec![values[values.len() / 4], values[values.len() - 1]]
    };
    let plot = PlotStyle::Heatmap {
        y_label: var.into(),
        profiles,
    };
    Ok(vec![Artifact::new("heatmap", t, plot)])
}
