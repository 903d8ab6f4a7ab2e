//! Experiment commands. Each reads a normalized [`RunConfig`] and writes
//! its tables through an [`Emitter`].

use std::f64::consts::PI;

use para_ep::dynamics::{self, classify_regime, phase_diagram, random_initial_state, transition_scan, DynamicsError, RegimeLabel, Trajectory};
use para_ep::ep::{default_offsets, find_ep2, find_ep4, nilpotency_index, EpLocation, NILPOTENCY_TOL};
use para_ep::floquet::{encircle, fep_sweep, find_fep, modulated_exponents};
use para_ep::model::{matrix_field_basis, FieldState, SweepVariable, SystemParams};
use para_ep::spectral::{eigenvalues, find_threshold, to_sideband_frame};
use para_ep::squeezing::{langevin_mc, optimal_quadrature, output_psd, quadrature_noise, squeezing_spectrum};
use para_ep::C64;
use rayon::prelude::*;

use crate::config::{AxisSpec, RunConfig};
use crate::error::{numerical, CliError};
use crate::output::{num, Emitter, Plot, Series, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Eigen,
    Threshold,
    Simulate,
    PhaseDiagram,
    EpFind,
    EpScaling,
    Floquet,
    Encircle,
    Squeeze,
    McSqueeze,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Eigen => "eigen",
            Experiment::Threshold => "threshold",
            Experiment::Simulate => "simulate",
            Experiment::PhaseDiagram => "phase-diagram",
            Experiment::EpFind => "ep-find",
            Experiment::EpScaling => "ep-scaling",
            Experiment::Floquet => "floquet",
            Experiment::Encircle => "encircle",
            Experiment::Squeeze => "squeeze",
            Experiment::McSqueeze => "mc-squeeze",
        }
    }

    pub fn run(self, cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
        match self {
            Experiment::Eigen => eigen(cfg, out),
            Experiment::Threshold => threshold(cfg, out),
            Experiment::Simulate => simulate(cfg, out),
            Experiment::PhaseDiagram => phase(cfg, out),
            Experiment::EpFind => ep_find(cfg, out),
            Experiment::EpScaling => ep_scaling(cfg, out),
            Experiment::Floquet => floquet(cfg, out),
            Experiment::Encircle => encircle_cmd(cfg, out),
            Experiment::Squeeze => squeeze(cfg, out),
            Experiment::McSqueeze => mc_squeeze(cfg, out),
        }
    }
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn sweep_or(cfg: &RunConfig, default: AxisSpec) -> AxisSpec {
    cfg.sweep.clone().unwrap_or(default)
}

fn thin<T: Copy>(v: &[T], max: usize) -> Vec<T> {
    let step = v.len().div_ceil(max.max(1)).max(1);
    v.iter().step_by(step).copied().collect()
}

pub const EIGEN_COLUMNS: [&str; 15] = [
    "g", "f", "kappa", "gamma", "phi", "delta1", "delta2", "re_lambda_1", "re_lambda_2", "re_lambda_3", "re_lambda_4", "im_lambda_1", "im_lambda_2",
    "im_lambda_3", "im_lambda_4",
];

/// Column of the eigen table that carries the swept value.
fn eigen_x_column(v: &SweepVariable) -> usize {
    match v {
        SweepVariable::F => 1,
        SweepVariable::Kappa => 2,
        SweepVariable::Gamma => 3,
        SweepVariable::Phi => 4,
        SweepVariable::Delta1 => 5,
        SweepVariable::Delta2 => 6,
        _ => 0,
    }
}

/// Sideband-frame spectrum `M = iL`, sorted by real then imaginary part.
pub fn sideband_spectrum(p: &SystemParams) -> Result<[C64; 4], CliError> {
    let l = matrix_field_basis(p).map_err(|e| CliError::Usage(e.to_string()))?;
    eigenvalues(&to_sideband_frame(&l)).map_err(numerical)
}

fn eigen(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let (var, xs) = match &cfg.sweep {
        Some(s) => (Some(s.variable()?), s.values()),
        None => (None, vec![f64::NAN]),
    };
    let points: Vec<SystemParams> = xs.iter().map(|&x| var.map_or(cfg.params, |v| v.apply(&cfg.params, x))).collect();
    let spectra = points.par_iter().map(sideband_spectrum).collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("eigen", &EIGEN_COLUMNS);
    for (p, ev) in points.iter().zip(&spectra) {
        let mut row = vec![num(p.g), num(p.f), num(p.kappa), num(p.symmetric_gamma().unwrap_or(p.gamma1)), num(p.phi), num(p.delta1), num(p.delta2)];
        row.extend(ev.iter().map(|z| num(z.re)));
        row.extend(ev.iter().map(|z| num(z.im)));
        t.push(row);
    }
    out.csv(&t)?;
    if let Some(v) = var {
        let x = eigen_x_column(&v);
        out.plot("eigen_re", &Plot::from_table(&t, "Re λ", x, &[7, 8, 9, 10]))?;
        out.plot("eigen_im", &Plot::from_table(&t, "Im λ", x, &[11, 12, 13, 14]))?;
    } else {
        let list: Vec<String> = spectra[0].iter().map(|z| format!("{z}")).collect();
        println!("eigenvalues: {}", list.join(", "));
    }
    Ok(())
}

fn threshold(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let s = sweep_or(cfg, AxisSpec::new("g=f", 0.0, 3.0, 2));
    let report = find_threshold(&cfg.params, s.variable()?, (s.lo, s.hi), cfg.threshold_tolerance).map_err(numerical)?;
    let mut t = Table::new("threshold", &["variable", "value", "kind"]);
    for c in &report.crossings {
        t.push(vec![s.variable.clone(), num(c.value), c.kind.name().to_string()]);
    }
    out.csv(&t)?;
    match report.first_rising() {
        Some(v) => println!("threshold {} = {v}", s.variable),
        None => println!("no threshold crossing of {} in [{}, {}]", s.variable, s.lo, s.hi),
    }
    Ok(())
}

fn trajectory_table(tr: &Trajectory) -> Table {
    let mut t = Table::new("trajectory", &["t", "re_a", "im_a", "re_b", "im_b", "intensity_a", "intensity_b"]);
    for k in 0..tr.len() {
        let s = tr.physical(k);
        t.push(vec![num(tr.times[k]), num(s.a.re), num(s.a.im), num(s.b.re), num(s.b.im), num(s.intensity_a()), num(s.intensity_b())]);
    }
    t
}

pub const REGIME_COLUMNS: [&str; 7] = ["regime", "code", "sideband_offset", "intensity_a", "intensity_b", "dc_margin_db", "marginal"];

fn regime_cells(l: &RegimeLabel) -> Vec<String> {
    vec![
        l.regime.name().to_string(),
        l.regime.code().to_string(),
        num(l.sideband_offset),
        num(l.intensities[0]),
        num(l.intensities[1]),
        num(l.dc_margin_db),
        flag(l.marginal),
    ]
}

fn outcome_cells(o: &Result<RegimeLabel, String>) -> Vec<String> {
    match o {
        Ok(l) => {
            let mut v = regime_cells(l);
            v.push(String::new());
            v
        }
        Err(e) => {
            let mut v = vec!["failed".to_string()];
            v.extend(std::iter::repeat_n("NaN".to_string(), REGIME_COLUMNS.len() - 1));
            v.push(e.replace(',', ";"));
            v
        }
    }
}

fn simulate(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let s0 = if cfg.zero_init {
        FieldState::zero()
    } else {
        random_initial_state(cfg.seed, cfg.sim.seed_amplitude)
    };
    let tr = match dynamics::integrate(&cfg.params, &cfg.drive, s0, (0.0, cfg.sim.t_end), &cfg.sim.integrator) {
        Ok(tr) => tr,
        Err(DynamicsError::Integration { error, partial }) => {
            out.csv(&trajectory_table(&partial))?;
            return Err(CliError::Numerical(format!("integration stopped at t = {}: {error}", partial.times.last().copied().unwrap_or(0.0))));
        }
        Err(DynamicsError::Model(e)) => return Err(CliError::Usage(e.to_string())),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let t = trajectory_table(&tr);
    out.csv(&t)?;
    if out.svg_enabled() {
        let rows: Vec<usize> = thin(&(0..t.rows.len()).collect::<Vec<_>>(), 3000);
        let pick = |k: usize| rows.iter().map(|&r| (t.rows[r][0].parse().unwrap_or(f64::NAN), t.rows[r][k].parse().unwrap_or(f64::NAN))).collect();
        let plot = Plot {
            title: "intensities".into(),
            x_label: "t".into(),
            y_label: "|a|², |b|²".into(),
            series: vec![
                Series {
                    label: "intensity_a".into(),
                    points: pick(5),
                },
                Series {
                    label: "intensity_b".into(),
                    points: pick(6),
                },
            ],
        };
        out.plot("trajectory", &plot)?;
    }
    match classify_regime(&tr, cfg.sim.settle_fraction, cfg.sim.peak_threshold_db) {
        Ok(l) => {
            let mut r = Table::new("regime", &REGIME_COLUMNS);
            r.push(regime_cells(&l));
            out.csv(&r)?;
            println!("regime: {} (sideband offset {}, margin {} dB)", l.regime.name(), l.sideband_offset, l.dc_margin_db);
        }
        Err(e) => println!("regime not classified: {e}"),
    }
    Ok(())
}

fn phase(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    if let Some(phi) = cfg.scan_phi {
        let s = sweep_or(cfg, AxisSpec::new("g=f", 0.3, 4.0, 40));
        let pts = transition_scan(&cfg.params, phi, (s.lo, s.hi), s.n, &cfg.sim).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut cols = vec!["g"];
        cols.extend(REGIME_COLUMNS);
        cols.extend(["linear_splitting", "error"]);
        let mut t = Table::new("transition", &cols);
        for p in &pts {
            let mut row = vec![num(p.g)];
            let mut cells = outcome_cells(&p.outcome);
            let err = cells.pop().unwrap_or_default();
            row.extend(cells);
            row.push(num(p.linear_splitting));
            row.push(err);
            t.push(row);
        }
        out.csv(&t)?;
        out.plot("transition", &Plot::from_table(&t, "sideband offset", 0, &[3, 8]))?;
        let failed = pts.iter().filter(|p| p.outcome.is_err()).count();
        println!("{} scan points, {failed} failed", pts.len());
        return Ok(());
    }
    let a1 = sweep_or(cfg, AxisSpec::new("g=f", 0.2, 3.0, 15)).axis()?;
    let a2 = cfg.sweep2.clone().unwrap_or(AxisSpec::new("phi", 0.0, PI, 7)).axis()?;
    let d = phase_diagram(&cfg.params, a1, a2, &cfg.sim).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut cols = vec!["axis1", "axis2"];
    cols.extend(REGIME_COLUMNS);
    cols.push("error");
    let mut t = Table::new("phase_diagram", &cols);
    for c in &d.cells {
        let mut row = vec![num(c.x1), num(c.x2)];
        row.extend(outcome_cells(&c.outcome));
        t.push(row);
    }
    out.csv(&t)?;
    let failed = d.cells.iter().filter(|c| c.outcome.is_err()).count();
    println!("{} cells ({} x {}), {failed} failed", d.cells.len(), d.axis1.n, d.axis2.n);
    Ok(())
}

fn locate_ep(cfg: &RunConfig) -> Result<EpLocation, CliError> {
    let p = &cfg.params;
    let gamma = p.symmetric_gamma().map_err(|e| CliError::Usage(e.to_string()))?;
    let r = if cfg.ep.order == 2 {
        find_ep2(p.kappa, gamma)
    } else {
        find_ep4(cfg.ep.ratio, p.kappa, gamma, p.phi, &cfg.ep.search)
    };
    r.map_err(numerical)
}

const EP_COLUMNS: [&str; 14] = [
    "order",
    "g",
    "f",
    "delta1",
    "ratio",
    "kappa",
    "gamma",
    "phi",
    "spread",
    "gram_condition",
    "cluster_size",
    "re_center",
    "im_center",
    "nilpotency_order",
];

fn ep_find(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let loc = locate_ep(cfg)?;
    let nil = nilpotency_index(&loc.generator(), NILPOTENCY_TOL).map_or("NaN".to_string(), |k| k.to_string());
    let m = &loc.metrics;
    let mut t = Table::new("ep", &EP_COLUMNS);
    t.push(vec![
        cfg.ep.order.to_string(),
        num(loc.g),
        num(loc.ratio * loc.g),
        num(loc.delta1),
        num(loc.ratio),
        num(loc.kappa),
        num(loc.gamma),
        num(loc.phi),
        num(m.spread),
        num(m.gram_condition),
        m.cluster_size.to_string(),
        num(m.center.re),
        num(m.center.im),
        nil,
    ]);
    out.csv(&t)?;
    println!("order-{} point at g = {}, delta1 = {} (spread {:e})", cfg.ep.order, loc.g, loc.delta1, m.spread);
    Ok(())
}

fn ep_scaling(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let loc = locate_ep(cfg)?;
    let offsets = cfg.ep.offsets.clone().unwrap_or_else(default_offsets);
    let fit = loc.scaling(&offsets).map_err(numerical)?;
    let mut t = Table::new("ep_scaling", &["delta", "splitting", "ln_delta", "ln_splitting"]);
    for &(d, s) in &fit.points {
        t.push(vec![num(d), num(s), num(d.ln()), num(s.ln())]);
    }
    out.csv(&t)?;
    let mut s = Table::new("ep_scaling_summary", &["order", "slope", "intercept", "r_squared", "points"]);
    s.push(vec![cfg.ep.order.to_string(), num(fit.slope), num(fit.intercept), num(fit.r_squared), fit.points.len().to_string()]);
    out.csv(&s)?;
    out.plot("ep_scaling", &Plot::from_table(&t, "ln splitting vs ln δΔ", 2, &[3]))?;
    println!("order {}: slope {} (R² {}, {} points)", cfg.ep.order, fit.slope, fit.r_squared, fit.points.len());
    Ok(())
}

fn floquet(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let fc = &cfg.floquet;
    let g0s = fc.g0.values();
    if fc.depths.is_empty() {
        return Err(CliError::Usage("floquet needs at least one depth".into()));
    }
    if fc.depths.len() > 1 {
        let sweep = fep_sweep(&cfg.params, &fc.depths, &g0s, fc.omega).map_err(numerical)?;
        let mut t = Table::new("floquet_grid", &["depth", "g0", "gain", "splitting", "below_threshold", "error"]);
        for c in &sweep.cells {
            t.push(vec![num(c.depth), num(c.g0), num(c.gain), num(c.splitting), flag(c.below_threshold), c.error.clone().unwrap_or_default().replace(',', ";")]);
        }
        out.csv(&t)?;
        let mut l = Table::new("floquet_locus", &["depth", "g0_fep"]);
        for &(d, g) in &sweep.locus {
            l.push(vec![num(d), num(g.unwrap_or(f64::NAN))]);
        }
        out.csv(&l)?;
        out.plot("floquet_locus", &Plot::from_table(&l, "F-EP locus", 0, &[1]))?;
        for &(d, g) in &sweep.locus {
            println!("F = {d}: F-EP at g0 = {}", g.map_or("none".to_string(), |g| g.to_string()));
        }
        return Ok(());
    }
    let depth = fc.depths[0];
    let rows: Vec<Result<_, _>> = g0s.par_iter().map(|&g0| modulated_exponents(&cfg.params, g0, depth, fc.omega)).collect();
    let mut cols: Vec<String> = vec!["g0".into(), "depth".into(), "omega".into()];
    cols.extend((1..=4).map(|k| format!("re_mu_{k}")));
    cols.extend((1..=4).map(|k| format!("im_mu_{k}")));
    cols.extend(["re_splitting".into(), "liouville_residual".into()]);
    let mut t = Table::with_columns("floquet", cols);
    for (g0, r) in g0s.iter().zip(rows) {
        let r = r.map_err(numerical)?;
        let mut row = vec![num(*g0), num(depth), num(fc.omega)];
        row.extend(r.exponents.iter().map(|z| num(z.re)));
        row.extend(r.exponents.iter().map(|z| num(z.im)));
        row.push(num(r.re_splitting()));
        row.push(num(r.liouville_residual));
        t.push(row);
    }
    out.csv(&t)?;
    out.plot("floquet", &Plot::from_table(&t, "Re μ", 0, &[3, 4, 5, 6]))?;
    let fep = find_fep(&cfg.params, depth, fc.omega, (fc.g0.lo, fc.g0.hi), fc.g0.n.max(2)).map_err(numerical)?;
    println!("F = {depth}: F-EP at g0 = {}", fep.map_or("none".to_string(), |g| g.to_string()));
    Ok(())
}

fn encircle_cmd(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let e = &cfg.encircle;
    if e.directions.is_empty() {
        return Err(CliError::Usage("encircle needs at least one direction".into()));
    }
    let results = e
        .directions
        .iter()
        .map(|&d| encircle(&cfg.params, e.g0, e.radius, e.omega, d, e.start_mode, &e.options).map_err(numerical))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "encircle",
        &["direction", "t", "angle", "g", "delta1", "w_0", "w_1", "w_2", "w_3", "re_rayleigh", "im_rayleigh"],
    );
    let mut s = Table::new("encircle_summary", &["direction", "start_mode", "final_mode", "returns"]);
    for r in &results {
        for smp in &r.samples {
            let mut row = vec![r.direction.name().to_string(), num(smp.t), num(smp.angle), num(smp.g), num(smp.delta1)];
            row.extend((0..4).map(|k| num(smp.weights.get(k).copied().unwrap_or(f64::NAN))));
            row.push(num(smp.rayleigh.re));
            row.push(num(smp.rayleigh.im));
            t.push(row);
        }
        s.push(vec![r.direction.name().to_string(), r.start_mode.to_string(), r.final_mode.to_string(), flag(r.returns())]);
        println!("{}: mode {} -> {}", r.direction.name(), r.start_mode, r.final_mode);
    }
    out.csv(&t)?;
    out.csv(&s)?;
    if out.svg_enabled() {
        for r in &results {
            let series = (0..r.samples.first().map_or(0, |x| x.weights.len()))
                .map(|k| Series {
                    label: format!("w_{k}"),
                    points: r.samples.iter().map(|x| (x.t, x.weights[k])).collect(),
                })
                .collect();
            let plot = Plot {
                title: format!("{} mode weights", r.direction.name()),
                x_label: "t".into(),
                y_label: "weight".into(),
                series,
            };
            out.plot(&format!("encircle_{}", r.direction.name()), &plot)?;
        }
    }
    Ok(())
}

const SQUEEZE_COLUMNS: [&str; 7] = ["omega", "s_x", "s_y", "theta_opt", "s_min", "s_max", "s_min_db"];

fn squeeze_rows(p: &SystemParams, cfg: &RunConfig) -> Result<Vec<Vec<String>>, CliError> {
    let port = cfg.squeeze.port;
    cfg.squeeze
        .omega
        .values()
        .par_iter()
        .map(|&w| {
            let s = output_psd(p, w).map_err(numerical)?;
            let o = optimal_quadrature(p, port, w).map_err(numerical)?;
            Ok(vec![
                num(w),
                num(quadrature_noise(&s, port, 0.0)),
                num(quadrature_noise(&s, port, PI / 2.0)),
                num(o.theta),
                num(o.s_min),
                num(o.s_max),
                num(10.0 * o.s_min.log10()),
            ])
        })
        .collect()
}

fn squeeze(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let mut t = Table::new("squeeze", &SQUEEZE_COLUMNS);
    for row in squeeze_rows(&cfg.params, cfg)? {
        t.push(row);
    }
    out.csv(&t)?;
    out.plot("squeeze", &Plot::from_table(&t, "quadrature noise", 0, &[1, 2, 4]))?;
    if cfg.squeeze.thetas > 0 {
        let n = cfg.squeeze.thetas;
        let thetas: Vec<f64> = (0..n).map(|k| PI * k as f64 / n as f64).collect();
        let sp = squeezing_spectrum(&cfg.params, cfg.squeeze.port, &thetas, &cfg.squeeze.omega.values()).map_err(numerical)?;
        let mut a = Table::new("squeeze_theta", &["omega", "theta", "noise"]);
        for (i, w) in sp.omegas.iter().enumerate() {
            for (j, th) in sp.thetas.iter().enumerate() {
                a.push(vec![num(*w), num(*th), num(sp.noise[i][j])]);
            }
        }
        out.csv(&a)?;
    }
    let min = t.column(4).into_iter().fold(f64::INFINITY, f64::min);
    println!("port {}: min noise {min}", cfg.squeeze.port.number());
    Ok(())
}

fn mc_squeeze(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let mc = langevin_mc(&cfg.params, cfg.seed, &cfg.monte_carlo).map_err(numerical)?;
    let names = ["x1", "y1", "x2", "y2"];
    let mut cols: Vec<String> = vec!["omega".into()];
    cols.extend(names.iter().map(|n| format!("mc_{n}")));
    cols.extend(names.iter().map(|n| format!("an_{n}")));
    let mut t = Table::with_columns("mc_squeeze", cols);
    let mut sq = [0.0; 4];
    let mut bins = 0usize;
    for (w, d) in mc.omegas.iter().zip(&mc.diagonal) {
        let s = output_psd(&cfg.params, *w).map_err(numerical)?;
        let mut row = vec![num(*w)];
        row.extend(d.iter().map(|&x| num(x)));
        row.extend((0..4).map(|k| num(s[(k, k)])));
        t.push(row);
        if *w > 0.0 {
            bins += 1;
            for k in 0..4 {
                sq[k] += ((d[k] - s[(k, k)]) / s[(k, k)]).powi(2);
            }
        }
    }
    out.csv(&t)?;
    let mut s = Table::new("mc_squeeze_summary", &["quadrature", "rms_rel_error", "bins"]);
    for k in 0..4 {
        let rms = (sq[k] / bins.max(1) as f64).sqrt();
        s.push(vec![names[k].to_string(), num(rms), bins.to_string()]);
    }
    out.csv(&s)?;
    out.plot("mc_squeeze", &Plot::from_table(&t, "Monte Carlo vs analytic", 0, &[1, 2, 5, 6]))?;
    println!("rms relative error x1 {}, y1 {}", s.rows[0][1], s.rows[1][1]);
    Ok(())
}
