//! Figure presets: fixed configurations plus the experiments that produce
//! each figure's data.

use std::f64::consts::PI;

use para_ep::model::{LoopDirection, SystemParams};

use crate::commands::Experiment;
use crate::config::{AxisSpec, GridSpec, RunConfig};
use crate::error::CliError;

pub const FIGURES: [&str; 14] = ["2a", "2b", "3a", "3c", "4a", "4b", "4c", "4d", "5a", "5b", "5c", "5d", "6a", "6b"];

/// One experiment of a preset; `tag` distinguishes runs that share an
/// experiment name.
pub struct Run {
    pub tag: String,
    pub experiment: Experiment,
    pub config: RunConfig,
}

fn run(tag: &str, experiment: Experiment, mut config: RunConfig) -> Run {
    config.experiment = experiment.name().to_string();
    Run {
        tag: tag.to_string(),
        experiment,
        config,
    }
}

fn with_params(p: SystemParams) -> RunConfig {
    RunConfig {
        params: p,
        ..RunConfig::default()
    }
}

/// `f = 0.4`, `κ = 1`, `γ = 0.25`, `g_s = 0.3`.
fn regime_nd_family(g: f64) -> SystemParams {
    SystemParams::symmetric(0.25, 1.0, g, 0.4, 0.0).with_saturation(0.3)
}

fn squeeze_point(kappa: f64, g: f64) -> RunConfig {
    let mut c = with_params(SystemParams::symmetric(0.1, kappa, g, g, 0.0).with_rho(0.9));
    c.squeeze.omega = GridSpec { lo: 0.0, hi: 3.0, n: 301 };
    c
}

fn gain_tag(name: &str, x: f64) -> String {
    format!("{name}{x:.2}")
}

pub fn preset(id: &str) -> Result<Vec<Run>, CliError> {
    let base = SystemParams::symmetric(0.25, 1.0, 1.0, 1.0, 0.0);
    let runs = match id {
        "2a" => {
            let mut e = with_params(regime_nd_family(0.0));
            e.sweep = Some(AxisSpec::new("g", 0.0, 2.0, 201));
            let mut t = e.clone();
            t.sweep = Some(AxisSpec::new("g", 0.0, 3.0, 2));
            vec![run("", Experiment::Eigen, e), run("", Experiment::Threshold, t)]
        }
        "2b" => {
            let nd = with_params(regime_nd_family(1.5));
            let d = with_params(SystemParams::symmetric(0.75, 1.0, 1.0, 1.5, 0.0).with_saturation(0.3));
            vec![run("nd", Experiment::Simulate, nd), run("d", Experiment::Simulate, d)]
        }
        "3a" => {
            let mut c = with_params(base.with_saturation(0.3));
            c.sweep = Some(AxisSpec::new("g=f", 0.1, 3.0, 24));
            c.sweep2 = Some(AxisSpec::new("phi", 0.0, 2.0 * PI, 17));
            vec![run("", Experiment::PhaseDiagram, c)]
        }
        "3c" => {
            let mut c = with_params(base.with_saturation(0.3));
            c.scan_phi = Some(PI);
            c.sweep = Some(AxisSpec::new("g=f", 0.3, 4.0, 40));
            let mut control = c.clone();
            control.params = base;
            control.sim.integrator.renormalize = true;
            vec![run("", Experiment::PhaseDiagram, c), run("control", Experiment::PhaseDiagram, control)]
        }
        "4a" => {
            let mut e = with_params(base);
            e.sweep = Some(AxisSpec::new("g=f", 0.0, 2.0, 201));
            vec![run("", Experiment::Eigen, e), run("", Experiment::EpFind, with_params(base))]
        }
        "4b" => vec![run("", Experiment::EpScaling, with_params(base))],
        "4c" => {
            let mut e = with_params(SystemParams::symmetric(0.25, 1.0, 1.0, 2.0, 0.0).with_detuning(0.1501, 0.0));
            e.sweep = Some(AxisSpec::new("f=2g", 0.0, 1.5, 301));
            let mut f = with_params(base);
            f.ep.order = 4;
            f.ep.ratio = 2.0;
            vec![run("", Experiment::Eigen, e), run("", Experiment::EpFind, f)]
        }
        "4d" => {
            let mut c = with_params(base);
            c.ep.order = 4;
            c.ep.ratio = 2.0;
            vec![run("", Experiment::EpScaling, c)]
        }
        "5a" => {
            let mut c = with_params(base);
            c.floquet.depths = vec![5.0];
            c.floquet.omega = 10.0;
            c.floquet.g0 = GridSpec { lo: 0.5, hi: 2.0, n: 151 };
            let mut s = with_params(base);
            s.sweep = Some(AxisSpec::new("g=f", 0.5, 2.0, 151));
            vec![run("", Experiment::Floquet, c), run("static", Experiment::Eigen, s)]
        }
        "5b" => {
            let mut c = with_params(base);
            c.floquet.depths = (0..=10).map(|k| 0.5 * k as f64).collect();
            c.floquet.omega = 10.0;
            c.floquet.g0 = GridSpec { lo: 0.5, hi: 2.0, n: 61 };
            vec![run("", Experiment::Floquet, c)]
        }
        "5c" | "5d" => {
            let mut c = with_params(base);
            c.encircle.directions = vec![if id == "5c" { LoopDirection::Ccw } else { LoopDirection::Cw }];
            vec![run("", Experiment::Encircle, c)]
        }
        "6a" => [0.5, 0.7, 0.9, 0.95, 0.99]
            .iter()
            .map(|&g| run(&gain_tag("g", g), Experiment::Squeeze, squeeze_point(1.0, g)))
            .collect(),
        "6b" => {
            let mut v: Vec<Run> = [0.5, 1.0, 1.5, 2.0]
                .iter()
                .map(|&k| run(&gain_tag("kappa", k), Experiment::Squeeze, squeeze_point(k, 0.5 * k)))
                .collect();
            v.push(run("conjugate", Experiment::Squeeze, squeeze_point(1.0, 0.9)));
            v
        }
        other => return Err(CliError::Usage(format!("unknown figure `{other}` (expected one of {})", FIGURES.join(", ")))),
    };
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_normalizes() {
        for id in FIGURES {
            for mut r in preset(id).unwrap() {
                r.config.normalize().unwrap_or_else(|e| panic!("figure {id}: {e}"));
            }
        }
    }

    #[test]
    fn unknown_figure() {
        assert!(matches!(preset("9z"), Err(CliError::Usage(_))));
    }
}
