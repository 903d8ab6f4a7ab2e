mod commands;
mod config;
mod error;
mod figures;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use para_ep::model::LoopDirection;
use para_ep::squeezing::Port;

use commands::Experiment;
use config::{AxisSpec, GridSpec, RunConfig};
use error::CliError;
use output::Emitter;

#[derive(Parser, Debug)]
#[command(name = "para-ep", version, about = "Coupled parametric oscillator simulations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG line plots.
    #[arg(long, global = true)]
    svg: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    g: Option<f64>,
    #[arg(long, global = true)]
    f: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Sets both loss rates.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    phi: Option<f64>,
    #[arg(long, global = true)]
    delta1: Option<f64>,
    #[arg(long, global = true)]
    delta2: Option<f64>,
    /// Sets both saturation coefficients.
    #[arg(long, global = true)]
    gs: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    /// Swept variable: g, f, g=f, f=<m>g, phi, kappa, gamma, delta1, delta2, gs, rho.
    #[arg(long, requires_all = ["lo", "hi"])]
    sweep: Option<String>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long, default_value_t = 101)]
    n: usize,
}

impl SweepArgs {
    fn apply(&self, slot: &mut Option<AxisSpec>) {
        if let (Some(v), Some(lo), Some(hi)) = (&self.sweep, self.lo, self.hi) {
            *slot = Some(AxisSpec::new(v, lo, hi, self.n));
        }
    }
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    sample_dt: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    /// r.m.s. magnitude of the random initial envelopes.
    #[arg(long)]
    seed_amplitude: Option<f64>,
}

impl SimArgs {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.sim.t_end, self.t_end);
        set(&mut c.sim.integrator.sample_dt, self.sample_dt);
        set(&mut c.sim.integrator.rel_tol, self.rel_tol);
        set(&mut c.sim.integrator.abs_tol, self.abs_tol);
        set(&mut c.sim.seed_amplitude, self.seed_amplitude);
    }
}

#[derive(Args, Debug)]
struct EpArgs {
    #[arg(long, value_parser = ["2", "4"])]
    order: Option<String>,
    /// f / g of the searched family.
    #[arg(long)]
    ratio: Option<f64>,
}

impl EpArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(o) = &self.order {
            c.ep.order = if o == "4" { 4 } else { 2 };
            if o == "4" && self.ratio.is_none() && c.ep.ratio == 1.0 {
                c.ep.ratio = 2.0;
            }
        }
        set(&mut c.ep.ratio, self.ratio);
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Direction {
    Ccw,
    Cw,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PortArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sideband-frame eigenvalues at one point or along a sweep.
    Eigen {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Threshold crossings of the largest growth rate.
    Threshold {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Time-domain integration and regime classification.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Start from a = b = 0.
        #[arg(long)]
        zero_init: bool,
    },
    /// Regime map over two axes, or an f = g scan at fixed phase.
    PhaseDiagram {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, requires_all = ["lo2", "hi2"])]
        sweep2: Option<String>,
        #[arg(long)]
        lo2: Option<f64>,
        #[arg(long)]
        hi2: Option<f64>,
        #[arg(long, default_value_t = 11)]
        n2: usize,
        /// Pump phase of a one-dimensional transition scan.
        #[arg(long)]
        scan_phi: Option<f64>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Locate a second- or fourth-order exceptional point.
    EpFind {
        #[command(flatten)]
        ep: EpArgs,
    },
    /// Splitting against detuning offset near an exceptional point.
    EpScaling {
        #[command(flatten)]
        ep: EpArgs,
    },
    /// Floquet exponents of an amplitude-modulated pump.
    Floquet {
        /// Modulation depths, comma separated; several run the F-EP sweep.
        #[arg(long, value_delimiter = ',')]
        depth: Vec<f64>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        g0_lo: Option<f64>,
        #[arg(long)]
        g0_hi: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Slow loop around the exceptional point.
    Encircle {
        #[arg(long)]
        g0: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, value_enum)]
        direction: Option<Direction>,
        #[arg(long)]
        start_mode: Option<usize>,
    },
    /// Analytic output quadrature noise spectra.
    Squeeze {
        #[arg(long, value_enum)]
        port: Option<PortArg>,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long)]
        n_omega: Option<usize>,
        /// Angle-resolved table with this many quadrature angles.
        #[arg(long)]
        thetas: Option<usize>,
    },
    /// Langevin Monte Carlo estimate of the output spectra.
    McSqueeze {
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long)]
        segment_steps: Option<usize>,
    },
    /// Regenerate the data of a figure preset.
    Figure {
        #[arg(value_parser = figures::FIGURES)]
        id: String,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_common(c: &mut RunConfig, a: &Common) {
    let p = &mut c.params;
    set(&mut p.g, a.g);
    set(&mut p.f, a.f);
    set(&mut p.kappa, a.kappa);
    set(&mut p.phi, a.phi);
    set(&mut p.delta1, a.delta1);
    set(&mut p.delta2, a.delta2);
    set(&mut p.rho, a.rho);
    if let Some(g) = a.gamma {
        p.gamma1 = g;
        p.gamma2 = g;
    }
    if let Some(g) = a.gs {
        p.gs1 = g;
        p.gs2 = g;
    }
    set(&mut c.seed, a.seed);
}

fn apply_command(c: &mut RunConfig, cmd: &Command) -> Experiment {
    match cmd {
        Command::Eigen { sweep } => {
            sweep.apply(&mut c.sweep);
            Experiment::Eigen
        }
        Command::Threshold { sweep, tolerance } => {
            sweep.apply(&mut c.sweep);
            set(&mut c.threshold_tolerance, *tolerance);
            Experiment::Threshold
        }
        Command::Simulate { sim, zero_init } => {
            sim.apply(c);
            if *zero_init {
                c.zero_init = true;
                c.sim.seed_amplitude = 0.0;
            }
            Experiment::Simulate
        }
        Command::PhaseDiagram {
            sweep,
            sweep2,
            lo2,
            hi2,
            n2,
            scan_phi,
            sim,
        } => {
            sweep.apply(&mut c.sweep);
            if let (Some(v), Some(lo), Some(hi)) = (sweep2, lo2, hi2) {
                c.sweep2 = Some(AxisSpec::new(v, *lo, *hi, *n2));
            }
            if scan_phi.is_some() {
                c.scan_phi = *scan_phi;
            }
            sim.apply(c);
            Experiment::PhaseDiagram
        }
        Command::EpFind { ep } => {
            ep.apply(c);
            Experiment::EpFind
        }
        Command::EpScaling { ep } => {
            ep.apply(c);
            Experiment::EpScaling
        }
        Command::Floquet {
            depth,
            omega,
            g0_lo,
            g0_hi,
            n,
        } => {
            if !depth.is_empty() {
                c.floquet.depths = depth.clone();
            }
            set(&mut c.floquet.omega, *omega);
            let g = &mut c.floquet.g0;
            *g = GridSpec {
                lo: g0_lo.unwrap_or(g.lo),
                hi: g0_hi.unwrap_or(g.hi),
                n: n.unwrap_or(g.n),
            };
            Experiment::Floquet
        }
        Command::Encircle {
            g0,
            radius,
            omega,
            direction,
            start_mode,
        } => {
            let e = &mut c.encircle;
            set(&mut e.g0, *g0);
            set(&mut e.radius, *radius);
            set(&mut e.omega, *omega);
            set(&mut e.start_mode, *start_mode);
            if let Some(d) = direction {
                e.directions = match d {
                    Direction::Ccw => vec![LoopDirection::Ccw],
                    Direction::Cw => vec![LoopDirection::Cw],
                    Direction::Both => vec![LoopDirection::Ccw, LoopDirection::Cw],
                };
            }
            Experiment::Encircle
        }
        Command::Squeeze {
            port,
            omega_max,
            n_omega,
            thetas,
        } => {
            let s = &mut c.squeeze;
            if let Some(p) = port {
                s.port = match p {
                    PortArg::One => Port::One,
                    PortArg::Two => Port::Two,
                };
            }
            set(&mut s.omega.hi, *omega_max);
            set(&mut s.omega.n, *n_omega);
            set(&mut s.thetas, *thetas);
            Experiment::Squeeze
        }
        Command::McSqueeze {
            ensemble,
            dt,
            segments,
            segment_steps,
        } => {
            let m = &mut c.monte_carlo;
            set(&mut m.ensemble, *ensemble);
            set(&mut m.dt, *dt);
            set(&mut m.segments, *segments);
            set(&mut m.segment_steps, *segment_steps);
            Experiment::McSqueeze
        }
        Command::Figure { .. } => unreachable!("figure presets are handled separately"),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("PARA_EP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("PARA_EP_THREADS must be a positive integer, got `{v}`")))?;
    // a second initialization in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(experiment: Experiment, mut cfg: RunConfig, dir: &Path, svg: bool, prefix: &str) -> Result<(), CliError> {
    cfg.experiment = experiment.name().to_string();
    cfg.normalize()?;
    let mut out = Emitter::new(dir, svg, prefix, &cfg)?;
    let r = experiment.run(&cfg, &mut out);
    for p in out.written() {
        println!("wrote {}", p.display());
    }
    r
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let base = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let dir = cli
        .common
        .out
        .clone()
        .or_else(|| base.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Command::Figure { id } = &cli.command {
        for r in figures::preset(id)? {
            let prefix = if r.tag.is_empty() { format!("fig{id}") } else { format!("fig{id}_{}", r.tag) };
            execute(r.experiment, r.config, &dir, cli.common.svg, &prefix)?;
        }
        return Ok(());
    }
    let mut cfg = base;
    apply_common(&mut cfg, &cli.common);
    let experiment = apply_command(&mut cfg, &cli.command);
    execute(experiment, cfg, &dir, cli.common.svg, "")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("para-ep: {e}");
            e.exit_code()
        }
    }
}
