use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use surface_hydro::current::{FitError, SigmaCurve};
use surface_hydro::diagnostics::{GibbsVerdict, LocalGibbsConfig};
use surface_hydro::harness::{
    emit_figure_data, pipeline_diagnose_le, pipeline_gibbs, pipeline_sigma, pipeline_simulate,
    pipeline_verify_pde, ExperimentConfig, FigureId, HarnessError, LeSettings, Preset, Scale,
    VerifySettings,
};
use surface_hydro::kmc::ProfileShape;
use surface_hydro::pde::{
    save_snapshots, solve_h_pde, write_trajectory_csv, CurrentLaw, FieldKind, PdeField,
    SolverConfig,
};

/// Metropolis crystal surface: simulation, diagnostics, current fitting and PDE solving.
///
/// Verdict commands exit with 0 when the check passes, 1 when it fails and 2
/// on errors.
#[derive(Parser)]
#[command(name = "surface-hydro", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a KMC ensemble and write per-site and windowed statistics.
    Simulate(RunArgs),
    /// Rough local-equilibrium diagnostics over several lattice sizes.
    DiagnoseLe(LevelArgs),
    /// Local-Gibbs falsification test.
    GibbsTest(RunArgs),
    /// Fit the current correction sigma from simulation.
    FitSigma(FitArgs),
    /// Solve the height PDE from a named initial profile.
    SolvePde(SolveArgs),
    /// Compare simulated height increments with the corrected and uncorrected PDEs.
    VerifyPde(VerifyArgs),
    /// Emit figure data (CSV, optionally SVG) from finished runs.
    EmitFigures(FigureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (gibbs-test, rough-le, sigma, sigma-weak, verify-exp, verify-sin).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags mirroring configuration keys.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "n-samples")]
    n_samples: Option<usize>,
    #[arg(long = "master-seed")]
    master_seed: Option<u64>,
    /// Comma-separated macroscopic times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long = "delta-grid", value_delimiter = ',')]
    delta_grid: Option<Vec<f64>>,
    #[arg(long = "epsilon-grid", value_delimiter = ',')]
    epsilon_grid: Option<Vec<f64>>,
}

impl Overrides {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(k) = self.k {
            c.model.k = k;
        }
        if let Some(n) = self.n {
            c.model.n = n;
        }
        if let Some(m) = self.n_samples {
            c.n_samples = m;
        }
        if let Some(s) = self.master_seed {
            c.master_seed = s;
        }
        if let Some(t) = &self.times {
            c.times = t.clone();
        }
        if let Some(d) = &self.delta_grid {
            c.delta_grid = d.clone();
        }
        if let Some(e) = &self.epsilon_grid {
            c.epsilon_grid = e.clone();
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long = "smoothing-weight")]
    smoothing_weight: Option<f64>,
    #[arg(long = "max-gap-fraction")]
    max_gap_fraction: Option<f64>,
}

#[derive(Args)]
struct LevelArgs {
    #[arg(long, default_value = "rough-le")]
    preset: String,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    /// Comma-separated lattice sizes; the preset's levels when absent.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long = "n-samples")]
    n_samples: Option<usize>,
    #[arg(long = "master-seed")]
    master_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

impl LevelArgs {
    fn configs(&self) -> Result<Vec<ExperimentConfig>, HarnessError> {
        let preset = parse_preset(&self.preset)?;
        let scale = Scale::from(self.scale);
        let ns = self.levels.clone().unwrap_or_else(|| preset.levels(scale));
        Ok(ns
            .into_iter()
            .map(|n| {
                let mut c = preset.config(scale, Some(n), self.out.join(format!("n{n}")));
                if let Some(m) = self.n_samples {
                    c.n_samples = m;
                }
                if let Some(s) = self.master_seed {
                    c.master_seed = s;
                }
                c
            })
            .collect())
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    levels: LevelArgs,
    /// Fitted correction (sigma.toml from fit-sigma).
    #[arg(long)]
    sigma: PathBuf,
    /// PDE grid size.
    #[arg(long, default_value_t = 512)]
    grid: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Sin,
    ExpSin,
    SinSquared,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    shape: ShapeArg,
    #[arg(long)]
    amplitude: f64,
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    /// Fitted correction; the uncorrected current when absent.
    #[arg(long)]
    sigma: Option<PathBuf>,
    #[arg(long = "t-end")]
    t_end: f64,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Number of equally spaced snapshots to store.
    #[arg(long, default_value_t = 10)]
    snapshots: usize,
    #[arg(long, default_value_t = 1e-8)]
    rtol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FigureArgs {
    /// local-gibbs, sigma or pde-comparison.
    #[arg(long)]
    figure: String,
    /// Run directories holding the inputs.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also render SVG files.
    #[arg(long)]
    svg: bool,
}

fn parse_preset(name: &str) -> Result<Preset, HarnessError> {
    Preset::parse(name).ok_or_else(|| HarnessError::Config(format!("unknown preset {name:?}")))
}

fn build_config(
    args: &RunArgs,
    default_preset: Option<Preset>,
) -> Result<ExperimentConfig, HarnessError> {
    let mut c = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => {
            parse_preset(name)?.config(args.scale.into(), args.overrides.n, &args.out)
        }
        (None, None) => match default_preset {
            Some(p) => p.config(args.scale.into(), args.overrides.n, &args.out),
            None => return Err(HarnessError::Config("give --config or --preset".into())),
        },
    };
    args.overrides.apply(&mut c);
    c.output_dir = args.out.clone();
    c.validate()?;
    Ok(c)
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn simulate(args: RunArgs) -> Result<ExitCode, HarnessError> {
    let cfg = build_config(&args, None)?;
    let ens = pipeline_simulate(&cfg)?;
    println!(
        "simulated {} replicates at N = {}: {} jumps, output in {}",
        cfg.n_samples,
        cfg.model.n,
        ens.total_jumps,
        cfg.output_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn diagnose(args: LevelArgs) -> Result<ExitCode, HarnessError> {
    let report = pipeline_diagnose_le(&args.configs()?, &LeSettings::default(), &args.out)?;
    print!("{}", report.to_text());
    Ok(verdict(report.rough_le()))
}

fn gibbs(args: RunArgs) -> Result<ExitCode, HarnessError> {
    let cfg = build_config(&args, Some(Preset::GibbsTest))?;
    let report = pipeline_gibbs(&cfg, &LocalGibbsConfig::default())?;
    print!("{}", report.to_text());
    Ok(verdict(
        report.verdict == GibbsVerdict::NotLocalGibbs && report.lower_bound_holds,
    ))
}

fn fit(args: FitArgs) -> Result<ExitCode, HarnessError> {
    let cfg = build_config(&args.run, Some(Preset::Sigma))?;
    let preset = args.run.preset.as_deref().map(parse_preset).transpose()?;
    let mut settings = preset
        .unwrap_or(Preset::Sigma)
        .sigma_settings(args.run.scale.into());
    if let Some(p) = args.smoothing_weight {
        settings.fit.smoothing_weight = p;
    }
    if let Some(g) = args.max_gap_fraction {
        settings.fit.max_gap_fraction = g;
    }
    match pipeline_sigma(&cfg, &settings) {
        Ok(f) => {
            let c = &f.curve;
            println!(
                "t_N = {:e}, epsilon = {}, delta = {:e}, burn-in passed: {}",
                f.t, f.selection.epsilon, f.selection.delta, f.burn_in_passed
            );
            println!(
                "sigma(0) = {:.4}, sigma(W) = {:.4}, W = {:.4}, min = {:.4}",
                c.eval(0.0),
                c.eval(c.domain),
                c.domain,
                c.min_value(400)
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(HarnessError::Fit(FitError::Inconclusive { sweep })) => {
            eprintln!(
                "epsilon/delta selection inconclusive over {} candidates; sweep written to {}",
                sweep.len(),
                cfg.output_dir.display()
            );
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e),
    }
}

fn solve(args: SolveArgs) -> Result<ExitCode, HarnessError> {
    let shape = match args.shape {
        ShapeArg::Sin => ProfileShape::Sin {
            amplitude: args.amplitude,
        },
        ShapeArg::ExpSin => ProfileShape::ExpSin {
            amplitude: args.amplitude,
        },
        ShapeArg::SinSquared => ProfileShape::SinSquared {
            amplitude: args.amplitude,
        },
    };
    let law = match &args.sigma {
        Some(p) => {
            let curve = SigmaCurve::load(p)?;
            if curve.k != args.k {
                return Err(HarnessError::Config(format!(
                    "sigma was fitted at K = {}, not {}",
                    curve.k, args.k
                )));
            }
            CurrentLaw::corrected(curve)
        }
        None => CurrentLaw::gibbs(args.k),
    };
    let h0 = PdeField::sample(FieldKind::Height, args.grid, |x| shape.eval(x))?;
    let outputs = (1..=args.snapshots.max(1))
        .map(|i| args.t_end * i as f64 / args.snapshots.max(1) as f64)
        .collect();
    let cfg = SolverConfig {
        rtol: args.rtol,
        atol: 1e-14,
        ..SolverConfig::default()
    }
    .with_outputs(outputs);
    let traj = solve_h_pde(&h0, &law, args.t_end, &cfg)?;
    std::fs::create_dir_all(&args.out)?;
    let mut snaps = vec![h0];
    snaps.extend(traj.snapshots.iter().skip(1).cloned());
    write_trajectory_csv(&args.out.join("trajectory.csv"), &snaps)?;
    save_snapshots(&args.out.join("trajectory.snap"), &snaps)?;
    println!(
        "solved to t = {:e} in {} steps; final sup |h| = {:.4e}",
        args.t_end,
        traj.stats.accepted,
        traj.last().sup_norm()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, HarnessError> {
    let sigma = SigmaCurve::load(&args.sigma)?;
    let settings = VerifySettings {
        grid: Some(args.grid),
        ..VerifySettings::default()
    };
    let levels = args.levels.configs()?;
    let report = pipeline_verify_pde(&levels, &sigma, &settings, &args.levels.out)?;
    print!("{}", report.to_text());
    Ok(verdict(report.pass()))
}

fn figures(args: FigureArgs) -> Result<ExitCode, HarnessError> {
    let id = FigureId::parse(&args.figure)
        .ok_or_else(|| HarnessError::Config(format!("unknown figure {:?}", args.figure)))?;
    for p in emit_figure_data(&args.input, id, &args.out, args.svg)? {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::DiagnoseLe(a) => diagnose(a),
        Command::GibbsTest(a) => gibbs(a),
        Command::FitSigma(a) => fit(a),
        Command::SolvePde(a) => solve(a),
        Command::VerifyPde(a) => verify(a),
        Command::EmitFigures(a) => figures(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
