//! Command-line driver: noise synthesis, denoising, parameter sweeps, the
//! domain-decomposition experiment, and image metrics.
//!
//! Exit codes: 0 success, 2 usage error, 3 unsupported/corrupt image or
//! fixture, 4 numerical divergence.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tvstokes::dd::DdConfig;
use tvstokes::error::Error;
use tvstokes::io;
use tvstokes::noise::NoiseSpec;
use tvstokes::pipeline::{
    dd_experiment, run_tvstokes, sweep, DdExperimentConfig, DdParams, PipelineConfig, SweepGrids,
    Variant,
};
use tvstokes::plot::{line_chart_svg, Series};
use tvstokes::solver::SolverConfig;
use tvstokes::ScalarField;

#[derive(Parser)]
#[command(
    name = "tvstokes",
    version,
    about = "Two-step TV-Stokes image denoiser"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add seeded Gaussian noise to an image.
    AddNoise(AddNoiseArgs),
    /// Denoise an image (optionally with the domain-decomposed solvers).
    Denoise(DenoiseArgs),
    /// Parameter sweep over noise levels and regularization weights.
    Sweep(SweepArgs),
    /// Domain-decomposition validation against single-domain references.
    DdExperiment(DdExperimentArgs),
    /// PSNR/MSSIM between an image and a reference.
    Metrics(MetricsArgs),
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Flat key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tangent-smoothing weight.
    #[arg(long)]
    delta: Option<f64>,
    /// Reconstruction fidelity weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Reciprocal fidelity weight (alias for 1/alpha); mutually exclusive
    /// with --alpha.
    #[arg(long, conflicts_with = "alpha")]
    mu: Option<f64>,
    /// Normal-field smoothing constant.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Semi-implicit step size in (0, 1/8].
    #[arg(long)]
    step: Option<f64>,
    /// Stopping threshold on the energy-root decrement.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_it: Option<usize>,
}

#[derive(Args, Clone)]
struct DdFlags {
    /// Subdomain grid as M2xM1 (rows x columns), e.g. 3x3.
    #[arg(long)]
    grid: Option<String>,
    /// Overlap widths as sy,sx in grid points.
    #[arg(long)]
    overlap: Option<String>,
    /// Relaxation weight; defaults to the coloring value for the grid.
    #[arg(long)]
    alpha_hat: Option<f64>,
    #[arg(long)]
    max_inner_it: Option<usize>,
    #[arg(long)]
    outer_tol: Option<f64>,
}

#[derive(Args)]
struct AddNoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Noise variance.
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Reconstruction variant: irv1 or irv2.
    #[arg(long, default_value = "irv2")]
    variant: String,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    dd: DdFlags,
    /// Directory for energy-trace CSV files.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Optional reference-energy fixture (1 row, step-1 energy then step-2
    /// energies); adds a relative-gap column to the traces.
    #[arg(long)]
    ref_energies: Option<PathBuf>,
    /// Write the smoothed tangent field as a 2-channel fixture.
    #[arg(long)]
    tangent_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    output: PathBuf,
    /// Noise variances, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0001, 0.0025, 0.01, 0.09])]
    sigma2: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smoothing weights; defaults to the full grid.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Variant-1 fidelity weights.
    #[arg(long, value_delimiter = ',')]
    irv1_alphas: Option<Vec<f64>>,
    /// Variant-1 normal-field constants.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Variant-2 fidelity weights.
    #[arg(long, value_delimiter = ',')]
    irv2_alphas: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct DdExperimentArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    sigma2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    dd: DdFlags,
    /// Outer iteration cap for the decomposed runs.
    #[arg(long)]
    outer_max_it: Option<usize>,
    /// Iteration cap for the single-domain reference solves.
    #[arg(long, default_value_t = 1_000_000)]
    ref_max_it: usize,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Append a CSV row (image-id, noise-variance left empty) instead of
    /// plain text.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::AddNoise(args) => cmd_add_noise(args),
        Command::Denoise(args) => cmd_denoise(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::DdExperiment(args) => cmd_dd_experiment(args),
        Command::Metrics(args) => cmd_metrics(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Format(_) => 3,
                Error::NumericalDivergence { .. } => 4,
                Error::InvalidConfig(_) => 2,
                _ => 1,
            })
        }
    }
}

/// Flat `key = value` configuration file; `#` starts a comment line.
fn read_config_file(path: &Path) -> tvstokes::Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "{}:{}: expected 'key = value'",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_key<T: std::str::FromStr>(
    map: &HashMap<String, String>,
    key: &str,
) -> tvstokes::Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            Error::InvalidConfig(format!("config key '{key}' has invalid value '{raw}'"))
        }),
    }
}

impl SolverFlags {
    fn resolve(&self) -> tvstokes::Result<SolverConfig> {
        let mut cfg = SolverConfig::default();
        let file = match &self.config {
            Some(path) => read_config_file(path)?,
            None => HashMap::new(),
        };
        if let (Some(_), Some(_)) = (file.get("alpha"), file.get("mu")) {
            return Err(Error::InvalidConfig(
                "config file sets both 'alpha' and 'mu'".into(),
            ));
        }
        if let Some(v) = parse_key::<f64>(&file, "delta")? {
            cfg.delta = v;
        }
        if let Some(v) = parse_key::<f64>(&file, "alpha")? {
            cfg.alpha = v;
        }
        if let Some(v) = parse_key::<f64>(&file, "mu")? {
            cfg.alpha = 1.0 / v;
        }
        if let Some(v) = parse_key::<f64>(&file, "epsilon")? {
            cfg.epsilon = v;
        }
        if let Some(v) = parse_key::<f64>(&file, "step")? {
            cfg.step = v;
        }
        if let Some(v) = parse_key::<f64>(&file, "tol")? {
            cfg.tol = v;
        }
        if let Some(v) = parse_key::<usize>(&file, "max-it")? {
            cfg.max_it = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.mu {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidConfig(format!("mu must be > 0, got {v}")));
            }
            cfg.alpha = 1.0 / v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.step {
            cfg.step = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_it {
            cfg.max_it = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn config_map(&self) -> tvstokes::Result<HashMap<String, String>> {
        match &self.config {
            Some(path) => read_config_file(path),
            None => Ok(HashMap::new()),
        }
    }
}

impl DdFlags {
    fn resolve(&self, file: &HashMap<String, String>) -> tvstokes::Result<Option<DdParams>> {
        let grid_spec = match (&self.grid, file.get("grid")) {
            (Some(g), _) => Some(g.clone()),
            (None, Some(g)) => Some(g.clone()),
            (None, None) => None,
        };
        let Some(grid_spec) = grid_spec else {
            return Ok(None);
        };
        let (m2, m1) = parse_pair(&grid_spec, 'x').ok_or_else(|| {
            Error::InvalidConfig(format!("--grid expects M2xM1, got '{grid_spec}'"))
        })?;
        if m2 == 0 || m1 == 0 {
            return Err(Error::InvalidConfig("subdomain counts must be >= 1".into()));
        }
        let overlap_spec = self
            .overlap
            .clone()
            .or_else(|| file.get("overlap").cloned())
            .unwrap_or_else(|| "4,3".to_string());
        let (sy, sx) = parse_pair(&overlap_spec, ',').ok_or_else(|| {
            Error::InvalidConfig(format!("--overlap expects sy,sx, got '{overlap_spec}'"))
        })?;
        let mut params = DdParams::new(m2, m1, sy, sx);
        let mut cfg = DdConfig::for_counts(m2, m1);
        if let Some(v) = parse_key::<f64>(file, "alpha-hat")? {
            cfg.alpha_hat = v;
        }
        if let Some(v) = parse_key::<usize>(file, "max-inner-it")? {
            cfg.max_inner_it = v;
        }
        if let Some(v) = parse_key::<f64>(file, "outer-tol")? {
            cfg.outer_tol = v;
        }
        if let Some(v) = self.alpha_hat {
            cfg.alpha_hat = v;
        }
        if let Some(v) = self.max_inner_it {
            cfg.max_inner_it = v;
        }
        if let Some(v) = self.outer_tol {
            cfg.outer_tol = v;
        }
        params.config = cfg;
        Ok(Some(params))
    }
}

fn parse_pair(s: &str, sep: char) -> Option<(usize, usize)> {
    let (a, b) = s.split_once(sep)?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn cmd_add_noise(args: AddNoiseArgs) -> tvstokes::Result<()> {
    let image = io::load_image(&args.input)?;
    let noisy = tvstokes::noise::add_noise(&image, &NoiseSpec::new(args.sigma2, args.seed)?)?;
    io::save_image(&noisy, &args.output)?;
    println!("wrote {}", args.output.display());
    Ok(())
}

fn cmd_denoise(args: DenoiseArgs) -> tvstokes::Result<()> {
    let variant: Variant = args.variant.parse()?;
    let solver = args.solver.resolve()?;
    let file_map = args.solver.config_map()?;
    let mut dd = args.dd.resolve(&file_map)?;
    if let (Some(params), Some(max_it)) = (&mut dd, args.solver.max_it) {
        params.config.max_it = max_it;
    }
    let d0 = io::load_image(&args.input)?;
    let cfg = PipelineConfig {
        solver,
        variant,
        dd,
    };
    let out = run_tvstokes(&d0, &cfg)?;
    io::save_image(&out.denoised, &args.output)?;
    if let Some(path) = &args.tangent_out {
        io::write_vector_tvsf(path, &out.tangent)?;
    }
    if let Some(dir) = &args.trace_dir {
        fs::create_dir_all(dir)?;
        let refs = match &args.ref_energies {
            Some(path) => {
                let planes = io::read_tvsf(path)?;
                let row = planes
                    .first()
                    .ok_or_else(|| Error::Format("empty reference fixture".into()))?;
                let vals: Vec<f64> = row.values().iter().copied().collect();
                if vals.is_empty() {
                    return Err(Error::Format("empty reference fixture".into()));
                }
                let step2 = match (variant, vals.len()) {
                    (_, 1) => vals[0],
                    (Variant::Irv1, _) => vals[1],
                    (Variant::Irv2, 2) => vals[1],
                    (Variant::Irv2, _) => vals[2],
                };
                Some((vals[0], step2))
            }
            None => None,
        };
        write_trace_csv(
            &dir.join("tfs_trace.csv"),
            &out.tfs_trace,
            refs.map(|r| r.0),
        )?;
        write_trace_csv(&dir.join("ir_trace.csv"), &out.ir_trace, refs.map(|r| r.1))?;
    }
    if let Some((div_residual, path_disagreement)) = out.potential_diagnostics {
        println!(
            "potential integration: divergence residual {div_residual:.3e}, path disagreement {path_disagreement:.3e}"
        );
    }
    println!("wrote {}", args.output.display());
    Ok(())
}

fn write_trace_csv(
    path: &Path,
    trace: &tvstokes::solver::EnergyTrace,
    reference: Option<f64>,
) -> tvstokes::Result<()> {
    let mut buf = Vec::new();
    match reference {
        Some(r) => {
            let curve = tvstokes::pipeline::DdCurve {
                trace: trace.clone(),
                reference_energy: r,
            };
            curve.write_csv(&mut buf)?;
        }
        None => trace.write_csv(&mut buf)?,
    }
    fs::write(path, buf)?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> tvstokes::Result<()> {
    let solver = args.solver.resolve()?;
    let gt = io::load_image(&args.input)?;
    let mut grids = SweepGrids::default();
    if let Some(v) = args.deltas {
        grids.deltas = v;
    }
    if let Some(v) = args.irv1_alphas {
        grids.irv1_alphas = v;
    }
    if let Some(v) = args.epsilons {
        grids.epsilons = v;
    }
    if let Some(v) = args.irv2_alphas {
        grids.irv2_alphas = v;
    }
    let noise: Vec<NoiseSpec> = args
        .sigma2
        .iter()
        .map(|&v| NoiseSpec::new(v, args.seed))
        .collect::<tvstokes::Result<_>>()?;
    let image_id = args
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_string();
    let report = sweep(&gt, &image_id, &noise, &grids, &solver)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    fs::write(&args.output, buf)?;
    for o in &report.outcomes {
        println!(
            "sigma2={:<8} selected delta={:<6} irv1 best psnr={:.4} mssim={:.6} | irv2 best psnr={:.4} mssim={:.6}",
            o.sigma2,
            o.selected_delta,
            o.irv1_best_psnr.value,
            o.irv1_best_mssim.value,
            o.irv2_best_psnr.value,
            o.irv2_best_mssim.value
        );
    }
    println!("wrote {}", args.output.display());
    Ok(())
}

fn cmd_dd_experiment(args: DdExperimentArgs) -> tvstokes::Result<()> {
    let solver = args.solver.resolve()?;
    let file_map = args.solver.config_map()?;
    let dd = args
        .dd
        .resolve(&file_map)?
        .unwrap_or_else(|| DdParams::new(3, 3, 4, 3));
    let gt = io::load_image(&args.input)?;
    let mut cfg = DdExperimentConfig {
        noise: NoiseSpec::new(args.sigma2, args.seed)?,
        delta: solver.delta,
        alpha: solver.alpha,
        epsilon: solver.epsilon,
        step: solver.step,
        dd,
        reference_max_it: args.ref_max_it,
        reference_tol: solver.tol,
    };
    if let Some(v) = args.outer_max_it {
        cfg.dd.config.max_it = v;
    }
    let report = dd_experiment(&gt, &cfg)?;
    fs::create_dir_all(&args.output_dir)?;
    let dir = &args.output_dir;

    let dump = |name: &str, curve: &tvstokes::pipeline::DdCurve| -> tvstokes::Result<()> {
        let mut buf = Vec::new();
        curve.write_csv(&mut buf)?;
        fs::write(dir.join(name), buf)?;
        Ok(())
    };
    dump("tfs_dd.csv", &report.tfs)?;
    dump("irv1_from_dd.csv", &report.irv1_from_dd)?;
    dump("irv1_from_ref.csv", &report.irv1_from_reference)?;
    dump("irv2_from_dd.csv", &report.irv2_from_dd)?;
    dump("irv2_from_ref.csv", &report.irv2_from_reference)?;

    let ref_values = [
        report.tfs.reference_energy,
        report.irv1_from_reference.reference_energy,
        report.irv2_from_reference.reference_energy,
    ];
    let refs = ScalarField::from_fn(tvstokes::GridSpec::new(1, 3, 1.0)?, |_, j| ref_values[j]);
    io::write_tvsf(&dir.join("reference_energies.tvsf"), &[&refs])?;

    let curve_series = |label: &str, c: &tvstokes::pipeline::DdCurve| Series {
        label: label.to_string(),
        points: c
            .trace
            .energies()
            .iter()
            .enumerate()
            .map(|(n, &e)| (n as f64, e))
            .collect(),
    };
    let ref_series = |label: &str, c: &tvstokes::pipeline::DdCurve| Series {
        label: label.to_string(),
        points: (0..c.trace.len())
            .map(|n| (n as f64, c.reference_energy))
            .collect(),
    };
    let write_plot = |name: &str, title: &str, series: Vec<Series>| -> tvstokes::Result<()> {
        fs::write(
            dir.join(name),
            line_chart_svg(title, "outer iteration", "dual energy", &series, true),
        )?;
        Ok(())
    };
    write_plot(
        "tfs_energy.svg",
        "Step 1 energy vs reference",
        vec![
            curve_series("decomposed", &report.tfs),
            ref_series("reference", &report.tfs),
        ],
    )?;
    write_plot(
        "irv1_energy.svg",
        "Step 2 (variant 1) energy vs reference",
        vec![
            curve_series("from decomposed tangent", &report.irv1_from_dd),
            curve_series("from reference tangent", &report.irv1_from_reference),
            ref_series("reference", &report.irv1_from_reference),
        ],
    )?;
    write_plot(
        "irv2_energy.svg",
        "Step 2 (variant 2) energy vs reference",
        vec![
            curve_series("from decomposed tangent", &report.irv2_from_dd),
            curve_series("from reference tangent", &report.irv2_from_reference),
            ref_series("reference", &report.irv2_from_reference),
        ],
    )?;

    println!(
        "tfs relative gap: {:.3e} (outer iterations: {})",
        report.tfs.final_relative_gap(),
        report.tfs.trace.len() - 1
    );
    println!(
        "irv1 gap from reference tangent: {:.3e}; from decomposed tangent: {:.3e}",
        report.irv1_from_reference.final_relative_gap(),
        report.irv1_from_dd.final_relative_gap()
    );
    println!(
        "irv2 gap from reference tangent: {:.3e}; from decomposed tangent: {:.3e}",
        report.irv2_from_reference.final_relative_gap(),
        report.irv2_from_dd.final_relative_gap()
    );
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> tvstokes::Result<()> {
    let image = io::load_image(&args.image)?;
    let reference = io::load_image(&args.reference)?;
    let report = tvstokes::metrics::report(&image, &reference)?;
    match &args.csv {
        Some(path) => {
            let id = args
                .image
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("image");
            let mut text = String::from(
                "image_id,sigma2,method,delta,alpha,epsilon,psnr,mssim,perf,selected\n",
            );
            text.push_str(&format!(
                "{id},,metrics,,,,{},{},,0\n",
                report.psnr, report.mssim
            ));
            fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        None => {
            println!("psnr: {}", report.psnr);
            println!("mssim: {}", report.mssim);
            if report.is_exact_match() {
                println!("note: images are identical (psnr is unbounded)");
            }
        }
    }
    Ok(())
}
