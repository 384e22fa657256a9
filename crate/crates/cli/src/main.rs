mod output;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use elastic_imaging::elastic::{simulate, DetectorArray};
use elastic_imaging::grid::{read_field, write_field, ScalarField};
use elastic_imaging::learning::{train, TrainConfig, TrainingPair};
use elastic_imaging::metrics::{normalize_unit, report};
use elastic_imaging::phantoms::source_from_phantoms;
use elastic_imaging::pipeline::{
    framelet_filter, make_phantoms, run_pipeline, FrameletConfig, GridConfig, Method, PhantomKind, PipelineConfig,
    PipelineReport,
};
use elastic_imaging::pooling::{frame_defect, PoolingFrame, PoolingKind};
use elastic_imaging::time_reversal::{normalized_crop, weighted_time_reversal};
use elastic_imaging::tv::tv_denoise;
use image::Rgb;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use output::{fmt17, write_csv, write_png, Manifest, Usage};

#[derive(Parser)]
#[command(name = "elastic-imaging", version, about = "Elastic source imaging from boundary measurements")]
struct Cli {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the phantom and noise seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phantom field files, ellipse lists and renderings.
    Phantom {
        #[arg(long, value_enum)]
        kind: Option<PhantomArg>,
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Source density and simulated detector traces.
    Simulate,
    /// Raw and weighted time-reversal images from a `simulate` directory.
    Timereverse {
        #[arg(long)]
        input: PathBuf,
    },
    /// TV denoising of a field file scaled to [0, 1].
    DenoiseTv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Framelet filtering of a field file.
    Framelet {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        pencil: Option<usize>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Frame-condition diagnostics of the pooling layers.
    Frames {
        #[command(subcommand)]
        action: FramesAction,
    },
    /// Learns local filters on reconstruction / phantom pairs.
    Learn,
    /// Phantom, measurements, reconstruction and metrics in one run.
    Pipeline {
        #[arg(long)]
        method: Option<Method>,
    },
    /// One pipeline run per value of the swept axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<usize>,
        #[arg(long)]
        method: Option<Method>,
    },
    /// PSNR and SSIM of a reconstruction against the truth.
    Metrics {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        dynamic_range: f64,
    },
}

#[derive(Subcommand)]
enum FramesAction {
    Check {
        #[arg(long, value_enum)]
        kind: FrameArg,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 1)]
        depth: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomArg {
    Random,
    SheppLogan,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Unet,
    Dual,
    Identity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Axis {
    Detectors,
    Times,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LearnConfig {
    pipeline: PipelineConfig,
    pairs: usize,
    train: TrainConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        let pipeline = PipelineConfig {
            grid: GridConfig { n_x: 64, pml_width: 8, ..Default::default() },
            detectors: 16,
            ..Default::default()
        };
        Self { pipeline, pairs: 8, train: TrainConfig { steps: 200, ..Default::default() } }
    }
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Usage(format!("invalid config {}: {e}", path.display())).into())
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = load_config(cli.config.as_deref())?;
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn pipeline_manifest(command: &str, cfg: &PipelineConfig, seed: Option<u64>) -> Result<Manifest> {
    let mut m = Manifest::new(command, to_json(cfg)?, seed);
    m.tolerances.insert("tv_gamma", cfg.tv.gamma);
    m.tolerances.insert("tv_tol", cfg.tv.tol);
    m.tolerances.insert("tv_max_iters", cfg.tv.max_iters as f64);
    m.tolerances.insert("singular_value_rel_tol", 1e-13);
    Ok(m)
}

fn report_row(value: usize, r: &PipelineReport) -> Vec<String> {
    vec![
        value.to_string(),
        fmt17(r.metrics.psnr_db),
        fmt17(r.metrics.psnr_conventional),
        fmt17(r.metrics.ssim),
        fmt17(r.ncc),
    ]
}

const REPORT_HEADER: [&str; 5] = ["value", "psnr_db", "psnr_conventional", "ssim", "ncc"];

fn cmd_phantom(cli: &Cli, kind: Option<PhantomArg>, count: u64) -> Result<()> {
    let mut cfg = pipeline_config(cli)?;
    if let Some(k) = kind {
        cfg.phantom.kind = match k {
            PhantomArg::Random => PhantomKind::Random,
            PhantomArg::SheppLogan => PhantomKind::SheppLogan,
        };
    }
    let grid = cfg.grid.build()?;
    let mut manifest = pipeline_manifest("phantom", &cfg, cli.seed)?;
    let base = cfg.phantom.seed;
    let written: Vec<Vec<PathBuf>> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<Vec<PathBuf>> {
            let mut pc = cfg.phantom.clone();
            pc.seed = base + i;
            pc.second_component = false;
            let p = make_phantoms(&pc, &grid)?.remove(0);
            let stem = cli.out.join(format!("phantom_{}", pc.seed));
            let paths = [stem.with_extension("efd"), stem.with_extension("json"), stem.with_extension("png")];
            write_field(&p.image, &paths[0])?;
            std::fs::write(&paths[1], serde_json::to_string_pretty(&p.ellipses)?)?;
            write_png(&p.image, &paths[2])?;
            Ok(paths.to_vec())
        })
        .collect::<Result<_>>()?;
    manifest.add_outputs(&cli.out, written.into_iter().flatten());
    manifest.write(&cli.out)
}

fn cmd_simulate(cli: &Cli) -> Result<()> {
    let cfg = pipeline_config(cli)?;
    let grid = cfg.grid.build()?;
    let det = DetectorArray::uniform(cfg.detectors, cfg.times, &grid)?;
    let phantoms = make_phantoms(&cfg.phantom, &grid)?;
    let source = source_from_phantoms(&phantoms[0], phantoms.get(1));
    let clean = simulate(&source, &grid, &det)?;
    let m = match cfg.snr_db {
        Some(snr) => elastic_imaging::phantoms::add_noise(&clean, snr, cfg.noise_seed)?,
        None => clean,
    };
    let out = &cli.out;
    let mut paths = vec![out.join("source_x.efd"), out.join("source_y.efd"), out.join("grid.json")];
    write_field(&source.comp_x, &paths[0])?;
    write_field(&source.comp_y, &paths[1])?;
    std::fs::write(&paths[2], grid.to_json()?)?;
    paths.extend(output::write_measurements(&m, out)?);
    let mut manifest = pipeline_manifest("simulate", &cfg, cli.seed)?;
    manifest.add_outputs(out, paths);
    manifest.write(out)
}

fn cmd_timereverse(cli: &Cli, input: &Path) -> Result<()> {
    let cfg = pipeline_config(cli)?;
    let grid = cfg.grid.build()?;
    let m = output::read_measurements(input)?;
    let img = weighted_time_reversal(&m, &grid)?;
    img.save(&cli.out)?;
    let mut paths: Vec<PathBuf> = ["raw_x.efd", "raw_y.efd", "wtr_x.efd", "wtr_y.efd", "tr_meta.json"]
        .iter()
        .map(|n| cli.out.join(n))
        .collect();
    for (name, f) in [("wtr_x.png", &img.weighted.comp_x), ("wtr_y.png", &img.weighted.comp_y)] {
        let path = cli.out.join(name);
        write_png(&normalized_crop(f, &grid)?, &path)?;
        paths.push(path);
    }
    let mut manifest = pipeline_manifest("timereverse", &cfg, cli.seed)?;
    manifest.add_outputs(&cli.out, paths);
    manifest.write(&cli.out)
}

fn unit_field(f: &ScalarField) -> ScalarField {
    ScalarField { data: normalize_unit(&f.data), ..*f }
}

fn cmd_denoise(cli: &Cli, input: &Path, gamma: Option<f64>) -> Result<()> {
    let mut cfg = pipeline_config(cli)?;
    if let Some(g) = gamma {
        cfg.tv.gamma = g;
    }
    let out = tv_denoise(&unit_field(&read_field(input)?), &cfg.tv)?;
    let paths = vec![cli.out.join("tv.efd"), cli.out.join("tv.png")];
    write_field(&out, &paths[0])?;
    write_png(&out, &paths[1])?;
    let mut manifest = Manifest::new("denoise-tv", to_json(&cfg.tv)?, cli.seed);
    manifest.tolerances.insert("tv_tol", cfg.tv.tol);
    manifest.add_outputs(&cli.out, paths);
    manifest.write(&cli.out)
}

fn cmd_framelet(cli: &Cli, input: &Path, fc: FrameletConfig) -> Result<()> {
    let f = read_field(input)?;
    let data = normalize_unit(&framelet_filter(&f.data, &fc)?);
    let out = ScalarField { data, ..f };
    let paths = vec![cli.out.join("framelet.efd"), cli.out.join("framelet.png")];
    write_field(&out, &paths[0])?;
    write_png(&out, &paths[1])?;
    let mut manifest = Manifest::new("framelet", to_json(&fc)?, cli.seed);
    manifest.add_outputs(&cli.out, paths);
    manifest.write(&cli.out)
}

#[derive(Serialize)]
struct FrameReport {
    kind: PoolingKind,
    q: usize,
    depth: usize,
    defect: f64,
}

fn cmd_frames_check(kind: FrameArg, q: usize, depth: usize) -> Result<()> {
    let kind = match kind {
        FrameArg::Unet => PoolingKind::Unet,
        FrameArg::Dual => PoolingKind::DualFrame,
        FrameArg::Identity => PoolingKind::Identity,
    };
    let depth = if kind == PoolingKind::Identity { 0 } else { depth };
    let frame = PoolingFrame::new(kind, q, depth).map_err(|e| Usage(e.to_string()))?;
    let r = FrameReport { kind, q, depth, defect: frame_defect(&frame) };
    println!("{}", serde_json::to_string(&r)?);
    Ok(())
}

fn cmd_learn(cli: &Cli) -> Result<()> {
    let mut cfg: LearnConfig = load_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.pipeline = cfg.pipeline.with_seed(s);
        cfg.train.seed = s;
    }
    let base = cfg.pipeline.phantom.seed;
    let pairs: Vec<TrainingPair> = (0..cfg.pairs as u64)
        .into_par_iter()
        .map(|i| -> Result<TrainingPair> {
            let pc = cfg.pipeline.clone().with_seed(base + i);
            let run = run_pipeline(&pc)?;
            Ok(TrainingPair::from_images(&run.reconstruction[0].data, &run.truth.data)?)
        })
        .collect::<Result<_>>()?;
    let basis = train(&pairs, &cfg.train)?;
    basis.save(&cli.out, "basis")?;
    let mut manifest = Manifest::new("learn", to_json(&cfg)?, cli.seed);
    manifest.tolerances.insert("lr", cfg.train.lr);
    manifest.add_outputs(&cli.out, [cli.out.join("basis.json"), cli.out.join("basis_loss.csv")]);
    manifest.write(&cli.out)
}

fn cmd_pipeline(cli: &Cli, method: Option<Method>) -> Result<()> {
    let mut cfg = pipeline_config(cli)?;
    if let Some(m) = method {
        cfg.method = m;
    }
    let run = run_pipeline(&cfg)?;
    let out = &cli.out;
    let mut paths = vec![
        out.join("truth.efd"),
        out.join("recon_x.efd"),
        out.join("recon_y.efd"),
        out.join("truth.png"),
        out.join("recon_x.png"),
        out.join("recon_y.png"),
        out.join("metrics.json"),
        out.join("metrics.csv"),
    ];
    write_field(&run.truth, &paths[0])?;
    write_field(&run.reconstruction[0], &paths[1])?;
    write_field(&run.reconstruction[1], &paths[2])?;
    write_png(&run.truth, &paths[3])?;
    write_png(&run.reconstruction[0], &paths[4])?;
    write_png(&run.reconstruction[1], &paths[5])?;
    std::fs::write(&paths[6], serde_json::to_string_pretty(&run.report)? + "\n")?;
    write_csv(&paths[7], &REPORT_HEADER, &[report_row(cfg.detectors, &run.report)])?;
    paths.extend(output::write_measurements(&run.measurements, out)?);
    let mut manifest = pipeline_manifest("pipeline", &cfg, cli.seed)?;
    manifest.add_outputs(out, paths);
    manifest.write(out)?;
    println!("{}", serde_json::to_string(&run.report)?);
    Ok(())
}

fn cmd_sweep(cli: &Cli, axis: Axis, values: &[usize], method: Option<Method>) -> Result<()> {
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Usage("sweep values must be strictly ascending".into()).into());
    }
    let mut cfg = pipeline_config(cli)?;
    if let Some(m) = method {
        cfg.method = m;
    }
    let reports: Vec<PipelineReport> = values
        .par_iter()
        .map(|&v| -> Result<PipelineReport> {
            let mut c = cfg.clone();
            match axis {
                Axis::Detectors => c.detectors = v,
                Axis::Times => c.times = v,
            }
            Ok(run_pipeline(&c)?.report)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = values.iter().zip(&reports).map(|(&v, r)| report_row(v, r)).collect();
    let csv_path = cli.out.join("sweep.csv");
    write_csv(&csv_path, &REPORT_HEADER, &rows)?;
    let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    let psnr: Vec<f64> = reports.iter().map(|r| r.metrics.psnr_db).collect();
    let ssim: Vec<f64> = reports.iter().map(|r| r.metrics.ssim).collect();
    let png_path = cli.out.join("sweep.png");
    plot::line_plot(&xs, &[(&psnr, Rgb([200, 30, 30])), (&ssim, Rgb([30, 60, 200]))], &png_path)?;
    let mut config = to_json(&cfg)?;
    config["sweep"] = serde_json::json!({ "axis": axis, "values": values });
    let mut manifest = Manifest::new("sweep", config, cli.seed);
    manifest.tolerances.insert("tv_tol", cfg.tv.tol);
    manifest.add_outputs(&cli.out, [csv_path, png_path]);
    manifest.write(&cli.out)
}

fn cmd_metrics(cli: &Cli, recon: &Path, truth: &Path, dynamic_range: f64) -> Result<()> {
    let r = report(&read_field(recon)?, &read_field(truth)?, dynamic_range)?;
    let path = cli.out.join("metrics.json");
    std::fs::write(&path, serde_json::to_string_pretty(&r)? + "\n")?;
    println!("{}", serde_json::to_string(&r)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Usage("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    if !matches!(cli.command, Command::Frames { .. }) {
        std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    }
    match &cli.command {
        Command::Phantom { kind, count } => cmd_phantom(cli, *kind, *count),
        Command::Simulate => cmd_simulate(cli),
        Command::Timereverse { input } => cmd_timereverse(cli, input),
        Command::DenoiseTv { input, gamma } => cmd_denoise(cli, input, *gamma),
        Command::Framelet { input, pencil, rank, basis } => {
            let mut fc = pipeline_config(cli)?.framelet;
            fc.pencil = pencil.unwrap_or(fc.pencil);
            fc.rank = rank.unwrap_or(fc.rank);
            if basis.is_some() {
                fc.basis = basis.clone();
            }
            cmd_framelet(cli, input, fc)
        }
        Command::Frames { action: FramesAction::Check { kind, q, depth } } => cmd_frames_check(*kind, *q, *depth),
        Command::Learn => cmd_learn(cli),
        Command::Pipeline { method } => cmd_pipeline(cli, *method),
        Command::Sweep { axis, values, method } => cmd_sweep(cli, *axis, values, *method),
        Command::Metrics { recon, truth, dynamic_range } => cmd_metrics(cli, recon, truth, *dynamic_range),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match (e.downcast_ref::<Usage>(), e.downcast_ref::<elastic_imaging::Error>()) {
                (Some(_), _) => ("Usage", 2),
                (_, Some(err)) => (err.kind(), 1),
                _ => ("Io", 1),
            };
            let body = serde_json::json!({ "error": kind, "message": format!("{e:#}") });
            eprintln!("{body}");
            if cli.out.is_dir() {
                let _ = std::fs::write(cli.out.join("error.json"), body.to_string() + "\n");
            }
            ExitCode::from(code)
        }
    }
}
