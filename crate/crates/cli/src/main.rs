//! `scenemc`: fit interaction priors, generate synthetic scenes, run
//! inference, score results, and draw overlays.
//!
//! Exit status: 0 success, 2 bad input or schema, 3 infeasible request or
//! insufficient data, 4 inference failure.

mod config;
mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scenemc_core::harness::{evaluate, generate_scene};
use scenemc_core::hoi_prior::{fit_prior, HoiPriorSet};
use scenemc_core::inference::{init_scene, run_inference, PhaseSet};
use scenemc_core::scene::{Action, Observations, ParseGraph};
use scenemc_core::schema::{self, Manifest, ManifestEntry, MANIFEST_SCHEMA};
use scenemc_core::Error;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "scenemc", version, about = "Joint 3D scene and human pose inference by simulated-annealing MCMC")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct Global {
    /// Run config file (`key = value` lines). Falls back to $SCENEMC_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Phases to run, e.g. `1-4` or `1,3`.
    #[arg(long, global = true)]
    phases: Option<String>,
    /// Worker threads for batch work across scenes.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_defaults: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit Gaussian HOI priors from offset samples.
    FitHoi {
        samples: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Actions that must be present, comma separated.
        #[arg(long)]
        actions: Option<String>,
    },
    /// Generate ground-truth scenes and their observations.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(short, long, default_value_t = 1)]
        n: usize,
        /// HOI prior file used to place people; built-in priors otherwise.
        #[arg(long)]
        priors: Option<PathBuf>,
    },
    /// Run four-phase inference on one or more observation files.
    Infer {
        #[arg(required = true)]
        obs: Vec<PathBuf>,
        /// HOI prior file; overrides `paths.priors`.
        #[arg(long)]
        priors: Option<PathBuf>,
        /// Output scene for a single observation file.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Output directory for batch runs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Start from this scene instead of the bottom-up initializer.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Trace path for a single run; `<out>.trace.jsonl` by default.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score an estimate against ground truth.
    Eval {
        est: PathBuf,
        gt: PathBuf,
        obs: PathBuf,
        /// Append a CSV row (header written for a new file).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Draw detections and the projected scene as SVG.
    Render {
        scene: PathBuf,
        obs: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InsufficientData(_) | Error::Generation(_) | Error::Initialization(_) | Error::UnliftablePose(_) => 3,
            Error::MissingPrior(_) | Error::InvalidTemperature(_) => 4,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::new(4, format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::new(4, format!("cannot write {}: {e}", path.display())))
}

fn load<T>(path: &Path, parse: impl Fn(&str) -> scenemc_core::Result<T>) -> Outcome<T> {
    parse(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn priors_from(path: Option<&Path>) -> Outcome<HoiPriorSet> {
    match path {
        Some(p) => load(p, schema::read_priors),
        None => Ok(HoiPriorSet::defaults()),
    }
}

fn pool(jobs: Option<usize>) -> Outcome<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::new(4, format!("cannot start worker pool: {e}")))
}

fn settings(g: &Global) -> Outcome<RunConfig> {
    let mut cfg = RunConfig::resolve(g.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(p) = &g.phases {
        cfg.core.schedule.phases = PhaseSet::parse(p)?;
    }
    Ok(cfg)
}

fn fit_hoi(samples: &Path, out: &Path, required: Option<&str>) -> Outcome {
    let set = load(samples, schema::read_samples)?;
    let groups = set.grouped().map_err(|e| Failure::input(format!("{}: {e}", samples.display())))?;
    if let Some(list) = required {
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let a = Action::from_name(name).ok_or_else(|| Failure::input(format!("unknown action `{name}`")))?;
            if !groups.contains_key(&a) {
                return Err(Failure::new(3, format!("no samples for requested action `{a}`")));
            }
        }
    }
    if groups.is_empty() {
        return Err(Failure::new(3, "sample file is empty"));
    }
    let mut priors = Vec::new();
    for (a, g) in groups {
        let p = fit_prior(a, g.object_classes, g.key_joint, &g.offsets)?;
        println!("{a}: {} samples, mean ({:.4}, {:.4}, {:.4})", g.offsets.len(), p.mean.x, p.mean.y, p.mean.z);
        priors.push(p);
    }
    let set = HoiPriorSet::new(priors)?;
    write(out, &schema::priors_text(&set)?)
}

/// Per-scene seeds drawn from one stream seeded by `base`.
fn derived_seeds(base: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    (0..n).map(|_| rng.random()).collect()
}

fn synth(g: &Global, spec_path: &Path, out_dir: &Path, n: usize, priors: Option<&Path>) -> Outcome {
    let mut spec = load(spec_path, schema::read_synth_spec)?;
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    let priors = priors_from(priors)?;
    let seeds = derived_seeds(spec.seed, n);
    let scenes: Vec<Outcome<(ParseGraph, Observations)>> = pool(g.jobs)?.install(|| {
        seeds
            .par_iter()
            .map(|&s| generate_scene(&spec, &priors, &mut ChaCha8Rng::seed_from_u64(s)).map_err(Failure::from))
            .collect()
    });
    let mut entries = Vec::with_capacity(n);
    for (i, (scene, seed)) in scenes.into_iter().zip(&seeds).enumerate() {
        let (pg, obs) = scene?;
        let truth = format!("scene_{i:03}.truth.json");
        let obs_name = format!("scene_{i:03}.obs.json");
        write(&out_dir.join(&truth), &schema::scene_text(&pg)?)?;
        write(&out_dir.join(&obs_name), &schema::obs_text(&obs)?)?;
        entries.push(ManifestEntry { index: i, seed: *seed, truth, obs: obs_name });
    }
    let manifest = Manifest { schema: MANIFEST_SCHEMA.into(), spec_seed: spec.seed, scenes: entries };
    write(&out_dir.join("manifest.json"), &schema::manifest_text(&manifest)?)?;
    println!("wrote {n} scenes to {}", out_dir.display());
    Ok(())
}

fn stem(obs: &Path) -> String {
    let name = obs.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    name.trim_end_matches(".json").trim_end_matches(".obs").to_string()
}

fn trace_path(out: &Path) -> PathBuf {
    let name = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{}.trace.jsonl", name.trim_end_matches(".json")))
}

struct Job {
    obs: PathBuf,
    out: PathBuf,
    trace: PathBuf,
}

fn infer_one(cfg: &RunConfig, priors: &HoiPriorSet, job: &Job, init: Option<&Path>) -> Outcome<String> {
    let obs = load(&job.obs, schema::read_obs)?;
    let start = match init {
        Some(p) => load(p, schema::read_scene)?,
        None => init_scene(&obs, &cfg.core.init)?,
    };
    match run_inference(&start, &obs, priors, &cfg.core, cfg.seed) {
        Ok(r) => {
            write(&job.out, &schema::scene_text(&r.graph)?)?;
            write(&job.trace, &schema::trace_text(&r.trace)?)?;
            Ok(format!(
                "{}: energy {:.6} -> {:.6}, {} objects, {} people",
                job.out.display(),
                r.initial.total,
                r.final_energy.total,
                r.graph.objects.len(),
                r.graph.humans.len()
            ))
        }
        Err(aborted) => {
            if let Ok(t) = schema::trace_text(&aborted.trace) {
                let _ = write(&job.trace, &t);
            }
            Err(Failure::new(4, format!("{}: {aborted}", job.obs.display())))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn infer(
    g: &Global,
    obs: &[PathBuf],
    priors: Option<&Path>,
    out: Option<&Path>,
    out_dir: Option<&Path>,
    init: Option<&Path>,
    trace: Option<&Path>,
) -> Outcome {
    let cfg = settings(g)?;
    let priors = priors_from(priors.or(cfg.priors.as_deref()))?;
    let jobs: Vec<Job> = match (out, out_dir) {
        (Some(o), None) if obs.len() == 1 => {
            vec![Job { obs: obs[0].clone(), out: o.to_path_buf(), trace: trace.map_or_else(|| trace_path(o), Path::to_path_buf) }]
        }
        (None, Some(d)) if trace.is_none() && (init.is_none() || obs.len() == 1) => obs
            .iter()
            .map(|p| {
                let out = d.join(format!("{}.est.json", stem(p)));
                Job { obs: p.clone(), trace: trace_path(&out), out }
            })
            .collect(),
        _ => {
            return Err(Failure::input(
                "give --out for one observation file or --out-dir for several (--init and --trace need a single file)",
            ))
        }
    };
    let results: Vec<Outcome<String>> =
        pool(g.jobs)?.install(|| jobs.par_iter().map(|j| infer_one(&cfg, &priors, j, init)).collect());
    let mut first_err = None;
    for r in results {
        match r {
            Ok(line) => println!("{line}"),
            // main reports the first failure; later ones are printed here
            Err(e) if first_err.is_some() => eprintln!("error: {}", e.message),
            Err(e) => first_err = Some(e),
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn eval(est: &Path, gt: &Path, obs: &Path, csv_path: Option<&Path>) -> Outcome {
    let est_pg = load(est, schema::read_scene)?;
    let gt_pg = load(gt, schema::read_scene)?;
    let o = load(obs, schema::read_obs)?;
    let m = evaluate(&est_pg, &gt_pg, &o).map_err(|e| Failure::input(e.to_string()))?;
    print!("{}", schema::metrics_text(&m)?);
    if let Some(path) = csv_path {
        let fresh = fs::metadata(path).map(|md| md.len() == 0).unwrap_or(true);
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Failure::new(4, format!("cannot open {}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(file);
        let io = |e: csv::Error| Failure::new(4, format!("cannot write {}: {e}", path.display()));
        if fresh {
            let mut header = vec!["estimate"];
            header.extend(schema::METRICS_COLUMNS);
            w.write_record(&header).map_err(io)?;
        }
        let mut row = vec![est.display().to_string()];
        row.extend(schema::metrics_row(&m));
        w.write_record(&row).map_err(io)?;
        w.flush().map_err(|e| Failure::new(4, e.to_string()))?;
    }
    Ok(())
}

fn render_cmd(scene: &Path, obs: &Path, out: &Path) -> Outcome {
    let pg = load(scene, schema::read_scene)?;
    let o = load(obs, schema::read_obs)?;
    write(out, &render::render_svg(&pg, &o))
}

fn run(cli: Cli) -> Outcome {
    let g = &cli.global;
    if g.dump_defaults {
        print!("{}", settings(g)?.dump());
        return Ok(());
    }
    let Some(cmd) = &cli.command else {
        return Err(Failure::input("no command given; see --help"));
    };
    match cmd {
        Command::FitHoi { samples, out, actions } => fit_hoi(samples, out, actions.as_deref()),
        Command::Synth { spec, out_dir, n, priors } => synth(g, spec, out_dir, *n, priors.as_deref()),
        Command::Infer { obs, priors, out, out_dir, init, trace } => {
            infer(g, obs, priors.as_deref(), out.as_deref(), out_dir.as_deref(), init.as_deref(), trace.as_deref())
        }
        Command::Eval { est, gt, obs, csv } => eval(est, gt, obs, csv.as_deref()),
        Command::Render { scene, obs, out } => render_cmd(scene, obs, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    info!("{cli:?}");
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
