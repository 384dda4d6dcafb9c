//! Experiment orchestration: configuration, full reconstruction runs per
//! strategy, comparison tables, and results serialization.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aggregation::{ma_train_step, CandidateOperators, MomentRecord, Strategy};
use crate::dataio::{
    self, flatten_signal, load_grayscale_image, load_idx, make_phantom, phase_map, prepare_square,
    ImageSample, PhantomKind,
};
use crate::error::{Error, Result};
use crate::forward::{
    build_candidate_set, hologram, object_wave_from_phase, sample_gaussian_matrix, CandidateSet,
    ForwardParam, HolographyParam,
};
use crate::metrics::{self, MetricReport};
use crate::nn::{init_generator, GeneratorConfig, GeneratorState};
use crate::tensor::{self, Tensor};

pub const DEFAULT_ITERATIONS_CS: usize = 2000;
pub const DEFAULT_ITERATIONS_HOLOGRAPHY: usize = 5000;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_WAVELENGTH_UM: f64 = 0.520;
pub const DEFAULT_DISTANCE_UM: f64 = 5000.0;
pub const DEFAULT_PITCH_UM: f64 = 2.0;
pub const DEFAULT_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Cs,
    Holography,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: u64,
    pub candidates: u64,
    pub generator: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { data: 1, candidates: 2, generator: 3 }
    }
}

fn default_lr() -> f64 {
    DEFAULT_LEARNING_RATE
}

fn default_strategies() -> Vec<String> {
    vec!["ma".into(), "uniform".into(), "alternating".into(), "oracle".into(), "random".into()]
}

fn default_candidates() -> usize {
    10
}

/// Everything one experiment needs; JSON-compatible with the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// "mnist", "phantom-blobs", "phantom-rings", "phantom-text", or "image".
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default)]
    pub sample: usize,
    /// CS measurement count; must stay below the signal length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Holography optics; defaults match the desk-scale setup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Phantom/image side length for the CS task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub seeds: Seeds,
    pub out: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_blocks: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validated()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn iterations(&self) -> usize {
        self.iterations.unwrap_or(match self.task {
            Task::Cs => DEFAULT_ITERATIONS_CS,
            Task::Holography => DEFAULT_ITERATIONS_HOLOGRAPHY,
        })
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(match self.dataset.as_str() {
            "mnist" => 32,
            _ => DEFAULT_GRID,
        })
    }

    pub fn optics(&self) -> HolographyParam {
        HolographyParam {
            wavelength_um: self.lambda_um.unwrap_or(DEFAULT_WAVELENGTH_UM),
            distance_um: self.z_um.unwrap_or(DEFAULT_DISTANCE_UM),
            pixel_pitch_um: self.pitch_um.unwrap_or(DEFAULT_PITCH_UM),
            grid: self.grid(),
        }
    }

    /// Fills every optional knob so the echoed config is self-contained.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.iterations = Some(self.iterations());
        match self.task {
            Task::Cs => {}
            Task::Holography => {
                let optics = self.optics();
                cfg.lambda_um = Some(optics.wavelength_um);
                cfg.z_um = Some(optics.distance_um);
                cfg.pitch_um = Some(optics.pixel_pitch_um);
                cfg.grid = Some(optics.grid);
            }
        }
        cfg
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be at least 1".into()));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.iterations() == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("strategy list must not be empty".into()));
        }
        for s in &self.strategies {
            parse_strategy_name(s)?;
        }
        match self.task {
            Task::Cs => {
                if self.m.is_none() {
                    return Err(Error::Config("CS task needs a measurement count m".into()));
                }
            }
            Task::Holography => {
                self.optics().validate()?;
            }
        }
        match self.dataset.as_str() {
            "mnist" => {
                if self.idx_path.is_none() {
                    return Err(Error::Config("dataset \"mnist\" needs idx_path".into()));
                }
            }
            "image" => {
                if self.image_path.is_none() {
                    return Err(Error::Config("dataset \"image\" needs image_path".into()));
                }
            }
            other => {
                let kind = other.strip_prefix("phantom-").and_then(PhantomKind::parse);
                if kind.is_none() {
                    return Err(Error::Config(format!(
                        "unknown dataset \"{}\" (mnist, phantom-blobs, phantom-rings, phantom-text, image)",
                        other
                    )));
                }
            }
        }
        Ok(self)
    }
}

/// One of the names accepted in `strategies`; "random" expands to a full
/// per-candidate sweep at comparison time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    Ma,
    Uniform,
    Alternating,
    Oracle,
    Random,
}

pub fn parse_strategy_name(s: &str) -> Result<StrategyName> {
    match s {
        "ma" => Ok(StrategyName::Ma),
        "uniform" => Ok(StrategyName::Uniform),
        "alternating" => Ok(StrategyName::Alternating),
        "oracle" => Ok(StrategyName::Oracle),
        "random" => Ok(StrategyName::Random),
        other => Err(Error::Config(format!(
            "unknown strategy \"{}\" (ma, uniform, alternating, oracle, random)",
            other
        ))),
    }
}

/// What reconstructions are scored against.
enum EvalTarget {
    /// CS: the ground-truth image plane.
    Image { gt: Tensor },
    /// Holography: ground-truth phase as a fraction of 2*pi, plus the
    /// (unit) amplitude for secondary logging.
    Phase { gt_phase_frac: Tensor, gt_amplitude: Tensor },
}

/// A fully materialized problem: data, measurement, candidates, generator
/// shape. Built once per comparison so every strategy shares the same y.
pub struct ProblemSetup {
    pub y: Arc<Tensor>,
    pub set: CandidateSet,
    pub ops: CandidateOperators,
    gen_config: GeneratorConfig,
    eval: EvalTarget,
}

impl ProblemSetup {
    /// PSNR of a generator output against the ground truth.
    pub fn eval_psnr(&self, image: &Tensor) -> Result<f64> {
        match &self.eval {
            EvalTarget::Image { gt } => {
                metrics::psnr(&image.reshaped(gt.shape().to_vec())?, gt)
            }
            EvalTarget::Phase { gt_phase_frac, .. } => {
                metrics::psnr(&tensor::slice_channel(image, 1)?, gt_phase_frac)
            }
        }
    }

    pub fn final_report(&self, image: &Tensor) -> Result<(MetricReport, Option<f64>)> {
        match &self.eval {
            EvalTarget::Image { gt } => {
                let plane = image.reshaped(gt.shape().to_vec())?;
                Ok((metrics::report(&plane, gt)?, None))
            }
            EvalTarget::Phase { gt_phase_frac, gt_amplitude } => {
                let phase = tensor::slice_channel(image, 1)?;
                let amp = tensor::slice_channel(image, 0)?;
                Ok((
                    metrics::report(&phase, gt_phase_frac)?,
                    Some(metrics::psnr(&amp, gt_amplitude)?),
                ))
            }
        }
    }

    /// The [0,1] plane written as ground_truth.png.
    pub fn ground_truth_plane(&self) -> &Tensor {
        match &self.eval {
            EvalTarget::Image { gt } => gt,
            EvalTarget::Phase { gt_phase_frac, .. } => gt_phase_frac,
        }
    }

    /// The plane a run's final image is rendered from.
    pub fn render_plane(&self, image: &Tensor) -> Result<Tensor> {
        match &self.eval {
            EvalTarget::Image { gt } => image.reshaped(gt.shape().to_vec()),
            EvalTarget::Phase { .. } => tensor::slice_channel(image, 1),
        }
    }
}

fn load_dataset_image(config: &ExperimentConfig) -> Result<ImageSample> {
    match config.dataset.as_str() {
        "mnist" => {
            let samples = load_idx(config.idx_path.as_ref().expect("validated"))?;
            samples.into_iter().nth(config.sample).ok_or_else(|| {
                Error::Config(format!("sample index {} out of range", config.sample))
            })
        }
        "image" => {
            let img = load_grayscale_image(config.image_path.as_ref().expect("validated"))?;
            let side = match config.task {
                Task::Cs => config.size.unwrap_or(64),
                Task::Holography => config.grid(),
            };
            prepare_square(&img, side)
        }
        other => {
            let kind = other
                .strip_prefix("phantom-")
                .and_then(PhantomKind::parse)
                .expect("validated");
            let side = match config.task {
                Task::Cs => config.size.unwrap_or(32),
                Task::Holography => config.grid(),
            };
            Ok(make_phantom(kind, side, config.seeds.data)?.image)
        }
    }
}

fn generator_config(config: &ExperimentConfig, out_h: usize, out_w: usize) -> Result<GeneratorConfig> {
    let out_channels = match config.task {
        Task::Cs => 1,
        Task::Holography => 2,
    };
    let num_blocks = config.num_blocks.unwrap_or(if out_h.min(out_w) >= 64 { 3 } else { 2 });
    GeneratorConfig::new(
        out_h,
        out_w,
        out_channels,
        config.base_channels.unwrap_or(64),
        num_blocks,
        config.seeds.generator,
    )
}

/// Loads data, synthesizes the measurement from the precise parameter, and
/// builds the candidate set. The measurement is created exactly once here.
pub fn build_problem(config: &ExperimentConfig) -> Result<ProblemSetup> {
    let image = load_dataset_image(config)?;
    match config.task {
        Task::Cs => {
            let n = image.pixels.numel();
            let m = config.m.expect("validated");
            if m >= n {
                return Err(Error::Config(format!(
                    "m = {} must stay below the signal length n = {}",
                    m, n
                )));
            }
            let precise = sample_gaussian_matrix(m, n, config.seeds.data ^ 0x9e37_79b9_7f4a_7c15);
            let x0 = flatten_signal(&image);
            let y = Arc::new(tensor::matvec(&precise.phi, &x0)?);
            let set = if config.n_candidates == 1 {
                CandidateSet::singleton(ForwardParam::Gaussian(precise))
            } else {
                build_candidate_set(
                    ForwardParam::Gaussian(precise),
                    config.n_candidates,
                    config.seeds.candidates,
                )?
            };
            let ops = CandidateOperators::build(&set)?;
            let gen_config = generator_config(config, image.height(), image.width())?;
            Ok(ProblemSetup {
                y,
                set,
                ops,
                gen_config,
                eval: EvalTarget::Image { gt: image.plane() },
            })
        }
        Task::Holography => {
            let grid = config.grid();
            let image = if image.height() != grid || image.width() != grid {
                dataio::pad_to(&image, grid)?
            } else {
                image
            };
            let optics = config.optics();
            let phase = phase_map(&image);
            let object = object_wave_from_phase(&phase)?;
            let y = Arc::new(hologram(&object, &optics)?);
            let set = if config.n_candidates == 1 {
                CandidateSet::singleton(ForwardParam::Holography(optics))
            } else {
                build_candidate_set(
                    ForwardParam::Holography(optics),
                    config.n_candidates,
                    config.seeds.candidates,
                )?
            };
            let ops = CandidateOperators::build(&set)?;
            let gen_config = generator_config(config, grid, grid)?;
            let gt_phase_frac = phase.map(|v| v / (2.0 * std::f64::consts::PI));
            Ok(ProblemSetup {
                y,
                set,
                ops,
                gen_config,
                eval: EvalTarget::Phase {
                    gt_phase_frac,
                    gt_amplitude: Tensor::full(vec![grid, grid], 1.0),
                },
            })
        }
    }
}

/// Result of a full reconstruction run for one strategy.
pub struct RunResult {
    pub label: String,
    pub strategy: Strategy,
    pub final_image: Arc<Tensor>,
    pub report: Option<MetricReport>,
    pub amplitude_psnr: Option<f64>,
    pub records: Vec<MomentRecord>,
    pub mean_iter_ms: f64,
    pub selected_trace: Vec<usize>,
    pub final_weights: Vec<f64>,
    /// (iteration, psnr) of the best iterate, logged alongside the
    /// final-iterate headline numbers.
    pub best: Option<(usize, f64)>,
    pub failed: Option<String>,
}

fn run_on_problem(
    problem: &ProblemSetup,
    config: &ExperimentConfig,
    strategy: Strategy,
) -> Result<RunResult> {
    let mut state: GeneratorState = init_generator(problem.gen_config.clone())?;
    let iterations = config.iterations();
    let mut records = Vec::with_capacity(iterations);
    let mut selected_trace = Vec::new();
    let mut final_weights = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut last_image: Option<Arc<Tensor>> = None;
    let mut failed = None;
    let mut total_ms = 0.0;

    for iteration in 0..iterations {
        let started = Instant::now();
        let step = ma_train_step(
            &mut state,
            &problem.y,
            &problem.set,
            &problem.ops,
            strategy,
            config.lr,
            iteration,
        );
        let wall_ms = started.elapsed().as_secs_f64() * 1000.0;
        total_ms += wall_ms;
        match step {
            Ok(out) => {
                let mut record = out.record;
                record.wall_ms = wall_ms;
                let psnr = problem.eval_psnr(&out.image)?;
                record.psnr = Some(psnr);
                if best.map_or(true, |(_, b)| psnr > b) {
                    best = Some((iteration, psnr));
                }
                if let Some(sel) = record.selected {
                    selected_trace.push(sel);
                }
                final_weights = record.weights.clone();
                records.push(record);
                last_image = Some(out.image);
            }
            Err(Error::Divergence { iteration, detail }) => {
                failed = Some(format!("diverged at iteration {}: {}", iteration, detail));
                break;
            }
            Err(other) => return Err(other),
        }
    }

    let final_image = match last_image {
        Some(img) => img,
        // divergence on the very first step: report a flat gray image
        None => Arc::new(Tensor::full(
            vec![
                problem.gen_config.out_channels,
                problem.gen_config.out_height,
                problem.gen_config.out_width,
            ],
            0.5,
        )),
    };
    let (report, amplitude_psnr) = if failed.is_none() {
        let (r, a) = problem.final_report(&final_image)?;
        (Some(r), a)
    } else {
        (None, None)
    };
    let mean_iter_ms = if records.is_empty() { 0.0 } else { total_ms / records.len() as f64 };
    Ok(RunResult {
        label: strategy.label(),
        strategy,
        final_image,
        report,
        amplitude_psnr,
        records,
        mean_iter_ms,
        selected_trace,
        final_weights,
        best,
        failed,
    })
}

/// Runs one strategy end to end from a config.
pub fn run_reconstruction(config: &ExperimentConfig, strategy: Strategy) -> Result<RunResult> {
    let problem = build_problem(config)?;
    run_on_problem(&problem, config, strategy)
}

/// Summary line for one requested strategy (random aggregates its sweep).
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub strategy: String,
    pub psnr: f64,
    pub ssim: f64,
    pub delta_psnr: Option<f64>,
    pub delta_ssim: Option<f64>,
    pub amplitude_psnr: Option<f64>,
    pub mean_iter_ms: f64,
    pub total_s: f64,
    pub runs: usize,
    pub failed: usize,
}

pub struct Comparison {
    pub config: ExperimentConfig,
    pub problem: ProblemSetup,
    /// Every executed run, including the per-candidate random sweep.
    pub runs: Vec<RunResult>,
    /// One row per requested strategy, in request order.
    pub rows: Vec<SummaryRow>,
}

/// Shared-measurement comparison across the configured strategies.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Comparison> {
    let config = config.clone().validated()?.resolved();
    let problem = build_problem(&config)?;
    let mut runs: Vec<RunResult> = Vec::new();
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();

    for name in &config.strategies {
        match parse_strategy_name(name)? {
            StrategyName::Random => {
                let mut idx = Vec::new();
                for k in 0..problem.set.len() {
                    runs.push(run_on_problem(&problem, &config, Strategy::RandomFixed(k))?);
                    idx.push(runs.len() - 1);
                }
                groups.push(("random".into(), idx));
            }
            other => {
                let strategy = match other {
                    StrategyName::Ma => Strategy::Ma,
                    StrategyName::Uniform => Strategy::Uniform,
                    StrategyName::Alternating => Strategy::Alternating,
                    StrategyName::Oracle => Strategy::Oracle,
                    StrategyName::Random => unreachable!(),
                };
                runs.push(run_on_problem(&problem, &config, strategy)?);
                groups.push((strategy.label(), vec![runs.len() - 1]));
            }
        }
    }

    let mut rows: Vec<SummaryRow> = Vec::new();
    for (name, idx) in &groups {
        let members: Vec<&RunResult> = idx.iter().map(|&i| &runs[i]).collect();
        let ok: Vec<&&RunResult> = members.iter().filter(|r| r.failed.is_none()).collect();
        let mean = |f: &dyn Fn(&RunResult) -> f64| -> f64 {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        let psnr = mean(&|r| r.report.as_ref().map_or(f64::NAN, |m| m.psnr));
        let ssim = mean(&|r| r.report.as_ref().map_or(f64::NAN, |m| m.ssim));
        let amplitude_psnr = if members.iter().any(|r| r.amplitude_psnr.is_some()) {
            Some(mean(&|r| r.amplitude_psnr.unwrap_or(f64::NAN)))
        } else {
            None
        };
        let total_ms: f64 = members.iter().map(|r| r.mean_iter_ms * r.records.len() as f64).sum();
        rows.push(SummaryRow {
            strategy: name.clone(),
            psnr,
            ssim,
            delta_psnr: None,
            delta_ssim: None,
            amplitude_psnr,
            mean_iter_ms: mean(&|r| r.mean_iter_ms),
            total_s: total_ms / 1000.0,
            runs: members.len(),
            failed: members.iter().filter(|r| r.failed.is_some()).count(),
        });
    }

    if let Some(oracle) = rows.iter().find(|r| r.strategy == "oracle").map(|r| (r.psnr, r.ssim)) {
        for row in rows.iter_mut() {
            row.delta_psnr = Some(oracle.0 - row.psnr);
            row.delta_ssim = Some(oracle.1 - row.ssim);
        }
    }

    Ok(Comparison { config, problem, runs, rows })
}

fn json_metric(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v.is_infinite() && v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!(null)
    }
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{:.6}", v)
    }
}

/// Writes summary.json, convergence.csv, weights.csv, and the PNGs.
pub fn write_outputs(cmp: &Comparison, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let rows: Vec<serde_json::Value> = cmp
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "strategy": r.strategy,
                "psnr": json_metric(r.psnr),
                "ssim": json_metric(r.ssim),
                "delta_psnr": r.delta_psnr.map(json_metric),
                "delta_ssim": r.delta_ssim.map(json_metric),
                "amplitude_psnr": r.amplitude_psnr.map(json_metric),
                "mean_iter_ms": r.mean_iter_ms,
                "total_s": r.total_s,
                "runs": r.runs,
                "failed": r.failed,
            })
        })
        .collect();
    let run_details: Vec<serde_json::Value> = cmp
        .runs
        .iter()
        .map(|r| {
            serde_json::json!({
                "label": r.label,
                "psnr": r.report.as_ref().map(|m| json_metric(m.psnr)),
                "ssim": r.report.as_ref().map(|m| json_metric(m.ssim)),
                "amplitude_psnr": r.amplitude_psnr.map(json_metric),
                "best_psnr": r.best.map(|(_, p)| json_metric(p)),
                "best_iteration": r.best.map(|(i, _)| i),
                "iterations": r.records.len(),
                "mean_iter_ms": r.mean_iter_ms,
                "failed": r.failed,
                "final_weights": r.final_weights,
            })
        })
        .collect();
    let summary = serde_json::json!({
        "config": cmp.config,
        "strategies": rows,
        "runs": run_details,
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;

    let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("convergence.csv"))?);
    writeln!(csv, "strategy,iteration,loss,f_min,f_oracle,omega_oracle,psnr,wall_ms")?;
    let oracle_index = cmp.problem.set.oracle_index();
    for run in &cmp.runs {
        for rec in &run.records {
            let f_min = rec.losses.iter().cloned().fold(f64::INFINITY, f64::min);
            writeln!(
                csv,
                "{},{},{:.9e},{:.9e},{:.9e},{:.9e},{},{:.3}",
                run.label,
                rec.iteration,
                rec.loss,
                f_min,
                rec.losses[oracle_index],
                rec.weights[oracle_index],
                fmt_metric(rec.psnr.unwrap_or(f64::NAN)),
                rec.wall_ms,
            )?;
        }
    }
    csv.flush()?;

    if let Some(ma_run) = cmp.runs.iter().find(|r| r.strategy == Strategy::Ma) {
        let mut wcsv = std::io::BufWriter::new(std::fs::File::create(dir.join("weights.csv"))?);
        let n = cmp.problem.set.len();
        let header: Vec<String> = (0..n).map(|i| format!("omega_{}", i)).collect();
        writeln!(wcsv, "iteration,{}", header.join(","))?;
        for rec in &ma_run.records {
            let ws: Vec<String> = rec.weights.iter().map(|w| format!("{:.12e}", w)).collect();
            writeln!(wcsv, "{},{}", rec.iteration, ws.join(","))?;
        }
        wcsv.flush()?;
    }

    dataio::save_png(cmp.problem.ground_truth_plane(), dir.join("ground_truth.png"))?;
    for run in &cmp.runs {
        let plane = cmp.problem.render_plane(&run.final_image)?;
        let name = format!("recon_{}.png", run.label.replace(['[', ']'], "_"));
        dataio::save_png(&plane, dir.join(name))?;
    }
    Ok(())
}

/// Plain-text comparison table for the CLI.
pub fn format_table(cmp: &Comparison) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>9} {:>8} {:>10} {:>10} {:>12}\n",
        "strategy", "psnr", "ssim", "d_psnr", "d_ssim", "iter_ms"
    ));
    for r in &cmp.rows {
        let d_psnr = r.delta_psnr.map_or("-".into(), |v| format!("{:.3}", v));
        let d_ssim = r.delta_ssim.map_or("-".into(), |v| format!("{:.3}", v));
        out.push_str(&format!(
            "{:<14} {:>9} {:>8.4} {:>10} {:>10} {:>12.3}\n",
            r.strategy,
            fmt_metric(r.psnr),
            r.ssim,
            d_psnr,
            d_ssim,
            r.mean_iter_ms
        ));
    }
    out
}
