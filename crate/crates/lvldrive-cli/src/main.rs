//! Command-line frontend: scene generation, QA generation, metric
//! evaluation, fusion verification, and the self-consistency pipeline.
//!
//! Diagnostics go to stderr; data outputs go to files only. Every output
//! file gets a sibling `<name>.manifest.json` recording the tool version,
//! a hash of the resolved configuration and inputs, and the seed. Exit
//! codes: 0 success, 1 validation or parse failure, 2 internal invariant
//! violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lvldrive::codec::{parse_waypoints, WaypointList};
use lvldrive::fusion::{
    self, cross_attend_forward, random_features, reference_grad_check, toy_fit, AttnParams,
    FusionModel, GateParams, ToyTask, TrainConfig,
};
use lvldrive::geom::{BevBox, CameraName, Polyline2D};
use lvldrive::metrics::{
    bleu4, cider, collision_rate, grounding_miou, intersection_rate, l2_displacement, rouge_l,
    GroundingSample, MetricsReport, PlanningSample, TextScores, DEFAULT_EGO_FOOTPRINT,
};
use lvldrive::pipeline::run_pipeline;
use lvldrive::qa::{
    generate_all, rasterize_overlays, write_jsonl, GenConfig, Image, QARecord, TaskCounts,
};
use lvldrive::scene::{generate_scene, load_scene, save_scene, RigPreset, SceneSpec};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "lvldrive", version, about = "Driving-scene QA toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthetic scene generation.
    Scene {
        #[command(subcommand)]
        cmd: SceneCmd,
    },
    /// Question-answer generation from a scene.
    Qa {
        #[command(subcommand)]
        cmd: QaCmd,
    },
    /// Metric evaluation over prediction files.
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
    },
    /// Fusion model verification and toy training.
    Fusion {
        #[command(subcommand)]
        cmd: FusionCmd,
    },
    /// End-to-end self-consistency run: scene, QA, oracle answers, scoring.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Generate a scene and write it as schema "lvl-scene/1" JSON.
    Gen(SceneGenArgs),
}

#[derive(Args)]
struct SceneGenArgs {
    /// Scene spec JSON; flags below are ignored when this is given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    #[arg(long, default_value_t = 12)]
    agents: usize,
    #[arg(long, default_value_t = 3)]
    lanes: usize,
    #[arg(long, default_value_t = 100.0)]
    extent: f64,
    #[arg(long, default_value_t = 0.5)]
    timestep: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum QaCmd {
    /// Generate QA records for a scene as "lvl-qa/1" JSONL.
    Gen(QaGenArgs),
}

#[derive(Args)]
struct QaGenArgs {
    /// Scene JSON produced by `scene gen`.
    #[arg(long)]
    scene: PathBuf,
    /// Generator config JSON; flags below are ignored when this is given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Records requested per task family.
    #[arg(long, default_value_t = 4)]
    per_task: usize,
    #[arg(long)]
    out: PathBuf,
    /// Directory for per-record overlay renders (P6 PPM).
    #[arg(long)]
    emit_images: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Open-loop planning metrics: L2, collision rate, intersection rate.
    Planning(EvalPlanningArgs),
    /// Distance-binned grounding mIoU.
    Grounding(EvalGroundingArgs),
    /// BLEU-4, ROUGE-L, CIDEr.
    Text(EvalTextArgs),
}

#[derive(Args)]
struct EvalPlanningArgs {
    /// Predictions JSONL: one {"id", "text"} object per line.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth JSON: list of planning samples keyed by id.
    #[arg(long)]
    gt: PathBuf,
    /// Drivable-area margin around lane centerlines, meters.
    #[arg(long, default_value_t = 1.75)]
    margin: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalGroundingArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth JSON: list of {"id", "gt": box, "gt_distance"}.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalTextArgs {
    #[arg(long)]
    pred: PathBuf,
    /// References JSON: list of {"id", "references": [..]}.
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FusionCmd {
    /// Run the gradient and gate verification suite; exit 0 iff all pass.
    Check(FusionCheckArgs),
    /// Fit the toy task and write the training report.
    ToyTrain(ToyTrainArgs),
}

#[derive(Args)]
struct FusionCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ToyTrainArgs {
    /// "point_exclusive" or "point_noise".
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.2)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    per_task: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Failure modes mapped to exit codes: Data -> 1, Internal -> 2.
#[derive(Debug)]
enum CliError {
    Data(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

fn data<E: std::fmt::Display>(ctx: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{ctx}: {e}"))
}

/// Writes bytes to `path` through a temp file in the same directory so a
/// failure never leaves a partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).map_err(data(&format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(data(&format!("renaming to {}", path.display())))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    config_hash: String,
    seed: u64,
}

/// Hash over the resolved configuration plus the raw bytes of every input
/// file, so the manifest hash changes iff any config or input byte does.
struct ConfigHash {
    h: Sha256,
}

impl ConfigHash {
    fn new(subcommand: &str) -> Self {
        let mut h = Sha256::new();
        h.update(subcommand.as_bytes());
        ConfigHash { h }
    }

    fn config<T: Serialize>(mut self, value: &T) -> Self {
        self.h.update(serde_json::to_vec(value).expect("config serializes"));
        self
    }

    fn input(mut self, path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(data(&format!("reading {}", path.display())))?;
        self.h.update(&bytes);
        Ok(self)
    }

    fn finish(self) -> String {
        let digest = self.h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn write_manifest(out: &Path, config_hash: String, seed: u64) -> Result<(), CliError> {
    let manifest = Manifest { tool_version: TOOL_VERSION, config_hash, seed };
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    let path = out.with_file_name(name);
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_atomic(&path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(data(&format!("reading {}", path.display())))?;
    serde_json::from_str(&text).map_err(data(&format!("parsing {}", path.display())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Prediction {
    id: String,
    text: String,
}

/// Reads predictions JSONL, skipping comment and blank lines. An empty
/// file is a data error: silently scoring nothing hides upstream failures.
fn read_predictions(path: &Path) -> Result<Vec<Prediction>, CliError> {
    let text = fs::read_to_string(path).map_err(data(&format!("reading {}", path.display())))?;
    let preds: Vec<Prediction> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| serde_json::from_str(l).map_err(data(&format!("parsing {}", path.display()))))
        .collect::<Result<_, _>>()?;
    if preds.is_empty() {
        return Err(CliError::Data(format!(
            "predictions file {} contains no records",
            path.display()
        )));
    }
    Ok(preds)
}

fn write_report(out: &Path, report: &MetricsReport) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    bytes.push(b'\n');
    write_atomic(out, &bytes)?;
    eprint!("{}", report.to_table());
    Ok(())
}

fn cmd_scene_gen(args: &SceneGenArgs) -> Result<(), CliError> {
    let spec: SceneSpec = match &args.spec {
        Some(path) => read_json(path)?,
        None => SceneSpec {
            seed: args.seed,
            n_frames: args.frames,
            n_agents: args.agents,
            n_lanes: args.lanes,
            map_extent: args.extent,
            rig: RigPreset::SurroundSix,
            timestep: args.timestep,
        },
    };
    let scene = generate_scene(&spec).map_err(data("generating scene"))?;
    let tmp = tmp_path(&args.out);
    save_scene(&scene, &tmp).map_err(data(&format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, &args.out)
        .map_err(data(&format!("renaming to {}", args.out.display())))?;
    let hash = ConfigHash::new("scene gen").config(&spec).finish();
    write_manifest(&args.out, hash, spec.seed)?;
    log::info!(
        "scene {} with {} frames written to {}",
        scene.scene_id,
        scene.frames.len(),
        args.out.display()
    );
    Ok(())
}

fn emit_images(dir: &Path, records: &[QARecord]) -> Result<usize, CliError> {
    fs::create_dir_all(dir).map_err(data(&format!("creating {}", dir.display())))?;
    let mut written = 0usize;
    for rec in records {
        let mut cameras: Vec<CameraName> = rec.overlays.iter().map(|o| o.camera).collect();
        cameras.sort_by_key(|c| c.as_str());
        cameras.dedup();
        for cam in cameras {
            let ops: Vec<_> = rec
                .overlays
                .iter()
                .filter(|o| o.camera == cam)
                .cloned()
                .collect();
            let img = rasterize_overlays(Image::filled(1600, 900, [96, 96, 96]), &ops);
            let mut bytes = Vec::new();
            img.write_ppm(&mut bytes).map_err(data("encoding ppm"))?;
            let path = dir.join(format!("{}_{}.ppm", rec.id, cam.as_str()));
            write_atomic(&path, &bytes)?;
            written += 1;
        }
    }
    Ok(written)
}

fn cmd_qa_gen(args: &QaGenArgs) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)
        .map_err(data(&format!("loading {}", args.scene.display())))?;
    let cfg: GenConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => GenConfig::with_seed(args.seed, TaskCounts::uniform(args.per_task)),
    };
    let records = generate_all(&scene, &cfg).map_err(data("generating qa"))?;
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, &records).map_err(data("encoding jsonl"))?;
    write_atomic(&args.out, &bytes)?;
    let hash = ConfigHash::new("qa gen")
        .config(&cfg)
        .input(&args.scene)?
        .finish();
    write_manifest(&args.out, hash, cfg.seed)?;
    if let Some(dir) = &args.emit_images {
        let n = emit_images(dir, &records)?;
        log::info!("{n} overlay images written to {}", dir.display());
    }
    log::info!("{} qa records written to {}", records.len(), args.out.display());
    Ok(())
}

/// One planning ground-truth entry; the prediction with the same id is
/// parsed from its answer text.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlanningGt {
    id: String,
    gt: WaypointList,
    #[serde(default)]
    agents_per_step: [Vec<BevBox>; 6],
    #[serde(default)]
    lanes: Vec<Polyline2D>,
    ego_footprint: Option<(f64, f64)>,
}

fn cmd_eval_planning(args: &EvalPlanningArgs) -> Result<(), CliError> {
    let preds = read_predictions(&args.pred)?;
    let gts: Vec<PlanningGt> = read_json(&args.gt)?;
    if gts.is_empty() {
        return Err(CliError::Data(format!(
            "ground-truth file {} contains no samples",
            args.gt.display()
        )));
    }
    let samples: Vec<PlanningSample> = gts
        .iter()
        .map(|g| {
            let pred = preds
                .iter()
                .find(|p| p.id == g.id)
                .and_then(|p| parse_waypoints(&p.text).ok());
            if pred.is_none() {
                log::warn!("no parseable prediction for sample {}", g.id);
            }
            PlanningSample {
                pred,
                gt: g.gt.clone(),
                agents_per_step: g.agents_per_step.clone(),
                lanes: g.lanes.clone(),
                ego_footprint: g.ego_footprint.unwrap_or(DEFAULT_EGO_FOOTPRINT),
            }
        })
        .collect();
    let report = MetricsReport {
        l2: Some(l2_displacement(&samples)),
        collision_rate: Some(collision_rate(&samples)),
        intersection_rate: Some(intersection_rate(&samples, args.margin)),
        ..Default::default()
    };
    write_report(&args.out, &report)?;
    let hash = ConfigHash::new("eval planning")
        .config(&args.margin)
        .input(&args.pred)?
        .input(&args.gt)?
        .finish();
    write_manifest(&args.out, hash, 0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GroundingGt {
    id: String,
    gt: BevBox,
    gt_distance: f64,
}

fn cmd_eval_grounding(args: &EvalGroundingArgs) -> Result<(), CliError> {
    let preds = read_predictions(&args.pred)?;
    let gts: Vec<GroundingGt> = read_json(&args.gt)?;
    let samples: Vec<GroundingSample> = gts
        .iter()
        .map(|g| {
            let text = preds
                .iter()
                .find(|p| p.id == g.id)
                .map(|p| p.text.clone())
                .unwrap_or_default();
            GroundingSample { predicted_text: text, gt: g.gt, gt_distance: g.gt_distance }
        })
        .collect();
    if samples.is_empty() {
        return Err(CliError::Data(format!(
            "ground-truth file {} contains no samples",
            args.gt.display()
        )));
    }
    let report = MetricsReport {
        grounding: Some(grounding_miou(&samples)),
        ..Default::default()
    };
    write_report(&args.out, &report)?;
    let hash = ConfigHash::new("eval grounding")
        .input(&args.pred)?
        .input(&args.gt)?
        .finish();
    write_manifest(&args.out, hash, 0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TextRefs {
    id: String,
    references: Vec<String>,
}

fn cmd_eval_text(args: &EvalTextArgs) -> Result<(), CliError> {
    let preds = read_predictions(&args.pred)?;
    let refs: Vec<TextRefs> = read_json(&args.refs)?;
    if refs.is_empty() {
        return Err(CliError::Data(format!(
            "reference file {} contains no entries",
            args.refs.display()
        )));
    }
    let mut candidates = Vec::with_capacity(refs.len());
    let mut references = Vec::with_capacity(refs.len());
    for r in &refs {
        let text = preds
            .iter()
            .find(|p| p.id == r.id)
            .map(|p| p.text.clone())
            .ok_or_else(|| {
                CliError::Data(format!("no prediction for reference id {}", r.id))
            })?;
        candidates.push(text);
        references.push(r.references.clone());
    }
    let report = MetricsReport {
        text: Some(TextScores {
            bleu4: bleu4(&candidates, &references),
            rouge_l: rouge_l(&candidates, &references),
            cider: cider(&candidates, &references),
        }),
        ..Default::default()
    };
    write_report(&args.out, &report)?;
    let hash = ConfigHash::new("eval text")
        .input(&args.pred)?
        .input(&args.refs)?
        .finish();
    write_manifest(&args.out, hash, 0)
}

/// Gate-zero bit-exactness on one random configuration: with every gate at
/// zero, the gated forward pass must equal the image-only pass bit for bit.
fn gate_zero_probe(seed: u64) -> Result<(), String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim_choices = [8usize, 16, 32];
    let c = dim_choices[rng.gen_range(0..dim_choices.len())];
    let heads = [1usize, 2, 4][rng.gen_range(0..3)];
    let n_l = rng.gen_range(1..6);
    let n_i = rng.gen_range(1..9);
    let n_p = rng.gen_range(1..7);
    let randm = |rng: &mut rand_chacha::ChaCha8Rng, r: usize, cc: usize| {
        fusion::Tensor2D::from_fn(r, cc, |_, _| rng.gen_range(-1.0..1.0))
    };
    let params = AttnParams {
        w_q: randm(&mut rng, c, c),
        w_k: randm(&mut rng, c, c),
        w_v: randm(&mut rng, c, c),
        w_o: randm(&mut rng, c, c),
        heads,
    };
    let l = randm(&mut rng, n_l, c);
    let pe_l = randm(&mut rng, n_l, c);
    let f_i = randm(&mut rng, n_i, c);
    let pe_i = randm(&mut rng, n_i, c);
    let f_p = randm(&mut rng, n_p, c);
    let pe_p = randm(&mut rng, n_p, c);
    let gates = GateParams::zeros(heads);
    let (gated, _) = cross_attend_forward(&l, &pe_l, &f_i, &pe_i, &f_p, &pe_p, &params, &gates)
        .map_err(|e| format!("seed {seed}: gated forward failed: {e}"))?;
    let empty = fusion::Tensor2D::zeros(0, c);
    let (image_only, _) =
        cross_attend_forward(&l, &pe_l, &f_i, &pe_i, &empty, &empty, &params, &gates)
            .map_err(|e| format!("seed {seed}: image-only forward failed: {e}"))?;
    for i in 0..n_l {
        for j in 0..c {
            let a = gated.at(i, j);
            let b = image_only.at(i, j);
            if a.to_bits() != b.to_bits() {
                return Err(format!(
                    "seed {seed}: output ({i},{j}) differs: {a:e} vs {b:e}"
                ));
            }
        }
    }
    Ok(())
}

fn cmd_fusion_check(args: &FusionCheckArgs) -> Result<(), CliError> {
    let mut failures = 0usize;
    let mut check = |name: &str, result: Result<String, String>| match result {
        Ok(detail) => eprintln!("ok - {name}: {detail}"),
        Err(msg) => {
            failures += 1;
            eprintln!("FAIL - {name}: {msg}");
        }
    };

    check("gate-zero bit-exactness (20 configs)", {
        let mut res = Ok("all outputs bit-identical".to_string());
        for s in 0..20 {
            if let Err(msg) = gate_zero_probe(args.seed.wrapping_add(s)) {
                res = Err(msg);
                break;
            }
        }
        res
    });

    check(
        "reference gradient check (C=16, H=4, 2 blocks)",
        match reference_grad_check() {
            Ok(err) if err < 1e-4 => Ok(format!("max relative error {err:.3e}")),
            Ok(err) => Err(format!("max relative error {err:.3e} >= 1e-4")),
            Err(e) => Err(e.to_string()),
        },
    );

    check("small-model gradient check (1 block, with memory)", {
        let model = FusionModel::new(8, 2, 1, 3, 1, args.seed).expect("valid config");
        let feats = random_features(&model, 4, 3, args.seed.wrapping_add(1));
        let memory = fusion::Tensor2D::from_fn(2, 8, |i, j| ((i * 8 + j) as f64) * 0.01 - 0.05);
        match fusion::residual_target(&model, &feats, &memory, 0.01, 77)
            .and_then(|target| fusion::numeric_grad_check(&model, &feats, &memory, &target, 1e-5))
        {
            Ok(err) if err < 1e-4 => Ok(format!("max relative error {err:.3e}")),
            Ok(err) => Err(format!("max relative error {err:.3e} >= 1e-4")),
            Err(e) => Err(e.to_string()),
        }
    });

    check("checkpoint roundtrip", {
        let model = FusionModel::new(16, 4, 2, 4, 2, args.seed).expect("valid config");
        let dir = std::env::temp_dir();
        let path = dir.join(format!("lvldrive-fusion-check-{}.json", std::process::id()));
        let res = (|| -> Result<String, String> {
            fusion::save_checkpoint(&model, &path).map_err(|e| e.to_string())?;
            let back = fusion::load_checkpoint(&path).map_err(|e| e.to_string())?;
            let a = model.to_flat();
            let b = back.to_flat();
            if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
                return Err("parameters differ after reload".to_string());
            }
            Ok(format!("{} parameters bit-identical", a.len()))
        })();
        let _ = fs::remove_file(&path);
        res
    });

    if failures > 0 {
        return Err(CliError::Internal(format!("{failures} fusion check(s) failed")));
    }
    Ok(())
}

fn cmd_toy_train(args: &ToyTrainArgs) -> Result<(), CliError> {
    let task: ToyTask = args
        .task
        .parse()
        .map_err(|_| CliError::Data(format!("unknown task {:?}", args.task)))?;
    let cfg = TrainConfig {
        steps: args.steps,
        lr: args.lr,
        seed: args.seed,
        batch: args.batch,
    };
    let report = toy_fit(task, &cfg).map_err(data("toy training"))?;
    let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    bytes.push(b'\n');
    write_atomic(&args.out, &bytes)?;
    let hash = ConfigHash::new("fusion toy-train").config(&cfg).config(&task).finish();
    write_manifest(&args.out, hash, args.seed)?;
    eprintln!(
        "task {}: loss {:.6} -> {:.6}, max |tanh(g)| {:.4}",
        args.task, report.initial_loss, report.final_loss, report.max_abs_gate_tanh
    );
    Ok(())
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    let report = run_pipeline(args.seed, args.per_task).map_err(data("pipeline"))?;
    let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    bytes.push(b'\n');
    write_atomic(&args.out, &bytes)?;
    let hash = ConfigHash::new("pipeline")
        .config(&(args.seed, args.per_task))
        .finish();
    write_manifest(&args.out, hash, args.seed)?;
    eprintln!(
        "{} records, {} grounding samples, mIoU {:.4}, BLEU-4 {:.4}",
        report.n_records, report.n_grounding, report.grounding_miou, report.bleu4
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Scene { cmd: SceneCmd::Gen(args) } => cmd_scene_gen(args),
        Cmd::Qa { cmd: QaCmd::Gen(args) } => cmd_qa_gen(args),
        Cmd::Eval { cmd: EvalCmd::Planning(args) } => cmd_eval_planning(args),
        Cmd::Eval { cmd: EvalCmd::Grounding(args) } => cmd_eval_grounding(args),
        Cmd::Eval { cmd: EvalCmd::Text(args) } => cmd_eval_text(args),
        Cmd::Fusion { cmd: FusionCmd::Check(args) } => cmd_fusion_check(args),
        Cmd::Fusion { cmd: FusionCmd::ToyTrain(args) } => cmd_toy_train(args),
        Cmd::Pipeline(args) => cmd_pipeline(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LVL_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Data(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e @ CliError::Internal(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
