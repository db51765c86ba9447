//! Command-line pipeline for articulated-object models: dataset generation,
//! training, code recovery, rendering, meshing, latent edits, and metrics.
//!
//! Every subcommand is non-interactive: results go to stdout, logs and the
//! echoed resolved configuration go to stderr, and the resolved configuration
//! is also written next to each output artifact for provenance.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
//! failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use artsdf::fields::{CodeBook, LatentCode, Variant};
use artsdf::geom::{
    chamfer_l1, marching_cubes, measure_opening_angle, psnr, read_obj, sample_mesh_points,
    write_obj, CHAMFER_SAMPLES, MESH_BOUNDS,
};
use artsdf::inference::{
    checkpoint_train_config, load_views_dir, recover_codes, test_time_adapt, InferConfig,
};
use artsdf::io::camera_manifest::read_cameras;
use artsdf::io::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use artsdf::io::codes::{load_codes, save_codes, CodesFile};
use artsdf::io::config::Kv;
use artsdf::io::dataset::DatasetIndex;
use artsdf::io::ppm::{read_ppm, write_pgm, write_ppm};
use artsdf::latents::{animate, lerp_codes, swap_codes, AnimateOptions, SwapKind};
use artsdf::renderer::{render_image, FieldRenderer};
use artsdf::scenegen::cameras::Camera;
use artsdf::scenegen::export::{export_dataset, ExportConfig};
use artsdf::scenegen::{build_scene, Joint, SceneKind};
use artsdf::trainer::{state_key, LoadedDataset, TrainConfig, Trainer, LOG_HEADER};
use artsdf::{fields::CodeSet, Error, Result};

#[derive(Parser)]
#[command(
    name = "artsdf",
    version,
    about = "Disentangled shape/appearance/articulation models of articulated objects"
)]
struct Cli {
    /// Worker threads for rendering and training (default: all cores; 1
    /// guarantees bit-reproducible output).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a procedural articulated-object dataset.
    GenData(GenDataArgs),
    /// Train a model on a generated dataset.
    Train(TrainArgs),
    /// Recover latent codes for an unseen object from posed views.
    Infer(InferArgs),
    /// Render one view of a code set through a trained model.
    Render(RenderArgs),
    /// Extract a triangle mesh of a code set's geometry.
    Mesh(MeshArgs),
    /// Interpolate (or extrapolate) between two code files.
    Interp(InterpArgs),
    /// Replace one component of a code file with another's.
    Swap(SwapArgs),
    /// Render a fixed object under a sequence of trained articulations.
    Animate(AnimateArgs),
    /// Metrics on meshes and images.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Args)]
struct GenDataArgs {
    /// Scene category: laptop, drawer, or cabinet.
    #[arg(long)]
    scene: String,
    /// Total instances, including held-out ones.
    #[arg(long, default_value_t = 2)]
    instances: usize,
    /// Articulation states per instance.
    #[arg(long, default_value_t = 3)]
    states: usize,
    /// Training views per state (1..=60).
    #[arg(long, default_value_t = 12)]
    views: usize,
    /// Image size as WxH.
    #[arg(long, default_value = "64x48")]
    res: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; the dataset lands in OUT/<scene>/.
    #[arg(long)]
    out: PathBuf,
    /// How many trailing instances get test views instead of training views.
    #[arg(long, default_value_t = 0)]
    holdout: usize,
    /// Test views per state for held-out instances (1..=6).
    #[arg(long, default_value_t = 4)]
    test_views: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset root (the directory holding manifest.txt).
    #[arg(long)]
    data: PathBuf,
    /// Model variant: base, art, def, or artdef.
    #[arg(long)]
    variant: String,
    /// Training iterations (overrides the config file).
    #[arg(long)]
    iters: Option<u64>,
    /// Training seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Pixels per batch (overrides the config file).
    #[arg(long)]
    batch: Option<usize>,
    /// Flat key-value config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Log a progress line every N iterations.
    #[arg(long)]
    log_every: Option<u64>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Directory of posed views (a dataset state directory works directly).
    #[arg(long)]
    views: PathBuf,
    /// Code-recovery iterations.
    #[arg(long, default_value_t = 600)]
    iters: u64,
    /// Codes output path.
    #[arg(long)]
    out: PathBuf,
    /// Also fine-tune the network weights on these views afterwards.
    #[arg(long)]
    tta: bool,
    /// Test-time adaptation iterations.
    #[arg(long, default_value_t = 600)]
    tta_iters: u64,
    /// Adapted checkpoint output path (default: <out>.tta.ckpt).
    #[arg(long)]
    tta_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pixels per optimization batch.
    #[arg(long, default_value_t = 96)]
    batch: usize,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    codes: PathBuf,
    /// Camera manifest; the first camera is used.
    #[arg(long)]
    camera: PathBuf,
    /// Output image (binary PPM).
    #[arg(long)]
    out: PathBuf,
    /// Also write the soft foreground mask here (binary PGM).
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// Instance id inside the codes file (default: its only entry).
    #[arg(long)]
    instance: Option<String>,
    /// State id inside the codes file (default: its only entry).
    #[arg(long)]
    state: Option<String>,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    codes: PathBuf,
    /// Marching-cubes grid resolution per axis.
    #[arg(long, default_value_t = 128)]
    res: usize,
    /// Output mesh (OBJ).
    #[arg(long)]
    out: PathBuf,
    /// Instance id inside the codes file (default: its only entry).
    #[arg(long)]
    instance: Option<String>,
    /// State id inside the codes file (default: its only entry).
    #[arg(long)]
    state: Option<String>,
}

#[derive(Args)]
struct InterpArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    codes_a: PathBuf,
    #[arg(long)]
    codes_b: PathBuf,
    /// Blend parameter: 0 gives A, 1 gives B, outside [0,1] extrapolates.
    #[arg(long)]
    t: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SwapArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    codes_a: PathBuf,
    #[arg(long)]
    codes_b: PathBuf,
    /// Component taken from B: shape, appearance, or articulation.
    #[arg(long)]
    which: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnimateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Codes providing the shape and appearance to animate.
    #[arg(long)]
    codes: PathBuf,
    /// Trained states to play, e.g. "0..4" (inclusive), "3", or "0,2,4".
    #[arg(long)]
    states: String,
    /// Camera manifest: one camera (static) or one per frame.
    #[arg(long)]
    camera: PathBuf,
    /// Animate from this single camera of the manifest instead of all.
    #[arg(long)]
    camera_index: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also extract a mesh per frame at this marching-cubes resolution.
    #[arg(long)]
    mesh_res: Option<usize>,
    /// Instance whose trained articulation codes drive the motion (only
    /// meaningful for variants without articulation-code sharing).
    #[arg(long, default_value = "instance_000")]
    donor_instance: String,
    /// Instance id inside the codes file (default: its only entry).
    #[arg(long)]
    instance: Option<String>,
    /// State id inside the codes file (default: its only entry).
    #[arg(long)]
    state: Option<String>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Chamfer-L1 distance between surface samples of two meshes.
    Chamfer(ChamferArgs),
    /// Peak signal-to-noise ratio between two images.
    Psnr(PsnrArgs),
    /// Opening angle of a hinged mesh about the scene's revolute joint.
    Angle(AngleArgs),
}

#[derive(Args)]
struct ChamferArgs {
    #[arg(long)]
    mesh_a: PathBuf,
    #[arg(long)]
    mesh_b: PathBuf,
    /// Surface samples per mesh.
    #[arg(long, default_value_t = CHAMFER_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PsnrArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct AngleArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Scene category whose joint defines the hinge axis.
    #[arg(long)]
    scene: String,
    /// Seed the scene was generated with.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance index within the generated category.
    #[arg(long, default_value_t = 0)]
    instance: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 usage, 2 data/format, 3 numerical.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::UnknownScene(_) => 1,
        Error::NonFiniteLoss { .. }
        | Error::NonFiniteGradient { .. }
        | Error::Degenerate { .. }
        | Error::NonScalarRoot { .. } => 3,
        _ => 2,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Render(a) => cmd_render(a),
        Command::Mesh(a) => cmd_mesh(a),
        Command::Interp(a) => cmd_interp(a),
        Command::Swap(a) => cmd_swap(a),
        Command::Animate(a) => cmd_animate(a),
        Command::Eval(EvalCommand::Chamfer(a)) => cmd_eval_chamfer(a),
        Command::Eval(EvalCommand::Psnr(a)) => cmd_eval_psnr(a),
        Command::Eval(EvalCommand::Angle(a)) => cmd_eval_angle(a),
    }
}

// ---------------------------------------------------------------- helpers

/// Echo the resolved configuration to stderr (logs channel).
fn echo_config(kv: &Kv) {
    eprintln!("resolved config:");
    for (k, v) in kv.iter() {
        eprintln!("  {k} = {v}");
    }
}

/// Write the resolved configuration next to an output artifact:
/// `<dir>/run.config` for directories, `<file>.config` otherwise.
fn write_sidecar(artifact: &Path, kv: &Kv) -> Result<()> {
    let path = if artifact.is_dir() {
        artifact.join("run.config")
    } else {
        let mut name = artifact
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        name.push_str(".config");
        artifact.with_file_name(name)
    };
    kv.write_file(&path)
}

fn create_parent_dirs(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(())
}

fn parse_res(res: &str) -> Result<(u32, u32)> {
    let bad = || Error::InvalidConfig(format!("--res wants WxH (e.g. 64x48), got {res:?}"));
    let (w, h) = res.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        w.trim().parse().map_err(|_| bad())?,
        h.trim().parse().map_err(|_| bad())?,
    ))
}

/// States list: comma-separated indices or inclusive `a..b` ranges.
fn parse_states(text: &str) -> Result<Vec<usize>> {
    let bad =
        |t: &str| Error::InvalidConfig(format!("bad state selector {t:?} (use e.g. 0..4 or 1,3)"));
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if let Some((a, b)) = item.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad(item))?;
            let b: usize = b.trim().parse().map_err(|_| bad(item))?;
            if a > b {
                return Err(bad(item));
            }
            out.extend(a..=b);
        } else {
            out.push(item.parse().map_err(|_| bad(item))?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("--states selected nothing".into()));
    }
    Ok(out)
}

fn sole_key(map: &BTreeMap<String, LatentCode>, table: &str) -> Result<String> {
    let mut keys = map.keys();
    match (keys.next(), keys.next()) {
        (Some(k), None) => Ok(k.clone()),
        _ => Err(Error::InvalidConfig(format!(
            "codes file holds {} {table} codes ({}); pass --instance/--state to pick one",
            map.len(),
            map.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Pull one (shape, appearance, articulation) triple out of a codes file.
/// Without explicit ids this requires the file to be unambiguous, which
/// holds for everything `infer`, `interp`, and `swap` write.
fn pick_code_set(file: &CodesFile, instance: Option<&str>, state: Option<&str>) -> Result<CodeSet> {
    let instance = match instance {
        Some(s) => s.to_string(),
        None => sole_key(&file.codes.shape, "shape")?,
    };
    let state = match state {
        Some(s) => s.to_string(),
        None => {
            let key = sole_key(&file.codes.articulation, "articulation")?;
            key.strip_prefix(&format!("{instance}/"))
                .unwrap_or(&key)
                .to_string()
        }
    };
    CodeSet::from_codebook(&file.codes, file.variant, &instance, &state)
}

fn require_same_variant(what: &str, expected: Variant, found: Variant) -> Result<()> {
    if expected != found {
        return Err(Error::VariantMismatch {
            detail: format!(
                "{what}: expected variant {}, found {}",
                expected.as_str(),
                found.as_str()
            ),
        });
    }
    Ok(())
}

fn checkpoint_variant(ckpt: &Checkpoint) -> Result<Variant> {
    Ok(checkpoint_train_config(ckpt)?.model.variant)
}

/// Codes-file wrapper used by every subcommand that emits a single triple.
fn single_set_file(variant: Variant, set: &CodeSet) -> CodesFile {
    CodesFile {
        variant,
        codes: set.to_codebook(variant, "target", "state_000"),
    }
}

// ------------------------------------------------------------- subcommands

fn cmd_gen_data(a: GenDataArgs) -> Result<()> {
    let kind = SceneKind::parse(&a.scene)?;
    let (width, height) = parse_res(&a.res)?;
    let mut cfg = ExportConfig::new(kind);
    cfg.instances = a.instances;
    cfg.holdout = a.holdout;
    cfg.states = a.states;
    cfg.train_views = a.views;
    cfg.test_views = a.test_views;
    cfg.width = width;
    cfg.height = height;
    cfg.seed = a.seed;

    let mut kv = Kv::new();
    kv.set("command", "gen-data");
    kv.set("scene", kind.as_str());
    kv.set("instances", cfg.instances);
    kv.set("holdout", cfg.holdout);
    kv.set("states", cfg.states);
    kv.set("views", cfg.train_views);
    kv.set("test_views", cfg.test_views);
    kv.set("width", cfg.width);
    kv.set("height", cfg.height);
    kv.set("seed", cfg.seed);
    kv.set("out", a.out.display());
    echo_config(&kv);

    let index = export_dataset(&cfg, &a.out)?;
    write_sidecar(&index.root, &kv)?;
    println!("{}", index.root.display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let variant = Variant::parse(&a.variant)?;
    let mut kv = TrainConfig::desk(variant).to_kv();
    if let Some(path) = &a.config {
        kv = kv.overlaid_with(&Kv::read_file(path)?);
    }
    kv.set("variant", variant.as_str());
    if let Some(iters) = a.iters {
        kv.set("total_iters", iters);
    }
    if let Some(seed) = a.seed {
        kv.set("seed", seed);
    }
    if let Some(batch) = a.batch {
        kv.set("pixel_batch", batch);
    }
    let config = TrainConfig::from_kv(&kv)?;
    let kv = config.to_kv();
    echo_config(&kv);

    let index = DatasetIndex::load(&a.data)?;
    let data = LoadedDataset::from_index(&index)?;
    eprintln!(
        "dataset: {} ({} instances x {} states, {} views)",
        data.category,
        data.instances.len(),
        data.n_states,
        data.n_views_total()
    );

    let total = config.total_iters;
    let log_every = a.log_every.unwrap_or_else(|| (total / 100).max(1));
    let mut trainer = Trainer::new(config, data)?;
    eprintln!("{LOG_HEADER}");
    trainer.run(total, |report| {
        if report.iter % log_every == 0 || report.iter + 1 == total {
            eprintln!("{}", report.log_line());
        }
    })?;

    create_parent_dirs(&a.out)?;
    save_checkpoint(&a.out, &trainer.checkpoint())?;
    write_sidecar(&a.out, &kv)?;
    println!("{}", a.out.display());
    Ok(())
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let variant = checkpoint_variant(&ckpt)?;
    let views = load_views_dir(&a.views)?;

    let mut cfg = InferConfig::recover(a.seed);
    cfg.iters = a.iters;
    cfg.pixel_batch = a.batch;
    let mut kv = cfg.to_kv();
    kv.set("command", "infer");
    kv.set("ckpt", a.ckpt.display());
    kv.set("views", a.views.display());
    kv.set("tta", a.tta);
    if a.tta {
        kv.set("tta_iters", a.tta_iters);
    }
    echo_config(&kv);
    eprintln!("recovering codes from {} views", views.len());

    let log = |reports: &[artsdf::trainer::StepReport]| {
        for r in reports {
            if r.iter % 100 == 0 || r.iter + 1 == reports.len() as u64 {
                eprintln!("{}", r.log_line());
            }
        }
    };
    eprintln!("{LOG_HEADER}");
    let outcome = recover_codes(&ckpt, &views, &cfg)?;
    log(&outcome.reports);
    let mut codes = outcome.codes;

    if a.tta {
        let mut acfg = InferConfig::adapt(a.seed);
        acfg.iters = a.tta_iters;
        acfg.pixel_batch = a.batch;
        eprintln!("adapting weights for {} iterations", acfg.iters);
        let (adapted, outcome) = test_time_adapt(&ckpt, &views, &codes, &acfg)?;
        log(&outcome.reports);
        codes = outcome.codes;
        let tta_out = a.tta_out.clone().unwrap_or_else(|| {
            let mut name = a
                .out
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            name.push_str(".tta.ckpt");
            a.out.with_file_name(name)
        });
        create_parent_dirs(&tta_out)?;
        save_checkpoint(&tta_out, &adapted)?;
        eprintln!("adapted checkpoint: {}", tta_out.display());
    }

    create_parent_dirs(&a.out)?;
    save_codes(&a.out, &single_set_file(variant, &codes))?;
    write_sidecar(&a.out, &kv)?;
    println!("{}", a.out.display());
    Ok(())
}

fn render_setup(
    ckpt_path: &Path,
    codes_path: &Path,
    instance: Option<&str>,
    state: Option<&str>,
) -> Result<(Checkpoint, CodeSet)> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let variant = checkpoint_variant(&ckpt)?;
    let file = load_codes(codes_path)?;
    require_same_variant("codes file vs checkpoint", variant, file.variant)?;
    let set = pick_code_set(&file, instance, state)?;
    Ok((ckpt, set))
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let (ckpt, set) = render_setup(&a.ckpt, &a.codes, a.instance.as_deref(), a.state.as_deref())?;
    let cameras = read_cameras(&a.camera)?;
    let camera = cameras
        .first()
        .ok_or_else(|| Error::parse(&a.camera, "camera file lists no cameras"))?;

    let cfg = checkpoint_train_config(&ckpt)?;
    let alpha = artsdf::trainer::alpha_at(u64::MAX, &cfg);
    let mut kv = Kv::new();
    kv.set("command", "render");
    kv.set("ckpt", a.ckpt.display());
    kv.set("codes", a.codes.display());
    kv.set("camera", camera_line(&camera.camera));
    kv.set("alpha", alpha);
    kv.set("n_ray_samples", cfg.n_ray_samples);
    kv.set("scene_bound_radius", cfg.scene_bound_radius);
    echo_config(&kv);

    let renderer = FieldRenderer::new(&ckpt.model, &set.shape, &set.appearance, &set.articulation)?;
    let (image, soft_mask) = render_image(&renderer, &camera.camera, &cfg.settings(), alpha)?;
    create_parent_dirs(&a.out)?;
    write_ppm(&a.out, &image)?;
    if let Some(mask_out) = &a.mask_out {
        create_parent_dirs(mask_out)?;
        write_pgm(mask_out, &soft_mask.threshold(0.5))?;
    }
    write_sidecar(&a.out, &kv)?;
    println!("{}", a.out.display());
    Ok(())
}

fn camera_line(cam: &Camera) -> String {
    let p = cam.position();
    format!(
        "{}x{} at ({:.3}, {:.3}, {:.3})",
        cam.intrinsics.width, cam.intrinsics.height, p[0], p[1], p[2],
    )
}

fn cmd_mesh(a: MeshArgs) -> Result<()> {
    let (ckpt, set) = render_setup(&a.ckpt, &a.codes, a.instance.as_deref(), a.state.as_deref())?;
    let mut kv = Kv::new();
    kv.set("command", "mesh");
    kv.set("ckpt", a.ckpt.display());
    kv.set("codes", a.codes.display());
    kv.set("res", a.res);
    echo_config(&kv);

    let mut field = ckpt.model.freeze_geometry(&set.shape, &set.articulation)?;
    let (lo, hi) = MESH_BOUNDS;
    let mesh = marching_cubes(|p| field.value(p), a.res, lo, hi)?;
    create_parent_dirs(&a.out)?;
    write_obj(&a.out, &mesh)?;
    write_sidecar(&a.out, &kv)?;
    println!(
        "{} ({} vertices, {} triangles)",
        a.out.display(),
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    Ok(())
}

fn load_pair(
    ckpt_path: &Path,
    a_path: &Path,
    b_path: &Path,
) -> Result<(Variant, CodeSet, CodeSet)> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let variant = checkpoint_variant(&ckpt)?;
    let file_a = load_codes(a_path)?;
    let file_b = load_codes(b_path)?;
    require_same_variant("codes A vs checkpoint", variant, file_a.variant)?;
    require_same_variant("codes B vs checkpoint", variant, file_b.variant)?;
    Ok((
        variant,
        pick_code_set(&file_a, None, None)?,
        pick_code_set(&file_b, None, None)?,
    ))
}

fn cmd_interp(a: InterpArgs) -> Result<()> {
    let (variant, set_a, set_b) = load_pair(&a.ckpt, &a.codes_a, &a.codes_b)?;
    let mut kv = Kv::new();
    kv.set("command", "interp");
    kv.set("codes_a", a.codes_a.display());
    kv.set("codes_b", a.codes_b.display());
    kv.set("t", a.t);
    echo_config(&kv);

    let out = lerp_codes(&set_a, &set_b, a.t)?;
    create_parent_dirs(&a.out)?;
    save_codes(&a.out, &single_set_file(variant, &out))?;
    write_sidecar(&a.out, &kv)?;
    println!("{}", a.out.display());
    Ok(())
}

fn cmd_swap(a: SwapArgs) -> Result<()> {
    let which = SwapKind::parse(&a.which)?;
    let (variant, set_a, set_b) = load_pair(&a.ckpt, &a.codes_a, &a.codes_b)?;
    let mut kv = Kv::new();
    kv.set("command", "swap");
    kv.set("codes_a", a.codes_a.display());
    kv.set("codes_b", a.codes_b.display());
    kv.set("which", which.as_str());
    echo_config(&kv);

    let out = swap_codes(&set_a, &set_b, which);
    create_parent_dirs(&a.out)?;
    save_codes(&a.out, &single_set_file(variant, &out))?;
    write_sidecar(&a.out, &kv)?;
    println!("{}", a.out.display());
    Ok(())
}

fn cmd_animate(a: AnimateArgs) -> Result<()> {
    let (ckpt, set) = render_setup(&a.ckpt, &a.codes, a.instance.as_deref(), a.state.as_deref())?;
    let variant = checkpoint_variant(&ckpt)?;
    let states = parse_states(&a.states)?;

    let mut psis = Vec::with_capacity(states.len());
    for &j in &states {
        let key = CodeBook::articulation_key(variant, &a.donor_instance, &state_key(j));
        let psi = ckpt
            .codes
            .articulation
            .get(&key)
            .ok_or_else(|| Error::UnknownCode {
                table: "articulation".into(),
                id: key.clone(),
            })?;
        psis.push(psi.clone());
    }
    let mut cameras: Vec<Camera> = read_cameras(&a.camera)?
        .into_iter()
        .map(|named| named.camera)
        .collect();
    if let Some(index) = a.camera_index {
        if index >= cameras.len() {
            return Err(Error::InvalidConfig(format!(
                "--camera-index {index} out of range; the manifest lists {} cameras",
                cameras.len()
            )));
        }
        cameras = vec![cameras.swap_remove(index)];
    }

    let mut kv = Kv::new();
    kv.set("command", "animate");
    kv.set("ckpt", a.ckpt.display());
    kv.set("codes", a.codes.display());
    kv.set(
        "states",
        states
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    kv.set("cameras", cameras.len());
    if let Some(res) = a.mesh_res {
        kv.set("mesh_res", res);
    }
    echo_config(&kv);

    let opts = AnimateOptions {
        alpha: None,
        mesh_resolution: a.mesh_res,
    };
    let frames = animate(&ckpt, &set.shape, &set.appearance, &psis, &cameras, &opts)?;

    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    for (k, frame) in frames.iter().enumerate() {
        write_ppm(&a.out_dir.join(format!("frame_{k:03}.ppm")), &frame.image)?;
        if let Some(mesh) = &frame.mesh {
            write_obj(&a.out_dir.join(format!("frame_{k:03}.obj")), mesh)?;
        }
    }
    write_sidecar(&a.out_dir, &kv)?;
    println!("{} frames in {}", frames.len(), a.out_dir.display());
    Ok(())
}

fn cmd_eval_chamfer(a: ChamferArgs) -> Result<()> {
    let mut kv = Kv::new();
    kv.set("command", "eval chamfer");
    kv.set("mesh_a", a.mesh_a.display());
    kv.set("mesh_b", a.mesh_b.display());
    kv.set("samples", a.samples);
    kv.set("seed", a.seed);
    echo_config(&kv);

    let mesh_a = read_obj(&a.mesh_a)?;
    let mesh_b = read_obj(&a.mesh_b)?;
    let pts_a = sample_mesh_points(&mesh_a, a.samples, a.seed)?;
    let pts_b = sample_mesh_points(&mesh_b, a.samples, a.seed.wrapping_add(1))?;
    println!("{}", chamfer_l1(&pts_a, &pts_b)?);
    Ok(())
}

fn cmd_eval_psnr(a: PsnrArgs) -> Result<()> {
    let mut kv = Kv::new();
    kv.set("command", "eval psnr");
    kv.set("a", a.a.display());
    kv.set("b", a.b.display());
    echo_config(&kv);

    let value = psnr(&read_ppm(&a.a)?, &read_ppm(&a.b)?)?;
    if value.is_infinite() {
        println!("+inf");
    } else {
        println!("{value}");
    }
    Ok(())
}

fn cmd_eval_angle(a: AngleArgs) -> Result<()> {
    let kind = SceneKind::parse(&a.scene)?;
    let mut kv = Kv::new();
    kv.set("command", "eval angle");
    kv.set("mesh", a.mesh.display());
    kv.set("scene", kind.as_str());
    kv.set("seed", a.seed);
    kv.set("instance", a.instance);
    echo_config(&kv);

    let scene = build_scene(kind, a.seed, a.instance);
    let (axis, pivot) = scene
        .parts
        .iter()
        .find_map(|part| match part.joint {
            Joint::Revolute { axis, pivot } => Some((axis, pivot)),
            _ => None,
        })
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "scene {} has no revolute joint to measure against",
                kind.as_str()
            ))
        })?;

    let mesh = read_obj(&a.mesh)?;
    let angle = measure_opening_angle(&mesh, axis, pivot)?;
    if !angle.confident {
        eprintln!("warning: low-confidence angle (shape barely opened or degenerate)");
    }
    println!("{}", angle.degrees);
    Ok(())
}
