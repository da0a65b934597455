//! `gsfill`: remove, inpaint and evaluate Gaussian-splat scenes.
//!
//! Exit codes: 0 success, 1 user error (bad arguments or inputs), 2 a
//! pipeline stage failed.

mod refs;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gsfill_core::camera::load_cameras_auto;
use gsfill_core::depth::{serve_backend, HaarCodec, LatentCodec, Role, Tensor3, LATENT_CHANNELS};
use gsfill_core::pipeline::{
    evaluate_views, inpaint_single_view, progressive_inpaint, render_options, BackendKind, HeldOutView,
    InpaintConfig, ReferenceView,
};
use gsfill_core::removal::remove_masked_gaussians;
use gsfill_core::render::render_with;
use gsfill_core::{dilate_mask, load_scene_ply, save_scene_ply, CameraPose, ColorImage, Error, MaskImage};

#[derive(Debug, Parser)]
#[command(name = "gsfill", version, about = "Depth-guided inpainting of Gaussian-splat scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Backend {
    Harmonic,
    Diffusion,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Color,
    Depth,
    Alpha,
}

/// Options shared by the commands that run the pipeline.
#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML run configuration; unset keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `backend.kind` from the configuration.
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Optimize only the newly merged Gaussians during fine-tuning.
    #[arg(long)]
    freeze_original: bool,
    /// Overrides `finetune_iters` from the configuration.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drop Gaussians that project into the masked regions.
    Remove {
        #[arg(long)]
        scene: PathBuf,
        /// JSON camera file or COLMAP text directory.
        #[arg(long)]
        cameras: PathBuf,
        /// Directory of `<view>.png` masks; views without a file are skipped.
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of seeing views that must vote for removal.
        #[arg(long)]
        threshold: Option<f64>,
        /// Mask dilation radius in pixels; defaults to the configured radius.
        #[arg(long)]
        dilation: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Inpaint from one reference view.
    Inpaint {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// Reference view name or index.
        #[arg(long)]
        ref_view: String,
        #[arg(long)]
        mask: PathBuf,
        /// Already-inpainted color image of the reference view.
        #[arg(long)]
        ref_image: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        /// Write the step report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Inpaint from an ordered list of reference views.
    Progressive {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// TOML file with `[[ref]]` entries of `view`, `mask` and `image`.
        #[arg(long)]
        refs: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Masked PSNR and SSIM against held-out views.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// Directory of `<view>.png` images and optional `<view>_mask.png`.
        #[arg(long)]
        heldout: PathBuf,
        /// Write the table as JSON instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one view.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        view: String,
        #[arg(long, value_enum, default_value = "color")]
        mode: Mode,
        #[arg(long)]
        config: Option<PathBuf>,
        /// PNG for color and alpha, float TIFF for depth.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the local HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8917")]
        addr: SocketAddr,
    },
    /// Speak the external backend protocol on stdin/stdout with the
    /// built-in Haar codec and a zero denoiser.
    Backend,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gsfill: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { .. }
        | Error::DegenerateDepth(_)
        | Error::EmptyResult(_)
        | Error::Backend(_)
        | Error::OptimizationDiverged { .. } => 2,
        _ => 1,
    }
}

fn load_config(path: Option<&Path>) -> gsfill_core::Result<InpaintConfig> {
    match path {
        Some(p) => InpaintConfig::load(p),
        None => Ok(InpaintConfig::default()),
    }
}

fn run_config(run: &RunArgs) -> gsfill_core::Result<InpaintConfig> {
    let mut cfg = load_config(run.config.as_deref())?;
    if let Some(b) = run.backend {
        cfg.backend.kind = match b {
            Backend::Harmonic => BackendKind::Harmonic,
            Backend::Diffusion => BackendKind::Diffusion,
        };
    }
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    if let Some(n) = run.iterations {
        cfg.finetune_iters = n;
    }
    cfg.freeze_original |= run.freeze_original;
    cfg.validate()?;
    Ok(cfg)
}

/// Finds a view by name, falling back to its index.
fn find_view<'a>(cameras: &'a [CameraPose], view: &str) -> gsfill_core::Result<&'a CameraPose> {
    cameras
        .iter()
        .find(|c| c.name == view)
        .or_else(|| view.parse::<usize>().ok().and_then(|i| cameras.get(i)))
        .ok_or_else(|| Error::InvalidArgument(format!("no view `{view}` in the camera file")))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> gsfill_core::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn run(command: Command) -> gsfill_core::Result<()> {
    match command {
        Command::Remove {
            scene,
            cameras,
            masks,
            out,
            threshold,
            dilation,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let scene = load_scene_ply(&scene)?;
            let cameras = load_cameras_auto(&cameras)?;
            let radius = dilation.unwrap_or(cfg.dilation_radius);
            let mut views = Vec::new();
            for pose in cameras {
                let path = masks.join(format!("{}.png", pose.name));
                if path.is_file() {
                    let mask = dilate_mask(&MaskImage::load_png(&path)?, radius);
                    views.push((pose, mask));
                }
            }
            if views.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "no `<view>.png` masks in {}",
                    masks.display()
                )));
            }
            let (kept, removed) =
                remove_masked_gaussians(&scene, &views, threshold.unwrap_or(cfg.vote_threshold))?;
            save_scene_ply(&kept, &out)?;
            println!("removed {removed} of {} Gaussians using {} views", scene.len(), views.len());
        }
        Command::Inpaint {
            scene,
            cameras,
            ref_view,
            mask,
            ref_image,
            run,
            out,
            report,
        } => {
            let cfg = run_config(&run)?;
            let scene = load_scene_ply(&scene)?;
            let cameras = load_cameras_auto(&cameras)?;
            let reference = ReferenceView {
                pose: find_view(&cameras, &ref_view)?.clone(),
                mask: MaskImage::load_png(&mask)?,
                image: ColorImage::load_png(&ref_image)?,
            };
            let mut backend = cfg.build_backend()?;
            let (result, rep) = inpaint_single_view(&scene, &reference, &cfg, &mut backend)?;
            save_scene_ply(&result, &out)?;
            if let Some(path) = report {
                write_json(&path, &rep)?;
            }
            println!(
                "{} -> {} Gaussians, final loss {}",
                rep.gaussians_before,
                rep.gaussians_after,
                rep.final_loss().map_or("n/a".into(), |l| format!("{l:.6}"))
            );
        }
        Command::Progressive {
            scene,
            cameras,
            refs,
            run,
            out,
            report,
        } => {
            let cfg = run_config(&run)?;
            let scene = load_scene_ply(&scene)?;
            let cameras = load_cameras_auto(&cameras)?;
            let references = refs::load(&refs, &cameras)?;
            let mut backend = cfg.build_backend()?;
            let (result, session) = progressive_inpaint(&scene, &references, &cfg, &mut backend)?;
            save_scene_ply(&result, &out)?;
            if let Some(path) = report {
                write_json(&path, &session.steps())?;
            }
            for (k, s) in session.steps().iter().enumerate() {
                println!(
                    "step {}: view {}, uncovered {} -> {}",
                    k + 1,
                    s.view,
                    s.uncovered_before,
                    s.uncovered_after
                );
            }
        }
        Command::Eval {
            scene,
            cameras,
            heldout,
            out,
        } => {
            let scene = load_scene_ply(&scene)?;
            let cameras = load_cameras_auto(&cameras)?;
            let mut views = Vec::new();
            for pose in cameras {
                let image = heldout.join(format!("{}.png", pose.name));
                if !image.is_file() {
                    continue;
                }
                let image = ColorImage::load_png(&image)?;
                let mask_path = heldout.join(format!("{}_mask.png", pose.name));
                let mask = if mask_path.is_file() {
                    MaskImage::load_png(&mask_path)?
                } else {
                    MaskImage::filled(pose.width, pose.height, true)
                };
                views.push(HeldOutView { pose, image, mask });
            }
            let table = evaluate_views(&scene, &views)?;
            match out {
                Some(path) => write_json(&path, &table)?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    writeln!(stdout, "{:<24} {:>9} {:>7}", "view", "psnr", "ssim")?;
                    for v in &table.views {
                        writeln!(stdout, "{:<24} {:>9.3} {:>7.4}", v.view, v.psnr, v.ssim)?;
                    }
                    writeln!(stdout, "{:<24} {:>9.3} {:>7.4}", "mean", table.mean_psnr, table.mean_ssim)?;
                }
            }
        }
        Command::Render {
            scene,
            cameras,
            view,
            mode,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let scene = load_scene_ply(&scene)?;
            let cameras = load_cameras_auto(&cameras)?;
            let pose = find_view(&cameras, &view)?;
            let r = render_with(&scene, pose, &render_options(&cfg));
            let bytes = match mode {
                Mode::Color => r.color.encode_png(),
                Mode::Alpha => r.alpha_png(),
                Mode::Depth => r.depth.encode_tiff(),
            };
            std::fs::write(&out, bytes)?;
        }
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(gsfill_service::serve(addr))?;
        }
        Command::Backend => {
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            serve_backend(stdin, stdout, |role, _t, x| match role {
                Role::Encode => HaarCodec.encode(&x),
                Role::Decode => HaarCodec.decode(&x),
                Role::Denoise => {
                    let [_, h, w] = x.shape();
                    Ok(Tensor3::zeros(LATENT_CHANNELS, h, w))
                }
            })?;
        }
    }
    Ok(())
}
