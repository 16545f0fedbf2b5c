//! `pointray`: batch front end for tracing point-cloud scenes.

mod presets;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use pointray_core::config::RunConfig;
use pointray_core::io::{write_edges, write_point_cloud, PlyFormat};
use pointray_core::oracle::{diffraction_paths, image_method_paths, match_paths, sample_planar_scene};
use pointray_core::pipeline::{load_scene, run_pipeline, run_scene};
use pointray_core::refine::{output_cmp, verify_reflection_law};
use pointray_core::voxelgrid::{build_grid, IeKind};
use pointray_core::{DVec3, Error, Result};

use presets::{parse_point, Preset};

#[derive(Debug, Parser)]
#[command(name = "pointray", version, about = "Ray launching on labeled point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline and write the path file.
    Trace(ConfigArgs),
    /// Build the voxel grid and print its statistics.
    Voxelize(ConfigArgs),
    /// Compare traced paths on a generated planar scene with the image method.
    Validate(ValidateArgs),
    /// Sample a planar preset into a point cloud, edge file and config.
    MakeScene(MakeSceneArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Field overrides as `--<field> <value>` or `--<field>=<value>`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value = "box-room")]
    preset: Preset,
    /// Points per square metre.
    #[arg(long, default_value_t = 5000.0)]
    density: f64,
    /// Largest allowed direction deviation per segment, degrees.
    #[arg(long, default_value_t = 1.0)]
    angle_tolerance: f64,
    /// Largest allowed interaction point error, metres.
    #[arg(long, default_value_t = 5e-3)]
    position_tolerance: f64,
    /// Interaction limit for both the trace and the reference paths.
    #[arg(long, default_value_t = 3)]
    order: u32,
    #[arg(long, value_parser = parse_point)]
    tx: Option<DVec3>,
    #[arg(long, value_parser = parse_point)]
    rx: Option<DVec3>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct MakeSceneArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Points per square metre.
    #[arg(long, default_value_t = 5000.0)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_point)]
    tx: Option<DVec3>,
    #[arg(long, value_parser = parse_point)]
    rx: Option<DVec3>,
    /// Write the point cloud as text instead of binary.
    #[arg(long)]
    ascii: bool,
}

fn apply_overrides(config: &mut RunConfig, tokens: &[String]) -> Result<()> {
    let mut it = tokens.iter();
    while let Some(token) = it.next() {
        let flag = token.strip_prefix("--").ok_or_else(|| Error::Config(format!("unexpected argument {token:?}")))?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::Config(format!("missing value for --{flag}")))?;
                (flag.to_string(), v.clone())
            }
        };
        config.set(&key, &value)?;
    }
    Ok(())
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut config, &args.overrides)?;
    config.validate()?;
    Ok(config)
}

fn trace(args: &ConfigArgs) -> Result<()> {
    let config = load_config(args)?;
    let summary = run_pipeline(&config)?;
    println!("{summary}");
    Ok(())
}

fn voxelize(args: &ConfigArgs) -> Result<()> {
    let config = load_config(args)?;
    let scene = load_scene(&config)?;
    let start = Instant::now();
    let grid = build_grid(&scene, &config.voxelization())?;
    let elapsed = start.elapsed();
    let count = |kind| grid.ies.iter().filter(|ie| ie.kind == kind).count();
    println!("points               {}", scene.points.len());
    println!("grid                 {} x {} x {}", grid.dims[0], grid.dims[1], grid.dims[2]);
    println!("occupied voxels      {}", grid.occupied_voxels());
    println!("surface IEs          {}", count(IeKind::SurfacePoints));
    println!("edge IEs             {}", count(IeKind::EdgeSegment));
    println!("receiver IEs         {}", count(IeKind::Receiver));
    println!("voxelization {:>10.3} s", elapsed.as_secs_f64());
    Ok(())
}

/// Returns whether every reference path was found within tolerance.
fn validate(args: &ValidateArgs) -> Result<bool> {
    let mut config = load_config(&args.config)?;
    config.max_interactions = args.order;
    let planar = args.preset.build(args.tx, args.rx);
    let points = sample_planar_scene(&planar, args.density, config.seed);
    let scene = planar.to_scene(points, config.carrier_frequency_hz);
    let (found, summary) = run_scene(&scene, &config)?;

    let mut reference = image_method_paths(&planar, config.max_interactions as usize);
    if config.max_diffractions > 0 && config.max_interactions > 0 {
        reference.extend(diffraction_paths(&planar));
        reference.sort_by(output_cmp);
    }
    let report = match_paths(&found, &reference, args.angle_tolerance.to_radians());
    let law_failures = found.iter().filter(|p| !verify_reflection_law(p, 1e-3)).count();

    println!("{summary}");
    println!("reference paths      {}", reference.len());
    println!("found paths          {}", found.len());
    println!("matched              {} ({:.1}%)", report.matched_count(), report.percent_matched());
    println!("max position error   {:.3e} m", report.max_position_error());
    println!("reflection law fails {law_failures}");
    for (i, m) in report.matched.iter().enumerate() {
        if m.is_none() {
            println!("missing {:?} {:?}", reference[i].kinds(), reference[i].label_chain());
        }
    }
    Ok(report.matched_count() == reference.len()
        && report.max_position_error() <= args.position_tolerance
        && law_failures == 0)
}

fn relative_to(path: &Path, dir: &Path) -> PathBuf {
    path.strip_prefix(dir).map(Path::to_path_buf).unwrap_or_else(|_| path.to_path_buf())
}

fn make_scene(args: &MakeSceneArgs) -> Result<()> {
    if !(args.density > 0.0 && args.density.is_finite()) {
        return Err(Error::InvalidParameter { name: "density", reason: "must be positive".into() });
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let planar = args.preset.build(args.tx, args.rx);
    let points = sample_planar_scene(&planar, args.density, args.seed);

    let scene_path = args.out.join(if args.ascii { "scene.ascii.ply" } else { "scene.ply" });
    let format = if args.ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    write_point_cloud(&scene_path, &points, format)?;

    let mut config = RunConfig {
        scene_path: Some(relative_to(&scene_path, &args.out)),
        output_path: Some(PathBuf::from("paths.jsonl")),
        seed: args.seed,
        transmitters: vec![planar.tx.to_array()],
        receivers: vec![planar.rx.to_array()],
        ..RunConfig::default()
    };
    if !planar.edges.is_empty() {
        let edges_path = args.out.join("edges.txt");
        write_edges(&edges_path, &planar.edges)?;
        config.edges_path = Some(relative_to(&edges_path, &args.out));
    }
    let config_path = args.out.join("config.toml");
    std::fs::write(&config_path, config.to_toml_string()).map_err(|e| Error::io(&config_path, e))?;
    println!("points {}", points.len());
    println!("config {}", config_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Trace(args) => trace(args).map(|()| true),
        Command::Voxelize(args) => voxelize(args).map(|()| true),
        Command::Validate(args) => validate(args),
        Command::MakeScene(args) => make_scene(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
