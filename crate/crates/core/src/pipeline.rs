//! End-to-end runs: load, voxelize, trace, refine, deduplicate, write.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::refine::{dedup_by_fresnel, dedup_by_label, output_cmp, refine_all, ExactPath, RejectionStats};
use crate::scene::{validate_scene, Scene};
use crate::tracer::{PathCandidate, TraceContext};
use crate::voxelgrid::{build_grid, VoxelGrid};

/// Wall time per stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimes {
    pub load: Duration,
    pub voxelize: Duration,
    pub trace: Duration,
    pub refine: Duration,
    pub dedup: Duration,
    pub write: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub points: usize,
    pub occupied_voxels: usize,
    pub intersectable_entities: usize,
    pub coarse_paths: usize,
    pub refined_paths: usize,
    pub exact_paths: usize,
    pub rejections: RejectionStats,
    pub times: StageTimes,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = &self.times;
        writeln!(f, "points               {}", self.points)?;
        writeln!(f, "occupied voxels      {}", self.occupied_voxels)?;
        writeln!(f, "IEs                  {}", self.intersectable_entities)?;
        writeln!(f, "coarse paths         {}", self.coarse_paths)?;
        writeln!(f, "refined paths        {}", self.refined_paths)?;
        writeln!(f, "exact paths          {}", self.exact_paths)?;
        for (reason, n) in &self.rejections.counts {
            writeln!(f, "rejected ({reason}) {n}")?;
        }
        writeln!(f, "load         {:>10.3} s", t.load.as_secs_f64())?;
        writeln!(f, "voxelization {:>10.3} s", t.voxelize.as_secs_f64())?;
        writeln!(f, "coarse trace {:>10.3} s", t.trace.as_secs_f64())?;
        writeln!(f, "refinement   {:>10.3} s", t.refine.as_secs_f64())?;
        writeln!(f, "dedup        {:>10.3} s", t.dedup.as_secs_f64())?;
        write!(f, "write        {:>10.3} s", t.write.as_secs_f64())
    }
}

fn check_scene(scene: &Scene) -> Result<()> {
    let report = validate_scene(scene);
    if report.is_empty() {
        return Ok(());
    }
    let shown: Vec<String> = report.iter().take(5).map(|v| format!("{:?} {:?}", v.element, v.rule)).collect();
    let more = if report.len() > 5 { format!(" and {} more", report.len() - 5) } else { String::new() };
    Err(Error::InvalidScene(format!("{}{more}", shown.join(", "))))
}

/// Coarse candidates for every transmitter, in transmitter order.
pub fn trace_scene(scene: &Scene, grid: &VoxelGrid, config: &RunConfig) -> Vec<PathCandidate> {
    let params = config.trace_params();
    let ctx = TraceContext::new(scene, grid, &params);
    scene.transmitters.iter().flat_map(|tx| ctx.trace_transmitter(tx)).collect()
}

/// Run every in-memory stage on `scene`. Paths come back in output order.
pub fn run_scene(scene: &Scene, config: &RunConfig) -> Result<(Vec<ExactPath>, RunSummary)> {
    config.validate()?;
    check_scene(scene).map_err(|e| e.in_stage("validate"))?;
    let mut summary = RunSummary { points: scene.points.len(), ..Default::default() };

    let start = Instant::now();
    let grid = build_grid(scene, &config.voxelization()).map_err(|e| e.in_stage("voxelize"))?;
    summary.times.voxelize = start.elapsed();
    summary.occupied_voxels = grid.occupied_voxels();
    summary.intersectable_entities = grid.ies.len();

    let start = Instant::now();
    let candidates = trace_scene(scene, &grid, config);
    summary.times.trace = start.elapsed();
    summary.coarse_paths = candidates.len();

    let start = Instant::now();
    let (refined, rejections) = refine_all(&candidates, &grid, scene, &config.refine_params());
    summary.times.refine = start.elapsed();
    summary.refined_paths = refined.len();
    summary.rejections = rejections;

    let start = Instant::now();
    let mut paths = dedup_by_label(refined);
    if config.fresnel_enabled {
        paths = dedup_by_fresnel(paths, scene.carrier_frequency);
    }
    paths.par_sort_by(output_cmp);
    summary.times.dedup = start.elapsed();
    summary.exact_paths = paths.len();
    Ok((paths, summary))
}

/// Read the scene named by `config`. Radios and frequency come from the
/// configuration.
pub fn load_scene(config: &RunConfig) -> Result<Scene> {
    let scene_path = config.scene_path.as_ref().ok_or_else(|| Error::MissingField("scene_path".into()))?;
    let points = io::load_point_cloud(scene_path).map_err(|e| e.in_stage("load"))?;
    let edges = match &config.edges_path {
        Some(p) => io::load_edges(p).map_err(|e| e.in_stage("load"))?,
        None => vec![],
    };
    let (transmitters, receivers) = config.radios();
    Ok(Scene { points, edges, transmitters, receivers, carrier_frequency: config.carrier_frequency_hz })
}

/// Full batch run: load inputs, trace on `thread_count` workers and write
/// the path file.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    let output = config.output_path.clone().ok_or_else(|| Error::MissingField("output_path".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.thread_count)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        let start = Instant::now();
        let scene = load_scene(config)?;
        let load = start.elapsed();
        let (paths, mut summary) = run_scene(&scene, config)?;
        summary.times.load = load;
        let start = Instant::now();
        io::write_paths(&output, &paths, &config.physics_hash()).map_err(|e| e.in_stage("write"))?;
        summary.times.write = start.elapsed();
        Ok(summary)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Radio;
    use glam::DVec3;

    #[test]
    fn empty_geometry_gives_line_of_sight_only() {
        let scene = Scene {
            points: vec![],
            edges: vec![],
            transmitters: vec![Radio::tx(0, DVec3::ZERO)],
            receivers: vec![Radio::rx(0, DVec3::new(3.0, 4.0, 0.0))],
            carrier_frequency: 60e9,
        };
        let (paths, summary) = run_scene(&scene, &RunConfig::default()).unwrap();
        assert_eq!(summary.coarse_paths, 1);
        assert_eq!(paths.len(), 1);
        assert!(paths[0].interactions.is_empty());
        assert!((paths[0].total_length - 5.0).abs() < 1e-12);
    }
}
