//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use pointray_core::config::RunConfig;
use pointray_core::geometry::orthonormal_basis;
use pointray_core::oracle::{
    fermat_diffraction_point, image_method_paths, match_paths, sample_planar_scene, PlanarScene, Rectangle,
};
use pointray_core::pipeline::run_scene;
use pointray_core::refine::{
    dedup_by_fresnel, dedup_by_label, local_gradients, verify_reflection_law, DiffractionNode, ExactPath, PathNode,
    RefineNode, ReflectionNode,
};
use pointray_core::surface::estimate_surface_in;
use pointray_core::tracer::InteractionKind;
use pointray_core::voxelgrid::{build_grid, compute_march_distances, Cell, IeKind, VoxelGrid, NO_IES};
use pointray_core::{DVec3, VoxelizationParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_pointray");
const WIDE_CONE_DEG: f64 = 15.0;
const POSITION_TOL: f64 = 5e-3;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("[{}] {id} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

struct Run {
    planar: PlanarScene,
    paths: Vec<ExactPath>,
    elapsed: Duration,
}

fn box_room_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let planar = PlanarScene::box_room(
            DVec3::ZERO,
            DVec3::new(4.0, 3.0, 2.5),
            DVec3::new(1.5, 1.2, 1.6),
            DVec3::new(2.7, 1.9, 1.0),
        );
        let scene = planar.to_scene(sample_planar_scene(&planar, 5000.0, 1), 60e9);
        let config = RunConfig {
            max_interactions: 3,
            max_diffractions: 0,
            cone_apex_angle_deg: WIDE_CONE_DEG,
            ..RunConfig::default()
        };
        let start = Instant::now();
        let (paths, _) = run_scene(&scene, &config).unwrap();
        Run { planar, paths, elapsed: start.elapsed() }
    })
}

fn wedge_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let planar = PlanarScene::wedge(2.0, 2.0, DVec3::new(0.0, -1.0, 0.5), DVec3::new(0.5, 1.0, -1.0));
        let scene = planar.to_scene(sample_planar_scene(&planar, 5000.0, 1), 60e9);
        let config = RunConfig {
            max_interactions: 2,
            max_diffractions: 1,
            cone_apex_angle_deg: WIDE_CONE_DEG,
            ..RunConfig::default()
        };
        let start = Instant::now();
        let (paths, _) = run_scene(&scene, &config).unwrap();
        Run { planar, paths, elapsed: start.elapsed() }
    })
}

#[test]
fn c1_reflection_paths_match_image_method() {
    let run = box_room_run();
    let reference = image_method_paths(&run.planar, 3);
    let rep = match_paths(&run.paths, &reference, 1f64.to_radians());
    let pass = rep.matched_count() == reference.len()
        && rep.max_position_error() <= POSITION_TOL
        && run.elapsed < Duration::from_secs(300);
    report(
        1,
        "reflection paths vs image method",
        pass,
        format!(
            "{}/{} matched ({:.1}%), max position error {:.2} mm, {:.1} s",
            rep.matched_count(),
            reference.len(),
            rep.percent_matched(),
            rep.max_position_error() * 1e3,
            run.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c2_single_diffraction_matches_fermat_point() {
    let run = wedge_run();
    let p = &run.planar;
    let shadowed = !p.segment_clear(p.tx, p.rx);
    let expected = fermat_diffraction_point(&p.edges[0], p.tx, p.rx);
    let diffracted: Vec<&ExactPath> =
        run.paths.iter().filter(|x| x.kinds() == [InteractionKind::Diffraction]).collect();
    let error = diffracted.iter().map(|x| x.interactions[0].position.distance(expected)).fold(f64::INFINITY, f64::min);
    let pass = shadowed && diffracted.len() == 1 && error <= POSITION_TOL;
    report(
        2,
        "single diffraction vs Fermat point",
        pass,
        format!(
            "line of sight blocked: {shadowed}, diffraction paths {}, point error {:.3} mm",
            diffracted.len(),
            error * 1e3
        ),
    );
}

fn random_unit(rng: &mut ChaCha8Rng) -> DVec3 {
    loop {
        let v = DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.length() > 0.1 && v.length() <= 1.0 {
            return v.normalize();
        }
    }
}

fn length_of(tx: DVec3, nodes: &[RefineNode], rx: DVec3) -> f64 {
    let mut pts = vec![tx];
    pts.extend(nodes.iter().map(RefineNode::position));
    pts.push(rx);
    pts.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[test]
fn c3_gradients_match_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut states = 0;
    while states < 1000 {
        let mut point = |r: f64| DVec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
        let (tx, rx) = (point(5.0), point(5.0));
        let count = rng.random_range(1..=5);
        let nodes: Vec<RefineNode> = (0..count)
            .map(|_| {
                let c =
                    DVec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                let axis = random_unit(&mut rng);
                if rng.random_bool(0.7) {
                    let mut n = ReflectionNode::at(c, axis, 1);
                    n.r = rng.random_range(-0.5..0.5);
                    n.s = rng.random_range(-0.5..0.5);
                    RefineNode::Reflection(n)
                } else {
                    let mut n = DiffractionNode::on_segment(c, c - axis, c + axis, 2, 0);
                    n.t = rng.random_range(-0.5..0.5);
                    RefineNode::Diffraction(n)
                }
            })
            .collect();
        let Ok(grads) = local_gradients(tx, &nodes, rx) else { continue };
        let mut pts = vec![tx];
        pts.extend(nodes.iter().map(RefineNode::position));
        pts.push(rx);
        if pts.windows(2).any(|w| w[0].distance(w[1]) < 0.2) {
            continue;
        }
        states += 1;
        for (k, node) in nodes.iter().enumerate() {
            let axes = if matches!(node, RefineNode::Reflection(_)) { 2 } else { 1 };
            for axis in 0..axes {
                let shifted = |d: f64| {
                    let mut copy = nodes.clone();
                    copy[k] = match *node {
                        RefineNode::Reflection(mut n) => {
                            if axis == 0 {
                                n.r += d
                            } else {
                                n.s += d
                            }
                            RefineNode::Reflection(n)
                        }
                        RefineNode::Diffraction(mut n) => {
                            n.t += d;
                            RefineNode::Diffraction(n)
                        }
                    };
                    length_of(tx, &copy, rx)
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                let analytic = if axis == 0 { grads[k].x } else { grads[k].y };
                worst = worst.max((analytic - fd).abs() / analytic.abs().max(1.0));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-5 && elapsed < Duration::from_secs(10);
    report(
        3,
        "analytic gradients vs central differences",
        pass,
        format!("{states} states, worst relative error {worst:.2e}, {:.2} s", elapsed.as_secs_f64()),
    );
}

#[test]
fn c4_converged_paths_obey_reflection_law() {
    let runs = [box_room_run(), wedge_run()];
    let paths: Vec<&ExactPath> = runs.iter().flat_map(|r| &r.paths).filter(|p| p.converged).collect();
    let failures = paths.iter().filter(|p| !verify_reflection_law(p, 1e-3)).count();
    report(
        4,
        "reflection law and Keller condition",
        failures == 0 && !paths.is_empty(),
        format!("{} converged paths, {failures} violations at 1e-3 rad", paths.len()),
    );
}

fn brute_force_distances(dims: [u32; 3], occupied: &[bool]) -> Vec<u32> {
    let coords = |i: usize| {
        let (nx, ny) = (dims[0] as usize, dims[1] as usize);
        [(i % nx) as i64, ((i / nx) % ny) as i64, (i / (nx * ny)) as i64]
    };
    let filled: Vec<[i64; 3]> = (0..occupied.len()).filter(|&i| occupied[i]).map(coords).collect();
    (0..occupied.len())
        .map(|i| {
            let c = coords(i);
            filled.iter().map(|o| (0..3).map(|a| (c[a] - o[a]).abs()).max().unwrap() as u32).min().unwrap_or(NO_IES)
        })
        .collect()
}

#[test]
fn c5_march_distances_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut voxels = 0;
    for _ in 0..50 {
        let dims = [rng.random_range(1..=16), rng.random_range(1..=16), rng.random_range(1..=16)];
        let n = (dims[0] * dims[1] * dims[2]) as usize;
        let fill = rng.random_range(0.0..0.1);
        let occupied: Vec<bool> = (0..n).map(|_| rng.random_bool(fill)).collect();
        let mut grid = VoxelGrid {
            origin: DVec3::ZERO,
            dims,
            voxel_size: 0.5,
            division_factor: 2,
            cells: occupied.iter().map(|&o| Cell { ie_start: 0, ie_count: o as u32, march_distance: 0 }).collect(),
            ies: vec![],
            surfels: vec![],
            point_ids: vec![],
        };
        compute_march_distances(&mut grid);
        let expected = brute_force_distances(dims, &occupied);
        voxels += n;
        mismatches += grid.cells.iter().zip(&expected).filter(|(c, e)| c.march_distance != **e).count();
    }
    report(
        5,
        "march distances vs brute-force Chebyshev transform",
        mismatches == 0,
        format!("50 grids, {voxels} voxels, {mismatches} mismatches"),
    );
}

#[test]
fn c6_planar_sdf_matches_plane_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut queries = 0;
    for label in 1..=5 {
        let n = random_unit(&mut rng);
        let (u, v) = orthonormal_basis(n);
        let corner = DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let rect = Rectangle::facing(corner, 3.0 * u, 3.0 * v, n, label);
        let planar = PlanarScene { rectangles: vec![rect], edges: vec![], tx: corner + n, rx: corner + 2.0 * n };
        let scene = planar.to_scene(sample_planar_scene(&planar, 5000.0, label as u64), 60e9);
        let grid = build_grid(&scene, &VoxelizationParams::default()).unwrap();
        for ie in grid.ies.iter().filter(|ie| ie.kind == IeKind::SurfacePoints) {
            for _ in 0..4 {
                let height = rng.random_range(-grid.voxel_size..grid.voxel_size);
                let x = ie.reception_point + height * n;
                let est = estimate_surface_in(x, ie, &grid);
                let exact = (x - corner).dot(n);
                worst = worst.max((est.sdf_value - exact).abs());
                queries += 1;
            }
        }
    }
    report(
        6,
        "sampled-plane SDF vs point-plane distance",
        worst <= 1e-3,
        format!("{queries} queries within one voxel, worst error {worst:.2e} m"),
    );
}

fn one_bounce(tx: DVec3, rx: DVec3, at: DVec3, label: u32) -> ExactPath {
    ExactPath::new(
        0,
        0,
        tx,
        rx,
        vec![PathNode { kind: InteractionKind::Reflection, position: at, label, frame: DVec3::Z }],
    )
}

/// Half-width of the first Fresnel ellipsoid of the leg `a..b` measured
/// perpendicular to the leg at its focus `b`.
fn focal_half_width(a: DVec3, b: DVec3, wavelength: f64) -> f64 {
    let c = a.distance(b) / 2.0;
    let major = c + wavelength / 4.0;
    (major * major - c * c) / major
}

#[test]
fn c7_fresnel_dedup_follows_ellipsoid_rule() {
    let wavelength = 299_792_458.0 / 60e9;
    let tx = DVec3::new(-1.0, 0.0, 1.0);
    let rx = DVec3::new(1.0, 0.0, 1.0);
    let specular = DVec3::ZERO;
    let width = focal_half_width(tx, specular, wavelength).max(focal_half_width(rx, specular, wavelength));
    let base = one_bounce(tx, rx, specular, 1);

    // (offset, label, expected duplicate)
    let cases = [
        (DVec3::new(0.0, 1e-3, 0.0), 2, true),
        (DVec3::new(0.0, 0.9 * width, 0.0), 3, true),
        (DVec3::new(0.0, 1.1 * width, 0.0), 4, false),
        (DVec3::new(1.0, 0.0, 0.0), 5, false),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut wrong = Vec::new();
    for (offset, label, duplicate) in cases {
        let other = one_bounce(tx, rx, specular + offset, label);
        for _ in 0..4 {
            let mut input = vec![base.clone(), other.clone()];
            input.shuffle(&mut rng);
            let kept = dedup_by_fresnel(input, 60e9);
            let ok = if duplicate { kept == [base.clone()] } else { kept.len() == 2 };
            if !ok {
                wrong.push(format!("offset {offset} kept {}", kept.len()));
            }
        }
    }

    // Survivors of label groups are the shortest members.
    let mut group: Vec<ExactPath> =
        (0..10).map(|i| one_bounce(tx, rx, DVec3::new(0.05 * i as f64, 0.0, 0.0), 1)).collect();
    group.shuffle(&mut rng);
    let kept = dedup_by_label(group);
    if kept.len() != 1 || kept[0].interactions[0].position != specular {
        wrong.push("label group survivor is not the shortest".into());
    }
    report(
        7,
        "duplicate removal by label and Fresnel zone",
        wrong.is_empty(),
        format!("focal zone half-width {:.3} mm, {} wrong outcomes {wrong:?}", width * 1e3, wrong.len()),
    );
}

fn pointray(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(BIN).args(args).current_dir(dir).output().expect("binary runs")
}

#[test]
fn c8_trace_output_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let made = pointray(&["make-scene", "--preset", "box-room", "--out", "room", "--seed", "1"], d);
    assert!(made.status.success(), "{}", String::from_utf8_lossy(&made.stderr));
    let run = |threads: &str, out: &str| {
        let o = pointray(
            &[
                "trace",
                "--config",
                "room/config.toml",
                "--max_interactions",
                "3",
                "--thread_count",
                threads,
                "--output_path",
                out,
            ],
            d,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(d.join(out)).unwrap()
    };
    let one = run("1", "one.jsonl");
    let eight = run("8", "eight.jsonl");
    let records = one.iter().filter(|&&b| b == b'\n').count() - 1;
    report(
        8,
        "byte-identical output for 1 and 8 threads",
        one == eight && records > 1,
        format!("{} bytes, {records} paths, identical: {}", one.len(), one == eight),
    );
}

#[test]
fn c9_corridor_scale_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let made = pointray(&["make-scene", "--preset", "corridor", "--out", "corridor", "--density", "2800"], d);
    assert!(made.status.success(), "{}", String::from_utf8_lossy(&made.stderr));
    let points: usize = String::from_utf8_lossy(&made.stdout)
        .lines()
        .find_map(|l| l.strip_prefix("points ").map(|n| n.trim().parse().unwrap()))
        .unwrap();
    let start = Instant::now();
    let o = pointray(&["trace", "--config", "corridor/config.toml", "--max_diffractions", "0"], d);
    let elapsed = start.elapsed();
    let stdout = String::from_utf8_lossy(&o.stdout);
    let exact = stdout.lines().find(|l| l.starts_with("exact paths")).unwrap_or("exact paths ?").to_string();
    let pass = o.status.success() && points >= 500_000 && elapsed < Duration::from_secs(1800);
    let mut detail = format!(
        "{points} points, {}, {:.1} s",
        exact.split_whitespace().collect::<Vec<_>>().join(" "),
        elapsed.as_secs_f64()
    );
    if !o.status.success() {
        detail.push_str(&format!(", {}", String::from_utf8_lossy(&o.stderr).trim()));
    }
    report(9, "corridor scale run", pass, detail);
}
