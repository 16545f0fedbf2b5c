use glam::DVec3;
use pointray_core::oracle::{fermat_diffraction_point, sample_planar_scene, PlanarScene, Rectangle};
use pointray_core::refine::{refine_path, verify_reflection_law, RefineParams, Rejection};
use pointray_core::scene::Scene;
use pointray_core::tracer::{Interaction, InteractionKind, PathCandidate};
use pointray_core::voxelgrid::{build_grid, VoxelGrid, VoxelizationParams};

const DENSITY: f64 = 5000.0;

fn plane(z: f64, facing: f64, label: u32) -> Rectangle {
    Rectangle::facing(
        DVec3::new(-1.0, -1.0, z),
        DVec3::new(6.0, 0.0, 0.0),
        DVec3::new(0.0, 2.0, 0.0),
        DVec3::new(0.0, 0.0, facing),
        label,
    )
}

fn build(planar: &PlanarScene) -> (Scene, VoxelGrid) {
    let scene = planar.to_scene(sample_planar_scene(planar, DENSITY, 7), 60e9);
    let grid = build_grid(&scene, &VoxelizationParams::default()).unwrap();
    (scene, grid)
}

fn reflection(position: DVec3, normal: DVec3, label: u32) -> Interaction {
    Interaction { kind: InteractionKind::Reflection, position, label, ie: 0, frame: normal, edge: None }
}

fn candidate(interactions: Vec<Interaction>) -> PathCandidate {
    PathCandidate { tx_id: 0, rx_id: 0, interactions, coarse_length: 0.0 }
}

#[test]
fn single_reflection_converges_to_mirror_point() {
    let planar = PlanarScene {
        rectangles: vec![plane(0.0, 1.0, 1)],
        edges: vec![],
        tx: DVec3::new(0.0, 0.0, 1.0),
        rx: DVec3::new(1.0, 0.0, 1.0),
    };
    let (scene, grid) = build(&planar);
    let cand = candidate(vec![reflection(DVec3::new(0.4, 0.0, 0.0), DVec3::Z, 1)]);
    let path = refine_path(&cand, &grid, &scene, &RefineParams::default()).unwrap();
    assert!(path.converged);
    assert!((path.total_length - 5f64.sqrt()).abs() < 1e-4);
    assert!(path.interactions[0].position.distance(DVec3::new(0.5, 0.0, 0.0)) < 1e-4);
    assert!(verify_reflection_law(&path, 1e-3));
}

#[test]
fn single_diffraction_converges_to_symmetric_point() {
    let planar = PlanarScene::wedge(2.0, 2.0, DVec3::new(0.0, -1.0, 1.0), DVec3::new(0.0, 1.0, 1.0));
    let (scene, grid) = build(&planar);
    let cand = candidate(vec![Interaction {
        kind: InteractionKind::Diffraction,
        position: DVec3::new(0.3, 0.0, 0.0),
        label: planar.edges[0].label,
        ie: 0,
        frame: DVec3::X,
        edge: Some(0),
    }]);
    let path = refine_path(&cand, &grid, &scene, &RefineParams::default()).unwrap();
    let expected = fermat_diffraction_point(&planar.edges[0], planar.tx, planar.rx);
    assert!(expected.length() < 1e-9);
    assert!(path.interactions[0].position.distance(expected) < 1e-4);
    assert!((path.total_length - 2.0 * 2f64.sqrt()).abs() < 1e-6);
    assert!(verify_reflection_law(&path, 1e-3));
}

#[test]
fn double_reflection_between_parallel_planes() {
    let planar = PlanarScene {
        rectangles: vec![plane(0.0, 1.0, 1), plane(3.0, -1.0, 2)],
        edges: vec![],
        tx: DVec3::new(0.0, 0.0, 1.0),
        rx: DVec3::new(4.0, 0.0, 1.0),
    };
    let (scene, grid) = build(&planar);
    // Images of TX: (0,0,-1) in the floor, then (0,0,7) in the ceiling.
    let ceiling = DVec3::new(8.0 / 3.0, 0.0, 3.0);
    let floor = DVec3::new(2.0 / 3.0, 0.0, 0.0);
    let cand = candidate(vec![
        reflection(DVec3::new(0.8, 0.05, 0.0), DVec3::Z, 1),
        reflection(DVec3::new(2.5, -0.05, 3.0), -DVec3::Z, 2),
    ]);
    let path = refine_path(&cand, &grid, &scene, &RefineParams::default()).unwrap();
    assert!(path.interactions[0].position.distance(floor) < 1e-3);
    assert!(path.interactions[1].position.distance(ceiling) < 1e-3);
    assert!((path.total_length - DVec3::new(0.0, 0.0, 7.0).distance(planar.rx)).abs() < 1e-4);
    assert!(verify_reflection_law(&path, 1e-3));
}

#[test]
fn chain_without_solution_is_rejected() {
    // A floor reflection cannot lead back up from below the floor.
    let planar = PlanarScene {
        rectangles: vec![plane(0.0, 1.0, 1)],
        edges: vec![],
        tx: DVec3::new(0.0, 0.0, 1.0),
        rx: DVec3::new(1.0, 0.0, 1.0),
    };
    let (scene, grid) = build(&planar);
    let cand = candidate(vec![
        reflection(DVec3::new(0.3, 0.0, 0.0), DVec3::Z, 1),
        reflection(DVec3::new(0.7, 0.0, 0.0), DVec3::Z, 1),
    ]);
    let err = refine_path(&cand, &grid, &scene, &RefineParams::default()).unwrap_err();
    assert!(matches!(err, Rejection::NotConverged | Rejection::RayMissed | Rejection::Degenerate));
}

#[test]
fn line_of_sight_passes_through() {
    let planar = PlanarScene {
        rectangles: vec![plane(0.0, 1.0, 1)],
        edges: vec![],
        tx: DVec3::new(0.0, 0.0, 1.0),
        rx: DVec3::new(1.0, 0.0, 1.0),
    };
    let (scene, grid) = build(&planar);
    let path = refine_path(&candidate(vec![]), &grid, &scene, &RefineParams::default()).unwrap();
    assert!(path.interactions.is_empty());
    assert!((path.total_length - 1.0).abs() < 1e-12);
}
