use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pointray_core::oracle::{sample_planar_scene, PlanarScene};
use pointray_core::refine::{refine_path, RefineParams};
use pointray_core::surface::{estimate_surface_in, march_segment, MarchSettings};
use pointray_core::tracer::{
    ConicalRay, Interaction, InteractionKind, KindFilter, PathCandidate, TraceContext, TraceParams,
};
use pointray_core::voxelgrid::{build_grid, IeKind};
use pointray_core::{DVec3, Scene, VoxelGrid, VoxelizationParams};

fn room() -> (PlanarScene, Scene) {
    let planar = PlanarScene::box_room(
        DVec3::ZERO,
        DVec3::new(4.0, 3.0, 2.5),
        DVec3::new(1.5, 1.2, 1.6),
        DVec3::new(2.7, 1.9, 1.0),
    );
    let scene = planar.to_scene(sample_planar_scene(&planar, 5000.0, 1), 60e9);
    (planar, scene)
}

fn voxelization(c: &mut Criterion) {
    let (_, scene) = room();
    let params = VoxelizationParams::default();
    c.bench_function("voxelize box room", |b| b.iter(|| build_grid(black_box(&scene), &params).unwrap()));
}

fn surface(c: &mut Criterion) {
    let (_, scene) = room();
    let grid = build_grid(&scene, &VoxelizationParams::default()).unwrap();
    let ie = grid.ies.iter().find(|ie| ie.kind == IeKind::SurfacePoints && ie.label == 1).expect("floor IE");
    let above = ie.reception_point + DVec3::new(0.0, 0.0, 0.1);
    c.bench_function("estimate surface", |b| b.iter(|| estimate_surface_in(black_box(above), ie, &grid)));
    let settings = MarchSettings::for_voxel_size(grid.voxel_size);
    let origin = ie.reception_point + DVec3::new(0.3, 0.2, 1.0);
    let dir = (ie.reception_point - origin).normalize();
    c.bench_function("march segment", |b| b.iter(|| march_segment(black_box(origin), dir, ie, &grid, &settings)));
}

fn cone_trace(c: &mut Criterion) {
    let (planar, scene) = room();
    let grid: VoxelGrid = build_grid(&scene, &VoxelizationParams::default()).unwrap();
    let params = TraceParams::default();
    let ctx = TraceContext::new(&scene, &grid, &params);
    let ray = ConicalRay {
        origin: planar.tx,
        direction: DVec3::new(1.0, 0.4, -0.3).normalize(),
        apex_angle: params.cone_apex_angle,
        separation_planes: vec![],
        provenance: vec![],
    };
    c.bench_function("cone trace", |b| b.iter(|| ctx.voxel_cone_trace(black_box(&ray), KindFilter::ALL, &[])));
    let tx = &scene.transmitters[0];
    c.bench_function("transmission phase", |b| b.iter(|| ctx.transmission_phase(black_box(tx))));
}

fn refinement(c: &mut Criterion) {
    let (_, scene) = room();
    let grid = build_grid(&scene, &VoxelizationParams::default()).unwrap();
    let params = RefineParams::default();
    let candidate = PathCandidate {
        tx_id: 0,
        rx_id: 0,
        interactions: vec![Interaction {
            kind: InteractionKind::Reflection,
            position: DVec3::new(2.0, 1.5, 0.0),
            label: 1,
            ie: 0,
            frame: DVec3::Z,
            edge: None,
        }],
        coarse_length: 0.0,
    };
    c.bench_function("refine floor reflection", |b| {
        b.iter(|| refine_path(black_box(&candidate), &grid, &scene, &params).unwrap())
    });
}

criterion_group!(benches, voxelization, surface, cone_trace, refinement);
criterion_main!(benches);
