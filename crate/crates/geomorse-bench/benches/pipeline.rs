use std::f64::consts::PI;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use geomorse::{
    dense_discretization, detect_focal_points, discrete_index_form, integrate_geodesic, morse_index,
    normal_partition, Manifold,
};
use geomorse_bench::{circle_start, point_start, radial_arc, sphere_arc};

fn geodesic_integration(c: &mut Criterion) {
    let sphere = Arc::new(Manifold::sphere(2, 1.0));
    c.bench_function("integrate_sphere_arc_2000_steps", |b| {
        b.iter(|| {
            integrate_geodesic(
                sphere.clone(),
                &[PI / 2.0, 0.0],
                &[0.0, 1.0],
                (0.0, 2.5 * PI),
                2000,
            )
            .unwrap()
        })
    });
}

fn focal_scan(c: &mut Criterion) {
    let geo = sphere_arc(2.5 * PI, 2000);
    let sub = point_start(&geo);
    c.bench_function("focal_scan_two_conjugate_points", |b| {
        b.iter(|| detect_focal_points(&geo, &sub, &[]).unwrap())
    });
}

fn reduction_assembly(c: &mut Criterion) {
    let geo = radial_arc(1.5, 1024);
    let sub = circle_start();
    let focal = detect_focal_points(&geo, &sub, &[0.0]).unwrap();
    let partition = normal_partition(&geo, &focal).unwrap();
    let (_, end) = geo.interval();
    c.bench_function("discrete_form_assembly_circle_start", |b| {
        b.iter(|| discrete_index_form(&geo, &sub, &[0.0], &partition, end).unwrap())
    });
}

fn full_index_pipeline(c: &mut Criterion) {
    let geo = sphere_arc(1.5 * PI, 1500);
    let sub = point_start(&geo);
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(20);
    group.bench_function("morse_index_sphere_arc", |b| {
        b.iter(|| morse_index(&geo, &sub, &[]).unwrap())
    });
    group.finish();
}

fn dense_oracle_assembly(c: &mut Criterion) {
    let geo = sphere_arc(1.5 * PI, 1500);
    let sub = point_start(&geo);
    let mut group = c.benchmark_group("oracle");
    group.sample_size(20);
    group.bench_function("dense_discretization_mesh_64", |b| {
        b.iter(|| dense_discretization(&geo, (&sub, &[]), None, 64).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    geodesic_integration,
    focal_scan,
    reduction_assembly,
    full_index_pipeline,
    dense_oracle_assembly
);
criterion_main!(benches);
