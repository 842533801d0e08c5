use criterion::{black_box, criterion_group, criterion_main, Criterion};
use phasediff::calculus::{apply_diffusion, DiffusionPropagator, Transport};
use phasediff::quantization::{lift, project_p0, rho_phase};
use phasediff::states::{random_config_field, random_phase_field};
use phasediff::{HamiltonianSpec, ModelParams, PhaseGrid};

fn kernels(c: &mut Criterion) {
    let g = PhaseGrid::square(1, 128, 1.0).unwrap();
    let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
    let phi = random_phase_field(g, 3, 0.7, 1);
    let psi = random_config_field(g.config(), 3, 0.6, 1.0, 1);

    c.bench_function("lift_128", |b| b.iter(|| lift(black_box(&psi), &p).unwrap()));
    c.bench_function("project_p0_128", |b| b.iter(|| project_p0(black_box(&phi), &p)));
    c.bench_function("rho_phase_128", |b| b.iter(|| rho_phase(black_box(&psi), &p).unwrap()));
    c.bench_function("apply_diffusion_128", |b| b.iter(|| apply_diffusion(black_box(&phi), &p)));

    let prop = DiffusionPropagator::new(g, &p, None).unwrap();
    c.bench_function("diffusion_propagate_128", |b| b.iter(|| prop.propagate(black_box(&phi), 0.1).unwrap()));

    let t = Transport::new(g, &HamiltonianSpec::harmonic(1.0, 1.0), &p);
    c.bench_function("transport_step_128", |b| {
        let mut v = phi.values.clone();
        b.iter(|| t.step(black_box(&mut v), 1e-3))
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
