use criterion::{black_box, criterion_group, criterion_main, Criterion};

use weakdep_core::bounds;
use weakdep_core::coefficients::{self, WeightSequence};
use weakdep_core::estimation;
use weakdep_core::{VarianceProfile, VarianceSource};

fn selectors(c: &mut Criterion) {
    let n = 10_000;
    let profile = coefficients::doubling_map_profile(n).unwrap();
    let variance = VarianceProfile::new(
        (1..=n)
            .map(estimation::doubling_identity_sigma_sq)
            .collect(),
        VarianceSource::Analytic,
    )
    .unwrap();
    let phi = profile.as_phi_type();
    c.bench_function("select_k_star n=10000", |b| {
        b.iter(|| bounds::select_k_star(black_box(&phi), black_box(&variance)).unwrap())
    });
    c.bench_function("select_k_star_prime n=10000", |b| {
        b.iter(|| {
            bounds::select_k_star_prime(black_box(&profile), black_box(&variance), 1.0).unwrap()
        })
    });
    c.bench_function("variance profile n=10000", |b| {
        b.iter(|| {
            VarianceProfile::new(
                (1..=black_box(n))
                    .map(estimation::doubling_identity_sigma_sq)
                    .collect(),
                VarianceSource::Analytic,
            )
            .unwrap()
        })
    });
}

fn rate_functions(c: &mut Criterion) {
    c.bench_function("bennett_h", |b| {
        b.iter(|| bounds::bennett_h(black_box(0.73)).unwrap())
    });
    c.bench_function("thm2_bennett_tail", |b| {
        b.iter(|| {
            bounds::thm2_bennett_tail(1000, 5, black_box(0.185), 0.0028, black_box(40.0)).unwrap()
        })
    });
}

fn profiles(c: &mut Criterion) {
    let weights = WeightSequence::geometric(0.4, 0.5).unwrap();
    c.bench_function("infinite_memory_profile n=200", |b| {
        b.iter(|| coefficients::infinite_memory_profile(black_box(&weights), 200).unwrap())
    });
}

criterion_group!(benches, selectors, rate_functions, profiles);
criterion_main!(benches);
