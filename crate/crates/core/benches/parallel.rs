use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use parisi_lab::finite_n::free_energy_mc;
use parisi_lab::scan::{phase_grid, Axis, ScanConfig};
use parisi_lab::{CouplingParams, Exec, Lab, MixtureSpec};

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn bench_phase_grid(c: &mut Criterion) {
    let spec = MixtureSpec::sk();
    let config = ScanConfig {
        beta: Axis {
            lo: 0.4,
            hi: 0.8,
            n: 2,
        },
        h: Axis {
            lo: 0.1,
            hi: 0.4,
            n: 2,
        },
        k_max: 1,
        seed: 7,
    };
    let mut group = c.benchmark_group("phase_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        let lab = Lab::default().with_exec(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| phase_grid(&lab, &spec, &config).unwrap())
        });
    }
    group.finish();
}

fn bench_free_energy(c: &mut Criterion) {
    let spec = MixtureSpec::sk_plus(4, 0.5).unwrap();
    let params = CouplingParams::new(1.0, 0.2).unwrap();
    let mut group = c.benchmark_group("free_energy_mc");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| free_energy_mc(&spec, &params, 12, 64, 3, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_phase_grid, bench_free_energy);
criterion_main!(benches);
