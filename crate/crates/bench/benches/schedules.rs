use collsim::algorithms::{generate, Algorithm, CollectiveParams, OpKind};
use collsim::cost::{time_schedule, CostParams};
use collsim::semantics::verify;
use collsim::{MachineShape, Placement};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

const ALGOS: [Algorithm; 3] = [Algorithm::KPorted, Algorithm::KLane { full_node_bcast: false }, Algorithm::FullLane];

fn bench_generate(c: &mut Criterion) {
    let m = MachineShape::new(36, 32, 6, Placement::Block).unwrap();
    let mut g = c.benchmark_group("generate/36x32");
    for op in OpKind::ALL {
        for algo in ALGOS {
            let params = CollectiveParams::new(op, 0, 100, 6);
            g.bench_with_input(BenchmarkId::new(op.to_string(), algo), &params, |b, params| {
                b.iter(|| generate(algo, &m, black_box(params)).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_time(c: &mut Criterion) {
    let m = MachineShape::new(36, 32, 6, Placement::Block).unwrap();
    let cp = CostParams::for_machine(&m);
    let mut g = c.benchmark_group("time/36x32");
    for algo in ALGOS {
        let s = generate(algo, &m, &CollectiveParams::new(OpKind::Alltoall, 0, 100, 6)).unwrap();
        g.bench_function(BenchmarkId::new("alltoall", algo), |b| b.iter(|| time_schedule(black_box(&s), &m, &cp)));
    }
    g.finish();
}

fn bench_verify(c: &mut Criterion) {
    let m = MachineShape::new(8, 8, 4, Placement::Block).unwrap();
    let mut g = c.benchmark_group("verify/8x8");
    for op in OpKind::ALL {
        for algo in ALGOS {
            let params = CollectiveParams::new(op, 5, 7, 4);
            let s = generate(algo, &m, &params).unwrap();
            g.bench_function(BenchmarkId::new(op.to_string(), algo), |b| {
                b.iter(|| assert!(verify(&params, &m, black_box(&s)).passed))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_generate, bench_time, bench_verify);
criterion_main!(benches);
