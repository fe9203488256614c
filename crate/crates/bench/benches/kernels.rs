use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hilbertnet::ed::SparseHamiltonian;
use hilbertnet::mps::build_mpo;
use hilbertnet::tensor::{contract, truncated_svd, DEFAULT_CUTOFF};
use hilbertnet::{dmrg_ground_state, ttn_ground_state, CurveKind, DmrgConfig, MpsState, SiteMapping, TtnConfig};
use hilbertnet_bench::{chain_terms, filled_tensor, filled_vector};

fn tensor_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("tensor");
    for m in [32, 64] {
        let a = filled_tensor(&[m, 2, m]);
        let b = filled_tensor(&[m, 2, m]);
        group.bench_with_input(BenchmarkId::new("contract_bond", m), &m, |bench, _| {
            bench.iter(|| contract(black_box(&a), black_box(&b), &[(2, 0)]).unwrap())
        });
        let theta = filled_tensor(&[m, 2, 2, m]);
        group.bench_with_input(BenchmarkId::new("truncated_svd", m), &m, |bench, _| {
            bench.iter(|| truncated_svd(black_box(&theta), &[0, 1], m, DEFAULT_CUTOFF).unwrap())
        });
    }
    group.finish();
}

fn hamiltonian_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("hamiltonian");
    let terms = chain_terms(4, 2.9, CurveKind::Hilbert);
    let h = SparseHamiltonian::new(&terms).unwrap();
    let x = filled_vector(h.dim());
    let mut y = vec![0.0; h.dim()];
    group.bench_function("ed_matvec_16_sites", |bench| bench.iter(|| h.apply(black_box(&x), &mut y)));

    let terms = chain_terms(8, 2.9, CurveKind::Hilbert);
    let mpo = build_mpo(&terms);
    let state = MpsState::random(64, 20, 7).unwrap();
    group.bench_function("mps_energy_64_sites_m20", |bench| bench.iter(|| state.expectation(black_box(&mpo)).unwrap()));
    group.bench_function("hilbert_mapping_128", |bench| {
        bench.iter(|| SiteMapping::new(CurveKind::Hilbert, black_box(128)).unwrap())
    });
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for kind in [CurveKind::Hilbert, CurveKind::Snake] {
        let terms = chain_terms(4, 2.9, kind);
        let mut dmrg = DmrgConfig::with_bond(16);
        dmrg.max_sweeps = 1;
        group.bench_function(BenchmarkId::new("dmrg_16_sites_m16", kind), |bench| {
            bench.iter(|| dmrg_ground_state(black_box(&terms), &dmrg).unwrap())
        });
        let mut ttn = TtnConfig::with_bond(16);
        ttn.max_sweeps = 1;
        group.bench_function(BenchmarkId::new("ttn_16_sites_m16", kind), |bench| {
            bench.iter(|| ttn_ground_state(black_box(&terms), &ttn).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, tensor_kernels, hamiltonian_kernels, sweeps);
criterion_main!(benches);
