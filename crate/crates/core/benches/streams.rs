use std::fs;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use shopsim::catalog::{generate_catalog, CatalogSpec};
use shopsim::harness::{execute, prepare, PolicySpec, RunConfig};
use shopsim::par::Execution;
use shopsim::rerank::generate_ratings;
use shopsim::tasks::{default_profiles, generate_suite};

fn suite_generation(c: &mut Criterion) {
    let catalog = generate_catalog(&CatalogSpec { items: 2000, seed: 0 });
    let profiles = default_profiles();
    let mut group = c.benchmark_group("generate_suite");
    group.sample_size(10);
    for (name, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_suite(&catalog, &profiles, 0, exec).unwrap())
        });
    }
    group.finish();
}

fn user_streams(c: &mut Criterion) {
    let tmp = tempfile::tempdir().unwrap();
    let catalog = generate_catalog(&CatalogSpec { items: 2000, seed: 0 });
    let ratings = generate_ratings(&catalog, 30, 100, 0);
    let (cp, rp) = (tmp.path().join("catalog.jsonl"), tmp.path().join("ratings.json"));
    catalog.write_jsonl(&cp).unwrap();
    fs::write(&rp, ratings.to_json()).unwrap();

    let mut group = c.benchmark_group("execute");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    for policy in [PolicySpec::Oracle { inspect_tabs: true }, PolicySpec::Browse] {
        let mut cfg = RunConfig::new(&cp, &rp, policy);
        let prep = prepare(&cfg).unwrap();
        let label = shopsim::harness::policy_label(&cfg);
        for parallel in [true, false] {
            cfg.parallel = parallel;
            let mode = if parallel { "parallel" } else { "sequential" };
            group.bench_with_input(BenchmarkId::new(&label, mode), &cfg, |b, cfg| b.iter(|| execute(cfg, &prep).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, suite_generation, user_streams);
criterion_main!(benches);
