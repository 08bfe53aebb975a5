//! Timings for the hot paths: settling one mind, wiring the social graph,
//! a dyadic exchange, and a full replicate at working scale.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use modeshift_core::{
    build_graph, default_profile_set, exchange, generate_population, prepare, run_replicate,
    settle, EngineSettings, GraphConfig, InfluenceTables, PersuasionRule, PopulationSource,
    ScenarioConfig, ScenarioKind, SettleParams,
};

fn bench_settle(c: &mut Criterion) {
    let set = default_profile_set();
    let pop = generate_population(&set, 64, 7).unwrap();
    let params = SettleParams::default();
    c.bench_function("settle_one_mind", |b| {
        b.iter_batched(
            || pop.agents[0].mind.clone(),
            |mut mind| settle(&mut mind, &params).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_build_graph(c: &mut Criterion) {
    let set = default_profile_set();
    let pop = generate_population(&set, 675, 7).unwrap();
    let cfg = GraphConfig::default();
    c.bench_function("build_graph_675", |b| {
        b.iter(|| build_graph(&pop, &cfg, 11).unwrap())
    });
}

fn bench_exchange(c: &mut Criterion) {
    let set = default_profile_set();
    let pop = generate_population(&set, 64, 7).unwrap();
    let tables = InfluenceTables::default();
    let params = SettleParams::default();
    c.bench_function("dyadic_exchange", |b| {
        b.iter_batched(
            || (pop.agents[0].clone(), pop.agents[1].clone()),
            |(mut a, mut x)| {
                exchange(&mut a, &mut x, &tables, PersuasionRule::Directional, &params).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_replicate(c: &mut Criterion) {
    let mut cfg = ScenarioConfig::new(ScenarioKind::ZeroEmissionZone);
    cfg.population = PopulationSource::Generate { size: 150 };
    cfg.steps = 20;
    cfg.replicates = 1;
    cfg.seed = 7;
    cfg.settings = EngineSettings::default();
    let prepared = prepare(&cfg).unwrap();
    c.bench_function("replicate_150x20", |b| {
        b.iter(|| run_replicate(&cfg, &prepared, 0).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_settle,
    bench_build_graph,
    bench_exchange,
    bench_replicate
);
criterion_main!(kernels);
