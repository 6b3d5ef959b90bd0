use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use roadlogic::harness::{generate_scenario, PipelineConfig, Scenario, ScenarioKind, ScenarioSpec};
use roadlogic::inference::{random_kb, RandomKbConfig};
use roadlogic::tracker::TrackMode;
use roadlogic::{compile_frames, default_ruleset, parse_fol_query, resolve, saturate};

fn scenario() -> Scenario {
    generate_scenario(&ScenarioSpec::new(ScenarioKind::Collide, 1), &default_ruleset()).unwrap()
}

fn compile(c: &mut Criterion) {
    let rs = default_ruleset();
    let sc = scenario();
    for mode in [TrackMode::Oracle, TrackMode::Inferred] {
        let cfg = PipelineConfig { track_mode: mode, ..PipelineConfig::default() };
        let settings = cfg.settings();
        c.bench_function(&format!("compile_frames/{mode:?}"), |b| {
            b.iter(|| compile_frames(black_box(sc.annotation.frames.clone()), sc.annotation.intrinsics, 0, &settings, &rs).unwrap())
        });
    }
}

fn reason(c: &mut Criterion) {
    let rs = default_ruleset();
    let sc = scenario();
    let base = &sc.truth.facts;
    c.bench_function("saturate/scene", |b| b.iter(|| saturate(black_box(base), &rs).unwrap()));
    let q = parse_fol_query("Collide(x, y) & Vehicle(y)", &rs).unwrap();
    c.bench_function("resolve/collide", |b| b.iter(|| resolve(black_box(base), &rs, &q).unwrap()));

    let kbs: Vec<_> = (0..32).map(|s| random_kb(s, &RandomKbConfig::default())).collect();
    c.bench_function("saturate/random_kb_x32", |b| {
        b.iter(|| {
            for (_, rules, base) in &kbs {
                black_box(saturate(base, rules).unwrap());
            }
        })
    });
}

fn generate(c: &mut Criterion) {
    let rs = default_ruleset();
    let mut seed = 0;
    c.bench_function("generate_scenario/crossing", |b| {
        b.iter(|| {
            seed += 1;
            generate_scenario(&ScenarioSpec::new(ScenarioKind::Crossing, seed), &rs).unwrap()
        })
    });
}

criterion_group!(benches, compile, reason, generate);
criterion_main!(benches);
