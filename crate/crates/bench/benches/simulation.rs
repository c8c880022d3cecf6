use criterion::{criterion_group, criterion_main, Criterion};
use etsim_bench::{guess_trials, render, scenario, DIRECTED, GUESS, PRIVACY, SECURITY};
use std::hint::black_box;

fn scenarios(c: &mut Criterion) {
    for (name, text) in [("privacy", PRIVACY), ("security", SECURITY), ("directed", DIRECTED)] {
        let s = scenario(text);
        c.bench_function(&format!("run_{name}"), |b| b.iter(|| render(black_box(&s), 7)));
    }
}

fn attacks(c: &mut Criterion) {
    let s = scenario(GUESS);
    c.bench_function("guess_trials_100", |b| b.iter(|| guess_trials(black_box(&s), 100)));
}

criterion_group!(benches, scenarios, attacks);
criterion_main!(benches);
