use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, Criterion};

use tsc_core::controllers::{Controller, ControllerInputs, ControllerKind, ControllerParams};
use tsc_core::harness::{run_single, RunConfig};
use tsc_core::sim::generate_scenario;
use tsc_core::{init_simulation, load_network, DemandProfile, RoadNetwork, ScenarioKind};

fn network(name: &str) -> (std::path::PathBuf, RoadNetwork) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../networks").join(name);
    let net = load_network(&path).unwrap();
    (path, net)
}

fn bench_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_3600s");
    group.sample_size(20);
    for (file, controller) in [
        ("4way.json", "fixed"),
        ("4way.json", "maxpressure"),
        ("4way.json", "agent:scripted"),
        ("grid2x2.json", "maxpressure"),
    ] {
        let (path, net) = network(file);
        let config = RunConfig::new(&path, ScenarioKind::Emv, controller.parse().unwrap(), 1);
        group.bench_function(format!("{file}/{controller}"), |b| {
            b.iter(|| black_box(run_single(&config, &net, None, 1).unwrap().report))
        });
    }
    group.finish();
}

fn bench_step(c: &mut Criterion) {
    let (_, net) = network("4way.json");
    let schedule = generate_scenario(ScenarioKind::Normal, &net, 3600, 1);
    let mut base = init_simulation(&net, &DemandProfile::from_network(&net), &schedule, 1).unwrap();
    base.run_until(900).unwrap();
    c.bench_function("step_loaded_4way", |b| {
        b.iter_batched(
            || base.clone(),
            |mut sim| black_box(sim.step().unwrap()),
            criterion::BatchSize::SmallInput,
        )
    });
    let mut controller = Controller::new(ControllerKind::Maxpressure, ControllerParams::default());
    c.bench_function("maxpressure_decide", |b| {
        b.iter(|| {
            let inputs = ControllerInputs::gather(&base, "J1").unwrap();
            black_box(controller.decide(&inputs))
        })
    });
}

criterion_group!(benches, bench_runs, bench_step);
criterion_main!(benches);
