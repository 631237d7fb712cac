use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use opinet::dynamics::{step, DynamicsConfig};
use opinet::features::feature_matrix;
use opinet::neural::{bce_loss, gcn_backward, normalize_adjacency, Architecture};
use opinet::oracle::{optimal_blocker_set, SearchSpace};
use opinet::planners::plan_value_greedy;
use opinet::{Case, GcnModel, Head, ScenarioTemplate};

fn scenario(case: Case, n: usize) -> opinet::Scenario {
    ScenarioTemplate::new(case, n).sample(17).unwrap().0
}

fn dynamics(c: &mut Criterion) {
    for case in [Case::Case1, Case::Case3] {
        let s = scenario(case, 200);
        let cfg = DynamicsConfig::from_scenario(&s);
        let pick = vec![s.state.candidates()[0]];
        c.bench_function(&format!("step/{}/n200", case.name()), |b| {
            b.iter(|| step(black_box(&s.state), &pick, &cfg).unwrap())
        });
    }
}

fn oracle(c: &mut Criterion) {
    let s = scenario(Case::Case1, 25);
    let cfg = DynamicsConfig::from_scenario(&s);
    for k in [1, 2] {
        c.bench_function(&format!("oracle/susceptible/n25/k{k}"), |b| {
            b.iter(|| {
                optimal_blocker_set(&s.state, k, &cfg, 100, SearchSpace::Susceptible).unwrap()
            })
        });
    }
}

fn network(c: &mut Criterion) {
    let s = scenario(Case::Case2, 50);
    let adj = normalize_adjacency(&s.state.network);
    let features = feature_matrix(&s.state);
    let clf = GcnModel::new(Architecture::default(), Head::Classifier, 1);
    let value = GcnModel::new(Architecture::default(), Head::Value, 2);
    let target: Vec<f64> = (0..50).map(|i| (i == 3) as u8 as f64).collect();

    c.bench_function("features/n50", |b| {
        b.iter(|| feature_matrix(black_box(&s.state)))
    });
    c.bench_function("gcn/forward/n50", |b| {
        b.iter(|| clf.forward(&features, &adj).unwrap())
    });
    c.bench_function("gcn/forward_backward/n50", |b| {
        b.iter(|| {
            let pass = clf.forward(&features, &adj).unwrap();
            let (_, grad) = bce_loss(&pass.output, &target).unwrap();
            gcn_backward(&clf, &adj, &pass, &grad).unwrap()
        })
    });
    let cfg = DynamicsConfig::from_scenario(&s);
    c.bench_function("planner/value_greedy/n50/k2", |b| {
        b.iter_batched(
            || s.state.clone(),
            |state| plan_value_greedy(&state, 2, &value, &adj, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, dynamics, oracle, network);
criterion_main!(benches);
