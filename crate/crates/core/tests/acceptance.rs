//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any hard criterion fails. Soft checks are reported but do
//! not affect the exit status.

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;

use opinet::dynamics::{propagate_step, step, DynamicsConfig};
use opinet::features::feature_matrix;
use opinet::harness::{
    evaluate, generate_dataset, write_eval_csv, DatasetSpec, DatasetVersion, EvalRecord, EvalSpec,
    PlannerEntry,
};
use opinet::neural::{
    bce_loss, encode_model, gcn_backward, normalize_adjacency, td_loss, Architecture, DenseMatrix,
    GcnModel, Head, NormalizedAdjacency,
};
use opinet::oracle::{optimal_blocker_set, SearchSpace};
use opinet::rng::{derive_seed, derived_rng};
use opinet::scenario_io::{import_edge_list, read_dataset};
use opinet::training::{
    reward, train_rl, train_sl, EpisodeContext, RewardKind, SlConfig, TrainConfig, Transition,
};
use opinet::{
    generate_network, init_state, Case, InfectedCount, InitParams, Network, NetworkState,
    PlannerKind, Propagation, Scenario, ScenarioTemplate, Topology, TrustModel,
};

struct Report {
    hard_failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, soft: bool, detail: String, started: Instant) {
        let tag = match (pass, soft) {
            (true, _) => "PASS",
            (false, true) => "FLAG",
            (false, false) => "FAIL",
        };
        if !pass && !soft {
            self.hard_failures += 1;
        }
        let kind = if soft { " (soft)" } else { "" };
        println!(
            "[{tag}] {id}{kind}: {detail} [{:.1}s]",
            started.elapsed().as_secs_f64()
        );
    }
}

// ---------------------------------------------------------------- oracle

/// Independent exhaustive search over bitmasks: minimum final infection rate
/// over every K-subset of susceptible nodes, with reachability projection.
fn bitmask_min_rate(state: &NetworkState, k: usize) -> f64 {
    let n = state.num_nodes();
    let adj: Vec<u32> = (0..n)
        .map(|i| {
            state
                .network
                .neighbors(i)
                .iter()
                .filter(|nb| nb.trust > 0.0)
                .fold(0u32, |m, nb| m | (1 << nb.node))
        })
        .collect();
    let mut infected = 0u32;
    let mut blocked = 0u32;
    for (i, &x) in state.opinions.iter().enumerate() {
        if x < -0.95 {
            infected |= 1 << i;
        } else if x > 0.95 {
            blocked |= 1 << i;
        }
    }
    let susceptible = ((1u32 << n) - 1) & !infected & !blocked;
    let k = k.min(susceptible.count_ones() as usize);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask & !susceptible != 0 || mask.count_ones() as usize != k {
            continue;
        }
        let walls = blocked | mask;
        let mut reach = infected;
        loop {
            let mut grow = reach;
            for i in 0..n {
                if reach & (1 << i) != 0 {
                    grow |= adj[i] & !walls;
                }
            }
            if grow == reach {
                break;
            }
            reach = grow;
        }
        best = best.min(reach.count_ones() as f64 / n as f64);
    }
    best
}

fn criterion_1(report: &mut Report) {
    let t0 = Instant::now();
    let cfg = DynamicsConfig::new(Propagation::DiscreteSwitch, 1.0);
    let mut mismatches = 0;
    let mut checked = 0;
    for seed in 0..50u64 {
        let net = Arc::new(
            generate_network(
                Topology::WattsStrogatz { k: 3, p: 0.4 },
                10,
                TrustModel::Binary,
                seed,
            )
            .unwrap(),
        );
        let infected = 1 + (seed % 2) as usize;
        let state = init_state(net, &InitParams::new(Case::Case1, infected), seed).unwrap();
        for k in [1, 2] {
            let got = optimal_blocker_set(&state, k, &cfg, 40, SearchSpace::Susceptible)
                .unwrap()
                .min_rate;
            let want = bitmask_min_rate(&state, k);
            checked += 1;
            if got != want {
                mismatches += 1;
            }
        }
    }
    report.line(
        "1 oracle exactness",
        mismatches == 0,
        false,
        format!("{checked} instances, {mismatches} mismatches against bitmask enumerator"),
        t0,
    );
}

// ---------------------------------------------------------------- dynamics

fn criterion_2(report: &mut Report) {
    let t0 = Instant::now();
    let net = Arc::new(Network::path(2));
    let s = NetworkState::new(net, vec![-1.0, 0.5]).unwrap();
    let (next, newly) = propagate_step(&s, &DynamicsConfig::new(Propagation::LinearAdjust, 1.0));
    let eq1 = (next.opinions[1] + 1.0).abs();

    let mut degroot = DynamicsConfig::new(Propagation::DeGroot, 1.0);
    degroot.degroot_self_weight = 0.0;
    let net = Arc::new(
        Network::new(
            3,
            [(0, 1, 0.5), (1, 2, 0.5)],
            opinet::graph::TopologyTag::Imported,
        )
        .unwrap(),
    );
    let s = NetworkState::new(net, vec![1.0, 0.3, -1.0]).unwrap();
    let (next2, _) = propagate_step(&s, &degroot);
    let eq2 = next2.opinions[1].abs();
    let pass = eq1 <= 1e-12 && newly == vec![1] && eq2 <= 1e-12;
    report.line(
        "2 propagation fidelity",
        pass,
        false,
        format!("linear example error {eq1:e}, DeGroot symmetric average error {eq2:e}"),
        t0,
    );
}

// ---------------------------------------------------------------- gradients

fn random_instance(seed: u64) -> (NetworkState, NormalizedAdjacency) {
    let mut template = ScenarioTemplate::new(Case::Case2, 6);
    template.infected = InfectedCount::Uniform { min: 1, max: 2 };
    let (s, _) = template.sample(seed).unwrap();
    let adj = normalize_adjacency(&s.state.network);
    (s.state, adj)
}

/// `|a - n| / max(|a|, |n|, 1e-6)`: gradients far below finite-difference
/// noise are compared on an absolute scale.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn finite_difference_max_err(
    model: &GcnModel,
    analytic: &[DenseMatrix],
    loss: &dyn Fn(&GcnModel) -> f64,
) -> f64 {
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for p in 0..analytic.len() {
        for e in 0..analytic[p].data().len() {
            let orig = probe.params()[p].data()[e];
            probe.params_mut()[p].data_mut()[e] = orig + h;
            let up = loss(&probe);
            probe.params_mut()[p].data_mut()[e] = orig - h;
            let down = loss(&probe);
            probe.params_mut()[p].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(analytic[p].data()[e], numeric));
        }
    }
    worst
}

/// Glorot weights with random biases. Zero biases leave inactive rows exactly
/// on the ReLU kink, where central differences are not meaningful.
fn random_model(arch: Architecture, head: Head, seed: u64) -> GcnModel {
    let mut model = GcnModel::new(arch, head, seed);
    let mut rng = derived_rng(seed, &[1]);
    let count = model.params().len();
    for p in (1..count).step_by(2) {
        model.params_mut()[p]
            .data_mut()
            .iter_mut()
            .for_each(|x| *x = rng.gen_range(-0.5..0.5));
    }
    model
}

fn criterion_3(report: &mut Report) {
    let t0 = Instant::now();
    let arch = Architecture {
        hidden: 16,
        ..Architecture::default()
    };
    let mut worst_bce = 0.0f64;
    let mut worst_td = 0.0f64;
    for g in 0..20u64 {
        let (state, adj) = random_instance(1000 + g);
        let features = feature_matrix(&state);
        let n = state.num_nodes();

        let clf = random_model(arch, Head::Classifier, 10 + g);
        let mut target = vec![0.0; n];
        target[(g as usize) % n] = 1.0;
        let bce = |m: &GcnModel| {
            let out = m.forward(&features, &adj).unwrap().output;
            bce_loss(&out, &target).unwrap().0
        };
        let pass = clf.forward(&features, &adj).unwrap();
        let (_, grad) = bce_loss(&pass.output, &target).unwrap();
        let grads = gcn_backward(&clf, &adj, &pass, &grad).unwrap();
        worst_bce = worst_bce.max(finite_difference_max_err(&clf, &grads.tensors, &bce));

        let value = random_model(arch, Head::Value, 50 + g);
        let frozen = random_model(arch, Head::Value, 90 + g);
        let (other, other_adj) = random_instance(2000 + g);
        let shared = Arc::new(adj.clone());
        let other_adj = Arc::new(other_adj);
        let batch_owned = [
            Transition {
                adjacency: shared.clone(),
                features: features.clone(),
                blockers: vec![],
                reward: -1.5,
                next_features: feature_matrix(&state),
                terminal: false,
            },
            Transition {
                adjacency: other_adj,
                features: feature_matrix(&other),
                blockers: vec![],
                reward: -0.3,
                next_features: feature_matrix(&other),
                terminal: true,
            },
        ];
        let batch: Vec<&Transition> = batch_owned.iter().collect();
        let td = |m: &GcnModel| td_loss(&batch, m, &frozen).unwrap().0;
        let (_, td_grads) = td_loss(&batch, &value, &frozen).unwrap();
        worst_td = worst_td.max(finite_difference_max_err(&value, &td_grads.tensors, &td));
    }
    report.line(
        "3 gradient correctness",
        worst_bce < 1e-4 && worst_td < 1e-4,
        false,
        format!(
            "20 graphs, max relative error BCE/classifier {worst_bce:.2e}, TD/value {worst_td:.2e}"
        ),
        t0,
    );
}

fn criterion_4(report: &mut Report) {
    let t0 = Instant::now();
    let (state, adj) = random_instance(7);
    let features = feature_matrix(&state);
    let zero = GcnModel::zeros(Architecture::default(), Head::Classifier);
    let out = zero.forward(&features, &adj).unwrap().output;
    let mut target = vec![0.0; out.len()];
    target[1] = 1.0;
    let ln2 = bce_loss(&out, &target).unwrap().0;
    let perfect = bce_loss(&target, &target).unwrap().0;
    let pass = (ln2 - std::f64::consts::LN_2).abs() <= 1e-9 && perfect < 1e-6;
    report.line(
        "4 loss baselines",
        pass,
        false,
        format!("zero-init BCE {ln2:.12}, perfect-prediction BCE {perfect:.3e}"),
        t0,
    );
}

// ---------------------------------------------------------------- rewards

fn random_scenario(seed: u64) -> Scenario {
    let mut rng = derived_rng(seed, &[0]);
    let case = [Case::Case1, Case::Case2, Case::Case3][rng.gen_range(0..3)];
    let mut t = ScenarioTemplate::new(case, rng.gen_range(6..=30));
    if case == Case::Case3 && rng.gen_bool(0.5) {
        t.propagation = Propagation::DeGroot;
    }
    if case != Case::Case1 {
        t.source_trust = rng.gen_range(0.3..=1.0);
    }
    t.sample(seed).unwrap().0
}

fn random_blockers(state: &NetworkState, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut cands = state.candidates();
    cands.shuffle(rng);
    let k = rng.gen_range(0..=cands.len().min(3));
    let mut picked = cands[..k].to_vec();
    picked.sort_unstable();
    picked
}

fn criterion_5(report: &mut Report) {
    let t0 = Instant::now();
    let (mut worst_r0, mut r2_mismatch, mut worst_r2) = (0.0f64, 0, 0.0f64);
    for seed in 0..1000u64 {
        let scenario = random_scenario(seed);
        let cfg = DynamicsConfig::from_scenario(&scenario);
        let mut rng = derived_rng(seed, &[1]);
        let mut state = scenario.state.clone();
        let initial = state.infection_rate();
        let max_steps = 4 * state.num_nodes();
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for t in 1..=max_steps {
            if state.candidates().is_empty() {
                break;
            }
            let blockers = random_blockers(&state, &mut rng);
            let out = step(&state, &blockers, &cfg).unwrap();
            let ctx = EpisodeContext {
                t,
                max_steps,
                terminal: out.terminal,
            };
            s0 += reward(RewardKind::R0, &out, ctx);
            s1 += reward(RewardKind::R1, &out, ctx);
            s2 += reward(RewardKind::R2, &out, ctx);
            state = out.next_state;
        }
        worst_r0 = worst_r0.max((s0 + (state.infection_rate() - initial)).abs());
        worst_r2 = worst_r2.max((s2 - (s0 + s1)).abs());
        if s2 != s0 + s1 {
            r2_mismatch += 1;
        }
    }
    report.line(
        "5 reward telescoping",
        worst_r0 <= 1e-12 && r2_mismatch == 0,
        false,
        format!("1000 trajectories, max |sum R0 + delta rate| {worst_r0:.1e}, R2 sums not bit-identical {r2_mismatch} (max deviation {worst_r2:.1e})"),
        t0,
    );
}

fn criterion_6(report: &mut Report) {
    let t0 = Instant::now();
    let (mut steps, mut bad_range, mut rate_drop, mut blocked_moved) = (0, 0, 0, 0);
    let mut seed = 10_000u64;
    while steps < 10_000 {
        let scenario = random_scenario(seed);
        let cfg = DynamicsConfig::from_scenario(&scenario);
        let mut rng = derived_rng(seed, &[2]);
        let mut state = scenario.state.clone();
        for _ in 0..4 * state.num_nodes() {
            if state.candidates().is_empty() || steps >= 10_000 {
                break;
            }
            let blockers = random_blockers(&state, &mut rng);
            let out = step(&state, &blockers, &cfg).unwrap();
            let next = &out.next_state;
            if next.opinions.iter().any(|x| !(-1.0..=1.0).contains(x)) {
                bad_range += 1;
            }
            if out.infection_rate_after < out.infection_rate_before {
                rate_drop += 1;
            }
            if (0..state.num_nodes())
                .any(|i| state.is_blocked(i) && next.opinions[i] != state.opinions[i])
            {
                blocked_moved += 1;
            }
            state = out.next_state;
            steps += 1;
        }
        seed += 1;
    }
    report.line(
        "6 environment invariants",
        bad_range + rate_drop + blocked_moved == 0,
        false,
        format!(
            "{steps} fuzzed steps: {bad_range} out-of-range, {rate_drop} rate decreases, {blocked_moved} blocked mutations"
        ),
        t0,
    );
}

// ---------------------------------------------------------------- learning

fn rate_of(records: &[EvalRecord], label: &str, budget: usize) -> f64 {
    records
        .iter()
        .find(|r| r.planner == label && r.budget == budget)
        .map(|r| r.mean_rate)
        .unwrap()
}

fn criterion_7(report: &mut Report, v1_d1: &[Scenario]) {
    let t0 = Instant::now();
    let run = |epochs: usize| {
        let mut cfg = SlConfig::new(7);
        cfg.epochs = epochs;
        let model = Arc::new(train_sl(&cfg).unwrap().model);
        let spec = EvalSpec {
            planners: vec![
                PlannerEntry::new(PlannerKind::Random, None).unwrap(),
                PlannerEntry::new(PlannerKind::TopKClassifier, Some(model)).unwrap(),
            ],
            budgets: vec![1],
            max_steps: None,
            seed: 0,
        };
        let records = evaluate(v1_d1, None, &spec).unwrap().records;
        (rate_of(&records, "sl", 1), rate_of(&records, "random", 1))
    };
    let (sl, random) = run(300);
    let pass = sl <= 0.9 * random;
    report.line(
        "7 SL learning signal",
        pass,
        false,
        format!(
            "300 epochs: sl {sl:.4} vs random {random:.4} (needs <= {:.4}, relative gain {:.1}%)",
            0.9 * random,
            100.0 * (1.0 - sl / random)
        ),
        t0,
    );
    let t1 = Instant::now();
    let (sl_long, _) = run(1000);
    println!(
        "[INFO] 7 SL at 1000 epochs: sl {sl_long:.4} vs random {random:.4} (relative gain {:.1}%) [{:.1}s]",
        100.0 * (1.0 - sl_long / random),
        t1.elapsed().as_secs_f64()
    );
}

fn criteria_8_9(report: &mut Report, v2_deg4: &[Scenario]) {
    let t0 = Instant::now();
    let train = |kind| {
        Arc::new(
            train_rl(&TrainConfig::new(Case::Case1, 10, kind, 1))
                .unwrap()
                .model,
        )
    };
    let r1 = train(RewardKind::R1);
    let spec = EvalSpec {
        planners: vec![
            PlannerEntry::new(PlannerKind::Random, None).unwrap(),
            PlannerEntry::new(PlannerKind::ValueGreedy, Some(r1.clone())).unwrap(),
        ],
        budgets: vec![1, 2, 3],
        max_steps: None,
        seed: 0,
    };
    let records = evaluate(v2_deg4, Some(4), &spec).unwrap().records;
    let rl: Vec<f64> = (1..=3).map(|b| rate_of(&records, "rl", b)).collect();
    let random: Vec<f64> = (1..=3).map(|b| rate_of(&records, "random", b)).collect();
    let monotone = rl[0] > rl[1] && rl[1] > rl[2];
    let beats = rl.iter().zip(&random).all(|(a, b)| a < b);
    report.line(
        "8 RL budget monotonicity",
        monotone && beats,
        false,
        format!("rl {rl:.4?} vs random {random:.4?} for budgets 1,2,3"),
        t0,
    );
    let table = [0.1608, 0.0842, 0.0597];
    let within: Vec<bool> = rl
        .iter()
        .zip(table)
        .map(|(a, b)| (a - b).abs() <= 0.06)
        .collect();
    report.line(
        "8 RL numeric target",
        within.iter().all(|&w| w),
        true,
        format!("table {table:?}, within 0.06: {within:?}"),
        t0,
    );

    let t1 = Instant::now();
    let r3 = train(RewardKind::R3);
    let spec = EvalSpec {
        planners: vec![PlannerEntry::new(PlannerKind::ValueGreedy, Some(r3)).unwrap()],
        budgets: vec![1],
        max_steps: None,
        seed: 0,
    };
    let r3_rate = rate_of(&evaluate(v2_deg4, Some(4), &spec).unwrap().records, "rl", 1);
    report.line(
        "9 reward ordering R3 >= R1",
        r3_rate >= rl[0],
        true,
        format!("budget 1: R3 {r3_rate:.4}, R1 {:.4}", rl[0]),
        t1,
    );
}

// ---------------------------------------------------------------- determinism

fn criterion_10(report: &mut Report, dir: &Path) {
    let t0 = Instant::now();
    let mut spec = DatasetSpec::new(DatasetVersion::V2, Case::Case1, vec![10, 25], 3);
    spec.states_per_config = 50;
    let read_all = |root: &Path| -> Vec<Vec<u8>> {
        generate_dataset(&spec, root)
            .unwrap()
            .iter()
            .map(|f| std::fs::read(&f.path).unwrap())
            .collect()
    };
    let data_same = read_all(&dir.join("a")) == read_all(&dir.join("b"));

    let mut sl_cfg = SlConfig::new(5);
    sl_cfg.epochs = 20;
    let (sa, sb) = (train_sl(&sl_cfg).unwrap(), train_sl(&sl_cfg).unwrap());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let sl_same = bits(&sa.loss_log) == bits(&sb.loss_log)
        && encode_model(&sa.model, Some(&sa.adam)) == encode_model(&sb.model, Some(&sb.adam));

    let mut rl_cfg = TrainConfig::new(Case::Case1, 10, RewardKind::R1, 5);
    rl_cfg.episodes = 4;
    rl_cfg.states_per_episode = 20;
    rl_cfg.batch_size = 16;
    rl_cfg.validation_size = 10;
    let (ra, rb) = (train_rl(&rl_cfg).unwrap(), train_rl(&rl_cfg).unwrap());
    let rl_same = bits(&ra.loss_log) == bits(&rb.loss_log)
        && bits(&ra.reward_log) == bits(&rb.reward_log)
        && encode_model(&ra.model, Some(&ra.adam)) == encode_model(&rb.model, Some(&rb.adam));

    let scenarios = read_dataset(dir.join("a/case1/v2/n10/deg2.jsonl")).unwrap();
    let eval_spec = EvalSpec {
        planners: vec![
            PlannerEntry::new(PlannerKind::Random, None).unwrap(),
            PlannerEntry::new(PlannerKind::ValueGreedy, Some(Arc::new(ra.model))).unwrap(),
        ],
        budgets: vec![1, 2],
        max_steps: None,
        seed: 9,
    };
    let csv = |name: &str| {
        let path = dir.join(name);
        let report = evaluate(&scenarios, Some(2), &eval_spec).unwrap();
        write_eval_csv(&path, &report.records).unwrap();
        std::fs::read(path).unwrap()
    };
    let eval_same = csv("e1.csv") == csv("e2.csv");
    report.line(
        "10 determinism",
        data_same && sl_same && rl_same && eval_same,
        false,
        format!("datasets {data_same}, sl {sl_same}, rl {rl_same}, evaluation csv {eval_same}"),
        t0,
    );
}

fn karate(report: &mut Report) {
    let t0 = Instant::now();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/karate.edgelist");
    let net = import_edge_list(&path, 1.0).unwrap();
    report.line(
        "edge-list import (karate)",
        net.num_nodes() == 34 && net.num_edges() == 78,
        false,
        format!("{} nodes, {} edges", net.num_nodes(), net.num_edges()),
        t0,
    );
}

fn main() -> ExitCode {
    // Skip the long training criteria when cargo only lists or filters tests.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let started = Instant::now();
    let mut report = Report { hard_failures: 0 };
    let dir = tempfile::tempdir().unwrap();

    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);

    let mut v1 = DatasetSpec::new(DatasetVersion::V1, Case::Case1, vec![10], 0);
    v1.seed = derive_seed(0, &[1]);
    generate_dataset(&v1, dir.path()).unwrap();
    let v1_d1 = read_dataset(dir.path().join("case1/v1/n10/d1.jsonl")).unwrap();
    criterion_7(&mut report, &v1_d1);

    let mut v2 = DatasetSpec::new(DatasetVersion::V2, Case::Case1, vec![50], 0);
    v2.seed = derive_seed(0, &[2]);
    generate_dataset(&v2, dir.path()).unwrap();
    let v2_deg4 = read_dataset(dir.path().join("case1/v2/n50/deg4.jsonl")).unwrap();
    criteria_8_9(&mut report, &v2_deg4);

    criterion_10(&mut report, dir.path());
    karate(&mut report);

    println!(
        "acceptance: {} hard failure(s) in {:.0}s",
        report.hard_failures,
        started.elapsed().as_secs_f64()
    );
    if report.hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
