use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};

use ess::analysis::experiment::{run_experiment, AgentSpec, ExperimentSpec};
use ess::analysis::{
    assess_defender, build_dataset_with, build_supervised_dataset, calibration_dump,
    calibration_rows, cross_k_embed, dataset_accuracy, grade_move, null_set_check,
    random_partitions, record_matches, split_dataset, train_supervised, write_csv,
    SupervisedConfig, COMPARISON_HEADER,
};
use ess::game::{stream_rng, GameRng};
use ess::rl::agent::{Head, PolicyParams};
use ess::rl::nn::{Arch, Network};
use ess::rl::{Role, TrainedAgent};
use ess::start_states::{StartDistribution, StartKind};
use ess::strategies::{optimal_defender_choice, random_partition, AttackerKind, DefenderKind};
use ess::{DestroyChoice, GameState, Partition};

fn p(a: &[u64], b: &[u64]) -> Partition {
    Partition::new(a.to_vec(), b.to_vec())
}

fn units(side: &[u64]) -> u64 {
    side.iter().enumerate().map(|(i, &n)| n << i).sum()
}

#[test]
fn grading_examples() {
    let x = p(&[0, 1, 0], &[1, 0, 0]);
    let g = grade_move(&x, DestroyChoice::B);
    assert!(!g.correct && g.terminal_mistake && g.fatal_mistake);
    let g = grade_move(&x, DestroyChoice::A);
    assert!(g.correct && !g.terminal_mistake && !g.fatal_mistake);
    // Both sides at or above half: a wrong pick is not terminal.
    let both = p(&[0, 0, 1, 0], &[1, 0, 1, 0]);
    let g = grade_move(&both, DestroyChoice::A);
    assert!(!g.correct && !g.terminal_mistake && !g.fatal_mistake);
}

/// All (A, B) pairs with at most `max_pieces` pieces on levels below `K`.
fn all_partitions(levels: usize, max_pieces: u64) -> Vec<Partition> {
    fn go(slot: usize, left: u64, cur: &mut Vec<u64>, levels: usize, out: &mut Vec<Partition>) {
        if slot == 2 * levels {
            let mut a = cur[..levels].to_vec();
            let mut b = cur[levels..].to_vec();
            a.push(0);
            b.push(0);
            if a.iter().chain(&b).any(|&n| n > 0) {
                out.push(Partition::new(a, b));
            }
            return;
        }
        for n in 0..=left {
            cur.push(n);
            go(slot + 1, left - n, cur, levels, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, max_pieces, &mut Vec::new(), levels, &mut out);
    out
}

#[test]
fn oracle_moves_are_never_mistakes() {
    for levels in 1..=5 {
        let cap = if levels <= 3 { 12 } else { 6 };
        for part in all_partitions(levels, cap) {
            let g = grade_move(&part, optimal_defender_choice(&part));
            assert!(g.correct && !g.terminal_mistake, "{part:?}");
            let other = grade_move(&part, optimal_defender_choice(&part).other());
            assert!(!other.fatal_mistake || other.terminal_mistake);
            assert!(!other.terminal_mistake || !other.correct);
        }
    }
}

#[test]
fn datasets_have_one_row_per_defender_turn() {
    assert!(build_supervised_dataset(&[]).is_empty());
    let start = StartDistribution::new(StartKind::RandomSpread, 5, 30).unwrap();
    let records = record_matches(
        &AttackerKind::mixed(0.8).unwrap(),
        &DefenderKind::Random,
        &start,
        200,
        4,
    )
    .unwrap();
    let turns: usize = records.iter().map(|r| r.steps.len()).sum();
    let rows = build_supervised_dataset(&records);
    assert_eq!(rows.len(), turns);
    for row in &rows {
        let step = &records[row.match_index].steps[row.turn];
        assert_eq!(row.oracle_choice, optimal_defender_choice(&step.partition));
    }
    let three = records
        .iter()
        .find(|r| r.steps.len() == 3)
        .expect("some three-turn match");
    assert_eq!(
        build_supervised_dataset(std::slice::from_ref(three)).len(),
        3
    );
    assert!(build_dataset_with(&records, true).len() <= rows.len());
}

#[test]
fn supervised_classifier_separates_the_oracle_labels() {
    // Partitions with a potential gap of at least one unit on a small board.
    let start = StartDistribution::new(StartKind::RandomSpread, 3, 7).unwrap();
    let records =
        record_matches(&AttackerKind::Random, &DefenderKind::Random, &start, 300, 2).unwrap();
    let mut rows = build_dataset_with(&records, true);
    rows.retain(|r| {
        let v = &r.observation.values;
        units(&v[..4].iter().map(|&x| x as u64).collect::<Vec<_>>())
            != units(&v[4..].iter().map(|&x| x as u64).collect::<Vec<_>>())
    });
    assert!(rows.len() > 20);
    let mut cfg = SupervisedConfig::new(Arch::Linear, 1);
    cfg.epochs = 400;
    cfg.learning_rate = 0.05;
    let agent = train_supervised(&rows, &cfg).unwrap();
    assert_eq!(dataset_accuracy(&agent, &rows), 1.0);
    assert_eq!(agent, train_supervised(&rows, &cfg).unwrap());

    let (train, held) = split_dataset(&rows, 0.25, 9);
    assert_eq!(train.len() + held.len(), rows.len());
    assert_eq!(split_dataset(&rows, 0.25, 9), (train.clone(), held.clone()));
    let held_acc = dataset_accuracy(&train_supervised(&train, &cfg).unwrap(), &held);
    assert!((0.0..=1.0).contains(&held_acc));
    assert!(train_supervised(&[], &cfg).is_err());
}

#[test]
fn comparison_rows_for_scripted_defenders() {
    let start = StartDistribution::new(StartKind::RandomSpread, 5, 30).unwrap();
    let attacker = AttackerKind::mixed(0.8).unwrap();
    let oracle =
        assess_defender("oracle", &DefenderKind::Optimal, &attacker, &start, 500, 1).unwrap();
    assert_eq!(
        (
            oracle.accuracy,
            oracle.win_rate,
            oracle.fatal_rate,
            oracle.terminal_rate
        ),
        (1.0, 1.0, 0.0, 0.0)
    );
    let random =
        assess_defender("random", &DefenderKind::Random, &attacker, &start, 2000, 1).unwrap();
    // A coin is right half the time on decisive moves and always on ties.
    let records = record_matches(&attacker, &DefenderKind::Random, &start, 2000, 1).unwrap();
    let moves: Vec<&Partition> = records
        .iter()
        .flat_map(|r| r.steps.iter().map(|s| &s.partition))
        .collect();
    let ties = moves.iter().filter(|m| units(&m.a) == units(&m.b)).count() as f64;
    let expected = (ties + 0.5 * (moves.len() as f64 - ties)) / moves.len() as f64;
    assert!(
        (random.accuracy - expected).abs() < 0.03,
        "{} vs {expected}",
        random.accuracy
    );
    assert!(random.fatal_rate > 0.0 && random.fatal_rate <= random.terminal_rate);

    let mut out = Vec::new();
    write_csv(&[oracle, random], &COMPARISON_HEADER, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "agent,K,seed,accuracy,win_rate,terminal_rate,fatal_rate"
    );
    assert!(lines[1].starts_with("oracle,5,1,") && lines[2].starts_with("random,5,1,"));
}

#[test]
fn null_set_rates() {
    for levels in [1, 4, 9] {
        assert_eq!(null_set_check(&DefenderKind::Optimal, levels), 0.0);
        assert_eq!(null_set_check(&DefenderKind::AlwaysA, levels), 0.5);
    }
}

fn value_agent(levels: usize, seed: u64) -> TrainedAgent {
    let network = Network::new(
        Arch::Linear,
        2 * (levels + 1),
        2,
        &mut GameRng::seed_from_u64(seed),
    );
    TrainedAgent::new(
        Role::Defender,
        levels,
        PolicyParams {
            arch: Arch::Linear,
            network,
            head: Head::QValues,
            normalize: false,
        },
        String::new(),
    )
}

#[test]
fn calibration_output() {
    let agent = value_agent(5, 3);
    let mut out = Vec::new();
    calibration_dump(&agent, &[], &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1);

    let parts = random_partitions(5, 300, 8).unwrap();
    let rows = calibration_rows(&agent, &parts).unwrap();
    assert_eq!(rows.len(), parts.len());
    assert_eq!(rows, calibration_rows(&agent, &parts).unwrap());
    let (mut a, mut b) = (Vec::new(), Vec::new());
    calibration_dump(&agent, &parts, &mut a).unwrap();
    calibration_dump(&agent, &parts, &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn embedding_examples() {
    let small = GameState::new(vec![0, 2, 0]).unwrap();
    let big = cross_k_embed(&small, 4).unwrap();
    assert_eq!(big.counts(), &[0, 0, 0, 2, 0]);
    assert_eq!(big.potential().as_f64(), 1.0);
    assert_eq!(cross_k_embed(&small, 2).unwrap(), small);
    for i in 0..100 {
        let mut rng = stream_rng(21, i);
        let levels = rng.random_range(1..=6);
        let start =
            StartDistribution::new(StartKind::RandomSpread, levels, rng.random_range(1..64))
                .unwrap();
        let state = start.sample(&mut rng).unwrap();
        let target = levels + rng.random_range(0..=6);
        let embedded = cross_k_embed(&state, target).unwrap();
        assert_eq!(
            units(embedded.counts()),
            units(state.counts()) << (target - levels)
        );
        let part = random_partition(&state, &mut rng);
        assert_eq!(
            grade_move(&part, DestroyChoice::A).correct,
            units(&part.a) >= units(&part.b)
        );
    }
}

fn experiments_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

#[test]
fn checked_in_specs_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(experiments_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let spec = ExperimentSpec::load(&path).unwrap();
            spec.validate()
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 7, "found {seen} specs");
}

#[test]
fn oracle_spec_wins_everything() {
    let spec = ExperimentSpec::load(&experiments_dir().join("oracle_check.toml")).unwrap();
    let result = run_experiment(&spec, 1).unwrap();
    assert_eq!(result.rows.len(), spec.seeds.len() * spec.tests.len());
    assert!(result.rows.iter().all(|r| r.win_rate == 1.0));
    assert!(result
        .aggregate
        .iter()
        .all(|a| a.min == 1.0 && a.max == 1.0));
}

const CURRICULUM: &str = r#"
name = "curriculum"
seeds = [3, 4]
eval_games = 100
agent = { kind = "train", algorithm = "actor_critic", arch = "linear" }

[[stages]]
K = 3
start = "spread"
units = 7
opponent = "mixed"
steps = 1000

[[stages]]
K = 4
start = "spread"
units = 14
opponent = "prefix"
steps = 1000

[[tests]]
name = "small"
K = 3
start = "spread"
units = 7
opponent = "mixed"

[[tests]]
name = "large"
K = 4
start = "level0"
units = 14
opponent = "prefix"
"#;

#[test]
fn curricula_are_tested_after_every_stage_and_rerun_identically() {
    let spec = ExperimentSpec::from_toml(CURRICULUM).unwrap();
    let first = run_experiment(&spec, 1).unwrap();
    assert_eq!(first.rows.len(), 2 * 2 * 2);
    assert!(first
        .rows
        .iter()
        .all(|r| r.after_stage == 1 || r.after_stage == 2));
    let second = run_experiment(&spec, 2).unwrap();
    assert_eq!(first.rows, second.rows);

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    first.write_to(a.path()).unwrap();
    second.write_to(b.path()).unwrap();
    for name in ["per_seed.csv", "aggregate.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn bad_specs_fail_before_training() {
    let mut spec = ExperimentSpec::from_toml(CURRICULUM).unwrap();
    spec.seeds.clear();
    assert!(run_experiment(&spec, 1).unwrap_err().is_config());

    let mut spec = ExperimentSpec::from_toml(CURRICULUM).unwrap();
    spec.agent = AgentSpec::Policy {
        path: "no/such/agent.json".into(),
    };
    spec.stages.clear();
    assert!(spec.validate().unwrap_err().is_config());

    let mut spec = ExperimentSpec::from_toml(CURRICULUM).unwrap();
    spec.tests[1].env.levels = 6;
    spec.tests[1].env.units = 50;
    assert!(spec.validate().unwrap_err().is_config());
}
