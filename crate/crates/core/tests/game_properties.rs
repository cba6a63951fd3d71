use proptest::prelude::*;
use rand::SeedableRng;

use ess::analysis::cross_k_embed;
use ess::game::{validate_partition, GameRng};
use ess::rl::binary_search::{
    binary_search_partition, probe_bound, ConstantComparator, ExactComparator,
};
use ess::rl::encode::{
    attacker_action_to_partition, decode_defender_obs, encode_attacker_obs, encode_defender_obs,
};
use ess::start_states::{StartDistribution, StartKind};
use ess::strategies::{
    optimal_defender_choice, prefix_attacker_partition, random_partition, AttackerKind,
    DefenderKind,
};
use ess::{play_match, DestroyChoice, GameState, Units, Winner};

fn units(side: &[u64]) -> Units {
    side.iter()
        .enumerate()
        .map(|(i, &n)| (n as Units) << i)
        .sum()
}

/// Non-terminal boards: K in 1..=8, nothing on the top level, at least one piece.
fn board() -> impl Strategy<Value = GameState> {
    (1usize..=8)
        .prop_flat_map(|k| prop::collection::vec(0u64..6, k))
        .prop_filter("needs a piece", |c| c.iter().any(|&n| n > 0))
        .prop_map(|mut c| {
            c.push(0);
            GameState::new(c).unwrap()
        })
}

/// Boards strictly below potential one, from the spread sampler.
fn sub_critical_board() -> impl Strategy<Value = GameState> {
    (1usize..=10)
        .prop_flat_map(|k| (Just(k), 1..(1 as Units) << k, any::<u64>()))
        .prop_map(|(k, target, seed)| {
            let dist = StartDistribution::new(StartKind::RandomSpread, k, target).unwrap();
            dist.sample(&mut GameRng::seed_from_u64(seed)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn prefix_partition_is_legal_and_covers_the_board(state in board()) {
        let p = prefix_attacker_partition(&state);
        prop_assert!(validate_partition(&state, &p).is_empty());
        prop_assert_eq!(p.merged(), state.counts().to_vec());
    }

    #[test]
    fn survivors_double_in_units(state in board(), seed in any::<u64>()) {
        let mut rng = GameRng::seed_from_u64(seed);
        let p = random_partition(&state, &mut rng);
        for choice in [DestroyChoice::A, DestroyChoice::B] {
            let next = state.apply_move(&p, choice).unwrap();
            let kept = p.side(choice.other());
            prop_assert_eq!(units(next.counts()), 2 * units(kept));
        }
    }

    #[test]
    fn optimal_defender_never_increases_potential(state in board(), seed in any::<u64>()) {
        let mut rng = GameRng::seed_from_u64(seed);
        let p = random_partition(&state, &mut rng);
        let next = state.apply_move(&p, optimal_defender_choice(&p)).unwrap();
        prop_assert!(units(next.counts()) <= units(state.counts()));
    }

    #[test]
    fn below_one_the_optimal_defender_wins(state in sub_critical_board(), seed in any::<u64>()) {
        for attacker in [AttackerKind::Prefix, AttackerKind::disjoint(), AttackerKind::Random] {
            let r = play_match(&attacker, &DefenderKind::Optimal, &state, seed).unwrap();
            prop_assert_eq!(r.winner(), Some(Winner::Defender));
        }
    }

    #[test]
    fn from_one_the_prefix_attacker_wins(state in board()) {
        prop_assume!(units(state.counts()) >= (1 as Units) << state.levels());
        let r = play_match(&AttackerKind::Prefix, &DefenderKind::Optimal, &state, 0).unwrap();
        prop_assert_eq!(r.winner(), Some(Winner::Attacker));
    }

    #[test]
    fn exact_binary_search_is_the_prefix_cut(state in board()) {
        let found = binary_search_partition(&state, &ExactComparator);
        prop_assert_eq!(&found.partition, &prefix_attacker_partition(&state));
        prop_assert!(found.probes <= probe_bound(state.total_pieces()));
    }

    #[test]
    fn always_a_comparator_puts_everything_in_b(state in board()) {
        prop_assume!(state.total_pieces() > 1);
        let found = binary_search_partition(&state, &ConstantComparator(true));
        prop_assert_eq!(units(&found.partition.a), 0);
        prop_assert_eq!(found.partition.b, state.counts().to_vec());
    }

    #[test]
    fn defender_observations_round_trip(state in board(), seed in any::<u64>()) {
        let mut rng = GameRng::seed_from_u64(seed);
        let p = random_partition(&state, &mut rng);
        let obs = encode_defender_obs(&p);
        prop_assert_eq!(obs.values.len(), 2 * (state.levels() + 1));
        prop_assert_eq!(decode_defender_obs(&obs).unwrap(), p);
    }

    #[test]
    fn attacker_actions_are_one_per_level(state in board()) {
        prop_assert_eq!(encode_attacker_obs(&state).values.len(), state.levels() + 1);
        for level in 0..=state.levels() {
            let p = attacker_action_to_partition(&state, level).unwrap();
            prop_assert!(validate_partition(&state, &p).is_empty());
        }
        prop_assert!(attacker_action_to_partition(&state, state.levels() + 1).is_err());
    }

    #[test]
    fn embedding_keeps_the_real_potential(state in board(), extra in 0usize..6) {
        let big = state.levels() + extra;
        let embedded = cross_k_embed(&state, big).unwrap();
        prop_assert_eq!(embedded.levels(), big);
        prop_assert_eq!(embedded.potential().as_f64(), state.potential().as_f64());
        prop_assert_eq!(units(embedded.counts()), units(state.counts()) << extra);
    }

    #[test]
    fn sampled_starts_hit_their_target(k in 1usize..=12, frac in 0.0f64..2.0, kind in 0usize..3, seed in any::<u64>()) {
        let target = ((frac * ((1u64 << k) as f64)) as Units).max(1);
        let kind = [StartKind::Level0, StartKind::RandomSpread, StartKind::SingleLevelConcentrated][kind];
        let dist = StartDistribution::new(kind, k, target).unwrap();
        let state = dist.sample(&mut GameRng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(units(state.counts()), target);
        prop_assert_eq!(state.counts()[k], 0);
    }

    #[test]
    fn matches_replay_to_their_outcome(state in board(), seed in any::<u64>()) {
        let attacker = AttackerKind::mixed(0.5).unwrap();
        let r = play_match(&attacker, &DefenderKind::Random, &state, seed).unwrap();
        prop_assert_eq!(Some(r.replay().unwrap()), r.outcome);
        let again = play_match(&attacker, &DefenderKind::Random, &state, seed).unwrap();
        prop_assert_eq!(r, again);
    }
}

#[test]
fn embedding_into_a_smaller_board_is_refused() {
    let state = GameState::new(vec![0, 2, 0, 0]).unwrap();
    assert!(cross_k_embed(&state, 2).is_err());
    assert_eq!(cross_k_embed(&state, 3).unwrap(), state);
}
