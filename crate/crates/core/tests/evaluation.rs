mod common;

use netmpg::evaluation::*;
use netmpg::exec::Parallelism;
use netmpg::environments::random_networked_mpg;
use netmpg::learning::{exact_local_advantages, softmax, JointPolicy, PolicyTable};
use netmpg::model::{GameModel, InitialDistribution};
use netmpg::network::AgentGraph;
use rand::{Rng, SeedableRng};
use proptest::prelude::*;

fn line3(seed: u64) -> GameModel {
    random_networked_mpg(&AgentGraph::line(3).unwrap(), &[2; 3], &[2; 3], 0.9, seed, false).unwrap()
}

#[test]
fn geometric_value() {
    let m = common::bandit(&[1.0], 0.9);
    let policy = JointPolicy::uniform(&m, 0).unwrap();
    let t = exact_evaluate(&m, &policy).unwrap();
    assert!((t.v(0, 0) - 10.0).abs() < 1e-9);
    assert!((t.q(0, 0, 0) - 10.0).abs() < 1e-9);
}

#[test]
fn zero_reward_tables_vanish() {
    let m = common::with_constant_reward(&line3(1), 0.0);
    let policy = JointPolicy::random(&m, 1, 1.0, 2).unwrap();
    let t = exact_evaluate(&m, &policy).unwrap();
    for i in 0..3 {
        assert!(t.values(i).iter().all(|&v| v == 0.0));
        assert!(t.q_values(i).iter().all(|&v| v == 0.0));
        assert!(t.advantages(i).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn table_invariants_and_methods_agree() {
    for seed in 0..4 {
        let m = random_networked_mpg(&AgentGraph::ring(4).unwrap(), &[2, 3, 2, 2], &[2; 4], 0.9, seed, false).unwrap();
        let policy = JointPolicy::random(&m, 1, 2.0, seed + 100).unwrap();
        let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
        let vi = oracle.evaluate_with(EvalMethod::ValueIteration).unwrap();
        let direct = oracle.evaluate_with(EvalMethod::Direct).unwrap();
        assert!(vi.residual <= 1e-10, "residual {}", vi.residual);
        assert!(direct.residual <= 1e-10, "residual {}", direct.residual);
        let ceiling = m.r_max() / (1.0 - m.gamma());
        for i in 0..4 {
            for s in 0..vi.num_states {
                assert!((vi.v(i, s) - direct.v(i, s)).abs() < 1e-8);
                assert!((0.0..=ceiling).contains(&vi.v(i, s)));
                let mut avg = 0.0;
                for a in 0..vi.num_actions {
                    let q = vi.q(i, s, a);
                    assert!((0.0..=ceiling + 1e-9).contains(&q));
                    assert_eq!(vi.advantage(i, s, a), q - vi.v(i, s));
                    avg += oracle.joint_probability(s, a) * q;
                }
                assert!((avg - vi.v(i, s)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn oracle_cap_is_enforced() {
    let m = line3(0);
    let policy = JointPolicy::uniform(&m, 1).unwrap();
    let entries = oracle_entries(&m);
    // n·S·A + S²·max|A_i| = 3·8·8 + 64·2
    assert_eq!(entries, 320);
    let opts = OracleOptions {
        cap: entries - 1,
        ..Default::default()
    };
    assert!(matches!(
        JointOracle::new(&m, &policy, opts),
        Err(netmpg::Error::OracleInfeasible { .. })
    ));
}

#[test]
fn value_matches_monte_carlo() {
    let m = random_networked_mpg(&AgentGraph::line(2).unwrap(), &[2, 2], &[2, 2], 0.9, 7, false)
        .unwrap()
        .with_initial(InitialDistribution::Point(vec![1, 0]))
        .unwrap();
    let policy = JointPolicy::random(&m, 1, 1.0, 3).unwrap();
    let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
    let exact = oracle.initial_values(&oracle.evaluate().unwrap());

    // simulator tables straight from the model primitives, indexed s0 + 2·s1
    let decode = |s: usize| [s % 2, s / 2];
    let pi: Vec<[Vec<f64>; 2]> = (0..4)
        .map(|s| [policy.action_distribution(0, &decode(s)), policy.action_distribution(1, &decode(s))])
        .collect();
    let mut rows = vec![[[0.0; 2]; 2]; 16];
    let mut rewards = vec![[0.0; 2]; 16];
    for s in 0..4 {
        for a in 0..4 {
            for i in 0..2 {
                m.transition_row(i, &decode(s), &decode(a), &mut rows[s * 4 + a][i]);
                rewards[s * 4 + a][i] = m.reward(i, &decode(s), &decode(a));
            }
        }
    }
    let episodes = 1_000_000usize;
    let len = 160;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let draw = |p: &[f64], rng: &mut rand_chacha::ChaCha8Rng| usize::from(rng.gen::<f64>() >= p[0]);
    let mut acc = [(0.0, 0.0); 2];
    for _ in 0..episodes {
        let mut s = 1;
        let mut g = [0.0; 2];
        let mut discount = 1.0;
        for _ in 0..len {
            let a = draw(&pi[s][0], &mut rng) + 2 * draw(&pi[s][1], &mut rng);
            let k = s * 4 + a;
            for i in 0..2 {
                g[i] += discount * rewards[k][i];
            }
            discount *= 0.9;
            s = draw(&rows[k][0], &mut rng) + 2 * draw(&rows[k][1], &mut rng);
        }
        for i in 0..2 {
            acc[i].0 += g[i];
            acc[i].1 += g[i] * g[i];
        }
    }
    for i in 0..2 {
        let n = episodes as f64;
        let mean = acc[i].0 / n;
        let se = ((acc[i].1 / n - mean * mean) / (n - 1.0)).sqrt();
        // the truncated tail is below 10·0.9^160 ≈ 5e-7
        assert!((mean - exact[i]).abs() <= 3.0 * se + 1e-6, "agent {i}: mc {mean} exact {} se {se}", exact[i]);
    }
}

#[test]
fn visitation_rows_normalized() {
    let m = line3(3);
    let policy = JointPolicy::random(&m, 1, 1.5, 4).unwrap();
    for i in 0..3 {
        for kappa in 0..3 {
            let w = visitation_weights(&m, &policy, i, kappa).unwrap();
            assert!(w.max_row_error() <= 1e-12);
        }
    }
}

#[test]
fn full_radius_has_single_exterior() {
    let m = line3(3);
    let policy = JointPolicy::random(&m, 2, 1.5, 4).unwrap();
    let w = visitation_weights(&m, &policy, 0, 2).unwrap();
    assert_eq!(w.split.exterior_pairs(), 1);
    for l in 0..w.split.local_pairs() {
        assert_eq!(w.pair_row(l), &[1.0]);
    }
}

#[test]
fn independent_agents_have_local_free_weights() {
    // started from the product of the per-agent stationary laws, the joint
    // chain's marginals are time-invariant, so discounted occupancy factorizes
    let base = common::decoupled(2);
    let policy = JointPolicy::random(&base, 0, 1.0, 8).unwrap();
    let stationary: Vec<[f64; 2]> = (0..2)
        .map(|i| {
            let leave = |s: usize| {
                let p = policy.table(i).distribution(s as u128);
                p[0] * 0.2 + p[1] * 0.7
            };
            let (l0, l1) = (leave(0), leave(1));
            [l1 / (l0 + l1), l0 / (l0 + l1)]
        })
        .collect();
    let mu: Vec<f64> = (0..4).map(|s| stationary[0][s % 2] * stationary[1][s / 2]).collect();
    let m = base.with_initial(InitialDistribution::Weights(mu)).unwrap();
    let w = visitation_weights(&m, &policy, 0, 0).unwrap();
    let first = w.pair_row(0).to_vec();
    for l in 1..w.split.local_pairs() {
        for (x, y) in w.pair_row(l).iter().zip(&first) {
            assert!((x - y).abs() < 1e-9, "row {l} differs");
        }
    }
    // oracle: agent 1's marginal discounted occupancy times its policy
    let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
    let d = oracle.occupancy();
    let space = oracle.space();
    let mut marginal = vec![0.0; 4];
    for (s, &mass) in d.iter().enumerate() {
        for a in 0..space.num_actions {
            let (s1, a1) = (space.state(s)[1], space.action(a)[1]);
            marginal[s1 + 2 * a1] += mass * oracle.joint_probability(s, a);
        }
    }
    for (x, y) in first.iter().zip(&marginal) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn truncation_at_full_radius_is_exact() {
    let m = line3(5);
    let policy = JointPolicy::random(&m, 2, 1.0, 6).unwrap();
    let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
    let t = oracle.evaluate().unwrap();
    let split = LocalSplit::new(oracle.space(), &m.graph().kappa_neighborhood(1, 2).unwrap());
    let q_hat = truncated_q(&t, &TruncationWeights::uniform(split.clone())).unwrap();
    for s in 0..t.num_states {
        for a in 0..t.num_actions {
            assert_eq!(q_hat.values[split.local_pair(s, a)], t.q(1, s, a));
        }
    }
}

#[test]
fn truncating_a_constant_returns_it() {
    let m = common::with_constant_reward(&line3(2), 0.5);
    let policy = JointPolicy::random(&m, 1, 1.0, 6).unwrap();
    let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
    let t = oracle.evaluate().unwrap();
    let occupancy = oracle.occupancy();
    for kappa in 0..2 {
        let split = LocalSplit::new(oracle.space(), &m.graph().kappa_neighborhood(0, kappa).unwrap());
        for w in [
            TruncationWeights::uniform(split.clone()),
            TruncationWeights::visitation(&oracle, &occupancy, split.clone()),
        ] {
            for v in truncated_q(&t, &w).unwrap().values {
                assert!((v - 5.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn truncated_q_within_decay_bound() {
    let m = line3(9);
    let policy = JointPolicy::random(&m, 1, 2.0, 10).unwrap();
    let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
    let t = oracle.evaluate().unwrap();
    let occupancy = oracle.occupancy();
    for i in 0..3 {
        for kappa in 0..3 {
            let split = LocalSplit::new(oracle.space(), &m.graph().kappa_neighborhood(i, kappa).unwrap());
            let w = TruncationWeights::visitation(&oracle, &occupancy, split);
            let cert = certify_truncated_q(&m, &t, &w, "visitation").unwrap();
            assert!(cert.pass, "{}", cert.to_record());
        }
    }
}

#[test]
fn decay_certificate_examples() {
    let m = line3(4);
    let policy = JointPolicy::random(&m, 1, 1.0, 1).unwrap();
    let full = certify_decay(&m, &policy, 0, 2).unwrap();
    assert_eq!(full.max_gap, 0.0);
    assert!(full.pass);
    let c = certify_decay(&m, &policy, 1, 1).unwrap();
    assert!(c.pass && c.max_gap > 0.0 || c.max_gap == 0.0);
    let c = certify_decay(&m, &policy, 0, 1).unwrap();
    assert!(c.pass, "{}", c.to_record());

    let d = common::decoupled(3);
    let policy = JointPolicy::random(&d, 0, 1.0, 2).unwrap();
    for i in 0..3 {
        let c = certify_decay(&d, &policy, i, 0).unwrap();
        assert!(c.max_gap < 1e-9, "decoupled gap {}", c.max_gap);
    }
}

#[test]
fn decay_bound_examples() {
    assert!((decay_bound(1.0, 0.9, 0).unwrap() - 9.0).abs() < 1e-12);
    assert!((decay_bound(1.0, 0.9, 2).unwrap() - 7.29).abs() < 1e-12);
    let mut last = f64::INFINITY;
    for k in 0..50 {
        let b = decay_bound(1.0, 0.9, k).unwrap();
        assert!(b < last);
        last = b;
    }
    assert!(decay_bound(1.0, 0.0, 0).is_err());
    assert!(decay_bound(-1.0, 0.5, 0).is_err());
}

#[test]
fn certificate_record_lists_margin() {
    let c = Certificate::new("demo", Some(1), Some(0), 0.5, 2.0).with_detail("weights", "uniform");
    let rec = c.to_record();
    assert!(rec.contains("certificate=demo"));
    assert!(rec.contains("margin=1.5"));
    assert!(rec.contains("weights=uniform"));
    assert!(rec.ends_with("pass=true\n"));
}

#[test]
fn nash_gap_vanishes_at_the_optimum() {
    let single = common::bandit(&[0.3], 0.9);
    let policy = JointPolicy::uniform(&single, 0).unwrap();
    assert!(nash_gap(&single, &policy).unwrap().abs() < 1e-9);

    let m = common::bandit(&[1.0, 0.0], 0.9);
    let mut policy = JointPolicy::uniform(&m, 0).unwrap();
    policy.table_mut(0).row_mut(0).copy_from_slice(&[60.0, 0.0]);
    assert!(nash_gap(&m, &policy).unwrap() < 1e-9);
    // uniform play loses half a unit per step
    let uniform = JointPolicy::uniform(&m, 0).unwrap();
    assert!((nash_gap(&m, &uniform).unwrap() - 5.0).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nash_gap_is_non_negative(model_seed in 0u64..1000, policy_seed in 0u64..1000, scale in 0.0f64..4.0) {
        let m = line3(model_seed);
        let policy = JointPolicy::random(&m, 1, scale, policy_seed).unwrap();
        prop_assert!(nash_gap(&m, &policy).unwrap() >= 0.0);
    }
}

#[test]
fn exact_advantages_match_truncated_q() {
    for seed in 0..3 {
        let m = line3(20 + seed);
        for kappa in 0..3 {
            let policy = JointPolicy::random(&m, kappa, 1.5, seed).unwrap();
            let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
            let t = oracle.evaluate().unwrap();
            let occupancy = oracle.occupancy();
            for i in 0..3 {
                let adv = exact_local_advantages(&oracle, &t, &occupancy, &policy, i).unwrap();
                let split = LocalSplit::new(oracle.space(), &m.graph().kappa_neighborhood(i, kappa).unwrap());
                let w = TruncationWeights::visitation(&oracle, &occupancy, split.clone());
                let q_hat = truncated_q(&t, &w).unwrap();
                // marginalize Q̂ onto the own action with the local pair masses
                let table: &PolicyTable = policy.table(i);
                let mut num = vec![vec![0.0; 2]; split.local_states];
                let mut den = vec![vec![0.0; 2]; split.local_states];
                for l in 0..split.local_pairs() {
                    let ls = split.state_of_pair(l);
                    let ai = split.member_action(l, m.action_sizes(), i);
                    num[ls][ai] += w.pair_mass[l] * q_hat.values[l];
                    den[ls][ai] += w.pair_mass[l];
                }
                for ls in 0..split.local_states {
                    let obs = ls as u128;
                    let pi = table.distribution(obs);
                    if den[ls].contains(&0.0) {
                        continue;
                    }
                    let q: Vec<f64> = (0..2).map(|a| num[ls][a] / den[ls][a]).collect();
                    let v: f64 = pi.iter().zip(&q).map(|(p, x)| p * x).sum();
                    let mut centered = 0.0;
                    for a in 0..2 {
                        let got = adv.get(obs, a).unwrap();
                        assert!((got - (q[a] - v)).abs() < 1e-9, "seed {seed} κ {kappa} agent {i}");
                        centered += pi[a] * got;
                    }
                    assert!(centered.abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn full_information_exact_advantages_are_true_marginals() {
    let m = line3(40);
    let policy = JointPolicy::random(&m, 2, 1.0, 41).unwrap();
    let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
    let t = oracle.evaluate().unwrap();
    let adv = exact_local_advantages(&oracle, &t, &oracle.occupancy(), &policy, 1).unwrap();
    let space = oracle.space();
    for s in 0..space.num_states {
        let obs = policy.table(1).observation(space.state(s));
        for ai in 0..2 {
            let want: f64 = (0..space.num_actions)
                .filter(|&a| space.action(a)[1] == ai)
                .map(|a| oracle.others_probability(1, s, a) * t.advantage(1, s, a))
                .sum();
            assert!((adv.get(obs, ai).unwrap() - want).abs() < 1e-9);
        }
    }
}

#[test]
fn softmax_policy_is_used_by_oracle() {
    let m = common::bandit(&[1.0, 0.0], 0.9);
    let mut policy = JointPolicy::uniform(&m, 0).unwrap();
    policy.table_mut(0).row_mut(0).copy_from_slice(&[2f64.ln(), 0.0]);
    let p = softmax(&[2f64.ln(), 0.0]);
    let t = exact_evaluate(&m, &policy).unwrap();
    assert!((t.v(0, 0) - p[0] / 0.1).abs() < 1e-9);
}

#[test]
fn mc_point_mass_chain_is_exact() {
    let m = common::cycle(0.9).with_initial(InitialDistribution::Point(vec![0])).unwrap();
    let policy = JointPolicy::uniform(&m, 0).unwrap();
    let est = mc_local_q(&m, &policy, 0, 0, 3, 6, 1).unwrap();
    let batch = EpisodeBatch::sample(&m, &policy, 1, 6, 0, Parallelism::Sequential).unwrap();
    let len = batch.trajectories[0].len();
    for s0 in 0..3usize {
        // closed form over the rolled-out length from a visit at step s0
        let remaining = len - s0;
        let want: f64 = (0..remaining).map(|k| 0.9f64.powi(k as i32) * ((s0 + k) % 3) as f64 / 2.0).sum();
        let stats = est.get(s0 as u128, 0).unwrap();
        assert_eq!(stats.count, 3 * (1 + (5 - s0) / 3) as u64);
        let first_visit = batch.returns_to_go(0, 0, 0.9)[s0];
        assert!((first_visit - want).abs() < 1e-12);
    }
    // every visit to a state has the same infinite-horizon value up to the tail
    let exact = exact_evaluate(&m, &policy).unwrap();
    for s in 0..3 {
        let mean = est.get(s as u128, 0).unwrap().mean().unwrap();
        assert!((mean - exact.v(0, s)).abs() < 1e-6);
        assert!(est.get(s as u128, 0).unwrap().std_err() < 1e-6);
    }
}

#[test]
fn mc_standard_error_shrinks_with_episodes() {
    let m = random_networked_mpg(&AgentGraph::line(2).unwrap(), &[2, 2], &[2, 2], 0.9, 3, false).unwrap();
    let policy = JointPolicy::random(&m, 1, 1.0, 1).unwrap();
    let small = mc_local_q(&m, &policy, 0, 1, 2_000, 1, 5).unwrap();
    let large = mc_local_q(&m, &policy, 0, 1, 8_000, 1, 6).unwrap();
    for (key, s) in &small.entries {
        let l = large.entries[key];
        let ratio = l.std_err() / s.std_err();
        // four times the episodes halves the standard error
        assert!((0.4..0.6).contains(&ratio), "ratio {ratio} at {key:?}");
    }
}

#[test]
fn mc_full_radius_agrees_with_exact_q() {
    let m = random_networked_mpg(&AgentGraph::line(2).unwrap(), &[2, 2], &[2, 2], 0.9, 3, false).unwrap();
    let policy = JointPolicy::random(&m, 1, 1.0, 1).unwrap();
    let est = mc_local_q(&m, &policy, 0, 1, 4_000, 5, 11).unwrap();
    let oracle = JointOracle::new(&m, &policy, OracleOptions::default()).unwrap();
    let t = oracle.evaluate().unwrap();
    let space = oracle.space();
    let mut checked = 0;
    for s in 0..space.num_states {
        for a in 0..space.num_actions {
            let Some(stats) = est.get(s as u128, a as u128) else { continue };
            if stats.count < 30 {
                continue;
            }
            let mean = stats.mean().unwrap();
            assert!((mean - t.q(0, s, a)).abs() <= 3.0 * stats.std_err() + 1e-6, "(s,a)=({s},{a})");
            checked += 1;
        }
    }
    assert_eq!(checked, 16);
}

#[test]
fn tv_half_l1() {
    assert!((tv_distance(&[0.5, 0.5], &[0.8, 0.2]).unwrap() - 0.3).abs() < 1e-15);
}
