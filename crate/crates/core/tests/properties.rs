use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdn_core::dsp::{conditional_cdf, propagate};
use cdn_core::error::CdnError;
use cdn_core::functions::{CumulativeFunction, DiscreteTable, GaussianCdf, Pinned};
use cdn_core::graph::{Assignment, CdnGraph, VariableDomain, VariableId};
use cdn_core::oracle::suite::{joint_assignments, max_equivalence_deviation, random_table, random_tree_cdn, RandomTreeSpec};
use cdn_core::oracle::{brute_force_cdf, brute_force_pdf_discrete};
use cdn_core::ranking::{
    generate_synthetic_log, parse_match_log, skill_mode, update_skills, write_match_log, FitConfig, GameType, LogFormat,
    MatchLog, RankPolarity, SkillStore, SynthConfig,
};

fn tree(seed: u64) -> CdnGraph {
    random_tree_cdn(&mut ChaCha8Rng::seed_from_u64(seed), &RandomTreeSpec::default()).unwrap()
}

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> GaussianCdf {
    let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
        }
    }
    GaussianCdf::new(mean, cov).unwrap()
}

fn lambda_telescopes(seed: u64) -> Result<(), TestCaseError> {
    let g = tree(seed);
    let root = g.variables().next().unwrap().id;
    let ev: Assignment = g
        .variables()
        .filter(|v| v.id != root)
        .map(|v| (v.id, v.domain.hi()))
        .collect();
    let r = match propagate(&g, &ev, root) {
        Err(CdnError::ZeroEvidenceDensity) => {
            // the evidence itself must be impossible
            let VariableDomain::DiscreteOrdinal { levels } = &g.variable(root).unwrap().domain else {
                unreachable!()
            };
            let density: f64 = levels
                .iter()
                .map(|&l| {
                    let mut a = ev.clone();
                    a.insert(root, l);
                    brute_force_pdf_discrete(&g, &a).unwrap()
                })
                .sum();
            prop_assert!(density.abs() <= 1e-12, "density {density}");
            return Ok(());
        }
        other => other.unwrap(),
    };
    for (_, m) in &r.root_messages {
        let sum: f64 = (0..m.len()).map(|i| m.lambda_at(i)).sum();
        let top = m.mu_at(m.len() - 1);
        prop_assert!((sum - top).abs() <= 1e-12 * top.max(1.0), "{sum} vs {top}");
    }
    Ok(())
}

#[test]
fn lambda_telescoping_with_impossible_evidence() {
    lambda_telescopes(18246238417066693431).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_evaluation_matches_brute_force(seed in any::<u64>()) {
        let g = tree(seed);
        for a in joint_assignments(&g) {
            prop_assert_eq!(g.evaluate(&a).unwrap(), brute_force_cdf(&g, &a).unwrap());
        }
    }

    #[test]
    fn dsp_matches_inclusion_exclusion(seed in any::<u64>()) {
        let (_, dev) = max_equivalence_deviation(&tree(seed)).unwrap();
        prop_assert!(dev <= 1e-12, "deviation {dev}");
    }

    #[test]
    fn pdf_sums_to_top_corner(seed in any::<u64>()) {
        let g = tree(seed);
        let total: f64 = joint_assignments(&g).iter().map(|a| brute_force_pdf_discrete(&g, a).unwrap()).sum();
        let top: Assignment = g.variables().map(|v| (v.id, v.domain.hi())).collect();
        prop_assert!((total - g.evaluate(&top).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn root_pdf_is_root_invariant(seed in any::<u64>(), pick in any::<u64>()) {
        let g = tree(seed);
        let all = joint_assignments(&g);
        let a = &all[(pick % all.len() as u64) as usize];
        let pdfs: Vec<f64> = g.variables().map(|v| propagate(&g, a, v.id).unwrap().root_pdf.unwrap()).collect();
        for p in &pdfs {
            prop_assert!((p - pdfs[0]).abs() <= 1e-10 * pdfs[0].abs().max(1e-300));
        }
    }

    #[test]
    fn lambda_telescopes_to_mu_top(seed in any::<u64>()) {
        lambda_telescopes(seed)?;
    }

    #[test]
    fn term_counts_are_powers_of_two(seed in any::<u64>()) {
        let g = tree(seed);
        let a = joint_assignments(&g).pop().unwrap();
        let root = g.variables().last().unwrap().id;
        let r = propagate(&g, &a, root).unwrap();
        for (f, c) in &r.term_counts {
            let deg = g.function(*f).unwrap().degree();
            prop_assert_eq!(c.terms, c.values << (deg - 1));
        }
    }

    #[test]
    fn conditionals_are_cdfs(seed in any::<u64>(), mask in any::<u32>()) {
        let g = tree(seed);
        let vars: Vec<VariableId> = g.variables().map(|v| v.id).collect();
        let query = vars[(mask as usize) % vars.len()];
        let ev: Assignment = vars
            .iter()
            .enumerate()
            .filter(|(i, v)| **v != query && mask >> (i + 8) & 1 == 1)
            .map(|(_, &v)| (v, g.variable(v).unwrap().domain.hi()))
            .collect();
        if let Ok(c) = conditional_cdf(&g, query, &ev) {
            prop_assert!(c.cdf.iter().all(|p| (0.0..=1.0 + 1e-12).contains(p)));
            prop_assert!(c.cdf.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            prop_assert!((c.cdf[c.cdf.len() - 1] - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn marginalization_commutes(seed in any::<u64>(), a in 0usize..7, b in 0usize..7) {
        let g = tree(seed);
        let vars: Vec<VariableId> = g.variables().map(|v| v.id).collect();
        prop_assume!(vars.len() >= 3);
        let (a, b) = (vars[a % vars.len()], vars[b % vars.len()]);
        prop_assume!(a != b);
        let step = g.marginalize_unobserved(&BTreeSet::from([a])).unwrap().marginalize_unobserved(&BTreeSet::from([b])).unwrap();
        let both = g.marginalize_unobserved(&BTreeSet::from([a, b])).unwrap();
        for x in joint_assignments(&both) {
            prop_assert!((step.evaluate(&x).unwrap() - both.evaluate(&x).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn tree_check_agrees_with_edge_count(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CdnGraph::new();
        let n = rng.random_range(1..6);
        let vars: Vec<VariableId> = (0..n)
            .map(|i| g.add_variable(format!("v{i}"), VariableDomain::binary()).unwrap())
            .collect();
        for _ in 0..rng.random_range(1..6) {
            let k = rng.random_range(1..=n.min(3));
            let mut scope: Vec<VariableId> = Vec::new();
            while scope.len() < k {
                let v = vars[rng.random_range(0..n)];
                if !scope.contains(&v) {
                    scope.push(v);
                }
            }
            let t = random_table(&mut rng, vec![vec![0.0, 1.0]; k]).unwrap();
            g.add_function(&scope, Arc::new(t)).unwrap();
        }
        let s = g.validate_structure();
        let counted = s.edge_count + 1 == s.variable_count + s.function_count && s.is_connected;
        prop_assert_eq!(s.is_tree, counted);
    }

    #[test]
    fn gaussian_mixed_diff_is_order_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_gaussian(&mut rng, 3);
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let h = 1e-4;
        let nested = |first: usize, second: usize| {
            let d = |dz: f64| {
                let mut w = z.clone();
                w[second] += dz;
                f.mixed_diff(1 << first, &w).unwrap()
            };
            (d(h) - d(-h)) / (2.0 * h)
        };
        let direct = f.mixed_diff(0b011, &z).unwrap();
        prop_assert!((nested(0, 1) - direct).abs() <= 1e-8);
        prop_assert!((nested(1, 0) - direct).abs() <= 1e-8);
    }

    #[test]
    fn table_differences_are_order_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng, vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0], vec![0.0, 1.0, 2.0]]).unwrap();
        let z = [rng.random_range(0..3) as f64, rng.random_range(0..2) as f64, rng.random_range(0..3) as f64];
        let step = |pos: usize, inner: &dyn Fn(&[f64]) -> f64, z: &[f64]| {
            let mut below = z.to_vec();
            below[pos] -= 1.0;
            inner(z) - if below[pos] < 0.0 { 0.0 } else { inner(&below) }
        };
        let by_a = |w: &[f64]| t.mixed_diff(0b001, w).unwrap();
        let by_c = |w: &[f64]| t.mixed_diff(0b100, w).unwrap();
        let direct = t.mixed_diff(0b101, &z).unwrap();
        prop_assert!((step(2, &by_a, &z) - direct).abs() <= 1e-12);
        prop_assert!((step(0, &by_c, &z) - direct).abs() <= 1e-12);
    }

    #[test]
    fn pinning_matches_evaluation_at_the_top(seed in any::<u64>(), mask in 1u32..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_gaussian(&mut rng, 3);
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut at_top = z.clone();
        for i in 0..3 {
            if mask >> i & 1 == 1 {
                at_top[i] = f.mean()[i] + 8.0 * f.cov()[i * 3 + i].sqrt();
            }
        }
        let kept: Vec<f64> = (0..3).filter(|i| mask >> i & 1 == 0).map(|i| z[i]).collect();
        let pinned = match f.pin_to_sup(mask).unwrap() {
            Pinned::Constant(c) => c,
            Pinned::Function(g) => g.evaluate(&kept).unwrap(),
        };
        prop_assert!((pinned - f.evaluate(&at_top).unwrap()).abs() <= 1e-6);

        let levels = vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0], vec![0.0, 1.0, 2.0]];
        let t = random_table(&mut rng, levels.clone()).unwrap();
        let w: Vec<f64> = levels.iter().map(|l| l[rng.random_range(0..l.len())]).collect();
        let mut top = w.clone();
        for i in 0..3 {
            if mask >> i & 1 == 1 {
                top[i] = *levels[i].last().unwrap();
            }
        }
        let kept: Vec<f64> = (0..3).filter(|i| mask >> i & 1 == 0).map(|i| w[i]).collect();
        let pinned = match t.pin_to_sup(mask).unwrap() {
            Pinned::Constant(c) => c,
            Pinned::Function(g) => g.evaluate(&kept).unwrap(),
        };
        prop_assert_eq!(pinned, t.evaluate(&top).unwrap());
    }

    #[test]
    fn evaluations_stay_in_unit_interval(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_gaussian(&mut rng, 2);
        let z = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        let v = f.evaluate(&z).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&v));
        let t: DiscreteTable = random_table(&mut rng, vec![vec![0.0, 1.0, 2.0]]).unwrap();
        for l in [0.0, 1.0, 2.0] {
            prop_assert!((0.0..=1.0 + 1e-9).contains(&t.evaluate(&[l]).unwrap()));
        }
    }

    #[test]
    fn mode_is_scale_invariant(values in prop::collection::vec(0.0f64..1.0, 2..40), scale in 1e-3f64..1e3) {
        let mut cdf = values;
        cdf.sort_by(f64::total_cmp);
        let scaled: Vec<f64> = cdf.iter().map(|v| v * scale).collect();
        prop_assert_eq!(skill_mode(&cdf), skill_mode(&scaled));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn skill_updates_keep_valid_cdfs(seed in any::<u64>(), kind in 0usize..4) {
        let game_type = [GameType::HeadToHead, GameType::SmallTeam, GameType::LargeTeam, GameType::FreeForAll][kind];
        let log = generate_synthetic_log(&SynthConfig { players: 16, games: 6, game_type, seed, ..SynthConfig::default() }).unwrap();
        let config = FitConfig { grid_points: 41, ..FitConfig::default() };
        let params = cdn_core::ranking::fit_cutpoints(&log.records, &config).unwrap().params;
        let mut skills = SkillStore::from_params(&params).unwrap();
        for r in &log.records {
            r.teams.iter().flatten().for_each(|p| {
                skills.ensure(p);
            });
            update_skills(r, &mut skills, &params).unwrap();
        }
        for p in skills.players() {
            let s = skills.get(p).unwrap();
            prop_assert!(s.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
            prop_assert!(s.windows(2).all(|w| w[1] >= w[0]));
            prop_assert_eq!(s[s.len() - 1], 1.0);
        }
    }

    #[test]
    fn match_logs_round_trip(seed in any::<u64>(), csv in any::<bool>()) {
        let log = generate_synthetic_log(&SynthConfig { players: 20, games: 10, game_type: GameType::FreeForAll, seed, ..SynthConfig::default() }).unwrap();
        let log = MatchLog { polarity: RankPolarity::LowerIsBetter, records: log.records };
        let text = write_match_log(&log, if csv { LogFormat::Csv } else { LogFormat::Jsonl });
        let back = parse_match_log(&text).unwrap();
        prop_assert_eq!(back.records, log.records);
    }
}
