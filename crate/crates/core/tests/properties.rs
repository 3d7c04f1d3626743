use std::collections::{BTreeMap, BTreeSet};

use hintkg_core::choice::{mock_oracle_recommend, parse_choice};
use hintkg_core::config::{SelectionMode, TaskKind};
use hintkg_core::discovery::{merge_pools, DiscoveryMode, HintSet, Provenance, ScoredTuple};
use hintkg_core::graph::{GraphBuilder, ItemId, KnowledgeGraph, TupleId};
use hintkg_core::instances::build_instances;
use hintkg_core::interactions::{truncate_and_pad_history, InteractionLog, Split, SplitPolicy, UserId};
use hintkg_core::pass::bpr_loss;
use hintkg_core::prompt::{render_item_hint_prompt, render_naive_triples, render_user_hint_prompt};
use hintkg_core::select::{hint_count, select_hints, CredibilityDistribution};
use hintkg_core::tensor::{cosine_similarity, softmax};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Items are `i0..`, attributes `a0..`, relations `r0..`.
fn graph_from(items: usize, attrs: usize, rels: usize, triples: &[(usize, usize, usize)]) -> KnowledgeGraph {
    let mut b = GraphBuilder::new();
    for i in 0..items {
        b.add_entity(&format!("i{i}"), &format!("Item number {i}"), "item", true).unwrap();
    }
    for a in 0..attrs {
        b.add_entity(&format!("a{a}"), &format!("attribute value {a}"), "attr", false).unwrap();
    }
    for r in 0..rels {
        b.add_relation(&format!("r{r}"), &format!("relation{r}")).unwrap();
    }
    for &(h, r, t) in triples {
        b.add_triple(&format!("i{}", h % items), &format!("r{}", r % rels), &format!("a{}", t % attrs)).unwrap();
    }
    b.build().unwrap()
}

fn triples() -> impl Strategy<Value = Vec<(usize, usize, usize)>> {
    prop::collection::vec((0usize..12, 0usize..4, 0usize..15), 1..80)
}

fn scored(ids: &[u32]) -> Vec<ScoredTuple> {
    ids.iter()
        .map(|&i| ScoredTuple {
            tuple: hintkg_core::graph::AttributeTuple {
                relation: hintkg_core::graph::RelationId(0),
                tail: hintkg_core::graph::EntityId(i),
                index: TupleId(i),
            },
            credibility: 1.0,
            source: Provenance::Candidate,
        })
        .collect()
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(xs in prop::collection::vec(-50.0f64..50.0, 1..40), shift in -100.0f64..100.0) {
        let p = softmax(&xs);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cosine_bounded_symmetric_scale_free(
        a in prop::collection::vec(-5.0f64..5.0, 6),
        b in prop::collection::vec(-5.0f64..5.0, 6),
        s in 0.1f64..10.0,
    ) {
        let c = cosine_similarity(&a, &b).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
        prop_assert!((c - cosine_similarity(&b, &a).unwrap()).abs() < 1e-12);
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        prop_assert!((c - cosine_similarity(&scaled, &b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn hint_count_formula(alpha in 0.0f64..=1.0, pool in 0usize..200, cap in 1usize..20) {
        let expected = if alpha == 0.0 || pool == 0 {
            0
        } else {
            ((alpha * pool as f64 + 0.5).floor() as usize).clamp(1, cap)
        };
        prop_assert_eq!(hint_count(alpha, pool, cap), expected.min(pool));
    }

    #[test]
    fn top_k_takes_the_most_credible(logits in prop::collection::vec(-3.0f64..3.0, 1..40), alpha in 0.01f64..=1.0, cap in 1usize..16) {
        let probs = softmax(&logits);
        let dist = CredibilityDistribution::new(probs.iter().enumerate().map(|(i, &p)| (TupleId(i as u32), p)).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = select_hints(&dist, alpha, cap, SelectionMode::TopK, &mut rng);
        let m = hint_count(alpha, probs.len(), cap);
        prop_assert_eq!(got.len(), m);
        // oracle: sort indices by (-p, id)
        let mut idx: Vec<usize> = (0..probs.len()).collect();
        idx.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
        let want: Vec<TupleId> = idx[..m].iter().map(|&i| TupleId(i as u32)).collect();
        prop_assert_eq!(got.iter().map(|e| e.0).collect::<Vec<_>>(), want);
    }

    #[test]
    fn weighted_sample_is_a_distinct_sorted_subset(logits in prop::collection::vec(-3.0f64..3.0, 1..40), alpha in 0.01f64..=1.0, seed: u64) {
        let probs = softmax(&logits);
        let dist = CredibilityDistribution::new(probs.iter().enumerate().map(|(i, &p)| (TupleId(i as u32), p)).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let got = select_hints(&dist, alpha, 16, SelectionMode::WeightedSample, &mut rng);
        prop_assert_eq!(got.len(), hint_count(alpha, probs.len(), 16));
        let ids: BTreeSet<TupleId> = got.iter().map(|e| e.0).collect();
        prop_assert_eq!(ids.len(), got.len());
        for (k, p) in &got {
            prop_assert_eq!(*p, probs[k.0 as usize]);
        }
        prop_assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn ego_networks_match_brute_force(ts in triples()) {
        let g = graph_from(12, 15, 4, &ts);
        let distinct: BTreeSet<(usize, usize, usize)> = ts.iter().map(|&(h, r, t)| (h % 12, r % 4, t % 15)).collect();
        prop_assert_eq!(g.triples().len(), distinct.len());
        prop_assert_eq!(g.duplicate_triples(), ts.len() - distinct.len());
        let pairs: BTreeSet<(usize, usize)> = distinct.iter().map(|&(_, r, t)| (r, t)).collect();
        prop_assert_eq!(g.num_tuples(), pairs.len());
        for i in 0..12 {
            let item = g.item_by_key(&format!("i{i}")).unwrap();
            let want: BTreeSet<(String, String)> = distinct
                .iter()
                .filter(|&&(h, _, _)| h == i)
                .map(|&(_, r, t)| (format!("r{r}"), format!("a{t}")))
                .collect();
            let got: BTreeSet<(String, String)> = g
                .item_ego_network(item)
                .unwrap()
                .into_iter()
                .map(|at| {
                    (g.relations()[at.relation.0 as usize].key.clone(), g.entity(at.tail).unwrap().key.clone())
                })
                .collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn subgraph_is_the_union_of_ego_networks(ts in triples(), picks in prop::collection::vec(0usize..12, 0..10)) {
        let g = graph_from(12, 15, 4, &ts);
        let items: Vec<ItemId> = picks.iter().map(|i| g.item_by_key(&format!("i{i}")).unwrap()).collect();
        let mut want: BTreeSet<TupleId> = BTreeSet::new();
        for &v in &items {
            want.extend(g.ego_tuples(v).unwrap().iter().copied());
        }
        let got = g.subgraph_of(&items).unwrap();
        prop_assert!(got.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), want);
    }

    #[test]
    fn leave_one_out_split(records in prop::collection::vec((0u8..8, 0usize..12, -1000i64..1000), 0..120)) {
        let g = graph_from(12, 3, 1, &[(0, 0, 0)]);
        let owned: Vec<(String, String, i64)> = records.iter().map(|&(u, i, t)| (format!("u{u}"), format!("i{i}"), t)).collect();
        let log = InteractionLog::from_records(&g, owned.iter().map(|(u, i, t)| (u.as_str(), i.as_str(), *t)), SplitPolicy::LeaveOneOut).unwrap();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (u, _, _) in &owned {
            *counts.entry(u.as_str()).or_default() += 1;
        }
        prop_assert_eq!(log.num_users(), counts.values().filter(|&&n| n >= 3).count());
        prop_assert_eq!(log.skipped().len(), counts.values().filter(|&&n| n < 3).count());
        for (_, h) in log.users() {
            let n = h.interactions.len();
            prop_assert_eq!(n, counts[h.key.as_str()]);
            prop_assert_eq!(h.train_len(), n - 2);
            prop_assert_eq!(h.interactions[n - 1].split, Split::Test);
            prop_assert_eq!(h.interactions[n - 2].split, Split::Valid);
            prop_assert!(h.interactions[..n - 2].iter().all(|x| x.split == Split::Train));
            prop_assert!(h.interactions.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        }
    }

    #[test]
    fn instances_are_well_formed(records in prop::collection::vec((0u8..6, 0usize..30, 0i64..100), 20..120), listwise: bool, seed: u64) {
        let g = graph_from(30, 3, 1, &[(0, 0, 0)]);
        let owned: Vec<(String, String, i64)> = records.iter().map(|&(u, i, t)| (format!("u{u}"), format!("i{i}"), t)).collect();
        let log = InteractionLog::from_records(&g, owned.iter().map(|(u, i, t)| (u.as_str(), i.as_str(), *t)), SplitPolicy::LeaveOneOut).unwrap();
        let task = if listwise { TaskKind::Listwise } else { TaskKind::Pairwise };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for split in [Split::Train, Split::Valid, Split::Test] {
            let set = build_instances(&log, &g, split, task, &mut rng);
            for inst in &set.instances {
                let h = log.user(inst.user).unwrap();
                let seen: BTreeSet<ItemId> = h.items().collect();
                prop_assert_eq!(inst.candidates.len(), task.candidates());
                prop_assert_eq!(inst.candidates.iter().collect::<BTreeSet<_>>().len(), task.candidates());
                let gold_at = if split == Split::Test { inst.history_end + 1 } else { inst.history_end };
                prop_assert_eq!(inst.gold(), h.interactions[gold_at].item);
                for (c, v) in inst.candidates.iter().enumerate() {
                    prop_assert!(c == inst.target || !seen.contains(v));
                }
                if split != Split::Train {
                    prop_assert_eq!(inst.history_end, h.train_len());
                }
            }
        }
    }

    #[test]
    fn padding_keeps_the_suffix(seq in prop::collection::vec(1u32..50, 0..30), len in 1usize..20) {
        let items: Vec<ItemId> = seq.iter().map(|&i| ItemId(i)).collect();
        let out = truncate_and_pad_history(&items, len);
        prop_assert_eq!(out.len(), len);
        let real: Vec<ItemId> = out.iter().copied().filter(|v| !v.is_pad()).collect();
        prop_assert_eq!(&real[..], &items[items.len().saturating_sub(len)..]);
        prop_assert!(out[..len - real.len()].iter().all(|v| v.is_pad()));
    }

    #[test]
    fn pool_merge_keeps_own_provenance(
        own in prop::collection::btree_set(0u32..40, 0..15),
        others in prop::collection::vec(prop::collection::btree_set(0u32..40, 0..15), 0..4),
    ) {
        let own_ids: Vec<TupleId> = own.iter().map(|&i| TupleId(i)).collect();
        let other_ids: Vec<Vec<TupleId>> = others.iter().map(|s| s.iter().map(|&i| TupleId(i)).collect()).collect();
        let refs: Vec<(UserId, &[TupleId])> = other_ids.iter().enumerate().map(|(u, v)| (UserId(u as u32 + 10), v.as_slice())).collect();
        let merged = merge_pools(&own_ids, &refs);
        let mut union: BTreeSet<u32> = own.clone();
        others.iter().for_each(|s| union.extend(s));
        prop_assert_eq!(merged.len(), union.len());
        prop_assert_eq!(merged.iter().map(|m| m.0 .0).collect::<BTreeSet<_>>(), union);
        for (k, src) in &merged {
            if own.contains(&k.0) {
                prop_assert_eq!(*src, Provenance::OwnHistory);
            } else {
                prop_assert!(matches!(src, Provenance::Collaborative(_)));
            }
        }
    }

    #[test]
    fn bpr_is_positive_and_monotone(pos in -30.0f64..30.0, neg in prop::collection::vec(-30.0f64..30.0, 1..20), bump in 0.01f64..5.0) {
        let l = bpr_loss(pos, &neg);
        prop_assert!(l > 0.0);
        prop_assert!(bpr_loss(pos + bump, &neg) < l);
    }

    #[test]
    fn flattened_items_save_exactly_the_repeated_heads(ts in triples(), item in 0usize..12) {
        let g = graph_from(12, 15, 4, &ts);
        let v = g.item_by_key(&format!("i{item}")).unwrap();
        let hints: Vec<ScoredTuple> = g
            .item_ego_network(v)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(i, tuple)| ScoredTuple { tuple, credibility: 1.0 / (i + 1) as f64, source: Provenance::Candidate })
            .collect();
        let title = g.item_title(v).unwrap();
        let flat = render_item_hint_prompt(v, &hints, &g).unwrap();
        let naive = render_naive_triples(&hints, title, &g).unwrap();
        prop_assert_eq!(flat.matches(title).count(), 1);
        let n = hints.len() as i64;
        if n > 0 {
            // labels cost 25 characters; each extra clause repeats the head
            // plus four characters of brackets and separators
            let h = title.chars().count() as i64;
            let saving = naive.chars().count() as i64 - flat.chars().count() as i64;
            prop_assert_eq!(saving, (n - 1) * h + 4 * n - 25);
            if n >= 3 && h >= 7 {
                prop_assert!(flat.len() < naive.len());
            }
        }
        let user = render_user_hint_prompt(&hints, &g).unwrap();
        prop_assert!(!user.contains(title));
    }

    #[test]
    fn exact_titles_always_parse(raw in prop::collection::vec("[A-Za-z][A-Za-z ]{0,10}[A-Za-z]", 2..8), pick in 0usize..8, pad in " {0,3}") {
        let mut seen = BTreeSet::new();
        let titles: Vec<String> = raw.into_iter().filter(|t| seen.insert(t.to_lowercase())).collect();
        prop_assume!(titles.len() >= 2);
        let refs: Vec<&str> = titles.iter().map(String::as_str).collect();
        let i = pick % titles.len();
        let p = parse_choice(&format!("{pad}{}{pad}", titles[i].to_uppercase()), &refs);
        prop_assert_eq!(p.matched, Some(i));
        prop_assert_eq!(parse_choice("0123456789", &refs).matched, None);
    }

    #[test]
    fn oracle_maximizes_overlap(user in prop::collection::btree_set(0u32..20, 0..8), items in prop::collection::vec(prop::collection::btree_set(0u32..20, 0..6), 2..6)) {
        let u: Vec<u32> = user.iter().copied().collect();
        let hs = HintSet {
            instance: 0,
            mode: DiscoveryMode::Normal,
            user_hints: scored(&u),
            item_hints: items.iter().map(|s| scored(&s.iter().copied().collect::<Vec<_>>())).collect(),
            collaborators: vec![],
            user_side_degraded: false,
        };
        let titles: Vec<String> = (0..items.len()).map(|i| format!("T{}", (i * 7) % 5)).collect();
        let refs: Vec<&str> = titles.iter().map(String::as_str).collect();
        let got = mock_oracle_recommend(&hs, &refs).unwrap();
        let overlap = |s: &BTreeSet<u32>| s.intersection(&user).count();
        let best = items.iter().map(overlap).max().unwrap();
        prop_assert_eq!(overlap(&items[got]), best);
        for (c, s) in items.iter().enumerate() {
            if overlap(s) == best {
                prop_assert!(refs[got] <= refs[c]);
            }
        }
    }
}
