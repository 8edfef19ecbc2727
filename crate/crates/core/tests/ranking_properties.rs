use std::collections::BTreeSet;

use tabassist_core::columns::{
    rank_columns, select_column_candidates, ColCandidateConfig, ColRankingConfig, TableSignal,
};
use tabassist_core::eval::{run_evaluation, EvalConfig, Task};
use tabassist_core::rows::{
    rank_candidates, rank_rows, select_row_candidates, RowCandidateConfig, RowCandidateMethod, RowComponent,
    RowRankingConfig, RowScorer,
};
use tabassist_core::text::tokenize;
use tabassist_core::{normalize_label, SeedTable};
use tabassist_testkit::ablation;
use tabassist_testkit::harness::{cases, setup};

/// Candidate ids ordered by `key` descending, ties by id.
fn order_by(ids: &[String], key: impl Fn(&str) -> f64) -> Vec<String> {
    let mut scored: Vec<(f64, &String)> = ids.iter().map(|e| (key(e), e)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().map(|(_, e)| e.clone()).collect()
}

#[test]
fn mixture_endpoints_reduce_to_single_estimators() {
    let s = setup(17, Task::Rows, 6);
    for case in cases(&s.test_tables, Task::Rows, &[1, 2]) {
        let seed = &case.seed;
        let candidates = select_row_candidates(&s.engine, seed, &RowCandidateConfig::default());
        let ids: Vec<String> = candidates.entities.keys().cloned().collect();
        let ranked = |cfg: &RowRankingConfig| -> Vec<String> {
            rank_candidates(&s.engine, seed, &candidates, cfg).ids().map(str::to_string).collect()
        };
        let only = |c: RowComponent| RowRankingConfig::with_components([c]);
        let base = RowRankingConfig::default();
        let scorer = RowScorer::new(&s.engine, seed, &base);
        let labels: Vec<_> =
            seed.normalized_labels().into_iter().filter(|l| !tokenize(l.as_str()).is_empty()).collect();
        let n = labels.len() as f64;
        let terms = tokenize(&seed.caption);

        let cfg = RowRankingConfig { lambda_e: 1.0, ..only(RowComponent::EntitySimilarity) };
        assert_eq!(ranked(&cfg), order_by(&ids, |e| scorer.kb_component(e)), "lambda_e = 1");
        let cfg = RowRankingConfig { lambda_e: 0.0, ..only(RowComponent::EntitySimilarity) };
        assert_eq!(ranked(&cfg), order_by(&ids, |e| scorer.tc_component(e)), "lambda_e = 0");

        let lm = |e: &str| -> f64 {
            labels
                .iter()
                .map(|l| tokenize(l.as_str()).iter().map(|t| scorer.label_term_prob(t, e)).product::<f64>())
                .sum()
        };
        let em = |e: &str| -> f64 { labels.iter().map(|l| 1.0 / n * scorer.label_exact_prob(l, e)).sum() };
        let cfg = RowRankingConfig { lambda_l: 1.0, ..only(RowComponent::LabelLikelihood) };
        assert_eq!(ranked(&cfg), order_by(&ids, lm), "lambda_l = 1");
        let cfg = RowRankingConfig { lambda_l: 0.0, ..only(RowComponent::LabelLikelihood) };
        assert_eq!(ranked(&cfg), order_by(&ids, em), "lambda_l = 0");

        let kb = |e: &str| -> f64 { terms.iter().map(|t| scorer.caption_kb_term_prob(t, e)).product() };
        let tc = |e: &str| -> f64 { terms.iter().map(|t| scorer.caption_tc_term_prob(t, e)).product() };
        let cfg = RowRankingConfig { lambda_c: 1.0, ..only(RowComponent::CaptionLikelihood) };
        assert_eq!(ranked(&cfg), order_by(&ids, kb), "lambda_c = 1");
        let cfg = RowRankingConfig { lambda_c: 0.0, ..only(RowComponent::CaptionLikelihood) };
        assert_eq!(ranked(&cfg), order_by(&ids, tc), "lambda_c = 0");
    }
}

const METHODS: [RowCandidateMethod; 4] = [
    RowCandidateMethod::Categories,
    RowCandidateMethod::Types,
    RowCandidateMethod::Caption,
    RowCandidateMethod::Entities,
];

#[test]
fn row_candidates_grow_with_k_and_with_the_union() {
    for world in [17, 23] {
        let s = setup(world, Task::Rows, 6);
        for case in cases(&s.test_tables, Task::Rows, &[1, 3]) {
            let select = |cfg: &RowCandidateConfig| -> BTreeSet<String> {
                select_row_candidates(&s.engine, &case.seed, cfg).entities.into_keys().collect()
            };
            let union = select(&RowCandidateConfig::default());
            for m in METHODS {
                let mut previous = BTreeSet::new();
                for k in [1, 2, 4, 16, 64, 256] {
                    let current = select(&RowCandidateConfig::only(m, k));
                    assert!(previous.is_subset(&current), "{m:?}: k={k} lost candidates");
                    previous = current;
                }
                if m != RowCandidateMethod::Types {
                    assert!(previous.is_subset(&union), "{m:?} not contained in the union");
                }
            }
            assert!(case.seed.seed_entities.iter().all(|e| !union.contains(e)));
        }
    }
}

#[test]
fn column_candidates_grow_with_k_and_with_the_union() {
    let s = setup(23, Task::Columns, 6);
    for case in cases(&s.test_tables, Task::Columns, &[1, 2]) {
        let select = |cfg: &ColCandidateConfig| -> BTreeSet<String> {
            select_column_candidates(&s.engine.index, &case.seed, cfg).labels
        };
        let union = select(&ColCandidateConfig::default());
        for signal in TableSignal::ALL {
            let mut previous = BTreeSet::new();
            for k in [1, 2, 4, 16, 64, 256] {
                let current = select(&ColCandidateConfig::only(signal, k));
                assert!(previous.is_subset(&current), "{signal:?}: k={k} lost candidates");
                previous = current;
            }
            let at_default = select(&ColCandidateConfig::only(signal, ColCandidateConfig::default().methods[&signal]));
            assert!(at_default.is_subset(&union));
        }
    }
}

#[test]
fn rankings_exclude_seeds_and_never_increase() {
    let s = setup(31, Task::Rows, 6);
    for case in cases(&s.test_tables, Task::Rows, &[1, 2, 5]) {
        let ranked = rank_rows(&s.engine, &case.seed, &RowCandidateConfig::default(), &RowRankingConfig::default());
        assert!(ranked.items.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(ranked.ids().all(|id| !case.seed.seed_entities.iter().any(|e| e == id)));
    }
    for case in cases(&s.test_tables, Task::Columns, &[1, 2, 3]) {
        let ranked =
            rank_columns(&s.engine.index, &case.seed, &ColCandidateConfig::default(), &ColRankingConfig::default());
        let seed_forms: BTreeSet<String> =
            case.seed.seed_labels.iter().map(|l| normalize_label(l).as_str().to_string()).collect();
        assert!(ranked.items.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(ranked.ids().all(|l| !seed_forms.contains(l)));
    }
}

#[test]
fn empty_seed_fields_are_neutral() {
    let s = setup(31, Task::Rows, 6);
    let case = &cases(&s.test_tables, Task::Rows, &[2])[0];
    let no_caption = SeedTable { caption: String::new(), ..case.seed.clone() };
    let ranked = rank_rows(&s.engine, &no_caption, &RowCandidateConfig::default(), &RowRankingConfig::default());
    let without = rank_rows(
        &s.engine,
        &no_caption,
        &RowCandidateConfig::default(),
        &RowRankingConfig::with_components([RowComponent::EntitySimilarity, RowComponent::LabelLikelihood]),
    );
    assert!(ranked.items.iter().all(|x| x.neutral == ["caption"]));
    assert_eq!(ranked.ids().collect::<Vec<_>>(), without.ids().collect::<Vec<_>>());
}

fn row_map(components: &[RowComponent]) -> f64 {
    let world = ablation::row_world();
    let (engine, corpus) = world.build(&[ablation::ROW_TEST_TABLE.to_string()]);
    let test: Vec<_> = corpus.into_iter().filter(|t| t.id == ablation::ROW_TEST_TABLE).collect();
    let cfg = EvalConfig {
        seed_sizes: vec![1],
        row_ranking: RowRankingConfig::with_components(components.iter().copied()),
        ..Default::default()
    };
    let report = run_evaluation(&engine, Task::Rows, &test, &cfg).unwrap();
    let r = &report.per_seed_size[0];
    assert_eq!(r.evaluated, 1);
    assert_eq!(r.cases[0].recall, 1.0);
    r.map
}

#[test]
fn row_components_are_jointly_discriminative() {
    use RowComponent::*;
    let singles = [row_map(&[EntitySimilarity]), row_map(&[LabelLikelihood]), row_map(&[CaptionLikelihood])];
    let joint = row_map(&[EntitySimilarity, LabelLikelihood, CaptionLikelihood]);
    let best_single = singles.iter().copied().fold(0.0, f64::max);
    assert_eq!(joint, 1.0, "singles {singles:?}");
    assert!(best_single < 0.6, "singles {singles:?}");
}

fn column_map(components: &[TableSignal]) -> f64 {
    let world = ablation::column_world();
    let (engine, corpus) = world.build(&[ablation::COLUMN_TEST_TABLE.to_string()]);
    let test: Vec<_> = corpus.into_iter().filter(|t| t.id == ablation::COLUMN_TEST_TABLE).collect();
    let cfg = EvalConfig {
        seed_sizes: vec![1],
        column_ranking: ColRankingConfig::with_components(components.iter().copied()),
        ..Default::default()
    };
    let report = run_evaluation(&engine, Task::Columns, &test, &cfg).unwrap();
    let r = &report.per_seed_size[0];
    assert_eq!(r.evaluated, 1);
    assert_eq!(r.cases[0].recall, 1.0);
    r.map
}

#[test]
fn column_components_are_jointly_discriminative() {
    use TableSignal::*;
    let singles = [column_map(&[Caption]), column_map(&[Labels]), column_map(&[Entities])];
    let joint = column_map(&[Caption, Labels, Entities]);
    let best_single = singles.iter().copied().fold(0.0, f64::max);
    assert_eq!(joint, 1.0, "singles {singles:?}");
    assert!(best_single < 0.6, "singles {singles:?}");
}

#[test]
fn evaluation_is_deterministic_across_thread_counts() {
    let s = setup(41, Task::Rows, 6);
    let cfg = EvalConfig::default();
    let run = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_evaluation(&s.engine, Task::Rows, &s.test_tables, &cfg).unwrap().to_json())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(4));
}
