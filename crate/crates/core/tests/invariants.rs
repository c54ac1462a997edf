use proptest::prelude::*;

use labeldist::dawid_skene::{dawid_skene_fit, DawidSkeneConfig};
use labeldist::ingest::{
    collapse_to_counts, parse_counts_reader, parse_long_reader, stratified_split, AnnotationMatrix, AnnotationRecord,
    Dataset, FieldMap, Item, LongCsvSchema,
};
use labeldist::targets::subsample_counts;
use labeldist::AnnotationCounts;

fn class_names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

/// (item, annotator, label) triples with one label per pair.
fn records() -> impl Strategy<Value = (usize, Vec<(usize, usize, usize)>)> {
    (2usize..5).prop_flat_map(|k| {
        let rows = proptest::collection::btree_map((0usize..12, 0usize..6), 0..k, 1..60);
        (Just(k), rows.prop_map(|m| m.into_iter().map(|((i, a), l)| (i, a, l)).collect()))
    })
}

fn matrix(k: usize, rows: &[(usize, usize, usize)], relabel: &[usize]) -> AnnotationMatrix {
    let recs = rows
        .iter()
        .map(|&(i, a, l)| AnnotationRecord {
            item_id: format!("i{i:02}"),
            annotator_id: format!("a{a}"),
            label: relabel[l],
        })
        .collect();
    AnnotationMatrix::new(recs, class_names(k)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ds_is_equivariant_under_class_relabeling((k, rows) in records(), shift in 1usize..4) {
        let identity: Vec<usize> = (0..k).collect();
        let perm: Vec<usize> = (0..k).map(|c| (c + shift) % k).collect();
        let cfg = DawidSkeneConfig::default();
        let a = dawid_skene_fit(&matrix(k, &rows, &identity), &cfg).unwrap();
        let b = dawid_skene_fit(&matrix(k, &rows, &perm), &cfg).unwrap();
        prop_assert_eq!(&a.item_ids, &b.item_ids);
        prop_assert_eq!(a.iterations_run, b.iterations_run);
        for (pa, pb) in a.posteriors.iter().zip(&b.posteriors) {
            for c in 0..k {
                prop_assert!((pa.probs()[c] - pb.probs()[perm[c]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn long_csv_totals_match_row_count((k, rows) in records()) {
        let mut csv = String::from("item_id,rater_id,label\n");
        for &(i, a, l) in &rows {
            csv.push_str(&format!("i{i:02},a{a},c{l}\n"));
        }
        let m = parse_long_reader(csv.as_bytes(), &LongCsvSchema::new(class_names(k))).unwrap();
        prop_assert_eq!(m.len(), rows.len());
        let ds = collapse_to_counts(&m).unwrap();
        prop_assert_eq!(ds.total_annotations(), rows.len() as u64);
    }

    #[test]
    fn counts_jsonl_round_trips_totals(counts in proptest::collection::vec(proptest::collection::vec(0u64..40, 3), 1..30)) {
        let mut text = String::new();
        let mut expected = 0;
        for (i, c) in counts.iter().enumerate() {
            if c.iter().sum::<u64>() == 0 {
                continue;
            }
            expected += c.iter().sum::<u64>();
            text.push_str(&format!(r#"{{"uid":"u{i}","label_counter":{{"e":{},"n":{},"c":{}}}}}"#, c[0], c[1], c[2]));
            text.push('\n');
        }
        prop_assume!(expected > 0);
        let ds = parse_counts_reader(text.as_bytes(), &FieldMap::default()).unwrap();
        prop_assert_eq!(ds.total_annotations(), expected);
    }

    #[test]
    fn split_is_a_stratified_partition(labels in proptest::collection::vec(0usize..3, 10..300), seed in any::<u64>()) {
        let items: Vec<Item> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let mut c = vec![1u64; 3];
                c[l] += 5;
                Item { item_id: format!("i{i:03}"), counts: AnnotationCounts::new(c).unwrap(), text: None }
            })
            .collect();
        let ds = Dataset::new(items, class_names(3)).unwrap();
        let s = stratified_split(&ds, [0.7, 0.15, 0.15], seed).unwrap();
        let (a, b, c) = s.sizes();
        prop_assert_eq!(a + b + c, ds.len());
        let mut all: Vec<&String> = s.train.iter().chain(&s.val).chain(&s.test).collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), ds.len());
        // every class lands in each part in proportion, up to rounding
        for class in 0..3 {
            let total = labels.iter().filter(|&&l| l == class).count() as f64;
            let in_test = s.test.iter().filter(|id| labels[id[1..].parse::<usize>().unwrap()] == class).count() as f64;
            prop_assert!((in_test - 0.15 * total).abs() <= 1.0 + 1e-9);
        }
        prop_assert_eq!(s, stratified_split(&ds, [0.7, 0.15, 0.15], seed).unwrap());
    }

    #[test]
    fn subsample_preserves_size_and_support(c in proptest::collection::vec(0u64..30, 2..6), n in 1u64..60, seed in any::<u64>()) {
        let total: u64 = c.iter().sum();
        prop_assume!(total > 0);
        let counts = AnnotationCounts::new(c.clone()).unwrap();
        let n = n.min(total);
        let sub = subsample_counts(&counts, n, seed).unwrap();
        prop_assert_eq!(sub.counts().iter().sum::<u64>(), n);
        for (s, o) in sub.counts().iter().zip(&c) {
            prop_assert!(s <= o);
        }
    }
}
