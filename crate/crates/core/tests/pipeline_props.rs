mod common;

use a2w::pipeline::{compute_deltas, mean_padding_waste, sort_and_batch, stack_decimate, CurriculumOrder, Example};
use common::rng;
use ndarray::{s, Array2};
use proptest::prelude::*;
use rand::Rng;

fn examples(lengths: &[usize]) -> Vec<Example> {
    lengths
        .iter()
        .enumerate()
        .map(|(i, &t)| Example {
            id: format!("u{i:03}"),
            features: Array2::from_elem((t, 2), i as f64 + 1.0),
            targets: vec![],
        })
        .collect()
}

fn order() -> impl Strategy<Value = CurriculumOrder> {
    prop_oneof![
        Just(CurriculumOrder::Ascending),
        Just(CurriculumOrder::Descending),
        any::<u64>().prop_map(CurriculumOrder::Random),
    ]
}

proptest! {
    #[test]
    fn stacking_shape(t in 1usize..40, f in 1usize..6) {
        let out = stack_decimate(Array2::<f64>::ones((t, f)).view());
        prop_assert_eq!(out.dim(), (t.div_ceil(2), 2 * f));
    }

    #[test]
    fn deltas_commute_with_column_permutation(seed in any::<u64>(), t in 1usize..15, f in 1usize..5) {
        let mut r = rng(seed);
        let x = Array2::from_shape_simple_fn((t, f), || r.random_range(-1.0..1.0));
        let perm: Vec<usize> = (0..f).rev().collect();
        let xp = x.select(ndarray::Axis(1), &perm);
        let d = compute_deltas(x.view());
        let dp = compute_deltas(xp.view());
        for block in 0..3 {
            for (j, &pj) in perm.iter().enumerate() {
                prop_assert_eq!(dp.column(block * f + j), d.column(block * f + pj));
            }
        }
    }

    #[test]
    fn batching_partitions_the_ordered_sequence(
        lengths in prop::collection::vec(1usize..30, 0..40), b in 1usize..8, ord in order(),
    ) {
        let ex = examples(&lengths);
        let batches = sort_and_batch(&ex, ord, b).unwrap();
        let again = sort_and_batch(&ex, ord, b).unwrap();
        prop_assert_eq!(&batches, &again);

        let mut seen = Vec::new();
        for batch in &batches {
            prop_assert!(batch.len() <= b && !batch.is_empty());
            let t_max = batch.features.dim().1;
            prop_assert!(batch.lengths.contains(&t_max));
            prop_assert!((0.0..1.0).contains(&batch.padding_waste));
            let all_equal = batch.lengths.iter().all(|&l| l == batch.lengths[0]);
            prop_assert_eq!(batch.padding_waste == 0.0, all_equal);
            for (i, id) in batch.ids.iter().enumerate() {
                let orig = ex.iter().find(|e| &e.id == id).unwrap();
                prop_assert_eq!(batch.utterance(i), orig.features.view());
                prop_assert!(batch.features.slice(s![i, batch.lengths[i].., ..]).iter().all(|&v| v == 0.0));
                seen.push(id.clone());
            }
        }
        prop_assert_eq!(seen.len(), ex.len());
        if ord == CurriculumOrder::Ascending {
            let lens: Vec<usize> = batches.iter().flat_map(|b| b.lengths.clone()).collect();
            prop_assert!(lens.windows(2).all(|w| w[0] <= w[1]));
        }
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len(), ex.len());
    }
}

#[test]
fn ascending_wastes_no_more_than_random_on_every_set() {
    let mut r = rng(2024);
    for set in 0..100 {
        let b = r.random_range(2..10);
        let n = b * r.random_range(1..10);
        let lengths: Vec<usize> = (0..n).map(|_| r.random_range(1..60)).collect();
        let ex = examples(&lengths);
        let asc = mean_padding_waste(&sort_and_batch(&ex, CurriculumOrder::Ascending, b).unwrap());
        let rnd = mean_padding_waste(&sort_and_batch(&ex, CurriculumOrder::Random(set), b).unwrap());
        assert!(asc <= rnd + 1e-12, "set {set}: ascending {asc} > random {rnd}");
    }
}
