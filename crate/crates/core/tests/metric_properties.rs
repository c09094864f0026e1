use fdshift_core::metrics::{ap_f, auroc_f, e_aurc, optimal_scores, rc_curve, ApPositive, EAurcMode};
use fdshift_core::oracle::{aurc_oracle, auroc_oracle};
use fdshift_core::FailureLabels;
use proptest::prelude::*;

/// Scores on a coarse grid so that ties are common.
fn tied_instance(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (1..=max_n, 1u32..8).prop_flat_map(|(n, levels)| {
        (
            prop::collection::vec((0..levels).prop_map(move |k| k as f64 / levels as f64), n),
            prop::collection::vec(0u8..2, n),
        )
    })
}

/// Pairwise-distinct scores.
fn distinct_instance(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            Just((0..n).map(|i| i as f64 / n as f64).collect::<Vec<_>>()).prop_shuffle(),
            prop::collection::vec(0u8..2, n),
        )
    })
}

fn has_both(r: &[u8]) -> bool {
    r.contains(&0) && r.contains(&1)
}

/// Average precision straight from its definition: for every distinct
/// threshold t (descending), retrieve samples with score ≥ t and add
/// (recall gain) × precision.
fn ap_by_thresholds(scores: &[f64], positive: &[bool]) -> f64 {
    let total = positive.iter().filter(|&&p| p).count() as f64;
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let retrieved = scores.iter().filter(|&&s| s >= t).count() as f64;
        let hits = scores.iter().zip(positive).filter(|(&s, &p)| s >= t && p).count() as f64;
        let recall = hits / total;
        ap += (recall - prev_recall) * (hits / retrieved);
        prev_recall = recall;
    }
    ap
}

fn aurc_of(scores: &[f64], residuals: &[u8]) -> f64 {
    rc_curve(scores, &FailureLabels::unmasked(residuals.to_vec())).unwrap().aurc()
}

fn permute<T: Copy>(v: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| v[i]).collect()
}

proptest! {
    #[test]
    fn aurc_matches_reference_trace(
        (scores, residuals) in tied_instance(300),
        mask_bits in prop::collection::vec(prop::bool::weighted(0.8), 300),
    ) {
        let n = scores.len();
        let mut mask: Vec<u8> = mask_bits[..n].iter().map(|&b| b as u8).collect();
        mask[0] = 1;
        let labels = FailureLabels { residuals: residuals.clone(), predictions: vec![0; n], eval_mask: mask.clone() };
        let fast = rc_curve(&scores, &labels).unwrap().aurc();
        let slow = aurc_oracle(&scores, &residuals, &mask).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn aurc_in_unit_interval((scores, residuals) in tied_instance(200)) {
        let a = aurc_of(&scores, &residuals);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn auroc_matches_pairwise_count((scores, residuals) in tied_instance(300)) {
        prop_assume!(has_both(&residuals));
        let positive: Vec<bool> = residuals.iter().map(|&r| r == 0).collect();
        let fast = auroc_f(&scores, &FailureLabels::unmasked(residuals.clone())).unwrap();
        let slow = auroc_oracle(&scores, &positive).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12);
    }

    #[test]
    fn ap_matches_threshold_sum((scores, residuals) in tied_instance(200)) {
        let labels = FailureLabels::unmasked(residuals.clone());
        if residuals.contains(&0) {
            let pos: Vec<bool> = residuals.iter().map(|&r| r == 0).collect();
            let got = ap_f(&scores, &labels, ApPositive::Success).unwrap();
            prop_assert!((got - ap_by_thresholds(&scores, &pos)).abs() <= 1e-12);
        }
        if residuals.contains(&1) {
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let pos: Vec<bool> = residuals.iter().map(|&r| r == 1).collect();
            let got = ap_f(&scores, &labels, ApPositive::Failure).unwrap();
            prop_assert!((got - ap_by_thresholds(&neg, &pos)).abs() <= 1e-12);
        }
    }

    #[test]
    fn monotone_transform_keeps_ranking_metrics(
        (scores, residuals) in tied_instance(200),
        scale in 0.1f64..10.0,
    ) {
        prop_assume!(has_both(&residuals));
        // Rank-based map: strictly increasing, so no floating-point merging.
        let mut uniq = scores.clone();
        uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        uniq.dedup();
        let mapped: Vec<f64> = scores
            .iter()
            .map(|s| {
                let k = uniq.iter().position(|u| u == s).unwrap() as f64;
                scale * k * k + k - 50.0
            })
            .collect();
        let labels = FailureLabels::unmasked(residuals.clone());
        prop_assert_eq!(auroc_f(&scores, &labels).unwrap(), auroc_f(&mapped, &labels).unwrap());
        prop_assert_eq!(aurc_of(&scores, &residuals), aurc_of(&mapped, &residuals));
    }

    #[test]
    fn auroc_is_permutation_invariant(
        (scores, residuals) in tied_instance(200),
        seed in any::<u64>(),
    ) {
        prop_assume!(has_both(&residuals));
        let order = shuffled(scores.len(), seed);
        let a = auroc_f(&scores, &FailureLabels::unmasked(residuals.clone())).unwrap();
        let b = auroc_f(&permute(&scores, &order), &FailureLabels::unmasked(permute(&residuals, &order))).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn aurc_is_permutation_invariant_without_ties(
        (scores, residuals) in distinct_instance(200),
        seed in any::<u64>(),
    ) {
        let order = shuffled(scores.len(), seed);
        let a = aurc_of(&scores, &residuals);
        let b = aurc_of(&permute(&scores, &order), &permute(&residuals, &order));
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn negation_mirrors_auroc((scores, residuals) in distinct_instance(200)) {
        prop_assume!(has_both(&residuals));
        let labels = FailureLabels::unmasked(residuals.clone());
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auroc_f(&scores, &labels).unwrap();
        let b = auroc_f(&neg, &labels).unwrap();
        prop_assert!((a - (1.0 - b)).abs() <= 1e-15);
    }

    #[test]
    fn optimal_csf_bounds_every_distinct_csf((scores, residuals) in distinct_instance(200)) {
        let labels = FailureLabels::unmasked(residuals.clone());
        let curve = rc_curve(&scores, &labels).unwrap();
        let optimal = aurc_of(&optimal_scores(&residuals), &residuals);
        prop_assert!(optimal <= curve.aurc() + 1e-12);
        prop_assert!(e_aurc(&curve, &labels, EAurcMode::OptimalOracle).unwrap() >= -1e-12);
    }

    #[test]
    fn sinking_a_failure_never_raises_aurc(
        (scores, residuals) in distinct_instance(200),
        pick in any::<prop::sample::Index>(),
    ) {
        let failures: Vec<usize> = (0..residuals.len()).filter(|&i| residuals[i] == 1).collect();
        prop_assume!(!failures.is_empty());
        let target = failures[pick.index(failures.len())];
        let floor = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let mut sunk = scores.clone();
        sunk[target] = floor - 1.0;
        prop_assert!(aurc_of(&sunk, &residuals) <= aurc_of(&scores, &residuals) + 1e-12);
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    order
}
