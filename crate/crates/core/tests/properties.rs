mod oracle;

use proptest::prelude::*;
use tagvalue::corpus::{Corpus, SplitFractions, SplitTrace, TraceFormat};
use tagvalue::eval::{ks_two_sample, mean_reciprocal_rank, RankedTag};
use tagvalue::value::{entropy, kendall_distance, kl_divergence, Ranking};

fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("all-zero weights", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn positive_distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    })
}

fn ranking_over(universe: u32) -> impl Strategy<Value = Vec<u32>> {
    Just((0..universe).collect::<Vec<u32>>())
        .prop_shuffle()
        .prop_flat_map(move |perm| (0..=perm.len()).prop_map(move |k| perm[..k].to_vec()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn kl_is_nonnegative_and_matches_oracle(
        (p, q) in (1usize..16).prop_flat_map(|n| (distribution(n), positive_distribution(n)))
    ) {
        let kl = kl_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert!((kl - oracle::kl_bits(&p, &q).max(0.0)).abs() < 1e-9);
        prop_assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn entropy_is_bounded(p in (1usize..32).prop_flat_map(distribution)) {
        let h = entropy(&p).unwrap();
        prop_assert!(h >= -1e-12 && h <= (p.len() as f64).log2() + 1e-9);
        prop_assert!((h - oracle::entropy_bits(&p)).abs() < 1e-9);
    }

    #[test]
    fn kendall_is_symmetric_bounded_and_matches_oracle(
        (a, b) in (1u32..10).prop_flat_map(|n| (ranking_over(n), ranking_over(n)))
    ) {
        let (ra, rb) = (Ranking::new(a.clone()).unwrap(), Ranking::new(b.clone()).unwrap());
        let d = kendall_distance(&ra, &rb);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, kendall_distance(&rb, &ra));
        prop_assert!((d - oracle::kendall(&a, &b)).abs() < 1e-12);
        prop_assert_eq!(kendall_distance(&ra, &ra), 0.0);
    }

    #[test]
    fn ks_is_symmetric_and_matches_oracle(
        x in prop::collection::vec(0u8..6, 1..24),
        y in prop::collection::vec(0u8..6, 1..24),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        let r = ks_two_sample(&x, &y).unwrap();
        prop_assert_eq!(r.d, ks_two_sample(&y, &x).unwrap().d);
        prop_assert_eq!(r.d, oracle::ks_d(&x, &y));
        prop_assert!(r.p > 0.0 && r.p <= 1.0);
        prop_assert!(r.d_x_below >= 0.0 && r.d_x_below <= r.d);
    }

    #[test]
    fn mrr_is_in_unit_interval(
        lists in prop::collection::vec(
            prop::collection::vec((0u8..5, any::<bool>()), 1..8)
                .prop_filter("needs a hidden tag", |l| l.iter().any(|(_, h)| *h)),
            1..6,
        )
    ) {
        let names: Vec<Vec<String>> = lists
            .iter()
            .map(|l| (0..l.len()).map(|i| format!("t{i}")).collect())
            .collect();
        let ranked: Vec<Vec<RankedTag>> = lists
            .iter()
            .zip(&names)
            .map(|(l, n)| {
                l.iter()
                    .zip(n)
                    .map(|(&(v, hidden), tag)| RankedTag { tag, value: f64::from(v), hidden })
                    .collect()
            })
            .collect();
        let mrr = mean_reciprocal_rank(&ranked).unwrap();
        prop_assert!(mrr > 0.0 && mrr <= 1.0);
    }
}

fn records() -> impl Strategy<Value = Vec<(String, String, String, i64)>> {
    prop::collection::vec(
        (0u8..6, 0u8..30, 0u8..12, 0i64..50)
            .prop_map(|(u, i, t, ts)| (format!("u{u}"), format!("item{i}"), format!("Tag{t}"), ts)),
        1..300,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn corpus_tsv_round_trip(rows in records()) {
        let corpus = Corpus::from_records(rows).unwrap();
        let mut buf = Vec::new();
        corpus.write_tsv(&mut buf).unwrap();
        let back = Corpus::parse(buf.as_slice(), &TraceFormat::default()).unwrap();
        prop_assert_eq!(back.annotations(), corpus.annotations());
        prop_assert_eq!(back.vocab(), corpus.vocab());
    }

    #[test]
    fn split_is_deterministic_and_chronological(rows in records()) {
        let corpus = Corpus::from_records(rows).unwrap();
        let sample = corpus.select_sample(1).unwrap();
        let a = SplitTrace::split_chronological(&corpus, &sample, SplitFractions::default()).unwrap();
        let b = SplitTrace::split_chronological(&corpus, &sample, SplitFractions::default()).unwrap();
        prop_assert_eq!(&a, &b);
        // an item's date is the user's earliest annotation of it in the corpus
        for s in a.sample() {
            let name = a.vocab().user_name(s);
            let cu = corpus.vocab().user(name).unwrap();
            let dates = |seg: &tagvalue::corpus::TraceIndex| -> Vec<i64> {
                seg.user_items(s)
                    .iter()
                    .map(|&i| {
                        let ci = corpus.vocab().item(a.vocab().item_name(i)).unwrap();
                        corpus.annotations().iter().filter(|x| x.user == cu && x.item == ci).map(|x| x.timestamp).min().unwrap()
                    })
                    .collect()
            };
            let (tr, pa, te) = (dates(a.train()), dates(a.param()), dates(a.test()));
            let max_tr = tr.iter().max().copied().unwrap_or(i64::MIN);
            let min_later = pa.iter().chain(&te).min().copied().unwrap_or(i64::MAX);
            prop_assert!(max_tr <= min_later);
            if let (Some(mp), Some(mt)) = (pa.iter().max(), te.iter().min()) {
                prop_assert!(mp <= mt);
            }
        }
    }
}
