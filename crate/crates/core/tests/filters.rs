use std::collections::BTreeSet;

use chrono::NaiveDate;
use gocf::oracle::filter_by_scan;
use gocf::panel::{MoveObservation, PeriodKind};
use gocf::pipeline::{apply_filter, FilterSpec};
use proptest::prelude::*;

/// Rows for several games; each game has a random length, random engine
/// matches and at most one novel move. Some rows are missing, as when a
/// game's evaluation stopped early.
fn arb_rows() -> impl Strategy<Value = Vec<MoveObservation>> {
    prop::collection::vec((1u32..70, any::<u64>(), 0u32..80, any::<bool>()), 1..12).prop_map(|games| {
        let date = NaiveDate::from_ymd_opt(2017, 4, 1).unwrap();
        let mut rows = Vec::new();
        for (g, (len, bits, novel, holes)) in games.into_iter().enumerate() {
            for m in 1..=len {
                if holes && m % 17 == 5 {
                    continue;
                }
                let matched = (bits >> (m % 64)) & 1 == 1 || m % 5 == 0;
                rows.push(MoveObservation {
                    game_id: format!("g{g}"),
                    move_number: m,
                    player_id: format!("p{}", (g + m as usize) % 2),
                    opponent_id: format!("p{}", (g + m as usize + 1) % 2),
                    date,
                    month_id: PeriodKind::Month.of(date),
                    dqi: if matched { 100.0 } else { 90.0 },
                    matched_ai: matched,
                    after_ai: true,
                    novelty_dummy: m == novel,
                });
            }
        }
        rows
    })
}

fn all_specs() -> Vec<FilterSpec> {
    let mut v = vec![
        FilterSpec::All,
        FilterSpec::DiffersFromAi,
        FilterSpec::MatchesAi,
        FilterSpec::OpponentDeviationResponse(None),
        FilterSpec::NovelMovesOnly,
        FilterSpec::NovelDiffersFromAi,
        FilterSpec::NovelMatchesAi,
    ];
    v.extend((1..=4).map(|l| FilterSpec::OpponentDeviationResponse(Some(l))));
    v.extend((1..=FilterSpec::STAGE_BUCKETS).map(FilterSpec::StageBucket));
    v
}

fn keys(rows: &[MoveObservation]) -> BTreeSet<(String, u32)> {
    rows.iter().map(|r| (r.game_id.clone(), r.move_number)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_filter_matches_its_predicate_scan(rows in arb_rows()) {
        for spec in all_specs() {
            let fast: Vec<(String, u32)> = apply_filter(&rows, spec).into_iter().map(|r| (r.game_id, r.move_number)).collect();
            let slow: Vec<(String, u32)> = filter_by_scan(&rows, spec).into_iter().map(|i| (rows[i].game_id.clone(), rows[i].move_number)).collect();
            prop_assert_eq!(fast, slow, "{}", spec);
        }
    }

    #[test]
    fn partitions_hold(rows in arb_rows()) {
        let all = keys(&rows);
        let m = keys(&apply_filter(&rows, FilterSpec::MatchesAi));
        let d = keys(&apply_filter(&rows, FilterSpec::DiffersFromAi));
        prop_assert!(m.is_disjoint(&d));
        prop_assert_eq!(m.union(&d).cloned().collect::<BTreeSet<_>>(), all.clone());
        let mut buckets = BTreeSet::new();
        for k in 1..=FilterSpec::STAGE_BUCKETS {
            let b = keys(&apply_filter(&rows, FilterSpec::StageBucket(k)));
            prop_assert!(b.iter().all(|(_, n)| (10 * (k - 1) + 1..=10 * k).contains(n)));
            prop_assert!(buckets.is_disjoint(&b));
            buckets.extend(b);
        }
        let early: BTreeSet<_> = all.iter().filter(|(_, n)| *n <= 60).cloned().collect();
        prop_assert_eq!(buckets, early);
        let n = keys(&apply_filter(&rows, FilterSpec::NovelMovesOnly));
        let nd = keys(&apply_filter(&rows, FilterSpec::NovelDiffersFromAi));
        let nm = keys(&apply_filter(&rows, FilterSpec::NovelMatchesAi));
        prop_assert!(nd.is_disjoint(&nm));
        prop_assert_eq!(nd.union(&nm).cloned().collect::<BTreeSet<_>>(), n);
    }

    #[test]
    fn strict_deviation_is_contained_in_every_relaxed_one(rows in arb_rows()) {
        let strict = keys(&apply_filter(&rows, FilterSpec::OpponentDeviationResponse(None)));
        for l in 1..=4 {
            let relaxed = keys(&apply_filter(&rows, FilterSpec::OpponentDeviationResponse(Some(l))));
            // the relaxed form needs l matched moves before the deviation
            let long_enough: BTreeSet<_> = strict.iter().filter(|(_, m)| *m >= l + 2).cloned().collect();
            prop_assert!(long_enough.is_subset(&relaxed));
        }
    }
}

#[test]
fn text_forms_parse() {
    for spec in all_specs() {
        assert_eq!(spec.to_string().parse::<FilterSpec>().unwrap(), spec);
    }
    assert!("stage-bucket:7".parse::<FilterSpec>().is_err());
    assert!("nonsense".parse::<FilterSpec>().is_err());
}
