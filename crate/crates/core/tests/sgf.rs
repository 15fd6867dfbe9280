use chrono::NaiveDate;
use gocf::record::{DatePrecision, GameRecord, GameResult, Move, SetupStone};
use gocf::rules::{Board, Color, Point};
use gocf::sgf::{parse_date, parse_sgf, parse_sgf_from, write_sgf};
use gocf::synthetic::blank_record;
use proptest::prelude::*;

fn arb_date() -> impl Strategy<Value = (NaiveDate, DatePrecision)> {
    (1900i32..2024, 1u32..=12, 1u32..=28, 0u8..3).prop_map(|(y, m, d, p)| match p {
        0 => (NaiveDate::from_ymd_opt(y, m, d).unwrap(), DatePrecision::Day),
        1 => (NaiveDate::from_ymd_opt(y, m, 15).unwrap(), DatePrecision::Month),
        _ => (NaiveDate::from_ymd_opt(y, 7, 1).unwrap(), DatePrecision::Year),
    })
}

fn arb_result() -> impl Strategy<Value = GameResult> {
    prop_oneof![
        Just(GameResult::BlackWin),
        Just(GameResult::WhiteWin),
        Just(GameResult::Draw),
        Just(GameResult::Unknown),
    ]
}

prop_compose! {
    fn arb_game()(
        date in arb_date(),
        black in "[A-Za-z\\]\\\\:()]([A-Za-z \\]\\\\:()]{0,10}[A-Za-z\\]\\\\:()])?",
        white in "[A-Za-z0-9]([A-Za-z0-9 ]{0,10}[A-Za-z0-9])?",
        result in arb_result(),
        komi in prop_oneof![Just(0.0), Just(5.5), Just(6.5), Just(7.5)],
        handicap in prop::collection::btree_set(0usize..361, 0..5),
        picks in prop::collection::vec(0u16..400, 0..120),
    ) -> GameRecord {
        let mut g = blank_record("prop", date.0);
        g.date_precision = date.1;
        g.black_id = black;
        g.white_id = white;
        g.result = result;
        g.komi = komi;
        let mut board = Board::new();
        for &i in &handicap {
            let p = Point::from_index(i);
            board.place_setup(Color::Black, p).unwrap();
            g.setup_stones.push(SetupStone { color: Color::Black, point: p });
        }
        if !handicap.is_empty() {
            board.set_to_move(Color::White);
        }
        for (n, v) in picks.into_iter().enumerate() {
            let legal = board.legal_moves();
            let m = legal[v as usize % legal.len()];
            let color = board.to_move();
            board.play(color, m).unwrap();
            g.moves.push(Move { number: n as u32 + 1, color, point: m });
        }
        g
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn written_records_parse_back(g in arb_game()) {
        let text = write_sgf(&g);
        let parsed = parse_sgf_from(text.as_bytes(), "prop").unwrap();
        prop_assert_eq!(parsed.len(), 1);
        let mut back = parsed.into_iter().next().unwrap();
        back.source_path = g.source_path.clone();
        prop_assert_eq!(&back, &g);
        // bytes determine records
        prop_assert_eq!(parse_sgf_from(text.as_bytes(), "prop").unwrap(), parse_sgf_from(text.as_bytes(), "prop").unwrap());
    }

    #[test]
    fn move_numbers_follow_list_position(g in arb_game()) {
        let back = parse_sgf(write_sgf(&g).as_bytes()).unwrap().remove(0);
        for (i, m) in back.moves.iter().enumerate() {
            prop_assert_eq!(m.number as usize, i + 1);
        }
    }

    #[test]
    fn lenient_dates_keep_the_leading_token(date in arb_date(), tail in "(,[0-9-]{0,10}| [a-z]{0,6})?") {
        let text = gocf::sgf::format_date(date.0, date.1);
        prop_assert_eq!(parse_date(&format!("{text}{tail}")), Some(date));
    }
}

#[test]
fn sample_document() {
    let recs = parse_sgf(b"(;FF[4]SZ[19]DT[2016-03-15];B[dd];W[pp])").unwrap();
    assert_eq!(recs.len(), 1);
    let g = &recs[0];
    assert_eq!(g.date, NaiveDate::from_ymd_opt(2016, 3, 15).unwrap());
    assert_eq!(g.moves.len(), 2);
    assert_eq!((g.moves[0].color, g.moves[0].point), (Color::Black, Some(Point::new(3, 3))));
    assert_eq!((g.moves[1].color, g.moves[1].point), (Color::White, Some(Point::new(15, 15))));
}

#[test]
fn variations_keep_only_the_main_line() {
    let recs = parse_sgf(b"(;SZ[19]DT[2001];B[dd](;W[pp];B[dp])(;W[qq]))").unwrap();
    let pts: Vec<String> = recs[0].moves.iter().map(|m| m.point.unwrap().to_sgf()).collect();
    assert_eq!(pts, ["dd", "pp", "dp"]);
}
