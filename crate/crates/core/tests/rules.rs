use std::collections::HashSet;

use gocf::oracle::SlowBoard;
use gocf::rules::{point_from_sgf, point_to_sgf, Board, Color, Point, NUM_POINTS};
use proptest::prelude::*;

/// Replays `proposals` (indices into the legal-move list, or raw points
/// when `raw`), returning the boards after each accepted move.
fn drive(proposals: &[(bool, u16)]) -> Vec<Board> {
    let mut board = Board::new();
    let mut out = Vec::new();
    for &(raw, v) in proposals {
        let color = board.to_move();
        let point = if raw {
            if v as usize >= NUM_POINTS {
                None
            } else {
                Some(Point::from_index(v as usize))
            }
        } else {
            let legal = board.legal_moves();
            legal[v as usize % legal.len()]
        };
        if board.play(color, point).is_ok() {
            out.push(board.clone());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fast_and_slow_boards_agree(proposals in prop::collection::vec((any::<bool>(), 0u16..400), 1..250)) {
        let mut fast = Board::new();
        let mut slow = SlowBoard::new();
        for (raw, v) in proposals {
            let color = fast.to_move();
            let point = if v as usize >= NUM_POINTS {
                None
            } else if raw {
                Some(Point::from_index(v as usize))
            } else {
                let legal = fast.legal_moves();
                legal[v as usize % legal.len()]
            };
            let a = fast.play(color, point);
            let b = slow.play(color, point);
            prop_assert_eq!(a.is_ok(), b.is_ok(), "verdict on {:?}", point);
            prop_assert_eq!(fast.zobrist_hash(), slow.zobrist());
        }
        for p in Point::all() {
            prop_assert_eq!(fast.get(p), slow.get(p));
        }
    }

    #[test]
    fn every_position_keeps_its_invariants(proposals in prop::collection::vec((any::<bool>(), 0u16..400), 1..300)) {
        for board in drive(&proposals) {
            prop_assert!(board.all_groups_have_liberties());
            prop_assert_eq!(board.zobrist_hash(), board.compute_zobrist());
            let legal = board.legal_moves();
            prop_assert!(legal.contains(&None));
            prop_assert!(legal.len() <= NUM_POINTS + 1);
            let distinct: HashSet<_> = legal.iter().collect();
            prop_assert_eq!(distinct.len(), legal.len());
            for m in legal {
                prop_assert!(board.is_legal(m));
            }
        }
    }

    #[test]
    fn apply_move_leaves_the_original_untouched(proposals in prop::collection::vec(0u16..400, 1..120)) {
        let mut board = Board::new();
        for v in proposals {
            let legal = board.legal_moves();
            let m = legal[v as usize % legal.len()];
            let before = board.clone();
            let next = board.apply_move(board.to_move(), m).expect("legal move applies");
            prop_assert!(board == before);
            board.play(board.to_move(), m).unwrap();
            prop_assert!(board == next);
        }
    }
}

#[test]
fn coordinates_are_a_bijection() {
    let mut seen = HashSet::new();
    for p in Point::all() {
        let s = p.to_sgf();
        assert!(seen.insert(s.clone()));
        assert_eq!(Point::from_sgf(&s), Some(p));
        assert_eq!(point_from_sgf(&point_to_sgf(Some(p))), Some(Some(p)));
    }
    assert_eq!(seen.len(), NUM_POINTS);
    assert_eq!(Point::from_sgf("dd"), Some(Point::new(3, 3)));
    assert_eq!(Point::from_sgf("pp"), Some(Point::new(15, 15)));
}

#[test]
fn transpositions_share_a_hash() {
    let pts = |s: &[&str]| s.iter().map(|x| Point::from_sgf(x)).collect::<Vec<_>>();
    let mut a = Board::new();
    let mut b = Board::new();
    for (x, y) in pts(&["dd", "pp", "dp", "pd"]).into_iter().zip(pts(&["dp", "pd", "dd", "pp"])) {
        a.play(a.to_move(), x).unwrap();
        b.play(b.to_move(), y).unwrap();
    }
    assert_eq!(a.zobrist_hash(), b.zobrist_hash());
    b.play(Color::Black, None).unwrap();
    assert_ne!(a.zobrist_hash(), b.zobrist_hash());
}

#[test]
fn frozen_empty_board_hash() {
    let empty = Board::new();
    assert_eq!(empty.zobrist_hash(), empty.compute_zobrist());
    assert_eq!(format!("{:016x}", empty.zobrist_hash()), include_str!("golden/zobrist_empty.txt").trim());
}

#[test]
fn empty_board_hash_is_the_black_to_move_key() {
    // splitmix64 written out again: 722 stone keys, then black-to-move
    let mut state = gocf::rules::ZOBRIST_SEED;
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    for _ in 0..2 * NUM_POINTS {
        next();
    }
    assert_eq!(Board::new().zobrist_hash(), next());
}
