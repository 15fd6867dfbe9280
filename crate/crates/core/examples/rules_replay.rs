//! Plays a short game into a ko, shows the retake being refused and the
//! incremental Zobrist hash agreeing with a full recomputation.
//!
//! ```text
//! cargo run --example rules_replay
//! ```

use gocf::rules::{Board, Point};

fn main() {
    let mut board = Board::new();
    println!("empty board hash {:016x}", board.zobrist_hash());
    let script = ["ab", "ca", "ba", "db", "bc", "cc", "pp", "bb", "cb"];
    for s in script {
        let color = board.to_move();
        board.play(color, Point::from_sgf(s)).expect("scripted move is legal");
        println!("{:>3} {} {s}  hash {:016x}", board.move_count(), color.letter(), board.zobrist_hash());
    }
    assert_eq!(board.zobrist_hash(), board.compute_zobrist());
    println!("ko point: {:?}", board.ko_point().map(|p| p.to_sgf()));

    let white = board.to_move();
    match board.play(white, Point::from_sgf("bb")) {
        Err(e) => println!("retake refused: {e}"),
        Ok(()) => unreachable!("immediate retake must be illegal"),
    }

    // one exchange elsewhere lifts the ko
    board.play(white, Point::from_sgf("dp")).unwrap();
    board.play(white.opponent(), Point::from_sgf("pd")).unwrap();
    board.play(white, Point::from_sgf("bb")).expect("ko can be retaken after a threat");
    println!("retaken at move {}; {} legal replies", board.move_count(), board.legal_moves().len());
}
