//! Speaks the JSON line protocol to the built-in mock engine, in process.
//!
//! ```text
//! cargo run --example engine_protocol
//! ```
//!
//! The same lines can be piped through `gocf mock-engine`, or through any
//! engine named by `GO_CF_ENGINE`.

use gocf::engine::{AllowMoves, AnalysisRequest, AnalysisResponse, MockEngine, Ruleset};
use gocf::rules::{Color, Point};

fn show(req: &AnalysisRequest) {
    let line = req.to_line();
    println!("> {line}");
    let reply = MockEngine::handle_line(&line);
    let resp: AnalysisResponse = serde_json::from_str(&reply).expect("engine replies with JSON");
    let top: Vec<String> = resp.move_infos.iter().take(3).map(|m| format!("{} {:.4}", m.mv, m.winrate)).collect();
    println!("< id={} candidates={} top: {}", resp.id, resp.move_infos.len(), top.join(", "));
}

fn main() {
    let opening = [(Color::Black, Point::from_sgf("pd")), (Color::White, Point::from_sgf("dp"))];
    let mut req = AnalysisRequest {
        id: "q1".into(),
        initial_stones: Vec::new(),
        initial_player: None,
        moves: AnalysisRequest::wire_moves(&opening),
        rules: Ruleset::Japanese,
        komi: 6.5,
        max_visits: 50,
        include_policy: false,
        allow_moves: None,
    };
    show(&req);

    // restrict the search to the moves we want winrates for
    req.id = "q2".into();
    req.allow_moves = Some(vec![AllowMoves {
        player: "B".into(),
        moves: vec!["dd".into(), "jj".into(), "pass".into()],
        until_depth: 1,
    }]);
    show(&req);

    println!("< {}", MockEngine::handle_line("{not json"));
}
