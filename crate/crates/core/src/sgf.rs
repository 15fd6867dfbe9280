//! SGF (FF[3]/FF[4]) reading and writing for 19×19 game records.
//!
//! Only the main line of each game tree is kept. Markup and comments are
//! parsed for structure and then dropped.

use chrono::{Datelike, NaiveDate, Utc};
use thiserror::Error;

use crate::record::{DatePrecision, GameRecord, GameResult, Move, SetupStone};
use crate::rules::{point_from_sgf, point_to_sgf, Color, Point};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SGF error at byte {offset}: {message}")]
pub struct SgfError {
    pub offset: usize,
    pub message: String,
}

impl SgfError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        SgfError {
            offset,
            message: message.into(),
        }
    }
}

/// A parsed property: identifier and raw (unescaped) values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub ident: String,
    pub values: Vec<String>,
    pub offset: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Node {
    pub properties: Vec<Property>,
    pub offset: usize,
}

impl Node {
    pub fn get(&self, ident: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.ident == ident)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GameTree {
    pub nodes: Vec<Node>,
    pub children: Vec<GameTree>,
    pub offset: usize,
}

impl GameTree {
    /// Nodes along the first-variation path.
    pub fn main_line(&self) -> Vec<&Node> {
        let mut out: Vec<&Node> = Vec::new();
        let mut tree = self;
        loop {
            out.extend(tree.nodes.iter());
            match tree.children.first() {
                Some(child) => tree = child,
                None => return out,
            }
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn collection(&mut self) -> Result<Vec<GameTree>, SgfError> {
        let mut trees = Vec::new();
        // Tolerate leading junk before the first '(' (some archives prepend headers).
        while let Some(b) = self.peek() {
            if b == b'(' {
                break;
            }
            self.pos += 1;
        }
        loop {
            self.skip_ws();
            match self.peek() {
                None => break,
                Some(b'(') => trees.push(self.game_tree()?),
                Some(_) if !trees.is_empty() => {
                    // trailing garbage after the last tree is ignored
                    break;
                }
                Some(b) => return Err(SgfError::new(self.pos, format!("unexpected byte {:?}", b as char))),
            }
        }
        if trees.is_empty() {
            return Err(SgfError::new(self.pos, "no game tree found"));
        }
        Ok(trees)
    }

    /// Iterative so that deeply nested variations cannot overflow the stack.
    fn game_tree(&mut self) -> Result<GameTree, SgfError> {
        let mut stack: Vec<GameTree> = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'(') => {
                    let offset = self.pos;
                    self.pos += 1;
                    self.skip_ws();
                    if self.peek() != Some(b';') {
                        return Err(SgfError::new(self.pos, "game tree must start with a node"));
                    }
                    let mut tree = GameTree {
                        offset,
                        ..GameTree::default()
                    };
                    while {
                        self.skip_ws();
                        self.peek() == Some(b';')
                    } {
                        tree.nodes.push(self.node()?);
                    }
                    stack.push(tree);
                }
                Some(b')') => {
                    self.pos += 1;
                    let done = stack
                        .pop()
                        .ok_or_else(|| SgfError::new(self.pos - 1, "unbalanced ')'"))?;
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(done),
                        None => return Ok(done),
                    }
                }
                Some(b) => {
                    return Err(SgfError::new(self.pos, format!("unexpected byte {:?} in game tree", b as char)));
                }
                None => {
                    let offset = stack.last().map(|t| t.offset).unwrap_or(self.pos);
                    return Err(SgfError::new(offset, "unterminated game tree"));
                }
            }
        }
    }

    fn node(&mut self) -> Result<Node, SgfError> {
        let offset = self.pos;
        self.pos += 1; // ';'
        let mut node = Node {
            properties: Vec::new(),
            offset,
        };
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b) if b.is_ascii_alphabetic() => node.properties.push(self.property()?),
                _ => return Ok(node),
            }
        }
    }

    fn property(&mut self) -> Result<Property, SgfError> {
        let offset = self.pos;
        let mut ident = String::new();
        while let Some(b) = self.peek() {
            if !b.is_ascii_alphabetic() {
                break;
            }
            // FF[3] allows lowercase letters inside identifiers; they carry no meaning.
            if b.is_ascii_uppercase() {
                ident.push(b as char);
            }
            self.pos += 1;
        }
        let mut values = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() != Some(b'[') {
                break;
            }
            values.push(self.value()?);
        }
        if values.is_empty() {
            return Err(SgfError::new(offset, format!("property {ident} has no value")));
        }
        Ok(Property { ident, values, offset })
    }

    fn value(&mut self) -> Result<String, SgfError> {
        let open = self.pos;
        self.pos += 1;
        let mut raw = Vec::new();
        loop {
            match self.peek() {
                None => return Err(SgfError::new(open, "unterminated property value")),
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    match self.peek() {
                        None => return Err(SgfError::new(self.pos - 1, "dangling escape")),
                        // escaped line break is a soft break and is removed
                        Some(b'\n') => {
                            self.pos += 1;
                            if self.peek() == Some(b'\r') {
                                self.pos += 1;
                            }
                        }
                        Some(b'\r') => {
                            self.pos += 1;
                            if self.peek() == Some(b'\n') {
                                self.pos += 1;
                            }
                        }
                        Some(b) => {
                            raw.push(b);
                            self.pos += 1;
                        }
                    }
                }
                Some(b) => {
                    raw.push(b);
                    self.pos += 1;
                }
            }
        }
        Ok(String::from_utf8_lossy(&raw).into_owned())
    }
}

/// Parses the raw game-tree structure of an SGF collection.
pub fn parse_collection(bytes: &[u8]) -> Result<Vec<GameTree>, SgfError> {
    Parser { bytes, pos: 0 }.collection()
}

/// Parses every game tree in `bytes`. Game ids are `inline` (or `inline#k`
/// for multi-game collections).
pub fn parse_sgf(bytes: &[u8]) -> Result<Vec<GameRecord>, SgfError> {
    parse_sgf_from(bytes, "inline")
}

/// Like [`parse_sgf`], but ids and provenance derive from `source`.
pub fn parse_sgf_from(bytes: &[u8], source: &str) -> Result<Vec<GameRecord>, SgfError> {
    let trees = parse_collection(bytes)?;
    let multi = trees.len() > 1;
    trees
        .iter()
        .enumerate()
        .map(|(i, tree)| {
            let game_id = if multi {
                format!("{source}#{}", i + 1)
            } else {
                source.to_string()
            };
            tree_to_record(tree, game_id, source)
        })
        .collect()
}

/// Lenient `DT` parsing: the first `YYYY`, `YYYY-MM` or `YYYY-MM-DD` token.
pub fn parse_date(s: &str) -> Option<(NaiveDate, DatePrecision)> {
    let s = s.trim();
    let first = s.split([',', ' ', ';']).next().unwrap_or("");
    let mut parts = first.split('-');
    let year: i32 = parts.next().filter(|p| p.len() == 4)?.parse().ok()?;
    let month = match parts.next() {
        None | Some("") | Some("??") => None,
        Some(m) => Some(m.parse::<u32>().ok()?),
    };
    let day = match (month, parts.next()) {
        (Some(_), Some(d)) if !d.is_empty() && d != "??" => Some(d.parse::<u32>().ok()?),
        _ => None,
    };
    match (month, day) {
        (Some(m), Some(d)) => NaiveDate::from_ymd_opt(year, m, d).map(|dt| (dt, DatePrecision::Day)),
        (Some(m), None) => NaiveDate::from_ymd_opt(year, m, 15).map(|dt| (dt, DatePrecision::Month)),
        _ => NaiveDate::from_ymd_opt(year, 7, 1).map(|dt| (dt, DatePrecision::Year)),
    }
}

pub fn format_date(date: NaiveDate, precision: DatePrecision) -> String {
    match precision {
        DatePrecision::Day => date.format("%Y-%m-%d").to_string(),
        DatePrecision::Month => format!("{:04}-{:02}", date.year(), date.month()),
        DatePrecision::Year => format!("{:04}", date.year()),
    }
}

pub fn min_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid date")
}

fn parse_point_list(prop: &Property) -> Result<Vec<Point>, SgfError> {
    let mut out = Vec::new();
    for v in &prop.values {
        if let Some((a, b)) = v.split_once(':') {
            let (p, q) = match (Point::from_sgf(a), Point::from_sgf(b)) {
                (Some(p), Some(q)) => (p, q),
                _ => return Err(SgfError::new(prop.offset, format!("bad point rectangle {v:?}"))),
            };
            for row in p.row.min(q.row)..=p.row.max(q.row) {
                for col in p.col.min(q.col)..=p.col.max(q.col) {
                    out.push(Point::new(col, row));
                }
            }
        } else {
            let p = Point::from_sgf(v)
                .ok_or_else(|| SgfError::new(prop.offset, format!("bad setup point {v:?}")))?;
            out.push(p);
        }
    }
    Ok(out)
}

fn text(node: &Node, ident: &str) -> Option<String> {
    node.get(ident).map(|p| p.values[0].trim().to_string())
}

fn tree_to_record(tree: &GameTree, game_id: String, source: &str) -> Result<GameRecord, SgfError> {
    let nodes = tree.main_line();
    let root = nodes[0];

    let board_size = match text(root, "SZ") {
        None => 19,
        Some(v) => {
            let first = v.split(':').next().unwrap_or("");
            first
                .trim()
                .parse::<u32>()
                .map_err(|_| SgfError::new(root.offset, format!("bad SZ value {v:?}")))?
        }
    };

    let dt = text(root, "DT").ok_or_else(|| SgfError::new(root.offset, "missing DT (game date)"))?;
    let (date, date_precision) =
        parse_date(&dt).ok_or_else(|| SgfError::new(root.offset, format!("unparseable DT value {dt:?}")))?;
    if date < min_date() || date > Utc::now().date_naive() {
        return Err(SgfError::new(root.offset, format!("date {date} outside [1900-01-01, today]")));
    }

    let komi = match text(root, "KM") {
        None => 0.0,
        Some(v) if v.is_empty() => 0.0,
        Some(v) => v
            .parse::<f64>()
            .ok()
            .filter(|k| k.is_finite())
            .ok_or_else(|| SgfError::new(root.offset, format!("bad KM value {v:?}")))?,
    };

    let mut record = GameRecord {
        game_id,
        date,
        date_precision,
        black_id: text(root, "PB").unwrap_or_default(),
        white_id: text(root, "PW").unwrap_or_default(),
        result: text(root, "RE").map(|r| GameResult::from_sgf(&r)).unwrap_or(GameResult::Unknown),
        komi,
        board_size,
        setup_stones: Vec::new(),
        moves: Vec::new(),
        source_path: source.to_string(),
        is_synthetic: false,
    };
    if board_size != 19 {
        // kept for reporting only; coordinates are not interpreted
        return Ok(record);
    }

    for node in nodes {
        for prop in &node.properties {
            match prop.ident.as_str() {
                "AB" | "AW" => {
                    if !record.moves.is_empty() {
                        return Err(SgfError::new(prop.offset, "setup stones after the first move"));
                    }
                    let color = if prop.ident == "AB" { Color::Black } else { Color::White };
                    for point in parse_point_list(prop)? {
                        record.setup_stones.push(SetupStone { color, point });
                    }
                }
                "B" | "W" => {
                    if node.get("B").is_some() && node.get("W").is_some() {
                        return Err(SgfError::new(node.offset, "node has both B and W"));
                    }
                    let color = Color::from_letter(&prop.ident).expect("B or W");
                    let v = prop.values[0].trim();
                    let point = point_from_sgf(v)
                        .ok_or_else(|| SgfError::new(prop.offset, format!("bad move coordinate {v:?}")))?;
                    let number = record.moves.len() as u32 + 1;
                    record.moves.push(Move { number, color, point });
                }
                _ => {}
            }
        }
    }
    Ok(record)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == ']' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Serializes a record as a single-game SGF document.
pub fn write_sgf(record: &GameRecord) -> String {
    let mut s = String::from("(;FF[4]GM[1]CA[UTF-8]");
    s.push_str(&format!("SZ[{}]", record.board_size));
    s.push_str(&format!("DT[{}]", format_date(record.date, record.date_precision)));
    s.push_str(&format!("PB[{}]PW[{}]", escape(&record.black_id), escape(&record.white_id)));
    s.push_str(&format!("KM[{}]", record.komi));
    if let Some(re) = record.result.to_sgf() {
        s.push_str(&format!("RE[{re}]"));
    }
    for color in [Color::Black, Color::White] {
        let pts: Vec<String> = record
            .setup_stones
            .iter()
            .filter(|st| st.color == color)
            .map(|st| format!("[{}]", st.point.to_sgf()))
            .collect();
        if !pts.is_empty() {
            s.push_str(if color == Color::Black { "AB" } else { "AW" });
            s.push_str(&pts.concat());
        }
    }
    for mv in &record.moves {
        s.push_str(&format!(";{}[{}]", mv.color.letter(), point_to_sgf(mv.point)));
    }
    s.push_str(")\n");
    s
}
