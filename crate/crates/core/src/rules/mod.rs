//! Minimal 19×19 Go rules: captures, suicide, simple ko and Zobrist hashing.
//!
//! Suicide is illegal and only simple ko is enforced; superko is not.

mod zobrist;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use zobrist::{SplitMix64, ZOBRIST_SEED};

pub const BOARD_SIZE: usize = 19;
pub const NUM_POINTS: usize = BOARD_SIZE * BOARD_SIZE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Black,
    White,
}

impl Color {
    #[inline]
    pub fn opponent(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }

    #[inline]
    pub(crate) fn index(self) -> usize {
        match self {
            Color::Black => 0,
            Color::White => 1,
        }
    }

    /// Single-letter form used by SGF and the engine protocol.
    pub fn letter(self) -> &'static str {
        match self {
            Color::Black => "B",
            Color::White => "W",
        }
    }

    pub fn from_letter(s: &str) -> Option<Color> {
        match s {
            "B" | "b" => Some(Color::Black),
            "W" | "w" => Some(Color::White),
            _ => None,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::Black => "black",
            Color::White => "white",
        })
    }
}

/// An on-board intersection. Ordered by `(row, col)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub col: u8,
    pub row: u8,
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Point {
    /// Panics when the coordinate is off the board.
    pub fn new(col: u8, row: u8) -> Point {
        assert!((col as usize) < BOARD_SIZE && (row as usize) < BOARD_SIZE, "point ({col},{row}) off board");
        Point { col, row }
    }

    pub fn try_new(col: i32, row: i32) -> Option<Point> {
        if (0..BOARD_SIZE as i32).contains(&col) && (0..BOARD_SIZE as i32).contains(&row) {
            Some(Point { col: col as u8, row: row as u8 })
        } else {
            None
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.row as usize * BOARD_SIZE + self.col as usize
    }

    #[inline]
    pub fn from_index(index: usize) -> Point {
        debug_assert!(index < NUM_POINTS);
        Point {
            col: (index % BOARD_SIZE) as u8,
            row: (index / BOARD_SIZE) as u8,
        }
    }

    pub fn all() -> impl Iterator<Item = Point> {
        (0..NUM_POINTS).map(Point::from_index)
    }

    /// Two-letter SGF coordinate, column first: `(3, 15)` is `"dp"`.
    pub fn to_sgf(self) -> String {
        let mut s = String::with_capacity(2);
        s.push((b'a' + self.col) as char);
        s.push((b'a' + self.row) as char);
        s
    }

    /// Inverse of [`Point::to_sgf`]. Does not accept the `tt` pass encoding.
    pub fn from_sgf(s: &str) -> Option<Point> {
        let b = s.as_bytes();
        if b.len() != 2 {
            return None;
        }
        let col = b[0].wrapping_sub(b'a') as i32;
        let row = b[1].wrapping_sub(b'a') as i32;
        if !b[0].is_ascii_lowercase() || !b[1].is_ascii_lowercase() {
            return None;
        }
        Point::try_new(col, row)
    }

    fn neighbors(self) -> impl Iterator<Item = Point> {
        let (c, r) = (self.col as i32, self.row as i32);
        [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
            .into_iter()
            .filter_map(|(c, r)| Point::try_new(c, r))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sgf())
    }
}

/// SGF text for a move target; passes are written as `tt`.
pub fn point_to_sgf(point: Option<Point>) -> String {
    match point {
        Some(p) => p.to_sgf(),
        None => "tt".to_string(),
    }
}

/// Parses an SGF move value: `""` and `"tt"` are passes.
pub fn point_from_sgf(s: &str) -> Option<Option<Point>> {
    match s {
        "" | "tt" => Some(None),
        other => Point::from_sgf(other).map(Some),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("{0} is not the side to move")]
    WrongTurn(Color),
    #[error("point {0} is occupied")]
    Occupied(Point),
    #[error("move at {0} is suicide")]
    Suicide(Point),
    #[error("move at {0} retakes a ko")]
    Ko(Point),
}

/// Small fixed bitset over the 361 points.
#[derive(Clone, Copy, Default)]
struct PointSet([u64; 6]);

impl PointSet {
    #[inline]
    fn insert(&mut self, i: usize) -> bool {
        let (w, b) = (i / 64, 1u64 << (i % 64));
        let fresh = self.0[w] & b == 0;
        self.0[w] |= b;
        fresh
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Board {
    grid: [Option<Color>; NUM_POINTS],
    to_move: Color,
    ko_point: Option<Point>,
    zobrist: u64,
    move_count: u32,
}

impl Default for Board {
    fn default() -> Self {
        Board::new()
    }
}

impl fmt::Debug for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Board(to_move={}, ko={:?}, hash={:016x})", self.to_move, self.ko_point, self.zobrist)?;
        for row in 0..BOARD_SIZE {
            for col in 0..BOARD_SIZE {
                let c = match self.grid[row * BOARD_SIZE + col] {
                    None => '.',
                    Some(Color::Black) => 'X',
                    Some(Color::White) => 'O',
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Board {
    /// Empty board, black to move.
    pub fn new() -> Board {
        Board {
            grid: [None; NUM_POINTS],
            to_move: Color::Black,
            ko_point: None,
            zobrist: zobrist::keys().side(Color::Black),
            move_count: 0,
        }
    }

    pub fn to_move(&self) -> Color {
        self.to_move
    }

    pub fn ko_point(&self) -> Option<Point> {
        self.ko_point
    }

    pub fn move_count(&self) -> u32 {
        self.move_count
    }

    pub fn zobrist_hash(&self) -> u64 {
        self.zobrist
    }

    #[inline]
    pub fn get(&self, p: Point) -> Option<Color> {
        self.grid[p.index()]
    }

    pub fn stone_count(&self, color: Color) -> usize {
        self.grid.iter().filter(|&&s| s == Some(color)).count()
    }

    /// Hash recomputed from the grid and side to move.
    pub fn compute_zobrist(&self) -> u64 {
        let keys = zobrist::keys();
        let mut h = keys.side(self.to_move);
        for (i, s) in self.grid.iter().enumerate() {
            if let Some(c) = s {
                h ^= keys.stone(i, *c);
            }
        }
        h
    }

    /// Places a setup stone (SGF `AB`/`AW`) without capture processing.
    pub fn place_setup(&mut self, color: Color, p: Point) -> Result<(), RuleError> {
        if self.grid[p.index()].is_some() {
            return Err(RuleError::Occupied(p));
        }
        self.set(p.index(), Some(color));
        self.ko_point = None;
        Ok(())
    }

    pub fn set_to_move(&mut self, color: Color) {
        let keys = zobrist::keys();
        self.zobrist ^= keys.side(self.to_move) ^ keys.side(color);
        self.to_move = color;
    }

    #[inline]
    fn set(&mut self, i: usize, s: Option<Color>) {
        let keys = zobrist::keys();
        if let Some(old) = self.grid[i] {
            self.zobrist ^= keys.stone(i, old);
        }
        if let Some(new) = s {
            self.zobrist ^= keys.stone(i, new);
        }
        self.grid[i] = s;
    }

    /// Returns a new board with the move applied.
    pub fn apply_move(&self, color: Color, point: Option<Point>) -> Result<Board, RuleError> {
        let mut next = self.clone();
        next.play(color, point)?;
        Ok(next)
    }

    /// In-place variant of [`Board::apply_move`]. On error the board is unchanged.
    pub fn play(&mut self, color: Color, point: Option<Point>) -> Result<(), RuleError> {
        if color != self.to_move {
            return Err(RuleError::WrongTurn(color));
        }
        let Some(p) = point else {
            self.ko_point = None;
            self.set_to_move(color.opponent());
            self.move_count += 1;
            return Ok(());
        };
        let idx = p.index();
        if self.grid[idx].is_some() {
            return Err(RuleError::Occupied(p));
        }
        if self.ko_point == Some(p) {
            return Err(RuleError::Ko(p));
        }

        self.set(idx, Some(color));
        let opponent = color.opponent();
        let mut captured = 0usize;
        let mut last_captured = p;
        for n in p.neighbors() {
            if self.grid[n.index()] == Some(opponent) && !self.has_liberty(n) {
                last_captured = n;
                captured += self.remove_group(n);
            }
        }
        if captured == 0 && !self.has_liberty(p) {
            self.set(idx, None);
            return Err(RuleError::Suicide(p));
        }

        self.ko_point = None;
        if captured == 1 && self.is_lone_stone_in_atari(p) {
            self.ko_point = Some(last_captured);
        }
        self.set_to_move(opponent);
        self.move_count += 1;
        Ok(())
    }

    /// Fast legality test, equivalent to `apply_move(..).is_ok()` for the side to move.
    pub fn is_legal(&self, point: Option<Point>) -> bool {
        let Some(p) = point else { return true };
        if self.grid[p.index()].is_some() || self.ko_point == Some(p) {
            return false;
        }
        let me = self.to_move;
        for n in p.neighbors() {
            match self.grid[n.index()] {
                None => return true,
                Some(c) => {
                    let libs = self.liberties_up_to(n, 2);
                    if c == me && libs >= 2 {
                        return true;
                    }
                    if c != me && libs == 1 {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Every legal point plus pass (listed last).
    pub fn legal_moves(&self) -> Vec<Option<Point>> {
        let mut out: Vec<Option<Point>> = Point::all().filter(|&p| self.is_legal(Some(p))).map(Some).collect();
        out.push(None);
        out
    }

    fn is_lone_stone_in_atari(&self, p: Point) -> bool {
        let color = self.grid[p.index()];
        if p.neighbors().any(|n| self.grid[n.index()] == color) {
            return false;
        }
        p.neighbors().filter(|n| self.grid[n.index()].is_none()).count() == 1
    }

    fn has_liberty(&self, start: Point) -> bool {
        self.liberties_up_to(start, 1) >= 1
    }

    /// Counts distinct liberties of the group at `start`, stopping at `limit`.
    fn liberties_up_to(&self, start: Point, limit: usize) -> usize {
        let color = self.grid[start.index()];
        let mut seen = PointSet::default();
        let mut libs = PointSet::default();
        let mut count = 0;
        let mut stack = Vec::with_capacity(32);
        seen.insert(start.index());
        stack.push(start);
        while let Some(q) = stack.pop() {
            for n in q.neighbors() {
                let ni = n.index();
                match self.grid[ni] {
                    None => {
                        if libs.insert(ni) {
                            count += 1;
                            if count >= limit {
                                return count;
                            }
                        }
                    }
                    c if c == color => {
                        if seen.insert(ni) {
                            stack.push(n);
                        }
                    }
                    _ => {}
                }
            }
        }
        count
    }

    fn remove_group(&mut self, start: Point) -> usize {
        let color = self.grid[start.index()];
        let mut stack = vec![start];
        let mut removed = 0;
        self.set(start.index(), None);
        while let Some(q) = stack.pop() {
            removed += 1;
            for n in q.neighbors() {
                if self.grid[n.index()] == color && color.is_some() {
                    self.set(n.index(), None);
                    stack.push(n);
                }
            }
        }
        removed
    }

    /// `true` when no group on the board has zero liberties.
    pub fn all_groups_have_liberties(&self) -> bool {
        Point::all().all(|p| self.grid[p.index()].is_none() || self.has_liberty(p))
    }
}
