//! Slow, straightforward reference implementations.
//!
//! Each function here recomputes something the optimized modules compute,
//! by the most direct method available and sharing no code with them. The
//! test suite and `gocf verify` compare the two.

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::panel::MoveObservation;
use crate::pipeline::FilterSpec;
use crate::record::GameRecord;
use crate::rules::{Color, Point, SplitMix64, ZOBRIST_SEED};

/// Novel move of every game by pairwise comparison with all earlier games:
/// one past the longest prefix shared with any predecessor, or `None` when
/// the whole (truncated) sequence already occurred.
pub fn novelty_bruteforce(corpus: &[GameRecord], max_move: usize) -> Vec<Option<u32>> {
    let seqs: Vec<Vec<(Color, Option<Point>)>> = corpus
        .iter()
        .map(|g| g.moves.iter().take(max_move).map(|m| (m.color, m.point)).collect())
        .collect();
    (0..seqs.len())
        .map(|i| {
            let shared = (0..i)
                .map(|j| seqs[i].iter().zip(&seqs[j]).take_while(|(a, b)| a == b).count())
                .max()
                .unwrap_or(0);
            (shared < seqs[i].len()).then_some(shared as u32 + 1)
        })
        .collect()
}

/// Board kept as a map, with captures found by set-based flood fill and ko
/// checked by comparing against the position before the opponent's move.
#[derive(Clone, Debug, Default)]
pub struct SlowBoard {
    stones: HashMap<(i32, i32), Color>,
    to_move: Option<Color>,
    before_last: Option<HashMap<(i32, i32), Color>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlowIllegal {
    WrongTurn,
    Occupied,
    Suicide,
    Ko,
}

fn adjacent((c, r): (i32, i32)) -> impl Iterator<Item = (i32, i32)> {
    [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
        .into_iter()
        .filter(|&(c, r)| (0..19).contains(&c) && (0..19).contains(&r))
}

impl SlowBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn to_move(&self) -> Color {
        self.to_move.unwrap_or(Color::Black)
    }

    pub fn get(&self, p: Point) -> Option<Color> {
        self.stones.get(&(p.col as i32, p.row as i32)).copied()
    }

    fn group(stones: &HashMap<(i32, i32), Color>, start: (i32, i32)) -> (HashSet<(i32, i32)>, usize) {
        let color = stones[&start];
        let mut seen = HashSet::from([start]);
        let mut stack = vec![start];
        let mut libs = HashSet::new();
        while let Some(p) = stack.pop() {
            for q in adjacent(p) {
                match stones.get(&q) {
                    None => {
                        libs.insert(q);
                    }
                    Some(&c) if c == color && seen.insert(q) => stack.push(q),
                    _ => {}
                }
            }
        }
        (seen, libs.len())
    }

    pub fn play(&mut self, color: Color, point: Option<Point>) -> Result<(), SlowIllegal> {
        if color != self.to_move() {
            return Err(SlowIllegal::WrongTurn);
        }
        let before = self.stones.clone();
        if let Some(p) = point {
            let at = (p.col as i32, p.row as i32);
            if self.stones.contains_key(&at) {
                return Err(SlowIllegal::Occupied);
            }
            let mut next = self.stones.clone();
            next.insert(at, color);
            for q in adjacent(at) {
                if next.get(&q) == Some(&color.opponent()) {
                    let (grp, libs) = Self::group(&next, q);
                    if libs == 0 {
                        for s in grp {
                            next.remove(&s);
                        }
                    }
                }
            }
            if Self::group(&next, at).1 == 0 {
                return Err(SlowIllegal::Suicide);
            }
            if self.before_last.as_ref() == Some(&next) {
                return Err(SlowIllegal::Ko);
            }
            self.stones = next;
        }
        self.before_last = Some(before);
        self.to_move = Some(color.opponent());
        Ok(())
    }

    /// Zobrist hash recomputed from scratch: 722 stone keys (per point,
    /// black then white, row-major) followed by the two side-to-move keys,
    /// all drawn from SplitMix64.
    pub fn zobrist(&self) -> u64 {
        let mut rng = SplitMix64::new(ZOBRIST_SEED);
        let stone_keys: Vec<u64> = (0..722).map(|_| rng.next_u64()).collect();
        let side_keys = [rng.next_u64(), rng.next_u64()];
        let mut h = side_keys[if self.to_move() == Color::Black { 0 } else { 1 }];
        for (&(c, r), &color) in &self.stones {
            let idx = (r * 19 + c) as usize;
            h ^= stone_keys[2 * idx + if color == Color::Black { 0 } else { 1 }];
        }
        h
    }
}

/// Coefficients, clustered covariance and `K` from OLS with every fixed
/// effect materialized as dummy columns (plus an intercept). Redundant
/// dummies are dropped by twice-orthogonalized Gram-Schmidt in column order,
/// the rest is solved by QR and the CR1 sandwich is built row by row.
#[derive(Clone, Debug)]
pub struct DummyOls {
    pub beta: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub k: usize,
}

/// Indices of a maximal linearly independent prefix-greedy subset of `cols`.
fn independent_columns(cols: &[Vec<f64>]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        let norm0 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
            keep.push(j);
        }
    }
    keep
}

pub fn explicit_dummy_ols(y: &[f64], regressors: &[Vec<f64>], factors: &[Vec<u32>], cluster: &[u32]) -> DummyOls {
    let n = y.len();
    let p = regressors.len();
    let mut cols: Vec<Vec<f64>> = regressors.to_vec();
    cols.push(vec![1.0; n]);
    for f in factors {
        let levels: Vec<u32> = f.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        for l in levels {
            cols.push(f.iter().map(|&v| if v == l { 1.0 } else { 0.0 }).collect());
        }
    }
    let keep = independent_columns(&cols);
    assert!(keep[..p.min(keep.len())] == (0..p).collect::<Vec<_>>()[..], "regressors are collinear with the dummies");
    let k = keep.len();
    let x = DMatrix::from_fn(n, k, |i, j| cols[keep[j]][i]);
    let qr = x.clone().qr();
    let r_inv = qr.r().try_inverse().expect("full column rank");
    // rows of (X'X)^-1 X'
    let bread = &r_inv * qr.q().transpose();
    let yv = nalgebra::DVector::from_column_slice(y);
    let beta_full = &bread * &yv;
    let resid = &yv - &x * &beta_full;

    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &c) in cluster.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    let g = groups.len() as f64;
    let mut meat = vec![vec![0.0; p]; p];
    for rows in groups.values() {
        let s: Vec<f64> = (0..p).map(|a| rows.iter().map(|&i| bread[(a, i)] * resid[i]).sum()).collect();
        for a in 0..p {
            for b in 0..p {
                meat[a][b] += s[a] * s[b];
            }
        }
    }
    let c = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    DummyOls {
        beta: (0..p).map(|j| beta_full[j]).collect(),
        cov: meat.into_iter().map(|row| row.into_iter().map(|v| v * c).collect()).collect(),
        k,
    }
}

/// Per-(player, period label) medians by collect-and-sort.
pub fn naive_medians(points: &[(String, String, f64)]) -> Vec<(String, String, f64, usize)> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for (a, b, _) in points {
        if !keys.iter().any(|(x, y)| x == a && y == b) {
            keys.push((a.clone(), b.clone()));
        }
    }
    keys.sort();
    keys.into_iter()
        .map(|(a, b)| {
            let mut vs: Vec<f64> = points.iter().filter(|(x, y, _)| *x == a && *y == b).map(|t| t.2).collect();
            vs.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let n = vs.len();
            let m = if n % 2 == 1 { vs[n / 2] } else { (vs[n / 2 - 1] + vs[n / 2]) / 2.0 };
            (a, b, m, n)
        })
        .collect()
}

/// After-AI flag by direct comparison.
pub fn after_ai(date: NaiveDate, cutoff: NaiveDate) -> bool {
    date >= cutoff
}

/// Indices of the rows a filter keeps, by re-reading each row's game
/// sequence. A move with no row counts as not matching the engine.
pub fn filter_by_scan(rows: &[MoveObservation], spec: FilterSpec) -> Vec<usize> {
    let mut by_game: HashMap<&str, Vec<&MoveObservation>> = HashMap::new();
    for r in rows {
        by_game.entry(r.game_id.as_str()).or_default().push(r);
    }
    let matched = |game: &str, k: u32| by_game[game].iter().any(|r| r.move_number == k && r.matched_ai);
    let keep = |r: &MoveObservation| -> bool {
        let m = r.move_number;
        match spec {
            FilterSpec::All => true,
            FilterSpec::DiffersFromAi => !r.matched_ai,
            FilterSpec::MatchesAi => r.matched_ai,
            FilterSpec::StageBucket(k) => m >= 1 && m <= 60 && (m - 1) / 10 + 1 == k,
            FilterSpec::NovelMovesOnly => r.novelty_dummy,
            FilterSpec::NovelDiffersFromAi => r.novelty_dummy && !r.matched_ai,
            FilterSpec::NovelMatchesAi => r.novelty_dummy && r.matched_ai,
            FilterSpec::OpponentDeviationResponse(prefix) => {
                if m < 2 || matched(&r.game_id, m - 1) {
                    return false;
                }
                let lo = match prefix {
                    None => 1,
                    Some(l) if m > l + 1 => m - 1 - l,
                    Some(_) => return false,
                };
                let mut k = lo;
                while k + 2 <= m {
                    if !matched(&r.game_id, k) {
                        return false;
                    }
                    k += 1;
                }
                true
            }
        }
    };
    (0..rows.len()).filter(|&i| keep(&rows[i])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slow_board_captures_and_ko() {
        let mut b = SlowBoard::new();
        let mv = |c, r| Some(Point::new(c, r));
        // black surrounds (1,1) except from (2,1); white builds the ko shape
        let seq = [
            (Color::Black, mv(1, 0)),
            (Color::White, mv(2, 0)),
            (Color::Black, mv(0, 1)),
            (Color::White, mv(3, 1)),
            (Color::Black, mv(1, 2)),
            (Color::White, mv(2, 2)),
            (Color::Black, mv(2, 1)),
            (Color::White, mv(1, 1)),
        ];
        for (c, p) in seq {
            b.play(c, p).unwrap();
        }
        assert_eq!(b.get(Point::new(2, 1)), None);
        assert_eq!(b.play(Color::Black, mv(2, 1)), Err(SlowIllegal::Ko));
        b.play(Color::Black, None).unwrap();
        b.play(Color::White, None).unwrap();
        b.play(Color::Black, mv(2, 1)).unwrap();
        assert_eq!(b.get(Point::new(1, 1)), None);
    }

    #[test]
    fn bruteforce_novelty_small() {
        let g = |id: &str, moves: &[(u8, u8)]| {
            let mut r = crate::synthetic::blank_record(id, NaiveDate::from_ymd_opt(2000, 1, 1).unwrap());
            r.moves = moves
                .iter()
                .enumerate()
                .map(|(i, &(c, row))| crate::record::Move {
                    number: i as u32 + 1,
                    color: if i % 2 == 0 { Color::Black } else { Color::White },
                    point: Some(Point::new(c, row)),
                })
                .collect();
            r
        };
        let corpus = [g("a", &[(3, 3), (15, 15)]), g("b", &[(3, 3), (15, 3)]), g("c", &[(3, 3)]), g("d", &[])];
        assert_eq!(novelty_bruteforce(&corpus, 60), vec![Some(1), Some(2), None, None]);
    }
}
