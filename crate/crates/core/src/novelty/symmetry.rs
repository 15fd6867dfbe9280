use crate::rules::{Point, BOARD_SIZE};

use super::Token;

/// The eight symmetries of the square board.
pub const SYMMETRIES: usize = 8;

pub fn transform(p: Point, sym: usize) -> Point {
    let n = BOARD_SIZE as u8 - 1;
    let (c, r) = (p.col, p.row);
    let (c, r) = match sym {
        0 => (c, r),
        1 => (n - r, c),
        2 => (n - c, n - r),
        3 => (r, n - c),
        4 => (n - c, r),
        5 => (c, n - r),
        6 => (r, c),
        7 => (n - r, n - c),
        _ => panic!("symmetry index {sym} out of range"),
    };
    Point { col: c, row: r }
}

fn transform_token(t: Token, sym: usize) -> Token {
    let (color, point) = t.decode();
    Token::new(color, point.map(|p| transform(p, sym)))
}

/// Rewrites a sequence into its symmetry-canonical form: at every step the
/// smallest token reachable by a symmetry still consistent with the prefix
/// so far. The canonical form of a prefix is a prefix of the canonical
/// form of the whole sequence, so prefix matching stays well defined.
pub fn canonicalize(tokens: &[Token]) -> Vec<Token> {
    let mut alive = [true; SYMMETRIES];
    let mut out = Vec::with_capacity(tokens.len());
    for &t in tokens {
        let best = (0..SYMMETRIES)
            .filter(|&s| alive[s])
            .map(|s| transform_token(t, s))
            .min()
            .expect("at least one symmetry survives");
        for (s, a) in alive.iter_mut().enumerate() {
            if *a && transform_token(t, s) != best {
                *a = false;
            }
        }
        out.push(best);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::Color;

    #[test]
    fn transforms_are_bijections() {
        for s in 0..SYMMETRIES {
            let mut seen = std::collections::HashSet::new();
            for p in Point::all() {
                assert!(seen.insert(transform(p, s)));
            }
        }
    }

    #[test]
    fn mirrored_openings_collapse() {
        let a = [
            Token::new(Color::Black, Some(Point::new(3, 3))),
            Token::new(Color::White, Some(Point::new(15, 15))),
        ];
        let b = [
            Token::new(Color::Black, Some(Point::new(15, 3))),
            Token::new(Color::White, Some(Point::new(3, 15))),
        ];
        assert_eq!(canonicalize(&a), canonicalize(&b));
        let c = [
            Token::new(Color::Black, Some(Point::new(15, 3))),
            Token::new(Color::White, Some(Point::new(15, 15))),
        ];
        assert_ne!(canonicalize(&a), canonicalize(&c));
    }
}
