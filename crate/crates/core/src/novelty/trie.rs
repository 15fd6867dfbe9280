use chrono::NaiveDate;

use super::Token;

const NONE: u32 = u32::MAX;

/// Chronological prefix index over move-token sequences.
///
/// Nodes are stored column-wise (first-child / next-sibling) so that a
/// node costs 14 bytes. Depth-one nodes are addressed directly from a
/// dense root table. The game that first inserted a node is its earliest
/// occurrence because games arrive in corpus order.
#[derive(Clone, Debug)]
pub struct PrefixIndex {
    max_move: usize,
    root: Vec<u32>,
    token: Vec<u16>,
    first_child: Vec<u32>,
    next_sibling: Vec<u32>,
    creator: Vec<u32>,
    games: Vec<(NaiveDate, Box<str>)>,
}

impl PrefixIndex {
    pub fn new(max_move: usize) -> Self {
        PrefixIndex {
            max_move,
            root: vec![NONE; Token::COUNT],
            token: Vec::new(),
            first_child: Vec::new(),
            next_sibling: Vec::new(),
            creator: Vec::new(),
            games: Vec::new(),
        }
    }

    pub fn max_move(&self) -> usize {
        self.max_move
    }

    /// Number of stored prefixes.
    pub fn len(&self) -> usize {
        self.token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token.is_empty()
    }

    pub fn games_indexed(&self) -> usize {
        self.games.len()
    }

    fn child(&self, parent: u32, tok: Token) -> u32 {
        if parent == NONE {
            return self.root[tok.0 as usize];
        }
        let mut c = self.first_child[parent as usize];
        while c != NONE {
            if self.token[c as usize] == tok.0 {
                return c;
            }
            c = self.next_sibling[c as usize];
        }
        NONE
    }

    fn push_child(&mut self, parent: u32, tok: Token, creator: u32) -> u32 {
        let id = u32::try_from(self.token.len()).expect("prefix index exceeds u32 nodes");
        assert!(id != NONE, "prefix index full");
        self.token.push(tok.0);
        self.first_child.push(NONE);
        self.creator.push(creator);
        if parent == NONE {
            self.next_sibling.push(NONE);
            self.root[tok.0 as usize] = id;
        } else {
            self.next_sibling.push(self.first_child[parent as usize]);
            self.first_child[parent as usize] = id;
        }
        id
    }

    /// Records one game (already truncated or not) and returns the 1-based
    /// position of its first prefix that was absent before this call.
    ///
    /// Callers are responsible for feeding games in corpus order.
    pub fn insert_game(&mut self, date: NaiveDate, game_id: &str, tokens: &[Token]) -> Option<u32> {
        let ordinal = u32::try_from(self.games.len()).expect("too many games");
        self.games.push((date, game_id.into()));
        let tokens = &tokens[..tokens.len().min(self.max_move)];
        let mut node = NONE;
        let mut novel = None;
        for (k, &tok) in tokens.iter().enumerate() {
            let next = if novel.is_none() { self.child(node, tok) } else { NONE };
            node = if next == NONE {
                novel.get_or_insert(k as u32 + 1);
                self.push_child(node, tok, ordinal)
            } else {
                next
            };
        }
        novel
    }

    /// Earliest occurrence `(date, game_id)` of a prefix, if stored.
    pub fn earliest(&self, prefix: &[Token]) -> Option<(NaiveDate, &str)> {
        if prefix.is_empty() || prefix.len() > self.max_move {
            return None;
        }
        let mut node = NONE;
        for &tok in prefix {
            node = self.child(node, tok);
            if node == NONE {
                return None;
            }
        }
        let (date, id) = &self.games[self.creator[node as usize] as usize];
        Some((*date, id))
    }

    pub fn contains(&self, prefix: &[Token]) -> bool {
        self.earliest(prefix).is_some()
    }

    /// Approximate heap footprint in bytes.
    pub fn heap_bytes(&self) -> usize {
        self.token.capacity() * 2
            + (self.first_child.capacity() + self.next_sibling.capacity() + self.creator.capacity()) * 4
            + self.root.capacity() * 4
            + self.games.iter().map(|(_, id)| id.len() + 24).sum::<usize>()
    }
}
