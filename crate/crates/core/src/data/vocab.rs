use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const NUM_RESERVED: usize = 4;

const RESERVED: [&str; NUM_RESERVED] = ["<pad>", "<bos>", "<eos>", "<unk>"];

pub fn is_reserved(id: u32) -> bool {
    (id as usize) < NUM_RESERVED
}

/// Token/id table. Ids 0..4 are PAD, BOS, EOS, UNK; content tokens follow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds from tokenized captions, keeping tokens seen at least
    /// `min_count` times. Ids are assigned by descending frequency, ties
    /// broken lexicographically.
    pub fn build<S: AsRef<str>>(captions: &[Vec<S>], min_count: usize) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if captions.is_empty() {
            return Err(Error::Empty("build_vocab"));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for cap in captions {
            for tok in cap {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count && !RESERVED.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_tokens(kept.into_iter().map(|(t, _)| t.to_string())))
    }

    /// Builds from content tokens in id order (reserved entries are prepended).
    pub fn from_tokens(content: impl IntoIterator<Item = String>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(content);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Rebuilds from a full id-ordered table as stored in checkpoints.
    pub fn from_table(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < NUM_RESERVED
            || tokens[..NUM_RESERVED]
                .iter()
                .zip(RESERVED)
                .any(|(a, b)| a != b)
        {
            return Err(Error::Malformed {
                what: "vocabulary",
                detail: "reserved entries missing or out of order".into(),
            });
        }
        let v = Self::from_tokens(tokens.into_iter().skip(NUM_RESERVED));
        if v.index.len() != v.tokens.len() {
            return Err(Error::Malformed {
                what: "vocabulary",
                detail: "duplicate token".into(),
            });
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == NUM_RESERVED
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&id| {
                self.token(id)
                    .map(str::to_string)
                    .ok_or(Error::InvalidToken {
                        id,
                        size: self.len(),
                    })
            })
            .collect()
    }

    /// Space-joined surface text with every reserved token dropped.
    pub fn render(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| !is_reserved(id))
            .filter_map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn check(&self, id: u32) -> Result<()> {
        if (id as usize) < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidToken {
                id,
                size: self.len(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn min_count_one_keeps_all() {
        let v = Vocabulary::build(&[toks("a b"), toks("a")], 1).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));
    }

    #[test]
    fn min_count_two_maps_rare_to_unk() {
        let v = Vocabulary::build(&[toks("a b"), toks("a")], 2).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.encode(&["a", "b"]), vec![4, UNK]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = Vocabulary::build(&[toks("zeta alpha mid mid")], 1).unwrap();
        assert_eq!(v.tokens()[4..], ["mid", "alpha", "zeta"]);
    }

    #[test]
    fn errors() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(Vocabulary::build(&empty, 1).is_err());
        assert!(Vocabulary::build(&[toks("a")], 0).is_err());
    }

    #[test]
    fn render_drops_specials() {
        let v = Vocabulary::build(&[toks("a b")], 1).unwrap();
        assert_eq!(v.render(&[BOS, 4, UNK, 5, EOS, PAD]), "a b");
    }

    #[test]
    fn table_round_trip() {
        let v = Vocabulary::build(&[toks("x y y")], 1).unwrap();
        let back = Vocabulary::from_table(v.tokens().to_vec()).unwrap();
        assert_eq!(v, back);
        assert!(Vocabulary::from_table(vec!["a".into()]).is_err());
    }
}
