use std::collections::{BTreeMap, BTreeSet};

pub const MAX_N: usize = 4;

/// Counts of the length-`n` token tuples in a sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NGramTable {
    pub n: usize,
    pub counts: BTreeMap<Vec<u32>, usize>,
}

impl NGramTable {
    pub fn new(tokens: &[u32], n: usize) -> Self {
        assert!((1..=MAX_N).contains(&n), "n-gram order out of range");
        let mut counts = BTreeMap::new();
        if tokens.len() >= n {
            for w in tokens.windows(n) {
                *counts.entry(w.to_vec()).or_insert(0) += 1;
            }
        }
        NGramTable { n, counts }
    }

    /// Tables for every order 1..=4.
    pub fn all_orders(tokens: &[u32]) -> [NGramTable; MAX_N] {
        std::array::from_fn(|i| NGramTable::new(tokens, i + 1))
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn get(&self, gram: &[u32]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

/// Number of reference sets containing each n-gram (any order 1..=4).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DocFreq {
    pub df: BTreeMap<Vec<u32>, usize>,
    pub num_refs: usize,
}

impl DocFreq {
    /// A gram occurring in several references of one set counts once.
    pub fn build(reference_sets: &[Vec<Vec<u32>>]) -> Self {
        let mut df = BTreeMap::new();
        for set in reference_sets {
            let mut present: BTreeSet<Vec<u32>> = BTreeSet::new();
            for r in set {
                for table in NGramTable::all_orders(r) {
                    present.extend(table.counts.into_keys());
                }
            }
            for g in present {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        DocFreq {
            df,
            num_refs: reference_sets.len(),
        }
    }

    pub fn get(&self, gram: &[u32]) -> usize {
        self.df.get(gram).copied().unwrap_or(0)
    }

    /// `ln(N / df)`, with absent grams treated as `df = 1`.
    pub fn idf(&self, gram: &[u32]) -> f64 {
        let df = self.get(gram).max(1) as f64;
        (self.num_refs as f64).ln() - df.ln()
    }
}
