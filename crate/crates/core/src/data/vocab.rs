use std::collections::HashMap;

use super::table::RawTable;

/// Token-to-index map for one field. Index 0 is the unknown token and is
/// never produced by a raw token.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FieldVocab {
    index: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl FieldVocab {
    /// Builds a vocabulary from token counts: tokens seen fewer than
    /// `min_frequency` times map to 0; the rest are numbered from 1 by
    /// descending count, ties broken lexicographically.
    pub fn from_counts(counts: HashMap<&str, usize>, min_frequency: usize) -> Self {
        let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_frequency).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens: Vec<String> = kept.into_iter().map(|(t, _)| t.to_string()).collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 1))
            .collect();
        Self { index, tokens }
    }

    /// Number of indices including the reserved 0.
    pub fn size(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn encode(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(0)
    }

    /// `None` for index 0 or out of range.
    pub fn decode(&self, index: u32) -> Option<&str> {
        let i = index as usize;
        if i == 0 {
            return None;
        }
        self.tokens.get(i - 1).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub fields: Vec<FieldVocab>,
    pub min_frequency: usize,
}

impl Vocabulary {
    pub fn sizes(&self) -> Vec<usize> {
        self.fields.iter().map(FieldVocab::size).collect()
    }

    pub fn encode(&self, field: usize, token: &str) -> u32 {
        self.fields[field].encode(token)
    }

    pub fn decode(&self, field: usize, index: u32) -> Option<&str> {
        self.fields[field].decode(index)
    }
}

pub fn build_vocab(table: &RawTable, min_frequency: usize) -> Vocabulary {
    let m = table.schema.num_fields();
    let mut counts: Vec<HashMap<&str, usize>> = vec![HashMap::new(); m];
    for row in &table.rows {
        for (j, token) in row.iter().enumerate() {
            *counts[j].entry(token.as_str()).or_default() += 1;
        }
    }
    Vocabulary {
        fields: counts
            .into_iter()
            .map(|c| FieldVocab::from_counts(c, min_frequency))
            .collect(),
        min_frequency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_order_with_lexicographic_ties() {
        let counts = HashMap::from([("b", 3), ("a", 3), ("c", 1)]);
        let v = FieldVocab::from_counts(counts, 2);
        assert_eq!(v.encode("a"), 1);
        assert_eq!(v.encode("b"), 2);
        assert_eq!(v.encode("c"), 0);
        assert_eq!(v.encode("never"), 0);
        assert_eq!(v.size(), 3);
        assert_eq!(v.decode(0), None);
        assert_eq!(v.decode(2), Some("b"));
        assert_eq!(v.decode(3), None);
    }

    #[test]
    fn min_frequency_one_keeps_everything() {
        let counts = HashMap::from([("x", 1), ("y", 5), ("z", 1)]);
        let v = FieldVocab::from_counts(counts, 1);
        assert_eq!(v.encode("y"), 1);
        assert_eq!(v.encode("x"), 2);
        assert_eq!(v.encode("z"), 3);
    }

    #[test]
    fn rare_token_goes_to_unknown() {
        let counts = HashMap::from([("once", 1), ("twice", 2)]);
        let v = FieldVocab::from_counts(counts, 2);
        assert_eq!(v.encode("once"), 0);
        assert_eq!(v.encode("twice"), 1);
    }
}
