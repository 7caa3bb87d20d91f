//! Unigram maximum-likelihood hashtag segmentation.
//!
//! `#racismisvirus` is split into the word sequence maximizing the sum of
//! word log-probabilities under a frequency table. Words missing from the
//! table get probability `1 / (total * 10^len)`, so long garbage tokens lose
//! against dictionary words while short out-of-vocabulary names still
//! survive.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// Longest word considered by the segmenter.
pub const MAX_WORD_LEN: usize = 24;

static SHIPPED_TABLE: &str = include_str!("../data/en_freq.tsv");

#[derive(Debug, Clone)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total: u64,
}

impl FrequencyTable {
    /// The English unigram table bundled with the crate.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_TABLE.as_bytes(), Path::new("<shipped en_freq.tsv>"))
            .expect("bundled frequency table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), path)
    }

    /// Parse `word<TAB>count` lines. Duplicate words sum their counts.
    pub fn parse(reader: impl BufRead, origin: &Path) -> Result<Self> {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, lineno, "expected `word<TAB>count`"))?;
            let count: i64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad count {count:?}")))?;
            if count <= 0 {
                return Err(Error::parse(origin, lineno, format!("non-positive count {count}")));
            }
            let word = word.trim().to_lowercase();
            if word.is_empty() {
                return Err(Error::parse(origin, lineno, "empty word"));
            }
            *counts.entry(word).or_insert(0) += count as u64;
        }
        if counts.is_empty() {
            return Err(Error::EmptyFrequencyTable);
        }
        let total = counts.values().sum();
        Ok(Self { counts, total })
    }

    pub fn from_counts<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for (word, count) in pairs {
            if count == 0 {
                return Err(Error::InvalidArgument("non-positive count".into()));
            }
            *counts.entry(word.into()).or_insert(0) += count;
        }
        if counts.is_empty() {
            return Err(Error::EmptyFrequencyTable);
        }
        let total = counts.values().sum();
        Ok(Self { counts, total })
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.counts.get(word).copied()
    }

    pub fn total_count(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Natural-log probability of `word`, with the length penalty for
    /// unknown words.
    pub fn log_prob(&self, word: &str) -> f64 {
        let total = self.total as f64;
        match self.counts.get(word) {
            Some(&c) => (c as f64 / total).ln(),
            None => -total.ln() - word.chars().count() as f64 * std::f64::consts::LN_10,
        }
    }
}

/// Segment a hashtag surface such as `#stopthehate` into `stop the hate`.
///
/// An entry in `overrides` (keyed by surface) is returned verbatim.
pub fn segment_hashtag(
    surface: &str,
    freq: &FrequencyTable,
    overrides: &HashMap<String, String>,
) -> Result<String> {
    if let Some(seg) = overrides.get(surface) {
        return Ok(seg.clone());
    }
    let body = surface
        .strip_prefix('#')
        .ok_or_else(|| Error::InvalidHashtag(surface.to_string()))?;
    if body.is_empty() || !body.chars().all(char::is_alphanumeric) {
        return Err(Error::InvalidHashtag(surface.to_string()));
    }
    Ok(segment_body(&body.to_lowercase(), freq).join(" "))
}

#[derive(Clone)]
struct Best {
    score: f64,
    words: usize,
    joined: String,
}

impl Best {
    /// Higher score, then fewer words, then the lexicographically smaller
    /// joined string.
    fn beats(&self, other: &Best) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        if self.words != other.words {
            return self.words < other.words;
        }
        self.joined < other.joined
    }
}

/// Exact DP over split positions; `body` must be non-empty.
pub fn segment_body(body: &str, freq: &FrequencyTable) -> Vec<String> {
    let chars: Vec<char> = body.chars().collect();
    let n = chars.len();
    let mut best: Vec<Option<Best>> = vec![None; n + 1];
    best[0] = Some(Best {
        score: 0.0,
        words: 0,
        joined: String::new(),
    });
    for end in 1..=n {
        let mut current: Option<Best> = None;
        for start in end.saturating_sub(MAX_WORD_LEN)..end {
            let Some(prefix) = &best[start] else { continue };
            let word: String = chars[start..end].iter().collect();
            let mut joined = prefix.joined.clone();
            if !joined.is_empty() {
                joined.push(' ');
            }
            joined.push_str(&word);
            let candidate = Best {
                score: prefix.score + freq.log_prob(&word),
                words: prefix.words + 1,
                joined,
            };
            if current.as_ref().is_none_or(|c| candidate.beats(c)) {
                current = Some(candidate);
            }
        }
        best[end] = current;
    }
    best[n]
        .take()
        .map(|b| b.joined.split(' ').map(str::to_string).collect())
        .unwrap_or_default()
}
