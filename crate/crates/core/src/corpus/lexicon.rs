//! Sentiment-hashtag lexicon: `surface<TAB>polarity[<TAB>segmentation]`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Polarity;
use crate::error::{Error, Result};
use crate::segment::{segment_hashtag, FrequencyTable};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashtagEntry {
    /// Lowercase, starts with `#`.
    pub surface: String,
    /// Space-separated words spelling the surface body.
    pub segmented: String,
    pub polarity: Polarity,
}

impl HashtagEntry {
    pub fn body(&self) -> &str {
        self.surface.trim_start_matches('#')
    }
}

/// One raw lexicon line before segmentation is resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconRecord {
    pub surface: String,
    pub polarity: Polarity,
    pub segmentation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: Vec<HashtagEntry>,
    index: HashMap<String, usize>,
}

fn check_surface(surface: &str) -> Result<()> {
    let ok = surface
        .strip_prefix('#')
        .is_some_and(|b| !b.is_empty() && b.chars().all(|c| c.is_alphanumeric()))
        && surface.chars().all(|c| !c.is_uppercase());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidHashtag(surface.to_string()))
    }
}

fn spells(surface: &str, segmented: &str) -> bool {
    let joined: String = segmented.chars().filter(|c| *c != ' ').collect();
    joined == surface.trim_start_matches('#') && !segmented.contains("  ")
}

impl Lexicon {
    /// Build from fully resolved entries. Surfaces must be unique and every
    /// segmentation must spell its surface.
    pub fn new(entries: Vec<HashtagEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            check_surface(&e.surface)?;
            if !spells(&e.surface, &e.segmented) {
                return Err(Error::BadOverride {
                    surface: e.surface.clone(),
                    segmented: e.segmented.clone(),
                });
            }
            if index.insert(e.surface.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate lexicon surface {}",
                    e.surface
                )));
            }
        }
        Ok(Self { entries, index })
    }

    /// Fill missing segmentations from the frequency table.
    pub fn resolve(records: Vec<LexiconRecord>, freq: &FrequencyTable) -> Result<Self> {
        let overrides: HashMap<String, String> = records
            .iter()
            .filter_map(|r| r.segmentation.clone().map(|s| (r.surface.clone(), s)))
            .collect();
        let entries = records
            .into_iter()
            .map(|r| {
                check_surface(&r.surface)?;
                let segmented = segment_hashtag(&r.surface, freq, &overrides)?;
                Ok(HashtagEntry {
                    surface: r.surface,
                    segmented,
                    polarity: r.polarity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>, freq: &FrequencyTable) -> Result<Self> {
        Self::resolve(read_records(path)?, freq)
    }

    pub fn entries(&self) -> &[HashtagEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<&HashtagEntry> {
        self.index.get(surface).map(|&i| &self.entries[i])
    }

    pub fn position(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    /// Entries with the given polarity only, order preserved.
    pub fn filter_polarity(&self, polarity: Polarity) -> Self {
        let entries = self
            .entries
            .iter()
            .filter(|e| e.polarity == polarity)
            .cloned()
            .collect();
        Self::new(entries).expect("subset of a valid lexicon is valid")
    }

    /// Write with every segmentation in the third column.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.surface, e.polarity, e.segmented));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<LexiconRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(std::io::BufReader::new(file), path)
}

pub fn parse_records(reader: impl BufRead, origin: &Path) -> Result<Vec<LexiconRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with("//") {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&cols.len()) {
            return Err(Error::parse(origin, lineno, "expected 2 or 3 tab-separated columns"));
        }
        let surface = cols[0].trim().to_string();
        check_surface(&surface).map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        let polarity: Polarity = cols[1]
            .trim()
            .parse()
            .map_err(|e: String| Error::parse(origin, lineno, e))?;
        let segmentation = cols
            .get(2)
            .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
            .filter(|s| !s.is_empty());
        if let Some(seg) = &segmentation {
            if !spells(&surface, seg) {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("segmentation {seg:?} does not spell {surface}"),
                ));
            }
        }
        records.push(LexiconRecord {
            surface,
            polarity,
            segmentation,
        });
    }
    Ok(records)
}

pub fn write_records(records: &[LexiconRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        match &r.segmentation {
            Some(seg) => writeln!(out, "{}\t{}\t{}", r.surface, r.polarity, seg)?,
            None => writeln!(out, "{}\t{}", r.surface, r.polarity)?,
        }
    }
    Ok(())
}
