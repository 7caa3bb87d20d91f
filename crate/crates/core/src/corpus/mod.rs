//! Labeled posts: ingestion, cleaning, sentiment-hashtag extraction and the
//! split into posts with (T_O) and without (T_O') lexicon hashtags.

mod clean;
mod lexicon;
pub mod synth;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use clean::clean_text;
pub use lexicon::{parse_records, read_records, write_records, HashtagEntry, Lexicon, LexiconRecord};
pub use synth::{generate_synthetic_corpus, generate_with, shipped_lexicon, SynthOptions};

use crate::error::{Error, Result};
use crate::relation::{derive_relation, RelationLabel};

/// Number of sentiment classes.
pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Hate,
    CounterHate,
    Neutral,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; NUM_CLASSES] = [
        SentimentLabel::Hate,
        SentimentLabel::CounterHate,
        SentimentLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        match self {
            SentimentLabel::Hate => 0,
            SentimentLabel::CounterHate => 1,
            SentimentLabel::Neutral => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Hate => "hate",
            SentimentLabel::CounterHate => "counterhate",
            SentimentLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hate" => Ok(SentimentLabel::Hate),
            "counterhate" => Ok(SentimentLabel::CounterHate),
            "neutral" => Ok(SentimentLabel::Neutral),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Polarity of a sentiment hashtag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Hate,
    CounterHate,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Hate => "hate",
            Polarity::CounterHate => "counterhate",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hate" => Ok(Polarity::Hate),
            "counterhate" => Ok(Polarity::CounterHate),
            other => Err(format!("unknown polarity {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub raw_text: String,
    pub clean_text: String,
    pub label: SentimentLabel,
    /// Every `#token` of the cleaned text, in order.
    pub hashtags: Vec<String>,
}

impl Post {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, label: SentimentLabel) -> Self {
        let raw_text = raw_text.into();
        let clean = clean_text(&raw_text);
        let hashtags = clean
            .split_whitespace()
            .filter(|t| t.len() > 1 && t.starts_with('#'))
            .map(str::to_string)
            .collect();
        Self {
            id: id.into(),
            raw_text,
            clean_text: clean,
            label,
            hashtags,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSample {
    pub post_id: String,
    /// Post content with every lexicon hashtag removed.
    pub t_c: String,
    /// Segmented text of the chosen hashtag.
    pub t_h: String,
    pub hashtag_polarity: Polarity,
    pub relation: RelationLabel,
    pub post_label: SentimentLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusPartition {
    /// T_O: posts carrying at least one lexicon hashtag.
    pub with_hashtags: Vec<Post>,
    /// T_O': everything else.
    pub without_hashtags: Vec<Post>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guess from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    text: String,
    label: String,
}

/// Read labeled posts in file order.
pub fn ingest_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<Post>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    match format {
        CorpusFormat::Jsonl => ingest_jsonl(reader, path),
        CorpusFormat::Csv => ingest_csv(reader, path),
    }
}

pub fn ingest_jsonl(reader: impl BufRead, origin: &Path) -> Result<Vec<Post>> {
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| Error::parse(origin, lineno, format!("malformed record: {e}")))?;
        posts.push(to_post(record, lineno, origin, &mut seen)?);
    }
    Ok(posts)
}

pub fn ingest_csv(reader: impl std::io::Read, origin: &Path) -> Result<Vec<Post>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    for result in rdr.deserialize::<Record>() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(origin, line, format!("malformed record: {e}"))
        })?;
        // Header is line 1.
        let lineno = posts.len() + 2;
        posts.push(to_post(record, lineno, origin, &mut seen)?);
    }
    Ok(posts)
}

fn to_post(record: Record, lineno: usize, origin: &Path, seen: &mut HashSet<String>) -> Result<Post> {
    let label: SentimentLabel = record
        .label
        .trim()
        .parse()
        .map_err(|e: String| Error::parse(origin, lineno, e))?;
    if !seen.insert(record.id.clone()) {
        return Err(Error::DuplicateId {
            id: record.id,
            line: lineno,
        });
    }
    Ok(Post::new(record.id, record.text, label))
}

pub fn write_jsonl(posts: &[Post], mut out: impl Write) -> std::io::Result<()> {
    for p in posts {
        let record = Record {
            id: p.id.clone(),
            text: p.raw_text.clone(),
            label: p.label.as_str().to_string(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Lexicon entries whose surface appears as a whole token of the cleaned
/// text, ordered by first occurrence.
pub fn extract_sentiment_hashtags<'a>(post: &Post, lexicon: &'a Lexicon) -> Vec<&'a HashtagEntry> {
    let mut found: Vec<&HashtagEntry> = Vec::new();
    for token in post.clean_text.split_whitespace() {
        if let Some(entry) = lexicon.get(token) {
            if !found.iter().any(|e| e.surface == entry.surface) {
                found.push(entry);
            }
        }
    }
    found
}

/// Cleaned text without any lexicon hashtag token.
pub fn strip_lexicon_hashtags(text: &str, lexicon: &Lexicon) -> String {
    text.split_whitespace()
        .filter(|t| !lexicon.contains(t))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Split a post into `(t_c, t_h)`. The first-occurring lexicon hashtag
/// supplies `t_h`; all lexicon hashtags are removed from `t_c`.
pub fn split_post(post: &Post, lexicon: &Lexicon) -> Option<PairSample> {
    let found = extract_sentiment_hashtags(post, lexicon);
    let chosen = *found.first()?;
    if found.len() > 1 {
        log::debug!(
            "post {}: {} sentiment hashtags, using {} and discarding {:?}",
            post.id,
            found.len(),
            chosen.surface,
            found[1..].iter().map(|e| e.surface.as_str()).collect::<Vec<_>>()
        );
    }
    Some(PairSample {
        post_id: post.id.clone(),
        t_c: strip_lexicon_hashtags(&post.clean_text, lexicon),
        t_h: chosen.segmented.clone(),
        hashtag_polarity: chosen.polarity,
        relation: derive_relation(chosen.polarity, post.label),
        post_label: post.label,
    })
}

pub fn partition(corpus: &[Post], lexicon: &Lexicon) -> CorpusPartition {
    let mut part = CorpusPartition::default();
    for post in corpus {
        let has = post
            .clean_text
            .split_whitespace()
            .any(|t| lexicon.contains(t));
        if has {
            part.with_hashtags.push(post.clone());
        } else {
            part.without_hashtags.push(post.clone());
        }
    }
    part
}

/// How sentiment hashtags appear in the text a classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashtagMode {
    /// Lexicon hashtags removed.
    Strip,
    /// Kept as single `#tokens`.
    Raw,
    /// Replaced by their word segmentation.
    Segmented,
}

pub fn render_text(post: &Post, lexicon: &Lexicon, mode: HashtagMode) -> String {
    match mode {
        HashtagMode::Raw => post.clean_text.clone(),
        HashtagMode::Strip => strip_lexicon_hashtags(&post.clean_text, lexicon),
        HashtagMode::Segmented => post
            .clean_text
            .split_whitespace()
            .map(|t| lexicon.get(t).map_or(t, |e| e.segmented.as_str()))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(entries: &[(&str, &str, Polarity)]) -> Lexicon {
        Lexicon::new(
            entries
                .iter()
                .map(|(s, seg, p)| HashtagEntry {
                    surface: s.to_string(),
                    segmented: seg.to_string(),
                    polarity: *p,
                })
                .collect(),
        )
        .unwrap()
    }

    fn small_lex() -> Lexicon {
        lex(&[
            ("#chinavirus", "china virus", Polarity::Hate),
            ("#racismisavirus", "racism is a virus", Polarity::CounterHate),
        ])
    }

    #[test]
    fn ingest_two_lines() {
        let text = "{\"id\":\"1\",\"text\":\"a\",\"label\":\"hate\"}\n{\"id\":\"2\",\"text\":\"b\",\"label\":\"neutral\"}\n";
        let posts = ingest_jsonl(text.as_bytes(), Path::new("c")).unwrap();
        assert_eq!(posts.len(), 2);
        assert_eq!(posts[0].label, SentimentLabel::Hate);
        assert_eq!(posts[1].label, SentimentLabel::Neutral);
    }

    #[test]
    fn ingest_empty() {
        assert!(ingest_jsonl("".as_bytes(), Path::new("c")).unwrap().is_empty());
    }

    #[test]
    fn unknown_label_names_line() {
        let text = "{\"id\":\"1\",\"text\":\"a\",\"label\":\"angry\"}\n";
        let err = ingest_jsonl(text.as_bytes(), Path::new("c")).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("angry"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_and_duplicate_rejected() {
        let text = "{\"id\":\"1\",\"text\":\"a\",\"label\":\"hate\"}\n{\"id\":\"1\"\n";
        assert!(matches!(
            ingest_jsonl(text.as_bytes(), Path::new("c")).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        let text = "{\"id\":\"1\",\"text\":\"a\",\"label\":\"hate\"}\n{\"id\":\"1\",\"text\":\"b\",\"label\":\"hate\"}\n";
        assert!(matches!(
            ingest_jsonl(text.as_bytes(), Path::new("c")).unwrap_err(),
            Error::DuplicateId { line: 2, .. }
        ));
    }

    #[test]
    fn csv_ingest() {
        let text = "id,text,label\n1,\"hello, world\",counterhate\n2,x,angry\n";
        let err = ingest_csv(text.as_bytes(), Path::new("c.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let text = "id,text,label\n1,\"hello, world\",counterhate\n";
        let posts = ingest_csv(text.as_bytes(), Path::new("c.csv")).unwrap();
        assert_eq!(posts[0].raw_text, "hello, world");
        assert_eq!(posts[0].clean_text, "hello world");
    }

    #[test]
    fn extract_examples() {
        let lexicon = lex(&[("#chinavirus", "china virus", Polarity::Hate)]);
        let p = Post::new("1", "stop hate #chinavirus now", SentimentLabel::CounterHate);
        let found = extract_sentiment_hashtags(&p, &lexicon);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].surface, "#chinavirus");

        let p = Post::new("2", "nothing here #other", SentimentLabel::Neutral);
        assert!(extract_sentiment_hashtags(&p, &lexicon).is_empty());

        let lexicon = small_lex();
        let p = Post::new("3", "#racismisavirus vs #chinavirus", SentimentLabel::CounterHate);
        let found: Vec<_> = extract_sentiment_hashtags(&p, &lexicon)
            .into_iter()
            .map(|e| e.surface.as_str())
            .collect();
        assert_eq!(found, ["#racismisavirus", "#chinavirus"]);
    }

    #[test]
    fn whole_token_matching_only() {
        let lexicon = small_lex();
        let p = Post::new("1", "#chinavirusisreal is not a match", SentimentLabel::Hate);
        assert!(split_post(&p, &lexicon).is_none());
    }

    #[test]
    fn split_examples() {
        let lexicon = lex(&[("#chinavirus", "china virus", Polarity::Hate)]);
        let p = Post::new("1", "stop hate #chinavirus now", SentimentLabel::CounterHate);
        let pair = split_post(&p, &lexicon).unwrap();
        assert_eq!(pair.t_c, "stop hate now");
        assert_eq!(pair.t_h, "china virus");
        assert_eq!(pair.relation, RelationLabel::Contradiction);

        let p = Post::new("2", "no tags", SentimentLabel::Hate);
        assert!(split_post(&p, &lexicon).is_none());

        let lexicon = small_lex();
        let p = Post::new("3", "#racismisavirus stand together", SentimentLabel::CounterHate);
        let pair = split_post(&p, &lexicon).unwrap();
        assert_eq!(pair.t_h, "racism is a virus");
        assert_eq!(pair.t_c, "stand together");
        assert_eq!(pair.relation, RelationLabel::Entailment);
    }

    #[test]
    fn split_removes_every_lexicon_hashtag() {
        let lexicon = small_lex();
        let p = Post::new("1", "#chinavirus no #racismisavirus #chinavirus", SentimentLabel::Hate);
        let pair = split_post(&p, &lexicon).unwrap();
        assert_eq!(pair.t_c, "no");
        assert_eq!(pair.t_h, "china virus");
    }

    #[test]
    fn partition_examples() {
        let lexicon = small_lex();
        let corpus = vec![
            Post::new("1", "a #chinavirus", SentimentLabel::Hate),
            Post::new("2", "b", SentimentLabel::Neutral),
            Post::new("3", "c #other", SentimentLabel::Neutral),
        ];
        let part = partition(&corpus, &lexicon);
        assert_eq!(part.with_hashtags.len(), 1);
        assert_eq!(part.without_hashtags.len(), 2);
        let part = partition(&corpus, &Lexicon::default());
        assert!(part.with_hashtags.is_empty());
        assert_eq!(part.without_hashtags.len(), 3);
    }

    #[test]
    fn render_modes() {
        let lexicon = small_lex();
        let p = Post::new("1", "Stop #ChinaVirus now #other", SentimentLabel::CounterHate);
        assert_eq!(render_text(&p, &lexicon, HashtagMode::Raw), "stop #chinavirus now #other");
        assert_eq!(render_text(&p, &lexicon, HashtagMode::Strip), "stop now #other");
        assert_eq!(
            render_text(&p, &lexicon, HashtagMode::Segmented),
            "stop china virus now #other"
        );
    }
}
