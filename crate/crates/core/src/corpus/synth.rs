//! Template-based synthetic corpora.
//!
//! Posts come in three content kinds per class: explicit hate or
//! counter-hate wording, rhetorical "implicit" wording whose polarity is
//! only recoverable from a hashtag, and neutral news wording. Tagged posts
//! are spread over all six (hashtag polarity, label) cells.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{parse_records, HashtagEntry, Lexicon, Polarity, Post, SentimentLabel};

static SHIPPED_LEXICON: &str = include_str!("../../data/lexicon.tsv");

const HATE_EXPLICIT: &[&str] = &[
    "they brought this disease to our country",
    "ban every flight from there right now",
    "they lied and our people died",
    "send them all back where they came from",
    "never trust anything they say",
    "their filthy markets started all of this",
    "keep them out of our neighborhoods",
    "they should pay for every single death",
    "close the borders and keep them out",
    "they are spreading it on purpose",
    "do not let them into our stores",
    "those invaders cannot be trusted",
];

const COUNTER_EXPLICIT: &[&str] = &[
    "racism is never the answer",
    "stand with our asian neighbors",
    "hate crimes against asians must end",
    "blaming a whole community is wrong",
    "we support our asian friends and families",
    "speak up when you see racism",
    "a disease has no ethnicity",
    "choose solidarity over fear",
    "report every hate incident you witness",
    "that slur fuels violence against innocent people",
    "our asian neighbors deserve respect",
    "racist attacks hurt real people",
];

const IMPLICIT: &[&str] = &[
    "you all know exactly what this is about",
    "think about who is really responsible",
    "people need to hear this today",
    "say it louder for the people in the back",
    "this is exactly what i have been saying",
    "some people just do not get it",
    "everyone should read this thread",
    "this needs to be said again",
];

const NEUTRAL: &[&str] = &[
    "new cases reported in the city today",
    "health officials update travel guidance",
    "the vaccine trial enters a new phase",
    "schools will reopen next month",
    "wash your hands and wear a mask",
    "hospitals expand testing capacity",
    "markets react to the latest outbreak report",
    "researchers publish a study on transmission",
    "the mayor holds a press briefing tonight",
    "flights resume between several cities",
    "the lockdown is extended for two weeks",
    "officials confirm the first local case",
];

const FILLERS: &[&str] = &[
    "coronavirus", "covid", "pandemic", "outbreak", "today", "news", "world", "people",
    "china", "wuhan", "virus", "again", "now", "here",
];

const MENTIONS: &[&str] = &["@newsdesk", "@jdoe42", "@cityhall", "@who"];
const URLS: &[&str] = &["https://t.co/a8Xk2", "http://example.com/story?id=7", "t.co/Zq91"];
const EMOJI: &[&str] = &["😷", "🙏", "😡", "❤️", "🇺🇸"];
const NUMBERS: &[&str] = &["2020", "24", "1,500", "3.5"];
const PUNCT: &[&str] = &["!!", ".", "?!", "...", ":"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub n_per_class: usize,
    pub hashtag_rate: f64,
    /// Fraction of hate/counter-hate posts written in the implicit register.
    /// Only posts that are untagged or carry a polarity-consistent hashtag
    /// use it.
    pub implicit_rate: f64,
}

impl SynthOptions {
    pub fn new(seed: u64, n_per_class: usize, hashtag_rate: f64) -> Self {
        Self {
            seed,
            n_per_class,
            hashtag_rate,
            implicit_rate: 0.35,
        }
    }
}

/// The bundled lexicon: 11 hateful and 5 counter-hate hashtags with curated
/// segmentations.
pub fn shipped_lexicon() -> Lexicon {
    let records = parse_records(SHIPPED_LEXICON.as_bytes(), std::path::Path::new("lexicon.tsv"))
        .expect("bundled lexicon parses");
    let entries = records
        .into_iter()
        .map(|r| HashtagEntry {
            segmented: r.segmentation.expect("bundled lexicon carries segmentations"),
            surface: r.surface,
            polarity: r.polarity,
        })
        .collect();
    Lexicon::new(entries).expect("bundled lexicon is valid")
}

/// Deterministic corpus with `n_per_class` posts per label, together with
/// the lexicon it was drawn from.
pub fn generate_synthetic_corpus(seed: u64, n_per_class: usize, hashtag_rate: f64) -> (Vec<Post>, Lexicon) {
    generate_with(&SynthOptions::new(seed, n_per_class, hashtag_rate))
}

#[derive(Clone, Copy)]
enum Tag {
    None,
    Consistent,
    Opposite,
}

pub fn generate_with(opts: &SynthOptions) -> (Vec<Post>, Lexicon) {
    assert!(opts.n_per_class >= 1, "n_per_class must be at least 1");
    assert!((0.0..=1.0).contains(&opts.hashtag_rate), "hashtag_rate must lie in [0, 1]");
    let lexicon = shipped_lexicon();
    let hate_tags: Vec<&HashtagEntry> =
        lexicon.entries().iter().filter(|e| e.polarity == Polarity::Hate).collect();
    let counter_tags: Vec<&HashtagEntry> =
        lexicon.entries().iter().filter(|e| e.polarity == Polarity::CounterHate).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut drafts: Vec<(String, SentimentLabel)> = Vec::new();

    for label in SentimentLabel::ALL {
        let n = opts.n_per_class;
        let tagged = (opts.hashtag_rate * n as f64).round() as usize;
        // Share of tagged posts whose hashtag polarity opposes the label
        // (for neutral posts: counter-hate hashtags).
        let opposite_share = match label {
            SentimentLabel::Hate => 0.25,
            SentimentLabel::CounterHate => 0.4,
            SentimentLabel::Neutral => 0.4,
        };
        let mut opposite = (opposite_share * tagged as f64).round() as usize;
        if tagged >= 2 {
            opposite = opposite.clamp(1, tagged - 1);
        }
        let mut plan: Vec<Tag> = Vec::with_capacity(n);
        plan.extend(std::iter::repeat_n(Tag::Opposite, opposite));
        plan.extend(std::iter::repeat_n(Tag::Consistent, tagged - opposite));
        plan.extend(std::iter::repeat_n(Tag::None, n - tagged));

        for tag in plan {
            let hashtag = match (label, tag) {
                (_, Tag::None) => None,
                (SentimentLabel::CounterHate, Tag::Consistent) => Some(*counter_tags.choose(&mut rng).unwrap()),
                (SentimentLabel::Hate, Tag::Opposite) => Some(*counter_tags.choose(&mut rng).unwrap()),
                (SentimentLabel::Neutral, Tag::Opposite) => Some(*counter_tags.choose(&mut rng).unwrap()),
                _ => Some(*hate_tags.choose(&mut rng).unwrap()),
            };
            let can_be_implicit = !matches!(tag, Tag::Opposite) && label != SentimentLabel::Neutral;
            let bank = if can_be_implicit && rng.gen_bool(opts.implicit_rate) {
                IMPLICIT
            } else {
                match label {
                    SentimentLabel::Hate => HATE_EXPLICIT,
                    SentimentLabel::CounterHate => COUNTER_EXPLICIT,
                    SentimentLabel::Neutral => NEUTRAL,
                }
            };
            drafts.push((compose(&mut rng, bank, hashtag), label));
        }
    }

    drafts.shuffle(&mut rng);
    let width = drafts.len().to_string().len().max(4);
    let posts = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (text, label))| Post::new(format!("syn-{:0width$}", i + 1), text, label))
        .collect();
    (posts, lexicon)
}

fn compose(rng: &mut ChaCha8Rng, bank: &[&str], hashtag: Option<&HashtagEntry>) -> String {
    let mut parts: Vec<String> = Vec::new();
    if rng.gen_bool(0.2) {
        parts.push(MENTIONS.choose(rng).unwrap().to_string());
    }
    let mut content = bank.choose(rng).unwrap().to_string();
    if rng.gen_bool(0.3) {
        // Capitalize the first letter as people do.
        let mut chars = content.chars();
        if let Some(first) = chars.next() {
            content = first.to_uppercase().chain(chars).collect();
        }
    }
    parts.push(content);
    for _ in 0..rng.gen_range(0..=2) {
        parts.push(FILLERS.choose(rng).unwrap().to_string());
    }
    if rng.gen_bool(0.15) {
        parts.push(NUMBERS.choose(rng).unwrap().to_string());
    }
    if let Some(tag) = hashtag {
        let surface = if rng.gen_bool(0.2) {
            tag.surface.to_uppercase()
        } else {
            tag.surface.clone()
        };
        if rng.gen_bool(0.4) {
            parts.insert(0, surface);
        } else {
            parts.push(surface);
        }
    }
    let mut text = parts.join(" ");
    if rng.gen_bool(0.4) {
        text.push_str(PUNCT.choose(rng).unwrap());
    }
    if rng.gen_bool(0.15) {
        text.push(' ');
        text.push_str(EMOJI.choose(rng).unwrap());
    }
    if rng.gen_bool(0.25) {
        text.push(' ');
        text.push_str(URLS.choose(rng).unwrap());
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{partition, split_post};
    use crate::relation::RelationLabel;
    use std::collections::HashMap;

    #[test]
    fn deterministic() {
        let a = generate_synthetic_corpus(7, 50, 0.5);
        let b = generate_synthetic_corpus(7, 50, 0.5);
        assert_eq!(a.0, b.0);
        assert_ne!(a.0, generate_synthetic_corpus(8, 50, 0.5).0);
    }

    #[test]
    fn zero_rate_has_no_hashtagged_posts() {
        let (posts, lexicon) = generate_synthetic_corpus(7, 50, 0.0);
        assert_eq!(posts.len(), 150);
        assert!(partition(&posts, &lexicon).with_hashtags.is_empty());
    }

    #[test]
    fn all_six_cells_occur() {
        let (posts, lexicon) = generate_synthetic_corpus(7, 50, 0.5);
        let mut cells: HashMap<(Polarity, SentimentLabel), usize> = HashMap::new();
        for p in &posts {
            if let Some(pair) = split_post(p, &lexicon) {
                *cells.entry((pair.hashtag_polarity, pair.post_label)).or_default() += 1;
            }
        }
        assert_eq!(cells.len(), 6, "{cells:?}");
        assert!(cells.values().all(|&c| c >= 1));
    }

    #[test]
    fn hashtag_rate_is_respected() {
        let (posts, lexicon) = generate_synthetic_corpus(3, 40, 0.5);
        assert_eq!(partition(&posts, &lexicon).with_hashtags.len(), 60);
    }

    #[test]
    fn shipped_lexicon_shape() {
        let lex = shipped_lexicon();
        assert_eq!(lex.len(), 16);
        assert_eq!(lex.filter_polarity(Polarity::Hate).len(), 11);
        assert_eq!(lex.get("#racismisavirus").unwrap().segmented, "racism is a virus");
    }

    #[test]
    fn raw_noise_is_cleaned_away() {
        let (posts, lexicon) = generate_synthetic_corpus(11, 30, 1.0);
        for p in &posts {
            assert!(!p.clean_text.contains("http"));
            assert!(!p.clean_text.contains('@'));
            let pair = split_post(p, &lexicon).expect("every post is tagged at rate 1");
            let expected = crate::relation::derive_relation(pair.hashtag_polarity, p.label);
            assert_eq!(pair.relation, expected);
            if p.label == SentimentLabel::Neutral {
                assert_eq!(pair.relation, RelationLabel::Neutral);
            }
        }
    }
}
