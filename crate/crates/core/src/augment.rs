//! Teacher/student augmentation: hashtag-free posts receive the lexicon
//! hashtag whose teacher embedding is most similar to their own, and the
//! relation implied by that hashtag's polarity and the post's label.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{render_text, HashtagEntry, HashtagMode, Lexicon, Post, SentimentLabel};
use crate::encoder::{BackendBuilder, EncoderBackend};
use crate::error::{Error, Result};
use crate::model::{
    cosine_similarity, fresh_state, train, ModelState, PairInput, TrainConfig, TrainExample,
    TrainHistory,
};
use crate::relation::{derive_relation, RelationLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSample {
    pub post_id: String,
    pub post_label: SentimentLabel,
    pub matched_hashtag: HashtagEntry,
    pub similarity: f64,
    pub pseudo_relation: RelationLabel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationSummary {
    pub total: usize,
    pub entailment: usize,
    pub contradiction: usize,
    pub neutral: usize,
}

impl AugmentationSummary {
    pub fn from_samples(samples: &[AugmentedSample]) -> Self {
        let mut s = Self {
            total: samples.len(),
            ..Self::default()
        };
        for a in samples {
            match a.pseudo_relation {
                RelationLabel::Entailment => s.entailment += 1,
                RelationLabel::Contradiction => s.contradiction += 1,
                RelationLabel::Neutral => s.neutral += 1,
            }
        }
        s
    }
}

/// One vector per lexicon entry, in lexicon order, from its segmented text.
pub fn embed_hashtags<B: EncoderBackend>(
    teacher: &ModelState<B>,
    lexicon: &Lexicon,
) -> Result<Vec<(HashtagEntry, Vec<f64>)>> {
    if lexicon.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    Ok(lexicon
        .entries()
        .par_iter()
        .map(|e| (e.clone(), teacher.encoder.encode(&e.segmented)))
        .collect())
}

pub fn embed_posts<B: EncoderBackend>(teacher: &ModelState<B>, posts: &[Post]) -> Vec<(String, Vec<f64>)> {
    posts
        .par_iter()
        .map(|p| (p.id.clone(), teacher.encoder.encode(&p.clean_text)))
        .collect()
}

/// Index of the most cosine-similar hashtag vector and its similarity.
/// Exact ties go to the lowest index.
pub fn match_pseudo_hashtag(z: &[f64], hashtag_vectors: &[&[f64]]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, psi) in hashtag_vectors.iter().enumerate() {
        let sim = cosine_similarity(z, psi)?;
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((k, sim));
        }
    }
    best.ok_or(Error::EmptyLexicon)
}

/// Cached teacher embeddings, keyed by the hash of the checkpoint that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherEmbeddings {
    pub checkpoint_hash: String,
    pub hashtags: Vec<(String, Vec<f64>)>,
    pub posts: Vec<(String, Vec<f64>)>,
}

impl TeacherEmbeddings {
    pub fn compute<B: EncoderBackend>(
        teacher: &ModelState<B>,
        lexicon: &Lexicon,
        posts: &[Post],
        checkpoint_hash: impl Into<String>,
    ) -> Result<Self> {
        Ok(Self {
            checkpoint_hash: checkpoint_hash.into(),
            hashtags: embed_hashtags(teacher, lexicon)?
                .into_iter()
                .map(|(e, v)| (e.surface, v))
                .collect(),
            posts: embed_posts(teacher, posts),
        })
    }

    /// Whether this cache covers exactly `lexicon` and `posts`.
    pub fn covers(&self, lexicon: &Lexicon, posts: &[Post]) -> bool {
        self.hashtags.len() == lexicon.len()
            && self
                .hashtags
                .iter()
                .zip(lexicon.entries())
                .all(|((s, _), e)| *s == e.surface)
            && self.posts.len() == posts.len()
            && self.posts.iter().zip(posts).all(|((id, _), p)| *id == p.id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Reuse `cache_dir/embeddings-<hash>.json` when it matches, otherwise
    /// encode and write it.
    pub fn load_or_compute<B: EncoderBackend>(
        teacher: &ModelState<B>,
        lexicon: &Lexicon,
        posts: &[Post],
        checkpoint_hash: &str,
        cache_dir: &Path,
    ) -> Result<Self> {
        let path = cache_dir.join(format!("embeddings-{checkpoint_hash}.json"));
        if path.exists() {
            match Self::load(&path) {
                Ok(c) if c.checkpoint_hash == checkpoint_hash && c.covers(lexicon, posts) => {
                    log::info!("using cached teacher embeddings {}", path.display());
                    return Ok(c);
                }
                Ok(_) => log::warn!("stale embedding cache {}, recomputing", path.display()),
                Err(e) => log::warn!("unreadable embedding cache {}: {e}", path.display()),
            }
        }
        let c = Self::compute(teacher, lexicon, posts, checkpoint_hash)?;
        fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
        c.save(&path)?;
        Ok(c)
    }
}

/// Match every post against the lexicon using precomputed embeddings.
/// Output is sorted by post id.
pub fn augment_from_embeddings(
    embeddings: &TeacherEmbeddings,
    posts: &[Post],
    lexicon: &Lexicon,
) -> Result<Vec<AugmentedSample>> {
    if lexicon.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    if !embeddings.covers(lexicon, posts) {
        return Err(Error::InvalidArgument(
            "embeddings do not match the lexicon and posts".into(),
        ));
    }
    let vectors: Vec<&[f64]> = embeddings.hashtags.iter().map(|(_, v)| v.as_slice()).collect();
    let mut out = posts
        .par_iter()
        .zip(embeddings.posts.par_iter())
        .map(|(post, (_, z))| {
            let (k, similarity) = match_pseudo_hashtag(z, &vectors)?;
            let entry = lexicon.entries()[k].clone();
            Ok(AugmentedSample {
                post_id: post.id.clone(),
                post_label: post.label,
                pseudo_relation: derive_relation(entry.polarity, post.label),
                matched_hashtag: entry,
                similarity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    Ok(out)
}

pub fn augment_dataset<B: EncoderBackend>(
    teacher: &ModelState<B>,
    posts: &[Post],
    lexicon: &Lexicon,
) -> Result<Vec<AugmentedSample>> {
    let embeddings = TeacherEmbeddings::compute(teacher, lexicon, posts, "")?;
    augment_from_embeddings(&embeddings, posts, lexicon)
}

/// Student training examples: the post text with its pseudo-hashtag pair.
pub fn augmented_examples(
    samples: &[AugmentedSample],
    posts: &[Post],
    lexicon: &Lexicon,
    mode: HashtagMode,
) -> Result<Vec<TrainExample>> {
    let by_id: BTreeMap<&str, &Post> = posts.iter().map(|p| (p.id.as_str(), p)).collect();
    samples
        .iter()
        .map(|a| {
            let post = by_id
                .get(a.post_id.as_str())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown post {}", a.post_id)))?;
            Ok(TrainExample {
                id: post.id.clone(),
                text: render_text(post, lexicon, mode),
                label: post.label,
                pair: Some(PairInput {
                    t_c: render_text(post, lexicon, HashtagMode::Strip),
                    t_h: a.matched_hashtag.segmented.clone(),
                    relation: a.pseudo_relation,
                }),
            })
        })
        .collect()
}

/// Train a fresh model on the teacher's data plus the augmented examples.
pub fn train_student<Bd: BackendBuilder>(
    builder: &Bd,
    teacher_data: &[TrainExample],
    augmented: &[TrainExample],
    val: &[TrainExample],
    config: &TrainConfig,
    dropout: f64,
    init_seed: u64,
) -> Result<(ModelState<Bd::Backend>, TrainHistory)> {
    let mut union = teacher_data.to_vec();
    union.extend_from_slice(augmented);
    let state = fresh_state(builder, &[&union, val], dropout, init_seed);
    train(state, &union, val, config)
}

/// JSON lines of `post_id`, `hashtag_surface`, `similarity` (6 decimals)
/// and `pseudo_relation`.
pub fn write_augmented_jsonl(samples: &[AugmentedSample], mut out: impl Write) -> std::io::Result<()> {
    for a in samples {
        writeln!(
            out,
            "{{\"post_id\":{},\"hashtag_surface\":{},\"similarity\":{:.6},\"pseudo_relation\":\"{}\"}}",
            serde_json::Value::from(a.post_id.as_str()),
            serde_json::Value::from(a.matched_hashtag.surface.as_str()),
            a.similarity,
            a.pseudo_relation
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_most_similar() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let (k, s) = match_pseudo_hashtag(&[0.9, 0.1], &[&a, &b]).unwrap();
        assert_eq!(k, 0);
        assert!(s > 0.9);
        let (k, s) = match_pseudo_hashtag(&b, &[&a, &b]).unwrap();
        assert_eq!((k, s), (1, 1.0));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let v = [1.0, 1.0];
        let (k, _) = match_pseudo_hashtag(&[1.0, 0.0], &[&[1.0, 0.0], &[2.0, 0.0], &v]).unwrap();
        assert_eq!(k, 0);
        let (k, _) = match_pseudo_hashtag(&[1.0, 1.0], &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(k, 0);
    }

    #[test]
    fn degenerate_and_empty_inputs_error() {
        assert!(matches!(
            match_pseudo_hashtag(&[0.0, 0.0], &[&[1.0, 0.0]]),
            Err(Error::DegenerateEmbedding)
        ));
        assert!(matches!(match_pseudo_hashtag(&[1.0], &[]), Err(Error::EmptyLexicon)));
    }

    #[test]
    fn summary_counts() {
        let entry = HashtagEntry {
            surface: "#stopthehate".into(),
            segmented: "stop the hate".into(),
            polarity: crate::corpus::Polarity::CounterHate,
        };
        let mk = |label| AugmentedSample {
            post_id: "x".into(),
            post_label: label,
            matched_hashtag: entry.clone(),
            similarity: 0.5,
            pseudo_relation: derive_relation(entry.polarity, label),
        };
        let s = AugmentationSummary::from_samples(&[
            mk(SentimentLabel::Hate),
            mk(SentimentLabel::CounterHate),
            mk(SentimentLabel::Neutral),
            mk(SentimentLabel::CounterHate),
        ]);
        assert_eq!((s.total, s.entailment, s.contradiction, s.neutral), (4, 2, 1, 1));
    }

    #[test]
    fn jsonl_uses_six_decimals() {
        let a = AugmentedSample {
            post_id: "p\"1".into(),
            post_label: SentimentLabel::Hate,
            matched_hashtag: HashtagEntry {
                surface: "#kungflu".into(),
                segmented: "kung flu".into(),
                polarity: crate::corpus::Polarity::Hate,
            },
            similarity: 0.123456789,
            pseudo_relation: RelationLabel::Entailment,
        };
        let mut buf = Vec::new();
        write_augmented_jsonl(&[a], &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(
            line,
            "{\"post_id\":\"p\\\"1\",\"hashtag_surface\":\"#kungflu\",\"similarity\":0.123457,\"pseudo_relation\":\"entailment\"}\n"
        );
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["post_id"], "p\"1");
    }
}
