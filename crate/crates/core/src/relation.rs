//! Rule-derived semantic relation between a post and one of its sentiment
//! hashtags.
//!
//! | hashtag \ post | hate          | counter-hate  | neutral |
//! |----------------|---------------|---------------|---------|
//! | hate           | entailment    | contradiction | neutral |
//! | counter-hate   | contradiction | entailment    | neutral |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Polarity, SentimentLabel};

/// Number of relation classes.
pub const NUM_RELATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; NUM_RELATIONS] = [
        RelationLabel::Entailment,
        RelationLabel::Contradiction,
        RelationLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        match self {
            RelationLabel::Entailment => 0,
            RelationLabel::Contradiction => 1,
            RelationLabel::Neutral => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Entailment => "entailment",
            RelationLabel::Contradiction => "contradiction",
            RelationLabel::Neutral => "neutral",
        }
    }

    /// Signed weight of this relation in the distance loss.
    pub fn indicator(self) -> i8 {
        relation_indicator(self)
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entailment" => Ok(RelationLabel::Entailment),
            "contradiction" => Ok(RelationLabel::Contradiction),
            "neutral" => Ok(RelationLabel::Neutral),
            other => Err(format!("unknown relation {other:?}")),
        }
    }
}

/// Relation implied by a hashtag's polarity and the post's gold label.
pub fn derive_relation(hashtag_polarity: Polarity, post_label: SentimentLabel) -> RelationLabel {
    match (hashtag_polarity, post_label) {
        (_, SentimentLabel::Neutral) => RelationLabel::Neutral,
        (Polarity::Hate, SentimentLabel::Hate) => RelationLabel::Entailment,
        (Polarity::Hate, SentimentLabel::CounterHate) => RelationLabel::Contradiction,
        (Polarity::CounterHate, SentimentLabel::Hate) => RelationLabel::Contradiction,
        (Polarity::CounterHate, SentimentLabel::CounterHate) => RelationLabel::Entailment,
    }
}

/// Contradiction → -1, entailment → +1, neutral → 0.
pub fn relation_indicator(relation: RelationLabel) -> i8 {
    match relation {
        RelationLabel::Contradiction => -1,
        RelationLabel::Entailment => 1,
        RelationLabel::Neutral => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_cells() {
        use Polarity as P;
        use RelationLabel as R;
        use SentimentLabel as S;
        let expected = [
            (P::Hate, S::Hate, R::Entailment),
            (P::Hate, S::CounterHate, R::Contradiction),
            (P::Hate, S::Neutral, R::Neutral),
            (P::CounterHate, S::Hate, R::Contradiction),
            (P::CounterHate, S::CounterHate, R::Entailment),
            (P::CounterHate, S::Neutral, R::Neutral),
        ];
        for (polarity, label, relation) in expected {
            assert_eq!(derive_relation(polarity, label), relation, "{polarity:?}/{label:?}");
        }
    }

    #[test]
    fn indicator_values() {
        assert_eq!(relation_indicator(RelationLabel::Entailment), 1);
        assert_eq!(relation_indicator(RelationLabel::Contradiction), -1);
        assert_eq!(relation_indicator(RelationLabel::Neutral), 0);
    }

    #[test]
    fn polarity_flip_swaps_entailment_and_contradiction() {
        for label in SentimentLabel::ALL {
            let a = derive_relation(Polarity::Hate, label);
            let b = derive_relation(Polarity::CounterHate, label);
            match a {
                RelationLabel::Entailment => assert_eq!(b, RelationLabel::Contradiction),
                RelationLabel::Contradiction => assert_eq!(b, RelationLabel::Entailment),
                RelationLabel::Neutral => assert_eq!(b, RelationLabel::Neutral),
            }
        }
    }

    #[test]
    fn string_round_trip() {
        for r in RelationLabel::ALL {
            assert_eq!(r.as_str().parse::<RelationLabel>().unwrap(), r);
            assert_eq!(RelationLabel::from_index(r.index()), Some(r));
        }
    }
}
