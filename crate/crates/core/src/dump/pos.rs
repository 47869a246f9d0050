use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Universal part-of-speech tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum UPos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl UPos {
    pub const ALL: [UPos; 17] = [
        Self::Adj,
        Self::Adp,
        Self::Adv,
        Self::Aux,
        Self::Cconj,
        Self::Det,
        Self::Intj,
        Self::Noun,
        Self::Num,
        Self::Part,
        Self::Pron,
        Self::Propn,
        Self::Punct,
        Self::Sconj,
        Self::Sym,
        Self::Verb,
        Self::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Adj => "ADJ",
            Self::Adp => "ADP",
            Self::Adv => "ADV",
            Self::Aux => "AUX",
            Self::Cconj => "CCONJ",
            Self::Det => "DET",
            Self::Intj => "INTJ",
            Self::Noun => "NOUN",
            Self::Num => "NUM",
            Self::Part => "PART",
            Self::Pron => "PRON",
            Self::Propn => "PROPN",
            Self::Punct => "PUNCT",
            Self::Sconj => "SCONJ",
            Self::Sym => "SYM",
            Self::Verb => "VERB",
            Self::X => "X",
        }
    }
}

impl fmt::Display for UPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UPos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UPos::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Input(format!("`{s}` is not a universal POS tag")))
    }
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "every", "each", "some", "any", "no", "le",
    "la", "les", "l'", "un", "une", "des", "du", "ce", "cette", "ces",
];
const ADPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "to", "for", "with", "from", "by", "about", "into", "over", "under",
    "between", "through", "after", "before", "during", "without", "de", "à", "en", "dans", "sur",
    "pour", "avec", "par", "sans",
];
const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my", "your",
    "his", "its", "our", "their", "who", "what", "which", "je", "tu", "il", "elle", "nous", "vous",
    "ils", "elles", "on",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
    "did", "will", "would", "can", "could", "shall", "should", "may", "might", "must", "est",
    "sont", "suis", "es", "sommes", "êtes", "ai", "as", "a", "avons", "avez", "ont",
];
const CONJUNCTIONS: &[&str] = &["and", "or", "but", "nor", "yet", "et", "ou", "mais"];
const SPECIAL: &[&str] = &[
    "<s>", "</s>", "<pad>", "<unk>", "<eos>", "<bos>", "[cls]", "[sep]", "[pad]", "[mask]", "[unk]",
];

/// Approximate universal POS tagging by closed-class lookup.
///
/// Determiners, adpositions, pronouns, auxiliaries, coordinating conjunctions,
/// punctuation and numerals are recognized; special delimiter tokens get `X`;
/// everything else is tagged `NOUN`. Earlier classes win when a word belongs
/// to several lists.
pub fn fallback_pos_tag<S: AsRef<str>>(tokens: &[S]) -> Vec<UPos> {
    tokens.iter().map(|t| tag_token(t.as_ref())).collect()
}

fn tag_token(token: &str) -> UPos {
    let lower = token.to_lowercase();
    let w = lower.as_str();
    if SPECIAL.contains(&w) {
        UPos::X
    } else if !w.is_empty()
        && w.chars()
            .all(|c| c.is_ascii_punctuation() || is_extra_punct(c))
    {
        UPos::Punct
    } else if w.chars().any(|c| c.is_ascii_digit())
        && w.chars().all(|c| c.is_ascii_digit() || ",._".contains(c))
    {
        UPos::Num
    } else if DETERMINERS.contains(&w) {
        UPos::Det
    } else if ADPOSITIONS.contains(&w) {
        UPos::Adp
    } else if PRONOUNS.contains(&w) {
        UPos::Pron
    } else if AUXILIARIES.contains(&w) {
        UPos::Aux
    } else if CONJUNCTIONS.contains(&w) {
        UPos::Cconj
    } else {
        UPos::Noun
    }
}

fn is_extra_punct(c: char) -> bool {
    matches!(c, '«' | '»' | '“' | '”' | '‘' | '’' | '…' | '–' | '—')
}
