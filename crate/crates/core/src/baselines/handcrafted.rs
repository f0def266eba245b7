//! Hand-crafted metadata, text and comment features.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::lexicon::LexiconSet;
use crate::data::NewsVideoSample;
use crate::error::{Error, Result};
use crate::text::{tokenize, words, StableHasher};

pub const NGRAM_BUCKETS: usize = 256;
pub const DEFAULT_MIN_DF: usize = 5;
pub const TOP_COMMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Metadata,
    Text,
    Comment,
}

/// Named feature values with a stable ordering.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HandcraftedFeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl HandcraftedFeatureVector {
    fn push(&mut self, name: impl Into<String>, value: f64) {
        self.names.push(name.into());
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Fitted tf-idf vocabulary: terms with document frequency `>= min_df`,
/// smooth idf, raw term counts, L2-normalized rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfVocab {
    pub terms: BTreeMap<String, usize>,
    pub doc_freq: Vec<usize>,
    pub n_docs: usize,
    pub min_df: usize,
}

impl TfIdfVocab {
    pub fn fit<'a, I>(docs: I, min_df: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            let uniq: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
        }
        let kept: Vec<(&str, usize)> = df
            .into_iter()
            .filter(|&(_, c)| c >= min_df.max(1))
            .collect();
        Self {
            terms: kept
                .iter()
                .enumerate()
                .map(|(i, (t, _))| (t.to_string(), i))
                .collect(),
            doc_freq: kept.iter().map(|&(_, c)| c).collect(),
            n_docs,
            min_df,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[index] as f64)).ln() + 1.0
    }

    pub fn transform(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for t in tokens {
            if let Some(&i) = self.terms.get(t) {
                v[i] += 1.0;
            }
        }
        for (i, x) in v.iter_mut().enumerate() {
            *x *= self.idf(i);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    /// Terms in index order.
    pub fn term_list(&self) -> Vec<&str> {
        let mut out = vec![""; self.len()];
        for (t, &i) in &self.terms {
            out[i] = t;
        }
        out
    }
}

fn text_doc(sample: &NewsVideoSample) -> Vec<String> {
    words(&format!("{} {}", sample.title, sample.transcript))
}

fn comment_doc(sample: &NewsVideoSample) -> Vec<String> {
    sample
        .comments
        .iter()
        .flat_map(|c| words(&c.text))
        .collect()
}

/// Which groups to emit and the vocabularies they need.
#[derive(Debug, Clone, PartialEq)]
pub struct HandcraftedExtractor {
    pub groups: BTreeSet<FeatureGroup>,
    pub use_tfidf: bool,
    pub lexicons: LexiconSet,
    pub text_vocab: Option<TfIdfVocab>,
    pub comment_vocab: Option<TfIdfVocab>,
}

impl HandcraftedExtractor {
    /// Extractor without fitted vocabularies.
    pub fn new(groups: &[FeatureGroup], use_tfidf: bool, lexicons: LexiconSet) -> Self {
        Self {
            groups: groups.iter().copied().collect(),
            use_tfidf,
            lexicons,
            text_vocab: None,
            comment_vocab: None,
        }
    }

    /// Fits the tf-idf vocabularies of the requested groups on `train`.
    pub fn fit(&mut self, train: &[&NewsVideoSample], min_df: usize) {
        if !self.use_tfidf {
            return;
        }
        if self.groups.contains(&FeatureGroup::Text) {
            let docs: Vec<Vec<String>> = train.iter().map(|s| text_doc(s)).collect();
            self.text_vocab = Some(TfIdfVocab::fit(docs.iter().map(Vec::as_slice), min_df));
        }
        if self.groups.contains(&FeatureGroup::Comment) {
            let docs: Vec<Vec<String>> = train.iter().map(|s| comment_doc(s)).collect();
            self.comment_vocab = Some(TfIdfVocab::fit(docs.iter().map(Vec::as_slice), min_df));
        }
    }

    /// `duration_secs` is the video duration, 0 when unknown.
    pub fn extract(
        &self,
        sample: &NewsVideoSample,
        duration_secs: f64,
    ) -> Result<HandcraftedFeatureVector> {
        let mut out = HandcraftedFeatureVector::default();
        for g in &self.groups {
            match g {
                FeatureGroup::Metadata => metadata_features(sample, duration_secs, &mut out),
                FeatureGroup::Text => {
                    let vocab = self.vocab(&self.text_vocab, "text")?;
                    text_features(sample, &self.lexicons, vocab, &mut out);
                }
                FeatureGroup::Comment => {
                    let vocab = self.vocab(&self.comment_vocab, "comment")?;
                    comment_features(sample, &self.lexicons, vocab, &mut out);
                }
            }
        }
        Ok(out)
    }

    fn vocab<'a>(&self, v: &'a Option<TfIdfVocab>, group: &str) -> Result<Option<&'a TfIdfVocab>> {
        match (self.use_tfidf, v) {
            (false, _) => Ok(None),
            (true, Some(v)) => Ok(Some(v)),
            (true, None) => Err(Error::InvalidArgument(format!(
                "tf-idf requested for the {group} group but no vocabulary was fitted"
            ))),
        }
    }
}

fn metadata_features(s: &NewsVideoSample, duration_secs: f64, out: &mut HandcraftedFeatureVector) {
    let p = &s.publisher;
    out.push("meta.comment_count", s.comment_count.max(0) as f64);
    out.push("meta.like_count", s.like_count.max(0) as f64);
    out.push("meta.duration_secs", duration_secs.max(0.0));
    out.push("meta.video_count", p.video_count.max(0) as f64);
    out.push(
        "meta.fan_follow_ratio",
        (p.fan_count.max(0) as f64 + 1.0) / (p.follow_count.max(0) as f64 + 1.0),
    );
}

fn count_chars(text: &str, set: &[char]) -> usize {
    text.chars().filter(|c| set.contains(c)).count()
}

fn bool_f(b: bool) -> f64 {
    f64::from(u8::from(b))
}

/// `(pos − neg) / (pos + neg + 1)`.
pub fn polarity(lex: &LexiconSet, tokens: &[String]) -> f64 {
    let pos = lex.positive.count(tokens) as f64;
    let neg = lex.negative.count(tokens) as f64;
    (pos - neg) / (pos + neg + 1.0)
}

fn text_features(
    s: &NewsVideoSample,
    lex: &LexiconSet,
    vocab: Option<&TfIdfVocab>,
    out: &mut HandcraftedFeatureVector,
) {
    let text = format!("{} {}", s.title, s.transcript);
    let text = text.trim();
    let tokens = tokenize(text);
    let word_count = tokens
        .iter()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .count();
    let q = count_chars(text, &['?', '？']);
    let e = count_chars(text, &['!', '！']);
    let first = lex.first_person.count(&tokens);
    let third = lex.third_person.count(&tokens);

    out.push("text.length", text.chars().count() as f64);
    out.push("text.word_count", word_count as f64);
    out.push("text.has_question", bool_f(q > 0));
    out.push("text.question_count", q as f64);
    out.push("text.has_exclamation", bool_f(e > 0));
    out.push("text.exclamation_count", e as f64);
    out.push("text.has_first_person", bool_f(first > 0));
    out.push("text.has_third_person", bool_f(third > 0));
    out.push("text.positive_count", lex.positive.count(&tokens) as f64);
    out.push("text.negative_count", lex.negative.count(&tokens) as f64);
    out.push(
        "text.has_colon",
        bool_f(count_chars(text, &[':', '：']) > 0),
    );
    out.push("text.clickbait", bool_f(lex.clickbait.matches(&tokens)));
    out.push("text.polarity", polarity(lex, &tokens));
    out.push(
        "text.modal_count",
        lex.modal_particles.count(&tokens) as f64,
    );
    out.push(
        "text.pronoun_count",
        lex.personal_pronoun_count(&tokens) as f64,
    );

    if let Some(v) = vocab {
        let doc = words(text);
        for (term, x) in v.term_list().into_iter().zip(v.transform(&doc)) {
            out.push(format!("text.tfidf.{term}"), x);
        }
    }
    for (i, x) in char_ngrams(text).into_iter().enumerate() {
        out.push(format!("text.ngram.{i}"), x);
    }
    for (cat, l) in &lex.psycholinguistic.categories {
        out.push(format!("text.psy.{cat}"), l.count(&tokens) as f64);
    }
}

/// Character bigram and trigram counts hashed into [`NGRAM_BUCKETS`].
pub fn char_ngrams(text: &str) -> Vec<f64> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut out = vec![0.0; NGRAM_BUCKETS];
    for n in [2, 3] {
        for w in chars.windows(n) {
            let s: String = w.iter().collect();
            let h = StableHasher::default().str(&s).finish();
            out[(h % NGRAM_BUCKETS as u64) as usize] += 1.0;
        }
    }
    out
}

fn comment_features(
    s: &NewsVideoSample,
    lex: &LexiconSet,
    vocab: Option<&TfIdfVocab>,
    out: &mut HandcraftedFeatureVector,
) {
    let n = s.comments.len();
    let tokens: Vec<Vec<String>> = s.comments.iter().map(|c| tokenize(&c.text)).collect();
    let ratio = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };

    out.push("comment.absent", bool_f(n == 0));
    out.push(
        "comment.fakeness_ratio",
        ratio(tokens.iter().filter(|t| lex.doubt.matches(t)).count()),
    );
    out.push(
        "comment.inappropriate_ratio",
        ratio(tokens.iter().filter(|t| lex.swear.matches(t)).count()),
    );
    out.push(
        "comment.conversation_ratio",
        ratio(
            s.comments
                .iter()
                .filter(|c| c.reply_count.unwrap_or(0) >= 1)
                .count(),
        ),
    );

    if let Some(v) = vocab {
        for (term, x) in v.term_list().into_iter().zip(v.transform(&comment_doc(s))) {
            out.push(format!("comment.tfidf.{term}"), x);
        }
    }

    // Most-liked first; ties keep crawl order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.comments[b].like_count.cmp(&s.comments[a].like_count));
    for k in 0..TOP_COMMENTS {
        let (pol, modal, pron, len) = match order.get(k) {
            Some(&i) => {
                let t = &tokens[i];
                (
                    polarity(lex, t),
                    lex.modal_particles.count(t) as f64,
                    lex.personal_pronoun_count(t) as f64,
                    s.comments[i].text.chars().count() as f64,
                )
            }
            None => (0.0, 0.0, 0.0, 0.0),
        };
        out.push(format!("comment.top{k}.polarity"), pol);
        out.push(format!("comment.top{k}.modal_count"), modal);
        out.push(format!("comment.top{k}.pronoun_count"), pron);
        out.push(format!("comment.top{k}.length"), len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::lexicon::Lexicon;
    use crate::synthetic::generate_synthetic_dataset;

    fn sample() -> NewsVideoSample {
        let mut s = generate_synthetic_dataset(2, 1, 0, 1.0)
            .unwrap()
            .dataset
            .samples()[0]
            .clone();
        s.title = "Really?!".into();
        s.transcript.clear();
        s.comments.clear();
        s.comment_count = 0;
        s
    }

    #[test]
    fn zero_comments_gives_zero_count_and_absence() {
        let ex = HandcraftedExtractor::new(
            &[FeatureGroup::Metadata, FeatureGroup::Comment],
            false,
            LexiconSet::default(),
        );
        let v = ex.extract(&sample(), 0.0).unwrap();
        assert_eq!(v.get("meta.comment_count"), Some(0.0));
        assert_eq!(v.get("comment.absent"), Some(1.0));
        assert_eq!(v.get("comment.fakeness_ratio"), Some(0.0));
    }

    #[test]
    fn punctuation_counts() {
        let ex = HandcraftedExtractor::new(&[FeatureGroup::Text], false, LexiconSet::default());
        let v = ex.extract(&sample(), 0.0).unwrap();
        assert_eq!(v.get("text.has_question"), Some(1.0));
        assert_eq!(v.get("text.question_count"), Some(1.0));
        assert_eq!(v.get("text.has_exclamation"), Some(1.0));
        assert_eq!(v.get("text.exclamation_count"), Some(1.0));
    }

    #[test]
    fn unfitted_vocab_is_an_error() {
        let ex = HandcraftedExtractor::new(&[FeatureGroup::Text], true, LexiconSet::default());
        assert!(ex.extract(&sample(), 0.0).is_err());
    }

    #[test]
    fn fakeness_ratio_counts_matching_comments() {
        let lex = LexiconSet {
            doubt: Lexicon::from_words(&["fake"]),
            ..LexiconSet::default()
        };
        let mut s = sample();
        for t in ["fake!", "nice"] {
            s.comments.push(crate::data::Comment {
                text: t.into(),
                like_count: 0,
                reviewed_time: None,
                reply_count: None,
            });
        }
        let ex = HandcraftedExtractor::new(&[FeatureGroup::Comment], false, lex);
        assert_eq!(
            ex.extract(&s, 0.0).unwrap().get("comment.fakeness_ratio"),
            Some(0.5)
        );
    }

    #[test]
    fn tfidf_respects_min_df_and_normalizes() {
        let docs: Vec<Vec<String>> = vec![words("a b"), words("a c"), words("a b")];
        let v = TfIdfVocab::fit(docs.iter().map(Vec::as_slice), 2);
        assert_eq!(v.term_list(), vec!["a", "b"]);
        let x = v.transform(&words("a b b"));
        assert!((x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v.transform(&words("zzz")).iter().all(|&x| x == 0.0));
    }
}
