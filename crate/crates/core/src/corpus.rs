//! Corpora of (code snippet, explanation) pairs.
//!
//! A corpus is read from a line-delimited JSON file, one sample per line:
//!
//! ```text
//! {"id": "c-1", "code": "os.mkdir(path)", "explanation": "create a directory", "language": "python", "split": "train"}
//! ```
//!
//! `intent` is optional, but a corpus is either fully intent-labelled or not
//! labelled at all. Once built, a [`Corpus`] is immutable.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("mixed languages: line {line} is {found}, corpus is {expected}")]
    MixedLanguage {
        line: usize,
        expected: Language,
        found: Language,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus is not intent-labelled")]
    NotIntentLabelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Java,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Java => "java",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "python" | "py" => Ok(Language::Python),
            "java" => Ok(Language::Java),
            other => Err(format!("unsupported language `{other}`")),
        }
    }
}

/// Code intent labels of function-level corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Intent {
    HowToUse,
    Property,
    Why,
    HowItIsDone,
    What,
}

impl Intent {
    pub const ALL: [Intent; 5] = [
        Intent::HowToUse,
        Intent::Property,
        Intent::Why,
        Intent::HowItIsDone,
        Intent::What,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::HowToUse => "how-to-use",
            Intent::Property => "property",
            Intent::Why => "why",
            Intent::HowItIsDone => "how-it-is-done",
            Intent::What => "what",
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Intent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '_' { '-' } else { c })
            .collect();
        Intent::ALL
            .into_iter()
            .find(|i| i.as_str() == norm)
            .ok_or_else(|| format!("unknown intent `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Inline,
    Function,
}

/// One (code, explanation) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSample {
    pub id: String,
    pub code: String,
    pub explanation: String,
    pub language: Language,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
    pub split: Split,
    /// Position in the originating file; fixed at ingestion and used as the
    /// ranking tie-break, so reordering samples afterwards never changes a
    /// ranking.
    #[serde(skip)]
    pub ordinal: usize,
}

impl CodeSample {
    pub fn new(
        id: impl Into<String>,
        code: impl Into<String>,
        explanation: impl Into<String>,
        language: Language,
        split: Split,
    ) -> Self {
        CodeSample {
            id: id.into(),
            code: code.into(),
            explanation: explanation.into(),
            language,
            intent: None,
            split,
            ordinal: 0,
        }
    }

    pub fn with_intent(mut self, intent: Intent) -> Self {
        self.intent = Some(intent);
        self
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    code: Option<String>,
    explanation: Option<String>,
    language: Option<String>,
    intent: Option<String>,
    split: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    samples: Vec<CodeSample>,
    language: Language,
    level: Level,
    intent_labelled: bool,
}

impl Corpus {
    /// Builds a corpus from in-memory samples. Ordinals are assigned from the
    /// slice order.
    pub fn from_samples(samples: Vec<CodeSample>) -> Result<Self, CorpusError> {
        let mut samples = samples;
        for (i, s) in samples.iter_mut().enumerate() {
            s.ordinal = i;
        }
        Self::validated(samples)
    }

    fn validated(samples: Vec<CodeSample>) -> Result<Self, CorpusError> {
        let first = samples.first().ok_or(CorpusError::EmptyCorpus)?;
        let language = first.language;
        let intent_labelled = first.intent.is_some();
        let mut seen = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            let line = i + 1;
            validate_sample(s, line)?;
            if s.language != language {
                return Err(CorpusError::MixedLanguage {
                    line,
                    expected: language,
                    found: s.language,
                });
            }
            if s.intent.is_some() != intent_labelled {
                return Err(CorpusError::MalformedRecord {
                    line,
                    reason: "intent must be present on every record or on none".into(),
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        let level = match language {
            Language::Python => Level::Inline,
            Language::Java => Level::Function,
        };
        Ok(Corpus {
            samples,
            language,
            level,
            intent_labelled,
        })
    }

    /// Reads a line-delimited JSON corpus. Blank lines are skipped; line
    /// numbers in errors are 1-based physical lines.
    pub fn ingest(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let io_err = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(io_err)?;
        Self::from_reader(BufReader::new(file)).map_err(|e| match e {
            CorpusError::Io { source, .. } => io_err(source),
            other => other,
        })
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut samples = Vec::new();
        let mut language: Option<Language> = None;
        let mut labelled: Option<bool> = None;
        let mut seen = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| CorpusError::Io {
                path: PathBuf::new(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut sample = parse_record(&line, line_no)?;
            sample.ordinal = samples.len();
            let lang = *language.get_or_insert(sample.language);
            if sample.language != lang {
                return Err(CorpusError::MixedLanguage {
                    line: line_no,
                    expected: lang,
                    found: sample.language,
                });
            }
            if *labelled.get_or_insert(sample.intent.is_some()) != sample.intent.is_some() {
                return Err(CorpusError::MalformedRecord {
                    line: line_no,
                    reason: "intent must be present on every record or on none".into(),
                });
            }
            if !seen.insert(sample.id.clone()) {
                return Err(CorpusError::DuplicateId(sample.id));
            }
            samples.push(sample);
        }
        Self::validated(samples)
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        crate::cache::write_atomic(path.as_ref(), &buf)
    }

    pub fn samples(&self) -> &[CodeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn with_level(mut self, level: Level) -> Self {
        self.level = level;
        self
    }

    pub fn is_intent_labelled(&self) -> bool {
        self.intent_labelled
    }

    pub fn get(&self, id: &str) -> Option<&CodeSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &CodeSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Samples carrying `intent`, in corpus order. The result may be empty,
    /// so it is returned as a plain list rather than a validated corpus.
    pub fn filter_by_intent(&self, intent: Intent) -> Result<Subset, CorpusError> {
        if !self.intent_labelled {
            return Err(CorpusError::NotIntentLabelled);
        }
        Ok(Subset {
            samples: self
                .samples
                .iter()
                .filter(|s| s.intent == Some(intent))
                .cloned()
                .collect(),
            language: self.language,
            level: self.level,
        })
    }

    /// Same samples in a different order; ordinals are kept.
    pub fn reordered(&self, order: &[usize]) -> Corpus {
        assert_eq!(order.len(), self.samples.len(), "order must be a permutation");
        Corpus {
            samples: order.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn stats(&self, tokenizer: LengthTokenizer) -> Result<CorpusStats, CorpusError> {
        stats_of(&self.samples, tokenizer)
    }
}

/// Result of [`Corpus::filter_by_intent`]: possibly empty, but otherwise a
/// corpus in every respect.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    samples: Vec<CodeSample>,
    language: Language,
    level: Level,
}

impl Subset {
    pub fn samples(&self) -> &[CodeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Converts back to a corpus. Ordinals from the parent corpus are kept.
    pub fn into_corpus(self) -> Result<Corpus, CorpusError> {
        let level = self.level;
        Corpus::validated(self.samples).map(|c| c.with_level(level))
    }

    pub fn filter_by_intent(&self, intent: Intent) -> Subset {
        Subset {
            samples: self
                .samples
                .iter()
                .filter(|s| s.intent == Some(intent))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    pub fn language(&self) -> Language {
        self.language
    }
}

fn validate_sample(s: &CodeSample, line: usize) -> Result<(), CorpusError> {
    let bad = |reason: &str| {
        Err(CorpusError::MalformedRecord {
            line,
            reason: reason.to_string(),
        })
    };
    if s.id.is_empty() {
        return bad("id is empty");
    }
    if s.code.trim().is_empty() {
        return bad("code is empty");
    }
    if s.split == Split::Train && s.explanation.trim().is_empty() {
        return bad("explanation is empty for a train sample");
    }
    Ok(())
}

fn parse_record(line: &str, line_no: usize) -> Result<CodeSample, CorpusError> {
    let malformed = |reason: String| CorpusError::MalformedRecord {
        line: line_no,
        reason,
    };
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
    let id = match raw.id {
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err(malformed("`id` must be a string".into())),
        None => return Err(malformed("missing field `id`".into())),
    };
    let code = raw.code.ok_or_else(|| malformed("missing field `code`".into()))?;
    let explanation = raw
        .explanation
        .ok_or_else(|| malformed("missing field `explanation`".into()))?;
    let language = raw
        .language
        .ok_or_else(|| malformed("missing field `language`".into()))?
        .parse::<Language>()
        .map_err(malformed)?;
    let split = match raw
        .split
        .ok_or_else(|| malformed("missing field `split`".into()))?
        .as_str()
    {
        "train" => Split::Train,
        "test" => Split::Test,
        other => return Err(malformed(format!("unknown split `{other}`"))),
    };
    let intent = raw
        .intent
        .map(|i| i.parse::<Intent>())
        .transpose()
        .map_err(malformed)?;
    let sample = CodeSample {
        id,
        code,
        explanation,
        language,
        intent,
        split,
        ordinal: 0,
    };
    validate_sample(&sample, line_no)?;
    Ok(sample)
}

/// Tokenizer used for the length columns of [`CorpusStats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthTokenizer {
    /// Identifiers, literals and punctuation each count as one token.
    Lexical,
    /// Keyword-stripped identifier tokens, as used for token-based selection.
    Code,
    /// Lowercased alphanumeric words, as used by the metrics.
    Words,
    /// Whitespace-separated chunks.
    Whitespace,
}

impl FromStr for LengthTokenizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(LengthTokenizer::Lexical),
            "code" => Ok(LengthTokenizer::Code),
            "words" => Ok(LengthTokenizer::Words),
            "whitespace" => Ok(LengthTokenizer::Whitespace),
            other => Err(format!("unknown length tokenizer `{other}`")),
        }
    }
}

impl LengthTokenizer {
    pub fn count(self, text: &str, language: Language) -> usize {
        match self {
            LengthTokenizer::Lexical => crate::lexer::lex(text, language).len(),
            LengthTokenizer::Code => crate::tokenize::Tokenizer::for_language(language)
                .tokens(text)
                .len(),
            LengthTokenizer::Words => crate::metrics::plain_tokens(text).len(),
            LengthTokenizer::Whitespace => text.split_whitespace().count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SplitStats {
    pub count: usize,
    pub mean_code_len: f64,
    pub mean_explanation_len: f64,
}

/// Counts and mean token lengths per split, overall and per intent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub train: SplitStats,
    pub test: SplitStats,
    pub by_intent: BTreeMap<Intent, (SplitStats, SplitStats)>,
}

fn stats_of(samples: &[CodeSample], tokenizer: LengthTokenizer) -> Result<CorpusStats, CorpusError> {
    if samples.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    #[derive(Default)]
    struct Acc {
        n: usize,
        code: usize,
        expl: usize,
    }
    impl Acc {
        fn finish(&self) -> SplitStats {
            if self.n == 0 {
                return SplitStats::default();
            }
            SplitStats {
                count: self.n,
                mean_code_len: self.code as f64 / self.n as f64,
                mean_explanation_len: self.expl as f64 / self.n as f64,
            }
        }
    }
    let mut overall: [Acc; 2] = Default::default();
    let mut intents: BTreeMap<Intent, [Acc; 2]> = BTreeMap::new();
    for s in samples {
        let code = tokenizer.count(&s.code, s.language);
        let expl = tokenizer.count(&s.explanation, s.language);
        let slot = match s.split {
            Split::Train => 0,
            Split::Test => 1,
        };
        let add = |acc: &mut Acc| {
            acc.n += 1;
            acc.code += code;
            acc.expl += expl;
        };
        add(&mut overall[slot]);
        if let Some(intent) = s.intent {
            add(&mut intents.entry(intent).or_default()[slot]);
        }
    }
    Ok(CorpusStats {
        train: overall[0].finish(),
        test: overall[1].finish(),
        by_intent: intents
            .into_iter()
            .map(|(k, v)| (k, (v[0].finish(), v[1].finish())))
            .collect(),
    })
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10}",
            "sub-domain", "train", "test", "train code", "train expl", "test code", "test expl"
        )?;
        let mut row = |name: &str, tr: &SplitStats, te: &SplitStats| {
            writeln!(
                f,
                "{:<16} {:>8} {:>8} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
                name,
                tr.count,
                te.count,
                tr.mean_code_len,
                tr.mean_explanation_len,
                te.mean_code_len,
                te.mean_explanation_len
            )
        };
        row("all", &self.train, &self.test)?;
        for (intent, (tr, te)) in &self.by_intent {
            row(intent.as_str(), tr, te)?;
        }
        Ok(())
    }
}
