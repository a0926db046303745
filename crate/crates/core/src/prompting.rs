//! Prompt rendering and post-processing of generations.
//!
//! A template is plain text with two placeholders: `{examples}` receives the
//! demonstration block and `{code}` the query. With no demonstrations the
//! query is substituted verbatim; with demonstrations the layout is
//!
//! ```text
//! {examples} = "\n" + ("Code: <code>\nSummary: <explanation>\n\n")* + "Code: "
//! {code}     = "<query>\nSummary:"
//! ```
//!
//! Demonstrations appear in ascending similarity, so the most similar one
//! sits right before the query.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CodeSample, Intent};
use crate::similarity::RankedExample;

const INST_WRAPPED: &str = include_str!("../data/templates/inst-wrapped.txt");
const HUMAN_ASSISTANT: &str = include_str!("../data/templates/human-assistant.txt");

/// Substrings that would let input text impersonate a turn boundary.
pub const DELIMITERS: [&str; 4] = ["[/INST]", "[INST]", "#Assistant:", "#Human:"];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("input contains the template delimiter `{delimiter}`")]
    TemplateQueryCollision { delimiter: String },
    #[error("generation is empty after post-processing")]
    EmptyGeneration,
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateFamily {
    /// `[INST] ... [/INST]` wrapping.
    InstWrapped,
    /// `#Human: ... #Assistant:` turns.
    HumanAssistant,
}

impl TemplateFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateFamily::InstWrapped => "inst-wrapped",
            TemplateFamily::HumanAssistant => "human-assistant",
        }
    }

    /// Family of a known model name, matched on lowercase substrings.
    pub fn for_model(name: &str) -> Option<TemplateFamily> {
        let n = name.to_ascii_lowercase();
        if n.contains("codellama") || n.contains("code-llama") {
            Some(TemplateFamily::InstWrapped)
        } else if ["starcoder", "codeup", "llama-2-coder", "llama2-coder"]
            .iter()
            .any(|m| n.contains(m))
        {
            Some(TemplateFamily::HumanAssistant)
        } else {
            None
        }
    }
}

impl fmt::Display for TemplateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inst-wrapped" => Ok(TemplateFamily::InstWrapped),
            "human-assistant" => Ok(TemplateFamily::HumanAssistant),
            other => Err(format!("unknown template family `{other}`")),
        }
    }
}

/// Short description of each intent, used when intent hints are enabled.
pub fn intent_description(intent: Intent) -> &'static str {
    match intent {
        Intent::What => "Describe the functionality of the method",
        Intent::Why => "Explain the reason why the method is provided or the design rationale of the method",
        Intent::HowToUse => "Describe the usage or the expected set-up of using the method",
        Intent::HowItIsDone => "Describe the implementation details of the method",
        Intent::Property => "Assert properties of the method including pre-conditions or post-conditions",
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    family: TemplateFamily,
    text: String,
    intent_hints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptBundle {
    pub text: String,
    pub family: TemplateFamily,
    /// Demonstrations in rendered order (least similar first).
    pub examples: Vec<RankedExample>,
    pub k_effective: usize,
    pub warnings: Vec<String>,
}

impl PromptTemplate {
    pub fn builtin(family: TemplateFamily) -> Self {
        let text = match family {
            TemplateFamily::InstWrapped => INST_WRAPPED,
            TemplateFamily::HumanAssistant => HUMAN_ASSISTANT,
        };
        PromptTemplate {
            family,
            text: text.to_string(),
            intent_hints: false,
        }
    }

    pub fn custom(family: TemplateFamily, text: impl Into<String>) -> Result<Self, PromptError> {
        let text = text.into();
        match (text.matches("{code}").count(), text.matches("{examples}").count()) {
            (1, 0 | 1) => Ok(PromptTemplate {
                family,
                text,
                intent_hints: false,
            }),
            (c, e) => Err(PromptError::InvalidTemplate(format!(
                "expected one {{code}} and at most one {{examples}}, found {c} and {e}"
            ))),
        }
    }

    pub fn from_file(family: TemplateFamily, path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::custom(family, text)
    }

    /// Prefixes the query with a description of its intent, if it has one.
    pub fn with_intent_hints(mut self, on: bool) -> Self {
        self.intent_hints = on;
        self
    }

    pub fn family(&self) -> TemplateFamily {
        self.family
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Renders `query` with `examples` (in rank order, any length). Delimiters
    /// found in the inputs are defused with a warning, or rejected when
    /// `strict` is set.
    pub fn render(&self, query: &CodeSample, examples: &[RankedExample], strict: bool) -> Result<PromptBundle, PromptError> {
        let mut warnings = Vec::new();
        let mut clean = |text: &str, what: &str| -> Result<String, PromptError> {
            let (escaped, hit) = escape_delimiters(text);
            if let Some(d) = hit {
                if strict {
                    return Err(PromptError::TemplateQueryCollision { delimiter: d.to_string() });
                }
                warnings.push(format!("{what} contains `{d}`; escaped"));
            }
            Ok(escaped)
        };

        let mut ordered: Vec<RankedExample> = examples.to_vec();
        ordered.sort_by_key(|e| std::cmp::Reverse(e.rank));

        let mut block = String::new();
        if self.intent_hints {
            if let Some(intent) = query.intent {
                block.push_str(&format!("Intent: {}.\n", intent_description(intent)));
            }
        }
        let query_code = clean(&query.code, &format!("query {}", query.id))?;
        let code_slot = if ordered.is_empty() {
            query_code
        } else {
            block.push('\n');
            for ex in &ordered {
                let code = clean(&ex.sample.code, &format!("demonstration {}", ex.sample.id))?;
                let expl = clean(&ex.sample.explanation, &format!("demonstration {}", ex.sample.id))?;
                block.push_str(&format!("Code: {code}\nSummary: {expl}\n\n"));
            }
            block.push_str("Code: ");
            format!("{query_code}\nSummary:")
        };

        let mut text = fill(&self.text, &[("{examples}", &block), ("{code}", &code_slot)]);
        if !self.text.contains("{examples}") && !block.is_empty() {
            // custom template without an examples slot: put them before the query
            text = fill(&self.text, &[("{code}", &format!("{block}{code_slot}"))]);
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(PromptBundle {
            text,
            family: self.family,
            k_effective: ordered.len(),
            examples: ordered,
            warnings,
        })
    }
}

/// Substitutes each placeholder in one pass, so substituted text is never
/// scanned for placeholders again.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let next = values
            .iter()
            .filter_map(|(k, v)| rest.find(k).map(|i| (i, *k, *v)))
            .min_by_key(|(i, _, _)| *i);
        match next {
            Some((i, k, v)) => {
                out.push_str(&rest[..i]);
                out.push_str(v);
                rest = &rest[i + k.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// Inserts a space after the first character of every delimiter occurrence.
/// Returns the first delimiter found, if any.
pub fn escape_delimiters(text: &str) -> (String, Option<&'static str>) {
    let mut out = text.to_string();
    let mut first = None;
    for d in DELIMITERS {
        if out.contains(d) {
            first.get_or_insert(d);
            let (head, tail) = d.split_at(1);
            out = out.replace(d, &format!("{head} {tail}"));
        }
    }
    (out, first)
}

const ANSWER_PREFIXES: [&str; 6] = ["summary:", "explanation:", "answer:", "output:", "assistant:", "#assistant:"];

/// Reduces a raw generation to a one-line explanation: drops echoed role
/// markers, stops at a new `#Human:` or `[INST]` turn, takes the first
/// non-empty line, and strips answer prefixes and wrapping quotes.
pub fn strip_output(raw: &str) -> Result<String, PromptError> {
    let mut text = raw;
    for marker in ["[/INST]", "#Assistant:"] {
        if let Some(i) = text.rfind(marker) {
            text = &text[i + marker.len()..];
        }
    }
    for marker in ["#Human:", "[INST]"] {
        if let Some(i) = text.find(marker) {
            text = &text[..i];
        }
    }
    text.lines()
        .map(clean_line)
        .find(|l| !l.is_empty())
        .ok_or(PromptError::EmptyGeneration)
}

fn clean_line(line: &str) -> String {
    let mut s = line.trim();
    if s.starts_with("```") {
        return String::new();
    }
    loop {
        let before = s;
        let lower = s.to_ascii_lowercase();
        if let Some(p) = ANSWER_PREFIXES.iter().find(|p| lower.starts_with(*p)) {
            s = s[p.len()..].trim_start();
        }
        for q in ['"', '\'', '`'] {
            if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
                s = s[1..s.len() - 1].trim();
            }
        }
        if s == before {
            return s.to_string();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Split};
    use crate::similarity::{SimilarityScore, Strategy};

    fn sample(id: &str, code: &str, expl: &str) -> CodeSample {
        CodeSample::new(id, code, expl, Language::Python, Split::Train)
    }

    fn ranked(s: CodeSample, rank: usize, score: f64) -> RankedExample {
        RankedExample {
            sample: s,
            score: SimilarityScore {
                value: score,
                strategy: Strategy::Token,
            },
            rank,
        }
    }

    #[test]
    fn zero_shot_templates_verbatim() {
        let q = sample("q", "print(os.listdir(dname))", "");
        let inst = PromptTemplate::builtin(TemplateFamily::InstWrapped).render(&q, &[], true).unwrap();
        assert_eq!(
            inst.text,
            "[INST] <> You are an expert in Programming. Below is a line of python code that describes a task. \
             Return only one line of summary that appropriately describes the task that the code is performing. \
             You must write only summary without any prefix or suffix explanations. Note: The summary should have \
             minimum 1 words and can have on an average 10 words. <> print(os.listdir(dname)) [/INST]"
        );
        let ha = PromptTemplate::builtin(TemplateFamily::HumanAssistant).render(&q, &[], true).unwrap();
        assert_eq!(
            ha.text,
            "#Human: You are a helpful code summarizer. Please describe in simple english the purpose of the \
             following Python code snippet: print(os.listdir(dname))\n#Assistant:"
        );
        assert_eq!(ha.k_effective, 0);
    }

    #[test]
    fn demonstrations_ascend_in_similarity() {
        let q = sample("q", "os.mkdir(path)", "");
        let hi = ranked(sample("a", "os.listdir(d)", "list a directory"), 1, 0.9);
        let lo = ranked(sample("b", "x = 1", "assign one"), 2, 0.5);
        let p = PromptTemplate::builtin(TemplateFamily::HumanAssistant)
            .render(&q, &[hi, lo], true)
            .unwrap();
        let (ia, ib, iq) = (
            p.text.find("os.listdir").unwrap(),
            p.text.find("x = 1").unwrap(),
            p.text.find("os.mkdir").unwrap(),
        );
        assert!(ib < ia && ia < iq);
        assert_eq!(p.examples[0].sample.id, "b");
        assert!(p.text.contains(
            "snippet: \nCode: x = 1\nSummary: assign one\n\nCode: os.listdir(d)\nSummary: list a directory\n\nCode: os.mkdir(path)\nSummary:\n#Assistant:"
        ));
        assert_eq!(p.text.matches("os.mkdir(path)").count(), 1);
    }

    #[test]
    fn placeholders_in_code_are_not_expanded() {
        let q = sample("q", "s = '{examples}{code}'", "");
        let p = PromptTemplate::builtin(TemplateFamily::InstWrapped).render(&q, &[], true).unwrap();
        assert!(p.text.contains("s = '{examples}{code}' [/INST]"));
    }

    #[test]
    fn delimiter_collisions() {
        let q = sample("q", "s = '[/INST] hi'", "");
        let t = PromptTemplate::builtin(TemplateFamily::InstWrapped);
        assert!(matches!(
            t.render(&q, &[], true),
            Err(PromptError::TemplateQueryCollision { .. })
        ));
        let p = t.render(&q, &[], false).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.text.matches("[/INST]").count(), 1);
        // generics stay untouched
        let g = sample("g", "List<> xs", "");
        assert!(t.render(&g, &[], true).unwrap().warnings.is_empty());
    }

    #[test]
    fn intent_hint_is_opt_in() {
        let q = CodeSample::new("q", "f()", "", Language::Java, Split::Test).with_intent(Intent::HowToUse);
        let t = PromptTemplate::builtin(TemplateFamily::HumanAssistant);
        assert!(!t.render(&q, &[], true).unwrap().text.contains("Intent:"));
        let hinted = t.with_intent_hints(true).render(&q, &[], true).unwrap();
        assert!(hinted.text.contains("Intent: Describe the usage or the expected set-up of using the method.\nf()"));
    }

    #[test]
    fn custom_template_validation() {
        assert!(PromptTemplate::custom(TemplateFamily::InstWrapped, "no slot").is_err());
        assert!(PromptTemplate::custom(TemplateFamily::InstWrapped, "{code}{code}").is_err());
        let t = PromptTemplate::custom(TemplateFamily::InstWrapped, "Q: {code}").unwrap();
        let q = sample("q", "f()", "");
        let ex = ranked(sample("a", "g()", "call g"), 1, 1.0);
        assert_eq!(t.render(&q, &[ex], true).unwrap().text, "Q: \nCode: g()\nSummary: call g\n\nCode: f()\nSummary:");
    }

    #[test]
    fn strips_generations() {
        let ok = |raw: &str| strip_output(raw).unwrap();
        assert_eq!(ok("  List files in a directory.\nmore"), "List files in a directory.");
        assert_eq!(ok("Summary: \"Create a folder\""), "Create a folder");
        assert_eq!(ok("\n\nSummary:\n`make dir`"), "make dir");
        assert_eq!(ok("[INST] q [/INST] Explanation: lists files"), "lists files");
        assert_eq!(ok("#Assistant: prints x\n#Human: next"), "prints x");
        assert_eq!(ok("```python\nreturns x\n```"), "returns x");
        assert!(matches!(strip_output(" \n Summary: \n"), Err(PromptError::EmptyGeneration)));
        assert!(matches!(strip_output("#Human: hi"), Err(PromptError::EmptyGeneration)));
    }

    #[test]
    fn families_of_known_models() {
        assert_eq!(TemplateFamily::for_model("CodeLlama-34b-Instruct"), Some(TemplateFamily::InstWrapped));
        for m in ["starcoder", "CodeUp-13B-Chat", "Llama-2-Coder-7B"] {
            assert_eq!(TemplateFamily::for_model(m), Some(TemplateFamily::HumanAssistant));
        }
        assert_eq!(TemplateFamily::for_model("gpt-x"), None);
    }
}
