use std::sync::Arc;

use crate::corpus::Language;
use crate::llm::{ApiStyle, ChatMessage, Gateway, GatewayError, GenerationParams, ModelTarget};

use super::{EntityError, EntityExtractor, EntitySet, EntityType};

/// Entity extraction through an instruction-tuned NER model.
///
/// Each normative type is asked for separately with a three-turn
/// conversation (`Text: <code>` / `I've read this text.` /
/// `What describes <type> in the text?`) and the model is expected to answer
/// with a JSON list of strings. Answers that do not parse contribute nothing.
#[derive(Debug, Clone)]
pub struct RemoteLlm {
    gateway: Arc<Gateway>,
    model: ModelTarget,
    params: GenerationParams,
}

impl RemoteLlm {
    pub fn new(gateway: Arc<Gateway>, model: ModelTarget) -> Self {
        RemoteLlm {
            gateway,
            model,
            params: GenerationParams::ner(),
        }
    }

    pub fn with_params(mut self, params: GenerationParams) -> Self {
        self.params = params;
        self
    }

    fn ask(&self, code: &str, ty: EntityType) -> Result<String, GatewayError> {
        let question = format!("What describes {} in the text?", ty.label());
        match self.model.api {
            ApiStyle::Chat => {
                let messages = [
                    ChatMessage::user(format!("Text: {code}")),
                    ChatMessage::assistant("I've read this text."),
                    ChatMessage::user(question),
                ];
                self.gateway.chat(&messages, &self.model, &self.params)
            }
            ApiStyle::Completion => {
                let prompt = format!(
                    "A virtual assistant answers questions from a user based on the provided text.\n\
                     USER: Text: {code}\nASSISTANT: I've read this text.\nUSER: {question}\nASSISTANT:"
                );
                self.gateway.generate(&prompt, &self.model, &self.params)
            }
        }
    }
}

impl EntityExtractor for RemoteLlm {
    fn backend_id(&self) -> String {
        format!("remote-llm:{}", self.model.name)
    }

    fn extract(&self, code: &str, _language: Language) -> Result<EntitySet, EntityError> {
        if code.trim().is_empty() {
            return Err(EntityError::EmptyCode);
        }
        let mut set = EntitySet::new();
        for ty in EntityType::NORMATIVE {
            let answer = self.ask(code, ty).map_err(|e| EntityError::RemoteBackendError {
                status: e.status().unwrap_or(0),
                excerpt: e.to_string(),
            })?;
            match parse_answer(&answer) {
                Some(items) => {
                    for item in items {
                        set.insert(ty, &item);
                    }
                }
                None => log::warn!("unparseable {} answer from {}: {answer:?}", ty, self.model.name),
            }
        }
        Ok(set)
    }
}

/// The first JSON list of strings in `answer`.
pub(crate) fn parse_answer(answer: &str) -> Option<Vec<String>> {
    let start = answer.find('[')?;
    let end = answer.rfind(']')?;
    if end < start {
        return None;
    }
    let items: Vec<serde_json::Value> = serde_json::from_str(&answer[start..=end]).ok()?;
    Some(
        items
            .into_iter()
            .filter_map(|v| match v {
                serde_json::Value::String(s) => Some(s),
                serde_json::Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_json_lists() {
        assert_eq!(parse_answer(r#"["os", "sys"]"#).unwrap(), ["os", "sys"]);
        assert_eq!(parse_answer(r#"Answer: ["print"] done"#).unwrap(), ["print"]);
        assert_eq!(parse_answer("[]").unwrap(), Vec::<String>::new());
        assert!(parse_answer("none").is_none());
        assert!(parse_answer("[oops").is_none());
    }
}
