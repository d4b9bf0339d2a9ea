use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateRole {
    Elicitation,
    Mapping,
}

/// A prompt body with `{name}` placeholders. `{{` and `}}` produce literal braces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub role: TemplateRole,
    body: String,
    variables: BTreeSet<String>,
}

enum Piece<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

fn pieces(body: &str) -> Result<Vec<Piece<'_>>, GatewayError> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push(Piece::Literal(&rest[..pos]));
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            out.push(Piece::Literal("{"));
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            out.push(Piece::Literal("}"));
            rest = after;
        } else if tail.starts_with('}') {
            return Err(GatewayError::Template(format!(
                "unmatched '}}' at byte {}",
                body.len() - tail.len()
            )));
        } else {
            let close = tail.find('}').ok_or_else(|| {
                GatewayError::Template(format!("unclosed '{{' at byte {}", body.len() - tail.len()))
            })?;
            let name = &tail[1..close];
            let valid = !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
            if !valid {
                return Err(GatewayError::Template(format!(
                    "invalid placeholder name {name:?}"
                )));
            }
            out.push(Piece::Placeholder(name));
            rest = &tail[close + 1..];
        }
    }
    out.push(Piece::Literal(rest));
    Ok(out)
}

impl PromptTemplate {
    /// Builds a template declaring exactly the placeholders found in `body`.
    pub fn new(
        name: impl Into<String>,
        role: TemplateRole,
        body: impl Into<String>,
    ) -> Result<Self, GatewayError> {
        let body = body.into();
        let variables = pieces(&body)?
            .into_iter()
            .filter_map(|p| match p {
                Piece::Placeholder(n) => Some(n.to_string()),
                Piece::Literal(_) => None,
            })
            .collect();
        Ok(Self {
            name: name.into(),
            role,
            body,
            variables,
        })
    }

    /// Like [`PromptTemplate::new`], but rejects bodies that reference a
    /// placeholder outside `declared`.
    pub fn with_declared(
        name: impl Into<String>,
        role: TemplateRole,
        body: impl Into<String>,
        declared: &[&str],
    ) -> Result<Self, GatewayError> {
        let template = Self::new(name, role, body)?;
        if let Some(undeclared) = template
            .variables
            .iter()
            .find(|v| !declared.contains(&v.as_str()))
        {
            return Err(GatewayError::Template(format!(
                "template {} references undeclared placeholder {{{undeclared}}}",
                template.name
            )));
        }
        Ok(template)
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(String::as_str)
    }

    pub fn render(&self, vars: &BTreeMap<String, String>) -> Result<String, GatewayError> {
        let mut out = String::with_capacity(self.body.len());
        for piece in pieces(&self.body)? {
            match piece {
                Piece::Literal(s) => out.push_str(s),
                Piece::Placeholder(name) => match vars.get(name) {
                    Some(value) => out.push_str(value),
                    None => {
                        return Err(GatewayError::UnboundPlaceholder {
                            template: self.name.clone(),
                            placeholder: name.to_string(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

/// Renders `template` with `vars`; every placeholder must be bound.
pub fn render_prompt(
    template: &PromptTemplate,
    vars: &BTreeMap<String, String>,
) -> Result<String, GatewayError> {
    template.render(vars)
}

pub const ELICITATION_VARIABLES: &[&str] = &["device_name", "corpus", "n_topics"];
pub const MAPPING_VARIABLES: &[&str] = &["device_name", "keyword_list", "corpus"];

/// Bundled corpus-level elicitation prompt.
pub const ELICITATION_PROMPT: &str = include_str!("../../prompts/elicitation.txt");
/// Bundled per-transcript mapping prompt (binary presence).
pub const MAPPING_PROMPT: &str = include_str!("../../prompts/mapping.txt");
/// Bundled per-transcript mapping prompt for graded scores. Not one of the
/// canonical prompts; it asks for `term: score` lines.
pub const MAPPING_SOFT_PROMPT: &str = include_str!("../../prompts/mapping_soft.txt");

pub fn default_elicitation_template() -> PromptTemplate {
    PromptTemplate::with_declared(
        "elicitation",
        TemplateRole::Elicitation,
        ELICITATION_PROMPT,
        ELICITATION_VARIABLES,
    )
    .expect("bundled elicitation prompt is valid")
}

pub fn default_mapping_template() -> PromptTemplate {
    PromptTemplate::with_declared(
        "mapping",
        TemplateRole::Mapping,
        MAPPING_PROMPT,
        MAPPING_VARIABLES,
    )
    .expect("bundled mapping prompt is valid")
}

pub fn default_soft_mapping_template() -> PromptTemplate {
    PromptTemplate::with_declared(
        "mapping-soft",
        TemplateRole::Mapping,
        MAPPING_SOFT_PROMPT,
        MAPPING_VARIABLES,
    )
    .expect("bundled soft mapping prompt is valid")
}
