//! Title normalization and rendering of compressions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rule_engine::LabelVector;

/// A normalized title: lowercase tokens with no spaces, ampersands or hyphens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub raw: String,
}

impl TokenSequence {
    /// Wraps already-normalized tokens, e.g. rows read back from a dataset file.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        let raw = tokens.join(" ");
        Ok(Self { tokens, raw })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.tokens
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Lowercases, expands `&` to ` and `, deletes `-`, and splits on ASCII spaces.
pub fn normalize(raw: &str) -> Result<TokenSequence> {
    let lowered = raw.to_lowercase();
    let expanded = lowered.replace('&', " and ");
    let dehyphenated: String = expanded.chars().filter(|&c| c != '-').collect();
    let tokens: Vec<String> = dehyphenated
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(TokenSequence {
        tokens,
        raw: raw.to_owned(),
    })
}

/// Joins the tokens whose label is 1.
pub fn render(tokens: &TokenSequence, labels: &LabelVector) -> Result<String> {
    if tokens.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: tokens.len(),
            got: labels.len(),
        });
    }
    let kept: Vec<&str> = tokens
        .tokens
        .iter()
        .zip(labels.iter())
        .filter(|(_, bit)| bit == &1)
        .map(|(t, _)| t.as_str())
        .collect();
    Ok(kept.join(" "))
}
