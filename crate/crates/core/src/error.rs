use std::fmt;

use thiserror::Error;

use crate::model::DipFitResult;

/// One broken invariant: the offending field path and the rule it violates.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Every invariant a value failed, not just the first.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl ValidationError {
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.field.contains(needle) || v.rule.contains(needle))
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "invalid value: {}", parts.join("; "))
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("fit failed: {message}")]
    Fit {
        message: String,
        last_iterate: Option<DipFitResult>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

/// Collects violations while checking a value.
#[derive(Default)]
pub(crate) struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn require(&mut self, ok: bool, field: &str, rule: impl Into<String>) {
        if !ok {
            self.violations.push(Violation {
                field: field.to_string(),
                rule: rule.into(),
            });
        }
    }

    pub fn probability(&mut self, value: f64, field: &str) {
        self.require(
            (0.0..=1.0).contains(&value),
            field,
            format!("must lie in [0, 1], got {value}"),
        );
    }

    pub fn non_negative(&mut self, value: f64, field: &str) {
        self.require(
            value >= 0.0 && value.is_finite(),
            field,
            format!("must be finite and >= 0, got {value}"),
        );
    }

    pub fn positive(&mut self, value: f64, field: &str) {
        self.require(
            value > 0.0 && value.is_finite(),
            field,
            format!("must be finite and > 0, got {value}"),
        );
    }

    pub fn finish(self) -> Result<(), ValidationError> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationError {
                violations: self.violations,
            })
        }
    }
}
