use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_context_len, ProbabilitySource};
use crate::dist::{Distribution, TokenId};
use crate::Error;

/// A natural-language preference, e.g. "Generate a response that is harmless".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceDescription {
    pub id: String,
    pub text: String,
}

impl PreferenceDescription {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, Error> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidPreferences("preference text must be non-empty".into()));
        }
        Ok(PreferenceDescription { id: id.into(), text })
    }
}

/// One of the two preference sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// How draft and judge roles move between sides from step to step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleSchedule {
    /// The draft side flips after every judgment step.
    #[default]
    Alternate,
    /// The first draft side drafts every step.
    Fixed,
}

impl RoleSchedule {
    /// Draft side of the zero-based `step`.
    pub fn draft_side(self, first: Side, step: usize) -> Side {
        match self {
            RoleSchedule::Fixed => first,
            RoleSchedule::Alternate if step.is_multiple_of(2) => first,
            RoleSchedule::Alternate => first.other(),
        }
    }
}

/// Which preferences condition each side, and how the roles rotate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceAssignment {
    side_a: Vec<PreferenceDescription>,
    side_b: Vec<PreferenceDescription>,
    schedule: RoleSchedule,
}

impl PreferenceAssignment {
    pub fn new(
        side_a: Vec<PreferenceDescription>,
        side_b: Vec<PreferenceDescription>,
        schedule: RoleSchedule,
    ) -> Result<Self, Error> {
        if side_a.is_empty() || side_b.is_empty() {
            return Err(Error::InvalidPreferences("both preference sides need at least one entry".into()));
        }
        Ok(PreferenceAssignment { side_a, side_b, schedule })
    }

    /// Deals `prefs` alternately onto side A and side B, starting with A.
    pub fn round_robin(prefs: Vec<PreferenceDescription>, schedule: RoleSchedule) -> Result<Self, Error> {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, p) in prefs.into_iter().enumerate() {
            if i % 2 == 0 {
                a.push(p);
            } else {
                b.push(p);
            }
        }
        Self::new(a, b, schedule)
    }

    pub fn side(&self, side: Side) -> &[PreferenceDescription] {
        match side {
            Side::A => &self.side_a,
            Side::B => &self.side_b,
        }
    }

    pub fn schedule(&self) -> RoleSchedule {
        self.schedule
    }

    pub fn with_schedule(mut self, schedule: RoleSchedule) -> Self {
        self.schedule = schedule;
        self
    }
}

/// Text template that turns a preference list into a prompt prefix.
///
/// `{prefs}` is replaced by the preference texts joined with `separator`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixTemplate {
    template: String,
    separator: String,
}

impl PrefixTemplate {
    pub const PLACEHOLDER: &'static str = "{prefs}";

    pub fn new(template: impl Into<String>, separator: impl Into<String>) -> Result<Self, Error> {
        let template = template.into();
        if !template.contains(Self::PLACEHOLDER) {
            return Err(Error::InvalidConfig(format!("prefix template must contain {}", Self::PLACEHOLDER)));
        }
        Ok(PrefixTemplate { template, separator: separator.into() })
    }

    pub fn render(&self, prefs: &[PreferenceDescription]) -> String {
        let joined = prefs.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(&self.separator);
        self.template.replace(Self::PLACEHOLDER, &joined)
    }
}

impl Default for PrefixTemplate {
    fn default() -> Self {
        PrefixTemplate {
            template: String::from("[Preference] Your response must satisfy: {prefs} [Prompt] "),
            separator: String::from("; "),
        }
    }
}

/// Rendered and tokenized preference prefix for `side`, followed by the
/// prompt and the tokens generated so far.
pub fn build_prefixed_context<S: ProbabilitySource + ?Sized>(
    assignment: &PreferenceAssignment,
    side: Side,
    template: &PrefixTemplate,
    base_prompt: &[TokenId],
    generated: &[TokenId],
    source: &S,
) -> Result<Vec<TokenId>, Error> {
    let mut ctx = source.tokenize(&template.render(assignment.side(side)))?;
    ctx.extend_from_slice(base_prompt);
    ctx.extend_from_slice(generated);
    check_context_len(ctx.len(), source.max_context())?;
    Ok(ctx)
}

/// A source whose every query is prefixed with fixed tokens.
///
/// This is how one base model plays both the draft and the judge role: the two
/// roles are the same source behind different preference prefixes.
#[derive(Debug, Clone)]
pub struct PrefixedSource<S> {
    inner: S,
    prefix: Vec<TokenId>,
}

impl<S: ProbabilitySource> PrefixedSource<S> {
    pub fn new(inner: S, prefix: Vec<TokenId>) -> Self {
        PrefixedSource { inner, prefix }
    }

    /// Prefix rendered from `assignment`'s preferences for `side`.
    pub fn for_side(
        inner: S,
        assignment: &PreferenceAssignment,
        side: Side,
        template: &PrefixTemplate,
    ) -> Result<Self, Error> {
        let prefix = build_prefixed_context(assignment, side, template, &[], &[], &inner)?;
        Ok(PrefixedSource { inner, prefix })
    }

    pub fn prefix(&self) -> &[TokenId] {
        &self.prefix
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    fn with_prefix(&self, ctx: &[TokenId]) -> Vec<TokenId> {
        let mut full = Vec::with_capacity(self.prefix.len() + ctx.len());
        full.extend_from_slice(&self.prefix);
        full.extend_from_slice(ctx);
        full
    }
}

impl<S: ProbabilitySource> ProbabilitySource for PrefixedSource<S> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn eos_token(&self) -> Option<TokenId> {
        self.inner.eos_token()
    }

    fn max_context(&self) -> usize {
        self.inner.max_context().saturating_sub(self.prefix.len())
    }

    fn next_distribution(&self, ctx: &[TokenId]) -> Result<Distribution, Error> {
        self.inner.next_distribution(&self.with_prefix(ctx))
    }

    fn next_distributions_batch(&self, ctxs: &[Vec<TokenId>]) -> Result<Vec<Distribution>, Error> {
        let full: Vec<Vec<TokenId>> = ctxs.iter().map(|c| self.with_prefix(c)).collect();
        self.inner.next_distributions_batch(&full)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, Error> {
        self.inner.tokenize(text)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<Option<String>, Error> {
        self.inner.detokenize(tokens)
    }
}
