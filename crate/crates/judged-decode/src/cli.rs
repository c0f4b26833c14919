//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use judged_decode_core::{
    DraftMode, JudgeConfig, PreferenceAssignment, PreferenceDescription, PrefixTemplate, RoleSchedule, SamplingOptions,
    Side, TopKScope,
};

use crate::error::CliError;
use crate::model_file::ModelSpec;

pub const DEFAULT_TEMPLATE: &str = "[Preference] Your response must satisfy: {prefs} [Prompt] ";
pub const DEFAULT_SEPARATOR: &str = "; ";
pub const DEFAULT_PREF_A: &str = "Generate a response that is harmless";
pub const DEFAULT_PREF_B: &str = "Generate a response that is helpful";

#[derive(Debug, Parser)]
#[command(name = "judged-decode", version, about = "Draft-and-judge preference decoding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one JSON line per prompt.
    Generate(GenerateArgs),
    /// Check the sampling step against exact enumeration and Monte Carlo.
    Verify(VerifyArgs),
    /// Tabulate acceptance and throughput over a range of window lengths.
    Sweep(SweepArgs),
    /// Time generation as the number of combined objectives grows.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    /// Roles swap every step.
    Judge,
    /// Side A always drafts, side B always judges.
    JudgeBase,
    /// Speculative decoding of the combined-preference prompt.
    Spec,
    /// Token-by-token sampling of the combined-preference prompt.
    Plain,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Judge => "judge",
            Algorithm::JudgeBase => "judge-base",
            Algorithm::Spec => "spec",
            Algorithm::Plain => "plain",
        }
    }

    pub fn schedule(self) -> RoleSchedule {
        match self {
            Algorithm::JudgeBase => RoleSchedule::Fixed,
            _ => RoleSchedule::Alternate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Draft,
    Judge,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    A,
    B,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// `table:PATH`, `ngram:PATH` or `remote:URL`.
    #[arg(long)]
    pub model: String,
    /// Draft backend for `--algorithm spec`; defaults to `--model`.
    #[arg(long)]
    pub draft_model: Option<String>,
}

impl ModelArgs {
    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        self.model.parse()
    }

    pub fn draft_spec(&self) -> Result<Option<ModelSpec>, CliError> {
        self.draft_model.as_deref().map(str::parse).transpose()
    }
}

#[derive(Debug, Clone, Args)]
pub struct PreferenceArgs {
    /// Preference for side A (repeatable).
    #[arg(long = "pref-a")]
    pub pref_a: Vec<String>,
    /// Preference for side B (repeatable).
    #[arg(long = "pref-b")]
    pub pref_b: Vec<String>,
    /// Preference split round-robin between the sides (repeatable).
    #[arg(long = "pref", conflicts_with_all = ["pref_a", "pref_b"])]
    pub prefs: Vec<String>,
    /// Prefix template; `{prefs}` is replaced by the side's preferences.
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    pub template: String,
    #[arg(long, default_value = DEFAULT_SEPARATOR)]
    pub separator: String,
}

fn descriptions(prefix: &str, texts: &[String]) -> Result<Vec<PreferenceDescription>, CliError> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| PreferenceDescription::new(format!("{prefix}{}", i + 1), t.clone()).map_err(CliError::from))
        .collect()
}

impl PreferenceArgs {
    pub fn template(&self) -> Result<PrefixTemplate, CliError> {
        Ok(PrefixTemplate::new(self.template.clone(), self.separator.clone())?)
    }

    pub fn assignment(&self, schedule: RoleSchedule) -> Result<PreferenceAssignment, CliError> {
        if !self.prefs.is_empty() {
            return Ok(PreferenceAssignment::round_robin(descriptions("p", &self.prefs)?, schedule)?);
        }
        let or_default = |v: &[String], d: &str| if v.is_empty() { vec![d.to_string()] } else { v.to_vec() };
        Ok(PreferenceAssignment::new(
            descriptions("a", &or_default(&self.pref_a, DEFAULT_PREF_A))?,
            descriptions("b", &or_default(&self.pref_b, DEFAULT_PREF_B))?,
            schedule,
        )?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    /// JSONL prompt file.
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub max_new_tokens: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ScopeArg::Both)]
    pub top_k_scope: ScopeArg,
    /// Draft the most likely token instead of sampling it.
    #[arg(long)]
    pub greedy_draft: bool,
    /// Side that drafts first.
    #[arg(long, value_enum, default_value_t = SideArg::A)]
    pub first_side: SideArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DecodeArgs {
    pub fn sampling(&self) -> SamplingOptions {
        SamplingOptions {
            temperature: self.temperature,
            top_k: self.top_k,
            top_k_scope: match self.top_k_scope {
                ScopeArg::Draft => TopKScope::Draft,
                ScopeArg::Judge => TopKScope::Judge,
                ScopeArg::Both => TopKScope::Both,
            },
            draft_mode: if self.greedy_draft { DraftMode::GreedyDraft } else { DraftMode::Multinomial },
            ..SamplingOptions::default()
        }
    }

    pub fn judge_config(&self, lambda: usize, template: PrefixTemplate) -> Result<JudgeConfig, CliError> {
        let cfg = JudgeConfig {
            lambda,
            max_new_tokens: self.max_new_tokens,
            first_draft_side: match self.first_side {
                SideArg::A => Side::A,
                SideArg::B => Side::B,
            },
            sampling: self.sampling(),
            template,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub prefs: PreferenceArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[arg(long, value_enum, default_value_t = Algorithm::Judge)]
    pub algorithm: Algorithm,
    /// Tokens drafted per step (window length for `spec`).
    #[arg(long, default_value_t = 4)]
    pub lambda: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Prompts processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write records in prompt-file order instead of completion order.
    #[arg(long)]
    pub ordered: bool,
    /// 1 or more includes per-step traces.
    #[arg(long, default_value_t = 0)]
    pub verbosity: u8,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Largest vocabulary of the exact case family.
    #[arg(long, default_value_t = 4)]
    pub vocab: usize,
    /// Largest draft window of the exact case family.
    #[arg(long, default_value_t = 3)]
    pub lambda: usize,
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
    /// Largest speculative window checked exactly.
    #[arg(long, default_value_t = 2)]
    pub spec_window: usize,
    #[arg(long, default_value_t = 8)]
    pub mc_vocab: usize,
    #[arg(long, default_value_t = 4)]
    pub mc_lambda: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    /// Largest total variation distance the Monte Carlo run may show.
    #[arg(long, default_value_t = 0.005)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Window lengths as `LO..HI` (inclusive) or a comma list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LambdaList(pub Vec<usize>);

impl std::str::FromStr for LambdaList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad lambda `{x}`: {e}"));
        let values: Vec<usize> = match s.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (parse(lo)?, parse(hi.trim_start_matches('='))?);
                if lo > hi {
                    return Err(format!("empty lambda range {s}"));
                }
                (lo..=hi).collect()
            }
            None => s.split(',').map(parse).collect::<Result<_, _>>()?,
        };
        if values.contains(&0) {
            return Err("lambda must be at least 1".into());
        }
        Ok(LambdaList(values))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub prefs: PreferenceArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// `judge` or `judge-base`.
    #[arg(long, value_enum, default_value_t = Algorithm::Judge)]
    pub algorithm: Algorithm,
    #[arg(long, default_value = "1..6")]
    pub lambda: LambdaList,
    /// Also write the rows as JSON to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub const OBJECTIVE_POOL: [&str; 3] = [
    "Generate a response that is vivid",
    "Generate a response that is creative",
    "Generate a response that is touching",
];

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: String,
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// `judge` or `judge-base`.
    #[arg(long, value_enum, default_value_t = Algorithm::Judge)]
    pub algorithm: Algorithm,
    #[arg(long, default_value_t = 4)]
    pub lambda: usize,
    /// Objective counts to time; side A combines the first N of the pool.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3])]
    pub objectives: Vec<usize>,
    /// Replaces the objective pool (repeatable, in order).
    #[arg(long = "objective")]
    pub pool: Vec<String>,
    /// Preference of the opposing side.
    #[arg(long = "pref-b", default_value = DEFAULT_PREF_B)]
    pub pref_b: String,
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    pub template: String,
    #[arg(long, default_value = DEFAULT_SEPARATOR)]
    pub separator: String,
    /// Runs per prompt and objective count.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}
