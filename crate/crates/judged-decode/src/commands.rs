//! The four subcommands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use judged_decode_core::seed::stream_rng;
use judged_decode_core::{
    autoregressive_generate, generate_timed, lambda_sweep, spec_decode_generate, Clock, GenerationResult, JudgeConfig,
    PreferenceAssignment, PreferenceDescription, PrefixTemplate, PrefixedSource, ProbabilitySource, RoleSchedule,
    SpecDecodeConfig, SweepRow, TokenId,
};
use serde::Serialize;

use crate::backend::Backend;
use crate::cli::{Algorithm, BenchArgs, GenerateArgs, SweepArgs, VerifyArgs, OBJECTIVE_POOL};
use crate::error::CliError;
use crate::prompts::{read_prompts, PromptRecord};
use crate::records::ResultRecord;
use crate::verify::{self, VerifyOptions};

/// Wall clock measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        SystemClock(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write + Send>, CliError> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?))),
        None => Ok(Box::new(io::stdout())),
    }
}

fn output_name(path: Option<&Path>) -> PathBuf {
    path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>"))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports always serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Everything a worker needs to turn one prompt into a record.
struct Job<'a> {
    backend: &'a Backend,
    draft: &'a Backend,
    algorithm: Algorithm,
    assignment: PreferenceAssignment,
    cfg: JudgeConfig,
    seed: u64,
    traces: bool,
}

impl Job<'_> {
    /// All preferences of both sides in one prefix, for the single-prompt
    /// baselines.
    fn combined_prefix<S: ProbabilitySource + ?Sized>(&self, source: &S) -> Result<Vec<TokenId>, CliError> {
        let all: Vec<PreferenceDescription> = self
            .assignment
            .side(judged_decode_core::Side::A)
            .iter()
            .chain(self.assignment.side(judged_decode_core::Side::B))
            .cloned()
            .collect();
        Ok(source.tokenize(&self.cfg.template.render(&all))?)
    }

    fn run(&self, record: &PromptRecord) -> Result<ResultRecord, CliError> {
        let prompt = record.tokens(self.backend)?;
        let mut rng = stream_rng(self.seed, &record.id);
        let clock = SystemClock::new();
        let start = clock.now_ms();
        let mut result: GenerationResult = match self.algorithm {
            Algorithm::Judge | Algorithm::JudgeBase => {
                judged_decode_core::generate(self.backend, &self.assignment, &prompt, &self.cfg, &mut rng)?
            }
            Algorithm::Spec => {
                let target = PrefixedSource::new(self.backend, self.combined_prefix(self.backend)?);
                let draft = PrefixedSource::new(self.draft, self.combined_prefix(self.draft)?);
                let cfg = SpecDecodeConfig {
                    window: self.cfg.lambda,
                    max_new_tokens: self.cfg.max_new_tokens,
                    sampling: self.cfg.sampling,
                };
                spec_decode_generate(&draft, &target, &prompt, &cfg, &mut rng)?
            }
            Algorithm::Plain => {
                let target = PrefixedSource::new(self.backend, self.combined_prefix(self.backend)?);
                judged_decode_core::source::check_context_len(prompt.len(), target.max_context())?;
                autoregressive_generate(&target, &prompt, self.cfg.max_new_tokens, &self.cfg.sampling, &mut rng)?
            }
        };
        result.wall_time_ms = clock.now_ms() - start;
        let text = self.backend.detokenize(&result.output)?;
        let speculative = self.algorithm != Algorithm::Plain;
        Ok(ResultRecord::new(&record.id, self.algorithm.name(), prompt, result, speculative, text, self.traces))
    }
}

/// Runs `job` over `prompts` on `jobs` threads and writes one line per
/// record as soon as it is ready, or in input order when `ordered`.
fn run_prompts(
    job: &Job<'_>,
    prompts: &[PromptRecord],
    jobs: usize,
    ordered: bool,
    out: &mut dyn Write,
    out_name: &Path,
) -> Result<(), CliError> {
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<String, CliError>)>();
    thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(prompts.len().max(1)) {
            let tx = tx.clone();
            let (next, stop) = (&next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(record) = prompts.get(i) else { break };
                let line = job.run(record).map(|r| r.to_line());
                if tx.send((i, line)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut first_error = None;
        let mut pending = BTreeMap::new();
        let mut cursor = 0;
        for (i, line) in rx {
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    stop.store(true, Ordering::Relaxed);
                    log::error!("prompt `{}`: {e}", prompts[i].id);
                    first_error.get_or_insert(e);
                    continue;
                }
            };
            if first_error.is_some() {
                continue;
            }
            let written = if ordered {
                pending.insert(i, line);
                let mut res = Ok(());
                while let Some(l) = pending.remove(&cursor) {
                    res = res.and(out.write_all(l.as_bytes()));
                    cursor += 1;
                }
                res
            } else {
                out.write_all(line.as_bytes())
            };
            if let Err(e) = written.and_then(|_| out.flush()) {
                stop.store(true, Ordering::Relaxed);
                first_error.get_or_insert(CliError::io(out_name, e));
            }
        }
        first_error.map_or(Ok(()), Err)
    })
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    if args.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let template = args.prefs.template()?;
    let cfg = args.decode.judge_config(args.lambda, template)?;
    let assignment = args.prefs.assignment(args.algorithm.schedule())?;
    let prompts = read_prompts(&args.decode.prompts)?;
    let draft_spec = args.model.draft_spec()?;
    if draft_spec.is_some() && args.algorithm != Algorithm::Spec {
        return Err(CliError::Config("--draft-model only applies to --algorithm spec".into()));
    }
    let backend = Backend::load(&args.model.spec()?)?;
    let draft_backend = draft_spec.as_ref().map(Backend::load).transpose()?;
    let draft = draft_backend.as_ref().unwrap_or(&backend);
    if draft.vocab_size() != backend.vocab_size() {
        return Err(CliError::Config(format!(
            "draft vocabulary {} differs from target vocabulary {}",
            draft.vocab_size(),
            backend.vocab_size()
        )));
    }

    let job = Job {
        backend: &backend,
        draft,
        algorithm: args.algorithm,
        assignment,
        cfg,
        seed: args.decode.seed,
        traces: args.verbosity >= 1,
    };
    let mut out = open_output(args.output.as_deref())?;
    run_prompts(&job, &prompts, args.jobs, args.ordered, &mut out, &output_name(args.output.as_deref()))
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(CliError::Config("--tol must be positive".into()));
    }
    let opts = VerifyOptions {
        vocab: args.vocab,
        lambda: args.lambda,
        cases: args.cases,
        spec_window: args.spec_window,
        mc_vocab: args.mc_vocab,
        mc_lambda: args.mc_lambda,
        trials: args.trials,
        tol: args.tol,
        seed: args.seed,
    };
    if opts.vocab < 2 || opts.mc_vocab < 2 {
        return Err(CliError::Config("vocabularies must have at least two tokens".into()));
    }
    let report = verify::run(&opts)?;
    let text = serde_json::to_string_pretty(&report).expect("reports always serialize") + "\n";
    let name = output_name(args.output.as_deref());
    let mut out = open_output(args.output.as_deref())?;
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::io(&name, e))?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} of {} judgment cases, {} of {} speculative cases exact; Monte Carlo TV {:.5} (tolerance {})",
            report.judgment.passed,
            report.judgment.cases,
            report.speculative.passed,
            report.speculative.cases,
            report.monte_carlo.tv_distance,
            report.monte_carlo.tol
        )))
    }
}

fn judge_only(algorithm: Algorithm, command: &str) -> Result<RoleSchedule, CliError> {
    match algorithm {
        Algorithm::Judge | Algorithm::JudgeBase => Ok(algorithm.schedule()),
        other => Err(CliError::Config(format!("{command} supports judge and judge-base, not {}", other.name()))),
    }
}

fn tokenized_prompts(path: &Path, backend: &Backend) -> Result<Vec<(String, Vec<TokenId>)>, CliError> {
    read_prompts(path)?.into_iter().map(|r| Ok((r.id.clone(), r.tokens(backend)?))).collect()
}

pub const SWEEP_HEADER: &str = "lambda\tacceptance_rate\ttokens_per_step\twall_time_ms";

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.3}\n",
            r.lambda, r.acceptance_rate, r.tokens_per_step, r.wall_time_ms
        ));
    }
    out
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let schedule = judge_only(args.algorithm, "sweep")?;
    if args.model.draft_model.is_some() {
        return Err(CliError::Config("--draft-model does not apply to sweep".into()));
    }
    let base = args.decode.judge_config(args.lambda.0[0], args.prefs.template()?)?;
    let assignment = args.prefs.assignment(schedule)?;
    let backend = Backend::load(&args.model.spec()?)?;
    let prompts = tokenized_prompts(&args.decode.prompts, &backend)?;
    let rows =
        lambda_sweep(&backend, &assignment, &prompts, &args.lambda.0, &base, args.decode.seed, &SystemClock::new())?;
    let mut stdout = io::stdout();
    stdout.write_all(sweep_table(&rows).as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
    if let Some(path) = &args.json {
        write_json_file(path, &rows)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub objectives: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// `(last - first) / first` over the mean wall times.
    pub relative_overhead: Option<f64>,
}

/// Mean and sample standard deviation.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn bench_table(report: &BenchReport) -> String {
    let mut out = String::from("objectives\tmean_ms\tstddev_ms\tsamples\n");
    for r in &report.rows {
        out.push_str(&format!("{}\t{:.3}\t{:.3}\t{}\n", r.objectives, r.mean_ms, r.stddev_ms, r.samples));
    }
    for r in &report.rows {
        out.push_str(&format!("# {} objective(s): {:.3} ms ± {:.3} ms\n", r.objectives, r.mean_ms, r.stddev_ms));
    }
    if let (Some(first), Some(last), Some(o)) = (report.rows.first(), report.rows.last(), report.relative_overhead) {
        out.push_str(&format!(
            "# relative overhead {}->{} objectives: {:+.2}%\n",
            first.objectives,
            last.objectives,
            o * 100.0
        ));
    }
    out
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let schedule = judge_only(args.algorithm, "bench")?;
    let pool: Vec<String> =
        if args.pool.is_empty() { OBJECTIVE_POOL.iter().map(|s| s.to_string()).collect() } else { args.pool.clone() };
    if args.objectives.is_empty() || args.objectives.iter().any(|&k| k == 0 || k > pool.len()) {
        return Err(CliError::Config(format!("objective counts must lie in 1..={}", pool.len())));
    }
    if args.repeats == 0 {
        return Err(CliError::Config("--repeats must be at least 1".into()));
    }
    let template = PrefixTemplate::new(args.template.clone(), args.separator.clone())?;
    let cfg = args.decode.judge_config(args.lambda, template)?;
    let side_b = vec![PreferenceDescription::new("b1", args.pref_b.clone())?];
    let backend = Backend::load(&args.model.parse()?)?;
    let prompts = tokenized_prompts(&args.decode.prompts, &backend)?;
    if prompts.is_empty() {
        return Err(CliError::Config("bench needs at least one prompt".into()));
    }

    // one untimed pass so the first row does not pay for cold caches
    let warm =
        PreferenceAssignment::new(vec![PreferenceDescription::new("o1", pool[0].clone())?], side_b.clone(), schedule)?;
    for (id, prompt) in &prompts {
        let mut rng = stream_rng(args.decode.seed, &format!("{id}#warmup"));
        judged_decode_core::generate(&backend, &warm, prompt, &cfg, &mut rng)?;
    }

    let mut rows = Vec::new();
    for &k in &args.objectives {
        let side_a = pool[..k]
            .iter()
            .enumerate()
            .map(|(i, t)| PreferenceDescription::new(format!("o{}", i + 1), t.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let assignment = PreferenceAssignment::new(side_a, side_b.clone(), schedule)?;
        let mut samples = Vec::with_capacity(prompts.len() * args.repeats);
        for rep in 0..args.repeats {
            for (id, prompt) in &prompts {
                let mut rng = stream_rng(args.decode.seed, &format!("{id}#{rep}"));
                let clock = SystemClock::new();
                let result = generate_timed(&backend, &assignment, prompt, &cfg, &mut rng, &clock)?;
                samples.push(result.wall_time_ms);
            }
        }
        let (mean_ms, stddev_ms) = mean_std(&samples);
        rows.push(BenchRow { objectives: k, mean_ms, stddev_ms, samples: samples.len() });
    }
    let relative_overhead = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) if rows.len() > 1 && f.mean_ms > 0.0 => Some((l.mean_ms - f.mean_ms) / f.mean_ms),
        _ => None,
    };
    let report = BenchReport { rows, relative_overhead };
    io::stdout().write_all(bench_table(&report).as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
    if let Some(path) = &args.json {
        write_json_file(path, &report)?;
    }
    Ok(())
}
