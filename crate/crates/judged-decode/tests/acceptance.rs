//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line each and exits non-zero if any fails.

use std::process::Command;
use std::time::Instant;

use judged_decode::model_file::NGramModelFile;
use judged_decode::verify::{monte_carlo_case, monte_carlo_pair};
use judged_decode_core::dist::{residual, Distribution};
use judged_decode_core::kernel::verify_window;
use judged_decode_core::oracle::{
    enumerate_step, monte_carlo_marginal, random_cases, random_table_model, verify_spec_decode,
};
use judged_decode_core::seed::stream_rng;
use judged_decode_core::{
    generate, spec_decode_generate, JudgeConfig, NGramModel, PreferenceAssignment, PreferenceDescription, ResidualRule,
    RoleSchedule, SamplingOptions, Side, SpecDecodeConfig, TableModel, TokenId,
};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_judged-decode");
const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Shared toy backend: a 16-token n-gram model of order 4 whose lexicon
/// gives the preference words their own tokens.
struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = stream_rng(SEED, "corpus");
        // a sparse random chain: each token has three likely successors
        let successors: Vec<[u32; 3]> =
            (0..16).map(|_| [rng.gen_range(0..16), rng.gen_range(0..16), rng.gen_range(0..16)]).collect();
        let corpus: Vec<Vec<u32>> = (0..60)
            .map(|_| {
                let mut t = rng.gen_range(0..16u32);
                let mut s = vec![t];
                for _ in 0..40 {
                    t = if rng.gen_bool(0.9) {
                        successors[t as usize][rng.gen_range(0..3)]
                    } else {
                        rng.gen_range(0..16)
                    };
                    s.push(t);
                }
                s
            })
            .collect();
        let lexicon = [("harmless", 10u32), ("helpful", 11), ("vivid", 12), ("creative", 13), ("touching", 14)]
            .into_iter()
            .map(|(w, t)| (w.to_string(), t))
            .collect();
        let file = NGramModelFile {
            vocab_size: 16,
            order: 4,
            smoothing: 0.1,
            corpus,
            counts: vec![],
            eos: None,
            max_context: 4096,
            lexicon,
        };
        std::fs::write(dir.path().join("ngram.json"), serde_json::to_string(&file).unwrap()).unwrap();
        let prompts: String = (0..12)
            .map(|i| {
                let len = 1 + i % 2;
                let toks: Vec<u32> = (0..len).map(|_| rng.gen_range(0..10)).collect();
                format!("{{\"id\":\"p{i}\",\"prompt\":{}}}\n", serde_json::to_string(&toks).unwrap())
            })
            .collect();
        std::fs::write(dir.path().join("prompts.jsonl"), prompts).unwrap();
        Workspace { dir }
    }

    fn run(&self, args: &[&str]) -> std::process::Output {
        let model = format!("ngram:{}", self.dir.path().join("ngram.json").display());
        let mut full: Vec<&str> = vec![args[0], "--model", &model, "--prompts", "prompts.jsonl"];
        full.extend_from_slice(&args[1..]);
        Command::new(BIN).args(&full).current_dir(self.dir.path()).output().unwrap()
    }
}

fn exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(SEED, "criterion-1");
    let cases = random_cases(&mut rng, 200, 4, 3);
    let mut windows = [0usize; 4];
    let mut failures = 0;
    for case in &cases {
        windows[case.window] += 1;
        let r = enumerate_step(&case.draft, &case.judge, &case.prompt, case.window).unwrap();
        let marginals_equal = r.marginals == r.reference_marginals;
        if !(r.exact_equal && marginals_equal && case.vocab <= 4) {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let all_windows = windows[1..].iter().all(|&w| w > 0);
    outcome(
        failures == 0 && secs < 10.0 && all_windows,
        format!(
            "{} of 200 cases exact (windows 1/2/3: {}/{}/{}), {secs:.2} s",
            200 - failures,
            windows[1],
            windows[2],
            windows[3]
        ),
    )
}

fn event_partition() -> Outcome {
    let mut rng = stream_rng(SEED, "criterion-1");
    let cases = random_cases(&mut rng, 200, 4, 3);
    let mut failures = 0;
    let mut rejecting = 0;
    for case in &cases {
        let r = enumerate_step(&case.draft, &case.judge, &case.prompt, case.window).unwrap();
        let q = judged_decode_core::oracle::ExactSource::exact_next(&case.draft, &case.prompt).unwrap();
        let p = judged_decode_core::oracle::ExactSource::exact_next(&case.judge, &case.prompt).unwrap();
        let mut ok = r.partition_holds;
        let mut alpha = BigRational::zero();
        for t in 0..case.vocab {
            let (pt, qt) = (&p.probs()[t], &q.probs()[t]);
            let min = if pt < qt { pt.clone() } else { qt.clone() };
            alpha += min.clone();
            ok &= r.accepted_first[t] == min;
            ok &= r.rejected_first[t] == pt.clone() - min;
            ok &= r.accepted_first[t].clone() + r.rejected_first[t].clone() == r.reference_marginals[0][t];
        }
        ok &= r.acceptance_probability == alpha;
        if r.acceptance_probability != BigRational::one() {
            rejecting += 1;
        }
        if !ok {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{} of 200 cases partition exactly ({rejecting} with rejections)", 200 - failures))
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let (draft, judge, prompt) = monte_carlo_pair(SEED, 8);
    let (report, exact) =
        monte_carlo_case(&draft, &judge, &prompt, 4, &SamplingOptions::default(), 1_000_000, SEED).unwrap();
    let alpha = judged_decode_core::dist::acceptance_mass(judge.lookup(&prompt), draft.lookup(&prompt)).unwrap();
    let support = judge.lookup(&prompt).support_size();
    let secs = start.elapsed().as_secs_f64();

    // the same check must catch a residual that ignores the draft
    let q = TableModel::new(0, Distribution::new(vec![0.8, 0.1, 0.1]).unwrap());
    let p = TableModel::new(0, Distribution::new(vec![0.1, 0.1, 0.8]).unwrap());
    let broken = SamplingOptions { residual_rule: ResidualRule::Unadjusted, ..SamplingOptions::default() };
    let mut rng = stream_rng(SEED, "mutation");
    let mutant = monte_carlo_marginal(p.default_distribution(), 200_000, &mut rng, |rng| {
        Ok(verify_window(&q, &p, &[], 1, Side::A, &broken, rng)?.emitted[0])
    })
    .unwrap();

    outcome(
        exact && alpha < 1.0 && report.tv_distance < 0.005 && secs < 60.0 && mutant.tv_distance > 0.05,
        format!(
            "TV {:.5} over 10^6 trials (vocab 8, lambda 4, judge support {support}, alpha {alpha:.3}) in {secs:.2} s; \
             unadjusted residual shows TV {:.3}",
            report.tv_distance, mutant.tv_distance
        ),
    )
}

fn speculative() -> Outcome {
    let mut rng = stream_rng(SEED, "criterion-4");
    let cases = random_cases(&mut rng, 200, 4, 2);
    let exact =
        cases.iter().filter(|c| verify_spec_decode(&c.draft, &c.judge, c.window, &c.prompt).unwrap().passed()).count();

    let model = random_table_model(&mut rng, 4, 1).with_max_context(usize::MAX);
    let cfg = SpecDecodeConfig { window: 2, max_new_tokens: 30_000, ..Default::default() };
    let res = spec_decode_generate(&model, &model, &[TokenId(0)], &cfg, &mut rng).unwrap();
    outcome(
        exact == 200 && res.acceptance_rate == 1.0 && res.steps() >= 10_000,
        format!(
            "{exact} of 200 windows exact; identical models accept {} over {} steps",
            res.acceptance_rate,
            res.steps()
        ),
    )
}

fn identity_degeneracies() -> Outcome {
    let ngram = {
        let mut m = NGramModel::new(8, 3, 0.5).unwrap();
        m.train(&[0u32, 3, 5, 1, 2, 7, 3, 5, 6, 0, 1].map(TokenId)).unwrap();
        m.with_max_context(usize::MAX)
    };
    let same = PreferenceAssignment::new(
        vec![PreferenceDescription::new("a", "be concise").unwrap()],
        vec![PreferenceDescription::new("b", "be concise").unwrap()],
        RoleSchedule::Alternate,
    )
    .unwrap();
    let cfg = JudgeConfig { lambda: 4, max_new_tokens: 50_000, ..Default::default() };
    let mut rng = stream_rng(SEED, "criterion-5");
    let res = generate(&ngram, &same, &[TokenId(1)], &cfg, &mut rng).unwrap();
    let full = res.traces.iter().filter(|t| t.reserved == t.window && !t.residual_used).count();

    let draft = TableModel::new(0, Distribution::point(4, TokenId(1)).unwrap());
    let judge = TableModel::new(0, Distribution::point(4, TokenId(2)).unwrap());
    let opts = SamplingOptions::default();
    let judged = (0..10_000)
        .filter(|_| {
            verify_window(&draft, &judge, &[], 1, Side::A, &opts, &mut rng).unwrap().emitted == vec![TokenId(2)]
        })
        .count();
    let exact =
        residual(&judge.default_distribution().to_exact().unwrap(), &draft.default_distribution().to_exact().unwrap())
            .map(|r| r.distribution.prob(TokenId(2)).is_one())
            .unwrap_or(false);
    outcome(
        full == res.steps() && res.steps() >= 10_000 && judged == 10_000 && exact,
        format!(
            "identical prefixes: n = lambda in {full} of {} steps; disjoint one-hots: judge token in {judged} of 10000",
            res.steps()
        ),
    )
}

fn sweep(ws: &Workspace) -> Outcome {
    let start = Instant::now();
    let out = ws.run(&[
        "sweep",
        "--lambda",
        "1..6",
        "--template",
        "{prefs}",
        "--pref-a",
        "harmless",
        "--pref-b",
        "helpful",
        "--max-new-tokens",
        "64",
        "--seed",
        "3",
        "--json",
        "sweep.json",
    ]);
    let secs = start.elapsed().as_secs_f64();
    if !out.status.success() {
        return outcome(false, format!("sweep failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let table = String::from_utf8(out.stdout).unwrap();
    let header_ok = table.lines().next() == Some("lambda\tacceptance_rate\ttokens_per_step\twall_time_ms");
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(ws.dir.path().join("sweep.json")).unwrap()).unwrap();
    let field = |r: &serde_json::Value, k: &str| r[k].as_f64().unwrap();
    let rates_ok = rows.iter().all(|r| (0.0..=1.0).contains(&field(r, "acceptance_rate")));
    let mut ordered = true;
    for a in &rows {
        for b in &rows {
            if field(a, "mean_reserved") < field(b, "mean_reserved") {
                ordered &= field(a, "tokens_per_step") < field(b, "tokens_per_step");
            }
        }
    }
    let summary: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.2}/{:.2}", r["lambda"], field(r, "acceptance_rate"), field(r, "tokens_per_step")))
        .collect();
    outcome(
        header_ok && rows.len() == 6 && table.lines().count() == 7 && rates_ok && ordered && secs < 60.0,
        format!("6 rows lambda:rate/tokens-per-step {} in {secs:.2} s", summary.join(" ")),
    )
}

fn strip_wall_time(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find("\"wall_time_ms\":") {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        let end = tail.find([',', '}']).unwrap_or(tail.len());
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}

fn determinism(ws: &Workspace) -> Outcome {
    let args = [
        "generate",
        "--algorithm",
        "judge",
        "--lambda",
        "4",
        "--seed",
        "42",
        "--template",
        "{prefs}",
        "--pref-a",
        "harmless",
        "--pref-b",
        "helpful",
        "--verbosity",
        "1",
        "--jobs",
        "4",
        "--ordered",
    ];
    let a = ws.run(&args);
    let b = ws.run(&args);
    let (a, b) = (String::from_utf8(a.stdout).unwrap(), String::from_utf8(b.stdout).unwrap());
    let lines = a.lines().count();
    outcome(
        lines == 12 && strip_wall_time(&a) == strip_wall_time(&b),
        format!("{lines} records byte-identical apart from wall_time_ms"),
    )
}

fn bench(ws: &Workspace) -> Outcome {
    let out =
        ws.run(&["bench", "--objectives", "1,2,3", "--repeats", "5", "--max-new-tokens", "64", "--json", "bench.json"]);
    if !out.status.success() {
        return outcome(false, format!("bench failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.dir.path().join("bench.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    let shape_ok = rows.len() == 3
        && rows.iter().enumerate().all(|(i, r)| {
            r["objectives"] == i + 1
                && r["mean_ms"].as_f64().is_some_and(|m| m.is_finite() && m > 0.0)
                && r["stddev_ms"].as_f64().is_some_and(|s| s.is_finite() && s >= 0.0)
        });
    let overhead = report["relative_overhead"].as_f64();
    let text = String::from_utf8(out.stdout).unwrap();
    let shown: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{}: {:.3} ± {:.3} ms",
                r["objectives"],
                r["mean_ms"].as_f64().unwrap(),
                r["stddev_ms"].as_f64().unwrap()
            )
        })
        .collect();
    outcome(
        shape_ok && overhead.is_some() && text.contains("relative overhead 1->3"),
        format!("{}; 1->3 overhead {:+.1}%", shown.join(", "), overhead.unwrap_or(f64::NAN) * 100.0),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let ws = Workspace::new();
    let criteria: [Criterion<'_>; 8] = [
        ("judgment step is exact", Box::new(exactness)),
        ("accepted/rejected masses partition the judge", Box::new(event_partition)),
        ("Monte Carlo agrees with enumeration", Box::new(monte_carlo)),
        ("speculative decoding is lossless", Box::new(speculative)),
        ("identity degeneracies", Box::new(identity_degeneracies)),
        ("lambda sweep harness", Box::new(|| sweep(&ws))),
        ("generate is deterministic", Box::new(|| determinism(&ws))),
        ("objective-count benchmark", Box::new(|| bench(&ws))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!("criterion {} {}: {name}: {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 8 acceptance criteria passed");
}
