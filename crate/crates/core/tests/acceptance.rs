//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use minuted::action_items::{extract_action_items, neighborhood_window, NeighborhoodConfig};
use minuted::backends::stub::{handle, StubServer};
use minuted::backends::{
    ActionClassifier, BackendConfig, Backends, Embedder, MockBackend, MockConfig,
    MockSummarizerMode, RemoteBackend, Summarizer, SummaryParams, TokenCounter,
};
use minuted::evaluation::{bert_score, rouge_l, rouge_n, ConfigDescriptor, GridReport};
use minuted::pipeline::{Pipeline, PipelineConfig, UnitKind};
use minuted::segmentation::{cosine_similarity, segment_units, Chunk, SegmenterConfig, Strategy};
use minuted::transcript::{parse_transcript, TranscriptFormat};
use minuted::Error;

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("mock end-to-end determinism and speed", c1_end_to_end),
        (
            "segmentation invariants on random unit lists",
            c2_segmentation_suite,
        ),
        ("simple vs complex cosine divergence", c3_divergence),
        ("neighborhood window arithmetic", c4_neighborhoods),
        ("recursion pass count and depth guard", c5_recursion),
        ("metric oracle equivalence", c6_metric_oracles),
        ("wire protocol conformance", c7_wire),
        ("ablation grid report", c8_grid),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    let _ = panic::take_hook();
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn c1_end_to_end() -> Outcome {
    let meeting = fixture("meeting50.txt");
    let input = path_str(&meeting);
    let summarize = |strategy: Strategy, actions: bool, jobs: &str| -> Result<String, String> {
        let mut args = vec![
            "summarize",
            input,
            "--segmenter",
            strategy.as_str(),
            "--jobs",
            jobs,
        ];
        if !actions {
            args.push("--no-action-items");
        }
        let (code, out, err) = run_cli(&args);
        ensure!(code == 0, "{strategy}/{actions}: exit {code}: {err}");
        Ok(out)
    };
    let grid: Vec<(Strategy, bool)> = [true, false]
        .into_iter()
        .flat_map(|a| Strategy::ALL.into_iter().map(move |s| (s, a)))
        .collect();

    let start = Instant::now();
    let mut first = BTreeMap::new();
    for &(s, a) in &grid {
        first.insert((s, a), summarize(s, a, "8")?);
    }
    let sweep = start.elapsed();
    ensure!(
        sweep < Duration::from_secs(5),
        "one sweep of 8 configurations took {sweep:?}"
    );

    for &(s, a) in &grid {
        let expected = &first[&(s, a)];
        ensure!(!expected.trim().is_empty(), "{s}/{a}: empty summary");
        for run in 0..10 {
            for jobs in ["1", "8"] {
                let again = summarize(s, a, jobs)?;
                ensure!(
                    &again == expected,
                    "{s}/{a}: run {run} with --jobs {jobs} differs"
                );
            }
        }
    }
    Ok(format!(
        "8 configurations in {:.0} ms; 160 repeat runs identical across --jobs 1/8 ({:.1} s total)",
        sweep.as_secs_f64() * 1000.0,
        start.elapsed().as_secs_f64()
    ))
}

fn random_units(rng: &mut ChaCha8Rng, max_tokens: usize) -> Vec<String> {
    let n = rng.gen_range(1..=25);
    (0..n)
        .map(|_| {
            // Roughly one unit in ten is longer than the token limit.
            let len = if rng.gen_bool(0.1) {
                rng.gen_range(max_tokens + 1..=3 * max_tokens)
            } else {
                rng.gen_range(1..=max_tokens.min(6))
            };
            let words: Vec<&str> = (0..len).map(|_| VOCAB[rng.gen_range(0..5)]).collect();
            words.join(" ")
        })
        .collect()
}

/// Partition, bound and unit-integrity checks for one segmentation.
fn check_partition(
    units: &[String],
    chunks: &[Chunk],
    strategy: Strategy,
    max_tokens: usize,
) -> Result<(), String> {
    let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    let unit_words: Vec<String> = units.iter().flat_map(|u| words(u)).collect();
    let chunk_words: Vec<String> = chunks.iter().flat_map(|c| words(&c.text)).collect();
    ensure!(
        unit_words == chunk_words,
        "coverage/order: chunk words differ from unit words"
    );
    for c in chunks {
        let n = words(&c.text).len();
        ensure!(
            c.token_count == n,
            "token_count {} for {n} words",
            c.token_count
        );
        ensure!(
            n >= 1 && n <= max_tokens,
            "chunk of {n} tokens, limit {max_tokens}"
        );
    }
    if !strategy.respects_units() {
        let mut at = 0;
        for c in chunks {
            ensure!(c.unit_range.0 == at, "word ranges are not contiguous");
            at = c.unit_range.1;
        }
        ensure!(at == unit_words.len(), "word ranges stop short");
        return Ok(());
    }
    let mut k = 0;
    let mut i = 0;
    while i < units.len() {
        let unit_len = words(&units[i]).len();
        if unit_len > max_tokens {
            // Oversize unit: consecutive pieces that rejoin to it.
            let mut pieces = Vec::new();
            while k < chunks.len() && chunks[k].unit_range == (i, i + 1) {
                pieces.extend(words(&chunks[k].text));
                k += 1;
            }
            ensure!(
                pieces == words(&units[i]),
                "oversize unit {i} not rebuilt by its pieces"
            );
            i += 1;
            continue;
        }
        ensure!(k < chunks.len(), "unit {i} is not covered");
        let (s, e) = chunks[k].unit_range;
        ensure!(
            s == i && e > s,
            "chunk {k} range {s}..{e} should start at {i}"
        );
        ensure!(
            chunks[k].text == units[s..e].join(" "),
            "chunk {k} is not the join of units {s}..{e}"
        );
        ensure!(
            units[s..e].iter().all(|u| words(u).len() <= max_tokens),
            "chunk {k} merges an oversize unit"
        );
        k += 1;
        i = e;
    }
    ensure!(k == chunks.len(), "extra chunks after the last unit");
    Ok(())
}

fn c2_segmentation_suite() -> Outcome {
    let backends = Backends::mock(MockConfig::with_vocab(VOCAB[..5].iter().copied()), 1024);
    let thresholds = [-0.5, 0.0, 0.2, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations: BTreeMap<Strategy, Vec<String>> = BTreeMap::new();
    let mut chunks_seen = 0;
    for case in 0..200 {
        let max_tokens = rng.gen_range(3..=12);
        let units = random_units(&mut rng, max_tokens);
        for strategy in Strategy::ALL {
            let mut counts = Vec::new();
            for &t in &thresholds {
                let cfg = SegmenterConfig {
                    strategy,
                    similarity_threshold: t,
                    max_tokens,
                };
                let chunks = segment_units(&backends, &units, &cfg)
                    .map_err(|e| format!("case {case} {strategy}: {e}"))?;
                check_partition(&units, &chunks, strategy, max_tokens)
                    .map_err(|e| format!("case {case} {strategy} t={t}: {e}"))?;
                chunks_seen += chunks.len();
                counts.push(chunks.len());
            }
            if counts.windows(2).any(|w| w[1] < w[0]) {
                violations
                    .entry(strategy)
                    .or_default()
                    .push(format!("case {case} counts {counts:?} units {units:?}"));
            }
        }
    }
    if !violations.is_empty() {
        let summary: Vec<String> = violations
            .iter()
            .map(|(s, v)| format!("{s}: {} lists, e.g. {}", v.len(), v[0]))
            .collect();
        return Err(format!(
            "partition/bound/integrity hold on all 200 lists, but chunk counts are not monotone in the threshold for {}",
            summary.join("; ")
        ));
    }
    Ok(format!(
        "200 lists x 4 strategies x 4 thresholds, {chunks_seen} chunks; counts monotone in threshold"
    ))
}

fn c3_divergence() -> Outcome {
    let backends = Backends::mock(MockConfig::with_vocab(["a", "b", "c", "d"]), 1024);
    let units: Vec<String> = ["a b", "b c", "a d"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let embed = |t: &str| backends.embedder.embed_text(t).unwrap();

    // Hand-derived similarities: U1·U2 = 1/2, U2·U3 = 0, and (U1+U2)·U3 = 1/sqrt(12).
    let sim12 = cosine_similarity(&embed("a b"), &embed("b c")).unwrap();
    let sim23 = cosine_similarity(&embed("b c"), &embed("a d")).unwrap();
    let sim_chunk = cosine_similarity(&embed("a b b c"), &embed("a d")).unwrap();
    ensure!((sim12 - 0.5).abs() < 1e-12, "cos(U1,U2) = {sim12}");
    ensure!(sim23.abs() < 1e-12, "cos(U2,U3) = {sim23}");
    ensure!(
        (sim_chunk - 1.0 / 12f64.sqrt()).abs() < 1e-12,
        "cos(U1U2,U3) = {sim_chunk}"
    );

    let run = |strategy| segment_units(&backends, &units, &SegmenterConfig::new(strategy)).unwrap();
    let simple = run(Strategy::SimpleCosine);
    let complex = run(Strategy::ComplexCosine);
    let shape = |cs: &[Chunk]| {
        cs.iter()
            .map(|c| (c.text.clone(), c.unit_range))
            .collect::<Vec<_>>()
    };
    ensure!(
        shape(&simple) == vec![("a b b c".to_string(), (0, 2)), ("a d".to_string(), (2, 3))],
        "simple cosine gave {:?}",
        shape(&simple)
    );
    ensure!(
        shape(&complex) == vec![("a b b c a d".to_string(), (0, 3))],
        "complex cosine gave {:?}",
        shape(&complex)
    );
    Ok("simple: [U1 U2] [U3]; complex: [U1 U2 U3]; similarities 1/2, 0, 1/sqrt(12)".into())
}

fn c4_neighborhoods() -> Outcome {
    let cfg = NeighborhoodConfig::default();
    let backends = Backends::mock(
        MockConfig::default().summarizer(MockSummarizerMode::Echo),
        1024,
    );
    let params = SummaryParams::new(1, 200).unwrap();
    let mut checked = 0;
    for n in 1..=12usize {
        for index in 0..n {
            let expected = (index.saturating_sub(3), (index + 3).min(n));
            let got = neighborhood_window(n, index, &cfg).map_err(|e| e.to_string())?;
            ensure!(
                got == expected,
                "n={n} index={index}: {got:?} != {expected:?}"
            );

            let sentences: Vec<String> = (0..n)
                .map(|i| {
                    if i == index {
                        format!("Person{i} will act.")
                    } else {
                        format!("Topic{i} is noted.")
                    }
                })
                .collect();
            let items = extract_action_items(&backends, &sentences.join(" "), &cfg, params)
                .map_err(|e| e.to_string())?;
            ensure!(
                items.len() == 1,
                "n={n} index={index}: {} items",
                items.len()
            );
            let item = &items.items[0];
            ensure!(
                item.sentence_index == index && item.window == expected,
                "n={n} index={index}: item at {} window {:?}",
                item.sentence_index,
                item.window
            );
            ensure!(
                item.text == sentences[expected.0..expected.1].join(" "),
                "n={n} index={index}: summarized text is not the window"
            );
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} (n, index) pairs, windows and extracted neighborhoods exact"
    ))
}

fn c5_recursion() -> Outcome {
    // Three turns of exactly 1200 tokens each (speaker tag included), made
    // of ten-word sentences.
    let turn = |speaker: &str, tag: usize| {
        let words: Vec<String> = (0..1199)
            .map(|i| {
                let w = format!("W{tag}x{i}");
                if i % 10 == 9 {
                    format!("{w}.")
                } else {
                    w
                }
            })
            .collect();
        format!("{speaker}: {}", words.join(" "))
    };
    let raw = [turn("Ann", 0), turn("Bob", 1), turn("Ann", 2)].join("\n");
    let transcript = parse_transcript(&raw, TranscriptFormat::Plain).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        segmenter: SegmenterConfig::new(Strategy::ChunkedLinear),
        summary_params: SummaryParams::new(1, 600).unwrap(),
        include_action_items: false,
        max_tokens: 1200,
        ..PipelineConfig::default()
    };
    let halve = Backends::mock(
        MockConfig::default().summarizer(MockSummarizerMode::HalveTokens),
        1200,
    );
    let out = Pipeline::new(halve.clone(), cfg.clone())
        .and_then(|p| p.summarize_transcript(&transcript))
        .map_err(|e| format!("halve-tokens run failed: {e}"))?;
    let passes = &out.trace.passes;
    ensure!(passes.len() == 2, "expected 2 passes, got {}", passes.len());
    let p0 = &passes[0];
    ensure!(
        p0.chunk_tokens == vec![1200; 3] && p0.summary_tokens == vec![600; 3],
        "first pass chunks {:?} summaries {:?}",
        p0.chunk_tokens,
        p0.summary_tokens
    );
    ensure!(
        p0.joined_tokens == 1800,
        "joined sectional summaries: {}",
        p0.joined_tokens
    );
    let p1 = &passes[1];
    ensure!(
        p1.depth == 1 && p1.units == UnitKind::Sentences,
        "second pass is {p1:?}"
    );
    ensure!(
        p1.joined_tokens <= 1200,
        "second pass still too long: {}",
        p1.joined_tokens
    );
    let final_tokens = halve.tokenizer.count_tokens(&out.summary).unwrap();
    ensure!(
        final_tokens == out.trace.final_tokens && final_tokens <= 600,
        "final {final_tokens}"
    );

    let meeting = std::fs::read_to_string(fixture("meeting50.txt")).unwrap();
    let transcript = parse_transcript(&meeting, TranscriptFormat::Plain).unwrap();
    let echo = Backends::mock(
        MockConfig::default().summarizer(MockSummarizerMode::Echo),
        1024,
    );
    let result = Pipeline::new(echo, PipelineConfig::default())
        .and_then(|p| p.summarize_transcript(&transcript));
    match result {
        Err(Error::DepthExceeded { max_depth: 8 }) => {}
        other => {
            return Err(format!(
                "echo summarizer: expected DepthExceeded at 8, got {other:?}"
            ))
        }
    }
    Ok(format!(
        "halve-tokens: 3 x 600 = 1800 joined tokens, one recursive pass ({} -> {} tokens), final {final_tokens}; echo: DepthExceeded at 8",
        p1.chunk_tokens.iter().sum::<usize>(),
        p1.joined_tokens
    ))
}

fn c6_metric_oracles() -> Outcome {
    let mut mock_cfg = MockConfig::with_vocab(VOCAB);
    mock_cfg.oov_bucket = false;
    let embedder = MockBackend::new(mock_cfg, 1024);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let triple = |t: minuted::evaluation::ScoreTriple| (t.precision, t.recall, t.f1);
    let same = |a: (f64, f64, f64), b: (f64, f64, f64)| {
        close(a.0, b.0) && close(a.1, b.1) && close(a.2, b.2)
    };
    for case in 0..100 {
        let cand = random_tokens(&mut rng, 1, 12);
        let reference = random_tokens(&mut rng, 1, 12);
        let (c, r) = (cand.join(" "), reference.join(" "));
        for n in [1, 2] {
            let got = triple(rouge_n(&c, &r, n).map_err(|e| e.to_string())?);
            let want = rouge_n_oracle(&cand, &reference, n);
            ensure!(
                same(got, want),
                "case {case} ROUGE-{n}: {got:?} vs {want:?} ({c} | {r})"
            );
        }
        let got = triple(rouge_l(&c, &r).map_err(|e| e.to_string())?);
        let want = rouge_l_oracle(&cand, &reference);
        ensure!(same(got, want), "case {case} ROUGE-L: {got:?} vs {want:?}");
        let got = triple(bert_score(&embedder, &c, &r).map_err(|e| e.to_string())?);
        let want = bert_oracle(&cand, &reference);
        ensure!(
            same(got, want),
            "case {case} BERTScore: {got:?} vs {want:?}"
        );

        for x in [&c, &r] {
            ensure!(
                rouge_n(x, x, 1).unwrap().f1 == 1.0,
                "ROUGE-1 self-score of {x}"
            );
            if x.split_whitespace().count() >= 2 {
                ensure!(
                    rouge_n(x, x, 2).unwrap().f1 == 1.0,
                    "ROUGE-2 self-score of {x}"
                );
            }
            ensure!(
                rouge_l(x, x).unwrap().f1 == 1.0,
                "ROUGE-L self-score of {x}"
            );
            ensure!(
                bert_score(&embedder, x, x).unwrap().f1 == 1.0,
                "BERTScore self-score of {x}"
            );
        }
    }
    Ok("100 random pairs within 1e-12 of the brute-force oracles; self-scores exactly 1".into())
}

fn c7_wire() -> Outcome {
    let mock = MockBackend::default();
    let server = StubServer::start(mock.clone()).map_err(|e| e.to_string())?;
    let remote = RemoteBackend::new(&BackendConfig {
        backoff_secs: 0.01,
        ..BackendConfig::remote(server.url())
    })
    .map_err(|e| e.to_string())?;

    let texts = vec![
        "Ann will send the report.".to_string(),
        "Nice weather".to_string(),
    ];
    let params = SummaryParams::new(2, 5).unwrap();
    ensure!(
        remote.count_tokens_batch(&texts).unwrap() == mock.count_tokens_batch(&texts).unwrap(),
        "count_tokens differs"
    );
    ensure!(
        remote.embed_text(&texts[0]).unwrap() == mock.embed_text(&texts[0]).unwrap(),
        "text embedding differs"
    );
    ensure!(
        remote.embed_tokens(&texts[0]).unwrap() == mock.embed_tokens(&texts[0]).unwrap(),
        "token embeddings differ"
    );
    ensure!(
        remote.summarize("One two. Three.", params).unwrap()
            == mock.summarize("One two. Three.", params).unwrap(),
        "summary differs"
    );
    ensure!(
        remote.classify_batch(&texts).unwrap() == mock.classify_batch(&texts).unwrap(),
        "labels differ"
    );

    let expected_bodies = [
        (
            "/v1/count_tokens",
            r#"{"texts":["Ann will send the report.","Nice weather"]}"#,
            "count_tokens",
        ),
        (
            "/v1/embed",
            r#"{"texts":["Ann will send the report."],"granularity":"text"}"#,
            "embed",
        ),
        (
            "/v1/embed",
            r#"{"texts":["Ann will send the report."],"granularity":"tokens"}"#,
            "embed",
        ),
        (
            "/v1/summarize",
            r#"{"text":"One two. Three.","min_tokens":2,"max_tokens":5}"#,
            "summarize",
        ),
        (
            "/v1/classify",
            r#"{"sentences":["Ann will send the report.","Nice weather"]}"#,
            "classify",
        ),
    ];
    let log = server.requests();
    ensure!(
        log.len() == expected_bodies.len(),
        "{} requests recorded",
        log.len()
    );
    for (req, (path, body, name)) in log.iter().zip(expected_bodies) {
        ensure!(
            req.path == path && req.body == body,
            "request {} {} != {path} {body}",
            req.path,
            req.body
        );
        let request: serde_json::Value = serde_json::from_str(&req.body).unwrap();
        let errors = schema_errors(&format!("wire/{name}.request.json"), &request);
        ensure!(
            errors.is_empty(),
            "{name} request violates schema: {errors:?}"
        );
        let (status, response) = handle(&mock, &req.path, &req.body);
        ensure!(status == 200, "{name} answered {status}");
        let response: serde_json::Value = serde_json::from_str(&response).unwrap();
        let errors = schema_errors(&format!("wire/{name}.response.json"), &response);
        ensure!(
            errors.is_empty(),
            "{name} response violates schema: {errors:?}"
        );
    }

    server.clear_requests();
    server.fail_next(503, 2);
    let summary = remote
        .summarize("Retry me. Please.", params)
        .map_err(|e| format!("after two 503s: {e}"))?;
    ensure!(summary == "Retry me.", "summary after retries: {summary}");
    let log = server.requests();
    ensure!(
        log.len() == 3 && log.iter().all(|r| r == &log[0]),
        "retry log {log:?}"
    );

    server.clear_requests();
    server.fail_next(503, 3);
    match remote.summarize("Fail me.", params) {
        Err(Error::BackendUnavailable { attempts: 3, .. }) => {}
        other => {
            return Err(format!(
                "third 503: expected BackendUnavailable, got {other:?}"
            ))
        }
    }
    ensure!(
        server.requests().len() == 3,
        "{} attempts recorded",
        server.requests().len()
    );
    Ok("4 endpoints round-trip bit-exactly with schema-valid bodies; 2 retries on 503, BackendUnavailable on the third".into())
}

fn c8_grid() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("config.json");
    // Small limits so the toy transcripts split into several chunks and the
    // strategies produce different summaries.
    std::fs::write(
        &config,
        r#"{"backend":{"input_limit":60,"mock":{"summarizer":"halve-tokens"}},
            "pipeline":{"max_tokens":60,"summary_params":{"min_tokens":1,"max_tokens":20}}}"#,
    )
    .unwrap();
    let out = tmp.path().join("runs");
    let transcripts = fixture("toy_corpus/transcripts");
    let references = fixture("toy_corpus/references");
    let (code, _, err) = run_cli(&[
        "ablate",
        path_str(&transcripts),
        "--out",
        path_str(&out),
        "--config",
        path_str(&config),
    ]);
    ensure!(code == 0, "ablate exit {code}: {err}");
    let (code, json, err) = run_cli(&[
        "evaluate",
        path_str(&out),
        path_str(&references),
        "--format",
        "json",
    ]);
    ensure!(code == 0, "evaluate exit {code}: {err}");
    let value: serde_json::Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let errors = schema_errors("report.schema.json", &value);
    ensure!(errors.is_empty(), "report violates schema: {errors:?}");
    let report: GridReport = serde_json::from_value(value).map_err(|e| e.to_string())?;

    let grid = ConfigDescriptor::grid();
    let configs: Vec<ConfigDescriptor> = report.reports.iter().filter_map(|r| r.config).collect();
    ensure!(configs == grid, "report rows {configs:?}");

    // Hand-computed per-document scores from the brute-force oracles.
    let embedder = MockBackend::default();
    let mut distinct = std::collections::BTreeSet::new();
    for r in &report.reports {
        let d = r.config.unwrap();
        ensure!(
            r.documents.len() == 5,
            "{}: {} documents",
            d.dir_name(),
            r.documents.len()
        );
        let mut sums = [0.0f64; 4];
        for (id, scores) in &r.documents {
            let cand_text =
                std::fs::read_to_string(out.join(d.dir_name()).join(format!("{id}.txt"))).unwrap();
            let ref_text = std::fs::read_to_string(references.join(format!("{id}.txt"))).unwrap();
            let cand_tokens = rouge_words(&cand_text);
            let ref_tokens = rouge_words(&ref_text);
            let c: Vec<&str> = cand_tokens.iter().map(String::as_str).collect();
            let rf: Vec<&str> = ref_tokens.iter().map(String::as_str).collect();
            let oracle = [
                bert_score(&embedder, &cand_text, &ref_text).unwrap().f1,
                rouge_n_oracle(&c, &rf, 1).2,
                rouge_n_oracle(&c, &rf, 2).2,
                rouge_l_oracle(&c, &rf).2,
            ];
            let got = [
                scores.bertscore.f1,
                scores.rouge1.f1,
                scores.rouge2.f1,
                scores.rouge_l.f1,
            ];
            for k in 0..4 {
                ensure!(
                    (got[k] - oracle[k]).abs() < 1e-12,
                    "{} {id} metric {k}: {} vs {}",
                    d.dir_name(),
                    got[k],
                    oracle[k]
                );
                sums[k] += got[k];
            }
        }
        let mean = [
            r.mean.bertscore.f1,
            r.mean.rouge1.f1,
            r.mean.rouge2.f1,
            r.mean.rouge_l.f1,
        ];
        for k in 0..4 {
            ensure!(
                (mean[k] - sums[k] / 5.0).abs() < 1e-12,
                "{} mean {k}: {} vs {}",
                d.dir_name(),
                mean[k],
                sums[k] / 5.0
            );
        }
        distinct.insert(format!("{:.12}", mean[1]));
    }

    let (code, table, _) = run_cli(&["evaluate", path_str(&out), path_str(&references)]);
    ensure!(code == 0, "table exit {code}");
    let data_rows = table
        .lines()
        .filter(|l| Strategy::ALL.iter().any(|s| l.starts_with(s.title())))
        .filter(|l| {
            l.split_whitespace()
                .rev()
                .take(4)
                .all(|v| v.parse::<f64>().is_ok())
        })
        .count();
    ensure!(data_rows == 8, "table has {data_rows} data rows:\n{table}");
    ensure!(
        table.contains("General Summaries") && table.contains("Action-Item-Driven"),
        "table sections missing"
    );
    Ok(format!(
        "8 rows x 4 metrics over 5 documents; means equal hand-computed means to 1e-12; {} distinct ROUGE-1 means",
        distinct.len()
    ))
}

/// Lowercased alphanumeric runs, written independently of the library.
fn rouge_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
