//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use perfcast_cli::pipeline::{build_verdicts, compare_records, Detector};
use perfcast_cli::ToolConfig;
use perfcast_core::metrics::{count_dropped_frames, extract_metrics, ExtractParams, InteractionMetrics};
use perfcast_core::report::{compare_versions, emit_report, parse_report, Exclusion, InteractionVerdicts, ReportFormat, RunDrilldown};
use perfcast_core::synth::{
    evaluate_detection, evaluate_extraction, plan_paired_corpus, render_screencast, CorpusPlan, CorpusSpec,
    GroundTruth, InteractionSpec, LabelThresholds, MetricDeltas, TransitionStyle,
};
use perfcast_core::{
    cliffs_delta, wilcoxon_rank_sum, ActionType, Alternative, Decision, MetricFlag, MetricKind, RankSumMode,
    RegressionVerdict, SeverityBand,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 8] = [
        ("1 metric extraction accuracy", extraction_accuracy),
        ("2 rank-sum exact and approximate p-values", rank_sum_correctness),
        ("3 Cliff's delta", cliffs_delta_check),
        ("4 dropped-frame formula", dropped_frame_formula),
        ("5 perceptual gate", perceptual_gate),
        ("6 release gating", release_gating),
        ("7 report round-trip", report_round_trip),
        ("8 deterministic reports", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let r = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !r.pass {
            failed += 1;
        }
        println!(
            "{} [{name}] {} ({:.1}s)",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn interaction(id: &str, action: ActionType, response: f64, finish: f64, drops: &[(f64, u32)], delta: MetricDeltas) -> InteractionSpec {
    InteractionSpec {
        app_id: format!("app-{}", &id[..1]),
        scenario_id: "main".into(),
        interaction_id: id.into(),
        action_type: action,
        response_ms: response,
        finish_ms: finish,
        transition: TransitionStyle::Abrupt,
        drops: drops.to_vec(),
        delta,
    }
}

fn corpus_spec(seed: u64, interactions: Vec<InteractionSpec>) -> CorpusSpec {
    CorpusSpec {
        seed,
        runs_per_version: 20,
        base_label: "base".into(),
        updated_label: "updated".into(),
        jitter_ms: perfcast_core::synth::DEFAULT_JITTER_MS,
        noise_amplitude: perfcast_core::synth::DEFAULT_NOISE,
        width: 64,
        height: 64,
        refresh_hz: 60.0,
        tail_ms: 400.0,
        thresholds: LabelThresholds::default(),
        interactions,
    }
}

/// Render and analyze every planned run in memory.
fn run_plan(plan: &CorpusPlan, params: &ExtractParams) -> (Vec<InteractionMetrics>, GroundTruth) {
    let pairs: Vec<_> = plan
        .runs
        .par_iter()
        .map(|r| {
            let (sc, truth) = render_screencast(&r.scene, &r.meta).expect("valid scene");
            (extract_metrics(&sc, params).expect("extracts"), truth)
        })
        .collect();
    let (records, screencasts): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    (
        records,
        GroundTruth {
            base_version: "base".into(),
            updated_version: "updated".into(),
            screencasts,
            labels: plan.labels.clone(),
        },
    )
}

fn split(records: &[InteractionMetrics]) -> (Vec<InteractionMetrics>, Vec<InteractionMetrics>) {
    records.iter().cloned().partition(|r| r.os_version == "base")
}

fn extraction_accuracy() -> Outcome {
    let start = Instant::now();
    let d = MetricDeltas::default();
    let spec = corpus_spec(
        2024,
        vec![
            interaction("tap-open", ActionType::Tap, 137.3, 733.9, &[(300.0, 1)], MetricDeltas { finish_time: 300.0, ..d }),
            interaction("scroll-feed", ActionType::Scroll, 95.2, 512.8, &[], MetricDeltas { response_time: 150.0, ..d }),
            interaction("swipe-page", ActionType::Swipe, 211.7, 988.1, &[(60.0, 3)], d),
            interaction("draw-stroke", ActionType::Draw, 64.4, 1290.5, &[(700.0, 2), (1100.0, 1)], MetricDeltas { dropped_frames: 5, ..d }),
            interaction("launch-cold", ActionType::Launch, 180.0, 1523.6, &[(400.0, 4)], MetricDeltas { launch_time: 420.0, ..d }),
            interaction("launch-warm", ActionType::Launch, 250.0, 2104.2, &[], d),
        ],
    );
    let plan = plan_paired_corpus(&spec, 5).expect("plan");
    let params = ExtractParams {
        gap_tolerance: 0.0,
        ..Default::default()
    };
    let (records, truth) = run_plan(&plan, &params);
    let acc = evaluate_extraction(&records, &truth).expect("truth for every record");
    let elapsed = start.elapsed();
    let mut pass = records.len() >= 200 && elapsed <= Duration::from_secs(300);
    let mut parts = vec![format!("{} screencasts", records.len())];
    for m in MetricKind::ALL {
        let e = acc.per_metric[&m];
        let limit = if m == MetricKind::DroppedFrames { 0.2 } else { 16.7 };
        let ok = e.missed == 0 && e.count > 0 && e.mae.is_some_and(|v| v <= limit);
        pass &= ok;
        parts.push(format!(
            "{} MAE {} (n={}, limit {limit})",
            m.as_str(),
            e.mae.map_or("n/a".into(), |v| format!("{v:.3}")),
            e.count
        ));
    }
    outcome(pass, parts.join(", "))
}

/// Doubled midranks, computed pairwise.
fn doubled_ranks(pooled: &[f64]) -> Vec<u64> {
    pooled
        .iter()
        .map(|&x| {
            let less = pooled.iter().filter(|&&y| y < x).count() as u64;
            let equal = pooled.iter().filter(|&&y| y == x).count() as u64;
            2 * less + equal + 1
        })
        .collect()
}

/// p-value by enumerating every assignment of pooled ranks to `b`.
fn enumerate_p(a: &[f64], b: &[f64], alternative: Alternative) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_ranks(&pooled);
    let n = pooled.len();
    let obs: i64 = ranks[a.len()..].iter().sum::<u64>() as i64;
    let center = (b.len() * (n + 1)) as i64;
    let (mut hits, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != b.len() {
            continue;
        }
        let s: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i] as i64).sum();
        all += 1;
        hits += u64::from(match alternative {
            Alternative::BGreater => s >= obs,
            Alternative::TwoSided => (s - center).abs() >= (obs - center).abs(),
        });
    }
    hits as f64 / all as f64
}

fn rank_sum_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_exact = 0.0f64;
    let mut sizes = BTreeSet::new();
    for i in 0..500 {
        let (na, nb) = (1 + i % 7, 1 + (i / 7) % 7);
        sizes.insert((na, nb));
        let range = [3, 10, 100][i % 3];
        let a: Vec<f64> = (0..na).map(|_| f64::from(rng.gen_range(0..range))).collect();
        let b: Vec<f64> = (0..nb).map(|_| f64::from(rng.gen_range(0..range))).collect();
        for alt in [Alternative::BGreater, Alternative::TwoSided] {
            let got = wilcoxon_rank_sum(&a, &b, RankSumMode::Exact, alt).expect("exact").p_value;
            worst_exact = worst_exact.max((got - enumerate_p(&a, &b, alt)).abs());
        }
    }
    let mut worst_approx = 0.0f64;
    for _ in 0..500 {
        let mut pool: Vec<u32> = (0..1000).collect();
        let mut pick = |k: usize| -> Vec<f64> {
            (0..k)
                .map(|_| f64::from(pool.swap_remove(rng.gen_range(0..pool.len()))))
                .collect()
        };
        let a = pick(8);
        let b = pick(8);
        for alt in [Alternative::BGreater, Alternative::TwoSided] {
            let exact = wilcoxon_rank_sum(&a, &b, RankSumMode::Exact, alt).unwrap().p_value;
            let approx = wilcoxon_rank_sum(&a, &b, RankSumMode::Approximate, alt).unwrap().p_value;
            worst_approx = worst_approx.max((exact - approx).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_exact <= 1e-12 && worst_approx <= 0.02 && sizes.len() == 49 && elapsed <= Duration::from_secs(60),
        format!(
            "max |exact - enumeration| {worst_exact:.1e} over 500 datasets ({} size pairs), max |approx - exact| {worst_approx:.4} on 8+8",
            sizes.len()
        ),
    )
}

fn pair_count_delta(a: &[f64], b: &[f64]) -> f64 {
    let mut score = 0i64;
    for &x in b {
        for &y in a {
            score += i64::from(x > y) - i64::from(x < y);
        }
    }
    score as f64 / (a.len() * b.len()) as f64
}

fn cliffs_delta_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut mismatches, mut asymmetric) = (0, 0);
    for i in 0..1000 {
        let na = rng.gen_range(1..=30);
        let nb = rng.gen_range(1..=30);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if i % 2 == 0 { f64::from(rng.gen_range(0..20)) } else { rng.gen_range(-1e3..1e3) })
                .collect()
        };
        let a = draw(na);
        let b = draw(nb);
        let d = cliffs_delta(&a, &b).unwrap();
        if d != pair_count_delta(&a, &b) {
            mismatches += 1;
        }
        if d != -cliffs_delta(&b, &a).unwrap() {
            asymmetric += 1;
        }
    }
    outcome(
        mismatches == 0 && asymmetric == 0,
        format!("1000 pairs: {mismatches} differ from pair counting, {asymmetric} break antisymmetry"),
    )
}

fn dropped_frame_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut errors = 0;
    let mut injected = 0u64;
    for i in 0..1000 {
        let hz = [60.0, 60.0, 90.0, 120.0][i % 4];
        let period = 1000.0 / hz;
        let origin = if i % 3 == 0 { 0.0 } else { rng.gen_range(0.0..1000.0) };
        let slots = rng.gen_range(2..200u64);
        let mut shown = vec![0u64];
        let mut missed = 0u64;
        let mut s = 0u64;
        while s < slots {
            let skip = if rng.gen_bool(0.2) { rng.gen_range(1..12) } else { 0 };
            s += 1 + skip;
            missed += skip;
            shown.push(s);
        }
        injected += missed;
        let pts: Vec<f64> = shown.iter().map(|&k| origin + k as f64 * period).collect();
        if count_dropped_frames(&pts, hz, 0.0).unwrap() != missed {
            errors += 1;
        }
    }
    outcome(
        errors == 0,
        format!("1000 schedules, {injected} injected drops, {errors} schedules miscounted (gap tolerance 0)"),
    )
}

fn perceptual_gate() -> Outcome {
    let start = Instant::now();
    let cfg = ToolConfig::default();
    let params = cfg.extract_params();
    let d = MetricDeltas::default();

    // statistically clear shifts that stay under each perceptual threshold
    let subtle = corpus_spec(
        77,
        vec![
            interaction("a-rt1", ActionType::Tap, 120.0, 600.0, &[], MetricDeltas { response_time: 50.0, ..d }),
            interaction("a-rt2", ActionType::Scroll, 90.0, 450.0, &[], MetricDeltas { response_time: 60.0, ..d }),
            interaction("b-ft1", ActionType::Tap, 140.0, 1100.0, &[], MetricDeltas { finish_time: 50.0, ..d }),
            interaction("b-ft2", ActionType::Swipe, 100.0, 800.0, &[], MetricDeltas { finish_time: 120.0, ..d }),
            interaction("c-lt1", ActionType::Launch, 200.0, 1300.0, &[], MetricDeltas { launch_time: 100.0, ..d }),
            interaction("c-lt2", ActionType::Launch, 150.0, 1700.0, &[], MetricDeltas { launch_time: 150.0, ..d }),
            interaction("d-df1", ActionType::Draw, 80.0, 900.0, &[], MetricDeltas { dropped_frames: 2, ..d }),
            interaction("d-df2", ActionType::Tap, 110.0, 700.0, &[], MetricDeltas { dropped_frames: 3, ..d }),
        ],
    );
    let plan = plan_paired_corpus(&subtle, cfg.min_runs).unwrap();
    let injected: BTreeSet<(String, MetricKind)> = plan
        .labels
        .iter()
        .filter(|l| l.delta > 0.0)
        .map(|l| (l.interaction_id.clone(), l.metric))
        .collect();
    let (records, _) = run_plan(&plan, &params);
    let (base, updated) = split(&records);
    let flagged = |det| -> Vec<RegressionVerdict> {
        let vc = build_verdicts(&base, &updated, &cfg, det).unwrap();
        vc.verdicts().filter(|v| v.regressed).cloned().collect()
    };
    let perceptual_hits = flagged(Detector::Perceptual).len();
    let baseline_hits = flagged(Detector::Baseline)
        .iter()
        .filter(|v| injected.contains(&(v.interaction_id.clone(), v.metric)))
        .count();
    let baseline_share = baseline_hits as f64 / injected.len() as f64;

    // shifts of at least twice the threshold, mixed with unchanged interactions
    let clear = corpus_spec(
        78,
        vec![
            interaction("a-rt1", ActionType::Tap, 120.0, 700.0, &[], MetricDeltas { response_time: 200.0, ..d }),
            interaction("a-rt2", ActionType::Scroll, 90.0, 650.0, &[], MetricDeltas { response_time: 250.0, ..d }),
            interaction("b-ft1", ActionType::Tap, 140.0, 1100.0, &[], MetricDeltas { finish_time: 400.0, ..d }),
            interaction("b-ft2", ActionType::Swipe, 100.0, 800.0, &[], MetricDeltas { finish_time: 700.0, ..d }),
            interaction("c-lt1", ActionType::Launch, 200.0, 1300.0, &[], MetricDeltas { launch_time: 400.0, ..d }),
            interaction("c-lt2", ActionType::Launch, 150.0, 1700.0, &[], MetricDeltas { launch_time: 600.0, ..d }),
            interaction("d-df1", ActionType::Draw, 80.0, 900.0, &[], MetricDeltas { dropped_frames: 6, ..d }),
            interaction("d-df2", ActionType::Tap, 110.0, 700.0, &[], MetricDeltas { dropped_frames: 10, ..d }),
            interaction("e-n1", ActionType::Tap, 130.0, 900.0, &[(300.0, 2)], d),
            interaction("e-n2", ActionType::Scroll, 70.0, 1200.0, &[], d),
            interaction("e-n3", ActionType::Launch, 220.0, 1900.0, &[], d),
            interaction("e-n4", ActionType::Draw, 60.0, 1500.0, &[(800.0, 1)], d),
        ],
    );
    let plan = plan_paired_corpus(&clear, cfg.min_runs).unwrap();
    let (records, truth) = run_plan(&plan, &params);
    let (base, updated) = split(&records);
    let vc = build_verdicts(&base, &updated, &cfg, Detector::Perceptual).unwrap();
    let verdicts: Vec<RegressionVerdict> = vc.verdicts().cloned().collect();
    let acc = evaluate_detection(&verdicts, &truth.labels).unwrap();
    let precision = acc.overall.precision.unwrap_or(0.0);
    let recall = acc.overall.recall.unwrap_or(0.0);
    let elapsed = start.elapsed();
    outcome(
        perceptual_hits == 0
            && baseline_share > 0.5
            && recall >= 0.9
            && precision >= 0.95
            && vc.excluded.is_empty()
            && elapsed <= Duration::from_secs(600),
        format!(
            "below θ: perceptual flagged {perceptual_hits}, baseline flagged {baseline_hits}/{} ({:.0}%); at ≥2θ: precision {precision:.3}, recall {recall:.3}, exclusions {}",
            injected.len(),
            baseline_share * 100.0,
            vc.excluded.len()
        ),
    )
}

fn record(id: &str, os: &str, run: u32, finish: f64) -> InteractionMetrics {
    InteractionMetrics {
        screencast_id: format!("{os}/{id}/run_{run}"),
        interaction_id: id.to_string(),
        app_id: format!("app{}", &id[3..5]),
        scenario_id: "s".into(),
        action_type: ActionType::Tap,
        os_version: os.into(),
        run_index: run,
        response_time_ms: Some(100.0),
        finish_time_ms: Some(finish),
        launch_time_ms: None,
        dropped_frames: 0,
        flags: Default::default(),
        key_frames: None,
        corpus_path: None,
    }
}

fn release_gating() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut base = Vec::new();
    let mut updated = Vec::new();
    for i in 0..1000 {
        let id = format!("ix-{i:04}");
        let shift = if i % 66 == 0 && i / 66 < 15 { 500.0 } else { 0.0 };
        for run in 0..20 {
            base.push(record(&id, "base", run, 1000.0 + rng.gen_range(-8.0..8.0)));
            updated.push(record(&id, "updated", run, 1000.0 + shift + rng.gen_range(-8.0..8.0)));
        }
    }
    let mut details = Vec::new();
    let mut pass = true;
    for (tolerance, want) in [(0.02, Decision::Pass), (0.01, Decision::Fail), (0.0, Decision::Fail)] {
        let cfg = ToolConfig {
            tolerance,
            ..Default::default()
        };
        let r = compare_records(&base, &updated, &cfg, Detector::Perceptual).unwrap();
        pass &= r.decision == want && r.regressed_count() == 15 && r.regression_rate == 0.015;
        details.push(format!("tolerance {tolerance}: rate {} {:?}", r.regression_rate, r.decision));
    }

    let dir = tempfile::tempdir().unwrap();
    perfcast_cli::pipeline::write_metrics(&dir.path().join("base.jsonl"), &base).unwrap();
    perfcast_cli::pipeline::write_metrics(&dir.path().join("updated.jsonl"), &updated).unwrap();
    for (tolerance, want) in [("0.02", 0), ("0.01", 3), ("0", 3)] {
        let status = Command::new(env!("CARGO_BIN_EXE_perfcast"))
            .args(["compare", "--base", "base.jsonl", "--updated", "updated.jsonl", "--out", "r.json", "--tolerance", tolerance])
            .current_dir(dir.path())
            .output()
            .unwrap()
            .status
            .code();
        pass &= status == Some(want);
        details.push(format!("exit {} at {tolerance}", status.unwrap_or(-1)));
    }
    outcome(pass, format!("1000 interactions, 15 regressed; {}", details.join(", ")))
}

fn band() -> impl Strategy<Value = SeverityBand> {
    prop::sample::select(SeverityBand::ALL.to_vec())
}

fn real() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1e4..1e4f64,
        Just(0.1),
    ]
}

fn verdict_strategy() -> impl Strategy<Value = (MetricKind, [f64; 6], bool, SeverityBand, SeverityBand, (usize, usize))> {
    (
        prop::sample::select(MetricKind::ALL.to_vec()),
        [real(), real(), real(), real(), real(), real()],
        any::<bool>(),
        band(),
        band(),
        (0usize..100, 0usize..100),
    )
}

fn drilldown_strategy() -> impl Strategy<Value = RunDrilldown> {
    (
        "[a-z]{1,8}",
        any::<u32>(),
        prop::option::of(0usize..1000),
        prop::option::of(0usize..1000),
        prop::option::of(real()),
        prop::option::of(real()),
        prop::collection::btree_set(prop::sample::select(vec![MetricFlag::NoVisualResponse, MetricFlag::UnstableTail]), 0..3),
        prop::option::of("[a-z/_0-9]{1,20}"),
    )
        .prop_map(|(os, run, ri, fi, rp, fp, flags, path)| RunDrilldown {
            os_version: os,
            run_index: run,
            response_index: ri,
            finish_index: fi,
            response_pts_ms: rp,
            finish_pts_ms: fp,
            flags: flags.into_iter().collect(),
            corpus_path: path,
        })
}

fn group_strategy() -> impl Strategy<Value = InteractionVerdicts> {
    (
        "\\PC{1,12}",
        "[a-z]{1,6}",
        "\\PC{0,8}",
        prop::sample::select(vec![ActionType::Tap, ActionType::Scroll, ActionType::Swipe, ActionType::Draw, ActionType::Launch]),
        prop::collection::vec(verdict_strategy(), 1..4),
        prop::collection::vec(drilldown_strategy(), 0..3),
    )
        .prop_map(|(id, app, scenario, action, vs, drilldown)| InteractionVerdicts {
            verdicts: vs
                .into_iter()
                .map(|(metric, x, regressed, sb, su, sizes)| RegressionVerdict {
                    interaction_id: id.clone(),
                    metric,
                    p_value: x[0],
                    cliffs_delta: x[1],
                    median_base: x[2],
                    median_updated: x[3],
                    median_diff: x[4],
                    theta: x[5],
                    regressed,
                    severity_base: sb,
                    severity_updated: su,
                    sample_sizes: sizes,
                })
                .collect(),
            interaction_id: id,
            app_id: app,
            scenario_id: scenario,
            action_type: action,
            drilldown,
        })
}

fn report_round_trip() -> Outcome {
    let strategy = (
        "\\PC{1,10}",
        "\\PC{1,10}",
        prop::collection::vec(group_strategy(), 1..12),
        0.0..=1.0f64,
        prop::collection::vec(("\\PC{1,10}", prop::option::of(prop::sample::select(MetricKind::ALL.to_vec())), "\\PC{0,30}"), 0..4),
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let mut runner = TestRunner::new(Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    });
    let cases = std::cell::Cell::new(0);
    let result = runner.run(&strategy, |(base, upd, mut groups, tolerance, excluded)| {
        let mut seen = BTreeSet::new();
        groups.retain(|g| seen.insert(g.interaction_id.clone()));
        let mut report = compare_versions(&base, &upd, groups, tolerance).unwrap();
        report.excluded = excluded
            .into_iter()
            .map(|(interaction_id, metric, reason)| Exclusion {
                interaction_id,
                metric,
                reason,
            })
            .collect();
        emit_report(&report, ReportFormat::Structured, &path).unwrap();
        let back = parse_report(&path).unwrap();
        cases.set(cases.get() + 1);
        // bitwise float comparison via the serialized form, plus structural equality
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(
            perfcast_core::report::to_json(&back),
            perfcast_core::report::to_json(&report)
        );
        Ok(())
    });
    match result {
        Ok(()) => outcome(cases.get() >= 200, format!("{} randomized reports reproduced exactly", cases.get())),
        Err(e) => outcome(false, format!("after {} cases: {e}", cases.get())),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = r#"
seed = 3
runs_per_version = 6
width = 48
height = 48

[[interactions]]
app_id = "cam"
scenario_id = "shoot"
interaction_id = "cam-shutter"
action_type = "tap"
response_ms = 90.0
finish_ms = 700.0
drops = [[300.0, 2]]
delta = { finish_time = 450.0 }

[[interactions]]
app_id = "cam"
scenario_id = "start"
interaction_id = "cam-launch"
action_type = "launch"
response_ms = 150.0
finish_ms = 1250.0

[[interactions]]
app_id = "web"
scenario_id = "read"
interaction_id = "web-scroll"
action_type = "scroll"
response_ms = 60.0
finish_ms = 480.0
delta = { response_time = 40.0, dropped_frames = 4 }
"#;
    fs::write(d.join("spec.toml"), spec).unwrap();
    let run = |args: &[&str]| -> i32 {
        Command::new(env!("CARGO_BIN_EXE_perfcast"))
            .args(args)
            .current_dir(d)
            .output()
            .unwrap()
            .status
            .code()
            .unwrap_or(-1)
    };
    if run(&["synth", "--spec", "spec.toml", "--out", "corpus"]) != 0 {
        return outcome(false, "synth failed");
    }
    let pipeline = |tag: &str, jobs: &str| -> Vec<i32> {
        let mut codes = Vec::new();
        for v in ["base", "updated"] {
            let out = format!("{tag}-{v}.jsonl");
            codes.push(run(&["extract", "--corpus", "corpus", "--os-version", v, "--out", &out, "--jobs", jobs]));
        }
        let (b, u, r) = (format!("{tag}-base.jsonl"), format!("{tag}-updated.jsonl"), format!("{tag}.json"));
        codes.push(run(&["compare", "--base", &b, "--updated", &u, "--out", &r, "--format", "both", "--jobs", jobs]));
        codes
    };
    let first = pipeline("one", "1");
    let second = pipeline("two", "4");
    let same = |a: &str, b: &str| fs::read(d.join(a)).ok().is_some_and(|x| Some(x) == fs::read(d.join(b)).ok());
    let identical = same("one.json", "two.json") && same("one.html", "two.html");
    let non_empty = fs::metadata(d.join("one.json")).map(|m| m.len() > 0).unwrap_or(false);
    outcome(
        identical && non_empty && first == second && first[..2] == [0, 0],
        format!(
            "exit codes {first:?} / {second:?}; structured and HTML reports {}",
            if identical { "byte-identical" } else { "differ" }
        ),
    )
}
