//! Acceptance suite: nine criteria, each checked against an independent
//! oracle within its runtime budget. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use uti_core::eval::{bleu_n, build_report, classification_metrics, lcs_len, meteor_exact, rouge_l, tokenize};
use uti_core::forge::{
    diversity_score, prepare_trajectory, read_dataset, run_generation, write_dataset, FilterOrder, ForgeConfig,
    KnowledgeEntry, KnowledgeRecord, QuestionTemplatePool, Similarity, TrigramCosine,
};
use uti_core::fusion::{
    assemble_sequence, fuse_clip, instruction_ids, spatial_tokens, temporal_tokens, FusedSequence, FusionConfig,
    Modality, PatchGrid,
};
use uti_core::gateway::Gateway;
use uti_core::ingest::fixtures::{blob_audio, blob_clip, generate_fixture_set, BlobParams};
use uti_core::ingest::{kmeans_frames, kmeans_frames_restarts, load_clip, DiagnosticLabel, KMeansOptions, TaskLabel, UtiClip};
use uti_core::trajectory::{
    amplitude_filter, max_displacement, normalize_trajectory, reference_track, validate_region_order, AmplitudeDecision,
    CoordinateSpace, RegionAnnotation, RegionOrder, TrackerConfig, TrajectorySequence, TrajectorySource,
};
use utikit::manifest::hash_dir;
use utikit::stages::run_pipeline;
use utikit::{PipelineConfig, Stage};

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Result<String>,
}

fn shuffled(len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

fn max_abs_diff<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn pooling_algebra() -> Result<String> {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let (t, n, d) = (rng.random_range(1..=16), rng.random_range(1..=64), rng.random_range(1..=32));
        let x = Array3::from_shape_fn((t, n, d), |_| rng.random_range(-1.0..1.0));
        let y = Array3::from_shape_fn((t, n, d), |_| rng.random_range(-1.0..1.0));
        let grid = |a: Array3<f64>| PatchGrid::new(a, 1, (1, n)).expect("valid grid");
        let (z, tt) = (spatial_tokens(&grid(x.clone())), temporal_tokens(&grid(x.clone())));

        let fp = shuffled(t, &mut rng);
        let zf = spatial_tokens(&grid(x.select(Axis(0), &fp)));
        let e = max_abs_diff(&zf, &z);
        ensure!(e <= TOL, "case {case}: frame permutation moved z by {e:e}");
        worst = worst.max(e);

        let pp = shuffled(n, &mut rng);
        let tp = temporal_tokens(&grid(x.select(Axis(1), &pp)));
        let e = max_abs_diff(&tp, &tt);
        ensure!(e <= TOL, "case {case}: patch permutation moved t by {e:e}");
        worst = worst.max(e);

        for k in 0..d {
            let mut global = 0.0;
            for v in x.index_axis(Axis(2), k) {
                global += v;
            }
            global /= (t * n) as f64;
            let mz = z.column(k).iter().sum::<f64>() / n as f64;
            let mt = tt.column(k).iter().sum::<f64>() / t as f64;
            let e = (mz - global).abs().max((mt - global).abs());
            ensure!(e <= TOL, "case {case}: mean identity off by {e:e} in dim {k}");
            worst = worst.max(e);
        }

        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo = &x * a + &y * b;
        let gy = grid(y);
        let lhs_z = spatial_tokens(&grid(combo.clone()));
        let rhs_z = &z * a + &spatial_tokens(&gy) * b;
        let lhs_t = temporal_tokens(&grid(combo));
        let rhs_t = &tt * a + &temporal_tokens(&gy) * b;
        let e = max_abs_diff(&lhs_z, &rhs_z).max(max_abs_diff(&lhs_t, &rhs_t));
        ensure!(e <= TOL, "case {case}: linearity off by {e:e}");
        worst = worst.max(e);
    }
    Ok(format!("100 grids, worst deviation {worst:.1e}"))
}

fn random_raw_trajectory(rng: &mut ChaCha8Rng) -> TrajectorySequence {
    let p = rng.random_range(1..=4);
    let t = rng.random_range(2..=30);
    let frames = (0..t)
        .map(|_| (0..3 * p).map(|_| [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)]).collect())
        .collect();
    TrajectorySequence::new(frames, p, CoordinateSpace::RawPixels, TrajectorySource::Manual).expect("valid shape")
}

fn independent_max_displacement(traj: &TrajectorySequence) -> f64 {
    let mut best: f64 = 0.0;
    for frame in &traj.frames {
        for (p, o) in frame.iter().zip(&traj.frames[0]) {
            let (dx, dy) = (p[0] - o[0], p[1] - o[1]);
            best = best.max((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

fn normalization_laws() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let raw = random_raw_trajectory(&mut rng);
        let norm = normalize_trajectory(&raw)?;
        for axis in 0..2 {
            let vals: Vec<f64> = norm.frames.iter().flatten().map(|p| p[axis]).collect();
            ensure!(vals.iter().all(|v| (0.0..=1.0).contains(v)), "case {case}: value outside [0, 1]");
            ensure!(vals.contains(&0.0) && vals.contains(&1.0), "case {case}: axis {axis} does not attain 0 and 1");
        }

        let (sx, sy) = (rng.random_range(0.1..10.0), rng.random_range(0.1..10.0));
        let (cx, cy) = (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
        let mut moved = raw.clone();
        for p in moved.frames.iter_mut().flatten() {
            *p = [sx * p[0] + cx, sy * p[1] + cy];
        }
        let norm2 = normalize_trajectory(&moved)?;
        let e = max_abs_diff(
            norm.frames.iter().flatten().flatten(),
            norm2.frames.iter().flatten().flatten(),
        );
        ensure!(e <= 1e-9, "case {case}: affine rescaling changed output by {e:e}");
        worst = worst.max(e);

        let m = independent_max_displacement(&norm);
        let library_m = max_displacement(&norm)?;
        ensure!((library_m - m).abs() <= 1e-12, "case {case}: max displacement {library_m} vs {m}");
        let mut deltas: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.5)).collect();
        deltas.push(library_m);
        deltas.sort_by(f64::total_cmp);
        let mut dropped = false;
        for &delta in &deltas {
            let decision = amplitude_filter(&norm, delta)?;
            let expected = if delta == library_m { false } else { m > delta };
            ensure!(
                (decision == AmplitudeDecision::Keep) == expected,
                "case {case}: decision {decision:?} at delta {delta} with max displacement {m}"
            );
            ensure!(!(dropped && decision == AmplitudeDecision::Keep), "case {case}: keep after drop as delta grew");
            dropped |= decision == AmplitudeDecision::Drop;
        }
    }

    let frames = vec![vec![[0.0, 0.0]; 3], vec![[0.3, 0.4]; 3]];
    let tri = TrajectorySequence::new(frames, 1, CoordinateSpace::UnitNormalized, TrajectorySource::Manual)?;
    ensure!(amplitude_filter(&tri, 0.5)? == AmplitudeDecision::Drop, "3-4-5 case kept at delta 0.5");
    ensure!(amplitude_filter(&tri, 0.49)? == AmplitudeDecision::Keep, "3-4-5 case dropped at delta 0.49");
    Ok(format!("1000 trajectories, worst affine deviation {worst:.1e}; 3-4-5 boundary holds"))
}

/// Minimum within-cluster sum of squares over every split into two nonempty
/// groups.
fn exhaustive_two_means(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    // Fixing point 0 in group A enumerates each split once.
    for mask in 0u32..(1 << (n - 1)) {
        let in_b = |i: usize| i > 0 && mask >> (i - 1) & 1 == 1;
        let nb = (0..n).filter(|&i| in_b(i)).count();
        if nb == 0 {
            continue;
        }
        let mut sse = 0.0;
        for group in [false, true] {
            let members: Vec<&Vec<f64>> = (0..n).filter(|&i| in_b(i) == group).map(|i| &points[i]).collect();
            for j in 0..dim {
                let mean = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                sse += members.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(sse);
    }
    best
}

fn clustering_oracle() -> Result<String> {
    let options = KMeansOptions { max_iters: 300 };
    let restarts = 20;
    let mut clips = 0;
    let mut runs = 0;
    let mut within_five = 0;
    for frames in 2..=8 {
        for variant in 0..3u64 {
            let params = BlobParams {
                frames,
                height: 16,
                width: 16,
                sigma_x: 6.0,
                sigma_y: 2.0,
                start: (4.0 + variant as f64, 5.0),
                end: (11.0, 11.0 - variant as f64),
                ..BlobParams::default()
            };
            let id = format!("k{frames}-{variant}");
            let (clip, _) = blob_clip(&id, &params, 300 + variant, TaskLabel::Monophthong, DiagnosticLabel::Healthy)?;
            let points: Vec<Vec<f64>> = (0..frames).map(|t| clip.flat_frame(t)).collect();
            let optimum = exhaustive_two_means(&points);
            let reaches = |inertia: f64| (inertia - optimum).abs() <= 1e-9 * optimum.max(1.0);
            let seed = 17 * variant;
            let best = kmeans_frames_restarts(&clip, 2, seed, restarts, options)?;
            ensure!(reaches(best.inertia), "{id}: restarts reach {} but the optimum is {optimum}", best.inertia);
            within_five += usize::from(reaches(kmeans_frames_restarts(&clip, 2, seed, 5, options)?.inertia));
            for r in 0..restarts as u64 {
                let run = kmeans_frames(&clip, 2, seed + r, options)?;
                for w in run.inertia_history.windows(2) {
                    ensure!(w[1] <= w[0], "{id} seed {}: inertia rose from {} to {}", seed + r, w[0], w[1]);
                }
                runs += 1;
            }
            clips += 1;
        }
    }
    Ok(format!(
        "{clips} clips of 2..=8 frames reach the exhaustive optimum with {restarts} restarts \
         ({within_five}/{clips} with 5); {runs} runs monotone"
    ))
}

fn fixture_store(count: usize) -> Result<Vec<KnowledgeEntry>> {
    let texts = ["/a/", "/i/", "/u/", "/pa/", "/ta/", "/ka/", "the cat sat on the mat", "/e/"];
    let mut store = Vec::new();
    let mut i = 0u64;
    while store.len() < count {
        let params = BlobParams {
            start: (18.0 + (i % 7) as f64 * 2.0, 36.0 - (i % 5) as f64),
            end: (36.0 - (i % 3) as f64 * 3.0, 20.0 + (i % 4) as f64 * 2.0),
            ..BlobParams::default()
        };
        let diag = if i % 3 == 2 { DiagnosticLabel::Dysarthric } else { DiagnosticLabel::Healthy };
        let task = TaskLabel::Monophthong;
        let (clip, _) = blob_clip(&format!("clip{i:03}"), &params, i, task, diag)?;
        let raw = reference_track(&clip, &TrackerConfig::default())?;
        if let Some(traj) = prepare_trajectory(&raw, 0.05, FilterOrder::AfterNormalization)? {
            store.push(KnowledgeEntry {
                knowledge_id: format!("k{i:03}"),
                clip_id: clip.clip_id.clone(),
                record: KnowledgeRecord::new(traj, task.phonetic_type(), texts[i as usize % texts.len()], diag.as_str())?,
            });
        }
        i += 1;
        ensure!(i < 10 * count as u64, "too few clips pass the amplitude filter");
    }
    Ok(store)
}

fn diversity_contract() -> Result<String> {
    let store = fixture_store(20)?;
    let config = ForgeConfig::default();
    let (records, report) =
        run_generation(&config, 2024, &store, &QuestionTemplatePool::builtin(), &Gateway::mock(), &TrigramCosine)?;
    ensure!(records.len() == 60, "expected 60 records, got {} ({:?})", records.len(), report.exhaustions);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("dialogue.jsonl");
    write_dataset(&path, &records)?;
    let (_, back) = read_dataset(&path)?;
    let threshold = config.acceptance.threshold;
    let mut history: Vec<String> = Vec::new();
    let mut below = 0;
    let mut min_score = f64::INFINITY;
    for r in &back {
        let score = diversity_score(&r.question, &history, &TrigramCosine);
        ensure!(score == r.diversity_score, "{}: recorded {} but recomputed {score}", r.record_id, r.diversity_score);
        below += usize::from(score < threshold);
        min_score = min_score.min(score);
        history.push(r.question.clone());
    }
    ensure!(below == 0, "{below} records below threshold {threshold}");
    for r in &back {
        let dup = diversity_score(&r.question, std::slice::from_ref(&r.question), &TrigramCosine);
        ensure!(dup == 0.0, "duplicate of {} scores {dup}", r.record_id);
        ensure!(TrigramCosine.similarity(&r.question, &r.question) == 1.0, "self-similarity is not 1");
    }
    Ok(format!("60 records, 0 below {threshold}, minimum D(Q) {min_score:.4}; duplicates score 0"))
}

/// Every sequence over `{0, 1, 2}` of length at most `max_len`, shortest first.
fn all_sequences(max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..max_len {
        let next: Vec<Vec<u8>> = frontier
            .iter()
            .flat_map(|s| (0..3u8).map(move |c| [s.as_slice(), &[c]].concat()))
            .collect();
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Position of a sequence in [`all_sequences`] order.
fn sequence_code(s: &[u8]) -> usize {
    let offset = (3usize.pow(s.len() as u32) - 1) / 2;
    offset + s.iter().fold(0, |acc, &c| acc * 3 + c as usize)
}

/// Subsequences of `s` by mask.
fn subsequences(s: &[u8]) -> impl Iterator<Item = Vec<u8>> + '_ {
    (0u32..1 << s.len()).map(move |mask| (0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect())
}

/// True when symbols first appear in the order 0, 1, 2.
fn is_canonical(s: &[u8]) -> bool {
    let mut next = 0u8;
    for &c in s {
        if c > next {
            return false;
        }
        if c == next {
            next += 1;
        }
    }
    true
}

/// Compares the LCS dynamic program with exhaustive subsequence search for
/// every pair of sequences of length at most 8 over three symbols. The
/// dynamic program compares tokens only for equality, so pairs related by a
/// consistent relabeling of the alphabet share an answer; the first sequence
/// ranges over one representative per relabeling class and the second over
/// all 9841 sequences, which covers every class of pairs.
fn lcs_exhaustive() -> Result<usize> {
    const WORDS: [&str; 3] = ["a", "b", "c"];
    let all = all_sequences(8);
    ensure!(all.len() == 9841, "universe has {} sequences", all.len());
    let words: Vec<Vec<&str>> = all.iter().map(|s| s.iter().map(|&c| WORDS[c as usize]).collect()).collect();
    let n_words = all.len().div_ceil(64);
    let mut sub_bits = vec![0u64; all.len() * n_words];
    for (bi, b) in all.iter().enumerate() {
        debug_assert_eq!(sequence_code(b), bi);
        let row = &mut sub_bits[bi * n_words..(bi + 1) * n_words];
        for sub in subsequences(b) {
            let c = sequence_code(&sub);
            row[c / 64] |= 1 << (c % 64);
        }
    }
    let mut pairs = 0;
    for (ai, a) in all.iter().enumerate().filter(|(_, a)| is_canonical(a)) {
        let mut by_len: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); a.len() + 1];
        for sub in subsequences(a) {
            by_len[sub.len()].insert(sequence_code(&sub));
        }
        for (bi, b) in words.iter().enumerate() {
            let row = &sub_bits[bi * n_words..(bi + 1) * n_words];
            let exhaustive = (0..=a.len())
                .rev()
                .find(|&len| by_len[len].iter().any(|&c| row[c / 64] >> (c % 64) & 1 == 1))
                .expect("empty sequence is common");
            let dp = lcs_len(&words[ai], b);
            ensure!(dp == exhaustive, "LCS({a:?}, {:?}) = {dp}, exhaustive search gives {exhaustive}", all[bi]);
            pairs += 1;
        }
    }
    Ok(pairs)
}

fn metric_oracles() -> Result<String> {
    let t = tokenize;
    let close = |got: f64, want: f64, what: &str| -> Result<()> {
        ensure!((got - want).abs() <= 1e-4, "{what}: {got} vs {want}");
        Ok(())
    };
    let refs = vec![t("the tongue tip rises slowly")];
    let cand = t("the tongue tip rises");
    close(bleu_n(&cand, &refs, 1)?, (1.0f64 - 5.0 / 4.0).exp(), "BLEU-1 brevity")?;
    close(bleu_n(&cand, &refs, 1)?, 0.7788, "BLEU-1 published")?;
    for n in 1..=3 {
        close(bleu_n(&refs[0], &refs, n)?, 1.0, "BLEU identity")?;
        close(bleu_n(&t("x y z"), &refs, n)?, 0.0, "BLEU disjoint")?;
    }
    close(rouge_l(&t("a b c d"), &[t("a c b d")])?, 0.75, "ROUGE-L")?;
    close(rouge_l(&t("a b c d"), &[t("a b c d")])?, 1.0, "ROUGE-L identity")?;
    close(rouge_l(&t("a b"), &[t("c d")])?, 0.0, "ROUGE-L disjoint")?;
    close(meteor_exact(&t("tongue"), &[t("tongue")])?, 0.5, "METEOR single token")?;
    let (p, r) = (2.0 / 3.0, 1.0);
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    close(meteor_exact(&t("tongue rises slowly"), &[t("tongue rises")])?, fmean * (1.0 - 0.5 * 0.125), "METEOR")?;
    close(meteor_exact(&t("tongue rises slowly"), &[t("tongue rises")])?, 0.8929, "METEOR published")?;
    close(meteor_exact(&t("a b"), &[t("c d")])?, 0.0, "METEOR disjoint")?;

    let pairs = lcs_exhaustive()?;

    let mut rng = ChaCha8Rng::seed_from_u64(5005);
    for v in 0..500 {
        let n = rng.random_range(1..60);
        let gold: Vec<DiagnosticLabel> = (0..n)
            .map(|_| if rng.random_bool(0.4) { DiagnosticLabel::Dysarthric } else { DiagnosticLabel::Healthy })
            .collect();
        let pred: Vec<Option<DiagnosticLabel>> = (0..n)
            .map(|_| match rng.random_range(0..6) {
                0 => None,
                1 | 2 => Some(DiagnosticLabel::Dysarthric),
                _ => Some(DiagnosticLabel::Healthy),
            })
            .collect();
        let mut cells = [[0u32; 2]; 2];
        for (p, g) in pred.iter().zip(&gold) {
            let truth = usize::from(*g == DiagnosticLabel::Dysarthric);
            let said = match p {
                Some(l) => usize::from(*l == DiagnosticLabel::Dysarthric),
                None => 1 - truth,
            };
            cells[said][truth] += 1;
        }
        let (tp, fp, fn_, tn) = (cells[1][1] as f64, cells[1][0] as f64, cells[0][1] as f64, cells[0][0] as f64);
        let m = classification_metrics(&pred, &gold)?;
        ensure!(
            (m.confusion.tp, m.confusion.fp, m.confusion.fn_, m.confusion.tn)
                == (cells[1][1] as usize, cells[1][0] as usize, cells[0][1] as usize, cells[0][0] as usize),
            "vector {v}: confusion {:?} vs {cells:?}",
            m.confusion
        );
        let acc = (tp + tn) / n as f64;
        let f1 = if tp + fp + fn_ == 0.0 { 1.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        ensure!((m.accuracy - acc).abs() <= 1e-12 && (m.f1 - f1).abs() <= 1e-12, "vector {v}: {m:?}");
    }
    Ok(format!("hand examples within 1e-4; {pairs} LCS pairs match exhaustive search; 500 label vectors tally"))
}

#[derive(Deserialize)]
struct PublishedRow {
    method: String,
    scores: Vec<String>,
    average: String,
}

#[derive(Deserialize)]
struct PublishedTable {
    title: String,
    columns: Vec<String>,
    decimals: u32,
    rows: Vec<PublishedRow>,
}

/// Decimal numbers (digits, point, digits) in a LaTeX table line.
fn decimals_in(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in line.chars().chain(std::iter::once(' ')) {
        if ch.is_ascii_digit() || (ch == '.' && !cur.is_empty() && !cur.contains('.')) {
            cur.push(ch);
        } else {
            if cur.contains('.') && !cur.ends_with('.') {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    out
}

fn table_arithmetic() -> Result<String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(dir.join("tests/fixtures/published_tables.json"))?;
    let tables: Vec<PublishedTable> = serde_json::from_str(&text)?;
    let source_doc = std::fs::read_to_string(dir.join("../../paper.md")).ok();
    let mut rows = 0;
    for table in &tables {
        let columns: Vec<&str> = table.columns.iter().map(String::as_str).collect();
        let inputs: Vec<(&str, Vec<f64>)> = table
            .rows
            .iter()
            .map(|r| Ok((r.method.as_str(), r.scores.iter().map(|s| s.parse()).collect::<Result<Vec<f64>, _>>()?)))
            .collect::<Result<_>>()?;
        let report = build_report(&table.title, &columns, &inputs, table.decimals)?;
        for (row, published) in report.rows.iter().zip(&table.rows) {
            let got = format!("{:.*}", table.decimals as usize, row.average);
            ensure!(got == published.average, "{} / {}: average {got}, published {}", table.title, row.method, published.average);
            if let Some(doc) = &source_doc {
                let mut expected = published.scores.clone();
                expected.push(published.average.clone());
                ensure!(
                    doc.lines().any(|l| decimals_in(l) == expected),
                    "{} / {}: fixture row not found in the source tables",
                    table.title,
                    published.method
                );
            }
            rows += 1;
        }
    }
    let source = if source_doc.is_some() { ", fixture rows cross-checked with the source document" } else { "" };
    Ok(format!("{rows} published rows across {} tables reproduced{source}", tables.len()))
}

/// Final report bytes (JSON and text) and the output hash of every stage.
type RunArtifacts = (Vec<u8>, Vec<u8>, Vec<Option<String>>);

fn pipeline_once(root: &Path) -> Result<RunArtifacts> {
    let set = generate_fixture_set(root, 20, 77, &BlobParams::default())?;
    ensure!(set.entries.len() == 20, "fixture set has {} clips", set.entries.len());
    let mut config = PipelineConfig::new("manifest.jsonl", "work");
    config.ingest.seed = 77;
    config.forge.seed = 77;
    config.fusion.seed = 77;
    let path = root.join("utikit.toml");
    std::fs::write(&path, config.to_toml_string())?;
    let config = PipelineConfig::load(&path)?;
    let outcomes = run_pipeline(&config)?;
    let unparseable: usize = outcomes.iter().map(|o| o.unparseable).sum();
    ensure!(unparseable == 0, "{unparseable} unparseable responses");
    let work = config.work_dir();
    let hashes = Stage::ALL.iter().map(|s| hash_dir(&s.output_dir(&work))).collect::<Result<_, _>>()?;
    Ok((
        std::fs::read(work.join("eval/report.json")).context("report.json")?,
        std::fs::read(work.join("eval/report.txt")).context("report.txt")?,
        hashes,
    ))
}

fn end_to_end_determinism() -> Result<String> {
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    let first = pipeline_once(a.path())?;
    let second = pipeline_once(b.path())?;
    ensure!(first.0 == second.0, "report.json differs between runs");
    ensure!(first.1 == second.1, "report.txt differs between runs");
    for (stage, (x, y)) in Stage::ALL.iter().zip(first.2.iter().zip(&second.2)) {
        ensure!(x == y, "stage {stage} outputs differ between runs");
    }
    Ok(format!("20 clips, two runs; report.json ({} bytes) and every stage output identical", first.0.len()))
}

fn rmse_vertical(traj: &TrajectorySequence, centers: &[[f64; 2]]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (frame, c) in traj.frames.iter().zip(centers) {
        for p in frame {
            sum += (p[1] - c[1]).powi(2);
            n += 1;
        }
    }
    (sum / n as f64).sqrt()
}

fn annotation(xs: [f64; 3]) -> RegionAnnotation {
    RegionAnnotation { frame_index: 0, regions: xs.map(|x| vec![[x - 0.5, 1.0], [x + 0.5, 2.0]]) }
}

fn tracker_sanity() -> Result<String> {
    let dir = tempfile::tempdir()?;
    let set = generate_fixture_set(dir.path(), 20, 808, &BlobParams::default())?;
    let mut worst: f64 = 0.0;
    for (entry, truth) in set.entries.iter().zip(&set.ground_truth) {
        let clip: UtiClip = load_clip(entry, dir.path())?;
        let traj = reference_track(&clip, &TrackerConfig::default())?;
        let rmse = rmse_vertical(&traj, &truth.centers);
        ensure!(rmse <= 3.0, "{}: RMSE {rmse:.3} px", entry.clip_id);
        worst = worst.max(rmse);
        for f in 0..traj.num_frames() {
            let order = validate_region_order(&traj.annotation(f))?;
            ensure!(order.is_ok(), "{} frame {f}: {order:?}", entry.clip_id);
        }
    }
    let cases = [
        ([1.0, 2.0, 3.0], Vec::<(usize, usize)>::new()),
        ([5.0, 3.0, 4.0], vec![(1, 2), (1, 3)]),
        ([1.0, 4.0, 3.0], vec![(2, 3)]),
        ([3.0, 2.0, 1.0], vec![(1, 2), (1, 3), (2, 3)]),
        ([2.0, 2.0, 3.0], vec![(1, 2)]),
    ];
    for (xs, want) in cases {
        let got = validate_region_order(&annotation(xs))?;
        let expected = if want.is_empty() { RegionOrder::Ok } else { RegionOrder::Violations(want) };
        ensure!(got == expected, "region means {xs:?}: {got:?} vs {expected:?}");
    }
    Ok(format!("20 fixtures, worst RMSE {worst:.3} px, all frames ordered; 5 constructed orderings exact"))
}

fn ablation_plumbing() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let d_e = 16;
    let q_v = Array2::from_shape_fn((40, d_e), |_| rng.random_range(-1.0..1.0));
    let q_a = Array2::from_shape_fn((98, d_e), |_| rng.random_range(-1.0..1.0));
    let instr = instruction_ids("describe the tongue motion");
    let l = instr.len();
    let expected = [
        (Some(&q_v), Some(&q_a), Modality::Both, (l, l + 40), l + 138, vec!["instruction", "uti", "speech"]),
        (Some(&q_v), None, Modality::UtiOnly, (l, l + 40), l + 40, vec!["instruction", "uti"]),
        (None, Some(&q_a), Modality::SpeechOnly, (l, l), l + 98, vec!["instruction", "speech"]),
    ];
    for (v, a, mode, bounds, total, names) in expected {
        let seq = assemble_sequence(&instr, v, a)?;
        ensure!(seq.mode() == mode, "{mode:?}: got {:?}", seq.mode());
        ensure!(seq.boundaries() == bounds, "{mode:?}: boundaries {:?} vs {bounds:?}", seq.boundaries());
        ensure!(seq.total_len() == total, "{mode:?}: length {} vs {total}", seq.total_len());
        ensure!(seq.segment_names() == names, "{mode:?}: segments {:?}", seq.segment_names());
        ensure!(FusedSequence::from_bytes(&seq.to_bytes()?)? == seq, "{mode:?}: container round trip");
    }
    ensure!(assemble_sequence(&instr, None, None).is_err(), "no-modality sequence accepted");

    let (clip, truth) = blob_clip("ablate", &BlobParams::default(), 3, TaskLabel::Monophthong, DiagnosticLabel::Healthy)?;
    let audio = blob_audio(&truth);
    let base = FusionConfig::default();
    let weights = base.seeded_weights(9);
    for mode in [Modality::Both, Modality::UtiOnly, Modality::SpeechOnly] {
        let config = FusionConfig { modality: mode, ..base.clone() };
        let seq = fuse_clip(&clip, Some(&audio), &instr, &weights, &config)?;
        ensure!(seq.mode() == mode, "fuse_clip in {mode:?} produced {:?}", seq.mode());
        let (nv, na) = (seq.q_v.nrows(), seq.q_a.nrows());
        ensure!(seq.boundaries() == (l, l + nv) && seq.total_len() == l + nv + na, "fuse_clip {mode:?} layout");
        ensure!((mode == Modality::SpeechOnly) == (nv == 0), "fuse_clip {mode:?} uti rows {nv}");
        ensure!((mode == Modality::UtiOnly) == (na == 0), "fuse_clip {mode:?} speech rows {na}");
    }
    Ok("both, uti-only and speech-only sequences have the expected boundaries".into())
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "pooling algebra", budget: Some(Duration::from_secs(10)), check: pooling_algebra },
        Criterion { id: 2, name: "normalization and filter laws", budget: Some(Duration::from_secs(5)), check: normalization_laws },
        Criterion { id: 3, name: "clustering oracle", budget: Some(Duration::from_secs(10)), check: clustering_oracle },
        Criterion { id: 4, name: "diversity contract", budget: Some(Duration::from_secs(5)), check: diversity_contract },
        Criterion { id: 5, name: "metric oracles", budget: Some(Duration::from_secs(30)), check: metric_oracles },
        Criterion { id: 6, name: "published table arithmetic", budget: None, check: table_arithmetic },
        Criterion { id: 7, name: "end-to-end determinism", budget: Some(Duration::from_secs(120)), check: end_to_end_determinism },
        Criterion { id: 8, name: "tracker sanity", budget: None, check: tracker_sanity },
        Criterion { id: 9, name: "ablation plumbing", budget: None, check: ablation_plumbing },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|panic| Err(anyhow::anyhow!("panicked: {:?}", panic.downcast_ref::<String>())));
        let elapsed = start.elapsed();
        let verdict = match (&result, c.budget) {
            (Err(e), _) => Err(format!("{e:#}")),
            (Ok(_), Some(budget)) if elapsed > budget => Err(format!("took {elapsed:.2?}, budget {budget:?}")),
            (Ok(detail), _) => Ok(detail.clone()),
        };
        let budget = c.budget.map_or(String::new(), |b| format!(" / {b:?}"));
        match verdict {
            Ok(detail) => println!("PASS criterion {} ({}) [{elapsed:.2?}{budget}]: {detail}", c.id, c.name),
            Err(reason) => {
                failed += 1;
                println!("FAIL criterion {} ({}) [{elapsed:.2?}{budget}]: {reason}", c.id, c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
