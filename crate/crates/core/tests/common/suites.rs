//! Full-size checks shared by the per-module tests (at reduced sizes) and
//! the acceptance runner. Each returns a one-line summary or the first
//! violation found.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use titlemeta::embeddings::EmbeddingTable;
use titlemeta::rule_engine::{compose_labels, sample_rule, trace_rule, RetentionMode, RuleSampling};
use titlemeta::segment_mapper::{map_segments, sample_mapping_params, MappingParams};
use titlemeta::segmenter::{segment, Segmentation};
use titlemeta::synth::{default_grammars, synth_products, synth_queries};
use titlemeta::task_dataset::{empirical_threshold_range, group_products};
use titlemeta::text_norm::normalize;
use titlemeta::{MknModel, TokenSequence};

use super::oracle::{rel_close, OracleLm};
use super::random_corpus;

pub type Outcome = Result<String, String>;

fn within(elapsed: Duration, limit: Duration) -> std::result::Result<(), String> {
    if elapsed > limit {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    } else {
        Ok(())
    }
}

pub fn synth_lm(lines: usize) -> MknModel {
    let corpus: Vec<TokenSequence> = synth_queries(&default_grammars(), lines, 3)
        .iter()
        .map(|q| normalize(q).unwrap())
        .collect();
    MknModel::train(&corpus, Default::default()).unwrap()
}

pub fn synth_catalog(per_category: usize) -> Vec<(String, TokenSequence)> {
    synth_products(&default_grammars(), per_category, 5)
        .into_iter()
        .map(|p| {
            let t = normalize(&p.title).unwrap();
            (p.category, t)
        })
        .collect()
}

/// Random title over the model vocabulary plus a few unseen tokens.
pub fn random_title(model: &MknModel, rng: &mut ChaCha8Rng, max_len: usize) -> Vec<String> {
    let vocab = model.vocab().tokens();
    let len = rng.random_range(1..=max_len);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.1) {
                format!("zz{}", rng.random_range(0..5))
            } else {
                vocab[rng.random_range(2..vocab.len())].clone()
            }
        })
        .collect()
}

/// Random valid segment ids for `n` tokens.
pub fn random_ids(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut ids = vec![1];
    for _ in 1..n {
        let last = *ids.last().unwrap();
        ids.push(if rng.random_bool(0.5) { last + 1 } else { last });
    }
    ids
}

// ---------------------------------------------------------------- n-gram LM

pub fn mkn_oracle_suite(corpora: u64) -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst_norm = 0f64;
    for seed in 0..corpora {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let vocab = rng.random_range(2..=30);
        let n_lines = rng.random_range(1..=50);
        let lines = random_corpus(seed, vocab, n_lines);
        let model = super::train(&lines);
        let oracle = OracleLm::new(&lines);
        let words = oracle.words();

        let mut contexts: Vec<Vec<&str>> = vec![vec![], vec!["<s>"], vec!["<s>", "<s>"], vec!["nope"]];
        for v in &words {
            contexts.push(vec![v.as_str()]);
            contexts.push(vec!["<s>", v.as_str()]);
            contexts.push(vec!["nope", v.as_str()]);
            for u in &words {
                if oracle.bigram_count(u, v) > 0 {
                    contexts.push(vec![u.as_str(), v.as_str()]);
                }
            }
        }
        for ctx in &contexts {
            let mut total = 0.0;
            for w in words.iter().map(String::as_str).chain(["never-seen"]) {
                let got = model.prob(w, ctx);
                let want = oracle.prob(w, ctx);
                if !rel_close(got, want, 1e-9) {
                    return Err(format!("corpus {seed}: P({w} | {ctx:?}) = {got}, oracle {want}"));
                }
                checked += 1;
                if w != "never-seen" {
                    total += got;
                }
            }
            worst_norm = worst_norm.max((total - 1.0).abs());
            if (total - 1.0).abs() > 1e-6 {
                return Err(format!("corpus {seed}: context {ctx:?} sums to {total}"));
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{corpora} corpora, {checked} probabilities, max |sum-1| = {worst_norm:.1e}, {:.2?}",
        start.elapsed()
    ))
}

// ------------------------------------------------------------ segmentation

fn check_segmentation(tokens: &[String], seg: &Segmentation) -> std::result::Result<(), String> {
    if seg.ids.len() != tokens.len() || seg.ids[0] != 1 {
        return Err(format!("bad ids {:?}", seg.ids));
    }
    for w in seg.ids.windows(2) {
        if w[1] != w[0] && w[1] != w[0] + 1 {
            return Err(format!("non-contiguous ids {:?}", seg.ids));
        }
    }
    let rebuilt: Vec<String> = seg.spans.iter().flat_map(|s| tokens[s.clone()].to_vec()).collect();
    if rebuilt != tokens {
        return Err(format!("spans {:?} do not rebuild {tokens:?}", seg.spans));
    }
    for (j, span) in seg.spans.iter().enumerate() {
        if span.is_empty() || seg.ids[span.clone()].iter().any(|&id| id != j + 1) {
            return Err(format!("span {j} disagrees with ids {:?}", seg.ids));
        }
    }
    if seg.log_scores.len() != seg.spans.len() {
        return Err("one score per segment expected".into());
    }
    Ok(())
}

/// Join decisions recomputed from public probabilities.
fn check_decisions(model: &MknModel, tokens: &[String], alpha: f64, t: f64, seg: &Segmentation) -> std::result::Result<(), String> {
    for i in 1..tokens.len() {
        let p = model.prob(&tokens[i], &[] as &[&str]);
        let left2 = 2f64.powf(alpha) * model.sequence_prob(&tokens[i - 1..=i]).unwrap();
        let left = if i >= 2 {
            left2.max(3f64.powf(alpha) * model.sequence_prob(&tokens[i - 2..=i]).unwrap())
        } else {
            left2
        };
        let det = p - left;
        if (det - t).abs() <= 1e-12 {
            continue;
        }
        let joined = seg.ids[i] == seg.ids[i - 1];
        if joined != (det <= t) {
            return Err(format!("token {i} of {tokens:?}: det {det} vs t {t}, joined {joined}"));
        }
    }
    Ok(())
}

pub fn segmentation_suite(titles: usize, mono_titles: usize) -> Outcome {
    let model = synth_lm(20_000);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..titles {
        let tokens = random_title(&model, &mut rng, 12);
        let alpha = rng.random_range(-1.0..=1.0);
        let t = rng.random_range(-0.02..=0.02);
        let seg = segment(&model, &tokens, alpha, t).map_err(|e| e.to_string())?;
        check_segmentation(&tokens, &seg)?;
        check_decisions(&model, &tokens, alpha, t, &seg)?;

        let all = segment(&model, &tokens, alpha, 1e9).unwrap();
        if all.ids != vec![1; tokens.len()] {
            return Err(format!("t=+1e9 gave {:?}", all.ids));
        }
        let none = segment(&model, &tokens, alpha, -1e9).unwrap();
        if none.ids != (1..=tokens.len()).collect::<Vec<_>>() {
            return Err(format!("t=-1e9 gave {:?}", none.ids));
        }
    }
    let grid: Vec<f64> = std::iter::once(-1e9)
        .chain((0..=40).map(|i| -0.03 + 0.0015 * i as f64))
        .chain(std::iter::once(1e9))
        .collect();
    for _ in 0..mono_titles {
        let tokens = random_title(&model, &mut rng, 12);
        let alpha = rng.random_range(-1.0..=1.0);
        let counts: Vec<usize> = grid
            .iter()
            .map(|&t| segment(&model, &tokens, alpha, t).unwrap().num_segments())
            .collect();
        if counts.windows(2).any(|w| w[1] > w[0]) {
            return Err(format!("segment count rises with t on {tokens:?}: {counts:?}"));
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{titles} titles, {mono_titles} monotonicity sweeps, {:.2?}", start.elapsed()))
}

// ----------------------------------------------------------------- mapping

/// Labels recomputed from the feature definition, or `None` when two
/// projections are too close to call.
pub fn oracle_labels(
    tokens: &[String],
    seg: &Segmentation,
    model: &MknModel,
    table: &EmbeddingTable,
    params: &MappingParams,
) -> Option<Vec<usize>> {
    let proj: Vec<f64> = seg
        .spans
        .iter()
        .enumerate()
        .map(|(c, span)| {
            let rows = table.embed(&tokens[span.clone()]);
            let d = table.dim();
            let mean: Vec<f64> = (0..d)
                .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64)
                .collect();
            let a0: f64 = (0..d).map(|k| mean[k] * params.theta_a[k][0]).sum();
            let a1: f64 = (0..d).map(|k| mean[k] * params.theta_a[k][1]).sum();
            let lik = (span.len() as f64).powf(params.alpha) * model.sequence_prob(&tokens[span.clone()]).unwrap();
            let f = [a0, a1, lik, (c + 1) as f64];
            (0..4).map(|k| f[k] * params.theta_b[k]).sum()
        })
        .collect();
    let k = proj.len();
    let mut labels = Vec::with_capacity(k);
    for c in 0..k {
        for o in 0..k {
            if o != c && (proj[o] != proj[c]) && rel_close(proj[o], proj[c], 1e-9) {
                return None;
            }
        }
        let ahead = (0..k)
            .filter(|&o| proj[o] > proj[c] || (proj[o] == proj[c] && o < c))
            .count();
        labels.push((ahead + 1).min(params.buckets));
    }
    Some(labels)
}

pub fn mapping_suite(cases: usize) -> Outcome {
    let model = synth_lm(20_000);
    let table = EmbeddingTable::hashed(16, 4).unwrap();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut close_calls = 0;
    for case in 0..cases {
        let tokens = random_title(&model, &mut rng, 14);
        let ids = random_ids(tokens.len(), &mut rng);
        let alpha = rng.random_range(-1.0..=1.0);
        let seg = Segmentation::from_ids(&model, &tokens, ids, alpha).unwrap();
        let buckets = rng.random_range(1..=12);
        let params = sample_mapping_params(16, buckets, (-1.0, 1.0), case as u64).unwrap();
        let map = map_segments(&tokens, &seg, &model, &table, &params).map_err(|e| e.to_string())?;

        let k = seg.num_segments();
        let mut sorted = map.segment_labels.clone();
        sorted.sort_unstable();
        let expect: Vec<usize> = (1..=k).map(|r| r.min(buckets)).collect();
        if sorted != expect {
            return Err(format!("k={k}, B={buckets}: labels {:?}", map.segment_labels));
        }
        let per_token: Vec<usize> = seg.ids.iter().map(|&id| map.segment_labels[id - 1]).collect();
        if per_token != map.labels {
            return Err("token labels disagree with segment labels".into());
        }
        if map_segments(&tokens, &seg, &model, &table, &params).unwrap() != map {
            return Err("mapping is not deterministic".into());
        }
        match oracle_labels(&tokens, &seg, &model, &table, &params) {
            Some(want) if want != map.segment_labels => {
                return Err(format!("labels {:?}, oracle {want:?}", map.segment_labels));
            }
            Some(_) => {}
            None => close_calls += 1,
        }
        let scale = 10f64.powf(rng.random_range(-3.0..=3.0));
        let mut scaled = params.clone();
        scaled.theta_b.iter_mut().for_each(|w| *w *= scale);
        if oracle_labels(&tokens, &seg, &model, &table, &scaled).is_some() {
            let m2 = map_segments(&tokens, &seg, &model, &table, &scaled).unwrap();
            if m2.labels != map.labels {
                return Err(format!("scaling theta_b by {scale} changed labels"));
            }
        }
    }

    // three segments, twenty parameter draws: some ordering must differ
    let tokens: Vec<String> = "tide free and clear liquid detergent 92 fl oz"
        .split(' ')
        .map(String::from)
        .collect();
    let seg = Segmentation::from_ids(&model, &tokens, vec![1, 2, 2, 2, 3, 3, 3, 3, 3], 0.0).unwrap();
    let orders: Vec<Vec<usize>> = (0..20)
        .map(|s| {
            let p = sample_mapping_params(16, 12, (-1.0, 1.0), s).unwrap();
            map_segments(&tokens, &seg, &model, &table, &p).unwrap().segment_labels
        })
        .collect();
    let distinct = {
        let mut o = orders.clone();
        o.sort();
        o.dedup();
        o.len()
    };
    if distinct < 2 {
        return Err(format!("20 seeds gave one ordering {:?}", orders[0]));
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{cases} maps ({close_calls} near-ties skipped), {distinct} distinct orderings over 20 seeds, {:.2?}",
        start.elapsed()
    ))
}

// ------------------------------------------------------------------- rules

fn sampling(t_range: (f64, f64), buckets: usize) -> RuleSampling {
    RuleSampling {
        dim: 16,
        buckets,
        alpha_range: (-1.0, 1.0),
        t_range,
        modes: RetentionMode::EVERY.to_vec(),
    }
}

pub fn rule_suite(eq2: usize, applied: usize, pairs: usize) -> Outcome {
    let model = synth_lm(20_000);
    let table = EmbeddingTable::hashed(16, 4).unwrap();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);

    for _ in 0..eq2 {
        let tokens = random_title(&model, &mut rng, 12);
        let ids = random_ids(tokens.len(), &mut rng);
        let seg = Segmentation::from_ids(&model, &tokens, ids.clone(), 0.0).unwrap();
        let k = seg.num_segments();
        let r: Vec<u8> = (0..k).map(|_| rng.random_range(0..=1)).collect();
        let masks: Vec<Vec<u8>> = seg
            .spans
            .iter()
            .map(|s| (0..s.len()).map(|_| rng.random_range(0..=1)).collect())
            .collect();
        let got = compose_labels(&seg, &r, &masks).map_err(|e| e.to_string())?;
        let mut want = Vec::new();
        let mut offset = 0;
        for (i, &id) in ids.iter().enumerate() {
            if i > 0 && id != ids[i - 1] {
                offset = 0;
            }
            want.push(masks[id - 1][offset] * r[id - 1]);
            offset += 1;
        }
        if got.as_slice() != want.as_slice() {
            return Err(format!("compose {:?} != per-token product {want:?}", got.as_slice()));
        }
    }

    let catalog = synth_catalog(60);
    let products: Vec<&TokenSequence> = catalog.iter().map(|(_, t)| t).collect();
    let t_range = empirical_threshold_range(&model, &products, (-1.0, 1.0), (5.0, 95.0));
    for n in 0..applied {
        let (category, product) = &catalog[rng.random_range(0..catalog.len())];
        let cfg = sampling(t_range, rng.random_range(1..=12));
        let rule = sample_rule(category, n as u64, &cfg).unwrap();
        let tr = trace_rule(&rule, product, &model, &table).map_err(|e| e.to_string())?;
        if tr.labels.ones_count() == 0 {
            return Err(format!("rule {n} keeps nothing of {:?}", product.tokens));
        }
    }

    let groups = group_products(
        &synth_products(&default_grammars(), 60, 5),
    )
    .unwrap();
    let cats: Vec<&Vec<TokenSequence>> = groups.values().collect();
    let mut compared = 0;
    for n in 0..pairs {
        let items = cats[rng.random_range(0..cats.len())];
        let a = &items[rng.random_range(0..items.len())];
        let b = &items[rng.random_range(0..items.len())];
        let cfg = sampling(t_range, rng.random_range(1..=12));
        let rule = sample_rule("pair", 50_000 + n as u64, &cfg).unwrap();
        let ta = trace_rule(&rule, a, &model, &table).unwrap();
        let tb = trace_rule(&rule, b, &model, &table).unwrap();
        let free = |t: &titlemeta::rule_engine::RuleTrace| {
            let best = t.segmentation.best_segment();
            (0..t.segmentation.num_segments())
                .filter(move |&j| j != best)
                .map(|j| (j, t.map.segment_labels[j], t.retained[j]))
                .collect::<Vec<_>>()
        };
        for &(_, la, ra) in &free(&ta) {
            if ra != rule.retains(la) {
                return Err(format!("segment with label {la} ignores the rule table"));
            }
            for &(_, lb, rb) in &free(&tb) {
                if la == lb {
                    compared += 1;
                    if ra != rb {
                        return Err(format!("label {la} kept {ra} in one product and {rb} in the other"));
                    }
                }
            }
        }
        for (t, p) in [(&ta, a), (&tb, b)] {
            for (j, span) in t.segmentation.spans.iter().enumerate() {
                if t.retained[j] == 0 && t.labels.as_slice()[span.clone()].iter().any(|&x| x != 0) {
                    return Err(format!("dropped segment {j} of {:?} kept a token", p.tokens));
                }
            }
        }
    }
    Ok(format!(
        "{eq2} compose instances, {applied} applied rules non-empty, {pairs} pairs ({compared} equal-label comparisons), {:.2?}",
        start.elapsed()
    ))
}

// --------------------------------------------------------------- pipelines

pub fn run_cli(bin: &str, args: &[&str], dir: &Path) -> std::result::Result<String, String> {
    let out = Command::new(bin)
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`{}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn timed(bin: &str, args: &[&str], dir: &Path) -> std::result::Result<Duration, String> {
    let start = Instant::now();
    run_cli(bin, args, dir)?;
    Ok(start.elapsed())
}

pub fn pipeline_once(bin: &str, dir: &Path) -> std::result::Result<(Duration, Duration), String> {
    run_cli(bin, &["synth-catalog", "--out-dir", "cat", "--queries", "100000", "--seed", "17"], dir)?;
    let lines = std::fs::read_to_string(dir.join("cat/queries.txt")).map_err(|e| e.to_string())?.lines().count();
    if lines != 100_000 {
        return Err(format!("corpus has {lines} lines"));
    }
    let train = timed(bin, &["train-lm", "--corpus", "cat/queries.txt", "--out", "lm.bin"], dir)?;
    let gen = timed(
        bin,
        &[
            "gen-tasks", "--lm", "lm.bin", "--products", "cat/products_train.jsonl", "--pairs", "625",
            "--rules-per-pair", "4", "--seed", "3", "--out", "tasks.jsonl",
        ],
        dir,
    )?;
    run_cli(bin, &["protonet-eval", "--dataset", "tasks.jsonl", "--out", "metrics.json", "--pred", "pred.jsonl"], dir)?;
    Ok((train, gen))
}

pub fn pipeline_determinism(bin: &str, root: &Path) -> Outcome {
    let a = root.join("a");
    let b = root.join("b");
    for d in [&a, &b] {
        std::fs::create_dir_all(d).map_err(|e| e.to_string())?;
    }
    let (train_a, gen_a) = pipeline_once(bin, &a)?;
    let (train_b, gen_b) = pipeline_once(bin, &b)?;
    for f in ["cat/queries.txt", "lm.bin", "tasks.jsonl", "metrics.json", "pred.jsonl"] {
        let x = std::fs::read(a.join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(f)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{f} differs between runs"));
        }
    }
    let rows = std::fs::read_to_string(a.join("tasks.jsonl")).unwrap().lines().count();
    if rows < 10_000 {
        return Err(format!("only {rows} rows generated"));
    }
    let train = train_a.max(train_b);
    let gen = gen_a.max(gen_b);
    within(train, Duration::from_secs(60)).map_err(|e| format!("train-lm {e}"))?;
    within(gen, Duration::from_secs(30)).map_err(|e| format!("gen-tasks {e}"))?;
    Ok(format!("{rows} rows byte-identical, train-lm {train:.2?}, gen-tasks {gen:.2?}"))
}

/// Held-out-category protonet score against the keep-everything baseline.
pub fn synthetic_benchmark(bin: &str, dir: &Path) -> std::result::Result<(f64, f64), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    run_cli(bin, &["synth-catalog", "--out-dir", "cat", "--slot-values", "3", "--seed", "7"], dir)?;
    run_cli(bin, &["train-lm", "--corpus", "cat/queries.txt", "--out", "lm.bin"], dir)?;
    run_cli(
        bin,
        &[
            "gen-tasks", "--lm", "lm.bin", "--products", "cat/products_heldout.jsonl", "--pairs", "500",
            "--rules-per-pair", "4", "--B", "2", "--seed", "1", "--out", "heldout.jsonl",
        ],
        dir,
    )?;
    let report = run_cli(bin, &["protonet-eval", "--dataset", "heldout.jsonl", "--out", "protonet.json"], dir)?;
    let protonet: serde_json::Value = serde_json::from_str(report.trim()).map_err(|e| e.to_string())?;

    let gold = std::fs::read_to_string(dir.join("heldout.jsonl")).map_err(|e| e.to_string())?;
    let mut keep_all = String::new();
    for line in gold.lines() {
        let row: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let n = row["y_ts"].as_array().map(Vec::len).unwrap_or(0);
        keep_all.push_str(&serde_json::json!({ "y_ts": vec![1; n] }).to_string());
        keep_all.push('\n');
    }
    std::fs::write(dir.join("keep_all.jsonl"), keep_all).map_err(|e| e.to_string())?;
    let report = run_cli(bin, &["eval", "--gold", "heldout.jsonl", "--pred", "keep_all.jsonl"], dir)?;
    let baseline: serde_json::Value = serde_json::from_str(report.trim()).map_err(|e| e.to_string())?;
    Ok((protonet["f1"].as_f64().unwrap_or(0.0), baseline["f1"].as_f64().unwrap_or(0.0)))
}
