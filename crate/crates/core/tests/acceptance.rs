//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use concept_tagger::chunking::{chunk_bounds, chunk_sentence, merge_chunk_predictions, ChunkConfig};
use concept_tagger::cli::{self, RunConfig};
use concept_tagger::corpus::{
    build_vocab, read_corpus, AnnotatedSentence, Label, LabelMode, RawToken,
};
use concept_tagger::features::parse_word_vectors;
use concept_tagger::metrics::{evaluation_report, prf, span_match_counts, EvalResult, SpanCounts};
use concept_tagger::neural::{
    finite_difference_check, forward_chunk, gradcheck_fixture, DropoutMasks, GradCheckOptions, TensorStatus,
};
use concept_tagger::tagger::{
    corpus_loss, decode_iob, encode_spans, read_model, span_f1, train, write_model, ArchiveError, ConceptSpan,
    TrainConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let (model, chunk) = gradcheck_fixture(0, true);
    ensure(chunk.real_len() == 5, || format!("fixture chunk has {} tokens", chunk.real_len()))?;
    let d = model.dims();
    ensure(
        (d.hidden, d.word_dim, d.pos_dim, d.char_filters, d.char_widths.clone()) == (4, 4, 2, 2, vec![3]),
        || format!("unexpected fixture dims {d:?}"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let masks = DropoutMasks::sample(5, d.input_dim(), d.hidden, 0.5, &mut rng);
    let mut worst: f64 = 0.0;
    let mut tensors = 0;
    for masks in [None, Some(masks)] {
        let opts = GradCheckOptions {
            masks,
            ..GradCheckOptions::default()
        };
        let report = finite_difference_check(&model, &chunk, &opts).map_err(|e| e.to_string())?;
        for t in &report.tensors {
            ensure(t.status == TensorStatus::Passed, || format!("{}: {:?}\n{report}", t.name, t.status))?;
            worst = worst.max(t.max_rel_error);
        }
        tensors = report.tensors.len();
    }
    let elapsed = started.elapsed();
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{tensors} tensors, max rel err {worst:.1e}, {elapsed:.2?}"))
}

fn overfit_oracle() -> Outcome {
    let started = Instant::now();
    let corpus = read_corpus(data("overfit.conll"), LabelMode::Required).map_err(|e| e.to_string())?;
    let vectors = parse_word_vectors(BufReader::new(File::open(data("overfit.vec")).map_err(|e| e.to_string())?))
        .map_err(|e| e.to_string())?;
    let spans: usize = corpus.sentences.iter().map(|s| s.concept_count()).sum();
    let vocab = build_vocab(&corpus, 1).words.len() - 2;
    ensure(corpus.sentences.len() == 20, || "fixture must have 20 sentences".into())?;
    let config = TrainConfig {
        epochs: 200,
        patience: None,
        ..TrainConfig::default()
    };
    let out = train(&corpus, &vectors, &config).map_err(|e| e.to_string())?;
    let f1 = span_f1(&out.tagger, &out.train_corpus).map_err(|e| e.to_string())?;
    let (loss, tokens) = corpus_loss(&out.tagger, &out.train_corpus);
    let uniform = tokens as f64 * 3f64.ln();
    let elapsed = started.elapsed();
    let summary = format!(
        "{vocab} words, {spans} spans; train F1 {f1:.3}, loss {loss:.3} = {:.2}% of uniform {uniform:.2}, {elapsed:.1?}",
        100.0 * loss / uniform
    );
    ensure(f1 >= 0.99, || summary.clone())?;
    ensure(loss < 0.05 * uniform, || summary.clone())?;
    ensure(elapsed < Duration::from_secs(120), || summary.clone())?;
    Ok(summary)
}

fn chunking_conformance() -> Outcome {
    let cfg = ChunkConfig::default();
    let vocab = build_vocab(&Default::default(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for len in 1..=500usize {
        let bounds = chunk_bounds(len, &cfg);
        let mut covered = vec![0u8; len];
        for (i, &(offset, real)) in bounds.iter().enumerate() {
            ensure(offset == 17 * i, || format!("len {len}: chunk {i} at {offset}"))?;
            ensure((1..=19).contains(&real) && offset + real <= len, || format!("len {len}: chunk {i} real {real}"))?;
            covered[offset..offset + real].iter_mut().for_each(|c| *c += 1);
            if i + 1 < bounds.len() {
                let (next, _) = bounds[i + 1];
                let shared = (offset + real).saturating_sub(next);
                ensure(shared == 2, || format!("len {len}: chunks {i},{} share {shared}", i + 1))?;
            }
        }
        ensure(covered.iter().all(|&c| c >= 1), || format!("len {len}: uncovered token"))?;
        let tokens = (0..len)
            .map(|_| RawToken::new("w", "NN", Label::ALL[rng.gen_range(0..3)]))
            .collect();
        let sentence = AnnotatedSentence {
            tokens,
            doc_id: "d".into(),
            sent_index: 0,
        };
        let chunks = chunk_sentence(&sentence, &vocab, &cfg);
        let merged = merge_chunk_predictions(chunks.iter().map(|c| (c, c.labels.as_slice())))
            .map_err(|e| format!("len {len}: {e}"))?;
        ensure(merged == sentence.labels(), || format!("len {len}: merge is not the identity"))?;
    }
    Ok("lengths 1..=500: stride 17, full coverage, overlap 2, merge∘chunk = id".into())
}

fn random_spans(rng: &mut ChaCha8Rng, len: usize) -> Vec<ConceptSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < len {
        if rng.gen_bool(0.3) {
            let end = (i + rng.gen_range(1..=4)).min(len);
            out.push(ConceptSpan::new(i, end));
            i = end + usize::from(rng.gen_bool(0.5));
        } else {
            i += 1;
        }
    }
    out
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..1000 {
        let sentences = rng.gen_range(1..=4);
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for _ in 0..sentences {
            let len = rng.gen_range(1..=30);
            let g = random_spans(&mut rng, len);
            // predictions: perturb some gold spans and add fresh ones
            let mut p: Vec<ConceptSpan> = if rng.gen_bool(0.5) { g.clone() } else { random_spans(&mut rng, len) };
            if let Some(s) = p.last_mut().filter(|_| rng.gen_bool(0.3)) {
                if s.end - s.start > 1 {
                    s.end -= 1;
                }
            }
            gold.push(g);
            pred.push(p);
        }
        let key = |lists: &[Vec<ConceptSpan>]| -> HashSet<(usize, usize, usize)> {
            lists
                .iter()
                .enumerate()
                .flat_map(|(i, l)| l.iter().map(move |s| (i, s.start, s.end)))
                .collect()
        };
        let (gs, ps) = (key(&gold), key(&pred));
        let tp = gs.intersection(&ps).count();
        let expected = SpanCounts::new(tp, ps.len() - tp, gs.len() - tp);
        let got = span_match_counts(&gold, &pred).map_err(|e| format!("case {case}: {e}"))?;
        ensure(got == expected, || format!("case {case}: {got:?} != {expected:?}"))?;
    }
    let (p, r, f) = prf(SpanCounts::new(9, 1, 2));
    ensure((p - 0.9).abs() < 1e-9, || format!("P {p}"))?;
    ensure((r - 9.0 / 11.0).abs() < 1e-9, || format!("R {r}"))?;
    ensure((f - 6.0 / 7.0).abs() < 1e-9, || format!("F1 {f}"))?;
    ensure(format!("{p:.3}/{r:.3}/{f:.3}") == "0.900/0.818/0.857", || format!("{p}/{r}/{f}"))?;
    Ok(format!("1000 random cases agree with set oracle; (9,1,2) -> {p:.3}/{r:.3}/{f:.3}"))
}

fn iob_decode() -> Outcome {
    use Label::*;
    ensure(decode_iob(&[B, I, I, I]) == vec![ConceptSpan::new(0, 4)], || "[B,I,I,I]".into())?;
    ensure(
        decode_iob(&[I, O, B, I]) == vec![ConceptSpan::new(0, 1), ConceptSpan::new(2, 4)],
        || "[I,O,B,I] repair".into(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let len = rng.gen_range(0..=40);
        let spans = random_spans(&mut rng, len);
        let back = decode_iob(&encode_spans(&spans, len));
        ensure(back == spans, || format!("case {case}: {spans:?} -> {back:?}"))?;
    }
    Ok("[B,I,I,I] -> [0,4); [I,O,B,I] -> [0,1),[2,4); 1000 round trips".into())
}

fn hyperparameter_fidelity() -> Outcome {
    let t = TrainConfig::default();
    let literal: [(&str, f64, f64); 7] = [
        ("window", t.chunk.window as f64, 19.0),
        ("overlap", t.chunk.overlap as f64, 2.0),
        ("lr", t.lr, 0.001),
        ("clip_norm", t.clip_norm, 5.0),
        ("dropout", t.dropout, 0.5),
        ("epochs", t.epochs as f64, 15.0),
        ("valid_fraction", t.valid_fraction, 0.2),
    ];
    for (key, got, want) in literal {
        ensure(got == want, || format!("{key}: {got} != {want}"))?;
    }
    let run = RunConfig::default();
    for (key, text) in [
        ("window", "19"),
        ("overlap", "2"),
        ("lr", "0.001"),
        ("clip_norm", "5"),
        ("dropout", "0.5"),
        ("epochs", "15"),
        ("valid_fraction", "0.2"),
    ] {
        let got = run.get(key).unwrap_or_default();
        ensure(got == text, || format!("run config {key} = {got}"))?;
    }
    Ok("window 19, overlap 2, lr 0.001, clip 5, dropout 0.5, epochs 15, valid 0.2".into())
}

fn report_fidelity() -> Outcome {
    let text = evaluation_report(&EvalResult::from_rates(0.93, 0.89, 0.90, 0.97));
    let expected = "Metric        Precision  Recall  F1-score  Accuracy\nBi-GRU Model  0.93       0.89    0.90      0.97\n";
    ensure(text == expected, || format!("got:\n{text}"))?;
    let row: Vec<&str> = text.lines().nth(1).unwrap_or("").split_whitespace().collect();
    ensure(row == ["Bi-GRU", "Model", "0.93", "0.89", "0.90", "0.97"], || format!("{row:?}"))?;
    Ok(text.lines().nth(1).unwrap_or("").to_string())
}

fn persistence() -> Outcome {
    let corpus = read_corpus(data("overfit.conll"), LabelMode::Required).map_err(|e| e.to_string())?;
    let vectors = parse_word_vectors(BufReader::new(File::open(data("overfit.vec")).map_err(|e| e.to_string())?))
        .map_err(|e| e.to_string())?;
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let tagger = train(&corpus, &vectors, &config).map_err(|e| e.to_string())?.tagger;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.ctg");
    concept_tagger::tagger::save_model(&tagger, &path).map_err(|e| e.to_string())?;
    let loaded = concept_tagger::tagger::load_model(&path).map_err(|e| e.to_string())?;
    for (a, b) in tagger.params.tensors().iter().zip(loaded.params.tensors()) {
        let same = a.tensor.data().iter().zip(b.tensor.data()).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(a.name == b.name && same, || format!("tensor {} differs", a.name))?;
    }
    let probe = &corpus.sentences[1];
    for (c1, c2) in chunk_sentence(probe, &tagger.vocab, &tagger.chunk)
        .iter()
        .zip(chunk_sentence(probe, &loaded.vocab, &loaded.chunk).iter())
    {
        let p1 = forward_chunk(&tagger.params, c1, None).probs;
        let p2 = forward_chunk(&loaded.params, c2, None).probs;
        let bits = |p: &Vec<[f64; 3]>| p.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(bits(&p1) == bits(&p2), || "probe probabilities differ".into())?;
    }
    ensure(
        tagger.annotate_sentence(probe).ok() == loaded.annotate_sentence(probe).ok(),
        || "probe spans differ".into(),
    )?;
    let bytes = fs::read(&path).map_err(|e| e.to_string())?;
    ensure(
        matches!(read_model(&bytes[..bytes.len() - 1]), Err(ArchiveError::Checksum)),
        || "truncated archive accepted".into(),
    )?;
    let mut flipped = bytes.clone();
    flipped[8] ^= 0x01;
    ensure(
        matches!(read_model(&flipped), Err(ArchiveError::Version { .. })),
        || "version-flipped archive accepted".into(),
    )?;
    ensure(write_model(&loaded) == bytes, || "re-saved archive differs".into())?;
    Ok(format!("{} bytes, bit-exact; truncation and version flip rejected", bytes.len()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |tag: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let model = dir.path().join(format!("{tag}.ctg"));
        let history = dir.path().join(format!("{tag}.tsv"));
        let args = [
            "concept-tagger".to_string(),
            "train".into(),
            "--corpus".into(),
            data("overfit.conll").display().to_string(),
            "--embeddings".into(),
            data("overfit.vec").display().to_string(),
            "--epochs".into(),
            "8".into(),
            "--seed".into(),
            "17".into(),
            "--model".into(),
            model.display().to_string(),
            "--history".into(),
            history.display().to_string(),
        ];
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = cli::run(args, &mut out, &mut err);
        if code != 0 {
            return Err(format!("train exited {code}: {}", String::from_utf8_lossy(&err)));
        }
        let read = |p: &PathBuf| fs::read(p).map_err(|e| e.to_string());
        Ok((read(&history)?, read(&model)?))
    };
    let (h1, m1) = run("a")?;
    let (h2, m2) = run("b")?;
    ensure(h1 == h2, || "history files differ".into())?;
    ensure(m1 == m2, || "archives differ".into())?;
    let epochs = String::from_utf8_lossy(&h1).lines().count() - 1;
    Ok(format!("two runs: identical history ({epochs} epochs) and archive ({} bytes)", m1.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient correctness", gradient_correctness),
        ("overfit oracle", overfit_oracle),
        ("chunking conformance", chunking_conformance),
        ("metrics oracle", metrics_oracle),
        ("IOB decode", iob_decode),
        ("hyperparameter fidelity", hyperparameter_fidelity),
        ("report fidelity", report_fidelity),
        ("persistence", persistence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    println!();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
