//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use gmnet_cli::{zero_guidance, Corpus};
use gmnet_core::autodiff::{Graph, Tensor};
use gmnet_core::corpus::{
    build_vocab, generate_synthetic, read_captions, read_features, split_msvd, write_features,
    write_predictions, Prediction, Split, SyntheticSpec,
};
use gmnet_core::metrics::{bleu4, cider, evaluate_corpus, rouge_l, EvalPair};
use gmnet_core::model::gradcheck::{param_group, TOLERANCE};
use gmnet_core::model::{
    greedy_decode, init_model, load_checkpoint, train, Checkpoint, FeatureClip, Mode, ModelConfig,
    Sample, TrainOptions,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

const OVERFIT_EPOCHS: usize = 100;
const OVERFIT_BATCH: usize = 2;
const ABLATION_EPOCHS: usize = 50;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmnet"))
}

/// Runs the binary; returns exit code and combined output.
fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().expect("spawn gmnet");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    (out.status.code().unwrap_or(-1), text)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ulp(x: f64) -> f64 {
    let a = x.abs();
    f64::from_bits(a.to_bits() + 1) - a
}

/// Rows of a CSV file keyed by header name.
fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn col(rows: &[BTreeMap<String, String>], name: &str) -> Vec<f64> {
    rows.iter().map(|r| r[name].parse().expect("float")).collect()
}

struct Workspace {
    data: PathBuf,
    ablation: PathBuf,
    ablation_secs: f64,
    ablation_exit: (i32, String),
}

fn c1() -> Verdict {
    let ids: Vec<String> = (0..1970).map(|i| format!("vid{i}")).collect();
    let sp = split_msvd(&ids).map_err(|e| e.to_string())?;
    let sizes = (sp.train.len(), sp.val.len(), sp.test.len());
    ensure(sizes == (1200, 100, 670), format!("MSVD split sizes {sizes:?}"))?;
    Ok("published MSVD scores need the real videos and a large training budget and are not \
        reproduced; criteria 2-11 substitute. MSVD split plumbing 1200/100/670 ok"
        .into())
}

fn c2(tmp: &Path) -> Verdict {
    let report = tmp.join("gradcheck.json");
    let t = Instant::now();
    let (code, out) = run(&["gradcheck", "--config", "tiny", "--report", s(&report)]);
    let secs = t.elapsed().as_secs_f64();
    ensure(code == 0, format!("pristine gradcheck exit {code}:\n{out}"))?;
    ensure(secs < 60.0, format!("gradcheck took {secs:.1}s"))?;
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(&report).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let errs: BTreeMap<String, f64> = rows
        .iter()
        .map(|r| (r["component"].as_str().unwrap().to_string(), r["max_rel_err"].as_f64().unwrap()))
        .collect();
    let worst = errs.values().cloned().fold(0.0, f64::max);
    ensure(worst < TOLERANCE, format!("max relative error {worst:e}"))?;
    for mode in Mode::ALL {
        let params = init_model(&ModelConfig::tiny(mode)).map_err(|e| e.to_string())?;
        let mut want: BTreeSet<String> = params.names().map(|n| format!("{mode}/{}", param_group(n))).collect();
        want.insert(format!("{mode}/L_all"));
        let missing: Vec<_> = want.iter().filter(|g| !errs.contains_key(*g)).collect();
        ensure(missing.is_empty(), format!("groups not checked: {missing:?}"))?;
    }
    for prim in ["layer_norm", "softmax", "reduce_time", "cross_entropy"] {
        ensure(errs.contains_key(&format!("primitive/{prim}")), format!("primitive {prim} not checked"))?;
    }
    for layer in ["lstm_step", "attention_step"] {
        ensure(errs.contains_key(&format!("layer/{layer}")), format!("layer {layer} not checked"))?;
    }
    let (fcode, fout) = run(&["gradcheck", "--config", "tiny", "--inject-fault", "layer_norm"]);
    ensure(
        fcode == 1 && fout.contains("layer_norm"),
        format!("injected layer_norm fault not caught (exit {fcode})"),
    )?;
    Ok(format!(
        "{} components, max rel err {worst:.2e} < {TOLERANCE:e}, {secs:.1}s; injected fault caught",
        errs.len()
    ))
}

fn c3(ws: &Workspace) -> Verdict {
    let rows = read_csv(&ws.ablation.join("GMNET.steps.csv"));
    ensure(!rows.is_empty(), "no logged steps")?;
    let (l, le, la) = (col(&rows, "L"), col(&rows, "L_e"), col(&rows, "L_all"));
    let mut worst = 0.0f64;
    for i in 0..rows.len() {
        let dev = (la[i] - (l[i] + le[i])).abs() / ulp(la[i]);
        worst = worst.max(dev);
    }
    ensure(worst <= 4.0, format!("worst deviation {worst} ulp"))?;
    Ok(format!("{} steps, worst deviation {worst} ulp", rows.len()))
}

fn c4(ws: &Workspace) -> Verdict {
    let ck = load_checkpoint(ws.ablation.join("GMNET.gmck")).map_err(|e| e.to_string())?;
    let cfg = &ck.config;
    ensure(cfg.mode == Mode::Gmnet, "checkpoint is not GMNET")?;
    let zeroed = zero_guidance(&ck.params);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..100 {
        let data: Vec<f64> = (0..cfg.frames * cfg.feature_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let clip = FeatureClip::new(
            format!("r{i}"),
            Tensor::matrix(cfg.frames, cfg.feature_dim, data).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let a = greedy_decode(cfg, &ck.params, &clip, cfg.max_len).map_err(|e| e.to_string())?;
        let b = greedy_decode(cfg, &zeroed, &clip, cfg.max_len).map_err(|e| e.to_string())?;
        ensure(a == b, format!("clip {i}: {a:?} vs {b:?}"))?;
    }
    Ok("100 random clips decode identically with guidance zeroed".into())
}

fn c5() -> Verdict {
    let corpus = generate_synthetic(&SyntheticSpec {
        n_clips: 10,
        ..SyntheticSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let vocab = build_vocab(corpus.captions.iter().map(|r| r.caption.as_str()), 1).map_err(|e| e.to_string())?;
    let cfg = ModelConfig {
        mode: Mode::Gmnet,
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    let samples: Vec<Sample> = corpus
        .captions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(Sample {
                clip: i,
                caption: vocab.encode(&r.caption, cfg.max_len)?,
            })
        })
        .collect::<Result<_, gmnet_core::Error>>()
        .map_err(|e| e.to_string())?;
    ensure(samples.len() == 10, format!("{} samples", samples.len()))?;
    let t = Instant::now();
    let opts = TrainOptions {
        epochs: OVERFIT_EPOCHS,
        batch_size: OVERFIT_BATCH,
        threads: 1,
    };
    let out = train(&cfg, &corpus.clips, &samples, &[], &opts).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let initial = out.epochs[0].l_all;
    let last = out.epochs.last().unwrap().l_all;
    let mut exact = 0;
    for s in &samples {
        let ids = greedy_decode(&cfg, &out.params, &corpus.clips[s.clip], cfg.max_len).map_err(|e| e.to_string())?;
        exact += usize::from(ids == s.caption.words());
    }
    let detail = format!(
        "{exact}/10 exact, L_all {initial:.3} -> {last:.4} ({:.4}x), {OVERFIT_EPOCHS} epochs, {secs:.0}s",
        last / initial
    );
    ensure(exact >= 9 && last < 0.05 * initial && secs < 300.0, detail.clone())?;
    Ok(detail)
}

fn c6(ws: &Workspace) -> Verdict {
    let corpus = Corpus::load(&ws.data.join("features.gmnf"), &ws.data.join("captions.jsonl"), 1)
        .map_err(|e| e.to_string())?;
    let cfg = ModelConfig::default();
    let train_set = corpus.samples(Split::Train, cfg.max_len).map_err(|e| e.to_string())?;
    let n_bar = train_set.iter().map(|s| s.caption.num_targets() as f64).sum::<f64>() / train_set.len() as f64;
    let baseline = n_bar * (corpus.vocab.len() as f64).ln();
    let mut parts = Vec::new();
    for mode in Mode::ALL {
        let rows = read_csv(&ws.ablation.join(format!("{mode}.loss.csv")));
        let l0 = col(&rows, "L")[0];
        let rel = (l0 - baseline).abs() / baseline;
        ensure(rel <= 0.15, format!("{mode}: epoch-0 L {l0:.3} vs {baseline:.3} ({:.1}%)", rel * 100.0))?;
        parts.push(format!("{mode} {l0:.3}"));
    }
    Ok(format!("n̄·ln V = {baseline:.3}; epoch-0 L: {}", parts.join(", ")))
}

fn c7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let norm = |x: &[f64]| -> Result<Vec<f64>, String> {
        let mut g = Graph::new();
        let n = x.len();
        let xi = g.constant(Tensor::vector(x.to_vec()));
        let gain = g.constant(Tensor::filled(&[n], 1.0));
        let bias = g.constant(Tensor::zeros(&[n]));
        let y = g.layer_norm(xi, gain, bias, 0.0).map_err(|e| e.to_string())?;
        Ok(g.value(y).data().to_vec())
    };
    for _ in 0..100 {
        let n = rng.gen_range(2..40);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let a = rng.gen_range(0.1..10.0);
        let b = rng.gen_range(-10.0..10.0);
        let y = norm(&x)?;
        let z = norm(&x.iter().map(|v| a * v + b).collect::<Vec<_>>())?;
        for (p, q) in y.iter().zip(&z) {
            worst = worst.max((p - q).abs());
        }
    }
    ensure(worst <= 1e-8, format!("scale/shift deviation {worst:e}"))?;
    let mut g = Graph::new();
    let xi = g.constant(Tensor::filled(&[6], 3.25));
    let gain = g.constant(Tensor::filled(&[6], 1.0));
    let bias = g.constant(Tensor::zeros(&[6]));
    let y = g.layer_norm(xi, gain, bias, 1e-5).map_err(|e| e.to_string())?;
    ensure(g.value(y).data().iter().all(|v| *v == 0.0), "constant input not mapped to zero")?;
    Ok(format!("100 vectors, worst deviation {worst:.1e}; constant input -> 0"))
}

fn toy() -> Vec<EvalPair> {
    vec![
        EvalPair::from_text("v1", "a man is playing a guitar", &["a man is playing guitar"]).unwrap(),
        EvalPair::from_text("v2", "a b c d", &["a c d e"]).unwrap(),
        EvalPair::from_text("v3", "the cat sleeps", &["a cat is sleeping", "the cat sleeps"]).unwrap(),
    ]
}

fn grams(t: &[String], n: usize) -> Vec<String> {
    if t.len() < n {
        return vec![];
    }
    (0..=t.len() - n).map(|i| t[i..i + n].join(" ")).collect()
}

/// Dense brute-force TF-IDF cosine, averaged over n = 1..4, times 10.
fn cider_by_hand(pairs: &[EvalPair]) -> f64 {
    let docs = pairs.len() as f64;
    let mut total = 0.0;
    for p in pairs {
        let mut per_n = 0.0;
        for n in 1..=4 {
            let mut df: BTreeMap<String, f64> = BTreeMap::new();
            for q in pairs {
                let seen: BTreeSet<String> = q.references.iter().flat_map(|r| grams(r, n)).collect();
                for g in seen {
                    *df.entry(g).or_insert(0.0) += 1.0;
                }
            }
            let mut keys: BTreeSet<String> = df.keys().cloned().collect();
            keys.extend(grams(&p.candidate, n));
            let vector = |t: &[String]| -> Vec<f64> {
                let gs = grams(t, n);
                keys.iter()
                    .map(|k| {
                        let tf = gs.iter().filter(|g| *g == k).count() as f64 / gs.len().max(1) as f64;
                        tf * (docs / df.get(k).copied().unwrap_or(1.0)).ln()
                    })
                    .collect()
            };
            let c = vector(&p.candidate);
            let mut sim = 0.0;
            for r in &p.references {
                let v = vector(r);
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                let na: f64 = c.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nb: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if na > 0.0 && nb > 0.0 {
                    sim += dot / (na * nb);
                }
            }
            per_n += sim / p.references.len() as f64;
        }
        total += 10.0 * per_n / 4.0;
    }
    total / docs
}

fn c8(ws: &Workspace, tmp: &Path) -> Verdict {
    let pairs = toy();
    let b_hand = (11.0 / 13.0 * 6.0 / 10.0 * 3.0 / 7.0 * 1.0 / 4.0f64).powf(0.25);
    let beta2 = 1.2f64 * 1.2;
    let f1 = (1.0 + beta2) * (5.0 / 6.0) / (1.0 + beta2 * 5.0 / 6.0);
    let r_hand = (f1 + 0.75 + 1.0) / 3.0;
    let c_hand = cider_by_hand(&pairs);
    let (b, r, c) = (
        bleu4(&pairs).map_err(|e| e.to_string())?,
        rouge_l(&pairs).map_err(|e| e.to_string())?,
        cider(&pairs).map_err(|e| e.to_string())?,
    );
    ensure((b - b_hand).abs() < 1e-9, format!("BLEU-4 {b} vs {b_hand}"))?;
    ensure((r - r_hand).abs() < 1e-9, format!("ROUGE-L {r} vs {r_hand}"))?;
    ensure((c - c_hand).abs() < 1e-9, format!("CIDEr {c} vs {c_hand}"))?;

    let same: Vec<EvalPair> = [
        "a man walks down the street",
        "the dog runs across a field",
        "two kids play with a ball",
    ]
    .iter()
    .enumerate()
    .map(|(i, t)| EvalPair::from_text(format!("s{i}"), t, &[*t]).unwrap())
    .collect();
    let rep = evaluate_corpus(&same).map_err(|e| e.to_string())?;
    ensure(
        (rep.bleu4, rep.rouge_l, rep.cider) == (1.0, 1.0, 10.0),
        format!("identical corpus gave {rep:?}"),
    )?;

    let base = evaluate_corpus(&pairs).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..20 {
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng);
        for p in &mut shuffled {
            p.references.shuffle(&mut rng);
        }
        let rep = evaluate_corpus(&shuffled).map_err(|e| e.to_string())?;
        ensure(
            (rep.bleu4, rep.rouge_l, rep.cider) == (base.bleu4, base.rouge_l, base.cider),
            format!("shuffle {i} changed scores"),
        )?;
    }

    // The same identity through the binary, on the synthetic captions.
    let refs = read_captions(ws.data.join("captions.jsonl")).map_err(|e| e.to_string())?;
    let preds: Vec<Prediction> = refs
        .iter()
        .filter(|r| r.split == Split::Test)
        .map(|r| Prediction {
            id: r.id.clone(),
            caption: r.caption.clone(),
        })
        .collect();
    let preds_path = tmp.join("identity.preds.jsonl");
    let report = tmp.join("identity.report.json");
    write_predictions(&preds_path, &preds).map_err(|e| e.to_string())?;
    let refs_path = ws.data.join("captions.jsonl");
    let (code, out) = run(&["evaluate", "--preds", s(&preds_path), "--refs", s(&refs_path), "--report", s(&report)]);
    ensure(code == 0, format!("evaluate exit {code}: {out}"))?;
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let raw = (v["bleu4"].as_f64(), v["rouge_l"].as_f64(), v["cider"].as_f64());
    ensure(raw == (Some(1.0), Some(1.0), Some(10.0)), format!("CLI identity report {raw:?}"))?;
    Ok(format!(
        "toy BLEU-4 {b:.6}, ROUGE-L {r:.6}, CIDEr {c:.6} match; identical corpus 1/1/10; 20 shuffles invariant"
    ))
}

fn c9(ws: &Workspace) -> Verdict {
    let (code, out) = &ws.ablation_exit;
    ensure(*code == 0, format!("ablate exit {code}:\n{out}"))?;
    ensure(ws.ablation_secs < 1800.0, format!("ablation took {:.0}s", ws.ablation_secs))?;
    let refs = read_captions(ws.data.join("captions.jsonl")).map_err(|e| e.to_string())?;
    let train_clips: BTreeSet<&str> = refs.iter().filter(|r| r.split == Split::Train).map(|r| r.id.as_str()).collect();
    ensure(train_clips.len() == 60, format!("{} train clips", train_clips.len()))?;
    let table = fs::read_to_string(ws.ablation.join("ablation.md")).map_err(|e| e.to_string())?;
    for mode in Mode::ALL {
        ensure(table.contains(&format!("| {mode} |")), format!("table lacks a {mode} row"))?;
    }
    ensure(table.lines().count() == 5, "table is not header + 3 rows")?;
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.ablation.join("ablation.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let rows = json["rows"].as_array().ok_or("rows missing")?;
    ensure(rows.len() == 3, "expected three rows")?;
    for r in rows {
        for k in ["bleu4", "rouge_l", "cider"] {
            ensure(r["percent"][k].as_f64().is_some_and(f64::is_finite), format!("{k} missing"))?;
        }
    }
    ensure(json["shared_shuffle_stream"] == true, "modes saw different shuffles")?;
    for mode in [Mode::Sa, Mode::SaLn] {
        for file in ["loss.csv", "steps.csv"] {
            let le = col(&read_csv(&ws.ablation.join(format!("{mode}.{file}"))), "L_e");
            ensure(le.iter().all(|v| *v == 0.0), format!("{mode} {file} has non-zero L_e"))?;
        }
    }
    let le = col(&read_csv(&ws.ablation.join("GMNET.loss.csv")), "L_e");
    ensure(le.iter().all(|v| *v > 0.0 && v.is_finite()), "GMNET L_e not populated")?;
    Ok(format!(
        "{:.0}s for 3 modes x {ABLATION_EPOCHS} epochs on 60 train clips; GMNET final L_e {:.4}, SA/SA_LN L_e = 0",
        ws.ablation_secs,
        le.last().unwrap()
    ))
}

fn c10(ws: &Workspace, tmp: &Path) -> Verdict {
    for mode in Mode::ALL {
        let bytes = fs::read(ws.ablation.join(format!("{mode}.gmck"))).map_err(|e| e.to_string())?;
        let ck = Checkpoint::from_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(ck.to_bytes().map_err(|e| e.to_string())? == bytes, format!("{mode} checkpoint bytes differ"))?;
    }
    let fbytes = fs::read(ws.data.join("features.gmnf")).map_err(|e| e.to_string())?;
    let clips = read_features(&fbytes).map_err(|e| e.to_string())?;
    ensure(write_features(&clips).map_err(|e| e.to_string())? == fbytes, "GMNF bytes differ")?;

    let again = tmp.join("synth-again");
    let (code, out) = run(&["synth", "--out", s(&again), "--seed", "7"]);
    ensure(code == 0, format!("synth exit {code}: {out}"))?;
    for f in ["features.gmnf", "captions.jsonl"] {
        ensure(
            fs::read(ws.data.join(f)).ok() == fs::read(again.join(f)).ok(),
            format!("synth rerun changed {f}"),
        )?;
    }

    let ckpt = ws.ablation.join("GMNET.gmck");
    let features = ws.data.join("features.gmnf");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let p = tmp.join(format!("caption{i}.jsonl"));
        let (code, out) = run(&["caption", "--ckpt", s(&ckpt), "--features", s(&features), "--out", s(&p)]);
        ensure(code == 0, format!("caption exit {code}: {out}"))?;
        outputs.push(fs::read(&p).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], "caption reruns differ")?;
    Ok(format!(
        "3 checkpoints and GMNF byte-identical after load/save; synth and caption reruns byte-identical ({} clips)",
        clips.len()
    ))
}

fn c11(ws: &Workspace) -> Verdict {
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.ablation.join("ablation.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let row = json["rows"]
        .as_array()
        .and_then(|rows| rows.iter().find(|r| r["mode"] == "SA_LN"))
        .ok_or("SA_LN row missing")?;
    let b = row["percent"]["bleu4"].as_f64().ok_or("bleu4 missing")?;
    ensure(b > 60.0, format!("SA_LN test BLEU-4 {b:.1}"))?;
    Ok(format!(
        "SA_LN test BLEU-4 {b:.1}, ROUGE-L {:.1}, CIDEr {:.1} (percent)",
        row["percent"]["rouge_l"].as_f64().unwrap_or(f64::NAN),
        row["percent"]["cider"].as_f64().unwrap_or(f64::NAN)
    ))
}

fn prepare(tmp: &Path) -> Workspace {
    let data = tmp.join("synthetic");
    let ablation = tmp.join("ablation");
    let (code, out) = run(&["synth", "--out", s(&data)]);
    assert_eq!(code, 0, "synth failed:\n{out}");
    eprintln!("running the three-mode ablation ({ABLATION_EPOCHS} epochs)...");
    let t = Instant::now();
    let epochs = ABLATION_EPOCHS.to_string();
    let ablation_exit = run(&[
        "ablate",
        "--features",
        s(&data.join("features.gmnf")),
        "--captions",
        s(&data.join("captions.jsonl")),
        "--epochs",
        &epochs,
        "--out",
        s(&ablation),
    ]);
    Workspace {
        data,
        ablation,
        ablation_secs: t.elapsed().as_secs_f64(),
        ablation_exit,
    }
}

fn main() {
    // `cargo test -- --list` and filtered runs should not trigger the long suite.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let tmp = tempfile::tempdir().expect("tempdir");
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "reproducibility statement", c1()),
        (2, "gradient fidelity", c2(tmp.path())),
        (5, "overfit oracle", c5()),
        (7, "layer norm properties", c7()),
    ];
    let ws = prepare(tmp.path());
    let ok = ws.ablation_exit.0 == 0;
    let gated = |f: &dyn Fn() -> Verdict| if ok { f() } else { Err("ablation run failed, no artifacts".into()) };
    results.push((3, "loss additivity", gated(&|| c3(&ws))));
    results.push((4, "guidance removal", gated(&|| c4(&ws))));
    results.push((6, "random-init loss", gated(&|| c6(&ws))));
    results.push((8, "metric oracles", c8(&ws, tmp.path())));
    results.push((9, "ablation protocol", c9(&ws)));
    results.push((10, "round trips", gated(&|| c10(&ws, tmp.path()))));
    results.push((11, "end-to-end learnability", gated(&|| c11(&ws))));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, v) in &results {
        match v {
            Ok(detail) => println!("PASS [{n:>2}] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{n:>2}] {name}: {why}");
            }
        }
    }
    let total: Duration = started.elapsed();
    println!("{} of {} criteria pass ({:.0}s)", results.len() - failed, results.len(), total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
