use gmnet_core::autodiff::Tensor;
use gmnet_core::corpus::{build_vocab, generate_synthetic, Split, SyntheticSpec};
use gmnet_core::layers::{Ctx, ParamStore};
use gmnet_core::model::gradcheck::tiny_batch;
use gmnet_core::model::{
    evaluate_loss, forward_train, forward_train_with_past, greedy_decode, guidance_feature,
    guidance_fuse, init_model, is_guidance_param, layer_spec, load_checkpoint,
    load_checkpoint_for_mode, save_checkpoint, train, train_from, Checkpoint, EncodedCaption,
    FeatureClip, Mode, ModelConfig, Sample, TrainOptions, encode_features,
};
use gmnet_core::Error;

fn zero_guidance(p: &ParamStore) -> ParamStore {
    let mut p = p.clone();
    let names: Vec<String> = p.names().filter(|n| is_guidance_param(n)).map(String::from).collect();
    for n in names {
        let shape = p.get(&n).unwrap().shape().to_vec();
        p.set(&n, Tensor::zeros(&shape)).unwrap();
    }
    p
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain-array LSTM step in (i, f, g, o) order.
fn lstm_manual(w: &Tensor, b: &Tensor, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let xh: Vec<f64> = x.iter().chain(h).copied().collect();
    let z: Vec<f64> = (0..4 * n)
        .map(|r| w.row(r).iter().zip(&xh).map(|(a, b)| a * b).sum::<f64>() + b.data()[r])
        .collect();
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for k in 0..n {
        let (i, f, g, o) = (sigmoid(z[k]), sigmoid(z[n + k]), z[2 * n + k].tanh(), sigmoid(z[3 * n + k]));
        c2[k] = f * c[k] + i * g;
        h2[k] = o * c2[k].tanh();
    }
    (h2, c2)
}

fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..w.shape()[0])
        .map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

#[test]
fn guidance_fuse_matches_hand_unrolled_arithmetic() {
    let cfg = ModelConfig::tiny(Mode::Gmnet);
    let p = init_model(&cfg).unwrap();
    let (past, future) = ([4usize, 6], [5usize]);
    let mut ctx = Ctx::new(&p);
    let a_e = guidance_fuse(&mut ctx, &cfg, &past, &future).unwrap();
    let got = ctx.value(a_e).data().to_vec();

    let g = |n: &str| p.get(n).unwrap();
    let emb = |id: usize| g("gd.embed").row(id).to_vec();
    let zero = vec![0.0; cfg.hidden];
    let (h1, c1) = lstm_manual(g("gd.past.w"), g("gd.past.b"), &emb(4), &zero, &zero);
    let (h2, _) = lstm_manual(g("gd.past.w"), g("gd.past.b"), &emb(6), &h1, &c1);
    let (f1, _) = lstm_manual(g("gd.future.w"), g("gd.future.b"), &emb(5), &zero, &zero);
    let (p1, p2, q1) = (matvec(g("gd.wp.w"), &h1), matvec(g("gd.wp.w"), &h2), matvec(g("gd.wf.w"), &f1));
    for k in 0..cfg.hidden {
        assert!((got[k] - (p1[k] + p2[k] + q1[k])).abs() < 1e-12);
    }
}

#[test]
fn guidance_fuse_edge_cases() {
    let cfg = ModelConfig::tiny(Mode::Gmnet);
    let p = init_model(&cfg).unwrap();
    let mut ctx = Ctx::new(&p);
    let a = guidance_fuse(&mut ctx, &cfg, &[], &[]).unwrap();
    assert_eq!(ctx.value(a), &Tensor::zeros(&[cfg.hidden]));
    let z = zero_guidance(&p);
    let mut ctx = Ctx::new(&z);
    let a = guidance_fuse(&mut ctx, &cfg, &[4, 5], &[6]).unwrap();
    assert_eq!(ctx.value(a), &Tensor::zeros(&[cfg.hidden]));
}

#[test]
fn guidance_feature_of_constants_is_zero_and_widths_checked() {
    let cfg = ModelConfig::tiny(Mode::Gmnet);
    let p = init_model(&cfg).unwrap();
    let mut ctx = Ctx::new(&p);
    let a = ctx.constant(Tensor::filled(&[cfg.hidden], 3.0));
    let b = ctx.constant(Tensor::filled(&[cfg.hidden], -1.0));
    let f = guidance_feature(&mut ctx, &cfg, a, b).unwrap();
    assert!(ctx.value(f).data().iter().all(|v| v.abs() < 1e-12));
    let c = ctx.constant(Tensor::zeros(&[cfg.hidden + 1]));
    assert!(matches!(guidance_feature(&mut ctx, &cfg, a, c), Err(Error::Config(_))));
}

#[test]
fn encode_features_examples() {
    // SA with an identity projection passes features through.
    let cfg = ModelConfig { proj_dim: 4, ..ModelConfig::tiny(Mode::Sa) };
    let mut p = init_model(&cfg).unwrap();
    let eye: Vec<f64> = (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect();
    p.set("enc.proj.w", Tensor::matrix(4, 4, eye).unwrap()).unwrap();
    let (clip, _) = tiny_batch(&cfg, 2, 1).unwrap().remove(0);
    let mut ctx = Ctx::new(&p);
    let y = encode_features(&mut ctx, &cfg, &clip).unwrap();
    assert_eq!(ctx.value(y), &clip.features);

    // SA_LN: constant frames normalize to zero; others have zero mean and,
    // with a negligible eps, unit variance.
    let cfg = ModelConfig { mode: Mode::SaLn, eps_ln: 1e-14, ..cfg };
    let mut p = init_model(&cfg).unwrap();
    p.set("enc.proj.w", Tensor::matrix(4, 4, (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect()).unwrap()).unwrap();
    let flat = FeatureClip::new("flat", Tensor::filled(&[3, 4], 2.5)).unwrap();
    let mut ctx = Ctx::new(&p);
    let y = encode_features(&mut ctx, &cfg, &flat).unwrap();
    assert!(ctx.value(y).data().iter().all(|v| v.abs() < 1e-12));
    let y = encode_features(&mut ctx, &cfg, &clip).unwrap();
    for r in 0..3 {
        let row = ctx.value(y).row(r);
        let mean = row.iter().sum::<f64>() / 4.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-6, "{var}");
    }

    let wrong = FeatureClip::new("odd", Tensor::zeros(&[3, 5])).unwrap();
    let err = encode_features(&mut ctx, &cfg, &wrong).unwrap_err();
    assert!(matches!(&err, Error::Data(m) if m.contains("odd")));
}

#[test]
fn losses_add_and_sa_has_no_guidance_loss() {
    for mode in Mode::ALL {
        let cfg = ModelConfig::tiny(mode);
        let p = init_model(&cfg).unwrap();
        for (clip, gt) in tiny_batch(&cfg, 3, 5).unwrap() {
            let l = forward_train(&cfg, &p, &clip, &gt).unwrap();
            assert_eq!(l.l_all, l.l + l.l_e);
            if !mode.guidance() {
                assert_eq!(l.l_e, 0.0);
                assert_eq!(l.l_all, l.l);
            }
        }
    }
}

#[test]
fn main_loss_does_not_depend_on_guidance_past_words() {
    // Teacher forcing: the main decoder only ever sees groundtruth inputs.
    let cfg = ModelConfig::tiny(Mode::Gmnet);
    let p = init_model(&cfg).unwrap();
    let (clip, gt) = tiny_batch(&cfg, 3, 5).unwrap().remove(0);
    let a = forward_train_with_past(&cfg, &p, &clip, &gt, Some(&[4, 4, 4])).unwrap();
    let b = forward_train_with_past(&cfg, &p, &clip, &gt, Some(&[6, 5, 4])).unwrap();
    assert_eq!(a.l, b.l);
    assert_ne!(a.l_e, b.l_e);
}

#[test]
fn caption_longer_than_max_len_rejected() {
    let cfg = ModelConfig::tiny(Mode::Sa);
    let p = init_model(&cfg).unwrap();
    let (clip, _) = tiny_batch(&cfg, 1, 5).unwrap().remove(0);
    let long = EncodedCaption::from_words(&[4, 5, 6, 4, 5]).unwrap();
    assert!(matches!(forward_train(&cfg, &p, &clip, &long), Err(Error::Data(_))));
}

#[test]
fn parameter_sets_nest_across_modes() {
    let names = |m| {
        layer_spec(&ModelConfig::tiny(m))
            .entries
            .iter()
            .map(|e| e.name.clone())
            .collect::<std::collections::BTreeSet<_>>()
    };
    let (sa, saln, gm) = (names(Mode::Sa), names(Mode::SaLn), names(Mode::Gmnet));
    assert!(sa.is_subset(&saln) && saln.is_subset(&gm));
    assert!(sa.iter().all(|n| !n.starts_with("ln.") && !is_guidance_param(n)));
    assert!(saln.iter().all(|n| !is_guidance_param(n)));
    // Shared parameters start identical under a shared seed.
    let a = init_model(&ModelConfig::tiny(Mode::Sa)).unwrap();
    let b = init_model(&ModelConfig::tiny(Mode::Gmnet)).unwrap();
    for (n, t) in a.iter() {
        assert_eq!(b.get(n), Some(t), "{n}");
    }
}

#[test]
fn greedy_decode_ignores_guidance_weights() {
    let cfg = ModelConfig::tiny(Mode::Gmnet);
    let p = init_model(&cfg).unwrap();
    let z = zero_guidance(&p);
    let mut scrambled = p.clone();
    let names: Vec<String> = p.names().filter(|n| is_guidance_param(n)).map(String::from).collect();
    for n in &names {
        let shape = p.get(n).unwrap().shape().to_vec();
        scrambled.set(n, Tensor::filled(&shape, 123.0)).unwrap();
    }
    for (clip, _) in tiny_batch(&cfg, 2, 11).unwrap().into_iter().chain(tiny_batch(&cfg, 2, 12).unwrap()) {
        let a = greedy_decode(&cfg, &p, &clip, cfg.max_len).unwrap();
        assert!(a.len() <= cfg.max_len - 2);
        assert_eq!(a, greedy_decode(&cfg, &z, &clip, cfg.max_len).unwrap());
        assert_eq!(a, greedy_decode(&cfg, &scrambled, &clip, cfg.max_len).unwrap());
    }
}

fn small_corpus(n: usize) -> (ModelConfig, Vec<FeatureClip>, Vec<Sample>) {
    let spec = SyntheticSpec { n_clips: n, ..SyntheticSpec::default() };
    let c = generate_synthetic(&spec).unwrap();
    let vocab = build_vocab(c.captions.iter().map(|r| r.caption.as_str()), 1).unwrap();
    let cfg = ModelConfig {
        hidden: 32,
        proj_dim: 32,
        embed_dim: 32,
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    let samples = c
        .captions
        .iter()
        .enumerate()
        .map(|(i, r)| Sample { clip: i, caption: vocab.encode(&r.caption, cfg.max_len).unwrap() })
        .collect();
    (cfg, c.clips, samples)
}

#[test]
fn training_is_deterministic_and_thread_count_independent() {
    let (cfg, clips, samples) = small_corpus(6);
    let opts = TrainOptions { epochs: 2, batch_size: 4, threads: 1 };
    let a = train(&cfg, &clips, &samples, &[], &opts).unwrap();
    let b = train(&cfg, &clips, &samples, &[], &opts).unwrap();
    let c = train(&cfg, &clips, &samples, &[], &TrainOptions { threads: 3, ..opts.clone() }).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.params, c.params);
    assert_eq!(a.shuffle_digests, c.shuffle_digests);
    assert_eq!(a.steps.len(), 4);
    assert!(a.steps.iter().all(|s| s.l_all == s.l + s.l_e));
}

#[test]
fn full_batch_loss_decreases_every_epoch() {
    let (cfg, clips, samples) = small_corpus(10);
    let out = train(&cfg, &clips, &samples, &[], &TrainOptions { epochs: 50, batch_size: 10, threads: 1 }).unwrap();
    for w in out.epochs.windows(2) {
        assert!(w[1].l_all <= w[0].l_all, "epoch {}: {} > {}", w[1].epoch, w[1].l_all, w[0].l_all);
    }
    assert!(out.epochs[50].l_all < out.epochs[0].l_all);
}

#[test]
fn training_errors() {
    let (cfg, clips, samples) = small_corpus(4);
    let opts = TrainOptions { epochs: 1, batch_size: 2, threads: 1 };
    assert!(matches!(train(&cfg, &clips, &[], &[], &opts), Err(Error::Usage(_))));
    let mut p = init_model(&cfg).unwrap();
    let shape = p.get("dec.out.b").unwrap().shape().to_vec();
    p.set("dec.out.b", Tensor::filled(&shape, f64::NAN)).unwrap();
    let err = train_from(&cfg, p, &clips, &samples, &[], &opts).unwrap_err();
    assert!(matches!(&err, Error::Numeric(m) if m.starts_with("step 1")), "{err}");
}

#[test]
fn initial_loss_near_uniform_baseline() {
    let c = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let train_recs: Vec<_> = c.captions.iter().filter(|r| r.split == Split::Train).collect();
    let vocab = build_vocab(train_recs.iter().map(|r| r.caption.as_str()), 1).unwrap();
    let cfg = ModelConfig { mode: Mode::Sa, vocab_size: vocab.len(), ..ModelConfig::default() };
    let samples: Vec<Sample> = c
        .captions
        .iter()
        .enumerate()
        .filter(|(_, r)| r.split == Split::Train)
        .map(|(i, r)| Sample { clip: i, caption: vocab.encode(&r.caption, cfg.max_len).unwrap() })
        .collect();
    let p = init_model(&cfg).unwrap();
    let l = evaluate_loss(&cfg, &p, &c.clips, &samples, 1).unwrap();
    let n_bar = samples.iter().map(|s| s.caption.num_targets() as f64).sum::<f64>() / samples.len() as f64;
    let baseline = n_bar * (vocab.len() as f64).ln();
    assert!((l.l - baseline).abs() / baseline < 0.15, "{} vs {baseline}", l.l);
}

#[test]
fn checkpoint_preserves_decoding() {
    let (cfg, clips, samples) = small_corpus(4);
    let out = train(&cfg, &clips, &samples, &[], &TrainOptions { epochs: 2, batch_size: 2, threads: 1 }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gmck");
    let ck = Checkpoint { config: cfg.clone(), params: out.params, vocab: vec![] };
    save_checkpoint(&ck, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, ck);
    let path2 = dir.path().join("m2.gmck");
    save_checkpoint(&back, &path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    for clip in &clips {
        assert_eq!(
            greedy_decode(&cfg, &ck.params, clip, cfg.max_len).unwrap(),
            greedy_decode(&back.config, &back.params, clip, back.config.max_len).unwrap()
        );
    }
    assert!(matches!(load_checkpoint_for_mode(&path, Mode::Sa), Err(Error::Format(_))));
}
