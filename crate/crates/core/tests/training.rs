use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zeromatch_core::data::{gen_blobs, split_semisupervised, BlobSpec, SemiDataset, Split};
use zeromatch_core::nn::decode_checkpoint;
use zeromatch_core::optim::{AdamW, AdamWConfig};
use zeromatch_core::oracle::{generate, EmbeddingSpec, OracleSpec, PseudoLabelSet};
use zeromatch_core::ssl::losses::aux_distillation;
use zeromatch_core::ssl::{
    evaluate, teacher_agreement, train, write_step_log, HeadInput, Method, SslHyper, StudentArch, StudentModel,
};
use zeromatch_core::{Error, Graph, Target, Tensor};

fn task(separation: f64, k: usize, accuracy: f64, seed: u64) -> (SemiDataset, PseudoLabelSet) {
    let ds = gen_blobs(&BlobSpec {
        separation,
        ..BlobSpec::default()
    })
    .unwrap();
    let ds = split_semisupervised(&ds, k, seed).unwrap();
    let pls = generate(&OracleSpec::new(4, accuracy, seed), &ds, true).unwrap();
    (ds, pls)
}

fn short(stage1: usize, stage2: usize) -> SslHyper {
    SslHyper {
        stage1_steps: stage1,
        stage2_steps: stage2,
        warmup: 10,
        ..SslHyper::default()
    }
}

#[test]
fn perfect_teacher_is_memorized_by_stage1() {
    let (ds, pls) = task(6.0, 1, 1.0, 0);
    let out = train::<f64>(Method::Zeromatch, &ds, Some(&pls), &short(3000, 0), 0).unwrap();
    let agreement = out.stage1_agreement.unwrap();
    assert!(agreement >= 0.99, "stage-1 agreement {agreement}");
    assert_eq!(agreement, teacher_agreement(&out.model, &ds, &pls).unwrap());
}

#[test]
fn nearest_true_mean_reference_is_near_perfect_on_easy_blobs() {
    let (ds, _) = task(6.0, 1, 1.0, 0);
    let means = ds.class_means.as_ref().unwrap();
    let x = ds.features(Split::Test);
    let hits = ds
        .test_labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| {
            let row = x.row(i);
            let dist = |m: &Vec<f64>| m.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = (0..means.len())
                .min_by(|&a, &b| dist(&means[a]).total_cmp(&dist(&means[b])))
                .unwrap();
            best == y
        })
        .count();
    assert!(hits as f64 / ds.n_test() as f64 >= 0.99);
}

#[test]
fn constant_class_model_scores_chance_on_balanced_test() {
    let (ds, _) = task(4.0, 1, 1.0, 0);
    let arch = StudentArch {
        input_dim: 16,
        encoder_widths: vec![8],
        head_hidden: vec![],
        num_classes: 4,
        head_input: HeadInput::None,
    };
    let mut model = StudentModel::<f64>::init(arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let last = model.head.layers.last_mut().unwrap();
    last.weight = Tensor::zeros(last.weight.shape());
    last.bias = Tensor::new(vec![4], vec![0.0, 0.0, 5.0, 0.0]).unwrap();
    assert_eq!(evaluate(&model, &ds, Split::Test, None).unwrap(), 0.25);
}

#[test]
fn no_stage1_ablation_equals_zeromatch_without_stage1() {
    let (ds, pls) = task(4.0, 2, 0.6, 1);
    let a = train::<f64>(Method::ZmNoStage1, &ds, Some(&pls), &short(0, 200), 5).unwrap();
    let b = train::<f64>(Method::Zeromatch, &ds, Some(&pls), &short(0, 200), 5).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.model, b.model);
}

#[test]
fn training_is_deterministic_per_seed() {
    let (ds, pls) = task(4.0, 1, 0.6, 2);
    let a = train::<f64>(Method::Zeromatch, &ds, Some(&pls), &short(50, 50), 9).unwrap();
    let b = train::<f64>(Method::Zeromatch, &ds, Some(&pls), &short(50, 50), 9).unwrap();
    let c = train::<f64>(Method::Zeromatch, &ds, Some(&pls), &short(50, 50), 10).unwrap();
    assert_eq!(a.model, b.model);
    assert_ne!(a.model, c.model);
}

#[test]
fn stage_hand_off_goes_through_the_checkpoint_format() {
    let (ds, pls) = task(4.0, 1, 0.6, 3);
    let stage1_only = train::<f64>(Method::Zeromatch, &ds, Some(&pls), &short(40, 0), 4).unwrap();
    let text = stage1_only.stage1_checkpoint.as_deref().unwrap();
    let named = decode_checkpoint::<f64>(text, Path::new("<mem>")).unwrap();
    assert_eq!(named, stage1_only.model.named_params());
    let log = &train::<f64>(Method::Zeromatch, &ds, Some(&pls), &short(40, 30), 4).unwrap().log;
    assert_eq!(log.len(), 70);
    assert!(log.iter().enumerate().all(|(i, r)| r.step == i));
    assert!(log[..40].iter().all(|r| r.loss_u == 0.0 && r.alpha_t == 0.0));
    assert_eq!(log[40].alpha_t, 0.0);
    assert!(log[69].alpha_t > 0.9);
}

#[test]
fn aux_loss_alone_reaches_the_encoder() {
    let arch = StudentArch {
        input_dim: 3,
        encoder_widths: vec![5],
        head_hidden: vec![4],
        num_classes: 3,
        head_input: HeadInput::None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = StudentModel::<f64>::init(arch, &mut rng).unwrap();
    for p in model.params_mut() {
        for v in p.data_mut() {
            *v += 0.05;
        }
    }
    let x = Tensor::new(vec![2, 3], vec![0.3, -0.2, 0.9, 1.1, 0.4, -0.7]).unwrap();
    let loss = |m: &StudentModel<f64>, g: &mut Graph<f64>| {
        let b = m.bind(g);
        let xv = g.constant(x.clone());
        let f = m.encode(g, &b, xv).unwrap();
        let q = m.aux_probs(g, &b, f, None).unwrap();
        let (ql, qu) = (q, q);
        (aux_distillation(g, ql, &[0, 2], qu, &[1, 1]).unwrap(), b)
    };
    let mut g = Graph::new();
    let (l, b) = loss(&model, &mut g);
    g.backward(l).unwrap();
    let analytic = g.grad(b.encoder.0[0]).unwrap().data()[0];
    let h = 1e-6;
    let orig = model.encoder.layers[0].weight.data()[0];
    let mut at = |d: f64| {
        model.encoder.layers[0].weight.data_mut()[0] = orig + d;
        let mut g = Graph::new();
        let (l, _) = loss(&model, &mut g);
        g.value(l).item()
    };
    let numeric = (at(h) - at(-h)) / (2.0 * h);
    assert!(analytic.abs() > 1e-8);
    assert!((analytic - numeric).abs() / analytic.abs() < 1e-5);
}

/// Accuracy of a softmax-regression probe trained on teacher embeddings.
fn probe_accuracy(ds: &SemiDataset, pls: &PseudoLabelSet) -> f64 {
    let train_idx = ds.unlabeled_pool();
    let test_idx: Vec<usize> = (0..ds.n_test()).map(|r| ds.global_index(Split::Test, r)).collect();
    let to_tensor = |idx: &[usize]| {
        let rows = pls.embeddings(idx).unwrap();
        Tensor::new(vec![rows.len(), rows[0].len()], rows.concat()).unwrap()
    };
    let (xtr, xte) = (to_tensor(&train_idx), to_tensor(&test_idx));
    let d = xtr.dims2().1;
    let mut w = vec![Tensor::<f64>::zeros(&[d, 4]), Tensor::zeros(&[4])];
    let mut opt = AdamW::new(AdamWConfig::default(), w.iter());
    for _ in 0..300 {
        let mut g = Graph::new();
        let (wv, bv) = (g.param(w[0].clone()), g.param(w[1].clone()));
        let xv = g.constant(xtr.clone());
        let z = g.matmul(xv, wv).unwrap();
        let z = g.add_bias(z, bv).unwrap();
        let p = g.softmax(z).unwrap();
        let ce = g.cross_entropy(p, Target::Hard(ds.train_labels.clone())).unwrap();
        let l = g.mean(ce);
        g.backward(l).unwrap();
        let grads = vec![g.grad(wv).unwrap().clone(), g.grad(bv).unwrap().clone()];
        opt.step(w.iter_mut(), &grads, 0.05).unwrap();
    }
    let logits = zeromatch_core::autodiff::matmul_kernel(&xte, &w[0]).unwrap();
    let hits = (0..ds.n_test())
        .filter(|&i| {
            let row: Vec<f64> = logits.row(i).iter().zip(w[1].data()).map(|(a, b)| a + b).collect();
            zeromatch_core::tensor::argmax(&row) == ds.test_labels[i]
        })
        .count();
    hits as f64 / ds.n_test() as f64
}

#[test]
fn embedding_informativeness_tracks_teacher_quality() {
    for seed in 0..3 {
        let (ds, _) = task(4.0, 1, 1.0, seed);
        let probe = |a: f64| {
            let spec = OracleSpec {
                embedding: Some(EmbeddingSpec::new(16, 0.5)),
                ..OracleSpec::new(4, a, 50 + seed)
            };
            probe_accuracy(&ds, &generate(&spec, &ds, true).unwrap())
        };
        let (good, bad) = (probe(0.95), probe(0.3));
        assert!(good > bad, "seed {seed}: probe {good} vs {bad}");
    }
}

#[test]
fn every_method_trains_and_logs() {
    let (ds, pls) = task(4.0, 2, 0.6, 4);
    let spec = OracleSpec {
        embedding: Some(EmbeddingSpec::new(4, 0.5)),
        ..OracleSpec::new(4, 0.6, 4)
    };
    let with_emb = generate(&spec, &ds, true).unwrap();
    for method in Method::ALL {
        let pls = if method == Method::ZeromatchEmb { &with_emb } else { &pls };
        let out = train::<f64>(method, &ds, Some(pls), &short(20, 20), 1).unwrap();
        let expected = if method.has_stage1() { 40 } else { 20 };
        assert_eq!(out.log.len(), expected, "{method}");
        assert!(out.log.iter().all(|r| r.loss_total.is_finite()), "{method}");
        let acc = evaluate(&out.model, &ds, Split::Test, Some(pls)).unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn single_precision_training_runs() {
    let (ds, pls) = task(4.0, 2, 0.95, 5);
    let out = train::<f32>(Method::Zeromatch, &ds, Some(&pls), &short(300, 300), 2).unwrap();
    let acc = evaluate(&out.model, &ds, Split::Test, Some(&pls)).unwrap();
    assert!(acc > 0.5, "f32 accuracy {acc}");
}

#[test]
fn missing_inputs_are_configuration_errors() {
    let (ds, pls) = task(4.0, 1, 0.6, 6);
    let err = train::<f64>(Method::Zeromatch, &ds, None, &short(1, 1), 0).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    let err = train::<f64>(Method::ZeromatchEmb, &ds, Some(&pls), &short(1, 1), 0).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    let mut partial = pls.clone();
    let first = *partial.records.keys().next().unwrap();
    partial.records.remove(&first);
    let err = train::<f64>(Method::PseudoSupervise, &ds, Some(&partial), &short(1, 1), 0).unwrap_err();
    assert!(matches!(err, Error::Coverage { .. }), "{err}");
    assert!(train::<f64>(Method::Adamatch, &ds, None, &short(0, 2), 0).is_ok());
}

#[test]
fn step_log_has_the_documented_columns() {
    let (ds, pls) = task(4.0, 1, 0.6, 7);
    let out = train::<f64>(Method::Zeromatch, &ds, Some(&pls), &short(3, 3), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    write_step_log(&path, &out.log).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,lr,alpha_t,loss_total,loss_s,loss_u,loss_kd2,mask_rate"));
    assert_eq!(lines.count(), 6);
    write_step_log(&path, &[]).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "step,lr,alpha_t,loss_total,loss_s,loss_u,loss_kd2,mask_rate\n"
    );
}
