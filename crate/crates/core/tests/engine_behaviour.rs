mod common;

use reidbench::dataman::{generate_synthetic, SyntheticData, SyntheticSpec};
use reidbench::engine::{
    load_checkpoint, run_test_only, run_training, DifferentiableModel, Engine, EngineConfig,
    LinearReIDModel, LogRecord,
};

use common::{linear_model, softmax_setup, train_and_targets, triplet_setup};

fn data(noise: f64) -> SyntheticData {
    generate_synthetic(&SyntheticSpec {
        cluster_noise: noise,
        seed: 1,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn softmax_engine(data: &SyntheticData, config: EngineConfig) -> Engine<LinearReIDModel> {
    let (_, sampler, opt_config, scheduler) = softmax_setup();
    let (model, opt) = linear_model(data, 32, config.seed, opt_config);
    Engine::new(model, opt, scheduler, config, sampler).unwrap()
}

fn param<'a>(model: &'a LinearReIDModel, name: &str) -> &'a ndarray::Array2<f32> {
    &model
        .params()
        .iter()
        .find(|p| p.name == name)
        .unwrap()
        .value
}

#[test]
fn frozen_layers_stay_bit_identical_during_fixbase() {
    let d = data(0.05);
    let (train, targets) = train_and_targets(&d);
    let config = EngineConfig {
        max_epoch: 6,
        fixbase_epoch: 3,
        open_layers: vec!["W_cls".into(), "b_cls".into()],
        ..softmax_setup().0
    };
    let mut engine = softmax_engine(&d, config);
    let w0 = param(engine.model(), "W_embed").clone();
    let c0 = param(engine.model(), "W_cls").clone();
    engine.run_until(3, &train, &targets).unwrap();
    assert_eq!(param(engine.model(), "W_embed"), &w0);
    assert_ne!(param(engine.model(), "W_cls"), &c0);
    engine.run_until(4, &train, &targets).unwrap();
    assert_ne!(param(engine.model(), "W_embed"), &w0);
}

#[test]
fn sixty_epochs_every_ten_gives_six_evaluations() {
    let d = data(0.05);
    let (train, targets) = train_and_targets(&d);
    let mut engine = softmax_engine(&d, softmax_setup().0);
    let outcome = engine.run(&train, &targets).unwrap();
    let evals: Vec<usize> = outcome
        .log
        .iter()
        .filter_map(|r| match r {
            LogRecord::Eval { epoch, .. } => Some(*epoch),
            _ => None,
        })
        .collect();
    assert_eq!(evals, vec![10, 20, 30, 40, 50, 60]);
    assert!(matches!(
        outcome.log[0],
        LogRecord::Header {
            num_train_pids: 10,
            ..
        }
    ));
}

#[test]
fn identical_runs_are_bit_identical() {
    let d = data(0.05);
    let (train, targets) = train_and_targets(&d);
    let run = || {
        let (config, sampler, opt_config, scheduler) = triplet_setup();
        let config = EngineConfig {
            max_epoch: 12,
            ..config
        };
        let (model, opt) = linear_model(&d, 32, config.seed, opt_config);
        run_training(model, &train, &targets, config, opt, scheduler, sampler).unwrap()
    };
    let (m1, o1) = run();
    let (m2, o2) = run();
    assert_eq!(m1, m2);
    assert_eq!(o1.log, o2.log);
    assert_eq!(o1.epoch_losses, o2.epoch_losses);
}

#[test]
fn loss_decreases_on_separable_data() {
    let d = data(0.0);
    let (train, targets) = train_and_targets(&d);
    let mut engine = softmax_engine(&d, softmax_setup().0);
    let losses = engine.run(&train, &targets).unwrap().epoch_losses;
    for (e, w) in losses.windows(2).enumerate() {
        assert!(
            w[1] <= w[0] + 1e-3,
            "epoch {} -> {}: {} -> {}",
            e + 1,
            e + 2,
            w[0],
            w[1]
        );
    }
    assert!(losses.last().unwrap() < &losses[0]);
}

#[test]
fn test_only_reproduces_the_final_evaluation() {
    let d = data(0.05);
    let (train, targets) = train_and_targets(&d);
    let config = softmax_setup().0;
    let mut engine = softmax_engine(&d, config.clone());
    let outcome = engine.run(&train, &targets).unwrap();
    let again = run_test_only(engine.model(), &targets, &config).unwrap();
    assert_eq!(again, outcome.last_reports);
    assert_eq!(
        run_test_only(engine.model(), &targets, &config).unwrap(),
        again
    );
}

#[test]
fn resume_continues_where_the_checkpoint_left_off() {
    let d = data(0.05);
    let (train, targets) = train_and_targets(&d);
    let dir = tempfile::tempdir().unwrap();
    let config = EngineConfig {
        max_epoch: 20,
        save_dir: Some(dir.path().to_owned()),
        ..softmax_setup().0
    };
    let mut full = softmax_engine(
        &d,
        EngineConfig {
            save_dir: None,
            ..config.clone()
        },
    );
    full.run(&train, &targets).unwrap();

    let mut first = softmax_engine(&d, config.clone());
    first.run_until(10, &train, &targets).unwrap();
    let bundle = load_checkpoint(&dir.path().join("checkpoint-ep010.rckp")).unwrap();
    assert_eq!(bundle.epoch, 10);
    let mut second = softmax_engine(&d, config.clone());
    second.resume(bundle).unwrap();
    second.run(&train, &targets).unwrap();
    assert_eq!(second.model(), full.model());

    let log = std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    let headers = log.lines().filter(|l| l.contains("\"header\"")).count();
    assert_eq!(headers, 1);
    assert_eq!(log.lines().filter(|l| l.contains("\"eval\"")).count(), 2);
}

#[test]
fn resume_rejects_a_different_configuration() {
    let d = data(0.05);
    let (train, targets) = train_and_targets(&d);
    let mut a = softmax_engine(
        &d,
        EngineConfig {
            max_epoch: 2,
            ..softmax_setup().0
        },
    );
    a.run(&train, &targets).unwrap();
    let mut b = softmax_engine(
        &d,
        EngineConfig {
            margin: 0.5,
            ..softmax_setup().0
        },
    );
    assert!(b.resume(a.checkpoint()).is_err());
}

#[test]
fn every_parameter_has_a_gradient_of_matching_shape() {
    let d = data(0.05);
    let (model, _) = linear_model(&d, 8, 0, Default::default());
    let x = d.train.view();
    let out = model.forward(x);
    let grads = model.backward(x, Some(&out.embeddings), Some(&out.logits));
    assert_eq!(grads.len(), model.params().len());
    for (g, p) in grads.iter().zip(model.params()) {
        assert_eq!(g.dim(), p.value.dim(), "{}", p.name);
    }
}
