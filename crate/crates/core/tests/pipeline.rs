mod common;

use common::{keyword_corpus, quick_pipeline};
use ovrstack::eval::{run_experiment, train_pipeline, ExperimentConfig, Pipeline};
use ovrstack::stage2::CombinerKind;
use ovrstack::corpus::{LabeledCorpus, Sample};
use ovrstack::{Class, Error, ErrorKind, Label, LabelSpace};

#[test]
fn small_experiment_completes_and_serializes() {
    let corpus = keyword_corpus(60, 0.0, 1);
    let config = ExperimentConfig {
        folds: 2,
        repetitions: 1,
        seed: 5,
        pipeline: quick_pipeline(3, CombinerKind::Fixed, 20),
    };
    let report = run_experiment(&corpus, &config).unwrap();
    assert_eq!(report.folds.len(), 2);
    assert_eq!(report.folds.iter().map(|f| f.test_size).sum::<usize>(), 60);
    for f in &report.folds {
        assert_eq!(f.train_size + f.test_size, 60);
        assert_eq!(f.metrics.samples as usize, f.test_size);
        assert_eq!(f.training.members.len(), 3);
    }
    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("\"total_f\""));
    assert_eq!(run_experiment(&corpus, &config).unwrap(), report);
}

#[test]
fn separable_corpus_scores_high() {
    let corpus = keyword_corpus(600, 0.0, 12);
    let config = ExperimentConfig {
        folds: 2,
        repetitions: 1,
        seed: 8,
        pipeline: quick_pipeline(3, CombinerKind::Fixed, 60),
    };
    let report = run_experiment(&corpus, &config).unwrap();
    assert!(report.summary.total_f.mean >= 0.95, "{:?}", report.summary);
}

#[test]
fn fold_errors_carry_context() {
    let corpus = keyword_corpus(60, 0.0, 3);
    let mut config = ExperimentConfig {
        folds: 2,
        repetitions: 1,
        ..ExperimentConfig::default()
    };
    config.pipeline = quick_pipeline(3, CombinerKind::Fixed, 5);
    config.pipeline.stage1.caps = [0, 1, 1];
    assert_eq!(run_experiment(&corpus, &config).unwrap_err().kind(), ErrorKind::Usage);

    config.pipeline.stage1.caps = [100, 100, 100];
    config.pipeline.stage2.kind = CombinerKind::Lr;
    config.pipeline.stage2.logistic.l2 = vec![-1.0];
    let err = run_experiment(&corpus, &config).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Usage, "{err}");

    // A single racism sample leaves one training part without the class.
    let samples: Vec<Sample> = corpus
        .iter()
        .filter(|s| s.label != Some(Label::Class(Class::Racism)))
        .cloned()
        .chain(corpus.iter().find(|s| s.label == Some(Label::Class(Class::Racism))).cloned())
        .collect();
    let sparse = LabeledCorpus::new(samples, LabelSpace::ThreeClass).unwrap();
    config.pipeline.stage2.kind = CombinerKind::Fixed;
    match run_experiment(&sparse, &config).unwrap_err() {
        Error::Fold { repetition, source, .. } => {
            assert_eq!(repetition, 0);
            assert_eq!(source.kind(), ErrorKind::Data);
        }
        other => panic!("expected fold context, got {other}"),
    }
}

#[test]
fn trained_pipeline_round_trips() {
    let corpus = keyword_corpus(90, 0.0, 4);
    let mut config = quick_pipeline(5, CombinerKind::Lr, 20);
    config.augmentation = Some(ovrstack::augment::AugmentConfig {
        per_class: 50,
        ..Default::default()
    });
    let (pipeline, summary) = train_pipeline(&corpus, &config, 3).unwrap();
    assert_eq!(summary.stage_two_rows, summary.validation_size + 150);
    let dir = tempfile::tempdir().unwrap();
    pipeline.save(dir.path()).unwrap();
    let loaded = Pipeline::load(dir.path()).unwrap();
    assert_eq!(loaded.predict_corpus(&corpus).unwrap(), pipeline.predict_corpus(&corpus).unwrap());
}
