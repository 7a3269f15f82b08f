//! End-to-end flows through real files: dataset on disk, model on disk,
//! predictions compared across the round trip.

use std::fs::File;
use std::io::BufWriter;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use honeyspec::dataset::{load_dataset, synth_generate, SynthSpec};
use honeyspec::eval::{cross_validate, CvOptions, FoldBy, Target};
use honeyspec::pipeline::{
    load_model, predict, save_model, train_hierarchical, PipelineConfig,
};
use honeyspec::stage::{ClassifierSpec, FeatureSpec};

fn fixture() -> honeyspec::SpectralDataset {
    synth_generate(
        &SynthSpec {
            origins: 4,
            levels: vec![0, 5, 25],
            groups_per_class: 3,
            records_per_group: 2,
            class_mean_separation: 9.0,
            noise_sd: 0.5,
            band_count: 20,
        },
        77,
    )
    .unwrap()
}

#[test]
fn dataset_survives_disk_round_trip() {
    let ds = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synth.csv");
    {
        let mut w = BufWriter::new(File::create(&path).unwrap());
        ds.write_to(&mut w).unwrap();
    }
    let reloaded = load_dataset(File::open(&path).unwrap(), &ds.grid, &ds.level_set).unwrap();
    assert_eq!(ds, reloaded);
}

#[test]
fn model_survives_disk_round_trip_on_100_probes() {
    let ds = fixture();
    let model = train_hierarchical(
        &ds,
        &PipelineConfig {
            standardize: true,
            ..PipelineConfig::default()
        },
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.hspec");
    {
        let mut w = BufWriter::new(File::create(&path).unwrap());
        save_model(&model, &mut w).unwrap();
    }
    let reloaded = load_model(File::open(&path).unwrap()).unwrap();
    assert_eq!(model, reloaded);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let probe: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..12.0)).collect();
        assert_eq!(
            predict(&model, &probe).unwrap(),
            predict(&reloaded, &probe).unwrap()
        );
    }
}

#[test]
fn acquisition_mode_cv_runs_and_is_deterministic() {
    let ds = fixture();
    let opts = CvOptions {
        n_folds: 3,
        seed: 5,
        standardize: false,
        fold_by: FoldBy::Acquisition,
    };
    let run = || {
        cross_validate(
            &ds,
            Target::Origin,
            &FeatureSpec::Lda { dims: 3 },
            &ClassifierSpec::knn_default(),
            &opts,
        )
        .unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.mean > 0.9, "separated synthetic data should score high");
}
