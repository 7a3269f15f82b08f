//! Cross-validates the headline configuration on a synthetic dataset.
//!
//! Run with `cargo run --example quickstart`.

use honeyspec::dataset::{synth_generate, SynthSpec};
use honeyspec::eval::{cross_validate, CvOptions, Target};
use honeyspec::stage::{ClassifierSpec, FeatureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = synth_generate(&SynthSpec::default(), 42)?;
    let report = cross_validate(
        &dataset,
        Target::Origin,
        &FeatureSpec::Lda { dims: 10 },
        &ClassifierSpec::knn_default(),
        &CvOptions::default(),
    )?;
    println!("balanced accuracy {:.4} ± {:.4}", report.mean, report.std);
    Ok(())
}
