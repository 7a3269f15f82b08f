//! `honeyspec` — train, evaluate and apply the two-stage spectral
//! origin/adulteration detector from the command line.
//!
//! Exit codes: 0 on success, 1 on operational failures (unreadable or
//! invalid data, failed fits), 2 on usage errors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use honeyspec::dataset::{load_dataset, synth_generate, SpectralDataset, SynthSpec, WavelengthGrid};
use honeyspec::eval::{cross_validate, CvOptions, FoldBy, Target};
use honeyspec::pipeline::{
    evaluate_tables, load_model, predict, save_model, train_hierarchical, HierarchicalModel,
    PipelineConfig, TablesConfig,
};
use honeyspec::report::{render_bundle, render_cv_report, ReportFormat};
use honeyspec::stage::{ClassifierSpec, FeatureSpec, KernelChoice, LDA_DIMS_AUTO};

#[derive(Parser)]
#[command(
    name = "honeyspec",
    version,
    about = "Spectral honey classification: origin identification and adulteration detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset file against the schema and data invariants.
    Validate(ValidateArgs),
    /// Generate a synthetic dataset with known class structure.
    Synth(SynthArgs),
    /// Train the hierarchical model and save it.
    Train(TrainArgs),
    /// Cross-validate one feature/classifier configuration.
    Cv(CvArgs),
    /// Produce the full evaluation tables (origin stage, per-origin
    /// adulteration, end-to-end).
    Tables(TablesArgs),
    /// Classify spectra with a trained model and emit plot data.
    Predict(PredictArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset file (comma-delimited, see README for the schema).
    #[arg(long)]
    data: PathBuf,
    /// Number of spectral bands per record.
    #[arg(long, default_value_t = 128)]
    bands: usize,
    /// First band's wavelength in nm.
    #[arg(long, default_value_t = 400.0)]
    grid_start: f64,
    /// Wavelength increment between bands in nm.
    #[arg(long, default_value_t = 5.0)]
    grid_step: f64,
    /// Comma-separated adulteration levels the file may contain.
    #[arg(long, default_value = "0,5,10,25,50", value_parser = parse_levels)]
    levels: std::vec::Vec<u32>,
}

impl DataArgs {
    fn load(&self) -> Result<SpectralDataset, String> {
        let grid = WavelengthGrid::new(self.grid_start, self.grid_step, self.bands)
            .map_err(|e| e.to_string())?;
        let file = File::open(&self.data)
            .map_err(|e| format!("cannot open {}: {e}", self.data.display()))?;
        load_dataset(BufReader::new(file), &grid, &self.levels).map_err(|e| e.to_string())
    }
}

fn parse_levels(raw: &str) -> Result<Vec<u32>, String> {
    let levels: Result<Vec<u32>, _> = raw.split(',').map(|t| t.trim().parse::<u32>()).collect();
    let levels = levels.map_err(|e| format!("bad level list `{raw}`: {e}"))?;
    if levels.is_empty() {
        return Err("level list is empty".into());
    }
    Ok(levels)
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureKind {
    None,
    Pca,
    Lda,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Knn,
    SvmLinear,
    SvmRbf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FoldByArg {
    Group,
    Acquisition,
}

impl From<FoldByArg> for FoldBy {
    fn from(v: FoldByArg) -> FoldBy {
        match v {
            FoldByArg::Group => FoldBy::Group,
            FoldByArg::Acquisition => FoldBy::Acquisition,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Delimited,
}

impl From<FormatArg> for ReportFormat {
    fn from(v: FormatArg) -> ReportFormat {
        match v {
            FormatArg::Markdown => ReportFormat::Markdown,
            FormatArg::Delimited => ReportFormat::Delimited,
        }
    }
}

#[derive(Args, Clone)]
struct ModelConfigArgs {
    /// Feature extraction for the classifier.
    #[arg(long, value_enum, default_value_t = FeatureKind::Lda)]
    features: FeatureKind,
    /// Component count for PCA/LDA (LDA caps at classes - 1, with a note
    /// on stderr when that happens).
    #[arg(long, default_value_t = 10)]
    dims: usize,
    /// Classifier on the extracted features.
    #[arg(long, value_enum, default_value_t = ClassifierKind::Knn)]
    classifier: ClassifierKind,
    /// Neighbor count for KNN.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Soft-margin box constraint for SVM.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// RBF kernel width; omit for the data-driven default.
    #[arg(long)]
    gamma: Option<f64>,
    /// SVM dual stopping tolerance.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// SVM pass budget over the working set.
    #[arg(long, default_value_t = 200)]
    max_passes: usize,
    /// Fit a per-band standardizer on training data.
    #[arg(long, default_value_t = false)]
    standardize: bool,
}

impl ModelConfigArgs {
    fn feature_spec(&self) -> FeatureSpec {
        match self.features {
            FeatureKind::None => FeatureSpec::None,
            FeatureKind::Pca => FeatureSpec::Pca { dims: self.dims },
            FeatureKind::Lda => FeatureSpec::Lda { dims: self.dims },
        }
    }

    fn classifier_spec(&self) -> ClassifierSpec {
        match self.classifier {
            ClassifierKind::Knn => ClassifierSpec::Knn { k: self.k },
            ClassifierKind::SvmLinear => ClassifierSpec::Svm {
                kernel: KernelChoice::Linear,
                c: self.c,
                tol: self.tol,
                max_passes: self.max_passes,
            },
            ClassifierKind::SvmRbf => ClassifierSpec::Svm {
                kernel: KernelChoice::Rbf { gamma: self.gamma },
                c: self.c,
                tol: self.tol,
                max_passes: self.max_passes,
            },
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 11)]
    origins: usize,
    #[arg(long, default_value = "0,5,10,25,50", value_parser = parse_levels)]
    levels: std::vec::Vec<u32>,
    #[arg(long, default_value_t = 4)]
    groups_per_class: usize,
    #[arg(long, default_value_t = 3)]
    records_per_group: usize,
    /// Distance scale between class means.
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 128)]
    bands: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Where to write the trained model.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    config: ModelConfigArgs,
    /// LDA components for the adulteration stage; defaults to one less
    /// than each origin's level count.
    #[arg(long)]
    adult_dims: Option<usize>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    /// What the classifier predicts.
    #[arg(long, value_enum, default_value_t = TargetArg::Origin)]
    target: TargetArg,
    #[command(flatten)]
    config: ModelConfigArgs,
    #[arg(long, default_value_t = 20)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fold assignment unit.
    #[arg(long, value_enum, default_value_t = FoldByArg::Group)]
    fold_by: FoldByArg,
    /// Directory for the report document; stdout gets a summary either way.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Delimited)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Origin,
    Level,
}

#[derive(Args)]
struct TablesArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Feature sets to evaluate.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [FeatureKind::None, FeatureKind::Pca, FeatureKind::Lda])]
    features: Vec<FeatureKind>,
    /// Classifiers to evaluate.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ClassifierKind::Knn, ClassifierKind::SvmLinear, ClassifierKind::SvmRbf])]
    classifiers: Vec<ClassifierKind>,
    #[arg(long, default_value_t = 10)]
    dims: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = false)]
    standardize: bool,
    #[arg(long, default_value_t = 20)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FoldByArg::Group)]
    fold_by: FoldByArg,
    /// Directory the table documents are written into.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Delimited)]
    format: FormatArg,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Spectra to classify: either the dataset schema or the reduced
    /// `record_id,b000,...` form.
    #[arg(long)]
    input: PathBuf,
    /// Directory for per-record plot data; omit to skip plot emission.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Some(threads) = std::env::var_os("HONEYSPEC_THREADS") {
        let parsed = threads.to_string_lossy().parse::<usize>();
        if let Ok(n) = parsed {
            // results are independent of worker count; this only caps CPU use
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        } else {
            eprintln!("warning: ignoring non-numeric HONEYSPEC_THREADS");
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(args) => run_validate(args),
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Cv(args) => run_cv(args),
        Command::Tables(args) => run_tables(args),
        Command::Predict(args) => run_predict(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

/// Writes one output row; reports whether the consumer is still listening.
/// A closed pipe (e.g. `honeyspec predict ... | head`) stops emission
/// without failing the run.
fn emit_row(out: &mut impl Write, line: &str) -> Result<bool, String> {
    match writeln!(out, "{line}") {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(false),
        Err(e) => Err(format!("cannot write to stdout: {e}")),
    }
}

fn run_validate(args: ValidateArgs) -> Result<(), String> {
    let dataset = args.data.load()?;
    let violations = dataset.validate();
    if violations.is_empty() {
        println!(
            "ok: {} records, {} origins, levels {:?}",
            dataset.records.len(),
            dataset.origin_vocabulary.len(),
            dataset.level_set
        );
        Ok(())
    } else {
        let mut out = std::io::stdout().lock();
        for v in &violations {
            if !emit_row(&mut out, &format!("violation: {v}"))? {
                break;
            }
        }
        Err(format!("{} violation(s) found", violations.len()))
    }
}

fn run_synth(args: SynthArgs) -> Result<(), String> {
    let spec = SynthSpec {
        origins: args.origins,
        levels: args.levels,
        groups_per_class: args.groups_per_class,
        records_per_group: args.records_per_group,
        class_mean_separation: args.separation,
        noise_sd: args.noise,
        band_count: args.bands,
    };
    let dataset = synth_generate(&spec, args.seed).map_err(|e| e.to_string())?;
    let mut w = BufWriter::new(
        File::create(&args.out).map_err(|e| format!("cannot create {}: {e}", args.out.display()))?,
    );
    dataset.write_to(&mut w).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    println!(
        "wrote {} records ({} origins x {} levels) to {}",
        dataset.records.len(),
        spec.origins,
        dataset.level_set.len(),
        args.out.display()
    );
    Ok(())
}

fn warn_on_lda_cap(config: &ModelConfigArgs, class_count: usize, what: &str) {
    if matches!(config.features, FeatureKind::Lda) && config.dims > class_count.saturating_sub(1) {
        eprintln!(
            "note: {what} LDA dimensionality capped at {} (classes - 1), {} requested",
            class_count - 1,
            config.dims
        );
    }
}

fn run_train(args: TrainArgs) -> Result<(), String> {
    let dataset = args.data.load()?;
    warn_on_lda_cap(&args.config, dataset.origin_vocabulary.len(), "origin-stage");
    let adulteration_features = match args.config.features {
        FeatureKind::None => FeatureSpec::None,
        FeatureKind::Pca => FeatureSpec::Pca {
            dims: args.adult_dims.unwrap_or(args.config.dims),
        },
        FeatureKind::Lda => FeatureSpec::Lda {
            dims: args.adult_dims.unwrap_or(LDA_DIMS_AUTO),
        },
    };
    let config = PipelineConfig {
        origin_features: args.config.feature_spec(),
        origin_classifier: args.config.classifier_spec(),
        adulteration_features,
        adulteration_classifier: args.config.classifier_spec(),
        standardize: args.config.standardize,
    };
    let model = train_hierarchical(&dataset, &config).map_err(|e| e.to_string())?;
    let mut w = BufWriter::new(
        File::create(&args.model)
            .map_err(|e| format!("cannot create {}: {e}", args.model.display()))?,
    );
    save_model(&model, &mut w).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    println!(
        "trained model: {} origins, {} bands -> {}",
        model.bank.len(),
        model.grid.band_count,
        args.model.display()
    );
    Ok(())
}

fn run_cv(args: CvArgs) -> Result<(), String> {
    let dataset = args.data.load()?;
    let target = match args.target {
        TargetArg::Origin => Target::Origin,
        TargetArg::Level => Target::Level,
    };
    let class_count = match target {
        Target::Origin => dataset.origin_vocabulary.len(),
        Target::Level => dataset.level_set.len(),
    };
    warn_on_lda_cap(&args.config, class_count, "cv");
    let opts = CvOptions {
        n_folds: args.folds,
        seed: args.seed,
        standardize: args.config.standardize,
        fold_by: args.fold_by.into(),
    };
    let report = cross_validate(
        &dataset,
        target,
        &args.config.feature_spec(),
        &args.config.classifier_spec(),
        &opts,
    )
    .map_err(|e| e.to_string())?;

    println!("{}", report.config);
    println!(
        "balanced accuracy: {}",
        honeyspec::report::format_cell(report.mean, report.std)
    );
    if let Some(dir) = &args.out {
        let format: ReportFormat = args.format.into();
        std::fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        let path = dir.join(format!("cv_report.{}", format.extension()));
        write_text(&path, &render_cv_report(&report, format))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_tables(args: TablesArgs) -> Result<(), String> {
    let dataset = args.data.load()?;
    let features = args
        .features
        .iter()
        .map(|f| match f {
            FeatureKind::None => FeatureSpec::None,
            FeatureKind::Pca => FeatureSpec::Pca { dims: args.dims },
            FeatureKind::Lda => FeatureSpec::Lda { dims: args.dims },
        })
        .collect();
    let classifiers = args
        .classifiers
        .iter()
        .map(|c| match c {
            ClassifierKind::Knn => ClassifierSpec::Knn { k: args.k },
            ClassifierKind::SvmLinear => ClassifierSpec::Svm {
                kernel: KernelChoice::Linear,
                c: args.c,
                tol: 1e-3,
                max_passes: 200,
            },
            ClassifierKind::SvmRbf => ClassifierSpec::Svm {
                kernel: KernelChoice::Rbf { gamma: args.gamma },
                c: args.c,
                tol: 1e-3,
                max_passes: 200,
            },
        })
        .collect();
    let config = TablesConfig {
        features,
        classifiers,
        standardize: args.standardize,
        n_folds: args.folds,
        seed: args.seed,
        fold_by: args.fold_by.into(),
    };
    let bundle = evaluate_tables(&dataset, &config).map_err(|e| e.to_string())?;
    let format: ReportFormat = args.format.into();
    std::fs::create_dir_all(&args.out)
        .map_err(|e| format!("cannot create {}: {e}", args.out.display()))?;
    for (name, content) in render_bundle(&bundle, format) {
        let path = args.out.join(format!("{name}.{}", format.extension()));
        write_text(&path, &content)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), String> {
    let file = File::open(&args.model)
        .map_err(|e| format!("cannot open {}: {e}", args.model.display()))?;
    let model = load_model(BufReader::new(file)).map_err(|e| e.to_string())?;

    let mut raw = String::new();
    File::open(&args.input)
        .map_err(|e| format!("cannot open {}: {e}", args.input.display()))?
        .read_to_string(&mut raw)
        .map_err(|e| e.to_string())?;
    let spectra = parse_spectra(&raw, model.grid.band_count)?;

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    let mut out = std::io::stdout().lock();
    for (record_id, bands) in &spectra {
        let prediction = predict(&model, bands).map_err(|e| format!("{record_id}: {e}"))?;
        let purity = if prediction.is_pure() {
            "pure"
        } else {
            "adulterated"
        };
        if let Some(dir) = &args.out {
            let path = dir.join(format!("plot_{record_id}.csv"));
            write_text(&path, &plot_data(&model, bands))?;
        }
        let line = format!(
            "{record_id},{},{},{purity}",
            prediction.origin, prediction.level
        );
        if !emit_row(&mut out, &line)? {
            break;
        }
    }
    Ok(())
}

/// Accepts the full dataset schema or the reduced `record_id,b000,...` form.
fn parse_spectra(raw: &str, band_count: usize) -> Result<Vec<(String, Vec<f64>)>, String> {
    let mut lines = raw.lines();
    let header = lines.next().ok_or("input is empty")?;
    let columns: Vec<&str> = header.split(',').collect();
    let band_offset = if columns.len() == band_count + 1 && columns[0] == "record_id" {
        1
    } else if columns.len() == band_count + 5 && columns[0] == "record_id" {
        5
    } else {
        return Err(format!(
            "unrecognized header: expected record_id plus {band_count} bands (optionally with \
             group_id, acquisition_id, origin, level)",
        ));
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(format!("line {}: expected {} fields", i + 2, columns.len()));
        }
        let bands: Result<Vec<f64>, _> = fields[band_offset..]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect();
        let bands = bands.map_err(|e| format!("line {}: {e}", i + 2))?;
        out.push((fields[0].to_string(), bands));
    }
    if out.is_empty() {
        return Err("no spectra rows in input".into());
    }
    Ok(out)
}

/// Two-column wavelength/value text for plotting one spectrum.
fn plot_data(model: &HierarchicalModel, bands: &[f64]) -> String {
    let mut out = String::from("wavelength_nm,value\n");
    for (i, v) in bands.iter().enumerate() {
        out.push_str(&format!("{},{}\n", model.grid.wavelength_nm(i), v));
    }
    out
}

fn write_text(path: &Path, content: &str) -> Result<(), String> {
    std::fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
