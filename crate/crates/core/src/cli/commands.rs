use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::settings::{absolute, parse_analytic, Common, HasCommon, RunRecord};
use super::{CliError, CliResult};
use crate::baselines::{baseline_estimate, orient_output, BaselineSidecar, Method, Scale};
use crate::cloud::io::{companion, read_cloud, read_indices, write_curvatures, write_indices, write_vectors};
use crate::cloud::{Curvature, PatchSampler, PointCloud, SpatialIndex, SurfaceEstimate, Vec3};
use crate::dataset::shapes::bundled_corpus;
use crate::dataset::{generate_dataset, read_dataset, read_stem_list, DensityScheme, GenerateOptions, ShapeSpec, NOISE_LEVELS, STEM_LIST_FILE};
use crate::evaluation::{emit_report, evaluate, load_cases, BaselineEstimator, Estimator, GroundTruth, ModelEstimator, Precomputed};
use crate::network::{checkpoint, estimate_cloud, ModelConfig, OutputSpec};
use crate::training::gradcheck::{gradcheck as run_gradcheck, GradcheckConfig};
use crate::training::{train as run_train, TrainConfig};

macro_rules! has_common {
    ($($t:ty),*) => {
        $(impl HasCommon for $t {
            fn common(&self) -> &Common {
                &self.common
            }
            fn common_mut(&mut self) -> &mut Common {
                &mut self.common
            }
        })*
    };
}

has_common!(DatasetArgs, TrainArgs, EstimateArgs, BaselineArgs, EvalArgs, GradcheckArgs);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// Single scale: patch radius 0.05, 1024 point functions
    Ss,
    /// Multi-scale: radii 0.01, 0.03, 0.07, 3072 point functions
    Ms,
}

impl Arch {
    pub fn scales(self) -> Vec<f64> {
        match self {
            Arch::Ss => vec![0.05],
            Arch::Ms => vec![0.01, 0.03, 0.07],
        }
    }

    fn of(config: &ModelConfig) -> Arch {
        if config.scales.len() == 1 {
            Arch::Ss
        } else {
            Arch::Ms
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outputs {
    /// Unoriented normals
    Normals,
    /// Oriented normals
    OrientedNormals,
    /// Principal curvatures
    Curvatures,
    /// Unoriented normals and principal curvatures
    Joint,
}

impl Outputs {
    pub fn spec(self) -> OutputSpec {
        match self {
            Outputs::Normals => OutputSpec::UnorientedNormal,
            Outputs::OrientedNormals => OutputSpec::OrientedNormal,
            Outputs::Curvatures => OutputSpec::Curvature,
            Outputs::Joint => OutputSpec::Joint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryMode {
    /// Every point of the cloud
    All,
    /// The indices in `<stem>.pidx` next to the cloud
    Pidx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientMode {
    /// Minimum-spanning-tree propagation over a k-NN graph
    Mst,
}

fn required(path: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    match path {
        Some(p) => absolute(p),
        None => Err(CliError::usage(format!("missing required setting --{flag}"))),
    }
}

fn parse_list<T: std::str::FromStr>(values: &[String], what: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    values
        .iter()
        .map(|v| v.parse().map_err(|e| CliError::usage(format!("bad {what} `{v}`: {e}"))))
        .collect()
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::failure(format!("writing {}: {e}", path.display())))
}

// ---------------------------------------------------------------- dataset

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DatasetArgs {
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Directory whose .obj and .ply meshes become shapes (named by file stem)
    #[arg(long)]
    pub meshes: Option<PathBuf>,

    /// Analytic shape KIND[:key=value...], e.g. sphere:radius=1, cylinder:radius=2:height=4, sheet:two_layer=true (repeatable)
    #[arg(long)]
    pub analytic: Vec<String>,

    /// Include the bundled meshes (cube, plank, cylinder, cone, torus, ellipsoid, blob, bumpy_torus)
    #[arg(long)]
    pub bundled: bool,

    /// Points sampled per shape
    #[arg(long, default_value_t = 100_000)]
    pub points: usize,

    /// Noise levels as fractions of the bounding-box diagonal
    #[arg(long, value_delimiter = ',', default_values_t = NOISE_LEVELS)]
    pub noise: Vec<f64>,

    /// Density variants to add: gradient, stripes [default: none]
    #[arg(long, value_delimiter = ',')]
    pub density: Vec<String>,

    /// Size of the per-cloud `.pidx` query subset
    #[arg(long, default_value_t = 5000)]
    pub test_indices: usize,

    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

fn mesh_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::usage(format!("reading mesh directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("obj" | "ply")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn dataset(mut args: DatasetArgs) -> CliResult<()> {
    let out = required(&args.out, "out")?;
    args.out = Some(out.clone());
    let seed = args.common.seed.unwrap_or(0);
    let density: Vec<DensityScheme> = parse_list(&args.density, "density scheme")?;
    let mut shapes = Vec::new();
    if let Some(dir) = &args.meshes {
        let dir = absolute(dir)?;
        for path in mesh_files(&dir)? {
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            shapes.push(ShapeSpec::mesh(name, path));
        }
        args.meshes = Some(dir);
    }
    for spec in &args.analytic {
        let (name, shape) = parse_analytic(spec)?;
        shapes.push(ShapeSpec::analytic(name, shape));
    }
    let bundled = if args.bundled { bundled_corpus() } else { Vec::new() };
    let mesh_dir = out.join("meshes");
    for (name, _) in &bundled {
        shapes.push(ShapeSpec::mesh(*name, mesh_dir.join(format!("{name}.obj"))));
    }
    if shapes.is_empty() {
        return Err(CliError::usage("no shapes: give --meshes, --analytic or --bundled"));
    }
    let mut names: Vec<&str> = shapes.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::usage(format!("duplicate shape name `{}`", w[0])));
    }
    if args.points == 0 {
        return Err(CliError::usage("--points must be at least 1"));
    }
    if let Some(l) = args.noise.iter().find(|l| !(**l >= 0.0)) {
        return Err(CliError::usage(format!("noise level must be non-negative, got {l}")));
    }

    RunRecord::new("dataset", seed, &args)?.write(&out)?;
    if !bundled.is_empty() {
        fs::create_dir_all(&mesh_dir).map_err(|e| CliError::failure(format!("creating {}: {e}", mesh_dir.display())))?;
        for (name, mesh) in &bundled {
            mesh.write_obj(&mesh_dir.join(format!("{name}.obj")))?;
        }
    }
    let opts = GenerateOptions {
        points: args.points,
        noise_levels: args.noise.clone(),
        density,
        test_indices: args.test_indices,
        seed,
    };
    let outcome = generate_dataset(&shapes, &opts, &out)?;
    println!("wrote {} point clouds for {} shapes to {}", outcome.manifest.variants.len(), outcome.manifest.shapes.len(), out.display());
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        for (name, e) in &outcome.failures {
            eprintln!("shape `{name}` failed: {e}");
        }
        Err(CliError::failure(format!("{} of {} shapes failed", outcome.failures.len(), shapes.len())))
    }
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Stem list inside the dataset directory
    #[arg(long, default_value = STEM_LIST_FILE)]
    pub list: String,

    /// Output directory for checkpoints and progress.csv
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Network architecture
    #[arg(long, value_enum, default_value_t = Arch::Ss)]
    pub arch: Arch,

    /// Properties to regress
    #[arg(long, value_enum, default_value_t = Outputs::Normals)]
    pub outputs: Outputs,

    #[arg(long, default_value_t = 2000)]
    pub max_epochs: usize,

    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,

    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,

    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,

    /// Random patch centers per cloud and epoch
    #[arg(long, default_value_t = 1000)]
    pub patches_per_cloud: usize,

    /// Points per patch (padded or subsampled)
    #[arg(long, default_value_t = 500)]
    pub points_per_patch: usize,

    /// Weight of the curvature term in the joint loss
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,

    /// Write epoch_NNNN.ckpt every this many epochs (0 disables)
    #[arg(long, default_value_t = 50)]
    pub checkpoint_every: usize,

    /// Epochs compared by the convergence test (0 disables)
    #[arg(long, default_value_t = 50)]
    pub convergence_window: usize,

    /// Relative loss improvement below which training stops
    #[arg(long, default_value_t = 1e-4)]
    pub convergence_tolerance: f64,

    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

pub fn train(mut args: TrainArgs) -> CliResult<()> {
    let data = required(&args.data, "data")?;
    let out = required(&args.out, "out")?;
    args.data = Some(data.clone());
    args.out = Some(out.clone());
    let seed = args.common.seed.unwrap_or(0);
    let output = args.outputs.spec();
    let config = TrainConfig {
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        momentum: args.momentum,
        patches_per_cloud: args.patches_per_cloud,
        max_epochs: args.max_epochs,
        n_points: args.points_per_patch,
        scales: args.arch.scales(),
        output,
        lambda: args.lambda,
        seed,
        checkpoint_every: args.checkpoint_every,
        convergence_window: args.convergence_window,
        convergence_tolerance: args.convergence_tolerance,
        model: None,
    };
    config.validate()?;
    let clouds = read_dataset(&data, &args.list, output.has_normal(), output.has_curvature()).map_err(|e| match e {
        crate::Error::MissingFile(p) => CliError::usage(format!(
            "{} missing: --outputs {} needs it",
            p.display(),
            args.outputs.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
        )),
        e => e.into(),
    })?;
    crate::training::check_ground_truth(&clouds, output)?;

    RunRecord::new("train", seed, &args)?.write(&out)?;
    let outcome = run_train(clouds, config, &out)?;
    println!(
        "trained {} epochs{}; final loss {:.6e}, best {:.6e}; checkpoint {}",
        outcome.epochs,
        if outcome.converged { " (converged)" } else { "" },
        outcome.final_loss,
        outcome.best_loss,
        outcome.final_checkpoint.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- shared input handling

/// Clouds named by `input`: a single `.xyz` file, or a directory with a stem list.
fn input_clouds(input: &Path, list: &str) -> CliResult<(PathBuf, Vec<String>)> {
    if input.is_dir() {
        Ok((input.to_path_buf(), read_stem_list(&input.join(list))?))
    } else if input.extension().and_then(|e| e.to_str()) == Some("xyz") {
        let dir = input.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = input.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        Ok((dir, vec![stem]))
    } else if input.exists() {
        Err(CliError::usage(format!("{} is neither a directory nor an .xyz file", input.display())))
    } else {
        Err(CliError::usage(format!("input {} does not exist", input.display())))
    }
}

fn query_points(dir: &Path, cloud: &PointCloud, mode: QueryMode) -> CliResult<Vec<usize>> {
    match mode {
        QueryMode::All => Ok((0..cloud.len()).collect()),
        QueryMode::Pidx => {
            let idx = read_indices(&companion(dir, &cloud.name, "pidx"))?;
            if let Some(&i) = idx.iter().find(|&&i| i >= cloud.len()) {
                return Err(CliError::usage(format!("{}.pidx: index {i} out of range for {} points", cloud.name, cloud.len())));
            }
            Ok(idx)
        }
    }
}

const NAN3: Vec3 = Vec3::new(f64::NAN, f64::NAN, f64::NAN);
const NAN2: Curvature = Curvature { k1: f64::NAN, k2: f64::NAN };

/// Writes one row per estimate; failed estimates become NaN rows. With
/// `pidx`, the query indices are stored alongside so rows can be matched.
fn write_estimates(
    out: &Path,
    stem: &str,
    estimates: &[Option<SurfaceEstimate>],
    normals: bool,
    curvatures: bool,
    pidx: Option<&[usize]>,
) -> CliResult<()> {
    if normals {
        let rows: Vec<Vec3> = estimates.iter().map(|e| e.and_then(|e| e.normal).unwrap_or(NAN3)).collect();
        write_vectors(&companion(out, stem, "normals"), &rows)?;
    }
    if curvatures {
        let rows: Vec<Curvature> = estimates.iter().map(|e| e.and_then(|e| e.curvature).unwrap_or(NAN2)).collect();
        write_curvatures(&companion(out, stem, "curv"), &rows)?;
    }
    if let Some(idx) = pidx {
        write_indices(&companion(out, stem, "pidx"), idx)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- estimate

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// An .xyz file, or a directory whose stem list names the clouds
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Stem list used when --input is a directory
    #[arg(long, default_value = STEM_LIST_FILE)]
    pub list: String,

    /// Output directory for .normals / .curv files
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Points to estimate
    #[arg(long, value_enum, default_value_t = QueryMode::All)]
    pub query: QueryMode,

    /// Expected architecture; a mismatch with the checkpoint is an error [default: any]
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,

    /// Expected outputs; a mismatch with the checkpoint is an error [default: any]
    #[arg(long, value_enum)]
    pub outputs: Option<Outputs>,

    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

pub fn estimate(mut args: EstimateArgs) -> CliResult<()> {
    let ckpt = required(&args.checkpoint, "checkpoint")?;
    let input = required(&args.input, "input")?;
    let out = required(&args.out, "out")?;
    args.checkpoint = Some(ckpt.clone());
    args.input = Some(input.clone());
    args.out = Some(out.clone());
    let seed = args.common.seed.unwrap_or(0);
    let (model, _) = checkpoint::load::<f32>(&ckpt)?;
    let spec = model.config.output;
    if let Some(arch) = args.arch {
        if Arch::of(&model.config) != arch {
            return Err(CliError::usage(format!("checkpoint has scales {:?}, not the {arch:?} architecture", model.config.scales)));
        }
    }
    if let Some(o) = args.outputs {
        if o.spec() != spec {
            return Err(CliError::usage(format!("checkpoint predicts {spec:?}, not {:?}", o.spec())));
        }
    }
    let (dir, stems) = input_clouds(&input, &args.list)?;
    let mut jobs = Vec::new();
    for stem in &stems {
        let cloud = read_cloud(&dir, stem, false, false)?;
        let queries = query_points(&dir, &cloud, args.query)?;
        jobs.push((cloud, queries));
    }

    RunRecord::new("estimate", seed, &args)?.write(&out)?;
    for (cloud, queries) in jobs {
        let stem = cloud.name.clone();
        let sampler = PatchSampler::new(cloud)?;
        let estimates = estimate_cloud(&model, &sampler, &queries, seed)?;
        let failures = estimates.iter().filter(|e| e.is_none()).count();
        let pidx = (args.query == QueryMode::Pidx).then_some(queries.as_slice());
        write_estimates(&out, &stem, &estimates, spec.has_normal(), spec.has_curvature(), pidx)?;
        println!("{stem}: {} points, {failures} failures", estimates.len());
    }
    Ok(())
}

// ---------------------------------------------------------------- baseline

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    /// An .xyz file, or a directory whose stem list names the clouds
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Stem list used when --input is a directory
    #[arg(long, default_value = STEM_LIST_FILE)]
    pub list: String,

    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Fitting method: pca or jet
    #[arg(long, default_value_t = Method::Jet)]
    pub method: Method,

    /// Neighborhood: small (18), medium (112) or large (450) nearest neighbors
    #[arg(long, default_value_t = Scale::Small)]
    pub scale: Scale,

    /// Explicit neighbor count, overriding --scale
    #[arg(long)]
    pub neighbors: Option<usize>,

    /// Orient normals after fitting [default: unoriented]
    #[arg(long, value_enum)]
    pub orient: Option<OrientMode>,

    /// Neighbors per point in the orientation graph
    #[arg(long, default_value_t = 6)]
    pub orient_k: usize,

    /// Points to estimate
    #[arg(long, value_enum, default_value_t = QueryMode::All)]
    pub query: QueryMode,

    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

pub fn baseline(mut args: BaselineArgs) -> CliResult<()> {
    let input = required(&args.input, "input")?;
    let out = required(&args.out, "out")?;
    args.input = Some(input.clone());
    args.out = Some(out.clone());
    let seed = args.common.seed.unwrap_or(0);
    let neighbors = args.neighbors.unwrap_or(args.scale.neighbors());
    if neighbors == 0 {
        return Err(CliError::usage("--neighbors must be at least 1"));
    }
    if args.orient.is_some() && args.orient_k < 2 {
        return Err(CliError::usage("--orient-k must be at least 2"));
    }
    let (dir, stems) = input_clouds(&input, &args.list)?;
    let mut jobs = Vec::new();
    for stem in &stems {
        let cloud = read_cloud(&dir, stem, false, false)?;
        if neighbors > cloud.len() {
            return Err(CliError::usage(format!("{stem}: {neighbors} neighbors requested from {} points", cloud.len())));
        }
        let queries = query_points(&dir, &cloud, args.query)?;
        jobs.push((cloud, queries));
    }

    RunRecord::new("baseline", seed, &args)?.write(&out)?;
    for (cloud, queries) in jobs {
        let index = SpatialIndex::build(&cloud)?;
        let mut output = baseline_estimate(&cloud, &index, args.method, neighbors, &queries)?;
        let components = match args.orient {
            Some(OrientMode::Mst) => Some(orient_output(&cloud, &mut output, args.orient_k)?),
            None => None,
        };
        let pidx = (args.query == QueryMode::Pidx).then_some(queries.as_slice());
        write_estimates(&out, &cloud.name, &output.estimates, true, args.method == Method::Jet, pidx)?;
        let sidecar = BaselineSidecar {
            method: args.method,
            scale: args.neighbors.is_none().then_some(args.scale),
            neighbors,
            queries: queries.len(),
            failures: output.failures,
            oriented: args.orient.is_some(),
            components,
        };
        let mut text = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::failure(e.to_string()))?;
        text.push('\n');
        write_file(&out.join(format!("{}.baseline.json", cloud.name)), &text)?;
        println!("{}: {} points, {} failures", cloud.name, queries.len(), output.failures);
    }
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Test dataset directory (clouds with ground truth)
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Stem list inside the dataset directory
    #[arg(long, default_value = STEM_LIST_FILE)]
    pub list: String,

    /// Output directory for report.csv, summary.csv and summary.svg
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Precomputed predictions LABEL=DIR; append :oriented if normal signs are meaningful (repeatable)
    #[arg(long)]
    pub predictions: Vec<String>,

    /// Trained network LABEL=CHECKPOINT (repeatable)
    #[arg(long)]
    pub checkpoint: Vec<String>,

    /// Baseline METHOD:SCALE[:mst], e.g. jet:small or pca:large:mst (repeatable)
    #[arg(long)]
    pub baseline: Vec<String>,

    /// Also score the ground truth itself (all errors zero)
    #[arg(long)]
    pub gt: bool,

    /// Neighbors per point in MST orientation graphs
    #[arg(long, default_value_t = 6)]
    pub orient_k: usize,

    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

fn labeled(spec: &str, what: &str) -> CliResult<(String, String)> {
    spec.split_once('=')
        .filter(|(l, v)| !l.is_empty() && !v.is_empty())
        .map(|(l, v)| (l.to_string(), v.to_string()))
        .ok_or_else(|| CliError::usage(format!("expected LABEL={what}, got `{spec}`")))
}

fn parse_baseline(spec: &str, orient_k: usize) -> CliResult<BaselineEstimator> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::usage(format!("expected METHOD:SCALE[:mst], got `{spec}`"));
    if !(2..=3).contains(&parts.len()) || (parts.len() == 3 && parts[2] != "mst") {
        return Err(bad());
    }
    let method: Method = parts[0].parse().map_err(|_| bad())?;
    let scale: Scale = parts[1].parse().map_err(|_| bad())?;
    let orient = (parts.len() == 3).then_some(orient_k);
    Ok(BaselineEstimator {
        method,
        neighbors: scale.neighbors(),
        orient,
        label: Some(format!("{method}_{scale}{}", if orient.is_some() { "_mst" } else { "" })),
    })
}

pub fn eval(mut args: EvalArgs) -> CliResult<()> {
    let data = required(&args.data, "data")?;
    let out = required(&args.out, "out")?;
    args.data = Some(data.clone());
    args.out = Some(out.clone());
    let seed = args.common.seed.unwrap_or(0);

    let mut estimators: Vec<Box<dyn Estimator>> = Vec::new();
    if args.gt {
        estimators.push(Box::new(GroundTruth));
    }
    let mut resolved_predictions = Vec::new();
    for spec in &args.predictions {
        let (label, rest) = labeled(spec, "DIR")?;
        let (dir, oriented) = match rest.strip_suffix(":oriented") {
            Some(d) => (d.to_string(), true),
            None => (rest, false),
        };
        let dir = absolute(Path::new(&dir))?;
        if !dir.is_dir() {
            return Err(CliError::usage(format!("prediction directory {} does not exist", dir.display())));
        }
        resolved_predictions.push(format!("{label}={}{}", dir.display(), if oriented { ":oriented" } else { "" }));
        estimators.push(Box::new(Precomputed { dir, label, oriented }));
    }
    let mut resolved_checkpoints = Vec::new();
    for spec in &args.checkpoint {
        let (label, path) = labeled(spec, "CHECKPOINT")?;
        let path = absolute(Path::new(&path))?;
        let (model, _) = checkpoint::load::<f32>(&path)?;
        resolved_checkpoints.push(format!("{label}={}", path.display()));
        estimators.push(Box::new(ModelEstimator { model, label }));
    }
    for spec in &args.baseline {
        estimators.push(Box::new(parse_baseline(spec, args.orient_k)?));
    }
    if estimators.is_empty() {
        return Err(CliError::usage("nothing to evaluate: give --predictions, --checkpoint, --baseline or --gt"));
    }
    let mut labels: Vec<String> = estimators.iter().map(|e| e.name()).collect();
    labels.sort();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::usage(format!("duplicate method label `{}`", w[0])));
    }
    args.predictions = resolved_predictions;
    args.checkpoint = resolved_checkpoints;
    let cases = load_cases(&data, &args.list)?;

    RunRecord::new("eval", seed, &args)?.write(&out)?;
    let refs: Vec<&dyn Estimator> = estimators.iter().map(|e| e.as_ref()).collect();
    let report = evaluate(&refs, &cases, seed)?;
    emit_report(&report, &out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for row in report.global() {
        println!("global {} {} {} ({} clouds)", row.method, row.metric, row.value, row.shapes);
    }
    if report.errors.is_empty() {
        Ok(())
    } else {
        for e in &report.errors {
            eprintln!("missing: {e}");
        }
        Err(CliError::failure(format!("{} evaluations could not run", report.errors.len())))
    }
}

// ---------------------------------------------------------------- gradcheck

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GradcheckArgs {
    /// Largest acceptable relative error per layer type
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,

    /// Output head of the reduced model
    #[arg(long, value_enum, default_value_t = Outputs::Joint)]
    pub outputs: Outputs,

    /// Single- or multi-scale reduced model
    #[arg(long, value_enum, default_value_t = Arch::Ss)]
    pub arch: Arch,

    /// SGD steps on the probe batch before checking
    #[arg(long, default_value_t = 0)]
    pub train_steps: usize,

    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,

    /// Optional directory for run.json and gradcheck.json
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

pub fn gradcheck(mut args: GradcheckArgs) -> CliResult<()> {
    let seed = args.common.seed.unwrap_or(GradcheckConfig::default().seed);
    if !(args.epsilon > 0.0) || !(args.threshold >= 0.0) {
        return Err(CliError::usage("--epsilon must be positive and --threshold non-negative"));
    }
    let mut model = ModelConfig::tiny(args.outputs.spec());
    if args.arch == Arch::Ms {
        model.scales = Arch::Ms.scales();
        model.point_functions = 9;
    }
    let config = GradcheckConfig {
        model,
        seed,
        epsilon: args.epsilon,
        train_steps: args.train_steps,
        ..GradcheckConfig::default()
    };
    if let Some(out) = &args.out {
        let out = absolute(out)?;
        args.out = Some(out.clone());
        RunRecord::new("gradcheck", seed, &args)?.write(&out)?;
    }
    let report = run_gradcheck(&config)?;
    println!("{:<24} {:>8} {:>14}  status", "layer", "params", "max rel error");
    for l in &report.layers {
        let ok = l.max_relative_error < args.threshold;
        println!("{:<24} {:>8} {:>14.3e}  {}", l.layer, l.params, l.max_relative_error, if ok { "ok" } else { "FAIL" });
    }
    println!("checked {} coordinates, skipped {} at kinks", report.checked, report.skipped);
    for layer in report.unexercised() {
        eprintln!("warning: layer `{layer}` received no gradient on the probe");
    }
    if let Some(out) = &args.out {
        let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::failure(e.to_string()))?;
        text.push('\n');
        write_file(&out.join("gradcheck.json"), &text)?;
    }
    let worst = report.max_error();
    if worst < args.threshold {
        Ok(())
    } else {
        Err(CliError::failure(format!("max relative error {worst:.3e} not below threshold {:.1e}", args.threshold)))
    }
}

