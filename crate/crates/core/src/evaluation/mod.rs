//! Test-set metrics, per-shape evaluation and report files.

mod estimators;
mod metrics;
mod report;

pub use estimators::{BaselineEstimator, Estimator, FixedNormal, GroundTruth, ModelEstimator, Precomputed};
pub use metrics::{angle_deg, curvature_rms, flip_fraction, rms_angle_error};
pub use report::{emit_report, render_svg, REPORT_FILE, SUMMARY_FILE, SUMMARY_SVG};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::io::{companion, read_cloud, read_indices};
use crate::cloud::{Curvature, PointCloud, Vec3};
use crate::dataset::{read_stem_list, DatasetManifest, DensityScheme, VariantKind, MANIFEST_FILE, NOISE_LEVELS};
use crate::error::{Error, Result};

/// Upper bound on query points per test cloud.
pub const MAX_QUERIES: usize = 5000;

pub const METRIC_RMS_ANGLE: &str = "rms_angle_deg";
pub const METRIC_FLIP: &str = "flip_fraction";
pub const METRIC_CURV_K1: &str = "curvature_rms_k1";
pub const METRIC_CURV_K2: &str = "curvature_rms_k2";
pub const METRIC_FAILURES: &str = "failures";
pub const GLOBAL_CATEGORY: &str = "global";

const CATEGORY_ORDER: [&str; 6] = ["none", "low", "med", "high", "gradient", "stripes"];
const NOISE_CATEGORIES: [&str; 3] = ["low", "med", "high"];

/// One test cloud with its provenance.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub stem: String,
    pub shape: String,
    pub variant: VariantKind,
    pub cloud: PointCloud,
    /// Fixed query points, e.g. from a `.pidx` file; sampled when absent.
    pub queries: Option<Vec<usize>>,
}

impl EvalCase {
    pub fn new(cloud: PointCloud) -> Self {
        let (shape, variant) = parse_stem(&cloud.name);
        EvalCase { stem: cloud.name.clone(), shape, variant, cloud, queries: None }
    }
}

/// Splits a stem of the form `<shape>`, `<shape>_noise_<level>` or
/// `<shape>_density_<scheme>`.
pub fn parse_stem(stem: &str) -> (String, VariantKind) {
    if let Some((shape, level)) = stem.rsplit_once("_noise_") {
        if let Ok(level) = level.parse::<f64>() {
            return (shape.to_string(), VariantKind::Noise { level });
        }
    }
    if let Some((shape, scheme)) = stem.rsplit_once("_density_") {
        if let Ok(scheme) = scheme.parse::<DensityScheme>() {
            return (shape.to_string(), VariantKind::Density { scheme });
        }
    }
    (stem.to_string(), VariantKind::Clean)
}

/// Report category of a variant: `none`, `low`/`med`/`high` for the standard
/// noise levels, `noise_<level>` otherwise, or the density scheme name.
pub fn category(variant: &VariantKind) -> String {
    match variant {
        VariantKind::Clean => "none".into(),
        VariantKind::Noise { level } => NOISE_LEVELS
            .iter()
            .position(|l| (l - level).abs() < 1e-12)
            .map(|i| NOISE_CATEGORIES[i].to_string())
            .unwrap_or_else(|| format!("noise_{level}")),
        VariantKind::Density { scheme } => scheme.name().into(),
    }
}

/// Loads the test clouds listed in `dir/list_name` with whatever ground truth
/// exists. Provenance comes from the manifest when present, else from the
/// stem; `.pidx` files fix the query points.
pub fn load_cases(dir: &Path, list_name: &str) -> Result<Vec<EvalCase>> {
    let stems = read_stem_list(&dir.join(list_name))?;
    let manifest = if dir.join(MANIFEST_FILE).exists() { Some(DatasetManifest::load(dir)?) } else { None };
    stems
        .iter()
        .map(|stem| {
            let (shape, variant) = match &manifest {
                Some(m) => {
                    let rec = m
                        .variant(stem)
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown stem `{stem}` (not in {MANIFEST_FILE})")))?;
                    (rec.shape.clone(), rec.variant)
                }
                None => parse_stem(stem),
            };
            let normals = companion(dir, stem, "normals").exists();
            let curvatures = companion(dir, stem, "curv").exists();
            let cloud = read_cloud(dir, stem, normals, curvatures)?;
            let pidx = companion(dir, stem, "pidx");
            let queries = if pidx.exists() { Some(read_indices(&pidx)?) } else { None };
            Ok(EvalCase { stem: stem.clone(), shape, variant, cloud, queries })
        })
        .collect()
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// `min(5000, n)` distinct indices, sorted, drawn from a stream keyed by the
/// stem so that every (shape, variant) gets its own reproducible subset.
pub fn sample_queries(n: usize, stem: &str, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(stem));
    let mut idx = rand::seq::index::sample(&mut rng, n, n.min(MAX_QUERIES)).into_vec();
    idx.sort_unstable();
    idx
}

/// Metrics of one method on one test cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeRecord {
    pub stem: String,
    pub shape: String,
    pub category: String,
    pub method: String,
    pub queries: usize,
    pub rms_angle: Option<f64>,
    pub flip_fraction: Option<f64>,
    pub curvature_rms: Option<(f64, f64)>,
    pub failures: usize,
}

impl ShapeRecord {
    /// `(metric, value)` pairs for every metric this record carries.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let Some(v) = self.rms_angle {
            out.push((METRIC_RMS_ANGLE, v));
        }
        if let Some(v) = self.flip_fraction {
            out.push((METRIC_FLIP, v));
        }
        if let Some((k1, k2)) = self.curvature_rms {
            out.push((METRIC_CURV_K1, k1));
            out.push((METRIC_CURV_K2, k2));
        }
        out.push((METRIC_FAILURES, self.failures as f64));
        out
    }
}

/// Mean of one metric over the records of a method in a category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub category: String,
    pub metric: String,
    pub value: f64,
    pub shapes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    /// Sorted by (shape, stem, method).
    pub records: Vec<ShapeRecord>,
    pub summary: Vec<SummaryRow>,
    pub warnings: Vec<String>,
    /// Clouds an estimator could not process, as `method: stem: message`.
    pub errors: Vec<String>,
}

impl EvalReport {
    pub fn from_records(mut records: Vec<ShapeRecord>, warnings: Vec<String>, errors: Vec<String>) -> Self {
        records.sort_by(|a, b| (&a.shape, &a.stem, &a.method).cmp(&(&b.shape, &b.stem, &b.method)));
        let summary = summarize(&records);
        EvalReport { records, summary, warnings, errors }
    }

    /// Summary rows of the global category.
    pub fn global(&self) -> impl Iterator<Item = &SummaryRow> {
        self.summary.iter().filter(|r| r.category == GLOBAL_CATEGORY)
    }
}

fn category_rank(c: &str) -> (usize, String) {
    match CATEGORY_ORDER.iter().position(|k| *k == c) {
        Some(i) => (i, String::new()),
        None if c == GLOBAL_CATEGORY => (usize::MAX, String::new()),
        None => (CATEGORY_ORDER.len(), c.to_string()),
    }
}

/// Per-category averages of per-shape values; `global` averages every record
/// of the method.
pub fn summarize(records: &[ShapeRecord]) -> Vec<SummaryRow> {
    let mut methods: Vec<&str> = records.iter().map(|r| r.method.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    let mut categories: Vec<String> = records.iter().map(|r| r.category.clone()).collect();
    categories.sort_by_key(|c| category_rank(c));
    categories.dedup();
    categories.push(GLOBAL_CATEGORY.into());
    let metrics = [METRIC_RMS_ANGLE, METRIC_FLIP, METRIC_CURV_K1, METRIC_CURV_K2, METRIC_FAILURES];
    let mut rows = Vec::new();
    for method in &methods {
        for cat in &categories {
            let members: Vec<&ShapeRecord> = records
                .iter()
                .filter(|r| r.method == *method && (cat == GLOBAL_CATEGORY || r.category == *cat))
                .collect();
            for metric in metrics {
                let values: Vec<f64> = members
                    .iter()
                    .filter_map(|r| r.metrics().into_iter().find(|(m, _)| *m == metric).map(|(_, v)| v))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                rows.push(SummaryRow {
                    method: method.to_string(),
                    category: cat.clone(),
                    metric: metric.into(),
                    value: values.iter().sum::<f64>() / values.len() as f64,
                    shapes: values.len(),
                });
            }
        }
    }
    rows
}

fn is_unit(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite()) && (v.norm() - 1.0).abs() < 1e-3
}

/// Scores precomputed estimates against the case's ground truth.
/// Unoriented estimates are sign-aligned with the ground-truth normal before
/// curvatures are compared.
pub fn score(
    case: &EvalCase,
    method: &str,
    oriented: bool,
    queries: &[usize],
    estimates: &[Option<crate::cloud::SurfaceEstimate>],
    warnings: &mut Vec<String>,
) -> Result<ShapeRecord> {
    if queries.len() != estimates.len() {
        return Err(Error::ShapeMismatch(format!("{} estimates for {} queries", estimates.len(), queries.len())));
    }
    let cloud = &case.cloud;
    let failures = estimates.iter().filter(|e| e.is_none()).count();
    let wants_normal = estimates.iter().flatten().any(|e| e.normal.is_some());
    let wants_curvature = estimates.iter().flatten().any(|e| e.curvature.is_some());

    let (mut pred_n, mut gt_n) = (Vec::new(), Vec::new());
    let (mut pred_k, mut gt_k): (Vec<Curvature>, Vec<Curvature>) = (Vec::new(), Vec::new());
    let mut degenerate = 0;
    for (&q, est) in queries.iter().zip(estimates) {
        let Some(est) = est else { continue };
        let gt_normal = cloud.gt_normals.as_ref().map(|n| n[q]);
        if let (Some(p), Some(g)) = (est.normal, gt_normal) {
            if is_unit(&g) {
                pred_n.push(p);
                gt_n.push(g);
            } else {
                degenerate += 1;
            }
        }
        if let (Some(_), Some(g)) = (est.curvature, cloud.gt_curvatures.as_ref().map(|c| c[q])) {
            let aligned = match (est.normal, gt_normal) {
                (Some(p), Some(gn)) if !oriented && p.dot(&gn) < 0.0 => est.flipped(),
                _ => *est,
            };
            pred_k.push(aligned.curvature.unwrap());
            gt_k.push(g);
        }
    }
    if degenerate > 0 {
        warnings.push(format!("{method}: {}: {degenerate} degenerate ground-truth normals excluded", case.stem));
    }
    if wants_normal && cloud.gt_normals.is_none() {
        warnings.push(format!("{method}: {}: no ground-truth normals, normal metrics skipped", case.stem));
    }
    if wants_curvature && cloud.gt_curvatures.is_none() {
        warnings.push(format!("{method}: {}: no ground-truth curvatures, curvature metrics skipped", case.stem));
    }
    let has_normals = !pred_n.is_empty();
    let has_curvatures = !pred_k.is_empty();
    Ok(ShapeRecord {
        stem: case.stem.clone(),
        shape: case.shape.clone(),
        category: category(&case.variant),
        method: method.to_string(),
        queries: queries.len(),
        rms_angle: has_normals.then(|| rms_angle_error(&pred_n, &gt_n, oriented)).transpose()?,
        flip_fraction: has_normals.then(|| flip_fraction(&pred_n, &gt_n)).transpose()?,
        curvature_rms: has_curvatures.then(|| curvature_rms(&pred_k, &gt_k)).transpose()?,
        failures,
    })
}

enum CaseResult {
    Scored(ShapeRecord, Vec<String>),
    Failed(String),
}

/// Runs every estimator on every case. Cases are processed in parallel; the
/// report is sorted, so its content does not depend on scheduling.
pub fn evaluate(estimators: &[&dyn Estimator], cases: &[EvalCase], seed: u64) -> Result<EvalReport> {
    let mut jobs = Vec::new();
    for case in cases {
        for est in estimators {
            jobs.push((case, *est));
        }
    }
    let results: Vec<CaseResult> = jobs
        .par_iter()
        .map(|(case, est)| -> Result<CaseResult> {
            let method = est.name();
            let queries = match &case.queries {
                Some(q) => q.clone(),
                None => sample_queries(case.cloud.len(), &case.stem, seed),
            };
            if let Some(&q) = queries.iter().find(|&&q| q >= case.cloud.len()) {
                return Err(Error::IndexOutOfRange { index: q, len: case.cloud.len() });
            }
            match est.estimate(&case.cloud, &queries, seed) {
                Ok(estimates) => {
                    let mut warnings = Vec::new();
                    let rec = score(case, &method, est.oriented(), &queries, &estimates, &mut warnings)?;
                    Ok(CaseResult::Scored(rec, warnings))
                }
                Err(e) => Ok(CaseResult::Failed(format!("{method}: {}: {e}", case.stem))),
            }
        })
        .collect::<Result<_>>()?;
    let (mut records, mut warnings, mut errors) = (Vec::new(), Vec::new(), Vec::new());
    for r in results {
        match r {
            CaseResult::Scored(rec, w) => {
                records.push(rec);
                warnings.extend(w);
            }
            CaseResult::Failed(e) => errors.push(e),
        }
    }
    warnings.sort();
    errors.sort();
    Ok(EvalReport::from_records(records, warnings, errors))
}
