use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analytic::{analytic_shape, AnalyticShape};
use super::curvature::vertex_curvatures_rusinkiewicz;
use super::mesh::TriMesh;
use super::sampling::sample_mesh_uniform;
use super::variants::{add_gaussian_noise, density_variant, DensityScheme, NOISE_LEVELS};
use crate::cloud::io::{read_cloud, write_cloud, write_indices};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "dataset.json";
pub const STEM_LIST_FILE: &str = "shapes.txt";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeSource {
    Mesh { path: PathBuf },
    Analytic { shape: AnalyticShape },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub name: String,
    pub source: ShapeSource,
}

impl ShapeSpec {
    pub fn mesh(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        ShapeSpec { name: name.into(), source: ShapeSource::Mesh { path: path.into() } }
    }

    pub fn analytic(name: impl Into<String>, shape: AnalyticShape) -> Self {
        ShapeSpec { name: name.into(), source: ShapeSource::Analytic { shape } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariantKind {
    Clean,
    Noise { level: f64 },
    Density { scheme: DensityScheme },
}

impl VariantKind {
    pub fn stem(&self, shape: &str) -> String {
        match self {
            VariantKind::Clean => shape.to_string(),
            VariantKind::Noise { level } => format!("{shape}_noise_{level}"),
            VariantKind::Density { scheme } => format!("{shape}_density_{}", scheme.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub stem: String,
    pub shape: String,
    pub variant: VariantKind,
    pub points: usize,
    pub curvatures: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub points_per_shape: usize,
    pub noise_levels: Vec<f64>,
    pub density_schemes: Vec<DensityScheme>,
    pub shapes: Vec<ShapeSpec>,
    pub variants: Vec<VariantRecord>,
}

impl DatasetManifest {
    pub fn stems(&self) -> Vec<String> {
        self.variants.iter().map(|v| v.stem.clone()).collect()
    }

    pub fn variant(&self, stem: &str) -> Option<&VariantRecord> {
        self.variants.iter().find(|v| v.stem == stem)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Dataset generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateOptions {
    pub points: usize,
    pub noise_levels: Vec<f64>,
    pub density: Vec<DensityScheme>,
    /// Size of the `.pidx` evaluation subset written per stem.
    pub test_indices: usize,
    pub seed: u64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            points: 100_000,
            noise_levels: NOISE_LEVELS.to_vec(),
            density: Vec::new(),
            test_indices: 5000,
            seed: 0,
        }
    }
}

/// Generator for shape `index` of a dataset. Each shape gets its own ChaCha
/// stream so results do not depend on scheduling.
pub fn shape_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Loads a mesh and labels its vertices with normals and curvatures.
pub fn prepare_mesh(path: &Path) -> Result<TriMesh> {
    let mut mesh = TriMesh::load(path)?;
    mesh.compute_vertex_normals();
    vertex_curvatures_rusinkiewicz(&mut mesh)?;
    Ok(mesh)
}

/// Clean cloud plus all configured variants of one shape.
pub fn generate_shape(spec: &ShapeSpec, index: usize, opts: &GenerateOptions) -> Result<Vec<(VariantRecord, PointCloud)>> {
    let mut rng = shape_rng(opts.seed, index);
    let clean = match &spec.source {
        ShapeSource::Mesh { path } => {
            let mesh = prepare_mesh(path)?;
            sample_mesh_uniform(&mesh, opts.points, &spec.name, &mut rng)?.0
        }
        ShapeSource::Analytic { shape } => analytic_shape(shape, opts.points, &spec.name, &mut rng)?,
    };
    let mut out = Vec::new();
    let mut push = |kind: VariantKind, mut cloud: PointCloud| {
        cloud.name = kind.stem(&spec.name);
        let record = VariantRecord {
            stem: cloud.name.clone(),
            shape: spec.name.clone(),
            variant: kind,
            points: cloud.len(),
            curvatures: cloud.gt_curvatures.is_some(),
        };
        out.push((record, cloud));
    };
    for &level in &opts.noise_levels {
        let noisy = add_gaussian_noise(&clean, level, &mut rng)?;
        push(VariantKind::Noise { level }, noisy);
    }
    for &scheme in &opts.density {
        let sparse = density_variant(&clean, scheme, &mut rng)?;
        push(VariantKind::Density { scheme }, sparse);
    }
    push(VariantKind::Clean, clean);
    out.rotate_right(1);
    Ok(out)
}

/// Result of [`generate_dataset`]; per-shape failures do not stop the others.
#[derive(Debug)]
pub struct GenerateOutcome {
    pub manifest: DatasetManifest,
    pub failures: Vec<(String, Error)>,
}

/// Generates every shape (in parallel on the current rayon pool), then writes
/// clouds, `.pidx` subsets, the JSON manifest and the stem list to `dir`.
pub fn generate_dataset(shapes: &[ShapeSpec], opts: &GenerateOptions, dir: &Path) -> Result<GenerateOutcome> {
    if opts.points == 0 {
        return Err(Error::InvalidArgument("points per shape must be at least 1".into()));
    }
    if let Some(l) = opts.noise_levels.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::InvalidArgument(format!("noise level must be non-negative, got {l}")));
    }
    let results: Vec<Result<Vec<(VariantRecord, PointCloud)>>> = shapes
        .par_iter()
        .enumerate()
        .map(|(i, spec)| generate_shape(spec, i, opts))
        .collect();
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        seed: opts.seed,
        points_per_shape: opts.points,
        noise_levels: opts.noise_levels.clone(),
        density_schemes: opts.density.clone(),
        shapes: Vec::new(),
        variants: Vec::new(),
    };
    let mut failures = Vec::new();
    for ((i, spec), result) in shapes.iter().enumerate().zip(results) {
        match result {
            Ok(variants) => {
                let mut rng = shape_rng(opts.seed ^ 0x9e37_79b9_7f4a_7c15, i);
                for (record, cloud) in variants {
                    write_cloud(dir, &cloud)?;
                    let k = opts.test_indices.min(cloud.len());
                    let mut idx = rand::seq::index::sample(&mut rng, cloud.len(), k).into_vec();
                    idx.sort_unstable();
                    write_indices(&dir.join(format!("{}.pidx", record.stem)), &idx)?;
                    manifest.variants.push(record);
                }
                manifest.shapes.push(spec.clone());
            }
            Err(e) => failures.push((spec.name.clone(), e)),
        }
    }
    manifest.save(dir)?;
    write_stem_list(&dir.join(STEM_LIST_FILE), &manifest.stems())?;
    Ok(GenerateOutcome { manifest, failures })
}

pub fn write_stem_list(path: &Path, stems: &[String]) -> Result<()> {
    let mut text = stems.join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_stem_list(path: &Path) -> Result<Vec<String>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Writes clouds and a stem list (`list_name`) into `dir`.
pub fn write_dataset(dir: &Path, clouds: &[PointCloud], list_name: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    for c in clouds {
        write_cloud(dir, c)?;
    }
    let stems: Vec<String> = clouds.iter().map(|c| c.name.clone()).collect();
    write_stem_list(&dir.join(list_name), &stems)
}

/// Reads every stem listed in `dir/list_name`. When `dataset.json` is present,
/// stems it does not list are rejected.
pub fn read_dataset(dir: &Path, list_name: &str, normals: bool, curvatures: bool) -> Result<Vec<PointCloud>> {
    let stems = read_stem_list(&dir.join(list_name))?;
    let manifest = if dir.join(MANIFEST_FILE).exists() { Some(DatasetManifest::load(dir)?) } else { None };
    stems
        .iter()
        .map(|stem| {
            if let Some(m) = &manifest {
                if m.variant(stem).is_none() {
                    return Err(Error::InvalidArgument(format!("unknown stem `{stem}` (not in {MANIFEST_FILE})")));
                }
            }
            read_cloud(dir, stem, normals, curvatures)
        })
        .collect()
}
