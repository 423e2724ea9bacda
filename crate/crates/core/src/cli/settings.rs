use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{CliError, CliResult};
use crate::dataset::AnalyticShape;

/// Resolved configuration echoed into every output directory.
pub const RUN_FILE: &str = "run.json";

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Common {
    /// Random seed, read from PCP_SEED when the flag is absent [default: 0]
    #[arg(long, env = "PCP_SEED")]
    pub seed: Option<u64>,

    /// Worker threads; 1 runs strictly sequentially [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,

    /// TOML or JSON file with settings named like the long flags; explicit flags win
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub trait HasCommon {
    fn common(&self) -> &Common;
    fn common_mut(&mut self) -> &mut Common;
}

fn load_config(path: &Path) -> CliResult<Map<String, Value>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("reading config {}: {e}", path.display())))?;
    let value: Value = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
        Some("json") => serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
        _ => return Err(CliError::usage(format!("config {} must end in .toml or .json", path.display()))),
    };
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(CliError::usage(format!("config {} must be a table of settings", path.display()))),
    }
}

/// Overlays the config file onto every setting not given explicitly on the
/// command line, then configures the worker pool.
pub fn resolve<A>(args: A, matches: &ArgMatches) -> CliResult<A>
where
    A: HasCommon + Serialize + DeserializeOwned,
{
    let config = args.common().config.clone();
    let mut resolved = match &config {
        None => args,
        Some(path) => {
            let Value::Object(mut current) = serde_json::to_value(&args).map_err(|e| CliError::usage(e.to_string()))? else {
                unreachable!("argument structs serialize to objects")
            };
            for (key, value) in load_config(path)? {
                let key = key.replace('-', "_");
                if !current.contains_key(&key) {
                    return Err(CliError::usage(format!("unknown setting `{key}` in {}", path.display())));
                }
                if matches.value_source(&key) != Some(ValueSource::CommandLine) {
                    current.insert(key, value);
                }
            }
            serde_json::from_value(Value::Object(current)).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(jobs) = resolved.common().jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        // A pool may already exist when commands run in-process repeatedly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    resolved.common_mut().config = config;
    Ok(resolved)
}

/// Absolute form of `path` relative to the working directory.
pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::usage(format!("resolving {}: {e}", path.display())))
}

/// Provenance of one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub config_file: Option<PathBuf>,
    pub settings: Value,
}

impl RunRecord {
    pub fn new<A: Serialize + HasCommon>(command: &str, seed: u64, args: &A) -> CliResult<Self> {
        let config_file = args.common().config.as_deref().map(absolute).transpose()?;
        Ok(RunRecord {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            jobs: args.common().jobs,
            config_file,
            settings: serde_json::to_value(args).map_err(|e| CliError::usage(e.to_string()))?,
        })
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir).map_err(|e| CliError::failure(format!("creating {}: {e}", dir.display())))?;
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::failure(e.to_string()))?;
        text.push('\n');
        let path = dir.join(RUN_FILE);
        fs::write(&path, text).map_err(|e| CliError::failure(format!("writing {}: {e}", path.display())))
    }
}

/// Parses `kind[:key=value...]`, e.g. `sphere:radius=1` or
/// `sheet:extent=2:two_layer=true`. A `name=` entry sets the shape name,
/// which otherwise defaults to the kind. Unspecified parameters take unit
/// defaults (radius 1, height 2, extent 2, single layer).
pub fn parse_analytic(spec: &str) -> CliResult<(String, AnalyticShape)> {
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or_default().trim().to_string();
    let mut map = Map::new();
    map.insert("kind".into(), Value::String(kind.clone()));
    match kind.as_str() {
        "sphere" => {
            map.insert("radius".into(), 1.0.into());
        }
        "cylinder" => {
            map.insert("radius".into(), 1.0.into());
            map.insert("height".into(), 2.0.into());
        }
        "sheet" => {
            map.insert("extent".into(), 2.0.into());
            map.insert("two_layer".into(), false.into());
        }
        _ => return Err(CliError::usage(format!("unknown analytic shape `{kind}` (expected sphere, cylinder or sheet)"))),
    }
    let mut name = kind.clone();
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("expected key=value in `{spec}`, got `{part}`")))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if key == "name" {
            name = value.to_string();
            continue;
        }
        if !map.contains_key(&key) {
            return Err(CliError::usage(format!("unknown parameter `{key}` for {kind}")));
        }
        let parsed = if let Ok(b) = value.parse::<bool>() {
            Value::Bool(b)
        } else {
            let v: f64 = value.parse().map_err(|_| CliError::usage(format!("bad value `{value}` for {key}")))?;
            v.into()
        };
        map.insert(key, parsed);
    }
    let shape: AnalyticShape = serde_json::from_value(Value::Object(map)).map_err(|e| CliError::usage(format!("`{spec}`: {e}")))?;
    shape.validate()?;
    Ok((name, shape))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_specs() {
        assert_eq!(parse_analytic("sphere").unwrap(), ("sphere".into(), AnalyticShape::Sphere { radius: 1.0 }));
        assert_eq!(
            parse_analytic("cylinder:radius=2:name=c2").unwrap(),
            ("c2".into(), AnalyticShape::Cylinder { radius: 2.0, height: 2.0 })
        );
        assert_eq!(
            parse_analytic("sheet:two-layer=true:extent=3").unwrap().1,
            AnalyticShape::Sheet { extent: 3.0, two_layer: true }
        );
        for bad in ["cube", "sphere:r=1", "sphere:radius", "sphere:radius=-1", "sphere:radius=x"] {
            assert_eq!(parse_analytic(bad).unwrap_err().code, super::super::EXIT_USAGE, "{bad}");
        }
    }
}
