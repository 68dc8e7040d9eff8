//! Configuration file merging, input loading, and the configuration hash.

use std::fs;
use std::path::{Path, PathBuf};

use edemand::builtin;
use edemand::model::ParamOverrides;
use edemand::population::{Population, SyntheticPopulationSpec};
use edemand::{Params, Scenario};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::{CliResult, Failure, Mode};

pub const OUT_ENV: &str = "EDEMAND_OUT";
const DEFAULT_OUT: &str = "edemand-out";

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

/// Values read from `--config`; keys are long flag names with underscores.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub params: Option<PathBuf>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub scenario: Option<OneOrMany>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub targets: Option<PathBuf>,
    pub category: Option<String>,
    pub categories: Option<PathBuf>,
    pub free: Option<PathBuf>,
    pub start_alpha: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub simulate: Option<bool>,
    pub observations: Option<usize>,
    pub level1: Option<PathBuf>,
    pub level2: Option<PathBuf>,
    pub level3: Option<PathBuf>,
    pub weeks: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let mut c: FileConfig = read_json("config", path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut c.params,
            &mut c.out,
            &mut c.population,
            &mut c.targets,
            &mut c.categories,
            &mut c.free,
            &mut c.level1,
            &mut c.level2,
            &mut c.level3,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(s) = &mut c.scenario {
            let resolve = |name: &mut String| {
                if is_builtin_scenario(name) {
                    return;
                }
                let p = Path::new(name.as_str());
                if p.is_relative() {
                    *name = base.join(p).display().to_string();
                }
            };
            match s {
                OneOrMany::One(n) => resolve(n),
                OneOrMany::Many(v) => v.iter_mut().for_each(resolve),
            }
        }
        Ok(c)
    }

    pub fn scenarios(&self) -> Vec<String> {
        match &self.scenario {
            None => Vec::new(),
            Some(OneOrMany::One(s)) => vec![s.clone()],
            Some(OneOrMany::Many(v)) => v.clone(),
        }
    }
}

pub fn require_file(field: &str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::invalid(
            field,
            format!("file not found: {}", path.display()),
        ))
    }
}

pub fn read_json<T: DeserializeOwned>(field: &str, path: &Path) -> CliResult<T> {
    require_file(field, path)?;
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(field, format!("{}: {e}", path.display())))
}

pub fn load_params(path: Option<&Path>) -> CliResult<Params> {
    let params = match path {
        None => Params::default(),
        Some(p) => read_json::<ParamOverrides>("params", p)?.apply(&Params::default()),
    };
    params.validate()?;
    Ok(params)
}

pub fn load_population(path: Option<&Path>) -> CliResult<Population> {
    let Some(path) = path else {
        return Ok(Population::synthetic(&SyntheticPopulationSpec::default())?);
    };
    require_file("population", path)?;
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        let spec: SyntheticPopulationSpec = read_json("population", path)?;
        return Ok(Population::synthetic(&spec)?);
    }
    Ok(Population::from_path(path)?)
}

fn is_builtin_scenario(name: &str) -> bool {
    builtin_scenario(name).is_some()
}

fn builtin_scenario(name: &str) -> Option<Scenario> {
    if name.eq_ignore_ascii_case("estimation") {
        return Some(builtin::estimation_scenario());
    }
    builtin::scenario_by_name(name)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    One(Box<Scenario>),
    Many(Vec<Scenario>),
}

/// Built-in names or JSON files holding one scenario or a list of them.
pub fn load_scenarios(entries: &[String]) -> CliResult<Vec<Scenario>> {
    let mut out = Vec::new();
    for entry in entries {
        if let Some(s) = builtin_scenario(entry) {
            out.push(s);
            continue;
        }
        let path = Path::new(entry);
        if !path.is_file() {
            return Err(Failure::invalid(
                "scenario",
                format!("`{entry}` is neither a built-in scenario nor an existing file"),
            ));
        }
        match read_json::<ScenarioFile>("scenario", path)? {
            ScenarioFile::One(s) => out.push(*s),
            ScenarioFile::Many(v) => out.extend(v),
        }
    }
    for s in &out {
        s.validate()?;
    }
    Ok(out)
}

pub fn resolve_workers(flag: Option<usize>, file: Option<usize>) -> CliResult<usize> {
    let n = flag.or(file).unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
    });
    if n == 0 {
        return Err(Failure::invalid("workers", "must be at least 1"));
    }
    Ok(n)
}

/// Flag, then config file, then `$EDEMAND_OUT`, then `./edemand-out`.
pub fn resolve_out(flag: Option<PathBuf>, file: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = flag
        .or(file)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::invalid("out", format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// SHA-256 of the canonical JSON of every input that affects results.
pub fn config_hash(inputs: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(inputs).expect("JSON values always serialize");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Households as `[id, size]` pairs for hashing.
pub fn population_fingerprint(p: &Population) -> serde_json::Value {
    p.households
        .iter()
        .map(|h| serde_json::json!([h.id, h.size]))
        .collect()
}
