//! Household populations: CSV files or seeded synthetic draws over household sizes.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HouseholdProfile;
use crate::rng;

/// Largest household size a synthetic spec may put mass on.
pub const MAX_SYNTHETIC_SIZE: u32 = 8;

/// Distribution over household sizes plus a count and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPopulationSpec {
    pub count: usize,
    /// Probability mass per household size (1..=8); normalized on use.
    pub masses: BTreeMap<u32, f64>,
    pub seed: u64,
}

impl Default for SyntheticPopulationSpec {
    /// 933 households with a mean size of about 2.52.
    fn default() -> Self {
        Self {
            count: 933,
            masses: BTreeMap::from([
                (1, 0.27),
                (2, 0.33),
                (3, 0.16),
                (4, 0.14),
                (5, 0.06),
                (6, 0.03),
                (7, 0.007),
                (8, 0.003),
            ]),
            seed: 2019,
        }
    }
}

impl SyntheticPopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::config("count", "must be at least 1"));
        }
        if self.masses.is_empty() {
            return Err(Error::config("masses", "no household sizes given"));
        }
        for (&size, &mass) in &self.masses {
            if !(1..=MAX_SYNTHETIC_SIZE).contains(&size) {
                return Err(Error::config(
                    "masses",
                    format!("household size {size} outside 1..={MAX_SYNTHETIC_SIZE}"),
                ));
            }
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::config(
                    "masses",
                    format!("mass for size {size} must be finite and non-negative"),
                ));
            }
        }
        if self.masses.values().sum::<f64>() <= 0.0 {
            return Err(Error::config("masses", "masses sum to zero"));
        }
        Ok(())
    }

    pub fn mean_size(&self) -> f64 {
        let total: f64 = self.masses.values().sum();
        self.masses.iter().map(|(&s, &m)| s as f64 * m).sum::<f64>() / total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    File { path: PathBuf },
    Synthetic { spec: SyntheticPopulationSpec },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationSource {
    File(PathBuf),
    Synthetic(SyntheticPopulationSpec),
}

/// Non-empty list of households with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub households: Vec<HouseholdProfile>,
    pub provenance: Provenance,
}

impl Population {
    pub fn new(households: Vec<HouseholdProfile>, provenance: Provenance) -> Result<Self> {
        if households.is_empty() {
            return Err(Error::InvalidInput("population is empty".into()));
        }
        let mut seen = HashSet::new();
        for h in &households {
            if h.size < 1 {
                return Err(Error::InvalidInput(format!(
                    "household {} has size 0",
                    h.id
                )));
            }
            if !seen.insert(h.id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate household id {}",
                    h.id
                )));
            }
        }
        Ok(Self {
            households,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.households.len()
    }

    pub fn is_empty(&self) -> bool {
        self.households.is_empty()
    }

    pub fn mean_size(&self) -> f64 {
        self.households.iter().map(|h| h.size as f64).sum::<f64>() / self.len() as f64
    }

    /// Reads `household_id,size` CSV. Errors name the offending line.
    pub fn from_csv<R: Read>(reader: R, source_name: &str, provenance: Provenance) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let load_err = |row: usize, message: String| Error::Load {
            source_name: source_name.to_string(),
            row,
            message,
        };
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["household_id", "size"] {
            return Err(load_err(1, "expected header `household_id,size`".into()));
        }
        let mut households = Vec::new();
        let mut seen = HashSet::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let row = e.position().map_or(0, |p| p.line() as usize);
                load_err(row, e.to_string())
            })?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != 2 {
                return Err(load_err(
                    row,
                    format!("expected 2 fields, got {}", record.len()),
                ));
            }
            let id = record[0].to_string();
            if id.is_empty() {
                return Err(load_err(row, "empty household_id".into()));
            }
            let size: u32 = record[1].parse().map_err(|_| {
                load_err(row, format!("size `{}` is not a whole number", &record[1]))
            })?;
            if size < 1 {
                return Err(load_err(
                    row,
                    format!("household {id} has size {size}; must be at least 1"),
                ));
            }
            if !seen.insert(id.clone()) {
                return Err(load_err(row, format!("duplicate household id {id}")));
            }
            households.push(HouseholdProfile { id, size });
        }
        if households.is_empty() {
            return Err(load_err(1, "no households".into()));
        }
        Self::new(households, provenance)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Load {
            source_name: path.display().to_string(),
            row: 0,
            message: e.to_string(),
        })?;
        Self::from_csv(
            file,
            &path.display().to_string(),
            Provenance::File {
                path: path.to_path_buf(),
            },
        )
    }

    /// Draws household sizes by inverse CDF over the normalized masses, one stream per spec.
    pub fn synthetic(spec: &SyntheticPopulationSpec) -> Result<Self> {
        spec.validate()?;
        let total: f64 = spec.masses.values().sum();
        let sizes: Vec<(u32, f64)> = spec.masses.iter().map(|(&s, &m)| (s, m / total)).collect();
        let mut stream = rng::stream(spec.seed, &[rng::purpose::POPULATION]);
        let width = spec.count.to_string().len().max(4);
        let households = (0..spec.count)
            .map(|i| {
                let draw: f64 = stream.random();
                let mut cumulative = 0.0;
                let mut size = sizes.last().map_or(1, |s| s.0);
                for &(s, p) in &sizes {
                    cumulative += p;
                    if draw < cumulative {
                        size = s;
                        break;
                    }
                }
                HouseholdProfile {
                    id: format!("hh{:0width$}", i + 1),
                    size,
                }
            })
            .collect();
        Self::new(households, Provenance::Synthetic { spec: spec.clone() })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["household_id", "size"])?;
        for h in &self.households {
            w.write_record([h.id.as_str(), &h.size.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_population(source: &PopulationSource) -> Result<Population> {
    match source {
        PopulationSource::File(path) => Population::from_path(path),
        PopulationSource::Synthetic(spec) => Population::synthetic(spec),
    }
}
