//! Choice observations grouped by shared alternative sets, with long-format CSV I/O.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Alternatives offered together, with one covariate row per alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeSet {
    pub alt_ids: Vec<String>,
    /// Row-major, `alt_ids.len()` rows by covariate count columns.
    pub covariates: Vec<f64>,
}

impl AlternativeSet {
    pub fn len(&self) -> usize {
        self.alt_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alt_ids.is_empty()
    }

    pub fn row(&self, alt: usize, width: usize) -> &[f64] {
        &self.covariates[alt * width..(alt + 1) * width]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub obs_id: String,
    pub set: usize,
    pub chosen: usize,
}

/// Validated choice data: every observation has at least two alternatives, a chosen index
/// inside its set, and finite covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDataset {
    covariate_names: Vec<String>,
    sets: Vec<AlternativeSet>,
    observations: Vec<Observation>,
    /// Times each alternative was chosen, per set.
    chosen_counts: Vec<Vec<f64>>,
}

impl ChoiceDataset {
    pub fn new(
        covariate_names: Vec<String>,
        sets: Vec<AlternativeSet>,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        let k = covariate_names.len();
        if k == 0 {
            return Err(Error::InvalidInput("dataset has no covariates".into()));
        }
        for (s, set) in sets.iter().enumerate() {
            if set.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "alternative set {s} has {} alternatives; at least 2 are required",
                    set.len()
                )));
            }
            if set.covariates.len() != set.len() * k {
                return Err(Error::InvalidInput(format!(
                    "alternative set {s} has {} covariate values, expected {}",
                    set.covariates.len(),
                    set.len() * k
                )));
            }
            if let Some(i) = set.covariates.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite covariate `{}` for alternative `{}` in set {s}",
                    covariate_names[i % k],
                    set.alt_ids[i / k]
                )));
            }
        }
        let mut chosen_counts: Vec<Vec<f64>> = sets.iter().map(|s| vec![0.0; s.len()]).collect();
        for o in &observations {
            let set = sets.get(o.set).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "observation {} refers to missing set {}",
                    o.obs_id, o.set
                ))
            })?;
            if o.chosen >= set.len() {
                return Err(Error::InvalidInput(format!(
                    "observation {} chose alternative {} of {}",
                    o.obs_id,
                    o.chosen,
                    set.len()
                )));
            }
            chosen_counts[o.set][o.chosen] += 1.0;
        }
        if observations.is_empty() {
            return Err(Error::InvalidInput("dataset has no observations".into()));
        }
        Ok(Self {
            covariate_names,
            sets,
            observations,
            chosen_counts,
        })
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn width(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn sets(&self) -> &[AlternativeSet] {
        &self.sets
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn chosen_counts(&self, set: usize) -> &[f64] {
        &self.chosen_counts[set]
    }

    /// Applies `f` to every alternative's covariate row, producing a dataset with new
    /// covariates and the same sets and choices.
    pub fn map_covariates<F>(&self, names: Vec<String>, mut f: F) -> Result<ChoiceDataset>
    where
        F: FnMut(&str, &[f64]) -> Result<Vec<f64>>,
    {
        let k = self.width();
        let mut sets = Vec::with_capacity(self.sets.len());
        for set in &self.sets {
            let mut covariates = Vec::with_capacity(set.len() * names.len());
            for (a, id) in set.alt_ids.iter().enumerate() {
                let row = f(id, set.row(a, k))?;
                if row.len() != names.len() {
                    return Err(Error::InvalidInput(format!(
                        "covariate map produced {} values, expected {}",
                        row.len(),
                        names.len()
                    )));
                }
                covariates.extend(row);
            }
            sets.push(AlternativeSet {
                alt_ids: set.alt_ids.clone(),
                covariates,
            });
        }
        ChoiceDataset::new(names, sets, self.observations.clone())
    }

    /// Reads `obs_id,alt_id,chosen,<covariate>...`. Rows of one observation need not be
    /// adjacent; observations keep the order of their first row.
    pub fn from_csv<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let load_err = |row: usize, message: String| Error::Load {
            source_name: source_name.to_string(),
            row,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 4
            || &headers[0] != "obs_id"
            || &headers[1] != "alt_id"
            || &headers[2] != "chosen"
        {
            return Err(load_err(
                1,
                "expected header `obs_id,alt_id,chosen,<covariate>...` with at least one covariate"
                    .into(),
            ));
        }
        let names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
        let k = names.len();

        struct Pending {
            id: String,
            alts: Vec<String>,
            covariates: Vec<f64>,
            chosen: Vec<usize>,
            first_row: usize,
        }
        let mut pending: Vec<Pending> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let row = e.position().map_or(0, |p| p.line() as usize);
                load_err(row, e.to_string())
            })?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != k + 3 {
                return Err(load_err(
                    row,
                    format!("expected {} fields, got {}", k + 3, record.len()),
                ));
            }
            let chosen = match &record[2] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(load_err(
                        row,
                        format!("chosen must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            let mut values = Vec::with_capacity(k);
            for (j, name) in names.iter().enumerate() {
                let v: f64 = record[j + 3].parse().map_err(|_| {
                    load_err(row, format!("{name} `{}` is not a number", &record[j + 3]))
                })?;
                if !v.is_finite() {
                    return Err(load_err(row, format!("{name} is not finite")));
                }
                values.push(v);
            }
            let obs = record[0].to_string();
            let slot = *index.entry(obs.clone()).or_insert_with(|| {
                pending.push(Pending {
                    id: obs.clone(),
                    alts: Vec::new(),
                    covariates: Vec::new(),
                    chosen: Vec::new(),
                    first_row: row,
                });
                pending.len() - 1
            });
            let p = &mut pending[slot];
            let alt = record[1].to_string();
            if p.alts.contains(&alt) {
                return Err(load_err(
                    row,
                    format!("alternative {alt} repeated in observation {obs}"),
                ));
            }
            if chosen {
                p.chosen.push(p.alts.len());
            }
            p.alts.push(alt);
            p.covariates.extend(values);
        }
        if pending.is_empty() {
            return Err(load_err(1, "no observations".into()));
        }
        let mut builder = DatasetBuilder::new(names);
        for p in pending {
            if p.chosen.len() != 1 {
                return Err(load_err(
                    p.first_row,
                    format!(
                        "observation {} has {} chosen alternatives; exactly 1 is required",
                        p.id,
                        p.chosen.len()
                    ),
                ));
            }
            if p.alts.len() < 2 {
                return Err(load_err(
                    p.first_row,
                    format!("observation {} has fewer than 2 alternatives", p.id),
                ));
            }
            builder.push(p.id, p.alts, p.covariates, p.chosen[0]);
        }
        builder.build()
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Load {
            source_name: path.display().to_string(),
            row: 0,
            message: e.to_string(),
        })?;
        Self::from_csv(std::io::BufReader::new(file), &path.display().to_string())
    }

    /// Writes one row per (observation, alternative), observations in order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["obs_id".to_string(), "alt_id".into(), "chosen".into()];
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        let k = self.width();
        let mut record: Vec<String> = Vec::with_capacity(k + 3);
        for o in &self.observations {
            let set = &self.sets[o.set];
            for (a, id) in set.alt_ids.iter().enumerate() {
                record.clear();
                record.push(o.obs_id.clone());
                record.push(id.clone());
                record.push(if a == o.chosen { "1" } else { "0" }.into());
                record.extend(set.row(a, k).iter().map(|v| v.to_string()));
                w.write_record(&record)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Collects observations, sharing alternative sets with identical ids and covariates.
#[derive(Debug)]
pub struct DatasetBuilder {
    names: Vec<String>,
    sets: Vec<AlternativeSet>,
    index: HashMap<(Vec<String>, Vec<u64>), usize>,
    observations: Vec<Observation>,
}

impl DatasetBuilder {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            sets: Vec::new(),
            index: HashMap::new(),
            observations: Vec::new(),
        }
    }

    /// Registers an alternative set and returns its index.
    pub fn add_set(&mut self, alt_ids: Vec<String>, covariates: Vec<f64>) -> usize {
        let key = (
            alt_ids,
            covariates.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        );
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.sets.push(AlternativeSet {
            alt_ids: key.0.clone(),
            covariates,
        });
        self.index.insert(key, self.sets.len() - 1);
        self.sets.len() - 1
    }

    pub fn push_in_set(&mut self, obs_id: String, set: usize, chosen: usize) {
        self.observations.push(Observation {
            obs_id,
            set,
            chosen,
        });
    }

    pub fn push(
        &mut self,
        obs_id: String,
        alt_ids: Vec<String>,
        covariates: Vec<f64>,
        chosen: usize,
    ) {
        let set = self.add_set(alt_ids, covariates);
        self.push_in_set(obs_id, set, chosen);
    }

    pub fn build(self) -> Result<ChoiceDataset> {
        ChoiceDataset::new(self.names, self.sets, self.observations)
    }
}
