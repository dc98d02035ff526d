//! Dataset loading and molecule-id resolution.
//!
//! The canonical dataset is an xyz geometry source plus an optional
//! `id,energy` targets CSV. Geometries come either as one concatenated
//! multi-frame file (ids are the decimal frame indices) or as a directory
//! of single-molecule `.xyz` files (ids are the file stems, taken in
//! sorted order). Energies are kcal/mol, distances Ångström; nothing here
//! converts units.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use molkern::{parse_xyz, parse_xyz_frames, GraphError, Molecule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Xyz {
        path: PathBuf,
        #[source]
        source: GraphError,
    },
    #[error("dataset contains no molecules")]
    Empty,
    #[error("duplicate molecule id \"{id}\"")]
    DuplicateMolecule { id: String },
    #[error("unknown molecule id \"{id}\"")]
    UnknownId { id: String },
    #[error("{path} line {line}: expected \"id,energy\", got \"{content}\"")]
    TargetFormat {
        path: PathBuf,
        line: usize,
        content: String,
    },
    #[error("target listed twice for id \"{id}\"")]
    DuplicateTarget { id: String },
    #[error("no target energy for id \"{id}\"")]
    MissingTarget { id: String },
    #[error("id list {path} is empty")]
    EmptyIdList { path: PathBuf },
    #[error("id \"{id}\" listed twice in {path}")]
    DuplicateListedId { id: String, path: PathBuf },
    #[error("bad id spec \"{spec}\": {reason}")]
    BadIdSpec { spec: String, reason: String },
}

/// Molecules, their string ids, and any known targets, index-aligned.
pub struct Dataset {
    pub ids: Vec<String>,
    pub molecules: Vec<Molecule>,
    pub targets: Vec<Option<f64>>,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    pub fn lookup(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize, DataError> {
        self.lookup(id)
            .ok_or_else(|| DataError::UnknownId { id: id.to_string() })
    }

    /// The target for dataset index `i`, or an error naming the id.
    pub fn require_target(&self, i: usize) -> Result<f64, DataError> {
        self.targets[i].ok_or_else(|| DataError::MissingTarget {
            id: self.ids[i].clone(),
        })
    }

    /// Loads geometries (file or directory) and, when given, targets.
    pub fn load(xyz: &Path, targets: Option<&Path>) -> Result<Dataset, DataError> {
        let (ids, molecules) = if xyz.is_dir() {
            load_directory(xyz)?
        } else {
            load_concatenated(xyz)?
        };
        if molecules.is_empty() {
            return Err(DataError::Empty);
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(DataError::DuplicateMolecule { id: id.clone() });
            }
        }
        let mut dataset = Dataset {
            ids,
            molecules,
            targets: Vec::new(),
            index,
        };
        dataset.targets = vec![None; dataset.len()];
        if let Some(path) = targets {
            dataset.load_targets(path)?;
        }
        Ok(dataset)
    }

    fn load_targets(&mut self, path: &Path) -> Result<(), DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || DataError::TargetFormat {
                path: path.to_path_buf(),
                line: lineno + 1,
                content: line.to_string(),
            };
            let (id, value) = line.split_once(',').ok_or_else(bad)?;
            let (id, value) = (id.trim(), value.trim());
            let energy: f64 = match value.parse() {
                Ok(v) => v,
                // A single unparsable first row is a header.
                Err(_) if lineno == 0 => continue,
                Err(_) => return Err(bad()),
            };
            let i = self.require(id)?;
            if self.targets[i].is_some() {
                return Err(DataError::DuplicateTarget { id: id.to_string() });
            }
            self.targets[i] = Some(energy);
        }
        Ok(())
    }
}

fn load_concatenated(path: &Path) -> Result<(Vec<String>, Vec<Molecule>), DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let molecules = parse_xyz_frames(&text).map_err(|source| DataError::Xyz {
        path: path.to_path_buf(),
        source,
    })?;
    let ids = (0..molecules.len()).map(|i| i.to_string()).collect();
    Ok((ids, molecules))
}

fn load_directory(dir: &Path) -> Result<(Vec<String>, Vec<Molecule>), DataError> {
    let io = |source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "xyz"))
        .collect();
    paths.sort();
    let mut ids = Vec::with_capacity(paths.len());
    let mut molecules = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|source| DataError::Io {
            path: path.clone(),
            source,
        })?;
        let mol = parse_xyz(&text).map_err(|source| DataError::Xyz {
            path: path.clone(),
            source,
        })?;
        let stem = path
            .file_stem()
            .expect("xyz files have stems")
            .to_string_lossy()
            .into_owned();
        ids.push(stem);
        molecules.push(mol);
    }
    Ok((ids, molecules))
}

/// Resolves an id spec to dataset indices.
///
/// A spec is either a path to a newline-delimited id file (blank lines and
/// `#` comments skipped) or the shorthand `random:N:seed`, which draws N
/// distinct molecules reproducibly and returns them in dataset order.
pub fn resolve_id_spec(spec: &str, dataset: &Dataset) -> Result<Vec<usize>, DataError> {
    if let Some(rest) = spec.strip_prefix("random:") {
        let bad = |reason: &str| DataError::BadIdSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (count, seed) = rest
            .split_once(':')
            .ok_or_else(|| bad("expected random:N:seed"))?;
        let count: usize = count
            .parse()
            .map_err(|_| bad("N must be a positive integer"))?;
        let seed: u64 = seed.parse().map_err(|_| bad("seed must be an integer"))?;
        if count == 0 {
            return Err(bad("N must be a positive integer"));
        }
        if count > dataset.len() {
            return Err(bad(&format!(
                "asked for {count} of {} molecules",
                dataset.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = rand::seq::index::sample(&mut rng, dataset.len(), count).into_vec();
        picks.sort_unstable();
        return Ok(picks);
    }

    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut seen = vec![false; dataset.len()];
    let mut ids = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let i = dataset.require(line)?;
        if seen[i] {
            return Err(DataError::DuplicateListedId {
                id: line.to_string(),
                path: path.to_path_buf(),
            });
        }
        seen[i] = true;
        ids.push(i);
    }
    if ids.is_empty() {
        return Err(DataError::EmptyIdList {
            path: path.to_path_buf(),
        });
    }
    Ok(ids)
}
