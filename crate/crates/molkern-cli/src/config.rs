//! Run configuration: a flat `section.key = value` text file plus
//! command-line overrides.
//!
//! Defaults match the modeling values used throughout the regression
//! pipeline (ζ=1, ν=0.3, λ=0.05, s=250, q=0.05), so an empty config is a
//! valid, sensible one.

use std::path::{Path, PathBuf};
use std::{fmt, fs};

use molkern::{CouplingStorage, KernelError, KernelHyperparams, SolverBackend, SolverSettings};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected \"section.key = value\", got \"{content}\"")]
    Syntax { line: usize, content: String },
    #[error("unknown config key \"{key}\"")]
    UnknownKey { key: String },
    #[error("config key {key}: cannot parse \"{value}\" as {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("override must look like section.key=value, got \"{0}\"")]
    BadOverride(String),
    #[error(transparent)]
    Invalid(#[from] KernelError),
}

/// Everything a command needs besides its own arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hyperparams: KernelHyperparams,
    pub solver: SolverSettings,
    /// Adjacency weights below this are dropped during graph construction.
    pub weight_cutoff: f64,
    /// Relative diagonal jitter for the GP fit.
    pub rel_jitter: f64,
    pub rng_seed: u64,
    pub xyz: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Rayon worker count; 0 picks the machine default.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            hyperparams: KernelHyperparams::default(),
            solver: SolverSettings::default(),
            weight_cutoff: 1e-6,
            rel_jitter: 1e-10,
            rng_seed: 0,
            xyz: None,
            targets: None,
            out_dir: PathBuf::from("."),
            workers: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(
    key: &str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: lineno + 1,
                content: line.to_string(),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Applies one `section.key=value` command-line override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "hyperparams.nu" => self.hyperparams.nu = parse_num(key, value, "a number")?,
            "hyperparams.zeta" => self.hyperparams.zeta = parse_num(key, value, "a number")?,
            "hyperparams.lambda" => self.hyperparams.lambda = parse_num(key, value, "a number")?,
            "hyperparams.s" => self.hyperparams.s = parse_num(key, value, "a number")?,
            "hyperparams.q" => self.hyperparams.q = parse_num(key, value, "a number")?,
            "solver.backend" => {
                self.solver.backend = match value {
                    "cg" | "conjugate-gradient" => SolverBackend::ConjugateGradient,
                    "direct" => SolverBackend::DirectFactorization,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "\"conjugate-gradient\" or \"direct\"",
                        })
                    }
                }
            }
            "solver.cg_tol" => self.solver.cg_tol = parse_num(key, value, "a number")?,
            "solver.cg_max_iter" => {
                self.solver.cg_max_iter = match value {
                    "auto" => None,
                    _ => Some(parse_num(key, value, "an integer or \"auto\"")?),
                }
            }
            "solver.coupling" => {
                self.solver.coupling = match value {
                    "auto" => CouplingStorage::Auto,
                    "stored" => CouplingStorage::Stored,
                    "on-the-fly" => CouplingStorage::OnTheFly,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "\"auto\", \"stored\", or \"on-the-fly\"",
                        })
                    }
                }
            }
            "solver.weight_cutoff" => self.weight_cutoff = parse_num(key, value, "a number")?,
            "gpr.rel_jitter" => self.rel_jitter = parse_num(key, value, "a number")?,
            "seeds.rng_seed" => self.rng_seed = parse_num(key, value, "an integer")?,
            "paths.xyz" => self.xyz = non_empty_path(value),
            "paths.targets" => self.targets = non_empty_path(value),
            "paths.out_dir" => self.out_dir = PathBuf::from(value),
            "parallelism.workers" => self.workers = parse_num(key, value, "an integer")?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.hyperparams.validate()?;
        self.solver.validate()?;
        if !(self.weight_cutoff >= 0.0 && self.weight_cutoff < 1.0) {
            return Err(ConfigError::BadValue {
                key: "solver.weight_cutoff".to_string(),
                value: format!("{:?}", self.weight_cutoff),
                expected: "a number in [0, 1)",
            });
        }
        if !(self.rel_jitter >= 0.0 && self.rel_jitter.is_finite()) {
            return Err(ConfigError::BadValue {
                key: "gpr.rel_jitter".to_string(),
                value: format!("{:?}", self.rel_jitter),
                expected: "a nonnegative finite number",
            });
        }
        Ok(())
    }

    /// The modeling keys in canonical order, as they appear in run
    /// manifests. Output location and worker count are deliberately
    /// absent: neither affects the numbers a run produces.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let hp = &self.hyperparams;
        let backend = match self.solver.backend {
            SolverBackend::ConjugateGradient => "conjugate-gradient".to_string(),
            SolverBackend::DirectFactorization => "direct".to_string(),
        };
        let coupling = match self.solver.coupling {
            CouplingStorage::Auto => "auto".to_string(),
            CouplingStorage::Stored => "stored".to_string(),
            CouplingStorage::OnTheFly => "on-the-fly".to_string(),
        };
        let max_iter = match self.solver.cg_max_iter {
            None => "auto".to_string(),
            Some(n) => n.to_string(),
        };
        vec![
            ("hyperparams.nu".to_string(), format!("{:?}", hp.nu)),
            ("hyperparams.zeta".to_string(), format!("{:?}", hp.zeta)),
            ("hyperparams.lambda".to_string(), format!("{:?}", hp.lambda)),
            ("hyperparams.s".to_string(), format!("{:?}", hp.s)),
            ("hyperparams.q".to_string(), format!("{:?}", hp.q)),
            ("solver.backend".to_string(), backend),
            (
                "solver.cg_tol".to_string(),
                format!("{:?}", self.solver.cg_tol),
            ),
            ("solver.cg_max_iter".to_string(), max_iter),
            ("solver.coupling".to_string(), coupling),
            (
                "solver.weight_cutoff".to_string(),
                format!("{:?}", self.weight_cutoff),
            ),
            (
                "gpr.rel_jitter".to_string(),
                format!("{:?}", self.rel_jitter),
            ),
            ("seeds.rng_seed".to_string(), self.rng_seed.to_string()),
            ("paths.xyz".to_string(), path_string(self.xyz.as_deref())),
            (
                "paths.targets".to_string(),
                path_string(self.targets.as_deref()),
            ),
        ]
    }
}

fn non_empty_path(value: &str) -> Option<PathBuf> {
    if value.is_empty() {
        None
    } else {
        Some(PathBuf::from(value))
    }
}

fn path_string(path: Option<&Path>) -> String {
    path.map(|p| p.display().to_string()).unwrap_or_default()
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, value) in self.manifest_entries() {
            writeln!(f, "{key} = {value}")?;
        }
        writeln!(f, "paths.out_dir = {}", self.out_dir.display())?;
        writeln!(f, "parallelism.workers = {}", self.workers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_modeling_values() {
        let c = RunConfig::default();
        assert_eq!(c.hyperparams.nu, 0.3);
        assert_eq!(c.hyperparams.zeta, 1.0);
        assert_eq!(c.hyperparams.lambda, 0.05);
        assert_eq!(c.hyperparams.s, 250.0);
        assert_eq!(c.hyperparams.q, 0.05);
        assert_eq!(c.weight_cutoff, 1e-6);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn file_parsing_and_overrides() {
        let dir = std::env::temp_dir().join("molkern-config-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        fs::write(
            &path,
            "# comment\n\
             hyperparams.s = 100\n\
             solver.backend = direct\n\
             solver.cg_max_iter = 500\n\
             paths.xyz = data/pool.xyz\n\
             parallelism.workers = 3\n",
        )
        .unwrap();
        let mut c = RunConfig::from_file(&path).unwrap();
        assert_eq!(c.hyperparams.s, 100.0);
        assert_eq!(c.solver.backend, SolverBackend::DirectFactorization);
        assert_eq!(c.solver.cg_max_iter, Some(500));
        assert_eq!(c.xyz.as_deref(), Some(Path::new("data/pool.xyz")));
        assert_eq!(c.workers, 3);
        // Untouched keys keep their defaults.
        assert_eq!(c.hyperparams.nu, 0.3);

        c.apply_override("hyperparams.s=250").unwrap();
        assert_eq!(c.hyperparams.s, 250.0);
        c.apply_override("solver.cg_max_iter=auto").unwrap();
        assert_eq!(c.solver.cg_max_iter, None);
        assert!(matches!(
            c.apply_override("nonsense"),
            Err(ConfigError::BadOverride(_))
        ));
        assert!(matches!(
            c.apply_override("hyperparams.nope=1"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            c.apply_override("hyperparams.s=abc"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let dir = std::env::temp_dir().join("molkern-config-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("broken.conf");
        fs::write(&path, "hyperparams.s = 10\nno equals sign here\n").unwrap();
        match RunConfig::from_file(&path) {
            Err(ConfigError::Syntax { line: 2, content }) => {
                assert_eq!(content, "no equals sign here")
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_out_of_range_values() {
        let mut c = RunConfig::default();
        c.set("hyperparams.q", "1.5").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("solver.weight_cutoff", "1.0").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("gpr.rel_jitter", "-1e-9").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn manifest_entries_exclude_runtime_knobs() {
        let c = RunConfig {
            workers: 7,
            out_dir: PathBuf::from("/tmp/somewhere"),
            ..RunConfig::default()
        };
        let entries = c.manifest_entries();
        assert!(entries.iter().all(|(k, _)| !k.contains("workers")));
        assert!(entries.iter().all(|(k, _)| !k.contains("out_dir")));
        // But the display form (debug aid) shows everything.
        let shown = c.to_string();
        assert!(shown.contains("parallelism.workers = 7"));
    }
}
