//! Run manifests: one `run_manifest.txt` per command invocation capturing
//! the tool version, resolved configuration, command arguments, and
//! digests of every input file.
//!
//! Manifests are part of the reproducibility contract, so they contain
//! nothing volatile — no timestamps, no hostnames, no output paths, no
//! worker counts. Rerunning a command with the same config and inputs
//! rewrites the same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use molkern::Fnv1a64;

use crate::config::RunConfig;
use crate::CliError;

pub struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Manifest {
        let mut lines = vec![
            format!("tool = molkern {}", env!("CARGO_PKG_VERSION")),
            format!("command = {command}"),
        ];
        for (key, value) in config.manifest_entries() {
            lines.push(format!("config.{key} = {value}"));
        }
        Manifest { lines }
    }

    /// Records a command argument.
    pub fn arg(&mut self, name: &str, value: impl std::fmt::Display) -> &mut Manifest {
        self.lines.push(format!("arg.{name} = {value}"));
        self
    }

    /// Records an input file (or directory of files) with its digest.
    pub fn input(&mut self, name: &str, path: &Path) -> Result<&mut Manifest, CliError> {
        let digest = digest_path(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.lines.push(format!(
            "input.{name} = {} fnv1a64:{digest:016x}",
            path.display()
        ));
        Ok(self)
    }

    /// Records an id spec: file specs get digests, `random:` specs are
    /// self-describing.
    pub fn id_spec(&mut self, name: &str, spec: &str) -> Result<&mut Manifest, CliError> {
        if spec.starts_with("random:") {
            self.lines.push(format!("input.{name} = {spec}"));
            Ok(self)
        } else {
            self.input(name, Path::new(spec))
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join("run_manifest.txt");
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

/// FNV-1a digest of a file's bytes; for a directory, of each contained
/// file's name and bytes in sorted order.
pub fn digest_path(path: &Path) -> std::io::Result<u64> {
    let mut h = Fnv1a64::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for entry in entries {
            if let Some(name) = entry.file_name() {
                h.update(name.to_string_lossy().as_bytes());
            }
            h.update(&fs::read(&entry)?);
        }
    } else {
        h.update(&fs::read(path)?);
    }
    Ok(h.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_is_stable_and_omits_runtime_knobs() {
        let dir = std::env::temp_dir().join("molkern-manifest-test");
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        let input = dir.join("ids.txt");
        fs::write(&input, "0\n1\n").unwrap();

        let mut config = RunConfig {
            workers: 5,
            out_dir: dir.clone(),
            ..RunConfig::default()
        };

        let render = |config: &RunConfig| {
            let mut m = Manifest::new("fit-predict", config);
            m.arg("budget", 3);
            m.input("train_ids", &input).unwrap();
            m.id_spec("test_ids", "random:10:42").unwrap();
            m.write(&config.out_dir).unwrap();
            fs::read_to_string(config.out_dir.join("run_manifest.txt")).unwrap()
        };
        let first = render(&config);
        assert!(first.contains("command = fit-predict"));
        assert!(first.contains("config.hyperparams.s = 250.0"));
        assert!(first.contains("input.test_ids = random:10:42"));
        assert!(first.contains("fnv1a64:"));
        assert!(!first.contains("workers"));

        // Different worker count and output directory: same bytes.
        let other_dir = dir.join("elsewhere");
        fs::create_dir_all(&other_dir).unwrap();
        config.workers = 1;
        config.out_dir = other_dir;
        let second = render(&config);
        assert_eq!(first, second);
    }

    #[test]
    fn directory_digest_tracks_contents() {
        let dir = std::env::temp_dir().join("molkern-digest-test");
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("a.xyz"), "x").unwrap();
        fs::write(dir.join("b.xyz"), "y").unwrap();
        let before = digest_path(&dir).unwrap();
        fs::write(dir.join("b.xyz"), "z").unwrap();
        let after = digest_path(&dir).unwrap();
        assert_ne!(before, after);
    }
}
