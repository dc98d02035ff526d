//! `molkern scan`: hyperparameter grid scan with journal-based resume.
//!
//! Grid specs:
//!   - `defaults` — one point at the configured hyperparameters
//!   - `uniform:N` — N evenly spaced values per axis over the published
//!     ranges
//!   - `uniform:a,b,c,d,e` — per-axis counts in (nu, zeta, lambda, s, q)
//!     order
//!   - `s=10,55,100;q=0.01,0.05` — explicit values per axis; unlisted
//!     axes keep their configured single value

use molkern::{
    conditional_stats, grid_scan, input_digest, records_to_csv, stats_to_csv, BondLengthTable,
    KernelHyperparams, ScanAxis, ScanGrid, ScanJournal, ScanTask,
};

use crate::commands::{
    check_disjoint, require_targets, require_xyz, stage, targets_for, write_file,
};
use crate::config::RunConfig;
use crate::data::{resolve_id_spec, Dataset};
use crate::manifest::Manifest;
use crate::CliError;

pub fn parse_grid(spec: &str, hp: &KernelHyperparams) -> Result<ScanGrid, CliError> {
    let bad = |reason: String| CliError::BadGrid {
        spec: spec.to_string(),
        reason,
    };
    if spec == "defaults" {
        return Ok(ScanGrid::single(hp));
    }
    if let Some(counts) = spec.strip_prefix("uniform:") {
        let parts: Vec<&str> = counts.split(',').collect();
        let parsed: Result<Vec<usize>, _> = parts.iter().map(|p| p.trim().parse()).collect();
        let parsed = parsed.map_err(|_| bad("counts must be positive integers".to_string()))?;
        let per_axis: [usize; 5] = match parsed.as_slice() {
            [n] => [*n; 5],
            [a, b, c, d, e] => [*a, *b, *c, *d, *e],
            other => return Err(bad(format!("expected 1 or 5 counts, got {}", other.len()))),
        };
        if per_axis.contains(&0) {
            return Err(bad("counts must be positive integers".to_string()));
        }
        return Ok(ScanGrid::uniform(per_axis));
    }

    let mut grid = ScanGrid::single(hp);
    for entry in spec.split(';') {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let (axis, values) = entry
            .split_once('=')
            .ok_or_else(|| bad(format!("expected axis=v1,v2,..., got \"{entry}\"")))?;
        let parsed: Result<Vec<f64>, _> =
            values.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let parsed =
            parsed.map_err(|_| bad(format!("axis {} has a non-numeric value", axis.trim())))?;
        if parsed.is_empty() {
            return Err(bad(format!("axis {} has no values", axis.trim())));
        }
        match axis.trim() {
            "nu" => grid.nu = parsed,
            "zeta" => grid.zeta = parsed,
            "lambda" => grid.lambda = parsed,
            "s" => grid.s = parsed,
            "q" => grid.q = parsed,
            other => return Err(bad(format!("unknown axis \"{other}\""))),
        }
    }
    Ok(grid)
}

pub fn run(
    config: &RunConfig,
    train_spec: &str,
    test_spec: &str,
    grid_spec: &str,
    with_stats: bool,
) -> Result<(), CliError> {
    let xyz = require_xyz(config, "scan")?;
    let targets_path = require_targets(config, "scan")?;
    let dataset = Dataset::load(&xyz, Some(&targets_path))?;
    let train = resolve_id_spec(train_spec, &dataset)?;
    let test = resolve_id_spec(test_spec, &dataset)?;
    // Scans never allow overlap: a shared molecule would corrupt every
    // grid point, and the remapping below would hide it from the
    // library's own check.
    check_disjoint(&train, &test, &dataset)?;
    let grid = parse_grid(grid_spec, &config.hyperparams)?;

    // The task sees only the molecules the scan touches, so the journal
    // digest is insensitive to unrelated dataset edits.
    let used: Vec<usize> = train.iter().chain(&test).copied().collect();
    let molecules: Vec<_> = used.iter().map(|&i| dataset.molecules[i].clone()).collect();
    let targets = targets_for(&dataset, &used)?;
    let train_at: Vec<usize> = (0..train.len()).collect();
    let test_at: Vec<usize> = (train.len()..used.len()).collect();

    let table = BondLengthTable::standard();
    let task = ScanTask {
        molecules: &molecules,
        targets: &targets,
        train_ids: &train_at,
        test_ids: &test_at,
        table: &table,
        solver: &config.solver,
        weight_cutoff: config.weight_cutoff,
        rel_jitter: config.rel_jitter,
    };

    let digest = input_digest(&task, &grid);
    let journal_path = config.out_dir.join("scan.journal");
    let mut journal = stage("opening journal", ScanJournal::open(&journal_path, digest))?;
    let done_before = journal.completed_count();
    if done_before > 0 {
        log::info!(
            "resuming: {done_before} of {} points already journalled",
            grid.len()
        );
    }

    let records = stage("running scan", grid_scan(&task, &grid, Some(&mut journal)))?;
    write_file(&config.out_dir.join("scan.csv"), &records_to_csv(&records))?;

    if with_stats {
        for axis in ScanAxis::ALL {
            let stats = stage("summarizing", conditional_stats(&records, axis))?;
            write_file(
                &config.out_dir.join(format!("stats_{}.csv", axis.name())),
                &stats_to_csv(axis, &stats),
            )?;
        }
    }

    let failed = records.iter().filter(|r| r.failed).count();
    println!(
        "{} grid points ({} resumed, {} failed)",
        records.len(),
        done_before,
        failed
    );
    if let Some(best) = records
        .iter()
        .filter(|r| !r.failed)
        .min_by(|a, b| a.mae.total_cmp(&b.mae))
    {
        println!(
            "best mae = {:.6} at nu={} zeta={} lambda={} s={} q={}",
            best.mae, best.nu, best.zeta, best.lambda, best.s, best.q
        );
    }

    let mut manifest = Manifest::new("scan", config);
    manifest
        .input("xyz", &xyz)?
        .input("targets", &targets_path)?
        .id_spec("train_ids", train_spec)?
        .id_spec("test_ids", test_spec)?
        .arg("grid", grid_spec)
        .arg("grid_points", grid.len())
        .arg("scan_digest", format!("{digest:016x}"));
    manifest.write(&config.out_dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs() {
        let hp = KernelHyperparams::default();
        let g = parse_grid("defaults", &hp).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.point(0), hp);

        let g = parse_grid("uniform:3", &hp).unwrap();
        assert_eq!(g.len(), 243);

        let g = parse_grid("uniform:2,1,1,3,1", &hp).unwrap();
        assert_eq!(g.len(), 6);

        let g = parse_grid("s=10,55,100;q=0.01,0.05", &hp).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.s, vec![10.0, 55.0, 100.0]);
        assert_eq!(g.q, vec![0.01, 0.05]);
        assert_eq!(g.nu, vec![hp.nu]);

        for broken in [
            "uniform:0",
            "uniform:1,2",
            "s=",
            "s=abc",
            "volume=1",
            "s:10",
        ] {
            assert!(
                matches!(parse_grid(broken, &hp), Err(CliError::BadGrid { .. })),
                "{broken:?} should be rejected"
            );
        }
    }
}
