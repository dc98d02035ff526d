//! Exhaustive hyperparameter grid scans with journal-based resume.
//!
//! A scan walks every point of a five-axis hyperparameter grid, runs the
//! full graph → Gram → fit → predict pipeline at each point, and collects
//! one metrics record per point. Points that fail (a stalled solver, an
//! indefinite Gram) are flagged in their record instead of aborting the
//! scan. Records are emitted in lexicographic axis order — (ν, ζ, λ, s, q)
//! with q varying fastest — regardless of how the work was scheduled.
//!
//! Resume works through a journal file: each completed record is appended
//! as soon as it exists, under a header that fingerprints every input. A
//! rerun with the same inputs loads the completed records and computes
//! only the remainder; a rerun with different inputs refuses the stale
//! journal rather than mixing incompatible results.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::element::BondLengthTable;
use crate::gpr::{self, TestGram};
use crate::graph::{build_graph, GraphError, MolecularGraph, Molecule};
use crate::kernel::{
    cross_gram_matrix, gram_matrix, kernel_diagonal, KernelError, KernelHyperparams, SolverSettings,
};
use crate::util::Fnv1a64;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("grid axis {axis} must not be empty")]
    EmptyAxis { axis: &'static str },
    #[error("grid has too many points for this platform")]
    GridTooLarge,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{which} id list must not be empty")]
    EmptyIds { which: &'static str },
    #[error("id {id} out of range for pool of {pool}")]
    IdOutOfRange { id: usize, pool: usize },
    #[error("id {id} appears twice")]
    DuplicateId { id: usize },
    #[error("id {id} is in both the train and test lists")]
    OverlappingIds { id: usize },
    #[error("expected {expected} targets (one per molecule), got {got}")]
    TargetsLength { expected: usize, got: usize },
    #[error("target for molecule {id} is not finite")]
    NonFiniteTarget { id: usize },
    #[error("unknown scan axis {name:?} (expected nu, zeta, lambda, s, or q)")]
    UnknownAxis { name: String },
    #[error("no records to aggregate")]
    NoRecords,
    #[error(
        "journal {path} was written by a scan with different inputs; \
         delete it or use a different output location"
    )]
    StaleJournal { path: PathBuf },
    #[error("journal {path} has a malformed header")]
    JournalHeader { path: PathBuf },
    #[error("journal line {line}: {message}")]
    JournalParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One value sequence per hyperparameter axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub nu: Vec<f64>,
    pub zeta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub s: Vec<f64>,
    pub q: Vec<f64>,
}

/// Published scan ranges, used by [`ScanGrid::uniform`].
pub const NU_RANGE: (f64, f64) = (0.1, 0.9);
pub const ZETA_RANGE: (f64, f64) = (0.5, 1.5);
pub const LAMBDA_RANGE: (f64, f64) = (0.01, 0.4);
pub const S_RANGE: (f64, f64) = (10.0, 500.0);
pub const Q_RANGE: (f64, f64) = (0.01, 0.5);

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + i as f64 * step).collect()
        }
    }
}

impl ScanGrid {
    /// Uniformly spaced values over the published ranges, with the given
    /// count per axis in (ν, ζ, λ, s, q) order. A count of one picks the
    /// range midpoint.
    pub fn uniform(counts: [usize; 5]) -> ScanGrid {
        ScanGrid {
            nu: linspace(NU_RANGE.0, NU_RANGE.1, counts[0]),
            zeta: linspace(ZETA_RANGE.0, ZETA_RANGE.1, counts[1]),
            lambda: linspace(LAMBDA_RANGE.0, LAMBDA_RANGE.1, counts[2]),
            s: linspace(S_RANGE.0, S_RANGE.1, counts[3]),
            q: linspace(Q_RANGE.0, Q_RANGE.1, counts[4]),
        }
    }

    /// The single point of the default modelling hyperparameters.
    pub fn single(hp: &KernelHyperparams) -> ScanGrid {
        ScanGrid {
            nu: vec![hp.nu],
            zeta: vec![hp.zeta],
            lambda: vec![hp.lambda],
            s: vec![hp.s],
            q: vec![hp.q],
        }
    }

    pub fn len(&self) -> usize {
        self.nu.len() * self.zeta.len() * self.lambda.len() * self.s.len() * self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hyperparameters of the flat grid index, q varying fastest.
    pub fn point(&self, flat: usize) -> KernelHyperparams {
        debug_assert!(flat < self.len());
        let (rest, iq) = (flat / self.q.len(), flat % self.q.len());
        let (rest, is) = (rest / self.s.len(), rest % self.s.len());
        let (rest, il) = (rest / self.lambda.len(), rest % self.lambda.len());
        let (inu, iz) = (rest / self.zeta.len(), rest % self.zeta.len());
        KernelHyperparams {
            nu: self.nu[inu],
            zeta: self.zeta[iz],
            lambda: self.lambda[il],
            s: self.s[is],
            q: self.q[iq],
        }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        for (axis, values) in [
            ("nu", &self.nu),
            ("zeta", &self.zeta),
            ("lambda", &self.lambda),
            ("s", &self.s),
            ("q", &self.q),
        ] {
            if values.is_empty() {
                return Err(ScanError::EmptyAxis { axis });
            }
        }
        let mut total = 1usize;
        for len in [
            self.nu.len(),
            self.zeta.len(),
            self.lambda.len(),
            self.s.len(),
            self.q.len(),
        ] {
            total = total.checked_mul(len).ok_or(ScanError::GridTooLarge)?;
        }
        // Axis-by-axis validation with defaults on the other axes catches
        // out-of-range values without visiting every combination.
        let defaults = KernelHyperparams::default();
        for &nu in &self.nu {
            KernelHyperparams { nu, ..defaults }.validate()?;
        }
        for &zeta in &self.zeta {
            KernelHyperparams { zeta, ..defaults }.validate()?;
        }
        for &lambda in &self.lambda {
            KernelHyperparams { lambda, ..defaults }.validate()?;
        }
        for &s in &self.s {
            KernelHyperparams { s, ..defaults }.validate()?;
        }
        for &q in &self.q {
            KernelHyperparams { q, ..defaults }.validate()?;
        }
        Ok(())
    }
}

/// Metrics of one grid point.
///
/// `wall_time` is measured per run and is deliberately excluded from CSV
/// rendering and journal persistence so that reruns and resumed runs
/// produce byte-identical files; resumed records report zero.
#[derive(Debug, Clone)]
pub struct ScanRecord {
    pub index: usize,
    pub nu: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub s: f64,
    pub q: f64,
    /// NaN when `failed`.
    pub mae: f64,
    pub rmse: f64,
    pub log_marginal_likelihood: f64,
    /// `None` when undefined (constant errors or uncertainties) or failed.
    pub correlation: Option<f64>,
    pub failed: bool,
    /// Seconds spent computing this point, this run.
    pub wall_time: f64,
}

pub const SCAN_CSV_HEADER: &str = "index,nu,zeta,lambda,s,q,mae,rmse,lml,correlation,failed";

impl ScanRecord {
    pub fn csv_line(&self) -> String {
        let metric = |v: f64| {
            if self.failed {
                String::new()
            } else {
                v.to_string()
            }
        };
        let corr = self.correlation.map(|c| c.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.index,
            self.nu,
            self.zeta,
            self.lambda,
            self.s,
            self.q,
            metric(self.mae),
            metric(self.rmse),
            metric(self.log_marginal_likelihood),
            corr,
            u8::from(self.failed),
        )
    }

    fn from_csv_line(line: &str) -> Result<ScanRecord, String> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(format!("expected 11 fields, got {}", fields.len()));
        }
        let index: usize = fields[0].parse().map_err(|e| format!("index: {e}"))?;
        let num = |i: usize, name: &str| -> Result<f64, String> {
            fields[i].parse::<f64>().map_err(|e| format!("{name}: {e}"))
        };
        let metric = |i: usize, name: &str| -> Result<f64, String> {
            if fields[i].is_empty() {
                Ok(f64::NAN)
            } else {
                num(i, name)
            }
        };
        let correlation = if fields[9].is_empty() {
            None
        } else {
            Some(num(9, "correlation")?)
        };
        let failed = match fields[10] {
            "0" => false,
            "1" => true,
            other => return Err(format!("failed flag: expected 0 or 1, got {other:?}")),
        };
        Ok(ScanRecord {
            index,
            nu: num(1, "nu")?,
            zeta: num(2, "zeta")?,
            lambda: num(3, "lambda")?,
            s: num(4, "s")?,
            q: num(5, "q")?,
            mae: metric(6, "mae")?,
            rmse: metric(7, "rmse")?,
            log_marginal_likelihood: metric(8, "lml")?,
            correlation,
            failed,
            wall_time: 0.0,
        })
    }
}

/// Full record CSV: header plus one line per record.
pub fn records_to_csv(records: &[ScanRecord]) -> String {
    let mut out = String::from(SCAN_CSV_HEADER);
    out.push('\n');
    for record in records {
        out.push_str(&record.csv_line());
        out.push('\n');
    }
    out
}

/// Everything a scan depends on besides the grid itself.
pub struct ScanTask<'a> {
    pub molecules: &'a [Molecule],
    /// One target per pool molecule (only train/test entries are read).
    pub targets: &'a [f64],
    pub train_ids: &'a [usize],
    pub test_ids: &'a [usize],
    pub table: &'a BondLengthTable,
    pub solver: &'a SolverSettings,
    pub weight_cutoff: f64,
    pub rel_jitter: f64,
}

/// Fingerprint of every scan input; binds journals to the run that wrote
/// them.
pub fn input_digest(task: &ScanTask, grid: &ScanGrid) -> u64 {
    let mut h = Fnv1a64::new();
    h.update(b"molkern-scan-v1");
    h.update_usize(task.molecules.len());
    for mol in task.molecules {
        h.update_usize(mol.len());
        for (element, coord) in mol.elements.iter().zip(&mol.coords) {
            h.update_usize(element.index());
            h.update_f64(coord[0])
                .update_f64(coord[1])
                .update_f64(coord[2]);
        }
    }
    for &t in task.targets {
        h.update_f64(t);
    }
    for ids in [task.train_ids, task.test_ids] {
        h.update_usize(ids.len());
        for &id in ids {
            h.update_usize(id);
        }
    }
    for axis in [&grid.nu, &grid.zeta, &grid.lambda, &grid.s, &grid.q] {
        h.update_usize(axis.len());
        for &v in axis {
            h.update_f64(v);
        }
    }
    for a in crate::element::Element::ALL {
        for b in crate::element::Element::ALL {
            h.update_f64(task.table.get(a, b));
        }
    }
    h.update_usize(match task.solver.backend {
        crate::kernel::SolverBackend::ConjugateGradient => 0,
        crate::kernel::SolverBackend::DirectFactorization => 1,
    });
    h.update_f64(task.solver.cg_tol);
    h.update_usize(task.solver.cg_max_iter.map_or(0, |n| n + 1));
    h.update_usize(match task.solver.coupling {
        crate::kernel::CouplingStorage::Auto => 0,
        crate::kernel::CouplingStorage::Stored => 1,
        crate::kernel::CouplingStorage::OnTheFly => 2,
    });
    h.update_f64(task.weight_cutoff);
    h.update_f64(task.rel_jitter);
    h.finish()
}

/// Append-only record of completed scan points.
pub struct ScanJournal {
    path: PathBuf,
    file: fs::File,
    completed: HashMap<usize, ScanRecord>,
}

const JOURNAL_PREFIX: &str = "# molkern scan journal v1 digest=";

impl ScanJournal {
    /// Opens (or creates) the journal at `path` for a scan whose inputs
    /// hash to `digest`. An existing journal written under a different
    /// digest is refused.
    pub fn open(path: &Path, digest: u64) -> Result<ScanJournal, ScanError> {
        let mut completed = HashMap::new();
        let header = format!("{JOURNAL_PREFIX}{digest:016x}");
        if path.exists() {
            let text = fs::read_to_string(path)?;
            let mut lines = text.lines().enumerate();
            match lines.next() {
                Some((_, first)) if first == header => {}
                Some((_, first)) if first.starts_with(JOURNAL_PREFIX) => {
                    return Err(ScanError::StaleJournal {
                        path: path.to_path_buf(),
                    });
                }
                _ => {
                    return Err(ScanError::JournalHeader {
                        path: path.to_path_buf(),
                    });
                }
            }
            let records: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
            let last = records.len().saturating_sub(1);
            for (pos, (line_no, line)) in records.into_iter().enumerate() {
                match ScanRecord::from_csv_line(line) {
                    Ok(record) => {
                        if completed.insert(record.index, record).is_some() {
                            return Err(ScanError::JournalParse {
                                line: line_no + 1,
                                message: "duplicate grid index".to_string(),
                            });
                        }
                    }
                    // A torn final line means the previous run died
                    // mid-write; that point simply reruns.
                    Err(_) if pos == last => {
                        log::warn!("ignoring torn final journal line {}", line_no + 1);
                    }
                    Err(message) => {
                        return Err(ScanError::JournalParse {
                            line: line_no + 1,
                            message,
                        });
                    }
                }
            }
            let file = fs::OpenOptions::new().append(true).open(path)?;
            Ok(ScanJournal {
                path: path.to_path_buf(),
                file,
                completed,
            })
        } else {
            let mut file = fs::OpenOptions::new()
                .create_new(true)
                .append(true)
                .open(path)?;
            writeln!(file, "{header}")?;
            file.flush()?;
            Ok(ScanJournal {
                path: path.to_path_buf(),
                file,
                completed,
            })
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn completed_count(&self) -> usize {
        self.completed.len()
    }

    fn append(&mut self, record: &ScanRecord) -> Result<(), ScanError> {
        writeln!(self.file, "{}", record.csv_line())?;
        self.file.flush()?;
        self.completed.insert(record.index, record.clone());
        Ok(())
    }
}

fn validate_ids(task: &ScanTask) -> Result<(), ScanError> {
    let pool = task.molecules.len();
    if task.targets.len() != pool {
        return Err(ScanError::TargetsLength {
            expected: pool,
            got: task.targets.len(),
        });
    }
    if task.train_ids.is_empty() {
        return Err(ScanError::EmptyIds { which: "train" });
    }
    if task.test_ids.is_empty() {
        return Err(ScanError::EmptyIds { which: "test" });
    }
    let mut seen = vec![0u8; pool];
    for (ids, mark) in [(task.train_ids, 1u8), (task.test_ids, 2u8)] {
        for &id in ids {
            if id >= pool {
                return Err(ScanError::IdOutOfRange { id, pool });
            }
            match seen[id] {
                0 => seen[id] = mark,
                m if m == mark => return Err(ScanError::DuplicateId { id }),
                _ => return Err(ScanError::OverlappingIds { id }),
            }
            if task.molecules[id].is_empty() {
                return Err(ScanError::Graph(GraphError::EmptyMolecule));
            }
            if !task.targets[id].is_finite() {
                return Err(ScanError::NonFiniteTarget { id });
            }
        }
    }
    Ok(())
}

type GraphCache = HashMap<(u64, u64, u64), Vec<MolecularGraph>>;

fn compute_point(
    task: &ScanTask,
    hp: &KernelHyperparams,
    cache: &mut GraphCache,
) -> Result<(f64, f64, f64, Option<f64>), String> {
    // ζ and q shape the graphs; s is grouped with them so the cache key
    // mirrors which hyperparameters belong to graph construction rather
    // than to the edge/vertex kernels.
    let key = (hp.zeta.to_bits(), hp.q.to_bits(), hp.s.to_bits());
    if let std::collections::hash_map::Entry::Vacant(slot) = cache.entry(key) {
        let params = hp.graph_params(task.weight_cutoff);
        let graphs: Result<Vec<MolecularGraph>, GraphError> = task
            .train_ids
            .iter()
            .chain(task.test_ids)
            .map(|&id| build_graph(&task.molecules[id], task.table, &params))
            .collect();
        slot.insert(graphs.map_err(|e| e.to_string())?);
    }
    let graphs = &cache[&key];
    let (train_graphs, test_graphs) = graphs.split_at(task.train_ids.len());

    let gram = gram_matrix(train_graphs, hp, task.solver).map_err(|e| e.to_string())?;
    let cross =
        cross_gram_matrix(train_graphs, test_graphs, hp, task.solver).map_err(|e| e.to_string())?;
    let diag = kernel_diagonal(test_graphs, hp, task.solver).map_err(|e| e.to_string())?;

    let train_y: Vec<f64> = task.train_ids.iter().map(|&id| task.targets[id]).collect();
    let test_y: Vec<f64> = task.test_ids.iter().map(|&id| task.targets[id]).collect();

    let model = gpr::fit(&gram, &train_y, task.rel_jitter).map_err(|e| e.to_string())?;
    let pred =
        gpr::predict(&model, &cross, Some(TestGram::Diagonal(&diag))).map_err(|e| e.to_string())?;
    let mae = gpr::mae(&pred.mean, &test_y).map_err(|e| e.to_string())?;
    let rmse = gpr::rmse(&pred.mean, &test_y).map_err(|e| e.to_string())?;
    let lml = gpr::log_marginal_likelihood(&model);
    let stds = pred.std.expect("diagonal test gram yields stds");
    let correlation = if test_y.len() >= 2 {
        let abs_err: Vec<f64> = pred
            .mean
            .iter()
            .zip(&test_y)
            .map(|(p, t)| (p - t).abs())
            .collect();
        gpr::error_uncertainty_correlation(&abs_err, &stds).map_err(|e| e.to_string())?
    } else {
        None
    };
    Ok((mae, rmse, lml, correlation))
}

/// Runs the scan, returning one record per grid point in flat grid order.
///
/// With a journal, completed points load from disk (their `wall_time` is
/// zero) and each newly computed record is persisted before the next
/// point starts.
pub fn grid_scan(
    task: &ScanTask,
    grid: &ScanGrid,
    mut journal: Option<&mut ScanJournal>,
) -> Result<Vec<ScanRecord>, ScanError> {
    grid.validate()?;
    task.solver.validate()?;
    KernelHyperparams::default()
        .graph_params(task.weight_cutoff)
        .validate()?;
    validate_ids(task)?;

    let total = grid.len();
    let mut cache: GraphCache = HashMap::new();
    let mut records = Vec::with_capacity(total);
    for flat in 0..total {
        if let Some(journal) = journal.as_deref() {
            if let Some(done) = journal.completed.get(&flat) {
                records.push(done.clone());
                continue;
            }
        }
        let hp = grid.point(flat);
        let start = Instant::now();
        let record = match compute_point(task, &hp, &mut cache) {
            Ok((mae, rmse, lml, correlation)) => ScanRecord {
                index: flat,
                nu: hp.nu,
                zeta: hp.zeta,
                lambda: hp.lambda,
                s: hp.s,
                q: hp.q,
                mae,
                rmse,
                log_marginal_likelihood: lml,
                correlation,
                failed: false,
                wall_time: start.elapsed().as_secs_f64(),
            },
            Err(message) => {
                log::warn!(
                    "grid point {flat} (nu={}, zeta={}, lambda={}, s={}, q={}) failed: {message}",
                    hp.nu,
                    hp.zeta,
                    hp.lambda,
                    hp.s,
                    hp.q
                );
                ScanRecord {
                    index: flat,
                    nu: hp.nu,
                    zeta: hp.zeta,
                    lambda: hp.lambda,
                    s: hp.s,
                    q: hp.q,
                    mae: f64::NAN,
                    rmse: f64::NAN,
                    log_marginal_likelihood: f64::NAN,
                    correlation: None,
                    failed: true,
                    wall_time: start.elapsed().as_secs_f64(),
                }
            }
        };
        if let Some(journal) = journal.as_deref_mut() {
            journal.append(&record)?;
        }
        records.push(record);
    }
    Ok(records)
}

/// A scan axis, for conditioning aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    Nu,
    Zeta,
    Lambda,
    S,
    Q,
}

impl ScanAxis {
    pub const ALL: [ScanAxis; 5] = [
        ScanAxis::Nu,
        ScanAxis::Zeta,
        ScanAxis::Lambda,
        ScanAxis::S,
        ScanAxis::Q,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanAxis::Nu => "nu",
            ScanAxis::Zeta => "zeta",
            ScanAxis::Lambda => "lambda",
            ScanAxis::S => "s",
            ScanAxis::Q => "q",
        }
    }

    pub fn from_name(name: &str) -> Result<ScanAxis, ScanError> {
        ScanAxis::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| ScanError::UnknownAxis {
                name: name.to_string(),
            })
    }

    fn value(self, record: &ScanRecord) -> f64 {
        match self {
            ScanAxis::Nu => record.nu,
            ScanAxis::Zeta => record.zeta,
            ScanAxis::Lambda => record.lambda,
            ScanAxis::S => record.s,
            ScanAxis::Q => record.q,
        }
    }
}

/// Count, mean, and interpolated quantiles of one metric over a group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[sorted.len() - 1]
    }
}

impl SummaryStats {
    fn from_values(mut values: Vec<f64>) -> Option<SummaryStats> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let count = values.len();
        Some(SummaryStats {
            count,
            mean: values.iter().sum::<f64>() / count as f64,
            median: percentile(&values, 0.5),
            p10: percentile(&values, 0.1),
            p90: percentile(&values, 0.9),
        })
    }
}

/// Aggregates over all records sharing one value of the conditioning
/// axis. Failed records count toward `failed` and are excluded from every
/// metric; records whose correlation is undefined are additionally
/// excluded from the correlation aggregate and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisGroupStats {
    pub value: f64,
    pub count: usize,
    pub failed: usize,
    pub mae: Option<SummaryStats>,
    pub log_marginal_likelihood: Option<SummaryStats>,
    pub correlation: Option<SummaryStats>,
    pub correlation_excluded: usize,
}

/// Groups records by their value on `axis` and summarizes each group,
/// ordered by ascending axis value.
pub fn conditional_stats(
    records: &[ScanRecord],
    axis: ScanAxis,
) -> Result<Vec<AxisGroupStats>, ScanError> {
    if records.is_empty() {
        return Err(ScanError::NoRecords);
    }
    let mut order: Vec<f64> = Vec::new();
    let mut groups: HashMap<u64, Vec<&ScanRecord>> = HashMap::new();
    for record in records {
        let value = axis.value(record);
        let entry = groups.entry(value.to_bits()).or_default();
        if entry.is_empty() {
            order.push(value);
        }
        entry.push(record);
    }
    order.sort_by(f64::total_cmp);

    let mut out = Vec::with_capacity(order.len());
    for value in order {
        let members = &groups[&value.to_bits()];
        let ok: Vec<&&ScanRecord> = members.iter().filter(|r| !r.failed).collect();
        let failed = members.len() - ok.len();
        let correlations: Vec<f64> = ok.iter().filter_map(|r| r.correlation).collect();
        let correlation_excluded = ok.len() - correlations.len();
        out.push(AxisGroupStats {
            value,
            count: members.len(),
            failed,
            mae: SummaryStats::from_values(ok.iter().map(|r| r.mae).collect()),
            log_marginal_likelihood: SummaryStats::from_values(
                ok.iter().map(|r| r.log_marginal_likelihood).collect(),
            ),
            correlation: SummaryStats::from_values(correlations),
            correlation_excluded,
        });
    }
    Ok(out)
}

/// Renders conditional statistics for one axis as CSV.
pub fn stats_to_csv(axis: ScanAxis, stats: &[AxisGroupStats]) -> String {
    let mut out = String::from(
        "axis,value,count,failed,mae_count,mae_mean,mae_median,mae_p10,mae_p90,\
         lml_count,lml_mean,lml_median,lml_p10,lml_p90,\
         corr_count,corr_mean,corr_median,corr_p10,corr_p90,corr_excluded\n",
    );
    let block = |s: &Option<SummaryStats>| match s {
        Some(s) => format!("{},{},{},{},{}", s.count, s.mean, s.median, s.p10, s.p90),
        None => "0,,,,".to_string(),
    };
    for group in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            axis.name(),
            group.value,
            group.count,
            group.failed,
            block(&group.mae),
            block(&group.log_marginal_likelihood),
            block(&group.correlation),
            group.correlation_excluded,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::Element;
    use crate::kernel::SolverBackend;
    use approx::assert_relative_eq;

    fn mol(spec: &[(Element, [f64; 3])]) -> Molecule {
        Molecule::new(
            spec.iter().map(|(e, _)| *e).collect(),
            spec.iter().map(|(_, c)| *c).collect(),
        )
    }

    /// Six tiny molecules: varied H2 bond lengths, HF, and water.
    fn pool() -> Vec<Molecule> {
        use Element::{F, H, O};
        vec![
            mol(&[(H, [0.0; 3]), (H, [0.74, 0.0, 0.0])]),
            mol(&[(H, [0.0; 3]), (H, [0.80, 0.0, 0.0])]),
            mol(&[(H, [0.0; 3]), (H, [0.70, 0.0, 0.0])]),
            mol(&[(H, [0.0; 3]), (F, [0.92, 0.0, 0.0])]),
            mol(&[
                (O, [0.0; 3]),
                (H, [0.9584, 0.0, 0.0]),
                (H, [-0.2392, 0.9281, 0.0]),
            ]),
            mol(&[(H, [0.0; 3]), (H, [0.77, 0.0, 0.0])]),
        ]
    }

    fn targets() -> Vec<f64> {
        vec![-104.2, -100.5, -106.0, -135.2, -219.3, -102.4]
    }

    fn task<'a>(
        molecules: &'a [Molecule],
        targets: &'a [f64],
        train: &'a [usize],
        test: &'a [usize],
        table: &'a BondLengthTable,
        solver: &'a SolverSettings,
    ) -> ScanTask<'a> {
        ScanTask {
            molecules,
            targets,
            train_ids: train,
            test_ids: test,
            table,
            solver,
            weight_cutoff: 1e-6,
            rel_jitter: 1e-10,
        }
    }

    fn small_grid() -> ScanGrid {
        ScanGrid {
            nu: vec![0.2, 0.4],
            zeta: vec![1.0],
            lambda: vec![0.05],
            s: vec![1.0],
            q: vec![0.05, 0.2],
        }
    }

    #[test]
    fn flat_order_is_lexicographic_with_q_fastest() {
        let grid = small_grid();
        assert_eq!(grid.len(), 4);
        let points: Vec<(f64, f64)> = (0..4)
            .map(|i| (grid.point(i).nu, grid.point(i).q))
            .collect();
        assert_eq!(
            points,
            vec![(0.2, 0.05), (0.2, 0.2), (0.4, 0.05), (0.4, 0.2)]
        );
    }

    #[test]
    fn uniform_grid_spans_published_ranges() {
        let grid = ScanGrid::uniform([3, 3, 3, 3, 3]);
        assert_eq!(grid.len(), 243);
        assert_eq!(grid.nu, vec![0.1, 0.5, 0.9]);
        assert_eq!(grid.s, vec![10.0, 255.0, 500.0]);
        grid.validate().unwrap();

        let single = ScanGrid::uniform([1, 1, 1, 1, 1]);
        assert_eq!(single.len(), 1);
        assert_relative_eq!(single.point(0).lambda, 0.205, max_relative = 1e-12);
    }

    #[test]
    fn one_point_grid_matches_manual_pipeline() {
        let molecules = pool();
        let ys = targets();
        let table = BondLengthTable::standard();
        let solver = SolverSettings::default();
        let train = [0, 3, 4];
        let test = [1, 2, 5];
        let t = task(&molecules, &ys, &train, &test, &table, &solver);
        let hp = KernelHyperparams {
            s: 1.0,
            ..KernelHyperparams::default()
        };
        let records = grid_scan(&t, &ScanGrid::single(&hp), None).unwrap();
        assert_eq!(records.len(), 1);
        let record = &records[0];
        assert!(!record.failed);

        // The same pipeline, by hand.
        let params = hp.graph_params(1e-6);
        let graphs: Vec<MolecularGraph> = train
            .iter()
            .chain(&test)
            .map(|&id| build_graph(&molecules[id], &table, &params).unwrap())
            .collect();
        let (tg, sg) = graphs.split_at(3);
        let gram = gram_matrix(tg, &hp, &solver).unwrap();
        let cross = cross_gram_matrix(tg, sg, &hp, &solver).unwrap();
        let train_y: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
        let test_y: Vec<f64> = test.iter().map(|&i| ys[i]).collect();
        let model = gpr::fit(&gram, &train_y, 1e-10).unwrap();
        let pred = gpr::predict(&model, &cross, None).unwrap();
        assert_eq!(
            record.mae.to_bits(),
            gpr::mae(&pred.mean, &test_y).unwrap().to_bits()
        );
        assert_eq!(
            record.rmse.to_bits(),
            gpr::rmse(&pred.mean, &test_y).unwrap().to_bits()
        );
        assert_eq!(
            record.log_marginal_likelihood.to_bits(),
            gpr::log_marginal_likelihood(&model).to_bits()
        );
        assert!(record.correlation.is_some());
    }

    #[test]
    fn graph_cache_does_not_change_results() {
        let molecules = pool();
        let ys = targets();
        let table = BondLengthTable::standard();
        let solver = SolverSettings::default();
        let train = [0, 3];
        let test = [1, 4];
        let t = task(&molecules, &ys, &train, &test, &table, &solver);

        // λ and ν vary while (ζ, s, q) stay fixed, so the batch run
        // reuses one cached graph set across all four points.
        let grid = ScanGrid {
            nu: vec![0.2, 0.4],
            zeta: vec![1.0],
            lambda: vec![0.05, 0.1],
            s: vec![1.0],
            q: vec![0.05],
        };
        let batch = grid_scan(&t, &grid, None).unwrap();
        for record in &batch {
            let hp = KernelHyperparams {
                nu: record.nu,
                zeta: record.zeta,
                lambda: record.lambda,
                s: record.s,
                q: record.q,
            };
            let fresh = grid_scan(&t, &ScanGrid::single(&hp), None).unwrap();
            assert_eq!(
                record
                    .csv_line()
                    .split_once(',')
                    .unwrap()
                    .1
                    .split_once(',')
                    .unwrap()
                    .1,
                fresh[0]
                    .csv_line()
                    .split_once(',')
                    .unwrap()
                    .1
                    .split_once(',')
                    .unwrap()
                    .1,
                "cached and fresh runs disagree at nu={} lambda={}",
                record.nu,
                record.lambda
            );
        }
    }

    #[test]
    fn records_and_csv_round_trip() {
        let record = ScanRecord {
            index: 7,
            nu: 0.3,
            zeta: 1.0,
            lambda: 0.05,
            s: 250.0,
            q: 0.05,
            mae: 1.25,
            rmse: 2.5,
            log_marginal_likelihood: -123.456,
            correlation: Some(0.75),
            failed: false,
            wall_time: 9.0,
        };
        let parsed = ScanRecord::from_csv_line(&record.csv_line()).unwrap();
        assert_eq!(parsed.csv_line(), record.csv_line());
        assert_eq!(parsed.wall_time, 0.0, "wall time must not persist");

        let failed = ScanRecord {
            failed: true,
            mae: f64::NAN,
            rmse: f64::NAN,
            log_marginal_likelihood: f64::NAN,
            correlation: None,
            ..record
        };
        let line = failed.csv_line();
        assert!(line.ends_with(",,,,1"), "failed line: {line}");
        let parsed = ScanRecord::from_csv_line(&line).unwrap();
        assert!(parsed.failed && parsed.mae.is_nan());
    }

    fn temp_journal(tag: &str) -> PathBuf {
        std::env::temp_dir().join(format!(
            "molkern-scan-test-{}-{tag}.journal",
            std::process::id()
        ))
    }

    #[test]
    fn resume_reproduces_an_uninterrupted_run() {
        let molecules = pool();
        let ys = targets();
        let table = BondLengthTable::standard();
        let solver = SolverSettings::default();
        let train = [0, 3, 4];
        let test = [1, 2];
        let t = task(&molecules, &ys, &train, &test, &table, &solver);
        let grid = small_grid();
        let digest = input_digest(&t, &grid);

        let uninterrupted = grid_scan(&t, &grid, None).unwrap();

        let path = temp_journal("resume");
        let _ = fs::remove_file(&path);
        {
            let mut journal = ScanJournal::open(&path, digest).unwrap();
            let full = grid_scan(&t, &grid, Some(&mut journal)).unwrap();
            assert_eq!(records_to_csv(&full), records_to_csv(&uninterrupted));
        }

        // Simulate an interruption after two points by truncating the
        // journal, then resume.
        let text = fs::read_to_string(&path).unwrap();
        let kept: Vec<&str> = text.lines().take(3).collect();
        fs::write(&path, format!("{}\n", kept.join("\n"))).unwrap();

        let mut journal = ScanJournal::open(&path, digest).unwrap();
        assert_eq!(journal.completed_count(), 2);
        let resumed = grid_scan(&t, &grid, Some(&mut journal)).unwrap();
        assert_eq!(records_to_csv(&resumed), records_to_csv(&uninterrupted));
        assert_eq!(journal.completed_count(), 4);

        // A second full rerun over the now-complete journal recomputes
        // nothing and still matches.
        let mut journal = ScanJournal::open(&path, digest).unwrap();
        let replayed = grid_scan(&t, &grid, Some(&mut journal)).unwrap();
        assert_eq!(records_to_csv(&replayed), records_to_csv(&uninterrupted));

        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn stale_journal_is_refused() {
        let path = temp_journal("stale");
        let _ = fs::remove_file(&path);
        {
            ScanJournal::open(&path, 0x1111).unwrap();
        }
        assert!(matches!(
            ScanJournal::open(&path, 0x2222),
            Err(ScanError::StaleJournal { .. })
        ));
        fs::remove_file(&path).unwrap();

        let garbage = temp_journal("garbage");
        fs::write(&garbage, "not a journal\n").unwrap();
        assert!(matches!(
            ScanJournal::open(&garbage, 0x1111),
            Err(ScanError::JournalHeader { .. })
        ));
        fs::remove_file(&garbage).unwrap();
    }

    #[test]
    fn torn_final_line_is_dropped() {
        let path = temp_journal("torn");
        let _ = fs::remove_file(&path);
        let digest = 0xabcdu64;
        {
            let mut journal = ScanJournal::open(&path, digest).unwrap();
            journal
                .append(&ScanRecord::from_csv_line("0,0.3,1,0.05,250,0.05,1,2,-3,,0").unwrap())
                .unwrap();
        }
        // Half-written line without trailing newline.
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("1,0.3,1,0.0");
        fs::write(&path, text).unwrap();
        let journal = ScanJournal::open(&path, digest).unwrap();
        assert_eq!(journal.completed_count(), 1);
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn failures_are_flagged_not_fatal() {
        let molecules = pool();
        let ys = targets();
        let table = BondLengthTable::standard();
        // A one-iteration cap stalls conjugate gradient on any system
        // whose Krylov space is bigger than one dimension.
        let solver = SolverSettings {
            cg_max_iter: Some(1),
            backend: SolverBackend::ConjugateGradient,
            ..SolverSettings::default()
        };
        let train = [4, 3];
        let test = [0, 1];
        let t = task(&molecules, &ys, &train, &test, &table, &solver);
        let hp = KernelHyperparams::default();
        let records = grid_scan(&t, &ScanGrid::single(&hp), None).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].failed);
        assert!(records[0].mae.is_nan());
        assert_eq!(records[0].correlation, None);
    }

    #[test]
    fn id_validation() {
        let molecules = pool();
        let ys = targets();
        let table = BondLengthTable::standard();
        let solver = SolverSettings::default();
        let grid = ScanGrid::single(&KernelHyperparams::default());

        let t = task(&molecules, &ys, &[0, 1], &[1, 2], &table, &solver);
        assert!(matches!(
            grid_scan(&t, &grid, None),
            Err(ScanError::OverlappingIds { id: 1 })
        ));
        let t = task(&molecules, &ys, &[0, 0], &[1], &table, &solver);
        assert!(matches!(
            grid_scan(&t, &grid, None),
            Err(ScanError::DuplicateId { id: 0 })
        ));
        let t = task(&molecules, &ys, &[9], &[1], &table, &solver);
        assert!(matches!(
            grid_scan(&t, &grid, None),
            Err(ScanError::IdOutOfRange { id: 9, pool: 6 })
        ));
        let t = task(&molecules, &ys[..3], &[0], &[1], &table, &solver);
        assert!(matches!(
            grid_scan(&t, &grid, None),
            Err(ScanError::TargetsLength { .. })
        ));
    }

    fn synthetic_record(index: usize, lambda: f64, mae: f64) -> ScanRecord {
        ScanRecord {
            index,
            nu: 0.3,
            zeta: 1.0,
            lambda,
            s: 250.0,
            q: 0.05,
            mae,
            rmse: mae * 1.5,
            log_marginal_likelihood: -10.0 * mae,
            correlation: Some(0.5),
            failed: false,
            wall_time: 0.0,
        }
    }

    #[test]
    fn conditional_stats_groups_and_means() {
        // mae equals λ, so the group means must reproduce the axis values.
        let records: Vec<ScanRecord> = [0.01, 0.05, 0.01, 0.05]
            .iter()
            .enumerate()
            .map(|(i, &l)| synthetic_record(i, l, l))
            .collect();
        let stats = conditional_stats(&records, ScanAxis::Lambda).unwrap();
        assert_eq!(stats.len(), 2);
        assert_eq!(stats[0].value, 0.01);
        assert_eq!(stats[1].value, 0.05);
        for group in &stats {
            assert_eq!(group.count, 2);
            let mae = group.mae.as_ref().unwrap();
            assert_relative_eq!(mae.mean, group.value, max_relative = 1e-15);
        }
        // Under a constant axis everything lands in one group.
        let by_nu = conditional_stats(&records, ScanAxis::Nu).unwrap();
        assert_eq!(by_nu.len(), 1);
        assert_eq!(by_nu[0].count, 4);

        assert!(matches!(
            conditional_stats(&[], ScanAxis::Nu),
            Err(ScanError::NoRecords)
        ));
        assert!(matches!(
            ScanAxis::from_name("sigma"),
            Err(ScanError::UnknownAxis { .. })
        ));
        assert_eq!(ScanAxis::from_name("lambda").unwrap(), ScanAxis::Lambda);
    }

    #[test]
    fn percentiles_interpolate_linearly() {
        let stats = SummaryStats::from_values(vec![4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_relative_eq!(stats.p10, 1.3, max_relative = 1e-12);
        assert_relative_eq!(stats.median, 2.5, max_relative = 1e-12);
        assert_relative_eq!(stats.p90, 3.7, max_relative = 1e-12);
        assert_relative_eq!(stats.mean, 2.5, max_relative = 1e-12);

        let single = SummaryStats::from_values(vec![5.0]).unwrap();
        assert_eq!(single.median, 5.0);
        assert_eq!(single.p10, 5.0);
    }

    #[test]
    fn failed_and_undefined_records_are_excluded_and_counted() {
        let mut records: Vec<ScanRecord> = (0..3)
            .map(|i| synthetic_record(i, 0.05, 1.0 + i as f64))
            .collect();
        records[1].failed = true;
        records[1].mae = f64::NAN;
        records[1].correlation = None;
        records[2].correlation = None;
        let stats = conditional_stats(&records, ScanAxis::Lambda).unwrap();
        assert_eq!(stats.len(), 1);
        let group = &stats[0];
        assert_eq!(group.count, 3);
        assert_eq!(group.failed, 1);
        let mae = group.mae.as_ref().unwrap();
        assert_eq!(mae.count, 2);
        assert_relative_eq!(mae.mean, 2.0, max_relative = 1e-15);
        let corr = group.correlation.as_ref().unwrap();
        assert_eq!(corr.count, 1);
        assert_eq!(group.correlation_excluded, 1);
    }
}
