//! Molecular geometries and their conversion into labelled graphs.
//!
//! A molecule is a bag of atoms with 3-D coordinates. The graph built from
//! it is fully connected in principle: every atom pair gets a Gaussian
//! adjacency weight decaying with distance, measured against the tabulated
//! bond length for that element pair. Weights below a cutoff are dropped,
//! so distant pairs contribute nothing and the graph stays sparse.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::element::{BondLengthTable, Element};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("empty xyz input")]
    EmptyFile,
    #[error("line {line}: expected atom count, got {content:?}")]
    BadAtomCount { line: usize, content: String },
    #[error("expected {expected} atoms, found {found}")]
    AtomCountMismatch { expected: usize, found: usize },
    #[error("line {line}: unsupported element {symbol:?}")]
    UnsupportedElement { line: usize, symbol: String },
    #[error("line {line}: atom record needs element and 3 coordinates, got {content:?}")]
    ShortAtomLine { line: usize, content: String },
    #[error("line {line}: unparseable coordinate {content:?}")]
    BadCoordinate { line: usize, content: String },
    #[error("line {line}: unexpected trailing content {content:?}")]
    TrailingContent { line: usize, content: String },
    #[error("molecule has no atoms")]
    EmptyMolecule,
    #[error("zeta must be positive, got {0}")]
    BadZeta(f64),
    #[error("stopping probability must lie in (0, 1), got {0}")]
    BadStopProb(f64),
    #[error("weight cutoff must be in [0, 1), got {0}")]
    BadCutoff(f64),
}

/// Atoms with Cartesian coordinates in Ångström.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub elements: Vec<Element>,
    pub coords: Vec<[f64; 3]>,
}

impl Molecule {
    pub fn new(elements: Vec<Element>, coords: Vec<[f64; 3]>) -> Molecule {
        assert_eq!(elements.len(), coords.len());
        Molecule { elements, coords }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Euclidean distance between atoms `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.coords[i];
        let b = self.coords[j];
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        let dz = a[2] - b[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Renders the molecule back out in xyz format.
    pub fn to_xyz(&self, comment: &str) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.len());
        let _ = writeln!(out, "{comment}");
        for (el, c) in self.elements.iter().zip(&self.coords) {
            let _ = writeln!(out, "{} {:.6} {:.6} {:.6}", el.symbol(), c[0], c[1], c[2]);
        }
        out
    }
}

/// Parses a single-molecule xyz file.
///
/// Layout: atom count, comment line, then one `El x y z` record per atom.
/// Extra columns after the coordinates (e.g. charges) are ignored; extra
/// non-blank lines after the last atom are an error, since multi-frame
/// trajectories are not something the rest of the pipeline can handle.
pub fn parse_xyz(text: &str) -> Result<Molecule, GraphError> {
    let mut lines = text.lines().enumerate();
    let (count_lineno, count_line) = lines.next().ok_or(GraphError::EmptyFile)?;
    let count: usize = count_line
        .trim()
        .parse()
        .map_err(|_| GraphError::BadAtomCount {
            line: count_lineno + 1,
            content: count_line.to_string(),
        })?;
    if count == 0 {
        return Err(GraphError::EmptyMolecule);
    }
    // Comment line; its content is irrelevant but it must be present.
    if lines.next().is_none() {
        return Err(GraphError::AtomCountMismatch {
            expected: count,
            found: 0,
        });
    }

    let mut elements = Vec::with_capacity(count);
    let mut coords = Vec::with_capacity(count);
    for (lineno, raw) in &mut lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if elements.len() == count {
            return Err(GraphError::TrailingContent {
                line: lineno + 1,
                content: line.to_string(),
            });
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(GraphError::ShortAtomLine {
                line: lineno + 1,
                content: line.to_string(),
            });
        }
        let element =
            Element::from_symbol(fields[0]).ok_or_else(|| GraphError::UnsupportedElement {
                line: lineno + 1,
                symbol: fields[0].to_string(),
            })?;
        let mut xyz = [0.0f64; 3];
        for (k, slot) in xyz.iter_mut().enumerate() {
            *slot = fields[k + 1]
                .parse()
                .map_err(|_| GraphError::BadCoordinate {
                    line: lineno + 1,
                    content: fields[k + 1].to_string(),
                })?;
        }
        elements.push(element);
        coords.push(xyz);
    }

    if elements.len() != count {
        return Err(GraphError::AtomCountMismatch {
            expected: count,
            found: elements.len(),
        });
    }
    Ok(Molecule { elements, coords })
}

/// Parses a concatenated xyz file: frames back to back, each with its own
/// count and comment line, optionally separated by blank lines. Error line
/// numbers refer to the whole input.
pub fn parse_xyz_frames(text: &str) -> Result<Vec<Molecule>, GraphError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut molecules = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let count: usize = lines[i]
            .trim()
            .parse()
            .map_err(|_| GraphError::BadAtomCount {
                line: i + 1,
                content: lines[i].to_string(),
            })?;
        let end = (i + 2 + count).min(lines.len());
        let chunk = lines[i..end].join("\n");
        molecules.push(parse_xyz(&chunk).map_err(|e| offset_lines(e, i))?);
        i = end;
    }
    if molecules.is_empty() {
        return Err(GraphError::EmptyFile);
    }
    Ok(molecules)
}

/// Shifts the line number inside a parse error by `by` lines so frame-local
/// errors point at the right line of the concatenated file.
fn offset_lines(err: GraphError, by: usize) -> GraphError {
    match err {
        GraphError::BadAtomCount { line, content } => GraphError::BadAtomCount {
            line: line + by,
            content,
        },
        GraphError::ShortAtomLine { line, content } => GraphError::ShortAtomLine {
            line: line + by,
            content,
        },
        GraphError::UnsupportedElement { line, symbol } => GraphError::UnsupportedElement {
            line: line + by,
            symbol,
        },
        GraphError::BadCoordinate { line, content } => GraphError::BadCoordinate {
            line: line + by,
            content,
        },
        GraphError::TrailingContent { line, content } => GraphError::TrailingContent {
            line: line + by,
            content,
        },
        other => other,
    }
}

/// Gaussian adjacency weight for an atom pair at distance `d` whose
/// tabulated length scale is `sigma`, with global scale factor `zeta`.
#[inline]
pub fn adjacency_weight(d: f64, sigma: f64, zeta: f64) -> f64 {
    let s = zeta * sigma;
    (-d * d / (2.0 * s * s)).exp()
}

/// Knobs controlling graph construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParams {
    /// Multiplier on the tabulated bond lengths in the adjacency rule.
    pub zeta: f64,
    /// Per-vertex probability that the random walk stops.
    pub stop_prob: f64,
    /// Adjacency weights strictly below this are zeroed out.
    pub weight_cutoff: f64,
}

impl Default for GraphParams {
    fn default() -> GraphParams {
        GraphParams {
            zeta: 1.0,
            stop_prob: 0.05,
            weight_cutoff: 1e-6,
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.zeta > 0.0) {
            return Err(GraphError::BadZeta(self.zeta));
        }
        if !(self.stop_prob > 0.0 && self.stop_prob < 1.0) {
            return Err(GraphError::BadStopProb(self.stop_prob));
        }
        if !(self.weight_cutoff >= 0.0 && self.weight_cutoff < 1.0) {
            return Err(GraphError::BadCutoff(self.weight_cutoff));
        }
        Ok(())
    }
}

/// A molecule converted into the labelled graph the kernel works on.
///
/// `adjacency` is symmetric with a zero diagonal; `distances` carries the
/// interatomic distances used as edge labels wherever the adjacency is
/// nonzero. `degree` holds the augmented degree of each vertex (row sum
/// inflated by the survival probability), and `stop` the per-vertex
/// stopping probability actually in effect — isolated atoms get a stop
/// probability of one so the walk terminates there instead of dividing by
/// a zero degree.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    pub elements: Vec<Element>,
    pub adjacency: DMatrix<f64>,
    pub distances: DMatrix<f64>,
    pub degree: Vec<f64>,
    pub stop: Vec<f64>,
    /// Parameters the graph was built with; kernel evaluation checks these
    /// against its own hyperparameters to catch mismatched pipelines.
    pub params: GraphParams,
}

impl MolecularGraph {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Builds the labelled graph for a molecule.
pub fn build_graph(
    mol: &Molecule,
    table: &BondLengthTable,
    params: &GraphParams,
) -> Result<MolecularGraph, GraphError> {
    params.validate()?;
    let n = mol.len();
    if n == 0 {
        return Err(GraphError::EmptyMolecule);
    }

    let mut adjacency = DMatrix::zeros(n, n);
    let mut distances = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = mol.distance(i, j);
            let sigma = table.get(mol.elements[i], mol.elements[j]);
            let mut w = adjacency_weight(d, sigma, params.zeta);
            if w < params.weight_cutoff {
                w = 0.0;
            }
            // Mirror the same float so the matrix is symmetric bit for bit.
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
            distances[(i, j)] = d;
            distances[(j, i)] = d;
        }
    }

    let survival = 1.0 - params.stop_prob;
    let mut degree = Vec::with_capacity(n);
    let mut stop = Vec::with_capacity(n);
    for i in 0..n {
        let row_sum: f64 = (0..n).map(|j| adjacency[(i, j)]).sum();
        if row_sum == 0.0 {
            // Atom too far from everything to keep an edge. Give it unit
            // degree and force the walk to stop so the linear system stays
            // well posed.
            log::warn!("atom {i} has no neighbours above the weight cutoff; treating as terminal");
            degree.push(1.0);
            stop.push(1.0);
        } else {
            degree.push(row_sum / survival);
            stop.push(params.stop_prob);
        }
    }

    Ok(MolecularGraph {
        elements: mol.elements.clone(),
        adjacency,
        distances,
        degree,
        stop,
        params: *params,
    })
}
