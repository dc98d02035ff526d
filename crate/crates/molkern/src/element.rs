//! Chemical elements and the bond-length table used by the spatial
//! adjacency rule.

use thiserror::Error;

/// Elements supported by the molecular graph model.
///
/// The set is deliberately closed: every element must have a tabulated
/// length scale for the adjacency rule, and silently substituting a
/// default would corrupt kernel values downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    H,
    C,
    N,
    O,
    F,
    S,
}

impl Element {
    pub const ALL: [Element; 6] = [
        Element::H,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::S,
    ];

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        match symbol {
            "H" => Some(Element::H),
            "C" => Some(Element::C),
            "N" => Some(Element::N),
            "O" => Some(Element::O),
            "F" => Some(Element::F),
            "S" => Some(Element::S),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::S => "S",
        }
    }

    #[inline]
    pub(crate) fn index(self) -> usize {
        match self {
            Element::H => 0,
            Element::C => 1,
            Element::N => 2,
            Element::O => 3,
            Element::F => 4,
            Element::S => 5,
        }
    }
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("unsupported element {0}")]
    UnsupportedElement(String),
    #[error("bond length for {0}-{1} must be positive, got {2}")]
    NonPositiveLength(Element, Element, f64),
    #[error("malformed bond-length row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
}

/// Symmetric table of per-element-pair length scales (Ångström).
///
/// The compiled-in values are common covalent bond lengths averaged over
/// multiple sources; they set the decay scale of the Gaussian adjacency
/// rule. Individual entries can be overridden from a CSV of
/// `elem_a,elem_b,sigma` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BondLengthTable {
    sigma: [[f64; 6]; 6],
}

// Row/column order: H, C, N, O, F, S.
const STANDARD_SIGMA: [[f64; 6]; 6] = [
    [0.74, 1.09, 1.01, 0.96, 0.92, 1.34],
    [1.09, 1.39, 1.34, 1.27, 1.35, 1.82],
    [1.01, 1.34, 1.26, 1.23, 1.38, 1.68],
    [0.96, 1.27, 1.23, 1.48, 1.42, 1.44],
    [0.92, 1.35, 1.38, 1.42, 1.42, 1.57],
    [1.34, 1.82, 1.68, 1.44, 1.57, 2.05],
];

impl BondLengthTable {
    /// The compiled-in table of averaged covalent bond lengths.
    pub fn standard() -> BondLengthTable {
        BondLengthTable {
            sigma: STANDARD_SIGMA,
        }
    }

    /// Length scale for an element pair. Symmetric in its arguments.
    #[inline]
    pub fn get(&self, a: Element, b: Element) -> f64 {
        self.sigma[a.index()][b.index()]
    }

    /// Replaces one entry (both orientations).
    pub fn set(&mut self, a: Element, b: Element, sigma: f64) -> Result<(), TableError> {
        if !(sigma > 0.0) {
            return Err(TableError::NonPositiveLength(a, b, sigma));
        }
        self.sigma[a.index()][b.index()] = sigma;
        self.sigma[b.index()][a.index()] = sigma;
        Ok(())
    }

    /// Applies `elem_a,elem_b,sigma` override rows to the standard table.
    /// A header line `elem_a,elem_b,sigma` is accepted and skipped.
    pub fn from_csv_overrides(text: &str) -> Result<BondLengthTable, TableError> {
        let mut table = BondLengthTable::standard();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 && line.eq_ignore_ascii_case("elem_a,elem_b,sigma") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(TableError::MalformedRow {
                    line: lineno + 1,
                    reason: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let a = Element::from_symbol(fields[0])
                .ok_or_else(|| TableError::UnsupportedElement(fields[0].to_string()))?;
            let b = Element::from_symbol(fields[1])
                .ok_or_else(|| TableError::UnsupportedElement(fields[1].to_string()))?;
            let sigma: f64 = fields[2].parse().map_err(|_| TableError::MalformedRow {
                line: lineno + 1,
                reason: format!("unparseable length {:?}", fields[2]),
            })?;
            table.set(a, b, sigma)?;
        }
        Ok(table)
    }
}

/// Looks up the tabulated length scale for a pair of elements.
#[inline]
pub fn bond_length(a: Element, b: Element, table: &BondLengthTable) -> f64 {
    table.get(a, b)
}
