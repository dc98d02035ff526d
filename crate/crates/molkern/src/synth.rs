//! Seeded generator of small organic-like molecules with pairwise
//! interaction energies.
//!
//! This provides a self-contained stand-in for a quantum-chemistry
//! dataset: molecules with up to 7 heavy atoms (and hydrogens filling the
//! open valences, ≤ 23 atoms total), grown as random trees with tabulated
//! bond lengths jittered by a few percent. The target energy is a sum of
//! per-element constants and short-range pair wells plus Gaussian noise —
//! an extensive, geometry-sensitive quantity in the right range for
//! atomization energies in kcal/mol, and learnable by construction since
//! it decomposes over local environments.
//!
//! Generation is deterministic: molecule `i` of a given seed is always
//! identical, independent of how many molecules are requested.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::element::{BondLengthTable, Element};
use crate::graph::Molecule;

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub count: usize,
    pub seed: u64,
    /// Standard deviation of the additive target noise, kcal/mol.
    pub noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            count: 100,
            seed: 20230701,
            noise: 0.3,
        }
    }
}

fn valence(e: Element) -> usize {
    match e {
        Element::H => 1,
        Element::C => 4,
        Element::N => 3,
        Element::O => 2,
        Element::F => 1,
        Element::S => 2,
    }
}

/// Per-element baseline contribution, kcal/mol.
fn base_energy(e: Element) -> f64 {
    match e {
        Element::H => -60.0,
        Element::C => -170.0,
        Element::N => -180.0,
        Element::O => -190.0,
        Element::F => -140.0,
        Element::S => -160.0,
    }
}

/// Element factor in the pair-well depth.
fn well_factor(e: Element) -> f64 {
    match e {
        Element::H => 1.0,
        Element::C => 1.4,
        Element::N => 1.5,
        Element::O => 1.6,
        Element::F => 1.3,
        Element::S => 1.7,
    }
}

const WELL_SCALE: f64 = 25.0;
const WELL_WIDTH: f64 = 0.3;
const WELL_RANGE: f64 = 4.0;

/// Noiseless interaction energy of a geometry: element baselines plus a
/// Gaussian well per close pair, centred on the tabulated bond length.
pub fn interaction_energy(mol: &Molecule, table: &BondLengthTable) -> f64 {
    let mut total: f64 = mol.elements.iter().map(|&e| base_energy(e)).sum();
    for i in 0..mol.len() {
        for j in (i + 1)..mol.len() {
            let d = mol.distance(i, j);
            if d < WELL_RANGE {
                let r0 = table.get(mol.elements[i], mol.elements[j]);
                let depth =
                    WELL_SCALE * well_factor(mol.elements[i]) * well_factor(mol.elements[j]);
                let arg = (d - r0) / WELL_WIDTH;
                total -= depth * (-0.5 * arg * arg).exp();
            }
        }
    }
    total
}

fn weighted_pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[(T, f64)]) -> T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut draw = rng.random::<f64>() * total;
    for &(item, w) in items {
        draw -= w;
        if draw <= 0.0 {
            return item;
        }
    }
    items[items.len() - 1].0
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-6 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}

const HEAVY_WEIGHTS: [(Element, f64); 5] = [
    (Element::C, 0.62),
    (Element::N, 0.12),
    (Element::O, 0.15),
    (Element::S, 0.05),
    (Element::F, 0.06),
];

const HEAVY_COUNT_WEIGHTS: [(usize, f64); 7] = [
    (1, 0.02),
    (2, 0.05),
    (3, 0.08),
    (4, 0.15),
    (5, 0.20),
    (6, 0.25),
    (7, 0.25),
];

// Bond angles at a vertex must stay at least this far apart, pushing the
// growth toward realistic near-tetrahedral local geometry.
const MIN_ANGLE_COS: f64 = -0.087; // cos 95°

struct Growth {
    elements: Vec<Element>,
    coords: Vec<[f64; 3]>,
    open: Vec<usize>,
    bonds: Vec<Vec<usize>>,
}

impl Growth {
    fn place(
        &mut self,
        rng: &mut ChaCha8Rng,
        parent: usize,
        element: Element,
        table: &BondLengthTable,
        clearance: impl Fn(Element) -> f64,
    ) -> bool {
        let jitter = 1.0 + 0.02 * (2.0 * rng.random::<f64>() - 1.0);
        let bond = table.get(self.elements[parent], element) * jitter;
        let p = self.coords[parent];
        let existing: Vec<[f64; 3]> = self.bonds[parent]
            .iter()
            .map(|&j| {
                let c = self.coords[j];
                let v = [c[0] - p[0], c[1] - p[1], c[2] - p[2]];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                [v[0] / n, v[1] / n, v[2] / n]
            })
            .collect();
        'dirs: for _ in 0..300 {
            let dir = random_direction(rng);
            for e in &existing {
                if dir[0] * e[0] + dir[1] * e[1] + dir[2] * e[2] > MIN_ANGLE_COS {
                    continue 'dirs;
                }
            }
            let pos = [
                p[0] + bond * dir[0],
                p[1] + bond * dir[1],
                p[2] + bond * dir[2],
            ];
            for (j, other) in self.coords.iter().enumerate() {
                if j == parent {
                    continue;
                }
                let dx = pos[0] - other[0];
                let dy = pos[1] - other[1];
                let dz = pos[2] - other[2];
                let dist = (dx * dx + dy * dy + dz * dz).sqrt();
                if dist < clearance(self.elements[j]) {
                    continue 'dirs;
                }
            }
            let new_idx = self.elements.len();
            self.elements.push(element);
            self.coords.push(pos);
            self.open[parent] -= 1;
            self.open.push(valence(element) - 1);
            self.bonds[parent].push(new_idx);
            self.bonds.push(vec![parent]);
            return true;
        }
        false
    }
}

fn generate_molecule(rng: &mut ChaCha8Rng) -> Molecule {
    let table = BondLengthTable::standard();
    loop {
        let n_heavy = weighted_pick(rng, &HEAVY_COUNT_WEIGHTS);
        let first = weighted_pick(rng, &HEAVY_WEIGHTS);
        let mut g = Growth {
            elements: vec![first],
            coords: vec![[0.0; 3]],
            open: vec![valence(first)],
            bonds: vec![Vec::new()],
        };
        for _ in 1..n_heavy {
            let parents: Vec<usize> = (0..g.elements.len()).filter(|&i| g.open[i] > 0).collect();
            let Some(&parent) = parents
                .first()
                .map(|_| &parents[rng.random_range(0..parents.len())])
            else {
                break;
            };
            let element = weighted_pick(rng, &HEAVY_WEIGHTS);
            // Heavy atoms keep second-neighbour spacing; a failed
            // placement just means the molecule stays smaller.
            g.place(rng, parent, element, &table, |_| 1.95);
        }
        // Fill open valences with hydrogens.
        let heavy_count = g.elements.len();
        for parent in 0..heavy_count {
            for _ in 0..g.open[parent] {
                g.place(rng, parent, Element::H, &table, |other| {
                    if other == Element::H {
                        1.2
                    } else {
                        1.5
                    }
                });
            }
        }
        if g.elements.len() >= 2 {
            debug_assert!(g.elements.len() <= 23);
            return Molecule::new(g.elements, g.coords);
        }
    }
}

/// Generates `params.count` molecules with noisy targets.
pub fn generate(params: &SynthParams) -> (Vec<Molecule>, Vec<f64>) {
    let table = BondLengthTable::standard();
    let noise = Normal::new(0.0, params.noise).expect("nonnegative noise std");
    let mut molecules = Vec::with_capacity(params.count);
    let mut targets = Vec::with_capacity(params.count);
    for index in 0..params.count {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(index as u64);
        let mol = generate_molecule(&mut rng);
        let energy = interaction_energy(&mol, &table) + noise.sample(&mut rng);
        molecules.push(mol);
        targets.push(energy);
    }
    (molecules, targets)
}

/// Writes molecules as one concatenated xyz file (ids are the decimal
/// frame indices).
pub fn write_xyz(molecules: &[Molecule], path: &Path) -> std::io::Result<()> {
    let mut file = fs::File::create(path)?;
    for (i, mol) in molecules.iter().enumerate() {
        file.write_all(mol.to_xyz(&format!("mol-{i}")).as_bytes())?;
    }
    file.flush()
}

/// Writes targets as `id,energy` CSV, ids matching [`write_xyz`] order.
pub fn write_targets(targets: &[f64], path: &Path) -> std::io::Result<()> {
    let mut out = String::from("id,energy\n");
    for (i, t) in targets.iter().enumerate() {
        out.push_str(&format!("{i},{t}\n"));
    }
    fs::write(path, out)
}
