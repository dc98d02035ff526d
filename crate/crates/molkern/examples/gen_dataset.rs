//! Generate a synthetic molecule dataset on disk.
//!
//! Usage: gen_dataset <count> <seed> <out_dir> [noise]
//!
//! Writes `molecules.xyz` (concatenated frames) and `targets.csv` into
//! `out_dir`, suitable as inputs for the command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use molkern::synth::{generate, write_targets, write_xyz, SynthParams};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 || args.len() > 4 {
        eprintln!("usage: gen_dataset <count> <seed> <out_dir> [noise]");
        return ExitCode::FAILURE;
    }
    let count: usize = match args[0].parse() {
        Ok(n) => n,
        Err(_) => {
            eprintln!("bad count: {}", args[0]);
            return ExitCode::FAILURE;
        }
    };
    let seed: u64 = match args[1].parse() {
        Ok(s) => s,
        Err(_) => {
            eprintln!("bad seed: {}", args[1]);
            return ExitCode::FAILURE;
        }
    };
    let out_dir = PathBuf::from(&args[2]);
    let noise: f64 = match args.get(3).map(|s| s.parse()) {
        None => SynthParams::default().noise,
        Some(Ok(n)) => n,
        Some(Err(_)) => {
            eprintln!("bad noise: {}", args[3]);
            return ExitCode::FAILURE;
        }
    };

    let params = SynthParams { count, seed, noise };
    let (molecules, targets) = generate(&params);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("cannot create {}: {e}", out_dir.display());
        return ExitCode::FAILURE;
    }
    let xyz = out_dir.join("molecules.xyz");
    let csv = out_dir.join("targets.csv");
    if let Err(e) = write_xyz(&molecules, &xyz) {
        eprintln!("cannot write {}: {e}", xyz.display());
        return ExitCode::FAILURE;
    }
    if let Err(e) = write_targets(&targets, &csv) {
        eprintln!("cannot write {}: {e}", csv.display());
        return ExitCode::FAILURE;
    }
    let atoms: usize = molecules.iter().map(|m| m.len()).sum();
    println!(
        "wrote {count} molecules ({atoms} atoms) to {}",
        out_dir.display()
    );
    ExitCode::SUCCESS
}
