//! FCIDUMP reader and writer.
//!
//! Header: `&FCI NORB=…, NELEC=…, MS2=…, … &END` (or a terminating `/`).
//! Body: `value i j k l` with 1-based orbital indices. `i j 0 0` is h_ij,
//! `0 0 0 0` is the core energy, `i 0 0 0` (orbital energies) is ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{pair_index, MolecularIntegrals, SystemSpec};
use crate::{Error, Result};

const DUPLICATE_TOL: f64 = 1e-10;

pub fn parse_fcidump(path: impl AsRef<Path>) -> Result<(MolecularIntegrals, SystemSpec)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fcidump_str(&text)
}

fn header_value(header: &str, key: &str) -> Option<i64> {
    let pos = header.find(&format!("{key}="))?;
    let rest = &header[pos + key.len() + 1..];
    let end = rest
        .find(|c: char| !(c.is_ascii_digit() || c == '-' || c == '+'))
        .unwrap_or(rest.len());
    rest[..end].parse().ok()
}

pub fn parse_fcidump_str(text: &str) -> Result<(MolecularIntegrals, SystemSpec)> {
    let mut header = String::new();
    let mut body_start = None;
    for (i, line) in text.lines().enumerate() {
        let upper = line.to_ascii_uppercase();
        header.push_str(&upper);
        header.push(' ');
        let trimmed = upper.trim();
        if trimmed.ends_with("&END") || trimmed.ends_with("/END") || trimmed == "/" {
            body_start = Some(i + 1);
            break;
        }
    }
    let body_start = body_start.ok_or_else(|| Error::parse(1, "header is not terminated by &END"))?;
    if !header.contains("&FCI") {
        return Err(Error::parse(1, "missing &FCI namelist"));
    }
    let compact: String = header.chars().filter(|c| !c.is_whitespace()).collect();
    let norb = header_value(&compact, "NORB").ok_or_else(|| Error::parse(1, "missing NORB"))?;
    let nelec = header_value(&compact, "NELEC").ok_or_else(|| Error::parse(1, "missing NELEC"))?;
    let ms2 = header_value(&compact, "MS2").unwrap_or(0);
    if norb <= 0 || nelec < 0 || (nelec + ms2) % 2 != 0 || ms2.abs() > nelec {
        return Err(Error::parse(
            1,
            format!("inconsistent header NORB={norb} NELEC={nelec} MS2={ms2}"),
        ));
    }
    let n_alpha = ((nelec + ms2) / 2) as usize;
    let n_beta = ((nelec - ms2) / 2) as usize;
    let n = norb as usize;
    let spec = SystemSpec::new(n, n_alpha, n_beta).map_err(|e| Error::parse(1, e.to_string()))?;

    let mut ints = MolecularIntegrals::zeros(n);
    // canonical slot -> (value, line) for duplicate checks
    let mut seen_eri: HashMap<usize, f64> = HashMap::new();
    let mut seen_h: HashMap<usize, f64> = HashMap::new();
    let mut seen_core: Option<f64> = None;

    for (offset, line) in text.lines().skip(body_start).enumerate() {
        let lineno = body_start + offset + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return Err(Error::parse(lineno, format!("expected 5 fields, found {}", toks.len())));
        }
        let value: f64 = toks[0]
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad value {:?}", toks[0])))?;
        let mut idx = [0usize; 4];
        for (k, t) in toks[1..].iter().enumerate() {
            let v: i64 = t
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad index {t:?}")))?;
            if v < 0 || v > norb {
                return Err(Error::parse(lineno, format!("index {v} out of range 0..={norb}")));
            }
            idx[k] = v as usize;
        }
        let check = |prev: Option<&f64>| -> Result<()> {
            match prev {
                Some(p) if (p - value).abs() > DUPLICATE_TOL => Err(Error::parse(
                    lineno,
                    format!("duplicate entry {value} conflicts with earlier {p}"),
                )),
                _ => Ok(()),
            }
        };
        match idx {
            [0, 0, 0, 0] => {
                check(seen_core.as_ref())?;
                seen_core = Some(value);
                ints.core_energy = value;
            }
            [i, 0, 0, 0] if i > 0 => {}
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let key = pair_index(i - 1, j - 1);
                check(seen_h.get(&key))?;
                seen_h.insert(key, value);
                ints.set_h(i - 1, j - 1, value);
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let key = pair_index(pair_index(i - 1, j - 1), pair_index(k - 1, l - 1));
                check(seen_eri.get(&key))?;
                seen_eri.insert(key, value);
                ints.set_eri(i - 1, j - 1, k - 1, l - 1, value);
            }
            _ => {
                return Err(Error::parse(lineno, format!("unrecognized index pattern {idx:?}")));
            }
        }
    }
    Ok((ints, spec))
}

/// Serializes with 17 significant digits so a re-parse is bit-exact.
pub fn write_fcidump_string(ints: &MolecularIntegrals, spec: &SystemSpec) -> String {
    let n = ints.n_orb();
    let mut out = String::new();
    let ms2 = spec.n_alpha as i64 - spec.n_beta as i64;
    let _ = writeln!(
        out,
        " &FCI NORB={n},NELEC={},MS2={ms2},",
        spec.n_electrons()
    );
    let _ = writeln!(out, "  ORBSYM={}", "1,".repeat(n));
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, " &END");
    for (p, r, q, s, v) in ints.unique_eri() {
        if v != 0.0 {
            let _ = writeln!(out, "{v:>25.17e} {:>4} {:>4} {:>4} {:>4}", p + 1, r + 1, q + 1, s + 1);
        }
    }
    for p in 0..n {
        for r in 0..=p {
            let v = ints.h(p, r);
            if v != 0.0 {
                let _ = writeln!(out, "{v:>25.17e} {:>4} {:>4} {:>4} {:>4}", p + 1, r + 1, 0, 0);
            }
        }
    }
    let _ = writeln!(out, "{:>25.17e} {:>4} {:>4} {:>4} {:>4}", ints.core_energy, 0, 0, 0, 0);
    out
}

pub fn write_fcidump(
    path: impl AsRef<Path>,
    ints: &MolecularIntegrals,
    spec: &SystemSpec,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_fcidump_string(ints, spec)).map_err(|e| Error::io(path, e))
}
