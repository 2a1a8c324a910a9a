//! Coordinate text format for real matrices and manifest bundles.
//!
//! ```text
//! # comment
//! nrows ncols nnz
//! i j value      (1-based, repeated (i, j) pairs are summed)
//! ```
//!
//! A manifest is a list of `KEY=path` lines, paths relative to the
//! manifest. `E`, `A`, `B`, `C` describe a descriptor system; `Msigma`,
//! `Knu`, `B1`, `B2` a solid conductor; `Msigma`, `Knu`, `B3` a stranded one.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{DescriptorSystem, PortMap, SolidConductorModel, StrandedConductorModel};
use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

pub fn parse_matrix(text: &str, origin: &str) -> Result<RMat> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut m = RMat::zeros(0, 0);
    let mut seen = 0usize;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(origin, lineno, format!("expected 3 fields, found {}", toks.len())));
        }
        match header {
            None => {
                let mut dims = [0usize; 3];
                for (d, t) in dims.iter_mut().zip(&toks) {
                    *d = t
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, format!("bad header field '{t}'")))?;
                }
                m = RMat::zeros(dims[0], dims[1]);
                header = Some((dims[0], dims[1], dims[2]));
            }
            Some((nr, nc, nnz)) => {
                if seen == nnz {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("more entries than the {nnz} declared in the header"),
                    ));
                }
                let idx_of = |t: &str, bound: usize, what: &str| -> Result<usize> {
                    let v: i64 = t
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, format!("bad {what} index '{t}'")))?;
                    if v < 1 || v as usize > bound {
                        return Err(Error::parse(
                            origin,
                            lineno,
                            format!("{what} index {v} outside 1..={bound}"),
                        ));
                    }
                    Ok(v as usize - 1)
                };
                let i = idx_of(toks[0], nr, "row")?;
                let j = idx_of(toks[1], nc, "column")?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| Error::parse(origin, lineno, format!("bad value '{}'", toks[2])))?;
                m[(i, j)] += v;
                seen += 1;
            }
        }
    }
    match header {
        None => Err(Error::parse(origin, last_line, "missing header line")),
        Some((_, _, nnz)) if seen != nnz => Err(Error::parse(
            origin,
            last_line,
            format!("header declares {nnz} entries, found {seen}"),
        )),
        Some(_) => Ok(m),
    }
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<RMat> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text, &path.display().to_string())
}

/// Serializes the nonzero entries with 17 significant digits.
pub fn format_matrix(m: &RMat) -> String {
    let mut entries = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, m[(i, j)]));
            }
        }
    }
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let mut out = format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{i} {j} {v:.16e}");
    }
    out
}

pub fn write_matrix(path: impl AsRef<Path>, m: &RMat) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}

/// A device read from a manifest bundle.
#[derive(Debug, Clone)]
pub enum DeviceBundle {
    Descriptor(DescriptorSystem),
    Solid(SolidConductorModel),
    Stranded(StrandedConductorModel),
}

impl DeviceBundle {
    pub fn n_ports(&self) -> usize {
        match self {
            DeviceBundle::Descriptor(d) => d.n_inputs(),
            DeviceBundle::Solid(_) => 1,
            DeviceBundle::Stranded(_) => 2,
        }
    }

    /// Port-level descriptor form: inputs are port voltages, outputs port
    /// currents.
    pub fn to_port_descriptor(&self) -> Result<DescriptorSystem> {
        match self {
            DeviceBundle::Descriptor(d) => {
                if d.n_inputs() != d.n_outputs() {
                    return Err(Error::Dimension(format!(
                        "device descriptor has {} inputs but {} outputs",
                        d.n_inputs(),
                        d.n_outputs()
                    )));
                }
                Ok(d.clone())
            }
            DeviceBundle::Solid(m) => m.to_descriptor(&PortMap::identity(1)?),
            DeviceBundle::Stranded(m) => m.to_descriptor(&PortMap::identity(2)?),
        }
    }
}

fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest")
    } else {
        path.to_path_buf()
    }
}

fn read_manifest(path: &Path) -> Result<BTreeMap<String, RMat>> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let (key, rel) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&origin, idx + 1, "expected KEY=path"))?;
        let key = key.trim().to_string();
        if out.contains_key(&key) {
            return Err(Error::parse(&origin, idx + 1, format!("duplicate key {key}")));
        }
        let m = load_matrix(base.join(rel.trim()))?;
        out.insert(key, m);
    }
    Ok(out)
}

fn as_vector(name: &str, m: &RMat) -> Result<RVec> {
    if m.ncols() != 1 {
        return Err(Error::Dimension(format!("{name} must have exactly one column")));
    }
    Ok(m.column(0).into_owned())
}

/// Loads a manifest (or a directory holding `manifest`) into a device.
pub fn load_device(path: impl AsRef<Path>) -> Result<DeviceBundle> {
    let path = manifest_path(path.as_ref());
    let mut mats = read_manifest(&path)?;
    let mut take = |k: &str| mats.remove(k);
    if let (Some(e), Some(a), Some(b), Some(c)) = (take("E"), take("A"), take("B"), take("C")) {
        return Ok(DeviceBundle::Descriptor(DescriptorSystem::new(e, a, b, c)?));
    }
    let (ms, kn) = match (take("Msigma"), take("Knu")) {
        (Some(ms), Some(kn)) => (ms, kn),
        _ => {
            return Err(Error::Config(format!(
                "{}: manifest needs E/A/B/C or Msigma/Knu with B1/B2 or B3",
                path.display()
            )))
        }
    };
    if let Some(b3) = take("B3") {
        return Ok(DeviceBundle::Stranded(StrandedConductorModel::new(ms, kn, b3)?));
    }
    match (take("B1"), take("B2")) {
        (Some(b1), Some(b2)) => {
            if b2.shape() != (1, 1) {
                return Err(Error::Dimension("B2 must be 1x1".into()));
            }
            let b1 = as_vector("B1", &b1)?;
            Ok(DeviceBundle::Solid(SolidConductorModel::new(ms, kn, b1, b2[(0, 0)])?))
        }
        _ => Err(Error::Config(format!("{}: solid conductor needs B1 and B2", path.display()))),
    }
}

/// Loads a descriptor bundle with keys `E`, `A`, `B`, `C`.
pub fn load_descriptor(path: impl AsRef<Path>) -> Result<DescriptorSystem> {
    match load_device(path)? {
        DeviceBundle::Descriptor(d) => Ok(d),
        _ => Err(Error::Config("manifest does not describe a descriptor system (E/A/B/C)".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_identity() {
        let m = parse_matrix("2 2 2\n1 1 1.0\n2 2 1.0\n", "t").unwrap();
        assert_eq!(m, RMat::identity(2, 2));
    }

    #[test]
    fn duplicates_are_summed_and_comments_skipped() {
        let m = parse_matrix("# header next\n1 2 2 # trailing\n1 2 0.5\n1 2 0.25\n", "t").unwrap();
        assert_eq!(m[(0, 1)], 0.75);
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn negative_index_reports_line() {
        let err = parse_matrix("2 2 1\n-1 1 1.0\n", "t").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn entry_count_mismatch() {
        assert!(parse_matrix("2 2 3\n1 1 1\n", "t").is_err());
        assert!(parse_matrix("2 2 1\n1 1 1\n2 2 1\n", "t").is_err());
        assert!(parse_matrix("2 2 1\n3 1 1\n", "t").is_err());
        assert!(parse_matrix("", "t").is_err());
    }

    #[test]
    fn format_round_trip() {
        let m = RMat::from_row_slice(2, 3, &[0.1, 0.0, -3.5, 0.0, 1e-300, 7.0]);
        let back = parse_matrix(&format_matrix(&m), "t").unwrap();
        assert_eq!(m, back);
    }
}
