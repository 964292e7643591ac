//! Text repertoire files.
//!
//! ```text
//! hbr v1
//! kind grid
//! primary_dims 2
//! secondary 0
//! discretisation 100,100
//! bounds -1.8:1.8,-1.8:1.8
//! fingerprint 3f2a...
//! elites 2
//! <fitness> | <genotype...> | <bd_primary...> | <pattern or -> | <recorded yaw>
//! ```
//!
//! Reals are written with 17 significant digits, so a save/load round trip
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::archive::{DistArchive, Elite, GridArchive, Pattern, Repertoire};
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "hbr v1";

/// Shortest fixed-width form that re-parses to the identical `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// An archive as stored on disk.
#[derive(Debug, Clone)]
pub enum StoredArchive {
    Grid(GridArchive),
    Dist(DistArchive),
}

impl StoredArchive {
    pub fn elites(&self) -> &[Elite] {
        match self {
            StoredArchive::Grid(a) => a.elites(),
            StoredArchive::Dist(a) => a.elites(),
        }
    }

    pub fn into_grid(self, path: &Path) -> Result<GridArchive> {
        match self {
            StoredArchive::Grid(a) => Ok(a),
            StoredArchive::Dist(_) => Err(file_err(path, 2, "expected a grid archive")),
        }
    }

    pub fn into_dist(self, path: &Path) -> Result<DistArchive> {
        match self {
            StoredArchive::Dist(a) => Ok(a),
            StoredArchive::Grid(_) => Err(file_err(path, 2, "expected a distance archive")),
        }
    }
}

fn file_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Repertoire {
        path: PathBuf::from(path),
        line,
        msg: msg.into(),
    }
}

fn reals(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(" ")
}

pub fn encode(archive: &StoredArchive, fingerprint: &str) -> String {
    let mut s = String::new();
    let (kind, dims, secondary, disc, bounds) = match archive {
        StoredArchive::Grid(a) => (
            "grid",
            a.primary_dims(),
            a.has_secondary(),
            a.dims()
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
            a.bounds()
                .iter()
                .map(|(lo, hi)| format!("{}:{}", fmt_real(*lo), fmt_real(*hi)))
                .collect::<Vec<_>>()
                .join(","),
        ),
        StoredArchive::Dist(a) => (
            "dist",
            a.primary_dims(),
            a.has_secondary(),
            format!("l={}", fmt_real(a.threshold())),
            "-".to_string(),
        ),
    };
    let elites = archive.elites();
    let _ = writeln!(s, "{FORMAT_TAG}");
    let _ = writeln!(s, "kind {kind}");
    let _ = writeln!(s, "primary_dims {dims}");
    let _ = writeln!(s, "secondary {}", secondary as u8);
    let _ = writeln!(s, "discretisation {disc}");
    let _ = writeln!(s, "bounds {bounds}");
    let _ = writeln!(s, "fingerprint {fingerprint}");
    let _ = writeln!(s, "elites {}", elites.len());
    for e in elites {
        let pat = e
            .bd_secondary
            .map(|p| p.to_string())
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{} | {} | {} | {} | {}",
            fmt_real(e.fitness),
            reals(&e.genotype),
            reals(&e.bd_primary),
            pat,
            fmt_real(e.recorded_yaw)
        );
    }
    s
}

/// Parses a repertoire file; `fingerprint` must match the stored one.
pub fn decode(text: &str, fingerprint: &str, path: &Path) -> Result<StoredArchive> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |key: &str| -> Result<(usize, String)> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| file_err(path, 0, format!("missing `{key}` line")))?;
        if key.is_empty() {
            return Ok((n, l.to_string()));
        }
        let v = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| file_err(path, n, format!("expected `{key} ...`")))?;
        Ok((n, v.to_string()))
    };
    let (n, tag) = next("")?;
    if tag != FORMAT_TAG {
        return Err(file_err(
            path,
            n,
            format!("unsupported format `{tag}`, expected `{FORMAT_TAG}`"),
        ));
    }
    let (kn, kind) = next("kind")?;
    let (n, dims) = next("primary_dims")?;
    let dims: usize = dims
        .parse()
        .map_err(|_| file_err(path, n, "bad primary_dims"))?;
    let (n, sec) = next("secondary")?;
    let secondary = match sec.as_str() {
        "0" => false,
        "1" => true,
        _ => return Err(file_err(path, n, "secondary must be 0 or 1")),
    };
    let (dn, disc) = next("discretisation")?;
    let (bn, bounds) = next("bounds")?;
    let (n, fp) = next("fingerprint")?;
    if fp != fingerprint {
        return Err(file_err(
            path,
            n,
            format!("model fingerprint {fp} does not match the current model ({fingerprint})"),
        ));
    }
    let (n, count) = next("elites")?;
    let count: usize = count
        .parse()
        .map_err(|_| file_err(path, n, "bad elite count"))?;

    let real = |s: &str, n: usize, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| file_err(path, n, format!("bad {what} `{s}`")))
    };
    let mut archive = match kind.as_str() {
        "grid" => {
            let d = disc
                .split(',')
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| file_err(path, dn, "bad discretisation"))
                })
                .collect::<Result<Vec<_>>>()?;
            let b = bounds
                .split(',')
                .map(|t| {
                    let (lo, hi) = t
                        .split_once(':')
                        .ok_or_else(|| file_err(path, bn, "bad bounds"))?;
                    Ok((real(lo, bn, "bound")?, real(hi, bn, "bound")?))
                })
                .collect::<Result<Vec<_>>>()?;
            let g =
                GridArchive::new(d, b, secondary).map_err(|e| file_err(path, dn, e.to_string()))?;
            if g.primary_dims() != dims {
                return Err(file_err(
                    path,
                    dn,
                    "discretisation does not match primary_dims",
                ));
            }
            StoredArchive::Grid(g)
        }
        "dist" => {
            let l = disc
                .strip_prefix("l=")
                .ok_or_else(|| file_err(path, dn, "expected `l=<threshold>`"))?;
            let l = real(l, dn, "threshold")?;
            StoredArchive::Dist(
                DistArchive::new(l, dims, secondary)
                    .map_err(|e| file_err(path, dn, e.to_string()))?,
            )
        }
        _ => return Err(file_err(path, kn, format!("unknown kind `{kind}`"))),
    };

    let mut seen = 0;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('|').map(str::trim).collect();
        if f.len() != 5 {
            return Err(file_err(
                path,
                n,
                format!("expected 5 fields, found {}", f.len()),
            ));
        }
        let list = |s: &str, what: &str| -> Result<Vec<f64>> {
            s.split_whitespace().map(|t| real(t, n, what)).collect()
        };
        let e = Elite {
            fitness: real(f[0], n, "fitness")?,
            genotype: list(f[1], "gene")?,
            bd_primary: list(f[2], "descriptor")?,
            bd_secondary: match f[3] {
                "-" => None,
                p => Some(
                    p.parse::<Pattern>()
                        .map_err(|e| file_err(path, n, e.to_string()))?,
                ),
            },
            recorded_yaw: real(f[4], n, "yaw")?,
        };
        if e.bd_primary.len() != dims {
            return Err(file_err(
                path,
                n,
                format!(
                    "descriptor has {} values, expected {dims}",
                    e.bd_primary.len()
                ),
            ));
        }
        if e.bd_secondary.is_some() != secondary {
            return Err(file_err(
                path,
                n,
                "secondary descriptor presence does not match header",
            ));
        }
        let kept = match &mut archive {
            StoredArchive::Grid(a) => a.insert(e),
            StoredArchive::Dist(a) => a.insert(e),
        }
        .map_err(|e| file_err(path, n, e.to_string()))?;
        if !kept {
            return Err(file_err(
                path,
                n,
                "elite violates the archive's container invariant",
            ));
        }
        seen += 1;
    }
    if seen != count {
        return Err(file_err(
            path,
            0,
            format!("header announces {count} elites, found {seen}"),
        ));
    }
    Ok(archive)
}

pub fn save_repertoire(path: &Path, archive: &StoredArchive, fingerprint: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, encode(archive, fingerprint))?;
    Ok(())
}

pub fn load_repertoire(path: &Path, fingerprint: &str) -> Result<StoredArchive> {
    let text = std::fs::read_to_string(path).map_err(|e| file_err(path, 0, e.to_string()))?;
    decode(&text, fingerprint, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn elite(x: f64, y: f64, p: Option<u8>) -> Elite {
        Elite {
            genotype: vec![x * 0.1, 0.1, 1.0 / 3.0],
            fitness: -x.abs() - 1e-300,
            bd_primary: vec![x, y],
            bd_secondary: p.map(Pattern::from_bits),
            recorded_yaw: -std::f64::consts::PI / 7.0,
        }
    }

    fn grid5() -> GridArchive {
        let mut g = GridArchive::new(vec![10, 10], vec![(-1.0, 1.0); 2], false).unwrap();
        for i in 0..5 {
            assert!(g.insert(elite(-0.9 + 0.4 * i as f64, 0.3, None)).unwrap());
        }
        g
    }

    fn same(a: &[Elite], b: &[Elite]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.fitness.to_bits(), y.fitness.to_bits());
            assert_eq!(x, y);
        }
    }

    #[test]
    fn grid_round_trip() {
        let g = StoredArchive::Grid(grid5());
        let text = encode(&g, "abc");
        let back = decode(&text, "abc", Path::new("t")).unwrap();
        same(g.elites(), back.elites());
        assert_eq!(encode(&back, "abc"), text);
    }

    #[test]
    fn dist_round_trip_with_patterns() {
        let mut d = DistArchive::new(0.05, 2, true).unwrap();
        for i in 0..20 {
            d.insert(elite(0.01 * i as f64, 0.5, Some(i as u8 % 64)))
                .unwrap();
        }
        let d = StoredArchive::Dist(d);
        let back = decode(&encode(&d, "fp"), "fp", Path::new("t")).unwrap();
        same(d.elites(), back.elites());
    }

    #[test]
    fn seventeen_digits_reparse_exactly() {
        assert_eq!(
            fmt_real(0.1).parse::<f64>().unwrap().to_bits(),
            0.1f64.to_bits()
        );
    }

    #[test]
    fn corrupted_fitness_names_its_line() {
        let text = encode(&StoredArchive::Grid(grid5()), "abc");
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[10] = lines[10].replacen('-', "x", 1);
        let e = decode(&lines.join("\n"), "abc", Path::new("r.txt"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 11") && e.contains("fitness"), "{e}");
    }

    #[test]
    fn rejects_version_and_fingerprint_mismatch() {
        let text = encode(&StoredArchive::Grid(grid5()), "abc");
        let e = decode(&text, "xyz", Path::new("r"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 7") && e.contains("fingerprint"), "{e}");
        let e = decode(&text.replacen("v1", "v0", 1), "abc", Path::new("r"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn rejects_container_violations() {
        let mut text = encode(&StoredArchive::Grid(grid5()), "abc");
        let last = text.lines().last().unwrap().to_string();
        text.push_str(&last);
        text.push('\n');
        assert!(decode(&text, "abc", Path::new("r")).is_err());
    }

    proptest! {
        #[test]
        fn reals_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_real(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
