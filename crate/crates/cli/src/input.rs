use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rdmcone::hamiltonian::{hubbard_chain, read_fcidump, IntegralSet};
use serde::Serialize;

/// Hubbard chain parameters, written `L=4,t=1,U=4[,periodic]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HubbardSpec {
    #[serde(rename = "L")]
    pub l: usize,
    pub t: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub periodic: bool,
}

impl FromStr for HubbardSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut spec = HubbardSpec { l: 0, t: 1.0, u: 0.0, periodic: false };
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (key, value) = match item.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => (item, "true"),
            };
            let num = |v: &str| v.parse::<f64>().map_err(|_| format!("bad value {v:?} for {key}"));
            match key {
                "L" | "l" => spec.l = value.parse().map_err(|_| format!("bad chain length {value:?}"))?,
                "t" => spec.t = num(value)?,
                "U" | "u" => spec.u = num(value)?,
                "periodic" | "pbc" => {
                    spec.periodic = value.parse().map_err(|_| format!("bad flag {value:?} for periodic"))?
                }
                other => return Err(format!("unknown Hubbard parameter {other:?}")),
            }
        }
        if spec.l == 0 {
            return Err("Hubbard spec needs L".into());
        }
        Ok(spec)
    }
}

impl fmt::Display for HubbardSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "hubbard L={} t={} U={}", self.l, self.t, self.u)?;
        if self.periodic {
            f.write_str(" periodic")?;
        }
        Ok(())
    }
}

/// Where a Hamiltonian comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Hubbard(HubbardSpec),
    Fcidump(PathBuf),
}

impl Source {
    /// `hubbard:<spec>` or a path to an FCIDUMP file.
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.strip_prefix("hubbard:") {
            Some(spec) => Ok(Source::Hubbard(spec.parse()?)),
            None => Ok(Source::Fcidump(PathBuf::from(s))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Source::Hubbard(h) => h.to_string(),
            Source::Fcidump(p) => p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into()),
        }
    }

    pub fn load(&self) -> Result<IntegralSet, String> {
        match self {
            Source::Hubbard(h) => {
                let mut ints = hubbard_chain(h.l, h.t, h.u, h.periodic).map_err(|e| e.to_string())?;
                ints.n_electrons = h.l;
                Ok(ints)
            }
            Source::Fcidump(p) => read_fcidump(p).map_err(|e| describe(p, e)),
        }
    }
}

/// `path: message`, with the line number carried by parse errors.
pub fn describe(path: &Path, e: rdmcone::Error) -> String {
    format!("{}: {e}", path.display())
}

/// Column `e_ref` (or `e_rhf`) of a CSV keyed by `label`.
pub fn read_reference(path: &Path) -> Result<Vec<(String, f64)>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| format!("{}: {e}", path.display()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let label = find("label").ok_or_else(|| format!("{}: no `label` column", path.display()))?;
    let value = find("e_ref")
        .or_else(|| find("e_rhf"))
        .ok_or_else(|| format!("{}: no `e_ref` or `e_rhf` column", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("{}: line {line}: {e}", path.display()))?;
        let v: f64 = rec
            .get(value)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| format!("{}: line {line}: malformed reference energy", path.display()))?;
        out.push((rec.get(label).unwrap_or_default().to_string(), v));
    }
    Ok(out)
}
