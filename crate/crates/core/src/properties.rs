//! Observables computed from reduced density matrices: natural orbitals,
//! occupation entropy, Mulliken charges, dipole moments, metallic character
//! and generic one- and two-body expectation values.
//!
//! AO-level data is read from the `ORBDATA 1` text format:
//!
//! ```text
//! ORBDATA 1
//! nao <nao> nmo <nmo> natom <natom>
//! atoms
//! <symbol> <Z> <x> <y> <z>          # one line per atom, bohr
//! ao_atom
//! <atom index of AO 0> <atom index of AO 1> ...
//! mo_coefficients                    # nao rows of nmo values
//! overlap                            # nao rows of nao values
//! dipole_x / dipole_y / dipole_z     # optional, nao rows of nao values each
//! ```
//!
//! Blank lines and text after `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nrep::{OneRdm, TwoRdm};
use crate::pairspace::{PackedMatrix, Spectrum};

/// Atomic units of dipole moment to debye.
pub const AU_TO_DEBYE: f64 = 2.541746;

/// Tolerance on `C^T S C = I`.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub symbol: String,
    pub charge: f64,
    /// Position in bohr.
    pub position: [f64; 3],
}

/// Molecular orbitals expressed in an atomic-orbital basis, plus the atom
/// data needed for population analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalData {
    /// `nao x nmo`; column `p` is spatial MO `p`.
    pub mo_coefficients: DMatrix<f64>,
    pub ao_overlap: DMatrix<f64>,
    pub ao_to_atom: Vec<usize>,
    pub atoms: Vec<Atom>,
    /// AO matrices of `x`, `y`, `z` about the coordinate origin.
    pub dipole_integrals: Option<[DMatrix<f64>; 3]>,
}

impl OrbitalData {
    /// Validates shapes, the atom map and MO orthonormality.
    pub fn new(
        mo_coefficients: DMatrix<f64>,
        ao_overlap: DMatrix<f64>,
        ao_to_atom: Vec<usize>,
        atoms: Vec<Atom>,
        dipole_integrals: Option<[DMatrix<f64>; 3]>,
    ) -> Result<Self> {
        let nao = mo_coefficients.nrows();
        if ao_overlap.shape() != (nao, nao) {
            return Err(Error::DimensionMismatch { expected: nao, found: ao_overlap.nrows() });
        }
        if ao_to_atom.len() != nao {
            return Err(Error::InvalidInput(format!(
                "atom map covers {} AOs, expected {nao}",
                ao_to_atom.len()
            )));
        }
        if let Some(&a) = ao_to_atom.iter().find(|&&a| a >= atoms.len()) {
            return Err(Error::InvalidInput(format!("AO mapped to atom {a}, only {} atoms", atoms.len())));
        }
        if let Some(d) = &dipole_integrals {
            if let Some(m) = d.iter().find(|m| m.shape() != (nao, nao)) {
                return Err(Error::DimensionMismatch { expected: nao, found: m.nrows() });
            }
        }
        let data = Self { mo_coefficients, ao_overlap, ao_to_atom, atoms, dipole_integrals };
        let defect = data.orthonormality_defect();
        if defect > ORTHONORMALITY_TOL {
            return Err(Error::InvalidInput(format!(
                "MO coefficients not orthonormal under the overlap (max |C^T S C - I| = {defect:e})"
            )));
        }
        Ok(data)
    }

    pub fn n_ao(&self) -> usize {
        self.mo_coefficients.nrows()
    }

    pub fn n_mo(&self) -> usize {
        self.mo_coefficients.ncols()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let c = &self.mo_coefficients;
        let m = c.transpose() * &self.ao_overlap * c;
        (m - DMatrix::identity(self.n_mo(), self.n_mo())).amax()
    }

    /// Spin-summed AO density `P = C gamma_spatial C^T`.
    pub fn ao_density(&self, gamma: &OneRdm) -> Result<DMatrix<f64>> {
        let g = gamma.spin_summed();
        if g.nrows() != self.n_mo() || !gamma.r().is_multiple_of(2) {
            return Err(Error::DimensionMismatch { expected: 2 * self.n_mo(), found: gamma.r() });
        }
        Ok(&self.mo_coefficients * g * self.mo_coefficients.transpose())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).orbital_data()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("ORBDATA 1\n");
        let _ = writeln!(out, "nao {} nmo {} natom {}", self.n_ao(), self.n_mo(), self.atoms.len());
        out.push_str("atoms\n");
        for a in &self.atoms {
            let [x, y, z] = a.position;
            let _ = writeln!(out, "{} {:e} {:e} {:e} {:e}", a.symbol, a.charge, x, y, z);
        }
        out.push_str("ao_atom\n");
        let map: Vec<String> = self.ao_to_atom.iter().map(|a| a.to_string()).collect();
        out.push_str(&map.join(" "));
        out.push('\n');
        let mut block = |name: &str, m: &DMatrix<f64>| {
            out.push_str(name);
            out.push('\n');
            for row in m.row_iter() {
                let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                out.push_str(&vals.join(" "));
                out.push('\n');
            }
        };
        block("mo_coefficients", &self.mo_coefficients);
        block("overlap", &self.ao_overlap);
        if let Some([x, y, z]) = &self.dipole_integrals {
            block("dipole_x", x);
            block("dipole_y", y);
            block("dipole_z", z);
        }
        out
    }
}

struct Parser<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                let toks: Vec<&str> = l.split_whitespace().collect();
                (!toks.is_empty()).then_some((i + 1, toks))
            })
            .collect();
        Self { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        let line = self.lines.get(self.pos).cloned().ok_or_else(|| Error::Parse {
            line: self.last_line(),
            message: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(line)
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        let (no, toks) = self.next(word)?;
        if toks != [word] {
            return Err(Error::Parse { line: no, message: format!("expected `{word}`, found {:?}", toks.join(" ")) });
        }
        Ok(())
    }

    fn number<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
        tok.parse().map_err(|_| Error::Parse { line, message: format!("malformed number {tok:?}") })
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        self.keyword(name)?;
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            let (no, toks) = self.next(&format!("row {i} of {name}"))?;
            if toks.len() != cols {
                return Err(Error::Parse {
                    line: no,
                    message: format!("{name} row has {} values, expected {cols}", toks.len()),
                });
            }
            for (j, t) in toks.iter().enumerate() {
                m[(i, j)] = Self::number(t, no)?;
            }
        }
        Ok(m)
    }

    fn orbital_data(mut self) -> Result<OrbitalData> {
        let (no, toks) = self.next("header")?;
        if toks != ["ORBDATA", "1"] {
            return Err(Error::Parse { line: no, message: "expected header `ORBDATA 1`".into() });
        }
        let (no, toks) = self.next("dimensions")?;
        if toks.len() != 6 || toks[0] != "nao" || toks[2] != "nmo" || toks[4] != "natom" {
            return Err(Error::Parse { line: no, message: "expected `nao <n> nmo <n> natom <n>`".into() });
        }
        let nao: usize = Self::number(toks[1], no)?;
        let nmo: usize = Self::number(toks[3], no)?;
        let natom: usize = Self::number(toks[5], no)?;

        self.keyword("atoms")?;
        let mut atoms = Vec::with_capacity(natom);
        for _ in 0..natom {
            let (no, toks) = self.next("atom line")?;
            if toks.len() != 5 {
                return Err(Error::Parse { line: no, message: "expected `<symbol> <Z> <x> <y> <z>`".into() });
            }
            atoms.push(Atom {
                symbol: toks[0].to_string(),
                charge: Self::number(toks[1], no)?,
                position: [Self::number(toks[2], no)?, Self::number(toks[3], no)?, Self::number(toks[4], no)?],
            });
        }

        self.keyword("ao_atom")?;
        let (no, toks) = self.next("atom map")?;
        if toks.len() != nao {
            return Err(Error::Parse { line: no, message: format!("atom map has {} entries, expected {nao}", toks.len()) });
        }
        let ao_to_atom = toks.iter().map(|t| Self::number(t, no)).collect::<Result<Vec<usize>>>()?;

        let mo = self.matrix("mo_coefficients", nao, nmo)?;
        let s = self.matrix("overlap", nao, nao)?;
        let dipole = if self.pos < self.lines.len() {
            let x = self.matrix("dipole_x", nao, nao)?;
            let y = self.matrix("dipole_y", nao, nao)?;
            let z = self.matrix("dipole_z", nao, nao)?;
            Some([x, y, z])
        } else {
            None
        };
        if let Some((no, _)) = self.lines.get(self.pos) {
            return Err(Error::Parse { line: *no, message: "trailing content".into() });
        }
        OrbitalData::new(mo, s, ao_to_atom, atoms, dipole)
    }
}

/// Natural-orbital analysis of a 1-RDM.
#[derive(Debug, Clone, Serialize)]
pub struct NaturalOrbitalReport {
    /// Nonincreasing, clipped to `[0, 1]` or to `[0, 2]` when spin summed.
    pub occupations: Vec<f64>,
    /// Eigenvalues before clipping.
    pub raw_occupations: Vec<f64>,
    pub spin_summed: bool,
    /// [`von_neumann_entropy`] of the spin-orbital occupations.
    pub entropy: f64,
    /// Columns are the natural orbitals.
    #[serde(skip)]
    pub rotation: DMatrix<f64>,
}

pub fn natural_orbitals(gamma: &OneRdm, spin_summed: bool) -> NaturalOrbitalReport {
    let (m, cap) = if spin_summed { (gamma.spin_summed(), 2.0) } else { (gamma.gamma.clone(), 1.0) };
    let spec = Spectrum::of_symmetric(&m);
    let raw: Vec<f64> = spec.eigenvalues.iter().copied().collect();
    let occupations = raw.iter().map(|v| v.clamp(0.0, cap)).collect();
    let spin_occ: Vec<f64> = if spin_summed {
        Spectrum::of_symmetric(&gamma.gamma).eigenvalues.iter().copied().collect()
    } else {
        raw.clone()
    };
    NaturalOrbitalReport {
        occupations,
        raw_occupations: raw,
        spin_summed,
        entropy: von_neumann_entropy(&spin_occ),
        rotation: spec.eigenvectors,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum OccupationScale {
    /// Spin-orbital occupations in `[0, 1]`.
    #[default]
    Spin,
    /// Spatial occupations in `[0, 2]`, divided by 2 before use.
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EntropyConvention {
    pub scale: OccupationScale,
    pub base: LogBase,
}

/// `-sum nu ln nu` over spin-orbital occupations, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(occupations: &[f64]) -> f64 {
    entropy_with(occupations, EntropyConvention::default())
}

/// Entropy under an explicit convention. Occupations are normalized to
/// `[0, 1]` by the scale's cap and clipped.
pub fn entropy_with(occupations: &[f64], convention: EntropyConvention) -> f64 {
    let cap = match convention.scale {
        OccupationScale::Spin => 1.0,
        OccupationScale::Spatial => 2.0,
    };
    let s: f64 = occupations
        .iter()
        .map(|&n| (n / cap).clamp(0.0, 1.0))
        .filter(|&v| v > 0.0)
        .map(|v| -v * v.ln())
        .sum();
    match convention.base {
        LogBase::Natural => s,
        LogBase::Two => s / std::f64::consts::LN_2,
    }
}

/// Sum of `P_{mu nu}^2` over unordered AO pairs on different atoms, with
/// `P` the spin-summed AO density.
pub fn metallic_character(gamma: &OneRdm, orbitals: &OrbitalData) -> Result<f64> {
    let p = orbitals.ao_density(gamma)?;
    let map = &orbitals.ao_to_atom;
    let mut s = 0.0;
    for mu in 0..p.nrows() {
        for nu in mu + 1..p.ncols() {
            if map[mu] != map[nu] {
                s += p[(mu, nu)] * p[(mu, nu)];
            }
        }
    }
    Ok(s)
}

/// Spin-summed `sum gamma_ij^2` over the given spatial-site bonds; the
/// lattice analog of [`metallic_character`].
pub fn bond_coherence(gamma: &OneRdm, bonds: &[(usize, usize)]) -> Result<f64> {
    let g = gamma.spin_summed();
    bonds
        .iter()
        .map(|&(i, j)| {
            let m = g.nrows();
            if i >= m || j >= m {
                return Err(Error::OrbitalOutOfRange { orbital: i.max(j), r: m });
            }
            Ok(g[(i, j)] * g[(i, j)])
        })
        .sum()
}

/// Nearest-neighbor bonds of an `l`-site chain, each listed once.
pub fn chain_bonds(l: usize, periodic: bool) -> Vec<(usize, usize)> {
    let mut bonds: Vec<(usize, usize)> = (0..l.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if periodic && l > 2 {
        bonds.push((0, l - 1));
    }
    bonds
}

/// `q_A = Z_A - sum_{mu in A} (P S)_{mu mu}`.
pub fn mulliken_charges(gamma: &OneRdm, orbitals: &OrbitalData) -> Result<Vec<f64>> {
    let ps = orbitals.ao_density(gamma)? * &orbitals.ao_overlap;
    let mut q: Vec<f64> = orbitals.atoms.iter().map(|a| a.charge).collect();
    for (mu, &a) in orbitals.ao_to_atom.iter().enumerate() {
        q[a] -= ps[(mu, mu)];
    }
    Ok(q)
}

/// A one-body operator together with the basis it is written in.
#[derive(Debug, Clone, Copy)]
pub enum OneBodyOperator<'a> {
    /// `r x r` over spin orbitals.
    SpinOrbital(&'a DMatrix<f64>),
    /// Spatial MO matrix, applied identically to both spins.
    Spatial(&'a DMatrix<f64>),
    /// AO matrix, contracted with the spin-summed AO density.
    Ao(&'a DMatrix<f64>, &'a OrbitalData),
}

pub fn one_body_expectation(gamma: &OneRdm, operator: OneBodyOperator<'_>) -> Result<f64> {
    let (rho, op) = match operator {
        OneBodyOperator::SpinOrbital(o) => (gamma.gamma.clone(), o),
        OneBodyOperator::Spatial(o) => (gamma.spin_summed(), o),
        OneBodyOperator::Ao(o, orb) => (orb.ao_density(gamma)?, o),
    };
    if op.shape() != rho.shape() {
        return Err(Error::DimensionMismatch { expected: rho.nrows(), found: op.nrows() });
    }
    Ok(rho.dot(op))
}

/// `Tr(D O)` in the packed convention of the energy functional.
pub fn two_body_expectation(d: &TwoRdm, operator: &PackedMatrix) -> Result<f64> {
    d.d.inner(operator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dipole {
    pub au: [f64; 3],
    pub debye: [f64; 3],
    pub magnitude_debye: f64,
}

/// Nuclear minus electronic dipole about the coordinate origin.
pub fn dipole_moment(gamma: &OneRdm, orbitals: &OrbitalData) -> Result<Dipole> {
    let ints = orbitals
        .dipole_integrals
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("orbital data carries no dipole integrals".into()))?;
    let p = orbitals.ao_density(gamma)?;
    let mut au = [0.0; 3];
    for (c, m) in ints.iter().enumerate() {
        let nuclear: f64 = orbitals.atoms.iter().map(|a| a.charge * a.position[c]).sum();
        au[c] = nuclear - p.dot(m);
    }
    let debye = au.map(|v| v * AU_TO_DEBYE);
    let magnitude_debye = debye.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Dipole { au, debye, magnitude_debye })
}
