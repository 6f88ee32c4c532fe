//! Charge-sector structure of a register of qubits.
//!
//! The charge of a computational basis state is the number of qubits in
//! state `|1>`, i.e. the popcount of its global index. Qubit 1 is the
//! leftmost qubit and maps to the most significant bit.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest qubit count accepted by [`ChargeBasis::new`].
pub const MAX_QUBITS: usize = 20;

const BLOCK_TOL: f64 = 1e-10;

/// Binomial coefficient `C(n, k)` via the Pascal recurrence with checked arithmetic.
pub fn binomial(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return domain(format!("binomial({n}, {k}): k exceeds n"));
    }
    let k = k.min(n - k);
    let mut row = vec![0u64; k + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            row[j] = row[j]
                .checked_add(row[j - 1])
                .ok_or_else(|| Error::Overflow(format!("binomial({n}, {k})")))?;
        }
    }
    Ok(row[k])
}

/// Dimension `d_q = C(D, q)` of the charge-`q` sector of `D` qubits.
pub fn sector_dim(d: usize, q: usize) -> Result<u64> {
    if q > d {
        return domain(format!("charge {q} out of range 0..={d}"));
    }
    binomial(d, q)
}

/// Bijection between global basis indices and `(sector, index within sector)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChargeBasis {
    qubits: usize,
    sector_dims: Vec<usize>,
    global_to_sector: Vec<(usize, usize)>,
    sector_to_global: Vec<Vec<usize>>,
}

impl ChargeBasis {
    pub fn new(qubits: usize) -> Result<Self> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return domain(format!("qubit count {qubits} outside 1..={MAX_QUBITS}"));
        }
        let dim = 1usize << qubits;
        let mut sector_to_global = vec![Vec::new(); qubits + 1];
        let mut global_to_sector = Vec::with_capacity(dim);
        for b in 0..dim {
            let q = b.count_ones() as usize;
            global_to_sector.push((q, sector_to_global[q].len()));
            sector_to_global[q].push(b);
        }
        let sector_dims = sector_to_global.iter().map(Vec::len).collect();
        Ok(Self { qubits, sector_dims, global_to_sector, sector_to_global })
    }

    pub fn shared(qubits: usize) -> Result<Arc<Self>> {
        Self::new(qubits).map(Arc::new)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn num_sectors(&self) -> usize {
        self.qubits + 1
    }

    pub fn sector_dims(&self) -> &[usize] {
        &self.sector_dims
    }

    pub fn sector_dim(&self, q: usize) -> usize {
        self.sector_dims[q]
    }

    pub fn to_sector(&self, global: usize) -> (usize, usize) {
        self.global_to_sector[global]
    }

    pub fn to_global(&self, q: usize, i: usize) -> usize {
        self.sector_to_global[q][i]
    }

    pub fn sector_states(&self, q: usize) -> &[usize] {
        &self.sector_to_global[q]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Unitary,
    Hermitian,
    General,
}

/// Block-diagonal operator stored as one dense matrix per charge sector.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    basis: Arc<ChargeBasis>,
    blocks: Vec<CMatrix>,
    flavor: Flavor,
}

impl BlockMatrix {
    /// Assemble from explicit blocks. Shapes must match the sector dimensions
    /// and the blocks must satisfy the flavor's defining property.
    pub fn new(basis: Arc<ChargeBasis>, blocks: Vec<CMatrix>, flavor: Flavor) -> Result<Self> {
        if blocks.len() != basis.num_sectors() {
            return domain(format!(
                "expected {} blocks, got {}",
                basis.num_sectors(),
                blocks.len()
            ));
        }
        for (q, b) in blocks.iter().enumerate() {
            let d = basis.sector_dim(q);
            if b.nrows() != d || b.ncols() != d {
                return domain(format!("block {q} has shape {}x{}, expected {d}x{d}", b.nrows(), b.ncols()));
            }
            match flavor {
                Flavor::Unitary => {
                    let dev = unitarity_defect(b);
                    if dev > 1e-10 {
                        return domain(format!("block {q} deviates from unitarity by {dev:e}"));
                    }
                }
                Flavor::Hermitian => {
                    let dev = hermiticity_defect(b);
                    if dev > 1e-12 {
                        return domain(format!("block {q} deviates from hermiticity by {dev:e}"));
                    }
                }
                Flavor::General => {}
            }
        }
        Ok(Self { basis, blocks, flavor })
    }

    pub(crate) fn from_parts(basis: Arc<ChargeBasis>, blocks: Vec<CMatrix>, flavor: Flavor) -> Self {
        debug_assert_eq!(blocks.len(), basis.num_sectors());
        Self { basis, blocks, flavor }
    }

    pub fn identity(basis: Arc<ChargeBasis>) -> Self {
        let blocks = basis.sector_dims().iter().map(|&d| CMatrix::identity(d, d)).collect();
        Self { basis, blocks, flavor: Flavor::Unitary }
    }

    pub fn basis(&self) -> &Arc<ChargeBasis> {
        &self.basis
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, q: usize) -> &CMatrix {
        &self.blocks[q]
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn into_blocks(self) -> Vec<CMatrix> {
        self.blocks
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Blockwise product `self * other`.
    pub fn mul(&self, other: &BlockMatrix) -> BlockMatrix {
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect();
        let flavor = if self.flavor == Flavor::Unitary && other.flavor == Flavor::Unitary {
            Flavor::Unitary
        } else {
            Flavor::General
        };
        BlockMatrix { basis: self.basis.clone(), blocks, flavor }
    }

    pub fn adjoint(&self) -> BlockMatrix {
        let blocks = self.blocks.iter().map(|b| b.adjoint()).collect();
        BlockMatrix { basis: self.basis.clone(), blocks, flavor: self.flavor }
    }

    /// Sum of block traces.
    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }
}

pub(crate) fn unitarity_defect(m: &CMatrix) -> f64 {
    let p = m * m.adjoint();
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Place the blocks of `m` into a dense `2^D x 2^D` matrix.
pub fn embed_blocks(m: &BlockMatrix) -> CMatrix {
    let basis = m.basis();
    let dim = basis.dim();
    let mut out = CMatrix::zeros(dim, dim);
    for (q, b) in m.blocks().iter().enumerate() {
        let states = basis.sector_states(q);
        for (i, &gi) in states.iter().enumerate() {
            for (j, &gj) in states.iter().enumerate() {
                out[(gi, gj)] = b[(i, j)];
            }
        }
    }
    out
}

/// Split a dense operator into charge blocks, rejecting any off-sector entry
/// larger than `1e-10` in magnitude.
pub fn extract_blocks(m: &CMatrix, basis: &Arc<ChargeBasis>, flavor: Flavor) -> Result<BlockMatrix> {
    let dim = basis.dim();
    if m.nrows() != dim || m.ncols() != dim {
        return domain(format!("matrix is {}x{}, basis needs {dim}x{dim}", m.nrows(), m.ncols()));
    }
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..dim {
        let qi = basis.to_sector(i).0;
        for j in 0..dim {
            if basis.to_sector(j).0 != qi {
                let mag = m[(i, j)].norm();
                if mag > BLOCK_TOL && worst.is_none_or(|w| mag > w.2) {
                    worst = Some((i, j, mag));
                }
            }
        }
    }
    if let Some((row, col, magnitude)) = worst {
        return Err(Error::NotBlockDiagonal { row, col, magnitude });
    }
    let blocks = (0..basis.num_sectors())
        .map(|q| {
            let states = basis.sector_states(q);
            CMatrix::from_fn(states.len(), states.len(), |i, j| m[(states[i], states[j])])
        })
        .collect();
    Ok(BlockMatrix::from_parts(basis.clone(), blocks, flavor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// A tensor product of single-qubit Pauli operators, qubit 1 first.
///
/// `Z` is taken with eigenvalue `+1` on `|1>` so that `(1 + Z_i)/2` counts
/// occupied qubits; `Y` is chosen so that `XY = iZ` still holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    pub fn identity(n: usize) -> Self {
        Self { letters: vec![Pauli::I; n] }
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// True when the string commutes with the total charge (only `I` and `Z`).
    pub fn conserves_charge(&self) -> bool {
        self.letters.iter().all(|p| matches!(p, Pauli::I | Pauli::Z))
    }

    /// Image of basis state `b`: returns `(b', phase)` with `P|b> = phase |b'>`.
    pub fn apply_basis(&self, b: usize) -> (usize, Complex64) {
        let n = self.letters.len();
        let mut out = b;
        let mut phase = Complex64::new(1.0, 0.0);
        for (k, p) in self.letters.iter().enumerate() {
            let bit = n - 1 - k;
            let occupied = (b >> bit) & 1 == 1;
            match p {
                Pauli::I => {}
                Pauli::X => out ^= 1 << bit,
                Pauli::Y => {
                    out ^= 1 << bit;
                    // Y|0> = -i|1>, Y|1> = i|0>
                    phase *= if occupied { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
                }
                Pauli::Z => {
                    if !occupied {
                        phase = -phase;
                    }
                }
            }
        }
        (out, phase)
    }

    /// Dense `2^n x 2^n` matrix.
    pub fn to_dense(&self) -> CMatrix {
        let dim = 1usize << self.letters.len();
        let mut m = CMatrix::zeros(dim, dim);
        for b in 0..dim {
            let (out, phase) = self.apply_basis(b);
            m[(out, b)] = phase;
        }
        m
    }

    /// Block form; fails unless the string conserves charge.
    pub fn to_blocks(&self, basis: &Arc<ChargeBasis>) -> Result<BlockMatrix> {
        if self.letters.len() != basis.qubits() {
            return domain(format!("Pauli string has {} letters, basis has {} qubits", self.letters.len(), basis.qubits()));
        }
        if !self.conserves_charge() {
            return domain(format!("Pauli string {self} does not commute with the charge"));
        }
        let blocks = (0..basis.num_sectors())
            .map(|q| {
                let states = basis.sector_states(q);
                let diag: Vec<Complex64> = states.iter().map(|&b| self.apply_basis(b).1).collect();
                CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
            })
            .collect();
        Ok(BlockMatrix::from_parts(basis.clone(), blocks, Flavor::Unitary))
    }
}

impl std::str::FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Parse(format!("invalid Pauli letter '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { letters })
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.letters {
            let c = match p {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Number of `Z` letters and number of `I` letters.
pub fn pauli_charge_profile(p: &PauliString) -> (usize, usize) {
    let z = p.letters.iter().filter(|&&l| l == Pauli::Z).count();
    let i = p.letters.iter().filter(|&&l| l == Pauli::I).count();
    (z, i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(sector_dim(14, 7).unwrap(), 3432);
        assert_eq!(sector_dim(4, 0).unwrap(), 1);
        let total: u64 = (0..=10).map(|q| sector_dim(10, q).unwrap()).sum();
        assert_eq!(total, 1024);
        assert!(matches!(sector_dim(3, 4), Err(Error::Domain(_))));
        assert!(matches!(binomial(100, 50), Err(Error::Overflow(_))));
        assert_eq!(binomial(66, 33).unwrap(), 7219428434016265740);
    }

    #[test]
    fn small_bases() {
        let b = ChargeBasis::new(2).unwrap();
        assert_eq!(b.sector_dims(), &[1, 2, 1]);
        assert_eq!(b.sector_states(1), &[0b01, 0b10]);
        let b3 = ChargeBasis::new(3).unwrap();
        // 101 is the second of {011, 101, 110}
        assert_eq!(b3.to_sector(5), (2, 1));
        assert_eq!(ChargeBasis::new(1).unwrap().sector_dims(), &[1, 1]);
        assert!(ChargeBasis::new(0).is_err());
        assert!(ChargeBasis::new(21).is_err());
    }

    #[test]
    fn pauli_profiles() {
        let p = |s: &str| pauli_charge_profile(&s.parse().unwrap());
        assert_eq!(p("ZIZX"), (2, 1));
        assert_eq!(p("IIII"), (0, 4));
        assert_eq!(p("XYXY"), (0, 0));
    }

    #[test]
    fn pauli_algebra() {
        let x: PauliString = "X".parse().unwrap();
        let y: PauliString = "Y".parse().unwrap();
        let z: PauliString = "Z".parse().unwrap();
        let i = Complex64::new(0.0, 1.0);
        let xy = x.to_dense() * y.to_dense();
        assert!((xy - z.to_dense() * i).norm() < 1e-15);
        // Z counts occupation
        assert_eq!(z.to_dense()[(1, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(z.to_dense()[(0, 0)], Complex64::new(-1.0, 0.0));
        let y2 = y.to_dense() * y.to_dense();
        assert!((y2 - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn embed_examples() {
        let basis = ChargeBasis::shared(2).unwrap();
        let id = BlockMatrix::identity(basis.clone());
        assert_eq!(embed_blocks(&id), CMatrix::identity(4, 4));
        let x = "X".parse::<PauliString>().unwrap().to_dense();
        let m = BlockMatrix::new(
            basis.clone(),
            vec![CMatrix::identity(1, 1), x, CMatrix::identity(1, 1)],
            Flavor::Unitary,
        )
        .unwrap();
        let dense = embed_blocks(&m);
        assert_eq!(dense[(0b01, 0b10)], Complex64::new(1.0, 0.0));
        assert_eq!(dense[(0b10, 0b01)], Complex64::new(1.0, 0.0));
        assert_eq!(dense[(0b00, 0b00)], Complex64::new(1.0, 0.0));
        assert_eq!(dense[(0b01, 0b01)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn extract_rejects_off_sector_mass() {
        let basis = ChargeBasis::shared(2).unwrap();
        let bm = extract_blocks(&CMatrix::identity(4, 4), &basis, Flavor::Unitary).unwrap();
        assert_eq!(bm.block(1), &CMatrix::identity(2, 2));
        let mut m = CMatrix::identity(4, 4);
        m[(0, 1)] = Complex64::new(1e-3, 0.0);
        match extract_blocks(&m, &basis, Flavor::General) {
            Err(Error::NotBlockDiagonal { row, col, .. }) => assert_eq!((row, col), (0, 1)),
            other => panic!("expected rejection, got {other:?}"),
        }
    }
}
