//! Random ensembles: Haar, U(1)-symmetric Haar, per-sector GUE and complex SYK.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::hilbert::{BlockMatrix, ChargeBasis, CMatrix, Flavor};
use crate::rng::{complex_normal, ginibre, normal, substream, Purpose};

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn sample_haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    assert!(d >= 1, "dimension must be positive");
    let g = ginibre(rng, d, d);
    let (mut q, r) = g.qr().unpack();
    for k in 0..d {
        let rkk = r[(k, k)];
        let norm = rkk.norm();
        let phase = if norm > 0.0 { rkk / norm } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// Independent Haar block per charge sector.
pub fn sample_u1_haar(basis: &Arc<ChargeBasis>, seed: u64, realization: u64) -> BlockMatrix {
    let blocks = basis
        .sector_dims()
        .iter()
        .enumerate()
        .map(|(q, &d)| sample_haar_unitary(d, &mut substream(seed, Purpose::U1Haar, realization, q as u64)))
        .collect();
    BlockMatrix::from_parts(basis.clone(), blocks, Flavor::Unitary)
}

/// GUE matrix whose entries have variance `scale^2 / d`.
pub fn sample_gue<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> CMatrix {
    let var = scale * scale / d as f64;
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        m[(j, j)] = Complex64::new(var.sqrt() * normal(rng), 0.0);
        for i in 0..j {
            let z = complex_normal(rng, var);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

pub fn sample_gue_blocks(basis: &Arc<ChargeBasis>, seed: u64, realization: u64, scale: f64) -> Result<BlockMatrix> {
    if !(scale > 0.0) {
        return domain(format!("GUE scale must be positive, got {scale}"));
    }
    let blocks = basis
        .sector_dims()
        .iter()
        .enumerate()
        .map(|(q, &d)| sample_gue(d, scale, &mut substream(seed, Purpose::Gue, realization, q as u64)))
        .collect();
    Ok(BlockMatrix::from_parts(basis.clone(), blocks, Flavor::Hermitian))
}

/// Couplings `J_ijkl` of the complex SYK model, indices 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SykCouplings {
    n: usize,
    j: f64,
    tensor: Vec<Complex64>,
}

impl SykCouplings {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling_strength(&self) -> f64 {
        self.j
    }

    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        self.tensor[self.idx(i, j, k, l)]
    }

    /// Zero tensor, for building couplings by hand.
    pub fn zeros(n: usize, j: f64) -> Result<Self> {
        check_syk_size(n)?;
        Ok(Self { n, j, tensor: vec![Complex64::new(0.0, 0.0); n.pow(4)] })
    }

    /// Set `J_ijkl` (with `i<j`, `k<l`) and every entry tied to it by
    /// antisymmetry and hermiticity.
    pub fn set_canonical(&mut self, i: usize, j: usize, k: usize, l: usize, value: Complex64) -> Result<()> {
        if i >= j || k >= l || j >= self.n || l >= self.n {
            return domain(format!("({i},{j},{k},{l}) is not a canonical index"));
        }
        if (i, j) == (k, l) && value.im != 0.0 {
            return domain("diagonal couplings must be real");
        }
        let mut put = |a: usize, b: usize, c: usize, d: usize, v: Complex64| {
            let at = self.idx(a, b, c, d);
            self.tensor[at] = v;
        };
        for (a, b, s1) in [(i, j, 1.0), (j, i, -1.0)] {
            for (c, d, s2) in [(k, l, 1.0), (l, k, -1.0)] {
                put(a, b, c, d, value * (s1 * s2));
                put(c, d, a, b, value.conj() * (s1 * s2));
            }
        }
        Ok(())
    }

    /// Entries drawn independently: all `(i<j, k<l)` with `(i,j) <= (k,l)`.
    pub fn canonical_entries(&self) -> Vec<((usize, usize, usize, usize), Complex64)> {
        let pairs = index_pairs(self.n);
        let mut out = Vec::new();
        for (a, &(i, j)) in pairs.iter().enumerate() {
            for &(k, l) in &pairs[a..] {
                out.push(((i, j, k, l), self.get(i, j, k, l)));
            }
        }
        out
    }
}

fn check_syk_size(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) {
        return domain(format!("SYK fermion number must be even, got {n}"));
    }
    if !(4..=14).contains(&n) {
        return domain(format!("SYK fermion number {n} outside 4..=14"));
    }
    Ok(())
}

fn index_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Draw couplings with `E|J_ijkl|^2 = 4 J^2 / N^3`.
pub fn sample_syk_couplings<R: Rng + ?Sized>(n: usize, j: f64, rng: &mut R) -> Result<SykCouplings> {
    let mut c = SykCouplings::zeros(n, j)?;
    let var = 4.0 * j * j / (n as f64).powi(3);
    let pairs = index_pairs(n);
    for (a, &(i, jj)) in pairs.iter().enumerate() {
        for &(k, l) in &pairs[a..] {
            let v = if (i, jj) == (k, l) {
                Complex64::new(var.sqrt() * normal(rng), 0.0)
            } else {
                complex_normal(rng, var)
            };
            c.set_canonical(i, jj, k, l, v)?;
        }
    }
    Ok(c)
}

// Jordan-Wigner: mode i sits on qubit i+1, i.e. bit n-1-i.
fn jw_annihilate(state: usize, mode: usize, n: usize) -> Option<(usize, f64)> {
    let bit = n - 1 - mode;
    if (state >> bit) & 1 == 0 {
        return None;
    }
    let before = (state >> (bit + 1)).count_ones();
    let sign = if before.is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((state ^ (1 << bit), sign))
}

fn jw_create(state: usize, mode: usize, n: usize) -> Option<(usize, f64)> {
    let bit = n - 1 - mode;
    if (state >> bit) & 1 == 1 {
        return None;
    }
    let before = (state >> (bit + 1)).count_ones();
    let sign = if before.is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((state | (1 << bit), sign))
}

/// Nonzero entries `(row, col, value)` of `H = sum J_ijkl f_i^+ f_j^+ f_k f_l`
/// acting on basis state `col`.
fn syk_column(c: &SykCouplings, pairs: &[(usize, usize)], col: usize, mut sink: impl FnMut(usize, Complex64)) {
    let n = c.n;
    for &(k, l) in pairs {
        let Some((s1, a)) = jw_annihilate(col, l, n) else { continue };
        let Some((s2, b)) = jw_annihilate(s1, k, n) else { continue };
        for &(i, j) in pairs {
            let Some((s3, c3)) = jw_create(s2, j, n) else { continue };
            let Some((s4, c4)) = jw_create(s3, i, n) else { continue };
            let amp = c.get(i, j, k, l) * (4.0 * a * b * c3 * c4);
            if amp != Complex64::new(0.0, 0.0) {
                sink(s4, amp);
            }
        }
    }
}

/// Dense `2^N` Hamiltonian. Intended for small `N` and for cross-checks.
pub fn build_syk_dense(c: &SykCouplings) -> CMatrix {
    let dim = 1usize << c.n;
    let mut h = CMatrix::zeros(dim, dim);
    let pairs = index_pairs(c.n);
    for col in 0..dim {
        syk_column(c, &pairs, col, |row, v| h[(row, col)] += v);
    }
    h
}

/// Charge blocks of the SYK Hamiltonian, assembled directly from its action
/// on basis states. Every generated matrix element is checked to stay inside
/// its charge sector.
pub fn build_syk_hamiltonian(c: &SykCouplings) -> Result<BlockMatrix> {
    let basis = ChargeBasis::shared(c.n)?;
    let mut blocks: Vec<CMatrix> = basis.sector_dims().iter().map(|&d| CMatrix::zeros(d, d)).collect();
    let pairs = index_pairs(c.n);
    let mut leak = None;
    for col in 0..basis.dim() {
        let (q, jdx) = basis.to_sector(col);
        syk_column(c, &pairs, col, |row, v| {
            let (qr, idx) = basis.to_sector(row);
            if qr == q {
                blocks[q][(idx, jdx)] += v;
            } else if leak.is_none() {
                leak = Some(Error::NotBlockDiagonal { row, col, magnitude: v.norm() });
            }
        });
        if let Some(e) = leak.take() {
            return Err(e);
        }
    }
    // symmetrize away rounding so the Hermitian flavor holds exactly
    for b in &mut blocks {
        let n = b.nrows();
        for i in 0..n {
            b[(i, i)].im = 0.0;
            for j in 0..i {
                let avg = (b[(i, j)] + b[(j, i)].conj()) * 0.5;
                b[(i, j)] = avg;
                b[(j, i)] = avg.conj();
            }
        }
    }
    Ok(BlockMatrix::from_parts(basis, blocks, Flavor::Hermitian))
}

/// Per-block eigendecomposition of a Hermitian block operator.
#[derive(Debug, Clone)]
pub struct EigenBlocks {
    basis: Arc<ChargeBasis>,
    energies: Vec<DVector<f64>>,
    vectors: Vec<CMatrix>,
}

impl EigenBlocks {
    pub fn new(h: &BlockMatrix) -> Result<Self> {
        let mut energies = Vec::with_capacity(h.blocks().len());
        let mut vectors = Vec::with_capacity(h.blocks().len());
        for (q, b) in h.blocks().iter().enumerate() {
            let eig = SymmetricEigen::try_new(b.clone(), 1e-15, 0)
                .ok_or_else(|| Error::Numerical(format!("eigendecomposition of block {q} did not converge")))?;
            energies.push(eig.eigenvalues);
            vectors.push(eig.eigenvectors);
        }
        Ok(Self { basis: h.basis().clone(), energies, vectors })
    }

    pub fn basis(&self) -> &Arc<ChargeBasis> {
        &self.basis
    }

    pub fn energies(&self, q: usize) -> &DVector<f64> {
        &self.energies[q]
    }

    /// Sorted eigenvalues per sector.
    pub fn sorted_energies(&self) -> Vec<Vec<f64>> {
        self.energies
            .iter()
            .map(|e| {
                let mut v: Vec<f64> = e.iter().copied().collect();
                v.sort_by(f64::total_cmp);
                v
            })
            .collect()
    }

    /// `exp(i t H)` blockwise.
    pub fn evolve(&self, t: f64) -> BlockMatrix {
        let blocks = self
            .energies
            .iter()
            .zip(&self.vectors)
            .map(|(e, v)| {
                let mut scaled = v.clone();
                for (k, &ek) in e.iter().enumerate() {
                    let ph = Complex64::from_polar(1.0, t * ek);
                    for i in 0..scaled.nrows() {
                        scaled[(i, k)] *= ph;
                    }
                }
                scaled * v.adjoint()
            })
            .collect();
        BlockMatrix::from_parts(self.basis.clone(), blocks, Flavor::Unitary)
    }
}

/// `exp(i t H)` for a Hermitian block operator.
pub fn evolve(h: &BlockMatrix, t: f64) -> Result<BlockMatrix> {
    Ok(EigenBlocks::new(h)?.evolve(t))
}

/// Eigenphases in `(-pi, pi]`, sorted, of a unitary matrix.
pub fn eigenphases(u: &CMatrix) -> Result<Vec<f64>> {
    let n = u.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::Schur::try_new(u.clone(), 1e-15, 0)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut phases: Vec<f64> = (0..n).map(|i| t[(i, i)].arg()).collect();
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Haar,
    U1Haar,
    GuePerSector,
    Csyk,
}

impl EnsembleKind {
    pub fn is_hamiltonian(self) -> bool {
        matches!(self, Self::GuePerSector | Self::Csyk)
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Haar => "haar",
            Self::U1Haar => "u1_haar",
            Self::GuePerSector => "gue_per_sector",
            Self::Csyk => "csyk",
        })
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "haar" => Ok(Self::Haar),
            "u1_haar" | "u1haar" => Ok(Self::U1Haar),
            "gue_per_sector" | "gue" => Ok(Self::GuePerSector),
            "csyk" | "syk" => Ok(Self::Csyk),
            other => Err(Error::Parse(format!("unknown ensemble kind '{other}'"))),
        }
    }
}

/// What to sample. `size` is the qubit count `D` (equal to the fermion count
/// `N` for complex SYK).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub size: usize,
    pub coupling: f64,
    pub scale: f64,
    pub seed: u64,
    pub realizations: usize,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, size: usize, seed: u64, realizations: usize) -> Self {
        Self { kind, size, coupling: 1.0, scale: 1.0, seed, realizations }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return domain("at least one realization is required");
        }
        match self.kind {
            EnsembleKind::Csyk => check_syk_size(self.size),
            _ if self.size == 0 || self.size > 14 => domain(format!("qubit count {} outside 1..=14", self.size)),
            EnsembleKind::GuePerSector if !(self.scale > 0.0) => domain("GUE scale must be positive"),
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical text form of the spec.
    pub fn content_hash(&self) -> String {
        let canon = format!(
            "kind={};size={};coupling={:e};scale={:e};seed={};realizations={}",
            self.kind, self.size, self.coupling, self.scale, self.seed, self.realizations
        );
        hex_digest(canon.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hamiltonian realization `r` of a Hamiltonian ensemble.
pub fn sample_hamiltonian(spec: &EnsembleSpec, realization: u64) -> Result<BlockMatrix> {
    match spec.kind {
        EnsembleKind::Csyk => {
            let mut rng = substream(spec.seed, Purpose::Syk, realization, 0);
            build_syk_hamiltonian(&sample_syk_couplings(spec.size, spec.coupling, &mut rng)?)
        }
        EnsembleKind::GuePerSector => {
            sample_gue_blocks(&ChargeBasis::shared(spec.size)?, spec.seed, realization, spec.scale)
        }
        other => domain(format!("{other} is not a Hamiltonian ensemble")),
    }
}

/// Unitary realization `r` of a unitary ensemble. Full Haar is returned as a
/// single block of dimension `2^D`.
pub fn sample_unitary_blocks(spec: &EnsembleSpec, realization: u64) -> Result<Vec<CMatrix>> {
    match spec.kind {
        EnsembleKind::Haar => {
            let mut rng = substream(spec.seed, Purpose::Haar, realization, 0);
            Ok(vec![sample_haar_unitary(1 << spec.size, &mut rng)])
        }
        EnsembleKind::U1Haar => {
            Ok(sample_u1_haar(&ChargeBasis::shared(spec.size)?, spec.seed, realization).into_blocks())
        }
        other => domain(format!("{other} is not a unitary ensemble")),
    }
}

/// Eigenvalues of every realization, grouped by sector.
///
/// For Hamiltonian ensembles the values are energies; for unitary ensembles
/// they are eigenphases `lambda` with `U = diag(exp(i lambda))`, so that time
/// `t = 1` reproduces the sampled unitary. Full Haar has a single sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEnsemble {
    pub kind: EnsembleKind,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub eigenvalues: Vec<Vec<Vec<f64>>>,
}

impl SpectralEnsemble {
    pub fn from_eigenvalues(kind: EnsembleKind, seed: u64, dims: Vec<usize>, eigenvalues: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for (r, real) in eigenvalues.iter().enumerate() {
            if real.len() != dims.len() {
                return domain(format!("realization {r} has {} sectors, expected {}", real.len(), dims.len()));
            }
            for (q, ev) in real.iter().enumerate() {
                if ev.len() != dims[q] {
                    return domain(format!("realization {r} sector {q} has {} values, expected {}", ev.len(), dims[q]));
                }
            }
        }
        Ok(Self { kind, seed, dims, eigenvalues })
    }

    pub fn realizations(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn num_sectors(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Keep only sector `q`, as a one-sector ensemble.
    pub fn restrict(&self, q: usize) -> SpectralEnsemble {
        SpectralEnsemble {
            kind: self.kind,
            seed: self.seed,
            dims: vec![self.dims[q]],
            eigenvalues: self.eigenvalues.iter().map(|r| vec![r[q].clone()]).collect(),
        }
    }

    /// CSV rows `realization,sector,index,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "realization,sector,index,value")?;
        for (r, real) in self.eigenvalues.iter().enumerate() {
            for (q, ev) in real.iter().enumerate() {
                for (i, v) in ev.iter().enumerate() {
                    writeln!(w, "{r},{q},{i},{v:.17e}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R, kind: EnsembleKind, seed: u64, dims: Vec<usize>) -> Result<Self> {
        let mut eigenvalues: Vec<Vec<Vec<f64>>> = Vec::new();
        for (ln, line) in reader.lines().enumerate().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", ln + 1)));
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)));
            let (r, q) = (parse(f[0])?, parse(f[1])?);
            let v: f64 = f[3].parse().map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            if q >= dims.len() {
                return Err(Error::Parse(format!("line {}: sector {q} out of range", ln + 1)));
            }
            while eigenvalues.len() <= r {
                eigenvalues.push(vec![Vec::new(); dims.len()]);
            }
            eigenvalues[r][q].push(v);
        }
        Self::from_eigenvalues(kind, seed, dims, eigenvalues)
    }
}

fn sector_dims_for(spec: &EnsembleSpec) -> Result<Vec<usize>> {
    Ok(match spec.kind {
        EnsembleKind::Haar => vec![1usize << spec.size],
        _ => ChargeBasis::new(spec.size)?.sector_dims().to_vec(),
    })
}

/// Diagonalize every realization of `spec` once.
pub fn spectral_ensemble(spec: &EnsembleSpec) -> Result<SpectralEnsemble> {
    spec.validate()?;
    let dims = sector_dims_for(spec)?;
    let eigenvalues = (0..spec.realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<Vec<f64>>> {
            if spec.kind.is_hamiltonian() {
                sample_hamiltonian(spec, r)?.blocks().iter().map(block_energies).collect()
            } else {
                sample_unitary_blocks(spec, r)?.iter().map(eigenphases).collect()
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralEnsemble::from_eigenvalues(spec.kind, spec.seed, dims, eigenvalues)
}

fn block_energies(b: &CMatrix) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = b.clone().symmetric_eigenvalues().iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Like [`spectral_ensemble`], reading from or writing to `cache_dir`
/// under the file name `<content hash>.csv`.
pub fn spectral_ensemble_cached(spec: &EnsembleSpec, cache_dir: &Path) -> Result<SpectralEnsemble> {
    spec.validate()?;
    let path: PathBuf = cache_dir.join(format!("{}.csv", spec.content_hash()));
    if path.exists() {
        let f = BufReader::new(fs::File::open(&path)?);
        return SpectralEnsemble::read_csv(f, spec.kind, spec.seed, sector_dims_for(spec)?);
    }
    let se = spectral_ensemble(spec)?;
    fs::create_dir_all(cache_dir)?;
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        se.write_csv(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(se)
}

/// Hamiltonian ensemble with eigendecompositions kept, so unitaries at any
/// time can be rebuilt.
pub struct HamiltonianEnsemble {
    pub spec: EnsembleSpec,
    pub systems: Vec<EigenBlocks>,
}

impl HamiltonianEnsemble {
    pub fn sample(spec: &EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        let systems = (0..spec.realizations as u64)
            .into_par_iter()
            .map(|r| EigenBlocks::new(&sample_hamiltonian(spec, r)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec: spec.clone(), systems })
    }

    pub fn spectral(&self) -> SpectralEnsemble {
        SpectralEnsemble {
            kind: self.spec.kind,
            seed: self.spec.seed,
            dims: self.systems[0].basis().sector_dims().to_vec(),
            eigenvalues: self.systems.iter().map(EigenBlocks::sorted_energies).collect(),
        }
    }

    /// Blocks of `exp(i t H_r)` for every realization.
    pub fn unitaries_at(&self, t: f64) -> Vec<Vec<CMatrix>> {
        self.systems.par_iter().map(|s| s.evolve(t).into_blocks()).collect()
    }
}
