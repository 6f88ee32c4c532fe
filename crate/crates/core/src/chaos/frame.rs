//! Frame potentials and k-invariance from sampled unitaries.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{form_factor::f1_analytic, masked_relative_error, mean_se, pairwise_sum, ObservableSeries};
use crate::ensembles::{sample_haar_unitary, HamiltonianEnsemble};
use crate::error::{domain, Error, Result};
use crate::hilbert::{embed_blocks, BlockMatrix, CMatrix, ChargeBasis, Flavor};
use crate::rng::{substream, Purpose};

/// Realizations of a unitary ensemble, each stored as its diagonal blocks.
/// A dense unitary is a single block and carries no charge basis.
#[derive(Debug, Clone)]
pub struct UnitarySamples {
    pub basis: Option<Arc<ChargeBasis>>,
    pub dims: Vec<usize>,
    pub members: Vec<Vec<CMatrix>>,
}

impl UnitarySamples {
    pub fn from_blocks(basis: Arc<ChargeBasis>, members: Vec<Vec<CMatrix>>) -> Result<Self> {
        let dims = basis.sector_dims().to_vec();
        for (r, m) in members.iter().enumerate() {
            if m.len() != dims.len() || m.iter().zip(&dims).any(|(b, &d)| b.nrows() != d || b.ncols() != d) {
                return domain(format!("realization {r} does not match the sector dimensions"));
            }
        }
        Ok(Self { basis: Some(basis), dims, members })
    }

    pub fn from_dense(members: Vec<CMatrix>) -> Result<Self> {
        let d = members.first().map_or(0, CMatrix::nrows);
        if members.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return domain("dense unitaries must share one square dimension");
        }
        Ok(Self { basis: None, dims: vec![d], members: members.into_iter().map(|m| vec![m]).collect() })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Dense matrix of realization `r`.
    pub fn dense(&self, r: usize) -> CMatrix {
        match &self.basis {
            Some(b) => embed_blocks(&BlockMatrix::from_parts(b.clone(), self.members[r].clone(), Flavor::Unitary)),
            None => self.members[r][0].clone(),
        }
    }

    fn flattened(&self) -> CMatrix {
        let len: usize = self.dims.iter().map(|d| d * d).sum();
        let mut m = CMatrix::zeros(len, self.len());
        for (r, blocks) in self.members.iter().enumerate() {
            let mut k = 0;
            for b in blocks {
                for z in b.iter() {
                    m[(k, r)] = *z;
                    k += 1;
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameEstimate {
    pub value: f64,
    pub std_error: f64,
    pub realizations: usize,
}

/// `F^(k)` averaged over distinct pairs of realizations. The error is the
/// standard U-statistic estimate `(4(n-2) z1 + 2 z2) / (n(n-1))`.
pub fn frame_potential(samples: &UnitarySamples, k: u32) -> Result<FrameEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::NoData(format!("frame potential needs at least 2 realizations, got {n}")));
    }
    if k == 0 {
        return domain("frame potential order must be at least 1");
    }
    let flat = samples.flattened();
    // entry (m, n) is conj(Tr(U_n U_m^dag)); only the modulus is used
    let gram = flat.ad_mul(&flat);
    let h = |a: usize, b: usize| gram[(a, b)].norm_sqr().powi(k as i32);
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|a| (0..n).filter(|&b| b != a).map(|b| h(a, b)).collect()).collect();
    let upper: Vec<f64> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).map(|(a, b)| h(a, b)).collect();
    let (value, _) = mean_se(&upper);
    let nf = n as f64;
    let row_means: Vec<f64> = rows.iter().map(|r| pairwise_sum(r) / (nf - 1.0)).collect();
    let z1 = if n > 2 {
        pairwise_sum(&row_means.iter().map(|x| (x - value).powi(2)).collect::<Vec<_>>()) / (nf - 1.0)
    } else {
        0.0
    };
    let z2 = if upper.len() > 1 {
        pairwise_sum(&upper.iter().map(|x| (x - value).powi(2)).collect::<Vec<_>>()) / (upper.len() as f64 - 1.0)
    } else {
        0.0
    };
    let var = (4.0 * (nf - 2.0) * z1 + 2.0 * z2) / (nf * (nf - 1.0));
    Ok(FrameEstimate { value, std_error: var.max(0.0).sqrt(), realizations: n })
}

/// Which Haar unitaries conjugate the samples in [`k_invariance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugationScope {
    /// One Haar unitary on the whole space.
    Whole,
    /// An independent Haar unitary in every sector.
    PerSector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KInvariance {
    /// `F_E - F_conj`
    pub value: f64,
    pub std_error: f64,
    pub frame: FrameEstimate,
    pub conjugated: FrameEstimate,
}

fn conjugate(u: &CMatrix, w: &CMatrix) -> CMatrix {
    w * u * w.adjoint()
}

/// Conjugate every realization with a fresh Haar unitary, `rounds` times.
pub fn haar_conjugated(samples: &UnitarySamples, round: u64, seed: u64, scope: ConjugationScope) -> UnitarySamples {
    let members: Vec<Vec<CMatrix>> = (0..samples.len())
        .into_par_iter()
        .map(|r| match scope {
            ConjugationScope::Whole => {
                let u = samples.dense(r);
                let mut rng = substream(seed, Purpose::Conjugation, r as u64, round << 6);
                vec![conjugate(&u, &sample_haar_unitary(u.nrows(), &mut rng))]
            }
            ConjugationScope::PerSector => samples.members[r]
                .iter()
                .enumerate()
                .map(|(q, b)| {
                    let mut rng = substream(seed, Purpose::Conjugation, r as u64, (round << 6) | (q as u64 + 1));
                    conjugate(b, &sample_haar_unitary(b.nrows(), &mut rng))
                })
                .collect(),
        })
        .collect();
    match scope {
        ConjugationScope::Whole => UnitarySamples { basis: None, dims: vec![samples.total_dim()], members },
        ConjugationScope::PerSector => UnitarySamples { basis: samples.basis.clone(), dims: samples.dims.clone(), members },
    }
}

/// `I^(k) = F_E - F_conj`, where the conjugated ensemble is averaged over
/// `rounds` independent Haar conjugations.
pub fn k_invariance(samples: &UnitarySamples, k: u32, rounds: usize, seed: u64, scope: ConjugationScope) -> Result<KInvariance> {
    if rounds == 0 {
        return domain("at least one conjugation round is required");
    }
    let frame = frame_potential(samples, k)?;
    let per_round = (0..rounds as u64)
        .map(|round| frame_potential(&haar_conjugated(samples, round, seed, scope), k))
        .collect::<Result<Vec<_>>>()?;
    let value = per_round.iter().map(|f| f.value).sum::<f64>() / rounds as f64;
    // rounds share the same U's, so their errors are not independent; keep
    // the single-round error as a conservative bound
    let std_error = per_round.iter().map(|f| f.std_error).sum::<f64>() / rounds as f64;
    let conjugated = FrameEstimate { value, std_error, realizations: samples.len() };
    Ok(KInvariance {
        value: frame.value - value,
        std_error: frame.std_error.hypot(std_error),
        frame,
        conjugated,
    })
}

/// Sampled `F^(1)` against its sector-decomposed analytic prediction.
#[derive(Debug, Clone)]
pub struct F1Check {
    pub direct: ObservableSeries,
    pub analytic: ObservableSeries,
    pub relative_error: ObservableSeries,
}

pub fn f1_decomposition_check(ens: &HamiltonianEnsemble, times: &[f64]) -> Result<F1Check> {
    let n = ens.systems.len();
    let analytic = f1_analytic(&ens.spectral(), times)?;
    let mut direct = ObservableSeries::new("f1_direct", n);
    let mut rel = ObservableSeries::new("f1_relative_error", n);
    let basis = ens.systems.first().ok_or_else(|| Error::NoData("empty ensemble".into()))?.basis().clone();
    for (i, &t) in times.iter().enumerate() {
        let samples = UnitarySamples::from_blocks(basis.clone(), ens.unitaries_at(t))?;
        let f = frame_potential(&samples, 1)?;
        direct.push(t, f.value, f.std_error);
        let e = masked_relative_error(f.value, f.std_error, analytic.values[i]);
        rel.push(t, e, if e.is_nan() { f64::NAN } else { f.std_error.hypot(analytic.std_errors[i]) / f.value.abs() });
    }
    Ok(F1Check { direct, analytic, relative_error: rel })
}

/// `Tr(U V^dag)` summed over blocks.
pub fn block_overlap(u: &[CMatrix], v: &[CMatrix]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum::<Complex64>()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_u1_haar;

    #[test]
    fn identity_ensemble_anchor() {
        let s = UnitarySamples::from_dense(vec![CMatrix::identity(4, 4); 5]).unwrap();
        let f = frame_potential(&s, 2).unwrap();
        assert_eq!(f.value, 256.0);
        assert_eq!(f.std_error, 0.0);
    }

    #[test]
    fn too_few_realizations() {
        let s = UnitarySamples::from_dense(vec![CMatrix::identity(2, 2)]).unwrap();
        assert!(matches!(frame_potential(&s, 1), Err(Error::NoData(_))));
    }

    #[test]
    fn gram_matches_direct_overlap() {
        let basis = ChargeBasis::shared(3).unwrap();
        let members: Vec<Vec<CMatrix>> = (0..4).map(|r| sample_u1_haar(&basis, 9, r).into_blocks()).collect();
        let s = UnitarySamples::from_blocks(basis, members.clone()).unwrap();
        let f = frame_potential(&s, 1).unwrap();
        let mut acc = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                acc += block_overlap(&members[a], &members[b]).norm_sqr();
                let dense = (s.dense(a) * s.dense(b).adjoint()).trace();
                assert!((dense - block_overlap(&members[a], &members[b])).norm() < 1e-12);
            }
        }
        assert!((f.value - acc / 6.0).abs() < 1e-12);
    }
}
