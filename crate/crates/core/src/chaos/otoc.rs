//! Out-of-time-order correlators and their sector decompositions.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::form_factor::{form_factor, FormFactorKind};
use super::frame::UnitarySamples;
use super::{mean_se_c, ObservableSeries, Scope};
use crate::ensembles::HamiltonianEnsemble;
use crate::error::{domain, Error, Result};
use crate::hilbert::{extract_blocks, pauli_charge_profile, sector_dim, CMatrix, ChargeBasis, Flavor, PauliString};

/// Monte Carlo OTOC estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OtocEstimate {
    /// Real part of the mean.
    pub value: f64,
    pub mean: Complex64,
    pub std_error: f64,
    pub realizations: usize,
    /// Mean of the normalized per-sector correlators, present when all
    /// operators commute with the charge.
    pub sector_means: Option<Vec<Complex64>>,
    /// Largest per-realization gap between the whole-space value and the
    /// weighted sector sum.
    pub max_residual: Option<f64>,
}

fn check_ops(ops: &[CMatrix], dim: usize) -> Result<usize> {
    if ops.is_empty() || !ops.len().is_multiple_of(2) || ops.len() > 4 {
        return domain(format!("expected operators A1,B1[,A2,B2], got {}", ops.len()));
    }
    for (i, o) in ops.iter().enumerate() {
        if o.nrows() != dim || o.ncols() != dim {
            return domain(format!("operator {i} is {}x{}, expected {dim}x{dim}", o.nrows(), o.ncols()));
        }
    }
    Ok(ops.len() / 2)
}

/// `Tr(A1 U^dag B1 U A2 U^dag B2 U ...)`
fn word_trace(ops: &[CMatrix], u: &CMatrix) -> Complex64 {
    let ud = u.adjoint();
    let mut acc = ops[0].clone();
    for pair in 0..ops.len() / 2 {
        if pair > 0 {
            acc *= &ops[2 * pair];
        }
        acc = acc * &ud * &ops[2 * pair + 1] * u;
    }
    acc.trace()
}

/// `(1/L) Tr(A1 U^dag B1 U ...)` averaged over the samples, or
/// `(1/d_q) Tr(...)` restricted to sector `q`.
pub fn otoc(samples: &UnitarySamples, ops: &[CMatrix], scope: Scope) -> Result<OtocEstimate> {
    if samples.is_empty() {
        return Err(Error::NoData("no unitary samples".into()));
    }
    let l = samples.total_dim();
    check_ops(ops, l)?;
    let blocked: Option<Vec<Vec<CMatrix>>> = samples.basis.as_ref().and_then(|b| {
        ops.iter().map(|o| extract_blocks(o, b, Flavor::General).ok().map(|m| m.into_blocks())).collect()
    });
    if let Scope::Sector(q) = scope {
        let Some(blocks) = &blocked else {
            return domain("sector scope needs charge-conserving operators and block samples");
        };
        if q >= samples.dims.len() {
            return domain(format!("sector {q} out of range"));
        }
        let sector_ops: Vec<CMatrix> = blocks.iter().map(|b| b[q].clone()).collect();
        let d = samples.dims[q] as f64;
        let vals: Vec<Complex64> =
            samples.members.par_iter().map(|m| word_trace(&sector_ops, &m[q]) / d).collect();
        let (mean, se) = mean_se_c(&vals);
        return Ok(OtocEstimate {
            value: mean.re,
            mean,
            std_error: se,
            realizations: vals.len(),
            sector_means: None,
            max_residual: None,
        });
    }
    let rows: Vec<(Complex64, Option<(Vec<Complex64>, f64)>)> = (0..samples.len())
        .into_par_iter()
        .map(|r| {
            let whole = word_trace(ops, &samples.dense(r)) / l as f64;
            let sectors = blocked.as_ref().map(|blocks| {
                let per: Vec<Complex64> = samples
                    .dims
                    .iter()
                    .enumerate()
                    .map(|(q, &d)| {
                        let so: Vec<CMatrix> = blocks.iter().map(|b| b[q].clone()).collect();
                        word_trace(&so, &samples.members[r][q]) / d as f64
                    })
                    .collect();
                let recomposed: Complex64 =
                    per.iter().zip(&samples.dims).map(|(v, &d)| v * (d as f64 / l as f64)).sum();
                (per, (whole - recomposed).norm())
            });
            (whole, sectors)
        })
        .collect();
    let vals: Vec<Complex64> = rows.iter().map(|r| r.0).collect();
    let (mean, se) = mean_se_c(&vals);
    let (sector_means, max_residual) = if blocked.is_some() {
        let n = rows.len() as f64;
        let ns = samples.dims.len();
        let mut sums = vec![Complex64::new(0.0, 0.0); ns];
        let mut worst = 0.0f64;
        for (_, s) in &rows {
            let (per, res) = s.as_ref().expect("sector data present");
            for (acc, v) in sums.iter_mut().zip(per) {
                *acc += v;
            }
            worst = worst.max(*res);
        }
        (Some(sums.into_iter().map(|s| s / n).collect()), Some(worst))
    } else {
        (None, None)
    };
    Ok(OtocEstimate { value: mean.re, mean, std_error: se, realizations: vals.len(), sector_means, max_residual })
}

/// Exact U(1)-Haar two-point function `<A U^dag B U>`: only the diagonal
/// blocks of `A` and `B` survive, giving `(1/L) sum_p Tr(A_p) Tr(B_p) / d_p`.
pub fn u1_haar_two_point(basis: &Arc<ChargeBasis>, a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    let l = basis.dim();
    check_ops(&[a.clone(), b.clone()], l)?;
    let mut total = Complex64::new(0.0, 0.0);
    for q in 0..basis.num_sectors() {
        let states = basis.sector_states(q);
        let ta: Complex64 = states.iter().map(|&g| a[(g, g)]).sum();
        let tb: Complex64 = states.iter().map(|&g| b[(g, g)]).sum();
        total += ta * tb / states.len() as f64;
    }
    Ok(total / l as f64)
}

/// The counting rule for Pauli two-point functions as printed: `1/d_q` when
/// `z(A) = z(B) = q = D - i(A) - i(B)`, zero otherwise. It does not agree
/// with [`u1_haar_two_point`] in general (for `A = B = I` it gives 0).
pub fn pauli_law_literal(a: &PauliString, b: &PauliString) -> Result<f64> {
    if a.len() != b.len() {
        return domain("Pauli strings must have equal length");
    }
    let d = a.len();
    let (za, ia) = pauli_charge_profile(a);
    let (zb, ib) = pauli_charge_profile(b);
    if za == zb && ia + ib <= d && za == d - ia - ib {
        Ok(1.0 / sector_dim(d, za)? as f64)
    } else {
        Ok(0.0)
    }
}

fn normalized_trace(m: &CMatrix) -> Complex64 {
    m.trace() / m.nrows() as f64
}

/// Exact Haar four-point `<A1 U^dag B1 U A2 U^dag B2 U>` in one sector,
/// normalized by `1/d`.
pub fn haar_four_point_sector(a1: &CMatrix, b1: &CMatrix, a2: &CMatrix, b2: &CMatrix) -> Complex64 {
    let d = a1.nrows();
    if d == 1 {
        return a1[(0, 0)] * b1[(0, 0)] * a2[(0, 0)] * b2[(0, 0)];
    }
    let (ta1, ta2, tb1, tb2) = (normalized_trace(a1), normalized_trace(a2), normalized_trace(b1), normalized_trace(b2));
    let ta12 = normalized_trace(&(a1 * a2));
    let tb12 = normalized_trace(&(b1 * b2));
    let conn_a = ta12 - ta1 * ta2;
    let conn_b = tb12 - tb1 * tb2;
    let df = d as f64;
    ta12 * tb1 * tb2 + ta1 * ta2 * tb12 - ta1 * ta2 * tb1 * tb2 - conn_a * conn_b / (df * df - 1.0)
}

/// Exact U(1)-Haar four-point function for charge-conserving operators:
/// `sum_p (d_p/L)` times the per-sector Haar value.
pub fn u1_haar_four_point(basis: &Arc<ChargeBasis>, a1: &CMatrix, b1: &CMatrix, a2: &CMatrix, b2: &CMatrix) -> Result<Complex64> {
    let l = basis.dim() as f64;
    let bl = [a1, b1, a2, b2]
        .iter()
        .map(|m| extract_blocks(m, basis, Flavor::General).map(|b| b.into_blocks()))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..basis.num_sectors())
        .map(|q| haar_four_point_sector(&bl[0][q], &bl[1][q], &bl[2][q], &bl[3][q]) * (basis.sector_dim(q) as f64 / l))
        .sum())
}

/// Two-point function in one sector of a unitarily invariant ensemble from
/// its form factor: `<A><B> + (R2 - 1)/(d^2 - 1) (<AB> - <A><B>)`.
pub fn sector_two_point_from_r2(a: &CMatrix, b: &CMatrix, r2: f64) -> Complex64 {
    let d = a.nrows();
    if d == 1 {
        return a[(0, 0)] * b[(0, 0)];
    }
    let (ta, tb) = (normalized_trace(a), normalized_trace(b));
    let conn = normalized_trace(&(a * b)) - ta * tb;
    let df = d as f64;
    ta * tb + conn * ((r2 - 1.0) / (df * df - 1.0))
}

/// The early-time form-factor approximation next to the directly sampled OTOC.
#[derive(Debug, Clone)]
pub struct OtocSeries {
    pub approx: ObservableSeries,
    pub direct: ObservableSeries,
}

/// `sum_p R_2k(E_p) / (d_p^{2k} L) Tr(A1_p B1_p ... Ak_p Bk_p)` for
/// charge-conserving operators, with the direct OTOC on the same realizations.
pub fn otoc_kinv_approx(ens: &HamiltonianEnsemble, ops: &[CMatrix], times: &[f64]) -> Result<OtocSeries> {
    let basis = ens.systems.first().ok_or_else(|| Error::NoData("empty ensemble".into()))?.basis().clone();
    let l = basis.dim();
    let k = check_ops(ops, l)?;
    let blocks = ops
        .iter()
        .map(|o| extract_blocks(o, &basis, Flavor::General).map(|b| b.into_blocks()))
        .collect::<Result<Vec<_>>>()?;
    let traces: Vec<Complex64> = (0..basis.num_sectors())
        .map(|q| {
            let mut acc = blocks[0][q].clone();
            for m in &blocks[1..] {
                acc *= &m[q];
            }
            acc.trace()
        })
        .collect();
    let se = ens.spectral();
    let n = ens.systems.len();
    let mut approx = ObservableSeries::new(format!("otoc_approx_k{k}"), n);
    let mut direct = ObservableSeries::new(format!("otoc_direct_k{k}"), n);
    for &t in times {
        let mut val = 0.0;
        let mut var = 0.0;
        for (q, tr) in traces.iter().enumerate() {
            let d = basis.sector_dim(q) as f64;
            let f = form_factor(&se, FormFactorKind::R2k(k as u32), t, Scope::Sector(q))?;
            let w = tr.re / (d.powi(2 * k as i32) * l as f64);
            val += f.value * w;
            var += (f.std_error * w).powi(2);
        }
        approx.push(t, val, var.sqrt());
        let samples = UnitarySamples::from_blocks(basis.clone(), ens.unitaries_at(t))?;
        let o = otoc(&samples, ops, Scope::Whole)?;
        direct.push(t, o.value, o.std_error);
    }
    Ok(OtocSeries { approx, direct })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_u1_haar;
    use crate::hilbert::embed_blocks;

    #[test]
    fn identity_correlator_is_one() {
        let basis = ChargeBasis::shared(3).unwrap();
        let members = (0..3).map(|r| sample_u1_haar(&basis, 1, r).into_blocks()).collect();
        let s = UnitarySamples::from_blocks(basis, members).unwrap();
        let id = CMatrix::identity(8, 8);
        let o = otoc(&s, &[id.clone(), id.clone(), id.clone(), id], Scope::Whole).unwrap();
        assert!((o.mean - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(o.max_residual.unwrap() < 1e-12);
    }

    #[test]
    fn literal_law_cases() {
        let zz: PauliString = "ZZ".parse().unwrap();
        let ii: PauliString = "II".parse().unwrap();
        assert_eq!(pauli_law_literal(&zz, &zz).unwrap(), 1.0);
        assert_eq!(pauli_law_literal(&ii, &ii).unwrap(), 0.0);
        let basis = ChargeBasis::shared(2).unwrap();
        let v = u1_haar_two_point(&basis, &ii.to_dense(), &ii.to_dense()).unwrap();
        assert!((v.re - 1.0).abs() < 1e-14);
        let v = u1_haar_two_point(&basis, &zz.to_dense(), &zz.to_dense()).unwrap();
        assert!((v.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn four_point_one_dimensional_sectors() {
        let basis = ChargeBasis::shared(1).unwrap();
        let z: PauliString = "Z".parse().unwrap();
        let zd = z.to_dense();
        let v = u1_haar_four_point(&basis, &zd, &zd, &zd, &zd).unwrap();
        assert!((v.re - 1.0).abs() < 1e-14);
        let u = embed_blocks(&sample_u1_haar(&basis, 0, 0));
        assert!((word_trace(&[zd.clone(), zd.clone(), zd.clone(), zd], &u) / 2.0 - v).norm() < 1e-12);
    }
}
