//! Spectral form factors computed from eigenvalues.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{jackknife, masked_relative_error, mean_se, mean_se_c, ObservableSeries, Scope};
use crate::ensembles::SpectralEnsemble;
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormFactorKind {
    R1,
    R2,
    R21,
    R22,
    R3,
    R31,
    R4,
    P2,
    P21,
    P22,
    P3,
    P31,
    P4,
    /// `|Tr U|^{2k}`
    R2k(u32),
}

impl FormFactorKind {
    /// Value for one realization from `T1 = Tr U`, `T2 = Tr U^2` and the dimension.
    pub fn sample(self, t1: Complex64, t2: Complex64, d: usize) -> Complex64 {
        let d = d as f64;
        let c1 = t1.conj();
        let p2 = t1.norm_sqr() - d;
        let p21 = t1 * t1 - t2;
        let p3 = p21 * c1 - t1 * (2.0 * (d - 1.0));
        let p31 = p21.conj() * t2 - 2.0 * p2;
        match self {
            Self::R1 => t1,
            Self::R2 => t1.norm_sqr().into(),
            Self::R21 => t1 * t1,
            Self::R22 => t2 * c1,
            Self::R3 => t1 * t1 * c1,
            Self::R31 => t2 * c1 * c1,
            Self::R4 => t1.norm_sqr().powi(2).into(),
            Self::P2 => p2.into(),
            Self::P21 => p21,
            Self::P22 => t2 * c1 - t1,
            Self::P3 => p3,
            Self::P31 => p31,
            Self::P4 => p3 * c1 - 2.0 * (d - 2.0) * p2 - p31.conj(),
            Self::R2k(k) => t1.norm_sqr().powi(k as i32).into(),
        }
    }
}

impl FromStr for FormFactorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase();
        Ok(match up.as_str() {
            "R1" => Self::R1,
            "R2" => Self::R2,
            "R21" => Self::R21,
            "R22" => Self::R22,
            "R3" => Self::R3,
            "R31" => Self::R31,
            "R4" => Self::R4,
            "P2" => Self::P2,
            "P21" => Self::P21,
            "P22" => Self::P22,
            "P3" => Self::P3,
            "P31" => Self::P31,
            "P4" => Self::P4,
            other => match other.strip_prefix("R2K") {
                Some(k) => Self::R2k(k.parse().map_err(|_| Error::Parse(format!("bad form factor '{s}'")))?),
                None => return Err(Error::Parse(format!("unknown form factor '{s}'"))),
            },
        })
    }
}

impl fmt::Display for FormFactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::R2k(k) => write!(f, "R2k{k}"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// `Tr U` and `Tr U^2` per realization and sector at one time, with
/// `U = diag(exp(i t lambda))`.
#[derive(Debug, Clone)]
pub struct TraceSums {
    pub dims: Vec<usize>,
    pub t1: Vec<Vec<Complex64>>,
    pub t2: Vec<Vec<Complex64>>,
}

pub fn trace_sums(se: &SpectralEnsemble, t: f64) -> TraceSums {
    let (t1, t2): (Vec<_>, Vec<_>) = se
        .eigenvalues
        .par_iter()
        .map(|real| {
            real.iter()
                .map(|ev| {
                    let mut a = Complex64::new(0.0, 0.0);
                    let mut b = Complex64::new(0.0, 0.0);
                    for &e in ev {
                        a += Complex64::from_polar(1.0, t * e);
                        b += Complex64::from_polar(1.0, 2.0 * t * e);
                    }
                    (a, b)
                })
                .unzip::<_, _, Vec<_>, Vec<_>>()
        })
        .unzip();
    TraceSums { dims: se.dims.clone(), t1, t2 }
}

impl TraceSums {
    pub fn realizations(&self) -> usize {
        self.t1.len()
    }

    /// `(T1, T2, d)` of realization `r` in the given scope.
    pub fn scoped(&self, r: usize, scope: Scope) -> (Complex64, Complex64, usize) {
        match scope {
            Scope::Whole => (self.t1[r].iter().sum(), self.t2[r].iter().sum(), self.dims.iter().sum()),
            Scope::Sector(q) => (self.t1[r][q], self.t2[r][q], self.dims[q]),
        }
    }
}

/// Realization average of a form factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormFactorValue {
    /// Real part of the average.
    pub value: f64,
    pub std_error: f64,
    /// Full complex average.
    pub mean: Complex64,
    pub realizations: usize,
}

pub fn form_factor(se: &SpectralEnsemble, kind: FormFactorKind, t: f64, scope: Scope) -> Result<FormFactorValue> {
    if se.realizations() == 0 {
        return Err(Error::NoData("spectral ensemble has no realizations".into()));
    }
    if let Scope::Sector(q) = scope {
        if q >= se.num_sectors() {
            return domain(format!("sector {q} out of range 0..{}", se.num_sectors()));
        }
    }
    let ts = trace_sums(se, t);
    Ok(form_factor_from(&ts, kind, scope))
}

pub(crate) fn form_factor_from(ts: &TraceSums, kind: FormFactorKind, scope: Scope) -> FormFactorValue {
    let samples: Vec<Complex64> = (0..ts.realizations())
        .map(|r| {
            let (a, b, d) = ts.scoped(r, scope);
            kind.sample(a, b, d)
        })
        .collect();
    let (mean, std_error) = mean_se_c(&samples);
    FormFactorValue { value: mean.re, std_error, mean, realizations: samples.len() }
}

// Sums over assignments of distinct sectors.
fn distinct2(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (p, x) in a.iter().enumerate() {
        for (q, y) in b.iter().enumerate() {
            if p != q {
                s += x * y;
            }
        }
    }
    s
}

fn distinct3(a: &[Complex64], b: &[Complex64], c: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (p, x) in a.iter().enumerate() {
        for (q, y) in b.iter().enumerate() {
            if q == p {
                continue;
            }
            for (u, z) in c.iter().enumerate() {
                if u != p && u != q {
                    s += x * y * z;
                }
            }
        }
    }
    s
}

fn distinct4(a: &[Complex64], b: &[Complex64], c: &[Complex64], e: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    let n = a.len();
    for p in 0..n {
        for q in 0..n {
            if q == p {
                continue;
            }
            let pq = a[p] * b[q];
            for u in 0..n {
                if u == p || u == q {
                    continue;
                }
                let pqu = pq * c[u];
                for v in 0..n {
                    if v != p && v != q && v != u {
                        s += pqu * e[v];
                    }
                }
            }
        }
    }
    s
}

fn conj(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().map(|z| z.conj()).collect()
}

/// Per-sector averages needed by the four-point decompositions.
struct SectorMoments {
    dims: Vec<usize>,
    // R-type
    r1: Vec<Complex64>,
    r2: Vec<Complex64>,
    r21: Vec<Complex64>,
    r3: Vec<Complex64>,
    r4: Vec<Complex64>,
    // P-type
    p2: Vec<Complex64>,
    p21: Vec<Complex64>,
    p22: Vec<Complex64>,
    p3: Vec<Complex64>,
    p31: Vec<Complex64>,
    p4: Vec<Complex64>,
    // first and second "squared ensemble" P's: Tr U^2 and |Tr U^2|^2 - d
    q1: Vec<Complex64>,
    q2: Vec<Complex64>,
}

const SECTOR_KINDS: [FormFactorKind; 11] = [
    FormFactorKind::R1,
    FormFactorKind::R2,
    FormFactorKind::R21,
    FormFactorKind::R3,
    FormFactorKind::R4,
    FormFactorKind::P2,
    FormFactorKind::P21,
    FormFactorKind::P22,
    FormFactorKind::P3,
    FormFactorKind::P31,
    FormFactorKind::P4,
];
const N_FEATURES: usize = SECTOR_KINDS.len() + 2;

/// Feature row of one realization: for every sector the eleven kinds above
/// followed by `T2` and `|T2|^2 - d`.
fn sector_features(ts: &TraceSums, r: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(ts.dims.len() * N_FEATURES);
    for (p, &d) in ts.dims.iter().enumerate() {
        let (a, b) = (ts.t1[r][p], ts.t2[r][p]);
        for k in SECTOR_KINDS {
            out.push(k.sample(a, b, d));
        }
        out.push(b);
        out.push((b.norm_sqr() - d as f64).into());
    }
    out
}

impl SectorMoments {
    fn from_features(dims: &[usize], f: &[Complex64]) -> Self {
        let col = |j: usize| -> Vec<Complex64> { (0..dims.len()).map(|p| f[p * N_FEATURES + j]).collect() };
        SectorMoments {
            dims: dims.to_vec(),
            r1: col(0),
            r2: col(1),
            r21: col(2),
            r3: col(3),
            r4: col(4),
            p2: col(5),
            p21: col(6),
            p22: col(7),
            p3: col(8),
            p31: col(9),
            p4: col(10),
            q1: col(11),
            q2: col(12),
        }
    }

    fn r2_rhs(&self) -> f64 {
        let s: Complex64 = self.r2.iter().sum::<Complex64>() + distinct2(&self.r1, &conj(&self.r1));
        s.re
    }

    /// Seven-term representation from per-sector R averages.
    fn r4_r_form(&self) -> f64 {
        let c1 = conj(&self.r1);
        let s = self.r4.iter().sum::<Complex64>().re
            + 4.0 * distinct2(&self.r3, &c1).re
            + 4.0 * distinct3(&self.r2, &self.r1, &c1).re
            + 2.0 * distinct3(&self.r21, &c1, &c1).re
            + 2.0 * distinct2(&self.r2, &self.r2).re
            + distinct2(&self.r21, &conj(&self.r21)).re
            + distinct4(&self.r1, &self.r1, &c1, &c1).re;
        s
    }

    /// Representation through diagonal-free P sums.
    fn r4_p_form(&self) -> f64 {
        let l: f64 = self.dims.iter().sum::<usize>() as f64;
        let p1 = &self.r1;
        let c1 = conj(p1);
        let s = distinct4(p1, p1, &c1, &c1).re
            + 4.0 * distinct3(&self.p2, p1, &c1).re
            + 2.0 * distinct3(&self.p21, &c1, &c1).re
            + 2.0 * distinct3(&self.q1, &c1, &c1).re
            + 4.0 * distinct2(&self.p3, &c1).re
            + 2.0 * distinct2(&self.p2, &self.p2).re
            + distinct2(&self.p21, &conj(&self.p21)).re
            + 4.0 * distinct2(&self.p22, &c1).re
            + 2.0 * distinct2(&self.q1, &conj(&self.p21)).re
            + 4.0 * (l - 1.0) * distinct2(p1, &c1).re
            + distinct2(&self.q1, &conj(&self.q1)).re
            + self.p4.iter().sum::<Complex64>().re
            + 2.0 * self.p31.iter().sum::<Complex64>().re
            + 4.0 * (l - 1.0) * self.p2.iter().sum::<Complex64>().re
            + self.q2.iter().sum::<Complex64>().re
            + 2.0 * l * l
            - l;
        s
    }

    fn f1(&self) -> f64 {
        let mut s = 0.0;
        let mut xs = Vec::with_capacity(self.dims.len());
        for (q, &d) in self.dims.iter().enumerate() {
            let r2 = self.r2[q].re;
            let df = d as f64;
            s += if d == 1 { 1.0 } else { (r2 * r2 + df * df - 2.0 * r2) / (df * df - 1.0) };
            xs.push(self.r1[q].norm_sqr() / df);
        }
        let total: f64 = xs.iter().sum();
        let sq: f64 = xs.iter().map(|x| x * x).sum();
        s + total * total - sq
    }
}

fn features_at(se: &SpectralEnsemble, t: f64) -> (TraceSums, Vec<Vec<Complex64>>) {
    let ts = trace_sums(se, t);
    let feats = (0..ts.realizations()).into_par_iter().map(|r| sector_features(&ts, r)).collect();
    (ts, feats)
}

fn whole_samples(ts: &TraceSums, kind: FormFactorKind) -> Vec<f64> {
    (0..ts.realizations())
        .map(|r| {
            let (a, b, d) = ts.scoped(r, Scope::Whole);
            kind.sample(a, b, d).re
        })
        .collect()
}

fn require_data(se: &SpectralEnsemble) -> Result<()> {
    if se.realizations() == 0 {
        Err(Error::NoData("spectral ensemble has no realizations".into()))
    } else {
        Ok(())
    }
}

/// Relative error of the sector decomposition of `R_2`: whole-space `R_2`
/// against the sum of per-sector `R_2` plus cross terms built from per-sector
/// `R_1` averages. Standard errors are jackknife estimates.
pub fn r2_decomposition_check(se: &SpectralEnsemble, times: &[f64]) -> Result<ObservableSeries> {
    require_data(se)?;
    let mut out = ObservableSeries::new("r2_relative_error", se.realizations());
    for &t in times {
        let (ts, feats) = features_at(se, t);
        let (lhs, lhs_se) = mean_se(&whole_samples(&ts, FormFactorKind::R2));
        let dims = se.dims.clone();
        let (rhs, _) = jackknife(&feats, |m| SectorMoments::from_features(&dims, m).r2_rhs());
        let rows: Vec<Vec<Complex64>> =
            feats.iter().zip(whole_samples(&ts, FormFactorKind::R2)).map(|(f, x)| [vec![x.into()], f.clone()].concat()).collect();
        let (_, diff_se) = jackknife(&rows, |m| m[0].re - SectorMoments::from_features(&dims, &m[1..]).r2_rhs());
        let rel = masked_relative_error(lhs, lhs_se, rhs);
        out.push(t, rel, if rel.is_nan() { f64::NAN } else { diff_se / lhs.abs() });
    }
    Ok(out)
}

/// How the per-sector quantities are combined across sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R4Mode {
    /// Products of per-sector ensemble averages (the charge-decoupling form).
    Factorized,
    /// Products taken inside each realization, then averaged; this equals
    /// the direct whole-space `R_4` identically.
    PerRealization,
}

/// The seven-term R representation and the P representation of `R_4` at one time.
pub fn r4_representations(se: &SpectralEnsemble, t: f64, mode: R4Mode) -> Result<(f64, f64)> {
    require_data(se)?;
    let (_, feats) = features_at(se, t);
    let n = feats.len() as f64;
    Ok(match mode {
        R4Mode::Factorized => {
            let m: Vec<Complex64> = (0..feats[0].len()).map(|j| feats.iter().map(|f| f[j]).sum::<Complex64>() / n).collect();
            let sm = SectorMoments::from_features(&se.dims, &m);
            (sm.r4_r_form(), sm.r4_p_form())
        }
        R4Mode::PerRealization => {
            let vals: Vec<(f64, f64)> = feats
                .par_iter()
                .map(|f| {
                    let sm = SectorMoments::from_features(&se.dims, f);
                    (sm.r4_r_form(), sm.r4_p_form())
                })
                .collect();
            let (a, b): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
            (mean_se(&a).0, mean_se(&b).0)
        }
    })
}

/// Output of [`r4_decomposition_check`].
#[derive(Debug, Clone)]
pub struct R4Check {
    /// `|R4_direct - R4_Rform| / |R4_direct|`, masked like the R2 check.
    pub relative_error: ObservableSeries,
    /// `|R4_Rform - R4_Pform| / |R4_Rform|` on the same data.
    pub representation_gap: ObservableSeries,
    /// Direct whole-space `R_4`.
    pub direct: ObservableSeries,
}

pub fn r4_decomposition_check(se: &SpectralEnsemble, times: &[f64]) -> Result<R4Check> {
    require_data(se)?;
    let n = se.realizations();
    let mut rel = ObservableSeries::new("r4_relative_error", n);
    let mut gap = ObservableSeries::new("r4_representation_gap", n);
    let mut direct = ObservableSeries::new("r4_direct", n);
    for &t in times {
        let (ts, feats) = features_at(se, t);
        let whole = whole_samples(&ts, FormFactorKind::R4);
        let (lhs, lhs_se) = mean_se(&whole);
        let dims = se.dims.clone();
        let (r_form, _) = jackknife(&feats, |m| SectorMoments::from_features(&dims, m).r4_r_form());
        let (p_form, p_se) = jackknife(&feats, |m| SectorMoments::from_features(&dims, m).r4_p_form());
        let rows: Vec<Vec<Complex64>> = feats.iter().zip(&whole).map(|(f, &x)| [vec![x.into()], f.clone()].concat()).collect();
        let (_, diff_se) = jackknife(&rows, |m| m[0].re - SectorMoments::from_features(&dims, &m[1..]).r4_r_form());
        let e = masked_relative_error(lhs, lhs_se, r_form);
        rel.push(t, e, if e.is_nan() { f64::NAN } else { diff_se / lhs.abs() });
        gap.push(t, (r_form - p_form).abs() / r_form.abs(), p_se / r_form.abs());
        direct.push(t, lhs, lhs_se);
    }
    Ok(R4Check { relative_error: rel, representation_gap: gap, direct })
}

fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

fn distinct_assignment(blocks: &[Vec<Complex64>], used: &mut Vec<bool>) -> Complex64 {
    let Some((first, rest)) = blocks.split_first() else {
        return Complex64::new(1.0, 0.0);
    };
    let mut s = Complex64::new(0.0, 0.0);
    for p in 0..first.len() {
        if !used[p] {
            used[p] = true;
            s += first[p] * distinct_assignment(rest, used);
            used[p] = false;
        }
    }
    s
}

/// `R_{2k}` of the direct sum from the set-partition formula: every partition
/// of the `2k` trace factors, each block evaluated as a per-sector average of
/// `T1^{a} conj(T1)^{b}` and blocks placed in distinct sectors.
pub fn general_r2k_partition(se: &SpectralEnsemble, k: usize, t: f64) -> Result<f64> {
    require_data(se)?;
    if k == 0 || k > 2 {
        return Err(Error::Unsupported(format!("partition decomposition implemented for k = 1, 2; got {k}")));
    }
    let ts = trace_sums(se, t);
    let n = ts.realizations() as f64;
    let avg = |a: usize, b: usize| -> Vec<Complex64> {
        (0..se.num_sectors())
            .map(|p| {
                ts.t1.iter().map(|row| row[p].powu(a as u32) * row[p].conj().powu(b as u32)).sum::<Complex64>() / n
            })
            .collect()
    };
    let mut total = Complex64::new(0.0, 0.0);
    for part in set_partitions(2 * k) {
        let blocks: Vec<Vec<Complex64>> = part
            .iter()
            .map(|b| {
                let plus = b.iter().filter(|&&i| i < k).count();
                avg(plus, b.len() - plus)
            })
            .collect();
        total += distinct_assignment(&blocks, &mut vec![false; se.num_sectors()]);
    }
    Ok(total.re)
}

/// Analytic first frame potential assembled from per-sector `R_1`, `R_2`.
pub fn f1_analytic(se: &SpectralEnsemble, times: &[f64]) -> Result<ObservableSeries> {
    require_data(se)?;
    let mut out = ObservableSeries::new("f1_analytic", se.realizations());
    for &t in times {
        let (_, feats) = features_at(se, t);
        let dims = se.dims.clone();
        let (v, s) = jackknife(&feats, |m| SectorMoments::from_features(&dims, m).f1());
        out.push(t, v, s);
    }
    Ok(out)
}
