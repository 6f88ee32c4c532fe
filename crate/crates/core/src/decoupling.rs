//! Page and Hayden-Preskill decoupling with charge conservation: the
//! G-function, purities, 2-Renyi conditional mutual information, decoupling
//! margins, Knill-Laflamme statistics and the approximate Eastin-Knill bound.

use std::io::Write;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{fmt17, mean_se};
use crate::ensembles::sample_haar_unitary;
use crate::error::{domain, Error, Result};
use crate::hilbert::{CMatrix, ChargeBasis};
use crate::rng::{substream, Purpose};
use crate::weingarten::ratio_to_f64;

fn binom_big(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `G(n_A, n_B, q) = sum_f C(n_A, f) C(n_B, q - f)^2` as an exact big integer.
pub fn g_function_big(n_a: usize, n_b: usize, q: usize) -> Result<BigUint> {
    if q > n_a + n_b {
        return domain(format!("charge {q} exceeds {} qubits", n_a + n_b));
    }
    let lo = q.saturating_sub(n_b);
    let hi = n_a.min(q);
    Ok((lo..=hi).map(|f| binom_big(n_a, f) * binom_big(n_b, q - f).pow(2)).sum())
}

pub fn g_function(n_a: usize, n_b: usize, q: usize) -> Result<u128> {
    g_function_big(n_a, n_b, q)?
        .to_u128()
        .ok_or_else(|| Error::Overflow(format!("G({n_a}, {n_b}, {q}) does not fit in 128 bits")))
}

fn big(x: BigUint) -> BigRational {
    BigRational::from_integer(x.into())
}

fn ratio(n: BigUint, d: BigUint) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Average purity of `rho_A` for a random state in the charge-`q` sector of
/// `n_A + n_B` qubits, `(G(n_A,n_B,q) + G(n_B,n_A,q)) / (d_q (d_q + 1))`.
/// For a state drawn uniformly from the sector this is exact.
pub fn page_purity_analytic(n_a: usize, n_b: usize, q: usize) -> Result<f64> {
    let d = binom_big(n_a + n_b, q);
    if q > n_a + n_b || d < BigUint::from(2u32) {
        return Err(Error::DegenerateSector(format!("sector q={q} of {} qubits has dimension below 2", n_a + n_b)));
    }
    let num = g_function_big(n_a, n_b, q)? + g_function_big(n_b, n_a, q)?;
    Ok(ratio_to_f64(&ratio(num, &d * (&d + 1u32))))
}

/// Unitary ensemble used to scramble the initial state in [`page_purity_mc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scrambler {
    Haar,
    U1Haar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageEstimate {
    pub purity: f64,
    pub std_error: f64,
    /// `d_A * purity - 1`, the bound on the averaged squared one-norm distance
    /// of `rho_A` from the maximally mixed state.
    pub one_norm_bound: f64,
    pub realizations: usize,
}

/// Computational basis state `|bits>` of `n` qubits, qubit 1 most significant.
pub fn product_state(n: usize, bits: usize) -> Result<Vec<Complex64>> {
    if n > crate::hilbert::MAX_QUBITS || bits >= 1 << n {
        return domain(format!("basis state {bits} out of range for {n} qubits"));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); 1 << n];
    v[bits] = Complex64::new(1.0, 0.0);
    Ok(v)
}

/// Purity of the first `n_a` qubits of a pure state.
pub fn subsystem_purity(state: &[Complex64], n_a: usize) -> f64 {
    let n_b = (state.len().trailing_zeros() as usize) - n_a;
    let m = CMatrix::from_fn(1 << n_a, 1 << n_b, |i, j| state[(i << n_b) | j]);
    let rho = &m * m.adjoint();
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// Monte Carlo subsystem purity after scrambling `state` on `n_a + n_b`
/// qubits. For the U(1) scrambler the state must lie in one charge sector.
pub fn page_purity_mc(
    n_a: usize,
    n_b: usize,
    state: &[Complex64],
    scrambler: Scrambler,
    realizations: usize,
    seed: u64,
) -> Result<PageEstimate> {
    let n = n_a + n_b;
    if n > 14 || state.len() != 1 << n {
        return domain(format!("state length {} does not match {n} qubits (at most 14)", state.len()));
    }
    let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return domain(format!("initial state has squared norm {norm}, expected 1"));
    }
    if realizations == 0 {
        return Err(Error::NoData("no realizations requested".into()));
    }
    let basis = ChargeBasis::new(n)?;
    let support: Vec<usize> = (0..state.len()).filter(|&g| state[g].norm() > 0.0).collect();
    let q = basis.to_sector(support[0]).0;
    if scrambler == Scrambler::U1Haar && support.iter().any(|&g| basis.to_sector(g).0 != q) {
        return domain("initial state mixes charge sectors");
    }
    let purities: Vec<f64> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let out = match scrambler {
                Scrambler::Haar => {
                    let u = sample_haar_unitary(1 << n, &mut substream(seed, Purpose::Haar, r, 0));
                    let v = u * nalgebra::DVector::from_column_slice(state);
                    v.iter().copied().collect::<Vec<_>>()
                }
                Scrambler::U1Haar => {
                    let states = basis.sector_states(q);
                    let u = sample_haar_unitary(states.len(), &mut substream(seed, Purpose::U1Haar, r, q as u64));
                    let local = nalgebra::DVector::from_iterator(states.len(), states.iter().map(|&g| state[g]));
                    let v = u * local;
                    let mut full = vec![Complex64::new(0.0, 0.0); 1 << n];
                    for (i, &g) in states.iter().enumerate() {
                        full[g] = v[i];
                    }
                    full
                }
            };
            subsystem_purity(&out, n_a)
        })
        .collect();
    let (purity, std_error) = mean_se(&purities);
    Ok(PageEstimate { purity, std_error, one_norm_bound: (1u64 << n_a) as f64 * purity - 1.0, realizations })
}

/// Hayden-Preskill setup with fixed charges: `A` (`n_a` qubits, charge
/// `m_a`) and `B` (`n_b`, `m_b`) are scrambled into `C` (`n_c`) and `D` (`n_d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HpConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub n_c: usize,
    pub n_d: usize,
    pub m_a: usize,
    pub m_b: usize,
}

impl HpConfig {
    pub fn new(n_a: usize, n_b: usize, n_c: usize, n_d: usize, m_a: usize, m_b: usize) -> Result<Self> {
        let c = Self { n_a, n_b, n_c, n_d, m_a, m_b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a + self.n_b != self.n_c + self.n_d {
            return domain(format!(
                "n_A + n_B = {} must equal n_C + n_D = {}",
                self.n_a + self.n_b,
                self.n_c + self.n_d
            ));
        }
        if self.m_a > self.n_a {
            return domain(format!("m_A = {} exceeds n_A = {}", self.m_a, self.n_a));
        }
        if self.m_b > self.n_b {
            return domain(format!("m_B = {} exceeds n_B = {}", self.m_b, self.n_b));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m_a + self.m_b
    }

    pub fn total_qubits(&self) -> usize {
        self.n_c + self.n_d
    }

    pub fn tilde_d_a(&self) -> BigUint {
        binom_big(self.n_a, self.m_a)
    }

    pub fn tilde_d_b(&self) -> BigUint {
        binom_big(self.n_b, self.m_b)
    }

    pub fn d_q(&self) -> BigUint {
        binom_big(self.total_qubits(), self.m())
    }

    /// `(G(n_C, n_D, m), G(n_D, n_C, m))`
    fn g_pair(&self) -> (BigUint, BigUint) {
        let m = self.m();
        (
            g_function_big(self.n_c, self.n_d, m).expect("m within range"),
            g_function_big(self.n_d, self.n_c, m).expect("m within range"),
        )
    }
}

/// Leading large-`d_q` closed forms or the exact Haar averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurityOrder {
    Leading,
    Exact,
}

/// Average purities of the Hayden-Preskill state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpPurities {
    /// `Tr rho_{A-bar C}^2`
    pub purity_ac: f64,
    /// `Tr rho_C^2`
    pub purity_c: f64,
    /// `Tr rho_{A-bar}^2 = 1 / d~_A`
    pub purity_a: f64,
}

impl HpPurities {
    pub fn purity_c_over_da(&self) -> f64 {
        self.purity_c * self.purity_a
    }
}

fn hp_purities_exact(cfg: &HpConfig, order: PurityOrder) -> Result<(BigRational, BigRational, BigRational)> {
    cfg.validate()?;
    let (x, y) = cfg.g_pair();
    let (x, y) = (big(x), big(y));
    let da = big(cfg.tilde_d_a());
    let db = big(cfg.tilde_d_b());
    let d = big(cfg.d_q());
    let one = BigRational::one();
    let (w1, w2) = match order {
        PurityOrder::Leading => (one.clone() / (&d * &d), BigRational::zero()),
        PurityOrder::Exact => {
            if d == one {
                // one-dimensional sector: U is a phase, both wirings coincide
                (one.clone() / BigRational::from_integer(2.into()), BigRational::zero())
            } else {
                let d2m1 = &d * &d - &one;
                (one.clone() / &d2m1, -(one.clone() / (&d * &d2m1)))
            }
        }
    };
    let ac = &w1 * (&x / &da + &y / &db) + &w2 * (&x / &db + &y / &da);
    let c = &w1 * (&x + &y / (&da * &db)) + &w2 * (&x / (&da * &db) + &y);
    Ok((ac, c, one / da))
}

pub fn hp_purities(cfg: &HpConfig, order: PurityOrder) -> Result<HpPurities> {
    let (ac, c, a) = hp_purities_exact(cfg, order)?;
    Ok(HpPurities { purity_ac: ratio_to_f64(&ac), purity_c: ratio_to_f64(&c), purity_a: ratio_to_f64(&a) })
}

/// `d~_A G(n_D, n_C, m) / (d~_B G(n_C, n_D, m))`; small values mean the
/// reference decouples from `C`.
pub fn decoupling_margin(cfg: &HpConfig) -> Result<f64> {
    cfg.validate()?;
    let (x, y) = cfg.g_pair();
    Ok(ratio_to_f64(&ratio(cfg.tilde_d_a() * y, cfg.tilde_d_b() * x)))
}

/// 2-Renyi conditional mutual information in bits, or saturation when the
/// decoupling margin reaches 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cmi2 {
    Bits(f64),
    Saturated { margin: f64 },
}

impl Cmi2 {
    pub fn bits(self) -> Option<f64> {
        match self {
            Cmi2::Bits(b) => Some(b),
            Cmi2::Saturated { .. } => None,
        }
    }

    pub fn is_saturated(self) -> bool {
        matches!(self, Cmi2::Saturated { .. })
    }
}

/// Closed form `-log2(1 - r)` with `r` the decoupling margin.
pub fn hp_cmi2(cfg: &HpConfig) -> Result<Cmi2> {
    let r = decoupling_margin(cfg)?;
    Ok(if r >= 1.0 { Cmi2::Saturated { margin: r } } else { Cmi2::Bits(-(1.0 - r).log2()) })
}

/// `I2 = log2(Tr rho_AC^2 / (Tr rho_A^2 Tr rho_C^2))` from the averaged
/// purities, with either purity order. With leading purities this is
/// `log2((1 + r) / (1 + r / d~_A^2))`.
pub fn hp_cmi2_from_purities(cfg: &HpConfig, order: PurityOrder) -> Result<f64> {
    let (ac, c, a) = hp_purities_exact(cfg, order)?;
    Ok(ratio_to_f64(&(ac / (c * a))).log2())
}

/// Non-symmetric baseline `log2((d_A^3 d_B + d_A d_B d_D^2) / (d_A d_B + d_A d_B d_D^2))`.
pub fn haar_cmi2_baseline(d_a: f64, d_b: f64, d_d: f64) -> f64 {
    ((d_a.powi(3) * d_b + d_a * d_b * d_d * d_d) / (d_a * d_b + d_a * d_b * d_d * d_d)).log2()
}

/// Non-symmetric leading purity `1/(d_A d_C) + 1/(d_B d_D)`.
pub fn haar_purity_ac(d_a: f64, d_b: f64, d_c: f64, d_d: f64) -> f64 {
    1.0 / (d_a * d_c) + 1.0 / (d_b * d_d)
}

/// Monte Carlo purities and CMI of explicitly constructed HP states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpEstimate {
    pub purity_ac: f64,
    pub purity_ac_se: f64,
    pub purity_c: f64,
    pub purity_c_se: f64,
    /// `log2(E Tr rho_AC^2 / (E Tr rho_A^2 E Tr rho_C^2))`
    pub cmi2: f64,
    pub cmi2_se: f64,
    pub realizations: usize,
}

/// Sampled HP state purities. Each realization draws a Haar unitary on the
/// charge-`m` sector of `CD`; the reference `A-bar B-bar` is maximally
/// entangled with the charge-`m_A` and charge-`m_B` subspaces of `A` and `B`.
pub fn hp_monte_carlo(cfg: &HpConfig, realizations: usize, seed: u64) -> Result<HpEstimate> {
    cfg.validate()?;
    let n = cfg.total_qubits();
    if n > 12 {
        return domain(format!("explicit HP states are limited to 12 qubits, got {n}"));
    }
    if realizations < 2 {
        return Err(Error::NoData("at least 2 realizations are required".into()));
    }
    let basis = ChargeBasis::new(n)?;
    let a_states = ChargeBasis::new(cfg.n_a)?.sector_states(cfg.m_a).to_vec();
    let b_states = ChargeBasis::new(cfg.n_b)?.sector_states(cfg.m_b).to_vec();
    let m = cfg.m();
    let sector = basis.sector_states(m).to_vec();
    let (da, db) = (a_states.len(), b_states.len());
    let (nc, nd) = (cfg.n_c, cfg.n_d);
    let norm = 1.0 / ((da * db) as f64).sqrt();
    let inputs: Vec<usize> = a_states
        .iter()
        .flat_map(|&a| b_states.iter().map(move |&b| (a << cfg.n_b) | b))
        .map(|g| basis.to_sector(g).1)
        .collect();
    let rows: Vec<(f64, f64)> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let u = sample_haar_unitary(sector.len(), &mut substream(seed, Purpose::U1Haar, r, m as u64));
            // psi(a-bar, b-bar, c, d)
            let mut m_ac = CMatrix::zeros(da << nc, db << nd);
            let mut m_c = CMatrix::zeros(1 << nc, (da * db) << nd);
            for ia in 0..da {
                for ib in 0..db {
                    let col = inputs[ia * db + ib];
                    for (s, &g) in sector.iter().enumerate() {
                        let amp = u[(s, col)] * norm;
                        let (c, d) = (g >> nd, g & ((1 << nd) - 1));
                        m_ac[((ia << nc) | c, (ib << nd) | d)] = amp;
                        m_c[(c, ((ia * db + ib) << nd) | d)] = amp;
                    }
                }
            }
            let frob = |mm: &CMatrix| -> f64 {
                let g = mm.adjoint() * mm;
                g.iter().map(|z| z.norm_sqr()).sum()
            };
            (frob(&m_ac), frob(&m_c))
        })
        .collect();
    let ac: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (pac, pac_se) = mean_se(&ac);
    let (pc, pc_se) = mean_se(&c);
    let cmi = (pac * da as f64 / pc).log2();
    // delta method for log2(mean_ac / mean_c), using the sample covariance
    let nf = realizations as f64;
    let cov = ac.iter().zip(&c).map(|(x, y)| (x - pac) * (y - pc)).sum::<f64>() / (nf - 1.0) / nf;
    let var = (pac_se / pac).powi(2) + (pc_se / pc).powi(2) - 2.0 * cov / (pac * pc);
    Ok(HpEstimate {
        purity_ac: pac,
        purity_ac_se: pac_se,
        purity_c: pc,
        purity_c_se: pc_se,
        cmi2: cmi,
        cmi2_se: var.max(0.0).sqrt() / std::f64::consts::LN_2,
        realizations,
    })
}

/// The `m = 2`, `m_A = m_B = 1` comparison: `G(n_C,n_D,2)/n_A` against
/// `G(n_D,n_C,2)/n_B`, exactly and to leading order in `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallChargeProfile {
    pub exact_lhs: f64,
    pub exact_rhs: f64,
    pub asymptotic_lhs: f64,
    pub asymptotic_rhs: f64,
}

impl SmallChargeProfile {
    /// Decoupling margin `rhs / lhs`.
    pub fn margin(&self) -> f64 {
        self.exact_rhs / self.exact_lhs
    }

    /// Whether the leading-order terms favour decoupling.
    pub fn asymptotically_decoupled(&self) -> bool {
        self.asymptotic_lhs > self.asymptotic_rhs
    }
}

pub fn small_charge_profile(n_a: usize, n_b: usize, n_c: usize, n_d: usize) -> Result<SmallChargeProfile> {
    HpConfig::new(n_a, n_b, n_c, n_d, 1, 1)?;
    let c2 = |n: usize| (n * n.saturating_sub(1) / 2) as f64;
    let (a, b, c, d) = (n_a as f64, n_b as f64, n_c as f64, n_d as f64);
    Ok(SmallChargeProfile {
        exact_lhs: (c2(n_d).powi(2) + c * d * d + c2(n_c)) / a,
        exact_rhs: (c2(n_c).powi(2) + d * c * c + c2(n_d)) / b,
        asymptotic_lhs: d.powi(4) / (4.0 * a),
        asymptotic_rhs: c.powi(4) / (4.0 * b),
    })
}

/// `m_A / (2 D)`: the approximate Eastin-Knill lower bound on the worst-case
/// infidelity with logical charge range `m_A` and unit physical ranges.
pub fn eastin_knill_bound(m_a: usize, d: usize) -> Result<f64> {
    if d == 0 {
        return domain("the number of physical qubits must be positive");
    }
    Ok(m_a as f64 / (2.0 * d as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkConsistency {
    /// `m_A^2 / (4 D^2)`
    pub lhs: f64,
    /// decoupling margin
    pub rhs: f64,
    pub satisfied: bool,
}

/// Compares the squared Eastin-Knill bound with the decoupling margin. This
/// is a heuristic consistency relation, reported rather than enforced.
pub fn ek_consistency_check(cfg: &HpConfig) -> Result<EkConsistency> {
    let lhs = eastin_knill_bound(cfg.m_a, cfg.total_qubits())?.powi(2);
    let rhs = decoupling_margin(cfg)?;
    Ok(EkConsistency { lhs, rhs, satisfied: lhs <= rhs })
}

/// Flat summary of one HP configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub n_a: usize,
    pub n_b: usize,
    pub n_c: usize,
    pub n_d: usize,
    pub m_a: usize,
    pub m_b: usize,
    pub purity_ac: f64,
    pub purity_c: f64,
    pub purity_a: f64,
    /// Closed-form CMI in bits; `None` when saturated.
    pub cmi2: Option<f64>,
    pub saturated: bool,
    /// CMI from the purities of the chosen order.
    pub cmi2_from_purities: f64,
    pub margin: f64,
    pub ek_bound: f64,
}

impl DecouplingReport {
    pub fn new(cfg: &HpConfig, order: PurityOrder) -> Result<Self> {
        let p = hp_purities(cfg, order)?;
        let cmi = hp_cmi2(cfg)?;
        Ok(Self {
            n_a: cfg.n_a,
            n_b: cfg.n_b,
            n_c: cfg.n_c,
            n_d: cfg.n_d,
            m_a: cfg.m_a,
            m_b: cfg.m_b,
            purity_ac: p.purity_ac,
            purity_c: p.purity_c,
            purity_a: p.purity_a,
            cmi2: cmi.bits(),
            saturated: cmi.is_saturated(),
            cmi2_from_purities: hp_cmi2_from_purities(cfg, order)?,
            margin: decoupling_margin(cfg)?,
            ek_bound: eastin_knill_bound(cfg.m_a, cfg.total_qubits())?,
        })
    }

    pub const CSV_HEADER: &'static str =
        "n_a,n_b,n_c,n_d,m_a,m_b,purity_ac,purity_c,purity_a,cmi2,saturated,cmi2_from_purities,margin,ek_bound";

    pub fn write_csv_row<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_a,
            self.n_b,
            self.n_c,
            self.n_d,
            self.m_a,
            self.m_b,
            fmt17(self.purity_ac),
            fmt17(self.purity_c),
            fmt17(self.purity_a),
            self.cmi2.map_or_else(|| "NaN".to_string(), fmt17),
            self.saturated,
            fmt17(self.cmi2_from_purities),
            fmt17(self.margin),
            fmt17(self.ek_bound)
        )?;
        Ok(())
    }
}

/// Where the Knill-Laflamme matrix elements are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlSetup {
    /// Haar encoding on `2^qubits` dimensions; codewords are basis states.
    Haar { qubits: usize },
    /// U(1)-Haar encoding; codewords are basis states of charge `charge`.
    U1Haar { qubits: usize, charge: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlStatistics {
    pub mean: Complex64,
    /// Standard error of each component of the mean.
    pub mean_se: f64,
    /// `E|x - E x|^2` estimated from the samples.
    pub variance: f64,
    pub variance_se: f64,
    pub predicted_mean: Complex64,
    /// `(<OO^dag> - |<O>|^2 delta_ab) / (d + 1)`
    pub predicted_variance: f64,
    /// Exact Haar variance; differs from the above when `a != b`.
    pub exact_variance: f64,
    pub dim: usize,
    pub realizations: usize,
}

/// Statistics of `<beta_a|O|beta_b>` over random encodings.
pub fn kl_statistics(setup: KlSetup, op: &CMatrix, a: usize, b: usize, realizations: usize, seed: u64) -> Result<KlStatistics> {
    if realizations < 2 {
        return Err(Error::NoData("at least 2 realizations are required".into()));
    }
    let qubits = match setup {
        KlSetup::Haar { qubits } | KlSetup::U1Haar { qubits, .. } => qubits,
    };
    if qubits == 0 || qubits > 12 {
        return domain(format!("qubit count {qubits} outside 1..=12"));
    }
    let l = 1usize << qubits;
    if op.nrows() != l || op.ncols() != l {
        return domain(format!("operator must be {l}x{l}"));
    }
    if a >= l || b >= l {
        return domain(format!("codeword index out of range 0..{l}"));
    }
    let (o, ia, ib, stream) = match setup {
        KlSetup::Haar { .. } => (op.clone(), a, b, 0u64),
        KlSetup::U1Haar { charge, .. } => {
            let basis = ChargeBasis::new(qubits)?;
            if charge > qubits {
                return domain(format!("charge {charge} exceeds {qubits} qubits"));
            }
            let (qa, ia) = basis.to_sector(a);
            let (qb, ib) = basis.to_sector(b);
            if qa != charge || qb != charge {
                return domain(format!("codewords have charges {qa} and {qb}, expected {charge}"));
            }
            let states = basis.sector_states(charge);
            let o = CMatrix::from_fn(states.len(), states.len(), |i, j| op[(states[i], states[j])]);
            (o, ia, ib, charge as u64)
        }
    };
    let d = o.nrows();
    let xs: Vec<Complex64> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let u = sample_haar_unitary(d, &mut substream(seed, Purpose::Encoding, r, stream));
            let ub = u.column(ib);
            u.column(ia).dotc(&(&o * ub))
        })
        .collect();
    let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
    let (mre, sre) = mean_se(&re);
    let (mim, sim) = mean_se(&im);
    let mean = Complex64::new(mre, mim);
    let nf = realizations as f64;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).norm_sqr()).collect();
    let (dev_mean, dev_se) = mean_se(&dev);
    let variance = dev_mean * nf / (nf - 1.0);

    let df = d as f64;
    let avg = o.trace() / df;
    let avg_oo = (&o * o.adjoint()).trace().re / df;
    let delta = if ia == ib { 1.0 } else { 0.0 };
    let predicted_variance = (avg_oo - avg.norm_sqr() * delta) / (df + 1.0);
    let exact_variance = if ia == ib || d == 1 {
        predicted_variance
    } else {
        df * (avg_oo - avg.norm_sqr()) / (df * df - 1.0)
    };
    Ok(KlStatistics {
        mean,
        mean_se: sre.max(sim),
        variance,
        variance_se: dev_se,
        predicted_mean: avg * delta,
        predicted_variance,
        exact_variance,
        dim: d,
        realizations,
    })
}
