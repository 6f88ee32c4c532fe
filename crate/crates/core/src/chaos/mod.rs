//! Chaos diagnostics: spectral form factors and their sector decompositions,
//! frame potentials, k-invariance, OTOCs and densities of states.

mod dos;
mod form_factor;
mod frame;
mod otoc;

pub use dos::{density_of_states, fit_low_energy_exponent, pooled_energies, ExponentFit, Histogram};
pub use form_factor::{
    f1_analytic, form_factor, general_r2k_partition, r2_decomposition_check, r4_decomposition_check,
    r4_representations, trace_sums, FormFactorKind, FormFactorValue, R4Check, R4Mode, TraceSums,
};
pub use frame::{
    block_overlap, f1_decomposition_check, frame_potential, haar_conjugated, k_invariance, ConjugationScope, F1Check,
    FrameEstimate, KInvariance, UnitarySamples,
};
pub use otoc::{
    haar_four_point_sector, otoc, otoc_kinv_approx, pauli_law_literal, sector_two_point_from_r2, u1_haar_four_point,
    u1_haar_two_point,
    OtocEstimate, OtocSeries,
};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Whole Hilbert space or a single charge sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    Whole,
    Sector(usize),
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" | "all" => Ok(Scope::Whole),
            other => other
                .trim_start_matches('q')
                .parse::<usize>()
                .map(Scope::Sector)
                .map_err(|_| Error::Parse(format!("scope must be 'whole' or a sector number, got '{s}'"))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Whole => f.write_str("whole"),
            Scope::Sector(q) => write!(f, "{q}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// Time grid `t_min..=t_max` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, points: usize, spacing: Spacing) -> Result<Self> {
        let g = Self { t_min, t_max, points, spacing };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return domain(format!("a time grid needs at least 2 points, got {}", self.points));
        }
        if !(self.t_max > self.t_min) {
            return domain(format!("t_max {} must exceed t_min {}", self.t_max, self.t_min));
        }
        if self.spacing == Spacing::Log && !(self.t_min > 0.0) {
            return domain(format!("log spacing needs t_min > 0, got {}", self.t_min));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.t_min + f * (self.t_max - self.t_min),
                    Spacing::Log => (self.t_min.ln() + f * (self.t_max.ln() - self.t_min.ln())).exp(),
                }
            })
            .collect()
    }
}

/// Estimated values of a diagnostic on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub realizations: usize,
}

impl ObservableSeries {
    pub fn new(label: impl Into<String>, realizations: usize) -> Self {
        Self { label: label.into(), times: Vec::new(), values: Vec::new(), std_errors: Vec::new(), realizations }
    }

    pub fn push(&mut self, t: f64, value: f64, std_error: f64) {
        self.times.push(t);
        self.values.push(value);
        self.std_errors.push(std_error);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest value, ignoring masked (NaN) points.
    pub fn max_finite(&self) -> Option<f64> {
        self.values.iter().copied().filter(|v| v.is_finite()).reduce(f64::max)
    }

    /// CSV with header `t,value,std_error,n`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,value,std_error,n")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt17(self.times[i]),
                fmt17(self.values[i]),
                fmt17(self.std_errors[i]),
                self.realizations
            )?;
        }
        Ok(())
    }
}

/// Float with 17 significant digits; `NaN` for masked points.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Pairwise (tree) summation, fixed by the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

pub fn pairwise_sum_c(xs: &[Complex64]) -> Complex64 {
    match xs.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum_c(&xs[..n / 2]) + pairwise_sum_c(&xs[n / 2..]),
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Mean of complex samples and standard error of its real part.
pub fn mean_se_c(xs: &[Complex64]) -> (Complex64, f64) {
    let n = xs.len();
    let mean = pairwise_sum_c(xs) / n as f64;
    let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
    (mean, mean_se(&re).1)
}

/// Delete-one jackknife of a smooth function of sample means. Each row of
/// `features` is one realization; returns the full-sample estimate and its
/// jackknife standard error.
pub fn jackknife<F>(features: &[Vec<Complex64>], g: F) -> (f64, f64)
where
    F: Fn(&[Complex64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let n = features.len();
    let m = features.first().map_or(0, Vec::len);
    let totals: Vec<Complex64> = (0..m)
        .map(|j| pairwise_sum_c(&features.iter().map(|f| f[j]).collect::<Vec<_>>()))
        .collect();
    let full: Vec<Complex64> = totals.iter().map(|s| s / n as f64).collect();
    let value = g(&full);
    if n < 2 {
        return (value, 0.0);
    }
    let loo: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|r| {
            let means: Vec<Complex64> = (0..m).map(|j| (totals[j] - features[r][j]) / (n - 1) as f64).collect();
            g(&means)
        })
        .collect();
    let (lm, _) = mean_se(&loo);
    let ss: Vec<f64> = loo.iter().map(|x| (x - lm).powi(2)).collect();
    let var = (n - 1) as f64 / n as f64 * pairwise_sum(&ss);
    (value, var.sqrt())
}

/// `|lhs - rhs| / |lhs|`, or NaN when `|lhs|` is below ten standard errors.
pub fn masked_relative_error(lhs: f64, lhs_se: f64, rhs: f64) -> f64 {
    if lhs.abs() < 10.0 * lhs_se || lhs == 0.0 {
        f64::NAN
    } else {
        (lhs - rhs).abs() / lhs.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = TimeGrid::new(0.1, 100.0, 4, Spacing::Log).unwrap();
        let v = g.values();
        assert!((v[0] - 0.1).abs() < 1e-15 && (v[3] - 100.0).abs() < 1e-12);
        assert!((v[1] - 1.0).abs() < 1e-12);
        assert!(TimeGrid::new(0.0, 1.0, 4, Spacing::Log).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1, Spacing::Linear).is_err());
    }

    #[test]
    fn csv_format() {
        let mut s = ObservableSeries::new("x", 3);
        s.push(0.5, 1.0 / 3.0, f64::NAN);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,value,std_error,n\n5.0000000000000000e-1,3.3333333333333331e-1,NaN,3\n");
    }

    #[test]
    fn jackknife_of_mean_matches_standard_error() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let feats: Vec<Vec<Complex64>> = xs.iter().map(|&x| vec![Complex64::new(x, 0.0)]).collect();
        let (v, se) = jackknife(&feats, |m| m[0].re);
        let (m, s) = mean_se(&xs);
        assert!((v - m).abs() < 1e-12 && (se - s).abs() < 1e-12);
    }
}
