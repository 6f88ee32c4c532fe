//! Densities of states and their low-energy power laws.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{fmt17, Scope};
use crate::ensembles::SpectralEnsemble;
use crate::error::{domain, Error, Result};

/// Histogram with `density = count / bin width`, so the density integrates
/// to the number of pooled eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if bins < 10 {
            return domain(format!("at least 10 bins are required, got {bins}"));
        }
        if values.is_empty() {
            return Err(Error::NoData("no eigenvalues to bin".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let density = counts.iter().map(|&c| c as f64 / width).collect();
        Ok(Self { edges, counts, density })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV with header `bin_left,bin_right,count,density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_left,bin_right,count,density")?;
        for i in 0..self.counts.len() {
            writeln!(w, "{},{},{},{}", fmt17(self.edges[i]), fmt17(self.edges[i + 1]), self.counts[i], fmt17(self.density[i]))?;
        }
        Ok(())
    }
}

/// Eigenvalues in `scope` pooled over realizations, optionally measured from
/// each realization's own ground energy.
pub fn pooled_energies(se: &SpectralEnsemble, scope: Scope, shift_to_ground: bool) -> Result<Vec<f64>> {
    if let Scope::Sector(q) = scope {
        if q >= se.num_sectors() {
            return domain(format!("sector {q} out of range 0..{}", se.num_sectors()));
        }
    }
    let mut out = Vec::new();
    for real in &se.eigenvalues {
        let vals: Vec<f64> = match scope {
            Scope::Whole => real.iter().flatten().copied().collect(),
            Scope::Sector(q) => real[q].clone(),
        };
        let shift = if shift_to_ground { vals.iter().copied().fold(f64::INFINITY, f64::min) } else { 0.0 };
        out.extend(vals.into_iter().map(|v| v - shift));
    }
    Ok(out)
}

pub fn density_of_states(se: &SpectralEnsemble, bins: usize, scope: Scope, shift_to_ground: bool) -> Result<Histogram> {
    Histogram::from_values(&pooled_energies(se, scope, shift_to_ground)?, bins)
}

/// Fitted `rho(E) ~ E^alpha` near the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub alpha: f64,
    /// Standard error of the regression slope.
    pub std_error: f64,
    pub points: usize,
}

/// Power-law exponent of the density of states near the ground state.
///
/// Energies are measured from each realization's ground energy and pooled;
/// the ground levels themselves (shifted energy 0) are dropped. The lowest
/// `fraction` of the remaining values gives the counting function
/// `N(E) ~ E^(alpha + 1)`, whose log-log slope is fitted by least squares.
pub fn fit_low_energy_exponent(se: &SpectralEnsemble, scope: Scope, fraction: f64) -> Result<ExponentFit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return domain(format!("fit fraction must lie in (0, 1], got {fraction}"));
    }
    let mut e: Vec<f64> = pooled_energies(se, scope, true)?.into_iter().filter(|&v| v > 1e-12).collect();
    e.sort_by(f64::total_cmp);
    let m = ((e.len() as f64 * fraction) as usize).min(e.len());
    if m < 3 {
        return Err(Error::NoData(format!("only {m} low-energy levels available for the fit")));
    }
    let xs: Vec<f64> = e[..m].iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = (1..=m).map(|i| (i as f64).ln()).collect();
    let (slope, se_slope) = linear_fit(&xs, &ys);
    Ok(ExponentFit { alpha: slope - 1.0, std_error: se_slope, points: m })
}

/// Least-squares slope and its standard error.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let se = if n > 2.0 { (resid / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleKind;

    #[test]
    fn histogram_integrates_to_count() {
        let vals: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let h = Histogram::from_values(&vals, 23).unwrap();
        let integral: f64 = h.density.iter().zip(h.edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
        assert!((integral - 1000.0).abs() < 1e-9);
        assert_eq!(h.total(), 1000);
        assert!(Histogram::from_values(&vals, 5).is_err());
    }

    #[test]
    fn recovers_known_exponent() {
        // levels placed at the quantiles of rho(E) ~ E^(1/2) on [0, 1]
        let n = 4000;
        let ev: Vec<f64> = (0..=n).map(|i| (i as f64 / n as f64).powf(1.0 / 1.5)).collect();
        let se = SpectralEnsemble::from_eigenvalues(EnsembleKind::GuePerSector, 0, vec![ev.len()], vec![vec![ev]]).unwrap();
        let fit = fit_low_energy_exponent(&se, Scope::Whole, 0.1).unwrap();
        assert!((fit.alpha - 0.5).abs() < 0.02, "{fit:?}");
    }
}
