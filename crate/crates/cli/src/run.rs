use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use chargelab::chaos::{
    density_of_states, f1_decomposition_check, fit_low_energy_exponent, fmt17, form_factor, frame_potential, k_invariance, otoc,
    otoc_kinv_approx, pooled_energies, r2_decomposition_check, r4_decomposition_check, ObservableSeries, Scope, UnitarySamples,
};
use chargelab::decoupling::{
    ek_consistency_check, hp_monte_carlo, kl_statistics, page_purity_analytic, page_purity_mc, product_state, DecouplingReport,
    HpConfig, KlSetup, Scrambler,
};
use chargelab::ensembles::{sample_unitary_blocks, spectral_ensemble, EnsembleKind, HamiltonianEnsemble};
use chargelab::hilbert::{CMatrix, ChargeBasis};
use chargelab::weingarten::{format_terms, operator_moment, parse_word};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Diagnostic, KlKind, RunConfig};
use crate::plot::{svg, Curve};

#[derive(Debug)]
pub enum RunError {
    Config(Vec<Diagnostic>),
    Numerical(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(d) => {
                write!(f, "invalid configuration")?;
                for d in d {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
            RunError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<chargelab::Error> for RunError {
    fn from(e: chargelab::Error) -> Self {
        match e {
            chargelab::Error::Io(e) => RunError::Io(e.to_string()),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// What a finished run left on disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub output: PathBuf,
    /// CSV file name to SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
    pub results: BTreeMap<String, Value>,
    /// Human-readable text printed by the runner.
    pub text: String,
}

#[derive(Default)]
struct Artifacts {
    csv: Vec<(String, Vec<u8>)>,
    plots: Vec<(String, String)>,
    results: BTreeMap<String, Value>,
    text: String,
}

impl Artifacts {
    fn series(&mut self, name: &str, s: &ObservableSeries) -> Result<(), RunError> {
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        self.csv.push((format!("{name}.csv"), buf));
        Ok(())
    }

    fn plot(&mut self, name: &str, curves: &[(&str, &ObservableSeries)], log_x: bool, log_y: bool) {
        let c: Vec<Curve> = curves.iter().map(|(l, s)| Curve { label: l, x: &s.times, y: &s.values }).collect();
        self.plots.push((format!("{name}.svg"), svg(name, &c, log_x, log_y)));
    }

    fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.to_string(), v.into());
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run an experiment on a local worker pool and write its artifacts.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| RunError::Numerical(format!("cannot start worker pool: {e}")))?;
    let art = pool.install(|| compute(cfg))?;

    std::fs::create_dir_all(&cfg.output)?;
    let mut files = BTreeMap::new();
    for (name, bytes) in &art.csv {
        std::fs::write(cfg.output.join(name), bytes)?;
        files.insert(name.clone(), hex(bytes));
    }
    if cfg.plot {
        for (name, body) in &art.plots {
            std::fs::write(cfg.output.join(name), body)?;
        }
    }
    if !art.text.is_empty() {
        std::fs::write(cfg.output.join(format!("{}.txt", cfg.experiment)), &art.text)?;
    }
    let manifest = json!({
        "config": cfg.raw,
        "experiment": cfg.experiment,
        "seed": cfg.ensemble.seed,
        "files": files,
        "results": art.results,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let mut body = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))?;
    body.push('\n');
    std::fs::write(cfg.output.join("manifest.json"), body)?;
    Ok(Outcome { output: cfg.output.clone(), files, results: art.results, text: art.text })
}

fn compute(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let times = cfg.time_grid.values();
    let mut a = Artifacts::default();
    match cfg.experiment.as_str() {
        "dos" => dos(cfg, &mut a)?,
        "sff" => {
            let se = spectral_ensemble(&cfg.ensemble)?;
            let s = ff_series(&se, cfg, cfg.scope, &times)?;
            a.series("sff", &s)?;
            a.plot("sff", &[(&cfg.form_factor.to_string(), &s)], true, true);
        }
        "sff-sectors" => {
            let se = spectral_ensemble(&cfg.ensemble)?;
            let mut all = Vec::new();
            for q in 0..se.num_sectors() {
                let s = ff_series(&se, cfg, Scope::Sector(q), &times)?;
                a.series(&format!("sff_q{q}"), &s)?;
                all.push((format!("q={q}"), s));
            }
            let curves: Vec<(&str, &ObservableSeries)> = all.iter().map(|(l, s)| (l.as_str(), s)).collect();
            a.plot("sff_sectors", &curves, true, true);
        }
        "r2-check" => {
            let se = spectral_ensemble(&cfg.ensemble)?;
            let s = r2_decomposition_check(&se, &times)?;
            a.result("max_relative_error", finite(s.max_finite().unwrap_or(f64::NAN)));
            a.series("r2_check", &s)?;
            a.plot("r2_check", &[("relative error", &s)], true, false);
        }
        "r4-check" => {
            let se = spectral_ensemble(&cfg.ensemble)?;
            let c = r4_decomposition_check(&se, &times)?;
            a.result("max_relative_error", finite(c.relative_error.max_finite().unwrap_or(f64::NAN)));
            a.result("max_representation_gap", finite(c.representation_gap.max_finite().unwrap_or(f64::NAN)));
            a.series("r4_direct", &c.direct)?;
            a.series("r4_relative_error", &c.relative_error)?;
            a.series("r4_representation_gap", &c.representation_gap)?;
            a.plot("r4_check", &[("relative error", &c.relative_error)], true, false);
        }
        "fp" | "kinv" => frame(cfg, &times, &mut a)?,
        "fp-analytic" => {
            let ens = HamiltonianEnsemble::sample(&cfg.ensemble)?;
            let c = f1_decomposition_check(&ens, &times)?;
            a.result("max_relative_error", finite(c.relative_error.max_finite().unwrap_or(f64::NAN)));
            a.series("fp_direct", &c.direct)?;
            a.series("fp_analytic", &c.analytic)?;
            a.series("fp_relative_error", &c.relative_error)?;
            a.plot("fp_analytic", &[("direct", &c.direct), ("analytic", &c.analytic)], true, true);
        }
        "otoc" => otoc_run(cfg, &times, &mut a)?,
        "page" => page(cfg, &mut a)?,
        "hp" => {
            let rep = DecouplingReport::new(&cfg.hp, cfg.order)?;
            a.result("margin", finite(rep.margin));
            a.result("saturated", rep.saturated);
            let mut buf = format!("{}\n", DecouplingReport::CSV_HEADER).into_bytes();
            rep.write_csv_row(&mut buf)?;
            a.csv.push(("hp.csv".into(), buf));
            if cfg.hp_realizations > 0 {
                let mc = hp_monte_carlo(&cfg.hp, cfg.hp_realizations, cfg.ensemble.seed)?;
                let body = format!(
                    "purity_ac,purity_ac_se,purity_c,purity_c_se,cmi2,cmi2_se,realizations\n{},{},{},{},{},{},{}\n",
                    fmt17(mc.purity_ac),
                    fmt17(mc.purity_ac_se),
                    fmt17(mc.purity_c),
                    fmt17(mc.purity_c_se),
                    fmt17(mc.cmi2),
                    fmt17(mc.cmi2_se),
                    mc.realizations
                );
                a.csv.push(("hp_monte_carlo.csv".into(), body.into_bytes()));
            }
        }
        "hp-scan" => {
            let mut buf = format!("{}\n", DecouplingReport::CSV_HEADER).into_bytes();
            let (mut n, mut m) = (Vec::new(), Vec::new());
            for cfg_n in scan_configs(cfg)? {
                let rep = DecouplingReport::new(&cfg_n, cfg.order)?;
                rep.write_csv_row(&mut buf)?;
                n.push(cfg_n.n_d as f64);
                m.push(rep.margin);
            }
            a.csv.push(("hp_scan.csv".into(), buf));
            a.plots.push(("hp_scan.svg".into(), svg("decoupling margin vs n_D", &[Curve { label: "margin", x: &n, y: &m }], false, true)));
        }
        "ek-scan" => {
            let mut buf = b"n_a,n_b,n_c,n_d,m_a,m_b,lhs,rhs,satisfied\n".to_vec();
            let mut all = true;
            for n_a in 1..=3 {
                for n_d in cfg.scan_min..=cfg.scan_max {
                    let n_c = n_d + 1;
                    let h = HpConfig::new(n_a, n_c + n_d - n_a, n_c, n_d, 1, n_d - 1)?;
                    let e = ek_consistency_check(&h)?;
                    all &= e.satisfied;
                    buf.extend(
                        format!("{},{},{},{},{},{},{},{},{}\n", h.n_a, h.n_b, h.n_c, h.n_d, h.m_a, h.m_b, fmt17(e.lhs), fmt17(e.rhs), e.satisfied)
                            .bytes(),
                    );
                }
            }
            a.result("all_satisfied", all);
            a.csv.push(("ek_scan.csv".into(), buf));
        }
        "kl" => kl(cfg, &mut a)?,
        "moment" => {
            let (word, traced) = parse_word(&cfg.word)?;
            let terms = operator_moment(&word, traced)?;
            a.result("terms", terms.len());
            a.text = format!("{}\n", format_terms(&terms));
        }
        other => return Err(RunError::Config(vec![Diagnostic::new("experiment", format!("unknown experiment '{other}'"))])),
    }
    Ok(a)
}

fn ff_series(
    se: &chargelab::ensembles::SpectralEnsemble,
    cfg: &RunConfig,
    scope: Scope,
    times: &[f64],
) -> Result<ObservableSeries, RunError> {
    let vals: Vec<_> = times.par_iter().map(|&t| form_factor(se, cfg.form_factor, t, scope)).collect::<Result<_, _>>()?;
    let mut s = ObservableSeries::new(format!("{}_{scope}", cfg.form_factor), se.realizations());
    for (&t, v) in times.iter().zip(vals) {
        s.push(t, v.value, v.std_error);
    }
    Ok(s)
}

fn dos(cfg: &RunConfig, a: &mut Artifacts) -> Result<(), RunError> {
    let se = spectral_ensemble(&cfg.ensemble)?;
    let scopes: Vec<Scope> = match cfg.scope {
        Scope::Whole => std::iter::once(Scope::Whole).chain((0..se.num_sectors()).map(Scope::Sector)).collect(),
        s => vec![s],
    };
    for scope in scopes {
        let e = pooled_energies(&se, scope, cfg.shift)?;
        let spread = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - e.iter().cloned().fold(f64::INFINITY, f64::min);
        let name = match scope {
            Scope::Whole => "dos_whole".to_string(),
            Scope::Sector(q) => format!("dos_q{q}"),
        };
        if !(spread > 1e-9) {
            // a sector whose levels all coincide has no histogram to draw
            a.result(&format!("{name}_degenerate"), true);
            continue;
        }
        let h = density_of_states(&se, cfg.bins, scope, cfg.shift)?;
        let mut buf = Vec::new();
        h.write_csv(&mut buf)?;
        a.csv.push((format!("{name}.csv"), buf));
        let centers: Vec<f64> = h.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        a.plots.push((format!("{name}.svg"), svg(&name, &[Curve { label: "density", x: &centers, y: &h.density }], false, false)));
        if let Ok(fit) = fit_low_energy_exponent(&se, scope, cfg.fraction) {
            a.result(&format!("{name}_alpha"), finite(fit.alpha));
            a.result(&format!("{name}_alpha_se"), finite(fit.std_error));
        }
    }
    Ok(())
}

/// Unitaries at time `t`. Haar and U(1)-Haar ensembles are time independent.
fn samples_at(cfg: &RunConfig, ens: Option<&HamiltonianEnsemble>, t: f64) -> Result<UnitarySamples, RunError> {
    let basis = ChargeBasis::shared(cfg.ensemble.size)?;
    let members: Vec<Vec<CMatrix>> = match ens {
        Some(e) => e.unitaries_at(t),
        None => (0..cfg.ensemble.realizations as u64)
            .into_par_iter()
            .map(|r| sample_unitary_blocks(&cfg.ensemble, r))
            .collect::<Result<_, _>>()?,
    };
    let s = match (cfg.scope, cfg.ensemble.kind) {
        (Scope::Sector(q), EnsembleKind::Haar) => {
            return Err(RunError::Config(vec![Diagnostic::new("scope", format!("full Haar has no sector {q}"))]))
        }
        (Scope::Sector(q), _) => UnitarySamples::from_dense(members.into_iter().map(|mut m| m.swap_remove(q)).collect())?,
        (Scope::Whole, EnsembleKind::Haar) => UnitarySamples::from_dense(members.into_iter().map(|mut m| m.swap_remove(0)).collect())?,
        (Scope::Whole, _) => UnitarySamples::from_blocks(basis, members)?,
    };
    Ok(s)
}

fn time_points(cfg: &RunConfig, times: &[f64]) -> Result<(Option<HamiltonianEnsemble>, Vec<f64>), RunError> {
    if cfg.ensemble.kind.is_hamiltonian() {
        Ok((Some(HamiltonianEnsemble::sample(&cfg.ensemble)?), times.to_vec()))
    } else {
        // the sampled unitary itself, which is the t = 1 point of its eigenphase spectrum
        Ok((None, vec![1.0]))
    }
}

fn frame(cfg: &RunConfig, times: &[f64], a: &mut Artifacts) -> Result<(), RunError> {
    let (ens, ts) = time_points(cfg, times)?;
    let n = cfg.ensemble.realizations;
    let mut fp = ObservableSeries::new(format!("frame_potential_k{}", cfg.k), n);
    let mut inv = ObservableSeries::new(format!("k_invariance_k{}", cfg.k), n);
    for &t in &ts {
        let s = samples_at(cfg, ens.as_ref(), t)?;
        if cfg.experiment == "kinv" {
            let k = k_invariance(&s, cfg.k, cfg.rounds, cfg.ensemble.seed, cfg.conjugation)?;
            inv.push(t, k.value, k.std_error);
            fp.push(t, k.frame.value, k.frame.std_error);
        } else {
            let f = frame_potential(&s, cfg.k)?;
            fp.push(t, f.value, f.std_error);
        }
    }
    if cfg.experiment == "kinv" {
        a.series("kinv", &inv)?;
        a.series("kinv_frame_potential", &fp)?;
        a.plot("kinv", &[("I", &inv)], true, false);
    } else {
        a.result("min_value", finite(fp.values.iter().cloned().fold(f64::INFINITY, f64::min)));
        a.series("fp", &fp)?;
        a.plot("fp", &[("F", &fp)], true, true);
    }
    Ok(())
}

fn otoc_run(cfg: &RunConfig, times: &[f64], a: &mut Artifacts) -> Result<(), RunError> {
    let ops: Vec<CMatrix> = cfg.ops.iter().map(|p| p.to_dense()).collect();
    let (ens, ts) = time_points(cfg, times)?;
    let mut s = ObservableSeries::new("otoc", cfg.ensemble.realizations);
    let mut residual: f64 = 0.0;
    for &t in &ts {
        let mut sc = cfg.clone();
        sc.scope = Scope::Whole;
        let samples = samples_at(&sc, ens.as_ref(), t)?;
        let o = otoc(&samples, &ops, cfg.scope)?;
        if let Some(r) = o.max_residual {
            residual = residual.max(r);
        }
        s.push(t, o.value, o.std_error);
    }
    a.result("max_sector_residual", finite(residual));
    a.series("otoc", &s)?;
    let conserving = cfg.ops.iter().all(|p| p.conserves_charge());
    match ens.as_ref() {
        Some(e) if conserving && cfg.scope == Scope::Whole => {
            let series = otoc_kinv_approx(e, &ops, &ts)?;
            a.series("otoc_approx", &series.approx)?;
            a.plot("otoc", &[("direct", &s), ("approx", &series.approx)], true, false);
        }
        _ => a.plot("otoc", &[("direct", &s)], true, false),
    }
    Ok(())
}

fn page(cfg: &RunConfig, a: &mut Artifacts) -> Result<(), RunError> {
    let n = cfg.page_qubits;
    let q = cfg.page_charge;
    let state = product_state(n, (1usize << q) - 1)?;
    let mut buf = b"n_a,n_b,charge,purity,std_error,analytic,realizations\n".to_vec();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n_a in 1..n {
        let n_b = n - n_a;
        let mc = page_purity_mc(n_a, n_b, &state, cfg.scrambler, cfg.ensemble.realizations, cfg.ensemble.seed)?;
        let analytic = match cfg.scrambler {
            Scrambler::Haar => {
                let (da, db) = ((1u64 << n_a) as f64, (1u64 << n_b) as f64);
                (da + db) / (da * db + 1.0)
            }
            Scrambler::U1Haar => page_purity_analytic(n_a, n_b, q).unwrap_or(f64::NAN),
        };
        buf.extend(
            format!("{n_a},{n_b},{q},{},{},{},{}\n", fmt17(mc.purity), fmt17(mc.std_error), fmt17(analytic), mc.realizations).bytes(),
        );
        xs.push(n_a as f64);
        ys.push(mc.purity);
    }
    a.csv.push(("page.csv".into(), buf));
    a.plots.push(("page.svg".into(), svg("subsystem purity", &[Curve { label: "purity", x: &xs, y: &ys }], false, true)));
    Ok(())
}

/// `n_D` runs over the scan range with `n_C`, `n_A`, charges fixed and
/// `n_B = n_C + n_D - n_A`.
fn scan_configs(cfg: &RunConfig) -> Result<Vec<HpConfig>, RunError> {
    let h = &cfg.hp;
    (cfg.scan_min..=cfg.scan_max)
        .map(|n_d| {
            let n_b = (h.n_c + n_d).saturating_sub(h.n_a);
            HpConfig::new(h.n_a, n_b, h.n_c, n_d, h.m_a, h.m_b)
                .map_err(|e| RunError::Config(vec![Diagnostic::new("scan.min", format!("n_D = {n_d}: {e}"))]))
        })
        .collect()
}

fn kl(cfg: &RunConfig, a: &mut Artifacts) -> Result<(), RunError> {
    let setup = match cfg.kl_setup {
        KlKind::Haar => KlSetup::Haar { qubits: cfg.kl_qubits },
        KlKind::U1Haar => KlSetup::U1Haar { qubits: cfg.kl_qubits, charge: cfg.kl_charge },
    };
    let s = kl_statistics(setup, &cfg.kl_op.to_dense(), cfg.kl_a, cfg.kl_b, cfg.ensemble.realizations, cfg.ensemble.seed)?;
    let body = format!(
        "dim,realizations,mean_re,mean_im,mean_se,variance,variance_se,predicted_mean_re,predicted_mean_im,predicted_variance,exact_variance\n\
         {},{},{},{},{},{},{},{},{},{},{}\n",
        s.dim,
        s.realizations,
        fmt17(s.mean.re),
        fmt17(s.mean.im),
        fmt17(s.mean_se),
        fmt17(s.variance),
        fmt17(s.variance_se),
        fmt17(s.predicted_mean.re),
        fmt17(s.predicted_mean.im),
        fmt17(s.predicted_variance),
        fmt17(s.exact_variance)
    );
    a.csv.push(("kl.csv".into(), body.into_bytes()));
    Ok(())
}
