//! Flat `key = value` run configuration.
//!
//! Sources are layered: built-in defaults, then a config file, then the
//! `CHARGELAB_OUTPUT` / `CHARGELAB_THREADS` environment variables, then
//! command-line overrides. A `manifest.json` written by a previous run is
//! accepted as a config file, so any run can be repeated from its manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chargelab::chaos::{ConjugationScope, FormFactorKind, Scope, Spacing, TimeGrid};
use chargelab::decoupling::{HpConfig, PurityOrder, Scrambler};
use chargelab::ensembles::{EnsembleKind, EnsembleSpec};
use chargelab::hilbert::PauliString;

pub const EXPERIMENTS: [&str; 15] = [
    "dos",
    "sff",
    "sff-sectors",
    "r2-check",
    "r4-check",
    "fp",
    "fp-analytic",
    "kinv",
    "otoc",
    "page",
    "hp",
    "hp-scan",
    "kl",
    "ek-scan",
    "moment",
];

/// Every accepted key with its default and a one-line description. Defaults
/// marked `auto` are filled in from other keys.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("experiment", "", "one of the experiment names"),
    ("ensemble.kind", "csyk", "haar | u1_haar | gue_per_sector | csyk"),
    ("ensemble.n", "auto", "qubit (fermion) count; 8, or 10 with large"),
    ("ensemble.coupling", "1", "SYK coupling J"),
    ("ensemble.scale", "1", "GUE entry scale"),
    ("ensemble.seed", "1", "master seed"),
    ("ensemble.realizations", "auto", "200; with large 2000 (1500 for fp, fp-analytic, kinv, otoc)"),
    ("time_grid.t_min", "0.1", "first time"),
    ("time_grid.t_max", "100", "last time"),
    ("time_grid.points", "64", "number of times"),
    ("time_grid.spacing", "log", "linear | log"),
    ("output", "out", "output directory"),
    ("plot", "false", "also write SVG plots"),
    ("large", "false", "allow sizes above 8 and use the long realization counts"),
    ("threads", "0", "worker threads, 0 = all cores"),
    ("scope", "whole", "whole | sector:<q>"),
    ("form_factor", "r2", "form factor for sff and sff-sectors"),
    ("k", "1", "frame-potential moment"),
    ("rounds", "1", "Haar conjugation rounds for kinv"),
    ("conjugation", "whole", "whole | per_sector"),
    ("bins", "60", "histogram bins for dos"),
    ("fraction", "0.1", "lowest fraction of levels in the dos exponent fit"),
    ("shift", "true", "shift each realization's spectrum to start at 0"),
    ("ops", "auto", "comma-separated Pauli strings for otoc; Z on the first and last qubit"),
    ("order", "leading", "HP purity order: leading | exact"),
    ("hp.n_a", "2", "reference qubits"),
    ("hp.n_b", "4", "black-hole qubits"),
    ("hp.n_c", "2", "radiation qubits"),
    ("hp.n_d", "4", "remaining qubits"),
    ("hp.m_a", "1", "reference charge"),
    ("hp.m_b", "2", "black-hole charge"),
    ("hp.realizations", "0", "Monte Carlo HP states for hp; 0 skips sampling"),
    ("page.qubits", "6", "total qubits of the scrambled state"),
    ("page.charge", "3", "charge of the initial product state"),
    ("page.scrambler", "u1_haar", "haar | u1_haar"),
    ("kl.setup", "haar", "haar | u1_haar"),
    ("kl.qubits", "4", "qubits of the encoded system"),
    ("kl.charge", "2", "codeword charge in the u1_haar setup"),
    ("kl.op", "auto", "Pauli string; X on the first qubit"),
    ("kl.a", "auto", "first codeword basis index"),
    ("kl.b", "auto", "second codeword basis index"),
    ("scan.min", "4", "first n_D of hp-scan and ek-scan"),
    ("scan.max", "10", "last n_D of hp-scan and ek-scan"),
    ("word", "{1,2,1,2}", "moment word, list form or explicit"),
];

/// A problem with one configuration field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlKind {
    Haar,
    U1Haar,
}

/// Fully resolved, validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: String,
    pub ensemble: EnsembleSpec,
    pub time_grid: TimeGrid,
    pub output: PathBuf,
    pub plot: bool,
    pub large: bool,
    pub threads: usize,
    pub scope: Scope,
    pub form_factor: FormFactorKind,
    pub k: u32,
    pub rounds: usize,
    pub conjugation: ConjugationScope,
    pub bins: usize,
    pub fraction: f64,
    pub shift: bool,
    pub ops: Vec<PauliString>,
    pub order: PurityOrder,
    pub hp: HpConfig,
    pub hp_realizations: usize,
    pub page_qubits: usize,
    pub page_charge: usize,
    pub scrambler: Scrambler,
    pub kl_setup: KlKind,
    pub kl_qubits: usize,
    pub kl_charge: usize,
    pub kl_op: PauliString,
    pub kl_a: usize,
    pub kl_b: usize,
    pub scan_min: usize,
    pub scan_max: usize,
    pub word: String,
    /// The resolved key-value form, written to the manifest.
    pub raw: BTreeMap<String, String>,
}

/// Unresolved key-value layers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    unknown: Vec<String>,
}

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let key = key.trim().to_string();
        if !KEYS.iter().any(|(k, _, _)| *k == key) {
            self.unknown.push(key.clone());
        }
        self.values.insert(key, value.into().trim().to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<(), Diagnostic> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Diagnostic::new("config", format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v);
        }
        Ok(())
    }

    /// Merge the `config` object of a manifest.
    pub fn merge_manifest(&mut self, text: &str) -> Result<(), Diagnostic> {
        let json: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Diagnostic::new("config", format!("bad manifest: {e}")))?;
        let obj = json
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Diagnostic::new("config", "manifest has no config object"))?;
        for (k, v) in obj {
            let v = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            self.set(k, v);
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), Diagnostic> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Diagnostic::new("config", format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            self.merge_manifest(&text)
        } else {
            self.merge_text(&text)
        }
    }

    pub fn merge_env(&mut self) {
        if let Ok(v) = std::env::var("CHARGELAB_OUTPUT") {
            self.set("output", v);
        }
        if let Ok(v) = std::env::var("CHARGELAB_THREADS") {
            self.set("threads", v);
        }
    }
}

struct Reader<'a> {
    raw: &'a BTreeMap<String, String>,
    diags: Vec<Diagnostic>,
}

impl Reader<'_> {
    fn text(&self, key: &str) -> &str {
        self.raw.get(key).map(String::as_str).unwrap_or("")
    }

    fn parse<T: FromStr>(&mut self, key: &str, fallback: T) -> T
    where
        T::Err: fmt::Display,
    {
        match self.text(key).parse::<T>() {
            Ok(v) => v,
            Err(e) => {
                self.diags.push(Diagnostic::new(key, format!("cannot parse '{}': {e}", self.text(key))));
                fallback
            }
        }
    }

    fn with<T>(&mut self, key: &str, fallback: T, f: impl FnOnce(&str) -> Result<T, String>) -> T {
        match f(self.text(key)) {
            Ok(v) => v,
            Err(e) => {
                self.diags.push(Diagnostic::new(key, e));
                fallback
            }
        }
    }

    fn check(&mut self, ok: bool, key: &str, message: impl Into<String>) {
        if !ok {
            self.diags.push(Diagnostic::new(key, message));
        }
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

fn parse_paulis(s: &str) -> Result<Vec<PauliString>, String> {
    s.split(',').map(|p| p.trim().parse::<PauliString>().map_err(|e| e.to_string())).collect()
}

fn realization_default(experiment: &str, large: bool) -> usize {
    match (large, experiment) {
        (false, _) => 200,
        (true, "fp" | "fp-analytic" | "kinv" | "otoc") => 1500,
        (true, _) => 2000,
    }
}

/// Fill defaults and resolve `auto` keys. Returns the complete key map.
pub fn complete(raw: &RawConfig) -> BTreeMap<String, String> {
    let mut m = raw.values.clone();
    for (k, d, _) in KEYS {
        if !m.contains_key(*k) && *d != "auto" {
            m.insert(k.to_string(), d.to_string());
        }
    }
    let large = parse_bool(&m["large"]).unwrap_or(false);
    let experiment = m["experiment"].clone();
    m.entry("ensemble.n".into()).or_insert_with(|| if large { "10" } else { "8" }.into());
    m.entry("ensemble.realizations".into()).or_insert_with(|| realization_default(&experiment, large).to_string());
    let n: usize = m["ensemble.n"].parse().unwrap_or(1).max(1);
    m.entry("ops".into()).or_insert_with(|| {
        let mut a = vec!['I'; n];
        let mut b = vec!['I'; n];
        a[0] = 'Z';
        b[n - 1] = 'Z';
        format!("{},{}", a.iter().collect::<String>(), b.iter().collect::<String>())
    });
    let kq: usize = m["kl.qubits"].parse().unwrap_or(1).max(1);
    m.entry("kl.op".into()).or_insert_with(|| std::iter::once('X').chain(std::iter::repeat_n('I', kq - 1)).collect());
    // default codewords: the first two basis states of the code space
    let (a, b) = if m["kl.setup"] == "u1_haar" {
        let q: usize = m["kl.charge"].parse().unwrap_or(0);
        let mut states = (0usize..1 << kq.min(20)).filter(|s| s.count_ones() as usize == q);
        (states.next().unwrap_or(0), states.next().unwrap_or(0))
    } else {
        (0, 1)
    };
    m.entry("kl.a".into()).or_insert_with(|| a.to_string());
    m.entry("kl.b".into()).or_insert_with(|| b.to_string());
    m
}

/// All problems with a configuration; empty iff `resolve` succeeds.
pub fn validate(raw: &RawConfig) -> Vec<Diagnostic> {
    match resolve(raw) {
        Ok(_) => Vec::new(),
        Err(d) => d,
    }
}

pub fn resolve(raw: &RawConfig) -> Result<RunConfig, Vec<Diagnostic>> {
    let m = complete(raw);
    let mut r = Reader { raw: &m, diags: Vec::new() };
    for key in &raw.unknown {
        r.diags.push(Diagnostic::new(key, "unknown key"));
    }
    let experiment = r.text("experiment").to_string();
    r.check(EXPERIMENTS.contains(&experiment.as_str()), "experiment", format!("unknown experiment '{experiment}'"));
    let large = r.with("large", false, parse_bool);
    let plot = r.with("plot", false, parse_bool);
    let shift = r.with("shift", true, parse_bool);

    let kind = r.with("ensemble.kind", EnsembleKind::Csyk, |s| s.parse().map_err(|e: chargelab::Error| e.to_string()));
    let size: usize = r.parse("ensemble.n", 8);
    let mut ensemble = EnsembleSpec::new(kind, size, r.parse("ensemble.seed", 1), r.parse("ensemble.realizations", 200));
    ensemble.coupling = r.parse("ensemble.coupling", 1.0);
    ensemble.scale = r.parse("ensemble.scale", 1.0);
    if kind == EnsembleKind::Csyk && size % 2 == 1 {
        r.diags.push(Diagnostic::new("ensemble.n", format!("complex SYK needs an even fermion count, got {size}")));
    } else if let Err(e) = ensemble.validate() {
        let field = if ensemble.realizations == 0 {
            "ensemble.realizations"
        } else if matches!(kind, EnsembleKind::GuePerSector) && !(ensemble.scale > 0.0) {
            "ensemble.scale"
        } else {
            "ensemble.n"
        };
        r.diags.push(Diagnostic::new(field, e.to_string()));
    }
    r.check(large || size <= 8, "ensemble.n", format!("size {size} above 8 needs large = true"));
    r.check(ensemble.coupling.is_finite() && ensemble.coupling > 0.0, "ensemble.coupling", "must be positive");

    let t_min: f64 = r.parse("time_grid.t_min", 0.1);
    let t_max: f64 = r.parse("time_grid.t_max", 100.0);
    let points: usize = r.parse("time_grid.points", 64);
    let spacing = r.with("time_grid.spacing", Spacing::Log, |s| match s {
        "log" => Ok(Spacing::Log),
        "linear" | "lin" => Ok(Spacing::Linear),
        other => Err(format!("expected linear or log, got '{other}'")),
    });
    let time_grid = TimeGrid { t_min, t_max, points, spacing };
    r.check(points >= 2, "time_grid.points", format!("need at least 2 points, got {points}"));
    r.check(t_min >= 0.0 && t_min.is_finite(), "time_grid.t_min", "must be finite and non-negative");
    r.check(spacing != Spacing::Log || t_min > 0.0, "time_grid.t_min", format!("log spacing needs t_min > 0, got {t_min}"));
    r.check(t_max > t_min && t_max.is_finite(), "time_grid.t_max", format!("must exceed t_min ({t_min})"));

    let threads: usize = r.parse("threads", 0);
    let scope: Scope = r.with("scope", Scope::Whole, |s| {
        s.trim_start_matches("sector:").parse().map_err(|e: chargelab::Error| e.to_string())
    });
    if let Scope::Sector(q) = scope {
        r.check(q <= size, "scope", format!("sector {q} does not exist for {size} qubits"));
    }
    let form_factor: FormFactorKind =
        r.with("form_factor", FormFactorKind::R2, |s| s.parse().map_err(|e: chargelab::Error| e.to_string()));
    let k: u32 = r.parse("k", 1);
    r.check((1..=4).contains(&k), "k", "supported moments are 1..=4");
    let rounds: usize = r.parse("rounds", 1);
    r.check(rounds >= 1, "rounds", "need at least one round");
    let conjugation = r.with("conjugation", ConjugationScope::Whole, |s| match s {
        "whole" => Ok(ConjugationScope::Whole),
        "per_sector" | "per-sector" => Ok(ConjugationScope::PerSector),
        other => Err(format!("expected whole or per_sector, got '{other}'")),
    });
    let bins: usize = r.parse("bins", 60);
    r.check(bins >= 10, "bins", "need at least 10 bins");
    let fraction: f64 = r.parse("fraction", 0.1);
    r.check(fraction > 0.0 && fraction <= 1.0, "fraction", "must lie in (0, 1]");

    let ops = r.with("ops", Vec::new(), parse_paulis);
    if experiment == "otoc" {
        r.check(ops.len() == 2 || ops.len() == 4, "ops", format!("otoc takes 2 or 4 operators, got {}", ops.len()));
        r.check(ops.iter().all(|p| p.len() == size), "ops", format!("operators must act on {size} qubits"));
        r.check(
            scope == Scope::Whole || ops.iter().all(PauliString::conserves_charge),
            "ops",
            "sector scope needs charge-conserving operators",
        );
    }

    let order = r.with("order", PurityOrder::Leading, |s| match s {
        "leading" => Ok(PurityOrder::Leading),
        "exact" => Ok(PurityOrder::Exact),
        other => Err(format!("expected leading or exact, got '{other}'")),
    });
    let hp_fields = ["hp.n_a", "hp.n_b", "hp.n_c", "hp.n_d", "hp.m_a", "hp.m_b"];
    let v: Vec<usize> = hp_fields.iter().map(|f| r.parse(f, 1)).collect();
    let hp = match HpConfig::new(v[0], v[1], v[2], v[3], v[4], v[5]) {
        Ok(c) => c,
        Err(e) => {
            let field = if v[4] > v[0] {
                "hp.m_a"
            } else if v[5] > v[1] {
                "hp.m_b"
            } else {
                "hp.n_d"
            };
            if experiment.starts_with("hp") || experiment == "ek-scan" {
                r.diags.push(Diagnostic::new(field, e.to_string()));
            }
            HpConfig::new(2, 4, 2, 4, 1, 2).expect("default HP configuration is valid")
        }
    };
    let hp_realizations: usize = r.parse("hp.realizations", 0);
    r.check(
        hp_realizations == 0 || hp.total_qubits() <= 12,
        "hp.realizations",
        "Monte Carlo HP states are limited to 12 qubits in total",
    );

    let page_qubits: usize = r.parse("page.qubits", 6);
    let page_charge: usize = r.parse("page.charge", 3);
    r.check((2..=12).contains(&page_qubits), "page.qubits", "must lie in 2..=12");
    r.check(page_charge <= page_qubits, "page.charge", "cannot exceed page.qubits");
    let scrambler = r.with("page.scrambler", Scrambler::U1Haar, |s| match s {
        "haar" => Ok(Scrambler::Haar),
        "u1_haar" | "u1-haar" => Ok(Scrambler::U1Haar),
        other => Err(format!("expected haar or u1_haar, got '{other}'")),
    });

    let kl_setup = r.with("kl.setup", KlKind::Haar, |s| match s {
        "haar" => Ok(KlKind::Haar),
        "u1_haar" | "u1-haar" => Ok(KlKind::U1Haar),
        other => Err(format!("expected haar or u1_haar, got '{other}'")),
    });
    let kl_qubits: usize = r.parse("kl.qubits", 4);
    r.check((1..=10).contains(&kl_qubits), "kl.qubits", "must lie in 1..=10");
    let kl_charge: usize = r.parse("kl.charge", 0);
    r.check(kl_charge <= kl_qubits, "kl.charge", "cannot exceed kl.qubits");
    let kl_op = r.with("kl.op", PauliString::identity(1), |s| s.parse::<PauliString>().map_err(|e| e.to_string()));
    if experiment == "kl" {
        r.check(kl_op.len() == kl_qubits, "kl.op", format!("must act on {kl_qubits} qubits"));
    }
    let kl_a: usize = r.parse("kl.a", 0);
    let kl_b: usize = r.parse("kl.b", 0);
    for (f, idx) in [("kl.a", kl_a), ("kl.b", kl_b)] {
        r.check(idx < 1 << kl_qubits.min(20), f, "basis index out of range");
        if kl_setup == KlKind::U1Haar && experiment == "kl" {
            r.check(idx.count_ones() as usize == kl_charge, f, format!("codeword must have charge {kl_charge}"));
        }
    }

    let scan_min: usize = r.parse("scan.min", 4);
    let scan_max: usize = r.parse("scan.max", 12);
    r.check(scan_min <= scan_max, "scan.max", "must be at least scan.min");
    r.check(scan_max <= 64, "scan.max", "at most 64");
    r.check(scan_min >= 2, "scan.min", "at least 2");
    let word = r.text("word").to_string();
    if experiment == "moment" {
        r.with("word", (), |s| chargelab::weingarten::parse_word(s).map(|_| ()).map_err(|e| e.to_string()));
    }

    if experiment != "moment" && experiment != "kl" && !experiment.starts_with("hp") && experiment != "ek-scan" && experiment != "page" {
        let needs_hamiltonian = ["dos", "sff", "sff-sectors", "r2-check", "r4-check", "fp-analytic"];
        if needs_hamiltonian.contains(&experiment.as_str()) {
            r.check(kind.is_hamiltonian(), "ensemble.kind", format!("{experiment} needs a Hamiltonian ensemble (csyk or gue_per_sector)"));
        }
        if experiment == "fp-analytic" {
            r.check(k == 1, "k", "the analytic prediction exists for k = 1 only");
        }
        if matches!(experiment.as_str(), "fp" | "fp-analytic" | "kinv") {
            r.check(ensemble.realizations >= 2, "ensemble.realizations", "frame potentials need at least 2 realizations");
        }
    }

    let output = PathBuf::from(r.text("output"));
    r.check(!r.text("output").is_empty(), "output", "must not be empty");

    if !r.diags.is_empty() {
        return Err(r.diags);
    }
    Ok(RunConfig {
        experiment,
        ensemble,
        time_grid,
        output,
        plot,
        large,
        threads,
        scope,
        form_factor,
        k,
        rounds,
        conjugation,
        bins,
        fraction,
        shift,
        ops,
        order,
        hp,
        hp_realizations,
        page_qubits,
        page_charge,
        scrambler,
        kl_setup,
        kl_qubits,
        kl_charge,
        kl_op,
        kl_a,
        kl_b,
        scan_min,
        scan_max,
        word,
        raw: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(pairs: &[(&str, &str)]) -> RawConfig {
        let mut r = RawConfig::new();
        for (k, v) in pairs {
            r.set(k, *v);
        }
        r
    }

    #[test]
    fn defaults_are_valid() {
        for e in EXPERIMENTS {
            let d = validate(&raw(&[("experiment", e)]));
            assert!(d.is_empty(), "{e}: {d:?}");
        }
    }

    #[test]
    fn log_grid_needs_positive_start() {
        let d = validate(&raw(&[("experiment", "sff"), ("time_grid.t_min", "0")]));
        assert!(d.iter().any(|d| d.field == "time_grid.t_min"), "{d:?}");
    }

    #[test]
    fn odd_syk_is_rejected() {
        let d = validate(&raw(&[("experiment", "sff"), ("ensemble.n", "7")]));
        assert!(d.iter().any(|d| d.field == "ensemble.n"), "{d:?}");
    }

    #[test]
    fn large_sizes_need_the_flag() {
        let d = validate(&raw(&[("experiment", "sff"), ("ensemble.n", "10")]));
        assert_eq!(d.len(), 1);
        assert!(validate(&raw(&[("experiment", "sff"), ("ensemble.n", "10"), ("large", "true")])).is_empty());
    }

    #[test]
    fn text_format_and_unknown_keys() {
        let mut r = RawConfig::new();
        r.merge_text("# comment\nexperiment = dos\nbins = 30 # trailing\nbogus = 1\n").unwrap();
        let d = validate(&r);
        assert_eq!(d, vec![Diagnostic::new("bogus", "unknown key")]);
        assert!(r.merge_text("no equals sign").is_err());
    }

    #[test]
    fn large_changes_realization_defaults() {
        let m = complete(&raw(&[("experiment", "kinv"), ("large", "true")]));
        assert_eq!(m["ensemble.realizations"], "1500");
        assert_eq!(m["ensemble.n"], "10");
        let m = complete(&raw(&[("experiment", "sff"), ("large", "true")]));
        assert_eq!(m["ensemble.realizations"], "2000");
    }
}
