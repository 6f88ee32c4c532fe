use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chargelab_cli::{resolve, run, validate, RawConfig, KEYS};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chargelab", version, about = "Charge-resolved chaos and decoupling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Density of states, whole spectrum and per sector
    Dos(Common),
    /// Spectral form factor of the whole system or one sector
    Sff(Common),
    /// Spectral form factor of every sector
    SffSectors(Common),
    /// Relative error of the sector decomposition of R2
    R2Check(Common),
    /// R4 decomposition and the agreement of its two representations
    R4Check(Common),
    /// Frame potential F^(k)
    Fp(Common),
    /// Direct F^(1) against its sector prediction
    FpAnalytic(Common),
    /// k-invariance I^(k)
    Kinv(Common),
    /// Out-of-time-ordered correlator of Pauli operators
    Otoc(Common),
    /// Subsystem purity of a scrambled fixed-charge product state
    Page(Common),
    /// Hayden-Preskill purities, CMI and decoupling margin
    Hp(Common),
    /// Decoupling margin over a range of n_D
    HpScan(Common),
    /// Knill-Laflamme matrix element statistics
    Kl(Common),
    /// Eastin-Knill consistency scan
    EkScan(Common),
    /// Symbolic Haar moment of an operator word
    Moment {
        /// e.g. "{1,2,1,2}" or "Tr(A1 Ud B1 U A2 Ud B2 U)"
        word: String,
        #[command(flatten)]
        common: Common,
    },
    /// Check a configuration without running it
    Validate(Common),
    /// List configuration keys with defaults
    Keys,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat key = value file, or a manifest.json of an earlier run
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value override, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    realizations: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Time grid as tmin:tmax:spacing:points
    #[arg(long = "t")]
    t: Option<String>,
    #[arg(long)]
    scope: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    threads: Option<String>,
    /// Write SVG plots next to the CSVs
    #[arg(long)]
    plot: bool,
    /// Allow sizes above 8 and use the long realization counts
    #[arg(long)]
    large: bool,
    /// Experiment to validate (validate subcommand only)
    #[arg(long)]
    experiment: Option<String>,
}

fn layer(experiment: Option<&str>, c: &Common) -> Result<RawConfig, String> {
    let mut raw = RawConfig::new();
    if let Some(p) = &c.config {
        raw.merge_file(p).map_err(|d| d.to_string())?;
    }
    raw.merge_env();
    if let Some(e) = experiment {
        raw.set("experiment", e);
    }
    if let Some(e) = &c.experiment {
        raw.set("experiment", e.as_str());
    }
    let named = [
        ("ensemble.kind", &c.ensemble),
        ("ensemble.n", &c.n),
        ("ensemble.realizations", &c.realizations),
        ("ensemble.seed", &c.seed),
        ("scope", &c.scope),
        ("k", &c.k),
        ("threads", &c.threads),
    ];
    for (key, v) in named {
        if let Some(v) = v {
            raw.set(key, v.as_str());
        }
    }
    if let Some(t) = &c.t {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 4 {
            return Err(format!("time_grid: expected tmin:tmax:spacing:points, got '{t}'"));
        }
        for (key, v) in ["time_grid.t_min", "time_grid.t_max", "time_grid.spacing", "time_grid.points"].iter().zip(parts) {
            raw.set(key, v);
        }
    }
    if let Some(o) = &c.output {
        raw.set("output", o.display().to_string());
    }
    if c.plot {
        raw.set("plot", "true");
    }
    if c.large {
        raw.set("large", "true");
    }
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        raw.set(k, v);
    }
    Ok(raw)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common, word) = match &cli.command {
        Command::Keys => {
            let mut out = std::io::stdout().lock();
            for (k, d, help) in KEYS {
                // a closed pipe (e.g. `| head`) just ends the listing
                if writeln!(out, "{k:24} {d:12} {help}").is_err() {
                    break;
                }
            }
            return ExitCode::SUCCESS;
        }
        Command::Validate(c) => (None, c, None),
        Command::Moment { word, common } => (Some("moment"), common, Some(word.as_str())),
        Command::Dos(c) => (Some("dos"), c, None),
        Command::Sff(c) => (Some("sff"), c, None),
        Command::SffSectors(c) => (Some("sff-sectors"), c, None),
        Command::R2Check(c) => (Some("r2-check"), c, None),
        Command::R4Check(c) => (Some("r4-check"), c, None),
        Command::Fp(c) => (Some("fp"), c, None),
        Command::FpAnalytic(c) => (Some("fp-analytic"), c, None),
        Command::Kinv(c) => (Some("kinv"), c, None),
        Command::Otoc(c) => (Some("otoc"), c, None),
        Command::Page(c) => (Some("page"), c, None),
        Command::Hp(c) => (Some("hp"), c, None),
        Command::HpScan(c) => (Some("hp-scan"), c, None),
        Command::Kl(c) => (Some("kl"), c, None),
        Command::EkScan(c) => (Some("ek-scan"), c, None),
    };
    let mut raw = match layer(experiment, common) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: invalid configuration\n  {msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(w) = word {
        // the leading "p=2 wiring" label of the list form is decoration
        raw.set("word", w);
    }
    if matches!(cli.command, Command::Validate(_)) {
        let diags = validate(&raw);
        if diags.is_empty() {
            println!("ok");
            return ExitCode::SUCCESS;
        }
        for d in &diags {
            eprintln!("{d}");
        }
        return ExitCode::from(2);
    }
    let cfg = match resolve(&raw) {
        Ok(c) => c,
        Err(diags) => {
            eprintln!("error: invalid configuration");
            for d in &diags {
                eprintln!("  {d}");
            }
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            if !out.text.is_empty() {
                print!("{}", out.text);
            }
            for (name, hash) in &out.files {
                println!("wrote {} ({})", out.output.join(name).display(), &hash[..12]);
            }
            for (k, v) in &out.results {
                println!("{k} = {v}");
            }
            println!("manifest: {}", out.output.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
