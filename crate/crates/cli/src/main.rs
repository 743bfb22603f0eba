use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ampload::circuit::Circuit;
use ampload::grover::grover_power;
use ampload::heston::{build_heston_A, HestonTables};
use ampload::mitigation::NoiseModel;
use ampload::pipelines::{
    gate_count_csv, gate_count_grid, heston, integrate, mitigate_demo, sin2_operator, HestonConfig,
    IntegrateConfig, MitigateConfig, TableSource,
};
use ampload::quadrature::{QuadratureSpec, Rule};
use ampload::statevector::simulate;
use ampload::transpile::TopologyKind;
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "ampload",
    version,
    about = "Quantum amplitude estimation experiments on an exact simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a sin^2 integral with MLAE.
    Integrate(IntegrateArgs),
    /// CNOT counts of Q^k A for the sin^2 problem as CSV.
    Gates(GatesArgs),
    /// Price a European call under the discretized Heston model.
    Heston(HestonArgs),
    /// Readout correction and CNOT-folding extrapolation on the sin^2 benchmark.
    MitigateDemo(MitigateArgs),
}

#[derive(Args)]
struct Output {
    /// Write the main circuit in text form to this path.
    #[arg(long)]
    dump_circuit: Option<PathBuf>,
    /// Write the final state amplitudes as `index,re,im` rows to this path.
    #[arg(long)]
    dump_state: Option<PathBuf>,
    /// Write a CSV artifact to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    /// Depolarizing probability after each CNOT.
    #[arg(long)]
    cnot_error: Option<f64>,
    /// Probability of reading 1 for a prepared 0.
    #[arg(long)]
    readout_p01: Option<f64>,
    /// Probability of reading 0 for a prepared 1.
    #[arg(long)]
    readout_p10: Option<f64>,
}

impl NoiseArgs {
    fn any(&self) -> bool {
        self.cnot_error.is_some() || self.readout_p01.is_some() || self.readout_p10.is_some()
    }

    fn apply(&self, base: &mut NoiseModel) {
        if let Some(v) = self.cnot_error {
            base.cnot_error = v;
        }
        if let Some(v) = self.readout_p01 {
            base.readout_p01 = v;
        }
        if let Some(v) = self.readout_p10 {
            base.readout_p10 = v;
        }
    }
}

#[derive(Args)]
struct IntegrateArgs {
    /// TOML or JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    y: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    /// left, right, midpoint, trapezoid or simpson.
    #[arg(long)]
    rule: Option<Rule>,
    #[arg(long = "kmax")]
    k_max: Option<u32>,
    /// Shots per power; 0 uses exact probabilities.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the plain 2k+1 oracle construction.
    #[arg(long)]
    unoptimized: bool,
    /// Enable the default noise model.
    #[arg(long)]
    noise: bool,
    #[command(flatten)]
    noise_params: NoiseArgs,
    /// Apply readout correction and zero-noise extrapolation.
    #[arg(long)]
    mitigate: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GatesArgs {
    #[arg(long, default_value_t = 2)]
    qubits: usize,
    /// all_to_all or linear_chain.
    #[arg(long, default_value_t = TopologyKind::AllToAll)]
    topology: TopologyKind,
    /// Count the plain construction instead of the optimized one.
    #[arg(long)]
    unoptimized: bool,
    /// Comma-separated powers.
    #[arg(long = "k", value_delimiter = ',', num_args = 0..)]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct HestonArgs {
    /// TOML or JSON config with `params`, `grids` and `source`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Read the transition tables from this CSV.
    #[arg(long, conflicts_with = "self_compute")]
    use_table: Option<PathBuf>,
    /// Use tables computed from the model parameters.
    #[arg(long)]
    self_compute: bool,
    /// Shots per MLAE power; 0 uses exact probabilities.
    #[arg(long)]
    shots: Option<u64>,
    /// Run MLAE with powers up to 2^kmax.
    #[arg(long = "kmax")]
    k_max: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct MitigateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    y: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    calibration_shots: Option<u64>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<ampload::Error> for Failure {
    fn from(e: ampload::Error) -> Self {
        match e {
            ampload::Error::IllConditioned { .. } | ampload::Error::NotNormalForm(_) => {
                Failure::Numerical(e.into())
            }
            other => Failure::Usage(other.into()),
        }
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| anyhow!(e))
    } else {
        toml::from_str(&text).map_err(|e| anyhow!(e))
    };
    parsed.with_context(|| format!("malformed config {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_file(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn dump(output: &Output, circuit: &Circuit) -> Result<(), Failure> {
    if let Some(path) = &output.dump_circuit {
        write_file(path, circuit.to_text().as_bytes())?;
    }
    if let Some(path) = &output.dump_state {
        let mut buf = Vec::new();
        simulate(circuit)?.write_csv(&mut buf)?;
        write_file(path, &buf)?;
    }
    Ok(())
}

fn run_integrate(args: IntegrateArgs) -> Result<(), Failure> {
    let mut cfg: IntegrateConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => IntegrateConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = args.$field { cfg.$field = v; })*};
    }
    set!(y, n, rule, k_max, shots, seed);
    if args.unoptimized {
        cfg.optimized = false;
    }
    if args.noise || args.noise_params.any() || (args.mitigate && cfg.noise.is_none()) {
        let mut noise = cfg.noise.unwrap_or_default();
        args.noise_params.apply(&mut noise);
        cfg.noise = Some(noise);
    }
    if args.mitigate {
        cfg.mitigate = true;
    }
    let report = integrate(&cfg)?;
    if args.output.dump_circuit.is_some() || args.output.dump_state.is_some() {
        let spec = QuadratureSpec::new(cfg.rule.components()[0], cfg.n, cfg.y)?;
        let a = sin2_operator(&spec)?;
        dump(
            &args.output,
            &grover_power(&a, 1 << cfg.k_max, cfg.optimized)?.circuit,
        )?;
    }
    if let Some(path) = &args.output.csv {
        let mut csv = String::from("rule,estimate,classical,a_hat\n");
        for r in &report.runs {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                r.rule, r.estimate, r.classical, r.mlae.a_hat
            ));
        }
        write_file(path, csv.as_bytes())?;
    }
    print_json(&report)?;
    Ok(())
}

fn run_gates(args: GatesArgs) -> Result<(), Failure> {
    let ks = args.ks.unwrap_or_else(|| vec![1, 2, 4, 8, 16]);
    let rows = gate_count_grid(args.qubits, args.topology, !args.unoptimized, &ks)?;
    let csv = gate_count_csv(&rows)?;
    if let Some(path) = &args.csv {
        write_file(path, csv.as_bytes())?;
    }
    print!("{csv}");
    Ok(())
}

fn run_heston(args: HestonArgs) -> Result<(), Failure> {
    let mut cfg: HestonConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => HestonConfig::default(),
    };
    if let Some(v) = args.shots {
        cfg.shots = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.k_max.is_some() {
        cfg.k_max = args.k_max;
    }
    let external = match &args.use_table {
        Some(path) => {
            cfg.source = TableSource::External;
            let file =
                fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Some(HestonTables::read_csv(file, &cfg.grids)?)
        }
        None => {
            if args.self_compute {
                cfg.source = TableSource::Computed;
            }
            None
        }
    };
    let report = heston(&cfg, external)?;
    if args.output.dump_circuit.is_some() || args.output.dump_state.is_some() {
        let op = build_heston_A(&cfg.params, &cfg.grids, &report.tables)?;
        dump(&args.output, &op.operator.circuit)?;
    }
    if let Some(path) = &args.output.csv {
        let mut buf = Vec::new();
        report.tables.write_csv(&mut buf)?;
        write_file(path, &buf)?;
    }
    print_json(&report)?;
    Ok(())
}

fn run_mitigate(args: MitigateArgs) -> Result<(), Failure> {
    let mut cfg: MitigateConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => MitigateConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = args.$field { cfg.$field = v; })*};
    }
    set!(y, k, seeds, shots, calibration_shots, base_seed);
    args.noise.apply(&mut cfg.noise);
    let report = mitigate_demo(&cfg)?;
    if args.output.dump_circuit.is_some() || args.output.dump_state.is_some() {
        let spec = QuadratureSpec::new(Rule::Midpoint, cfg.n, cfg.y)?;
        let a = sin2_operator(&spec)?;
        dump(
            &args.output,
            &grover_power(&a, cfg.k, cfg.optimized)?.circuit,
        )?;
    }
    if let Some(path) = &args.output.csv {
        let mut csv = String::from("seed,raw,fold1,fold3,fold5,mitigated\n");
        for r in &report.runs {
            let p = &r.folded.probabilities;
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.seed, r.raw, p[0], p[1], p[2], r.mitigated
            ));
        }
        write_file(path, csv.as_bytes())?;
    }
    print_json(&report)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Integrate(a) => run_integrate(a),
        Command::Gates(a) => run_gates(a),
        Command::Heston(a) => run_heston(a),
        Command::MitigateDemo(a) => run_mitigate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}
