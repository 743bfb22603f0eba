//! End-to-end experiments: the `sin²` integration benchmark, the CNOT-count
//! grid, the Heston pricing run and the mitigation demo. Every report embeds
//! its resolved configuration.

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::grover::grover_power;
use crate::heston::{
    build_heston_A, deviation_report, expected_payoff_reference, published_rounding,
    DeviationReport, GridSpec, HestonParams, HestonTables,
};
use crate::mitigation::{
    calibrate_readout, correct_readout, counts_to_distribution, fold_cnots, good_fraction,
    richardson_zero_noise, FoldedRun, NoiseModel, NoisySampler, ReadoutCalibration,
};
use crate::mlae::{mlae_estimate, MlaeResult, MlaeSchedule};
use crate::quadrature::{
    classical_reference, combine_estimates, error_bound_on_interval, exact_sin2_integral,
    make_grid, sin2, sin2_derivative_max, QuadratureSpec, Rule,
};
use crate::state_prep::{FlaggedOperator, RotationOracle};
use crate::statevector::{sample, simulate, GoodStateFlags};
use crate::transpile::{count_cnots, lower, TopologyKind, TopologySpec};

/// splitmix64 over `seed` and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    path.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

/// `A = R_Y(2π x_i) (H^{⊗n} ⊗ I)` on `n + 1` qubits, target last: the good
/// probability is `2^{-n} Σ sin²(π x_i)`.
pub fn sin2_operator(spec: &QuadratureSpec) -> Result<FlaggedOperator> {
    let xs = make_grid(spec)?;
    let n = spec.n as usize;
    let controls: Vec<usize> = (0..n).collect();
    let angles = xs.iter().map(|x| 2.0 * std::f64::consts::PI * x).collect();
    let oracle = RotationOracle::from_angles(angles, &controls, n)?;
    let mut c = Circuit::new(n + 1)?;
    c.extend(controls.iter().map(|&q| crate::circuit::Gate::H(q)))?;
    c.push(oracle.gate())?;
    FlaggedOperator::new(c, GoodStateFlags::single(n), "(1/2^n) sum_i sin^2(pi x_i)")
}

/// One cell of the CNOT-count grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCountRow {
    pub qubits: usize,
    pub topology: TopologyKind,
    pub optimized: bool,
    pub k: usize,
    pub cnots: usize,
}

/// CNOT counts of `Q^k A` for the `sin²` problem on `qubits` qubits.
/// Optimized rows drop the final CNOT, unoptimized rows keep it.
pub fn gate_count_grid(
    qubits: usize,
    topology: TopologyKind,
    optimized: bool,
    ks: &[usize],
) -> Result<Vec<GateCountRow>> {
    if qubits < 2 {
        return Err(Error::InvalidArgument(
            "the sin^2 problem needs at least 2 qubits".into(),
        ));
    }
    let spec = QuadratureSpec::new(Rule::Midpoint, (qubits - 1) as u32, 1.0)?;
    let a = sin2_operator(&spec)?;
    let topo = TopologySpec {
        kind: topology,
        num_qubits: qubits,
    };
    ks.iter()
        .map(|&k| {
            let power = grover_power(&a, k, optimized)?;
            let report = count_cnots(&power, &topo, optimized)?;
            Ok(GateCountRow {
                qubits,
                topology,
                optimized,
                k,
                cnots: report.cnot_count,
            })
        })
        .collect()
}

pub fn gate_count_csv(rows: &[GateCountRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["qubits", "topology", "optimized", "k", "cnots"])?;
    for r in rows {
        w.write_record([
            r.qubits.to_string(),
            r.topology.to_string(),
            r.optimized.to_string(),
            r.k.to_string(),
            r.cnots.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn default_true() -> bool {
    true
}

fn default_shots() -> u64 {
    8192
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateConfig {
    pub y: f64,
    pub n: u32,
    pub rule: Rule,
    pub k_max: u32,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub optimized: bool,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub mitigate: bool,
}

impl Default for IntegrateConfig {
    fn default() -> Self {
        Self {
            y: 1.0,
            n: 1,
            rule: Rule::Midpoint,
            k_max: 2,
            shots: 8192,
            seed: 0,
            optimized: true,
            noise: None,
            mitigate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleRun {
    pub rule: Rule,
    /// `y · â` for this grid rule.
    pub estimate: f64,
    /// `y · 2^{-n} Σ g(x_i)`.
    pub classical: f64,
    pub mlae: MlaeResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateReport {
    pub config: IntegrateConfig,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub classical_reference: f64,
    pub error_bound: f64,
    pub oracle_calls: u64,
    pub runs: Vec<RuleRun>,
    /// `(2M + (L + R)/2)/3`, present when all three grid rules ran.
    pub simpson: Option<f64>,
}

/// Good-state probability estimate of `c` under noise, optionally with
/// readout correction and CNOT-folding extrapolation.
fn noisy_probability(
    c: &Circuit,
    flags: &GoodStateFlags,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
    calibration: Option<&ReadoutCalibration>,
) -> Result<f64> {
    let lowered = lower(c, &TopologySpec::all_to_all(c.num_qubits()))?;
    let flags = GoodStateFlags::new(flags.qubits().into_iter().map(|q| lowered.layout[q]))?;
    let estimate = |circuit: &Circuit, seed: u64| -> Result<f64> {
        let counts = NoisySampler::new(circuit, noise)?.sample_counts(shots, seed);
        let mut dist = counts_to_distribution(&counts);
        if let Some(cal) = calibration {
            dist = correct_readout(&dist, cal)?;
        }
        Ok(good_fraction(&dist, &flags))
    };
    match calibration {
        None => estimate(&lowered.circuit, seed),
        Some(_) => {
            let mut p = [0.0; 3];
            for (i, f) in FoldedRun::FACTORS.iter().enumerate() {
                p[i] = estimate(
                    &fold_cnots(&lowered.circuit, *f)?,
                    derive_seed(seed, &[*f as u64]),
                )?;
            }
            FoldedRun::new(p).extrapolate()
        }
    }
}

pub fn integrate(config: &IntegrateConfig) -> Result<IntegrateReport> {
    let base = QuadratureSpec::new(config.rule, config.n, config.y)?;
    if config.noise.is_some() && config.shots == 0 {
        return Err(Error::InvalidArgument("noisy runs need shots > 0".into()));
    }
    if config.mitigate && config.noise.is_none() {
        return Err(Error::InvalidArgument(
            "mitigation requires a noise model".into(),
        ));
    }
    let schedule = MlaeSchedule::exponential(config.k_max, config.shots);
    let calibration = match (&config.noise, config.mitigate) {
        (Some(noise), true) => Some(calibrate_readout(
            base.n as usize + 1,
            noise,
            config.shots.max(1),
            derive_seed(config.seed, &[u64::MAX]),
        )?),
        _ => None,
    };
    let mut runs = Vec::new();
    for (ri, &rule) in config.rule.components().iter().enumerate() {
        let spec = base.with_rule(rule);
        let a = sin2_operator(&spec)?;
        let mut hits = Vec::with_capacity(schedule.powers.len());
        for (ki, &k) in schedule.powers.iter().enumerate() {
            let power = grover_power(&a, k, config.optimized)?;
            let seed = derive_seed(config.seed, &[ri as u64, ki as u64]);
            let h = match &config.noise {
                Some(noise) => {
                    schedule.trials()
                        * noisy_probability(
                            &power.circuit,
                            &a.flags,
                            noise,
                            config.shots,
                            seed,
                            calibration.as_ref(),
                        )?
                }
                None => {
                    let state = simulate(&power.circuit)?;
                    if config.shots == 0 {
                        state.good_probability(&a.flags)
                    } else {
                        sample(&state, &a.flags, config.shots, seed)?.good_hits as f64
                    }
                }
            };
            hits.push(h);
        }
        let mlae = mlae_estimate(&schedule, &hits)?;
        runs.push(RuleRun {
            rule,
            estimate: config.y * mlae.a_hat,
            classical: classical_reference(sin2, &spec)?,
            mlae,
        });
    }
    let get = |r: Rule| runs.iter().find(|x| x.rule == r).map(|x| x.estimate);
    let estimate = match config.rule {
        Rule::Trapezoid | Rule::Simpson => combine_estimates(
            get(Rule::Left).unwrap_or(0.0),
            get(Rule::Right).unwrap_or(0.0),
            get(Rule::Midpoint).unwrap_or(0.0),
            config.rule,
        ),
        _ => runs[0].estimate,
    };
    let simpson = match (get(Rule::Left), get(Rule::Right), get(Rule::Midpoint)) {
        (Some(l), Some(r), Some(m)) => Some(combine_estimates(l, r, m, Rule::Simpson)),
        _ => None,
    };
    let exact = exact_sin2_integral(config.y);
    let order = config.rule.derivative_order();
    let bound =
        error_bound_on_interval(config.rule, config.n, sin2_derivative_max(order), config.y)?;
    Ok(IntegrateReport {
        config: config.clone(),
        estimate,
        exact,
        abs_error: (estimate - exact).abs(),
        classical_reference: classical_reference(sin2, &base)?,
        error_bound: bound.bound,
        oracle_calls: schedule.oracle_calls(config.optimized) * runs.len() as u64,
        runs,
        simpson,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSource {
    /// The printed three-decimal tables.
    Published,
    /// Tables from the model parameters.
    Computed,
    /// Externally supplied tables (CSV already parsed).
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonConfig {
    pub params: HestonParams,
    pub grids: GridSpec,
    pub source: TableSource,
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub k_max: Option<u32>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for HestonConfig {
    fn default() -> Self {
        Self {
            params: HestonParams::example(),
            grids: GridSpec::example(),
            source: TableSource::Published,
            shots: 0,
            k_max: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonReport {
    pub config: HestonConfig,
    pub tables: HestonTables,
    pub computed_tables: HestonTables,
    pub terminal_marginal: Vec<f64>,
    pub payoff_values: Vec<f64>,
    pub good_probability: f64,
    /// `2^{n_state} · P(good)`.
    pub normalized_payoff: f64,
    /// Unnormalized expected payoff from the circuit.
    pub expected_payoff: f64,
    pub classical_reference: f64,
    pub max_row_sum_error: f64,
    /// Computed tables against the published ones, for the example grids.
    pub deviation_from_published: Option<DeviationReport>,
    pub mlae: Option<MlaeResult>,
    pub mlae_normalized_payoff: Option<f64>,
}

/// Runs the pricing circuit with `external` tables when given, else the
/// tables named by `config.source`.
pub fn heston(config: &HestonConfig, external: Option<HestonTables>) -> Result<HestonReport> {
    let computed = HestonTables::compute(&config.params, &config.grids)?;
    let tables = match (&config.source, external) {
        (TableSource::External, Some(t)) => t,
        (TableSource::External, None) => {
            return Err(Error::InvalidArgument(
                "external table source without tables".into(),
            ))
        }
        (TableSource::Published, _) => HestonTables::published(),
        (TableSource::Computed, _) => computed.clone(),
    };
    let op = build_heston_A(&config.params, &config.grids, &tables)?;
    let state = simulate(&op.operator.circuit)?;
    let p = state.good_probability(&op.operator.flags);
    let normalized = op.normalized_payoff(p);
    let deviation = if config.grids == GridSpec::example() {
        Some(deviation_report(
            &HestonTables::published(),
            &computed,
            published_rounding,
        )?)
    } else {
        None
    };
    let (mlae, mlae_payoff) = match config.k_max {
        None => (None, None),
        Some(k_max) => {
            let schedule = MlaeSchedule::exponential(k_max, config.shots);
            let mut hits = Vec::new();
            for (ki, &k) in schedule.powers.iter().enumerate() {
                let power = grover_power(&op.operator, k, true)?;
                let s = simulate(&power.circuit)?;
                hits.push(if config.shots == 0 {
                    s.good_probability(&op.operator.flags)
                } else {
                    sample(
                        &s,
                        &op.operator.flags,
                        config.shots,
                        derive_seed(config.seed, &[ki as u64]),
                    )?
                    .good_hits as f64
                });
            }
            let r = mlae_estimate(&schedule, &hits)?;
            let v = op.normalized_payoff(r.a_hat);
            (Some(r), Some(v))
        }
    };
    Ok(HestonReport {
        config: config.clone(),
        terminal_marginal: tables.terminal_marginal(&config.grids)?,
        payoff_values: op.payoff.values.clone(),
        good_probability: p,
        normalized_payoff: normalized,
        expected_payoff: normalized * op.payoff.normalizer,
        classical_reference: expected_payoff_reference(&config.params, &config.grids, &tables)?,
        max_row_sum_error: tables.max_row_sum_error(),
        tables,
        computed_tables: computed,
        deviation_from_published: deviation,
        mlae,
        mlae_normalized_payoff: mlae_payoff,
    })
}

fn default_mitigate_shots() -> u64 {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigateConfig {
    pub y: f64,
    pub n: u32,
    pub k: usize,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "default_mitigate_shots")]
    pub shots: u64,
    #[serde(default = "default_mitigate_shots")]
    pub calibration_shots: u64,
    pub seeds: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_true")]
    pub optimized: bool,
}

impl Default for MitigateConfig {
    fn default() -> Self {
        Self {
            y: 0.7,
            n: 1,
            k: 2,
            noise: NoiseModel::default(),
            shots: 1_000_000,
            calibration_shots: 1_000_000,
            seeds: 50,
            base_seed: 0,
            optimized: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationSeedRun {
    pub seed: u64,
    /// Unmitigated estimate at fold factor 1.
    pub raw: f64,
    /// Readout-corrected estimates at fold factors 1, 3, 5.
    pub folded: FoldedRun,
    pub mitigated: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub config: MitigateConfig,
    pub truth: f64,
    pub cnots: usize,
    pub runs: Vec<MitigationSeedRun>,
    pub mean_raw_error: f64,
    pub mean_mitigated_error: f64,
    /// Fraction of seeds with `|mitigated − truth| < |raw − truth|`.
    pub improved_fraction: f64,
    /// Fraction of seeds where the mitigated value also beats the
    /// readout-corrected fold-1 value.
    pub improved_over_corrected_fraction: f64,
}

/// Readout correction plus CNOT-folding extrapolation on the `sin²` benchmark.
pub fn mitigate_demo(config: &MitigateConfig) -> Result<MitigationReport> {
    config.noise.validate()?;
    if config.shots == 0 || config.calibration_shots == 0 || config.seeds == 0 {
        return Err(Error::InvalidArgument(
            "shots, calibration_shots and seeds must be > 0".into(),
        ));
    }
    let spec = QuadratureSpec::new(Rule::Midpoint, config.n, config.y)?;
    let a = sin2_operator(&spec)?;
    let power = grover_power(&a, config.k, config.optimized)?;
    let truth = simulate(&power.circuit)?.good_probability(&a.flags);
    let lowered = lower(&power.circuit, &TopologySpec::all_to_all(a.num_qubits()))?;
    let flags = GoodStateFlags::new(a.flags.qubits().into_iter().map(|q| lowered.layout[q]))?;
    let width = a.num_qubits();
    let samplers = FoldedRun::FACTORS
        .iter()
        .map(|&f| NoisySampler::new(&fold_cnots(&lowered.circuit, f)?, &config.noise))
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::new();
    for s in 0..config.seeds {
        let seed = derive_seed(config.base_seed, &[s]);
        let cal = calibrate_readout(
            width,
            &config.noise,
            config.calibration_shots,
            derive_seed(seed, &[0]),
        )?;
        let mut raw = 0.0;
        let mut p = [0.0; 3];
        for (i, sampler) in samplers.iter().enumerate() {
            let counts = sampler.sample_counts(config.shots, derive_seed(seed, &[1 + i as u64]));
            let dist = counts_to_distribution(&counts);
            if i == 0 {
                raw = good_fraction(&dist, &flags);
            }
            p[i] = good_fraction(&correct_readout(&dist, &cal)?, &flags);
        }
        let folded = FoldedRun::new(p);
        let mitigated = richardson_zero_noise(&[(1.0, p[0]), (3.0, p[1]), (5.0, p[2])])?;
        runs.push(MitigationSeedRun {
            seed,
            raw,
            folded,
            mitigated,
        });
    }
    let n = runs.len() as f64;
    let err = |v: f64| (v - truth).abs();
    Ok(MitigationReport {
        config: config.clone(),
        truth,
        cnots: lowered.circuit.cnot_count(),
        mean_raw_error: runs.iter().map(|r| err(r.raw)).sum::<f64>() / n,
        mean_mitigated_error: runs.iter().map(|r| err(r.mitigated)).sum::<f64>() / n,
        improved_fraction: runs
            .iter()
            .filter(|r| err(r.mitigated) < err(r.raw))
            .count() as f64
            / n,
        improved_over_corrected_fraction: runs
            .iter()
            .filter(|r| err(r.mitigated) < err(r.folded.probabilities[0]))
            .count() as f64
            / n,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_small() {
        let rows = gate_count_grid(2, TopologyKind::AllToAll, true, &[1, 2, 4, 8, 16]).unwrap();
        let c: Vec<usize> = rows.iter().map(|r| r.cnots).collect();
        assert_eq!(c, vec![4, 7, 13, 25, 49]);
        let csv = gate_count_csv(&rows[..1]).unwrap();
        assert_eq!(
            csv,
            "qubits,topology,optimized,k,cnots\n2,all_to_all,true,1,4\n"
        );
        assert_eq!(
            gate_count_csv(&[]).unwrap(),
            "qubits,topology,optimized,k,cnots\n"
        );
    }

    #[test]
    fn integrate_exact_midpoint() {
        let cfg = IntegrateConfig {
            y: 0.5,
            n: 1,
            rule: Rule::Midpoint,
            k_max: 2,
            shots: 0,
            ..Default::default()
        };
        let r = integrate(&cfg).unwrap();
        assert!((r.estimate - 0.25).abs() < 1e-6);
        let cfg = IntegrateConfig {
            rule: Rule::Simpson,
            ..cfg
        };
        let r = integrate(&cfg).unwrap();
        assert_eq!(r.runs.len(), 3);
        assert!(r.simpson.is_some());
    }

    #[test]
    fn seeds_are_distinct() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
        assert_eq!(derive_seed(3, &[4, 5]), derive_seed(3, &[4, 5]));
    }
}
