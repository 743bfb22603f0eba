//! Acceptance checks, one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use ampload::grover::{grover_power, grover_power_plain};
use ampload::heston::{
    build_heston_A, deviation_report, expected_payoff_reference, published_rounding, GridSpec,
    HestonParams, HestonTables,
};
use ampload::mitigation::{correct_readout, richardson_unclipped, NoiseModel, ReadoutCalibration};
use ampload::mlae::{mlae_estimate, MlaeSchedule};
use ampload::pipelines::{
    derive_seed, gate_count_grid, mitigate_demo, sin2_operator, MitigateConfig,
};
use ampload::quadrature::{
    error_bound_on_interval, exact_sin2_integral, sin2_derivative_max, QuadratureSpec, Rule,
};
use ampload::spin_echo::verify_equivalence;
use ampload::state_prep::{
    add, load_process, multiply, FlaggedOperator, MarkovProcessSpec, RotationOracle,
};
use ampload::statevector::{sample, simulate};
use ampload::transpile::TopologyKind;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn good_probability(a: &FlaggedOperator) -> f64 {
    simulate(&a.circuit).unwrap().good_probability(&a.flags)
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn gate_counts() -> Outcome {
    let ks = [1, 2, 4, 8, 16];
    let cases = [
        (2, TopologyKind::AllToAll, true, [4, 7, 13, 25, 49]),
        (2, TopologyKind::AllToAll, false, [7, 12, 22, 42, 82]),
        (3, TopologyKind::AllToAll, true, [13, 23, 43, 83, 163]),
        (3, TopologyKind::AllToAll, false, [18, 32, 60, 116, 228]),
    ];
    let mut mismatches = Vec::new();
    for (q, topo, opt, expected) in cases {
        let got: Vec<usize> = gate_count_grid(q, topo, opt, &ks)
            .unwrap()
            .iter()
            .map(|r| r.cnots)
            .collect();
        if got != expected {
            mismatches.push(format!("{q}q {topo} opt={opt}: {got:?} != {expected:?}"));
        }
    }
    let linear: Vec<usize> = gate_count_grid(3, TopologyKind::LinearChain, true, &ks)
        .unwrap()
        .iter()
        .map(|r| r.cnots)
        .collect();
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("all four columns match; linear-chain 3q optimized {linear:?}")
        } else {
            mismatches.join("; ")
        },
    )
}

fn heston_probability() -> Outcome {
    let grids = GridSpec::example();
    let published = HestonTables::published();
    // full-precision tables behind the printed ones
    let mut params = HestonParams::example();
    params.dt = 0.1;
    let full = HestonTables::compute(&params, &grids).unwrap();
    let dev = deviation_report(&published, &full, published_rounding).unwrap();
    let h = build_heston_A(&params, &grids, &full).unwrap();
    let value = h.normalized_payoff(good_probability(&h.operator));

    let h_pub = build_heston_A(&params, &grids, &published).unwrap();
    let value_pub = h_pub.normalized_payoff(good_probability(&h_pub.operator));
    let nested =
        expected_payoff_reference(&params, &grids, &published).unwrap() / h_pub.payoff.normalizer;

    let marginal = [0.040, 0.725, 0.233, 0.002];
    let classical: f64 = marginal
        .iter()
        .zip(&h.payoff.values)
        .map(|(m, g)| m * g)
        .sum();

    let pass = dev.entries_beyond_rounding == 0
        && (value - 0.1185).abs() <= 5e-4
        && (classical - 0.1185).abs() < 1e-12
        && (value_pub - nested).abs() < 1e-12;
    outcome(
        pass,
        format!(
            "2^4 P = {value:.6} (tables agree with every printed entry: {}), printed-table circuit {value_pub:.6}, sum marginal*payoff = {classical:.4}",
            dev.entries_beyond_rounding == 0
        ),
    )
}

fn spin_echo_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut counts_ok = true;
    for n in [1, 2] {
        let spec = QuadratureSpec::new(Rule::Midpoint, n, 0.7).unwrap();
        let a = sin2_operator(&spec).unwrap();
        for k in [1, 2, 4, 8] {
            let plain = grover_power_plain(&a, k).unwrap();
            let opt = grover_power(&a, k, true).unwrap();
            counts_ok &= opt.optimized
                && opt.a_applications == k + 1
                && plain.a_applications == 2 * k + 1
                && opt.circuit.multiplexer_count() == k + 1
                && plain.circuit.multiplexer_count() == 2 * k + 1;
            let eq = verify_equivalence(&plain.circuit, &opt.circuit, 1e-10).unwrap();
            worst = worst.max(eq.max_deviation);
        }
    }
    outcome(
        worst <= 1e-10 && counts_ok,
        format!("max deviation {worst:.2e}, oracle counts k+1 vs 2k+1: {counts_ok}"),
    )
}

fn random_oracle(rng: &mut ChaCha8Rng, controls: &[usize], target: usize) -> RotationOracle {
    let values: Vec<f64> = (0..1usize << controls.len())
        .map(|_| rng.random::<f64>())
        .collect();
    RotationOracle::from_values(&values, controls, target).unwrap()
}

fn random_problems(count: usize, seed: u64) -> Vec<(String, FlaggedOperator, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..count {
        let n = 1 + i % 4;
        let controls: Vec<usize> = (0..n).collect();
        let f = random_oracle(&mut rng, &controls, n);
        let g = random_oracle(&mut rng, &controls, n + 1);
        let h = random_oracle(&mut rng, &controls, n);
        let scale = 1.0 / (1usize << n) as f64;
        let fv = f.values();
        let gv = g.values();
        let hv = h.values();
        let prod: f64 = fv.iter().zip(&gv).map(|(a, b)| a * b).sum::<f64>() * scale;
        let sum: f64 = fv.iter().zip(&hv).map(|(a, b)| 0.5 * (a + b)).sum::<f64>() * scale;
        out.push((format!("multiply n={n}"), multiply(&f, &g).unwrap(), prod));
        out.push((
            format!("add n={n}"),
            add(&f, &h, n + 1)
                .unwrap()
                .with_uniform_prefix(&controls)
                .unwrap(),
            sum,
        ));

        // process with up to three registers, total width at most 10
        let steps = 1 + i % 3;
        let max_reg = if steps == 3 { 2 } else { 3 };
        let sizes: Vec<usize> = (0..steps).map(|_| rng.random_range(1..=max_reg)).collect();
        let f0: Vec<f64> = (0..1usize << sizes[0])
            .map(|_| rng.random::<f64>())
            .collect();
        let ft: Vec<Vec<f64>> = (1..steps)
            .map(|t| {
                (0..1usize << (sizes[t - 1] + sizes[t]))
                    .map(|_| rng.random::<f64>())
                    .collect()
            })
            .collect();
        let spec = MarkovProcessSpec::new(sizes.clone(), f0, ft).unwrap();
        let reference = spec.classical_value();
        out.push((
            format!("process {sizes:?}"),
            load_process(&spec).unwrap(),
            reference,
        ));
    }
    out
}

fn amplification_law() -> Outcome {
    let mut problems: Vec<(String, FlaggedOperator)> = Vec::new();
    for n in 1..=4 {
        for rule in [Rule::Left, Rule::Right, Rule::Midpoint] {
            let spec = QuadratureSpec::new(rule, n, 0.7).unwrap();
            problems.push((format!("sin2 {rule} n={n}"), sin2_operator(&spec).unwrap()));
        }
    }
    for (name, op, _) in random_problems(9, 11) {
        problems.push((name, op));
    }
    let h = build_heston_A(
        &HestonParams::example(),
        &GridSpec::example(),
        &HestonTables::published(),
    )
    .unwrap();
    problems.push(("heston".into(), h.operator));

    let mut worst: f64 = 0.0;
    let mut worst_name = String::new();
    for (name, a) in &problems {
        assert!(a.num_qubits() <= 10, "{name} too wide");
        let theta = good_probability(a).sqrt().asin();
        for k in 0..=8 {
            for optimized in [false, true] {
                let c = grover_power(a, k, optimized).unwrap().circuit;
                let p = simulate(&c).unwrap().good_probability(&a.flags);
                let expected = ((2 * k + 1) as f64 * theta).sin().powi(2);
                let d = (p - expected).abs();
                if d > worst {
                    worst = d;
                    worst_name = format!("{name} k={k}");
                }
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!(
            "{} problems, k = 0..=8, max deviation {worst:.2e} ({worst_name})",
            problems.len()
        ),
    )
}

fn quadrature_convergence() -> Outcome {
    let y = 0.7;
    let exact = exact_sin2_integral(y);
    let targets = [
        (Rule::Left, -1.0),
        (Rule::Midpoint, -2.0),
        (Rule::Trapezoid, -2.0),
        (Rule::Simpson, -4.0),
    ];
    let ns: Vec<u32> = (1..=8).collect();
    // circuit estimates y · P(good) per base rule
    let base = |rule: Rule, n: u32| {
        let spec = QuadratureSpec::new(rule, n, y).unwrap();
        y * good_probability(&sin2_operator(&spec).unwrap())
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (rule, target) in targets {
        let mut log_err = Vec::new();
        let mut bounded = true;
        for &n in &ns {
            let est = ampload::quadrature::combine_estimates(
                base(Rule::Left, n),
                base(Rule::Right, n),
                base(Rule::Midpoint, n),
                rule,
            );
            let est = if rule == Rule::Left {
                base(Rule::Left, n)
            } else {
                est
            };
            let err = (est - exact).abs();
            let bound =
                error_bound_on_interval(rule, n, sin2_derivative_max(rule.derivative_order()), y)
                    .unwrap()
                    .bound;
            bounded &= err <= bound;
            log_err.push(err.log2());
        }
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let s = slope(&xs, &log_err);
        let ok = (s - target).abs() <= 0.3 && bounded;
        pass &= ok;
        parts.push(format!("{rule} {s:.2} (bounded {bounded})"));
    }
    outcome(pass, format!("slopes: {}", parts.join(", ")))
}

fn mlae_scaling() -> Outcome {
    let spec = QuadratureSpec::new(Rule::Midpoint, 1, 0.7).unwrap();
    let a_op = sin2_operator(&spec).unwrap();
    let a = good_probability(&a_op);
    let shots = 8192;
    let seeds = 50;
    let k_top = 6;
    let mut powers_states = vec![(0usize, simulate(&a_op.circuit).unwrap())];
    for j in 0..=k_top {
        let k = 1usize << j;
        powers_states.push((
            k,
            simulate(&grover_power(&a_op, k, true).unwrap().circuit).unwrap(),
        ));
    }
    let mut calls = Vec::new();
    let mut errors = Vec::new();
    let mut beats = true;
    for k_max in 0..=k_top as u32 {
        let schedule = MlaeSchedule::exponential(k_max, shots);
        let mut total = 0.0;
        for s in 0..seeds {
            let hits: Vec<f64> = schedule
                .powers
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let st = &powers_states.iter().find(|(p, _)| *p == k).unwrap().1;
                    sample(
                        st,
                        &a_op.flags,
                        shots,
                        derive_seed(s, &[k_max as u64, i as u64]),
                    )
                    .unwrap()
                    .good_hits as f64
                })
                .collect();
            total += (mlae_estimate(&schedule, &hits).unwrap().a_hat - a).abs();
        }
        let mean = total / seeds as f64;
        let m = schedule.oracle_calls(true) as f64;
        // mean absolute error of plain Monte Carlo with m samples
        let classical = (a * (1.0 - a) / m).sqrt() * (2.0 / std::f64::consts::PI).sqrt();
        beats &= mean < classical;
        calls.push(m.ln());
        errors.push(mean.ln());
    }
    let s = slope(&calls, &errors);
    outcome(
        (s + 1.0).abs() <= 0.2 && beats,
        format!("a = {a:.4}, slope {s:.3}, every point below the 1/sqrt(M) line: {beats}"),
    )
}

fn combinator_oracles() -> Outcome {
    let problems = random_problems(50, 7);
    let mut worst: f64 = 0.0;
    let mut kinds = [0usize; 3];
    for (name, op, reference) in &problems {
        assert!(op.num_qubits() <= 10, "{name} too wide");
        let p = good_probability(op);
        worst = worst.max((p - reference).abs());
        let idx = if name.starts_with("multiply") {
            0
        } else if name.starts_with("add") {
            1
        } else {
            2
        };
        kinds[idx] += 1;
    }
    outcome(
        worst <= 1e-10 && kinds.iter().all(|&k| k >= 50),
        format!("multiply/add/process instances {kinds:?}, max deviation {worst:.2e}"),
    )
}

fn mitigation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rich_worst: f64 = 0.0;
    for _ in 0..100 {
        let (c0, c1, c2) = (
            rng.random::<f64>(),
            rng.random::<f64>() - 0.5,
            0.1 * (rng.random::<f64>() - 0.5),
        );
        let pts: Vec<(f64, f64)> = [1.0, 3.0, 5.0]
            .iter()
            .map(|&x| (x, c0 + c1 * x + c2 * x * x))
            .collect();
        rich_worst = rich_worst.max((richardson_unclipped(&pts).unwrap() - c0).abs());
    }

    let noise = NoiseModel::default();
    let mut readout_worst: f64 = 0.0;
    for n in 1..=4 {
        let dim = 1usize << n;
        let confusion = DMatrix::from_fn(dim, dim, |i, j| noise.readout_column(n, j)[i]);
        let cal = ReadoutCalibration::new(confusion.clone()).unwrap();
        for _ in 0..10 {
            let mut p: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= total);
            let measured = &confusion * nalgebra::DVector::from_vec(p.clone());
            let back = correct_readout(measured.as_slice(), &cal).unwrap();
            let d = back
                .iter()
                .zip(&p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            readout_worst = readout_worst.max(d);
        }
    }

    let report = mitigate_demo(&MitigateConfig::default()).unwrap();
    let pass = rich_worst <= 1e-13 && readout_worst <= 1e-8 && report.improved_fraction >= 0.9;
    outcome(
        pass,
        format!(
            "richardson max error {rich_worst:.1e}, readout inversion {readout_worst:.1e}, mitigated better in {:.0}% of {} seeds (mean error raw {:.2e}, mitigated {:.2e})",
            100.0 * report.improved_fraction,
            report.runs.len(),
            report.mean_raw_error,
            report.mean_mitigated_error
        ),
    )
}

fn heston_self_computed() -> Outcome {
    let grids = GridSpec::example();
    let mut pass = true;
    let mut parts = Vec::new();
    for dt in [1.0, 0.1] {
        let mut params = HestonParams::example();
        params.dt = dt;
        let tables = HestonTables::compute(&params, &grids).unwrap();
        let rows = tables.max_row_sum_error();
        let h = build_heston_A(&params, &grids, &tables).unwrap();
        let circuit = h.normalized_payoff(good_probability(&h.operator)) * h.payoff.normalizer;
        let nested = expected_payoff_reference(&params, &grids, &tables).unwrap();
        let dev =
            deviation_report(&HestonTables::published(), &tables, published_rounding).unwrap();
        pass &= rows <= 1e-12 && (circuit - nested).abs() <= 1e-9;
        parts.push(format!(
            "dt={dt}: row-sum error {rows:.1e}, circuit-nested {:.1e}, max deviation from printed tables {:.4} ({} entries beyond rounding)",
            (circuit - nested).abs(),
            dev.max_abs_deviation,
            dev.entries_beyond_rounding
        ));
        if dt == 1.0 {
            let doc = std::fs::read_to_string(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../docs/heston_table_deviation.md"
            ))
            .unwrap_or_default();
            let documented = doc.contains(&format!("{:.4}", dev.max_abs_deviation));
            pass &= documented;
            parts.push(format!("deviation documented: {documented}"));
        }
    }
    outcome(pass, parts.join("; "))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Duration); 9] = [
        ("gate counts", gate_counts, Duration::from_secs(1)),
        (
            "heston good-state probability",
            heston_probability,
            Duration::from_secs(1),
        ),
        (
            "spin-echo equivalence",
            spin_echo_equivalence,
            Duration::from_secs(10),
        ),
        (
            "amplification law",
            amplification_law,
            Duration::from_secs(30),
        ),
        (
            "quadrature convergence",
            quadrature_convergence,
            Duration::from_secs(5),
        ),
        ("mlae scaling", mlae_scaling, Duration::from_secs(300)),
        (
            "combinator oracles",
            combinator_oracles,
            Duration::from_secs(60),
        ),
        ("mitigation", mitigation, Duration::from_secs(300)),
        (
            "heston self-computed tables",
            heston_self_computed,
            Duration::from_secs(60),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} [{:.2}s / {}s] {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
