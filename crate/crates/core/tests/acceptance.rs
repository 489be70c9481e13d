//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is printed on every run.
//! The process exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spechub::cli::{run, run_to_writer, Cli};
use spechub::coupling::{
    build_flow, max_flow, membership_cost, optimal_plan, plan_cost, reconstruct_full_coupling,
};
use spechub::draftjoint::{hub_joint, independent_joint, wor_joint};
use spechub::simplex::{overlap, top_token};
use spechub::synthlab::{LogitNoise, ToyMethod};
use spechub::treesim::{expected_tokens_given_rates, make_full_tree, run_sim, DistProcess, SyntheticProcess};
use spechub::verify::{
    analytic_rates_rrs, analytic_rates_spechub, exact_output_dist, exact_rates, mc_rates,
    spechub_hub_acceptance, Method,
};
use spechub::Distribution;

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

/// Published toy table: `(T, lambda, [RRS, RRSw, OTM, OTMw, SpecHub])`.
const TOY_TABLE: [(f64, f64, [f64; 5]); 6] = [
    (0.1, 0.7, [0.6273, 0.7120, 0.6380, 0.7345, 0.7402]),
    (0.1, 0.5, [0.3323, 0.4057, 0.3346, 0.4125, 0.4123]),
    (0.25, 0.7, [0.7354, 0.7653, 0.7846, 0.8321, 0.8113]),
    (0.25, 0.5, [0.4564, 0.4978, 0.4743, 0.5245, 0.4968]),
    (0.5, 0.7, [0.8090, 0.8122, 0.9037, 0.9150, 0.8500]),
    (0.5, 0.5, [0.6456, 0.6593, 0.7052, 0.7206, 0.6403]),
];
const TOY_TOLERANCE: f64 = 0.03;

/// Runs the `toy` command and returns `(T, lambda, method, mean)` rows.
fn toy_rows(extra: &[&str]) -> Vec<(f64, f64, ToyMethod, f64)> {
    let mut args = vec!["spechub", "toy", "--vocab", "50", "--pairs", "100", "--trials", "1000"];
    args.extend_from_slice(extra);
    let cli = Cli::try_parse_from(args).expect("valid arguments");
    let mut buf = Vec::new();
    run_to_writer(&cli, &mut buf).expect("toy command runs");
    let text = String::from_utf8(buf).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].parse().unwrap(),
                r[1].parse().unwrap(),
                r[2].parse().unwrap(),
                r[3].parse().unwrap(),
            )
        })
        .collect()
}

fn toy_deviation(rows: &[(f64, f64, ToyMethod, f64)]) -> (f64, usize, String) {
    let mut worst = 0.0f64;
    let mut misses = 0;
    let mut worst_cell = String::new();
    for (t, l, published) in TOY_TABLE {
        for (m, want) in ToyMethod::ALL.iter().zip(published) {
            let got = rows
                .iter()
                .find(|r| r.0 == t && r.1 == l && r.2 == *m)
                .map(|r| r.3)
                .expect("grid cell present");
            let dev = (got - want).abs();
            if dev > TOY_TOLERANCE {
                misses += 1;
            }
            if dev > worst {
                worst = dev;
                worst_cell = format!("T={t} lambda={l} {m}: {got:.4} vs {want:.4}");
            }
        }
    }
    (worst, misses, worst_cell)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let rows = toy_rows(&[]);
    let elapsed = start.elapsed();
    let (worst, misses, cell) = toy_deviation(&rows);
    // the same grid with normal logits, reported for comparison only
    let (g_worst, g_misses, _) = toy_deviation(&toy_rows(&["--noise", "gaussian"]));
    outcome(
        misses == 0 && elapsed < Duration::from_secs(300),
        format!(
            "{misses}/30 cells outside ±{TOY_TOLERANCE}, worst {worst:.4} ({cell}); {:.1}s; \
             with gaussian logits: {g_misses}/30 outside, worst {g_worst:.4}",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut checks = 0;
    let cases = [
        (Method::Single, 1),
        (Method::Rrs, 2),
        (Method::Rrs, 3),
        (Method::Rrsw, 2),
        (Method::Rrsw, 3),
        (Method::SpecHub, 2),
    ];
    for _ in 0..1000 {
        let v = rng.random_range(2..=16);
        let p = common::any_dist(&mut rng, v);
        let q = common::any_dist(&mut rng, v);
        for (method, k) in cases {
            if method == Method::Rrsw && q.support_size() < k {
                continue;
            }
            let out = exact_output_dist(method, &p, &q, k).expect("oracle runs");
            worst = worst.max(out.max_abs_diff(&p));
            checks += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(60),
        format!("{checks} (method, instance) checks, max |out - p| = {worst:.2e}, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn criterion_3() -> Outcome {
    let p = Distribution::new(vec![0.1, 0.6, 0.3]).unwrap();
    let q = Distribution::new(vec![0.5, 0.3, 0.2]).unwrap();
    let rrs = analytic_rates_rrs(&p, &q, 2).unwrap().total;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rrsw_cost = 1.0 - mc_rates(Method::Rrsw, &p, &q, 2, 100_000, &mut rng).unwrap().rates.total;
    let spechub = analytic_rates_spechub(&p, &q).unwrap().total;
    let (plan, _) = optimal_plan(&hub_joint(&q).unwrap(), &p).unwrap();
    let hub_cost = plan_cost(&plan);
    let pass = (rrs - 0.8).abs() < 1e-12
        && (rrsw_cost - 0.06).abs() <= 0.01
        && (spechub - 1.0).abs() < 1e-12
        && hub_cost.abs() < 1e-12;
    outcome(
        pass,
        format!("RRS total {rrs:.12}, RRSw cost {rrsw_cost:.4}, SpecHub total {spechub:.12}, hub max-flow cost {hub_cost:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    const N: usize = 10_000;
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut rrs_cond, mut rrs_bad) = (0, 0);
    let (mut otm_cond, mut otm_bad) = (0, 0);
    let mut top_bad = 0;
    let mut dom_bad = 0;
    for i in 0..N {
        let v = rng.random_range(2..=10);
        let p = common::any_dist(&mut rng, v);
        // every fourth draft is sharpened so the q(a) > 1/2 branch is well covered
        let mut q = common::peaked(&mut rng, v);
        if i % 4 == 0 {
            let a = top_token(&q);
            let mut w = q.probs().to_vec();
            w[a] += rng.random_range(0.5..3.0);
            q = Distribution::normalized(w).unwrap();
        }
        let a = top_token(&q);
        let qa = q[a];
        let alpha = overlap(&p, &q).unwrap();
        let spechub = analytic_rates_spechub(&p, &q).unwrap();
        let rrs = analytic_rates_rrs(&p, &q, 2).unwrap();
        if qa / (1.0 - qa) > 1.0 - alpha {
            rrs_cond += 1;
            if spechub.per_position[1] < rrs.per_position[1] - TOL {
                rrs_bad += 1;
            }
        }
        let otm = max_flow(&build_flow(&independent_joint(&q), &p).unwrap()).value;
        if qa > 0.5 {
            otm_cond += 1;
            if spechub.total < otm - TOL {
                otm_bad += 1;
            }
        }
        if (spechub_hub_acceptance(&p, &q).unwrap() - p[a]).abs() > TOL {
            top_bad += 1;
        }
        let otmw = max_flow(&build_flow(&wor_joint(&q).unwrap(), &p).unwrap()).value;
        let hub = max_flow(&build_flow(&hub_joint(&q).unwrap(), &p).unwrap()).value;
        let rrsw = exact_rates(Method::Rrsw, &p, &q, 2).unwrap().total;
        if rrs.total > otm + TOL || rrsw > otmw + TOL || spechub.total > hub + TOL {
            dom_bad += 1;
        }
    }
    outcome(
        rrs_bad + otm_bad + top_bad + dom_bad == 0,
        format!(
            "{N} instances: over-RRS {rrs_bad} violations ({rrs_cond} met the condition), \
             over-OTM {otm_bad} ({otm_cond} met), top token {top_bad}, dominance {dom_bad}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut marg = 0.0f64;
    let mut cost = 0.0f64;
    for _ in 0..100 {
        let v = rng.random_range(2..=16);
        let p = common::any_dist(&mut rng, v);
        let q = common::any_dist(&mut rng, v);
        for joint in [independent_joint(&q), wor_joint(&q).unwrap(), hub_joint(&q).unwrap()] {
            let (plan, flow) = optimal_plan(&joint, &p).unwrap();
            let full = reconstruct_full_coupling(&plan).unwrap();
            marg = marg.max(full.marginal_error(&joint.to_dense(), p.probs()));
            cost = cost.max((membership_cost(&full) - (1.0 - flow.value)).abs());
        }
    }
    outcome(
        marg <= 1e-9 && cost <= 1e-12,
        format!("100 instances x 3 joints: max marginal error {marg:.2e}, max |membership - (1 - flow)| {cost:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let q = Distribution::new(vec![0.5, 0.5]).unwrap();
    let p = Distribution::new(vec![1.0, 0.0]).unwrap();
    let value = max_flow(&build_flow(&independent_joint(&q), &p).unwrap()).value;
    outcome(value == 0.75, format!("flow value {value}"))
}

fn synthetic(temperature: f64, lambda: f64, seed: u64) -> DistProcess {
    DistProcess::Synthetic(SyntheticProcess {
        temperature,
        lambda,
        vocab: 50,
        seed,
        noise: LogitNoise::Uniform,
    })
}

fn criterion_7() -> Outcome {
    // (a) identical distributions: every draft level is accepted
    let same = synthetic(1.0, 1.0, 70);
    let mut a_ok = true;
    for d in 1..=6 {
        let chain = make_full_tree(1, d + 1).unwrap();
        let binary = make_full_tree(2, d + 1).unwrap();
        let runs = [
            (&chain, Method::Single),
            (&chain, Method::Rrs),
            (&chain, Method::Rrsw),
            (&binary, Method::Rrs),
            (&binary, Method::Rrsw),
            (&binary, Method::SpecHub),
        ];
        for (tree, method) in runs {
            let r = run_sim(tree, &same, method, 200, &mut ChaCha8Rng::seed_from_u64(d as u64)).unwrap();
            a_ok &= r.mean_tokens_per_step == (d + 1) as f64 && r.std_error == 0.0;
        }
    }

    // (b) ordering on the synthetic process, binary tree with four levels
    let tree = make_full_tree(2, 4).unwrap();
    let proc = synthetic(1.0, 0.7, 71);
    let sim = |m| run_sim(&tree, &proc, m, 10_000, &mut ChaCha8Rng::seed_from_u64(72)).unwrap();
    let (hub, rrs) = (sim(Method::SpecHub), sim(Method::Rrs));
    let gap = hub.mean_tokens_per_step - rrs.mean_tokens_per_step;
    let se = hub.std_error.hypot(rrs.std_error);
    let b_ok = gap > 3.0 * se;

    // (c) chain with independent per-node pairs against the closed form
    let chain = make_full_tree(1, 5).unwrap();
    let proc = synthetic(1.0, 0.5, 73);
    let r = run_sim(&chain, &proc, Method::Rrs, 100_000, &mut ChaCha8Rng::seed_from_u64(74)).unwrap();
    let expected = expected_tokens_given_rates(&chain, &r.per_position_rates).unwrap();
    let c_ok = (r.mean_tokens_per_step - expected).abs() <= 4.0 * r.std_error;

    outcome(
        a_ok && b_ok && c_ok,
        format!(
            "(a) {}; (b) SpecHub {:.4} vs RRS {:.4}, gap {gap:+.4}, 3 SE = {:.4}: {}; \
             (c) mean {:.4} vs closed form {expected:.4}, 4 SE = {:.4}: {}",
            if a_ok { "pass" } else { "FAIL" },
            hub.mean_tokens_per_step,
            rrs.mean_tokens_per_step,
            3.0 * se,
            if b_ok { "pass" } else { "FAIL" },
            r.mean_tokens_per_step,
            4.0 * r.std_error,
            if c_ok { "pass" } else { "FAIL" },
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.ndjson");
    let trace_arg = format!("trace:{}", trace.display());
    let commands: Vec<Vec<&str>> = vec![
        vec!["toy", "--pairs", "20", "--trials", "200"],
        vec!["toy", "--pairs", "20", "--trials", "200", "--format", "json"],
        vec!["rates", "--p", "0.1,0.6,0.3", "--q", "0.5,0.3,0.2", "--trials", "5000"],
        vec!["rates", "--p", "0.1,0.6,0.3", "--q", "0.5,0.3,0.2", "--format", "csv"],
        vec!["otm", "--p", "0.1,0.6,0.3", "--q", "0.5,0.3,0.2", "--joint", "wor", "--dump-plan"],
        vec!["simulate", "--steps", "2000"],
        vec!["simulate", "--steps", "500", "--format", "json"],
        vec!["gen-trace", "--steps", "50", "--depth", "3"],
    ];
    let mut identical = 0;
    for (i, args) in commands.iter().enumerate() {
        let outputs: Vec<Vec<u8>> = (0..2)
            .map(|rep| {
                let path = dir.path().join(format!("out-{i}-{rep}"));
                let mut full = vec!["spechub", "--seed", "8"];
                full.extend_from_slice(args);
                let cli = Cli::try_parse_from(full).unwrap();
                let mut buf = Vec::new();
                run_to_writer(&cli, &mut buf).unwrap();
                std::fs::write(&path, &buf).unwrap();
                std::fs::read(&path).unwrap()
            })
            .collect();
        if outputs[0] == outputs[1] {
            identical += 1;
        }
    }
    // a generated trace replayed twice through the simulator
    let gen = Cli::try_parse_from([
        "spechub", "--seed", "8", "--out", trace.to_str().unwrap(), "gen-trace", "--steps", "300", "--depth", "3",
    ])
    .unwrap();
    run(&gen).unwrap();
    let replay = || {
        let cli = Cli::try_parse_from(["spechub", "--seed", "8", "simulate", "--steps", "300", "--process", &trace_arg])
            .unwrap();
        let mut buf = Vec::new();
        run_to_writer(&cli, &mut buf).unwrap();
        buf
    };
    let replay_ok = replay() == replay();
    let total = commands.len();
    outcome(
        identical == total && replay_ok,
        format!("{identical}/{total} command outputs byte-identical across reruns; trace replay identical: {replay_ok}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 toy table within ±0.03", criterion_1),
        ("2 output distribution equals target", criterion_2),
        ("3 worked instance", criterion_3),
        ("4 theorem property suites", criterion_4),
        ("5 full coupling reconstruction", criterion_5),
        ("6 hand-computed max flow", criterion_6),
        ("7 simulation properties", criterion_7),
        ("8 determinism", criterion_8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
