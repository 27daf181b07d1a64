//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statpriv::amplify::{eps_shrink, viability_ratio};
use statpriv::divergence::hockey_stick;
use statpriv::figures::{self, default_rates, fig1_sizes, FIG1_EPSILONS, RATIO_EPSILONS};
use statpriv::oracle::oracle_tradeoff;
use statpriv::sampling::maximal_coupling_split;
use statpriv::tradeoff::{conjugate, tradeoff_from_pmfs};
use statpriv::verify::{self, Quantity, VerifyOptions, VerifyReport};
use statpriv::{Pmf, Query};

type Criterion<'a> = (&'static str, u64, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
    /// Time charged to the criterion when the work ran elsewhere.
    elapsed: Option<Duration>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
            elapsed: None,
        }
    }
}

/// Random pmf on a random subset of {0, …, max_outcomes−1}.
fn random_pmf(rng: &mut ChaCha8Rng, max_outcomes: usize) -> Pmf {
    let k = rng.gen_range(1..=max_outcomes);
    let mut values: Vec<usize> = (0..max_outcomes).collect();
    for i in 0..k {
        let j = rng.gen_range(i..max_outcomes);
        values.swap(i, j);
    }
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    Pmf::from_pairs(values[..k].iter().zip(&weights).map(|(&v, &w)| (v as f64, w / total))).unwrap()
}

fn matrix_rows(report: &VerifyReport, quantity: Quantity, elapsed: Duration, limit: u64) -> Outcome {
    let rows: Vec<_> = report.rows.iter().filter(|r| r.quantity == quantity).collect();
    let bad: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
    let worst = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let mut detail = format!("{} rows, {} failing", rows.len(), bad.len());
    if quantity == Quantity::Agreement {
        detail.push_str(&format!(", max |diff| {worst:e}"));
    }
    for r in bad.iter().take(3) {
        detail.push_str(&format!("; FAIL {} bound={} direct={}", r.case, r.pipeline, r.oracle));
    }
    detail.push_str(", timed as the shared verification matrix");
    let mut o = Outcome::new(!rows.is_empty() && bad.is_empty() && elapsed.as_secs() < limit, detail);
    o.elapsed = Some(elapsed);
    o
}

fn c5_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..100 {
        let mu = random_pmf(&mut rng, 8);
        let nu = random_pmf(&mut rng, 8);
        let t = tradeoff_from_pmfs(&mu, &nu);
        for eps in [0.0, 0.5, 1.0] {
            let hs = hockey_stick(&mu, &nu, eps).unwrap();
            let dual = 1.0 + conjugate(&t, -f64::exp(eps));
            worst = worst.max((hs - dual).abs());
            checks += 1;
        }
    }
    Outcome::new(worst <= 1e-9, format!("{checks} checks, max |diff| {worst:e}"))
}

fn c6_tradeoff_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..50 {
        let mu = random_pmf(&mut rng, 10);
        let nu = random_pmf(&mut rng, 10);
        let t = tradeoff_from_pmfs(&mu, &nu);
        let mut alphas: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        alphas.extend_from_slice(t.breakpoints());
        for a in alphas {
            let exact = oracle_tradeoff(&mu, &nu, a).unwrap();
            worst = worst.max((t.eval(a) - exact).abs());
            checks += 1;
        }
    }
    Outcome::new(worst <= 1e-10, format!("{checks} evaluations, max |diff| {worst:e}"))
}

fn c7_joint_convexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_slack = f64::INFINITY;
    let mut checks = 0;
    for _ in 0..200 {
        let mu = random_pmf(&mut rng, 6);
        let nu = random_pmf(&mut rng, 6);
        let split = maximal_coupling_split(&mu, &nu).unwrap();
        for eps in [0.0, 0.1, 0.5, 1.0] {
            let (lhs, rhs) = if split.lambda == 0.0 {
                (hockey_stick(&mu, &nu, 0.0).unwrap(), 0.0)
            } else {
                let shrunk = eps_shrink(eps, split.lambda).unwrap();
                let w = (shrunk - eps).exp();
                let a = hockey_stick(&split.mu_rest, &split.common, eps).unwrap();
                let b = hockey_stick(&split.mu_rest, &split.nu_rest, eps).unwrap();
                (
                    hockey_stick(&mu, &nu, shrunk).unwrap(),
                    split.lambda * ((1.0 - w) * a + w * b),
                )
            };
            worst_slack = worst_slack.min(rhs - lhs);
            checks += 1;
        }
    }
    Outcome::new(
        worst_slack >= -1e-10,
        format!("{checks} checks, min slack rhs-lhs {worst_slack:e}"),
    )
}

fn c8_fig2() -> Outcome {
    let rates = default_rates();
    let series = figures::fig2(0.5, 1000, &rates, &RATIO_EPSILONS).unwrap();
    let max_ratio = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0, f64::max);
    let at_one = series.iter().all(|s| {
        let last = s.points.last().unwrap();
        last.0 == 1.0 && (last.1 - 1.0).abs() <= 1e-9
    });
    let small = series.iter().find(|s| s.epsilon == 0.025).unwrap();
    let large = series.iter().find(|s| s.epsilon == 0.1).unwrap();
    let ordered = small.points.iter().zip(&large.points).all(|(a, b)| a.1 >= b.1);
    let lowest = small.points[0].1;
    Outcome::new(
        max_ratio <= 1.0 + 1e-9 && at_one && ordered,
        format!(
            "max ratio {max_ratio}, ratio 1 at lambda=1: {at_one}, eps 0.025 above eps 0.1 everywhere: {ordered}, ratio at lambda=0.1 eps=0.025: {lowest:.6}"
        ),
    )
}

fn c9_fig1() -> Outcome {
    let series = figures::fig1(0.5, &fig1_sizes(), &FIG1_EPSILONS).unwrap();
    let mut fails = Vec::new();
    for s in &series {
        let ys: Vec<f64> = s.points.iter().map(|p| p.1).collect();
        if ys.iter().any(|&y| y <= 0.0) {
            fails.push(format!("eps={}: nonpositive delta", s.epsilon));
        }
        let steps: Vec<f64> = ys.windows(2).map(|w| w[0] - w[1]).collect();
        if steps.iter().any(|&d| d < 0.0) {
            fails.push(format!("eps={}: delta increases", s.epsilon));
        }
        if steps.windows(2).any(|d| d[1] > d[0]) {
            fails.push(format!("eps={}: decrease grows", s.epsilon));
        }
    }
    let range: Vec<String> = series
        .iter()
        .map(|s| {
            format!(
                "eps={}: {:.4}..{:.4}",
                s.epsilon,
                s.points[0].1,
                s.points.last().unwrap().1
            )
        })
        .collect();
    let mut detail = range.join(", ");
    for f in &fails {
        detail.push_str(&format!("; {f}"));
    }
    Outcome::new(fails.is_empty(), detail)
}

fn c10_viability() -> Outcome {
    let entry = Pmf::bernoulli(0.5).unwrap();
    let q = Query::count();
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [25, 50, 75] {
        for eps in [0.1, 0.5] {
            let r = viability_ratio(&entry, &q, 100, m, eps).unwrap();
            ok &= r < 1.0;
            parts.push(format!("m={m},eps={eps}:{r:.4}"));
        }
    }
    Outcome::new(ok, format!("ratios {}", parts.join(" ")))
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_statpriv"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c11_determinism() -> Outcome {
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "curve", "--entry", "bern:0.5", "--n", "3", "--query", "count", "--eps", "0:2:0.5",
        ],
        vec![
            "curve",
            "--entry",
            "uniform:3",
            "--n",
            "4",
            "--query",
            "mean",
            "--eps",
            "0,0.5,1",
        ],
        vec![
            "amplify",
            "--technique",
            "wor:4,2",
            "--entry",
            "bern:0.3",
            "--query",
            "sum",
            "--eps",
            "0:2:0.25",
        ],
        vec![
            "amplify",
            "--technique",
            "poisson:4,0.5",
            "--entry",
            "bern:0.3",
            "--query",
            "sum",
            "--eps",
            "0:2:0.25",
        ],
        vec![
            "amplify",
            "--technique",
            "wr:3,2",
            "--entry",
            "bern:0.3",
            "--query",
            "sum",
            "--eps",
            "0:2:0.25",
        ],
        vec!["tradeoff", "--mu", "pmf:0=0.75;1=0.25", "--nu", "pmf:0=0.25;1=0.75"],
        vec![
            "tradeoff", "--entry", "bern:0.5", "--n", "4", "--query", "sum", "--sample", "2",
        ],
        vec!["figures", "fig1"],
        vec!["figures", "fig2"],
        vec!["figures", "fig3"],
        vec!["verify"],
        vec![
            "compare-poisson",
            "--entry",
            "bern:0.5",
            "--n",
            "20",
            "--query",
            "count",
            "--lambda",
            "0.3",
            "--eps",
            "0.1,0.5,1",
        ],
    ];
    let mut mismatches = Vec::new();
    let mut errors = Vec::new();
    for args in &commands {
        let (code_a, a) = run_cli(args);
        let (code_b, b) = run_cli(args);
        if code_a != 0 || code_b != 0 || a.is_empty() {
            errors.push(format!("`{}` exited {code_a}/{code_b}", args.join(" ")));
        } else if a != b {
            mismatches.push(args.join(" "));
        }
    }
    // Directory output for figures.
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let (code, _) = run_cli(&["figures", "fig2", "--out", d.path().to_str().unwrap()]);
        if code != 0 {
            errors.push("figures fig2 --out failed".into());
        }
    }
    if read_dir_bytes(dirs[0].path()) != read_dir_bytes(dirs[1].path()) {
        mismatches.push("figures fig2 --out".into());
    }
    let total = commands.len() + 1;
    Outcome::new(
        mismatches.is_empty() && errors.is_empty(),
        format!(
            "{total} commands run twice, {} differ, {} errored {}{}",
            mismatches.len(),
            errors.len(),
            mismatches.join("; "),
            errors.join("; ")
        ),
    )
}

fn main() {
    let start = Instant::now();
    let report = verify::run(VerifyOptions::default()).expect("verification matrix runs");
    let matrix_time = start.elapsed();

    let mut results: Vec<Criterion> = vec![
        (
            "oracle agreement",
            30,
            Box::new(|| matrix_rows(&report, Quantity::Agreement, matrix_time, 30)),
        ),
        (
            "without-replacement dominance",
            30,
            Box::new(|| matrix_rows(&report, Quantity::WorDominance, matrix_time, 30)),
        ),
        (
            "poisson dominance",
            60,
            Box::new(|| matrix_rows(&report, Quantity::PoissonDominance, matrix_time, 60)),
        ),
        (
            "with-replacement dominance",
            60,
            Box::new(|| {
                let mut o = matrix_rows(&report, Quantity::WrDominance, matrix_time, 60);
                let refused: Vec<String> = report
                    .refusals
                    .iter()
                    .map(|r| format!("{} (unchecked formula dominates: {})", r.case, r.unchecked_dominates))
                    .collect();
                o.detail.push_str(&format!(
                    "; {} configs excluded by the half-line precondition: {}",
                    refused.len(),
                    refused.join(", ")
                ));
                o
            }),
        ),
        ("duality", 5, Box::new(c5_duality)),
        ("trade-off oracle", 30, Box::new(c6_tradeoff_oracle)),
        ("advanced joint convexity", 5, Box::new(c7_joint_convexity)),
        ("figure 2 trend", 60, Box::new(c8_fig2)),
        ("figure 1 trend", 30, Box::new(c9_fig1)),
        ("viability chain", 30, Box::new(c10_viability)),
        ("determinism", u64::MAX, Box::new(c11_determinism)),
    ];

    let mut failed = 0;
    for (i, (name, limit, check)) in results.drain(..).enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = outcome.elapsed.unwrap_or(t.elapsed()).as_secs_f64();
        let pass = outcome.pass && secs < limit as f64;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<30} {} ({:.2}s) {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            secs,
            outcome.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
