//! Acceptance criteria. Runs as a plain binary so every criterion prints
//! its PASS/FAIL line even when it passes; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use hsb::environments::SinusoidalEnv;
use hsb::evaluation::simulate;
use hsb::experiment::verify::{
    initialization_suite, oracle_equivalence_suites, quantization_suite, small_instances, flat_mixture_bound_suite,
};
use hsb::experiment::{mean_and_stderr, presentation_rng, run_replay, run_synthetic, ExperimentConfig, PolicyFactory};
use hsb::hierarchy::{
    arbitrary_position_splitting, arbitrary_splitting, binary_tree, kary_tree, kgroup_lexicographic,
    lexicographic_graph, CellGrid,
};
use hsb::learner::{HsbLearner, Mutation};
use hsb::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, outcome: Result<Outcome>, elapsed: Duration) -> bool {
    let (pass, detail) = match outcome {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {id:>2} {:<4} {name} ({:.1} s): {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn oracle_suites() -> Result<(Outcome, Outcome)> {
    let instances = small_instances()?;
    let seeds: Vec<u64> = (0..50).collect();
    let start = Instant::now();
    let (weights, arms) = oracle_equivalence_suites(&instances, &seeds, 200, Mutation::None)?;
    let secs = start.elapsed().as_secs_f64();
    let fast = secs < 10.0;
    let wrap = |s: hsb::experiment::verify::SuiteResult| Outcome {
        pass: s.pass && fast,
        detail: format!(
            "{} checks over {} instances, worst relative error {:.2e} (limit 1e-9), both suites in {secs:.2} s (limit 10 s)",
            s.checks,
            instances.len(),
            s.worst
        ),
    };
    Ok((wrap(weights), wrap(arms)))
}

fn initialization() -> Result<Outcome> {
    let small = initialization_suite(&small_instances()?, Mutation::None)?;
    // node weights of large structures start at one as well
    let line = |n| CellGrid::new(vec![n]);
    let large = vec![
        binary_tree(&line(1 << 12)?)?,
        kary_tree(&line(729)?, 3)?,
        lexicographic_graph(&line(24)?)?,
        kgroup_lexicographic(&line(30)?, 3)?,
        arbitrary_splitting(&line(10)?)?,
        arbitrary_position_splitting(&CellGrid::uniform(2, 64)?, 3)?,
    ];
    let mut worst: f64 = 0.0;
    let mut nodes = 0;
    for s in large {
        let s = Arc::new(s);
        let learner = HsbLearner::new(Arc::clone(&s), 4, 0.1)?;
        for node in 0..s.node_count() {
            worst = worst.max((learner.log_w(node).exp() - 1.0).abs());
            nodes += 1;
        }
    }
    let pass = small.pass && worst <= 1e-12;
    Ok(Outcome {
        pass,
        detail: format!(
            "{} enumerated nodes, worst deviation {:.1e}; {nodes} nodes of six large structures, worst |w - 1| {worst:.1e} (limit 1e-12)",
            small.checks, small.worst
        ),
    })
}

fn mixture_bound() -> Result<Outcome> {
    let seeds: Vec<u64> = (0..20).collect();
    let s = flat_mixture_bound_suite(&seeds, 5000)?;
    Ok(Outcome {
        pass: s.pass,
        detail: s.detail,
    })
}

fn synthetic_config(phase: &str, seeds: usize, presentations: usize, algorithms: &str) -> Result<ExperimentConfig> {
    let seeds: Vec<String> = (1..=seeds).map(|s| s.to_string()).collect();
    ExperimentConfig::from_toml_str(&format!(
        "horizon = 100000\nseeds = [{}]\npresentations = {presentations}\ncurve_stride = 100000\n\n\
         [environment]\nkind = \"sinusoidal\"\nphase = \"{phase}\"\n\n{algorithms}",
        seeds.join(", ")
    ))
}

const HSB_BT: &str = "[[algorithms]]\nalgorithm = \"hsb-bt\"\nlabel = \"hsb-bt-5\"\ndepth = 5\nregions = 3\n";

fn hierarchical_bound() -> Result<Outcome> {
    let start = Instant::now();
    let out = run_synthetic(&synthetic_config("stationary", 10, 1, HSB_BT)?)?;
    let secs = start.elapsed().as_secs_f64();
    let a = &out.algorithms[0];
    let Some(check) = &a.bound_check else {
        return Ok(Outcome {
            pass: false,
            detail: "no bound was computed".into(),
        });
    };
    Ok(Outcome {
        pass: check.pass && secs < 120.0,
        detail: format!(
            "N=32 M=3 R=3 eta={:.5}: mean regret {:.1} (+/- {:.1}) vs bound {:.1}, {secs:.1} s (limit 120 s)",
            a.info.eta.unwrap_or(f64::NAN),
            a.mean_regret,
            a.regret_stderr,
            check.bound
        ),
    })
}

fn stationary_ordering() -> Result<Outcome> {
    let algorithms = [
        "[[algorithms]]\nalgorithm = \"hsb-bt\"\nlabel = \"hsb-bt-2\"\ndepth = 2\nregions = 3\n",
        HSB_BT,
        "[[algorithms]]\nalgorithm = \"hsb-bt\"\nlabel = \"hsb-bt-10\"\ndepth = 10\nregions = 3\n",
        "[[algorithms]]\nalgorithm = \"sexp3\"\ndepth = 5\n",
        "[[algorithms]]\nalgorithm = \"exp3\"\n",
    ]
    .join("\n");
    let out = run_synthetic(&synthetic_config("stationary", 10, 10, &algorithms)?)?;
    let loss: Vec<f64> = out.algorithms.iter().map(|a| a.final_loss).collect();
    let (d2, d5, d10, sexp3, exp3) = (loss[0], loss[1], loss[2], loss[3], loss[4]);
    let checks = [
        ("d5 < sexp3", d5 < sexp3),
        ("d5 < exp3", d5 < exp3),
        ("d10 <= d5", d10 <= d5),
        ("d5 <= d2", d5 <= d2),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Ok(Outcome {
        pass: failed.is_empty(),
        detail: format!(
            "final loss d2 {d2:.4}, d5 {d5:.4}, d10 {d10:.4}, sexp3 {sexp3:.4}, exp3 {exp3:.4}{}",
            if failed.is_empty() {
                String::new()
            } else {
                format!("; violated: {}", failed.join(", "))
            }
        ),
    })
}

fn switched_ordering() -> Result<Outcome> {
    let algorithms = [
        HSB_BT,
        "[[algorithms]]\nalgorithm = \"sexp3\"\ndepth = 5\n",
        "[[algorithms]]\nalgorithm = \"exp3\"\n",
    ]
    .join("\n");
    let out = run_synthetic(&synthetic_config("switched", 10, 10, &algorithms)?)?;
    let q: Vec<f64> = out.algorithms.iter().map(|a| a.final_quarter_loss).collect();
    Ok(Outcome {
        pass: q[0] < q[1] && q[0] < q[2],
        detail: format!(
            "last-quarter loss after the switch: hsb-bt-5 {:.4}, sexp3 {:.4}, exp3 {:.4}",
            q[0], q[1], q[2]
        ),
    })
}

fn quantization() -> Result<Outcome> {
    let s = quantization_suite(&[4, 16, 64, 256], 1_000_000)?;
    Ok(Outcome {
        pass: s.pass,
        detail: s.detail,
    })
}

fn replay_unbiased() -> Result<Outcome> {
    let seeds: Vec<u64> = (1..=20).collect();
    let horizon: u64 = 100_000;
    let arms = SinusoidalEnv::ARMS;
    let cfg = ExperimentConfig::from_toml_str(&format!(
        "horizon = {horizon}\nseeds = {seeds:?}\n\n[environment]\nkind = \"replay\"\n\n{HSB_BT}\n\
         [[algorithms]]\nalgorithm = \"exp3\"\n"
    ))?;
    let replay = run_replay(&cfg, None)?;
    let online_rounds = horizon / arms as u64;
    let mut details = Vec::new();
    let mut pass = true;
    for (spec, summary) in cfg.algorithms.iter().zip(&replay.algorithms) {
        let factory = PolicyFactory::new(spec, 1, arms, online_rounds)?;
        let mut rates = Vec::new();
        for &seed in &seeds {
            // fresh data so the online runs share nothing with the logs
            let rounds = SinusoidalEnv::stationary(online_rounds).generate(seed + 1_000_000);
            let mut policy = factory.make()?;
            let records = simulate(policy.as_mut(), &rounds, &mut presentation_rng(seed, 0))?;
            rates.push(records.iter().map(|r| r.loss).sum::<f64>() / records.len() as f64);
        }
        let (online, online_se) = mean_and_stderr(&rates);
        let se = (online_se.powi(2) + summary.loss_rate_stderr.powi(2)).sqrt();
        let gap = (summary.mean_loss_rate - online).abs();
        let ok = gap <= 3.0 * se;
        pass &= ok;
        details.push(format!(
            "{}: replay {:.4} vs online {online:.4}, |diff| {gap:.4} <= 3 SE {:.4}: {ok}",
            summary.info.label,
            summary.mean_loss_rate,
            3.0 * se
        ));
    }
    Ok(Outcome {
        pass,
        detail: details.join("; "),
    })
}

fn complexity() -> Result<Outcome> {
    let n = 1usize << 20;
    let arms = 8;
    let structure = Arc::new(binary_tree(&CellGrid::new(vec![n])?)?);
    let mut learner = HsbLearner::new(structure, arms, 0.05)?;
    let limit = arms * (20 + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_touch = 0;
    let mut times = Vec::with_capacity(20_000);
    for t in 0..21_000 {
        let context = [rng.gen::<f64>()];
        let loss: f64 = rng.gen();
        let start = Instant::now();
        let d = learner.select_arm(&context, &mut rng)?;
        learner.update(&d, loss)?;
        let elapsed = start.elapsed();
        if t >= 1000 {
            times.push(elapsed);
        }
        let stats = learner.touch_stats();
        worst_touch = worst_touch.max(stats.select_evaluations).max(stats.update_writes * arms);
    }
    times.sort();
    let median = times[times.len() / 2];
    let pass = worst_touch <= limit && median < Duration::from_micros(50);
    Ok(Outcome {
        pass,
        detail: format!(
            "N=2^20 M=8: most node-arm touches per round {worst_touch} (limit {limit}), median select+update {:.2} us (limit 50 us)",
            median.as_secs_f64() * 1e6
        ),
    })
}

fn collect_files(dir: &Path, into: &mut BTreeMap<PathBuf, Vec<u8>>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, into)?;
        } else {
            into.insert(path.strip_prefix(dir).unwrap_or(&path).to_path_buf(), std::fs::read(&path)?);
        }
    }
    Ok(())
}

fn determinism() -> Result<Outcome> {
    let work = tempfile::tempdir()?;
    let root = work.path();
    std::fs::write(
        root.join("synthetic.toml"),
        "horizon = 3000\nseeds = [4, 9]\npresentations = 2\ncurve_stride = 100\nrecord_rounds = true\n\n\
         [environment]\nkind = \"sinusoidal\"\nphase = \"switched\"\n\n\
         [[algorithms]]\nalgorithm = \"hsb-bt\"\ndepth = 4\nregions = 2\n\n\
         [[algorithms]]\nalgorithm = \"hsb-kgroup\"\nleaves = 12\nk = 3\neta = 0.05\n\n\
         [[algorithms]]\nalgorithm = \"sexp3\"\ndepth = 3\n\n[[algorithms]]\nalgorithm = \"exp3\"\n",
    )?;
    std::fs::write(
        root.join("replay.toml"),
        "horizon = 6000\nseeds = [2, 5]\npresentations = 2\n\n[environment]\nkind = \"replay\"\n\n\
         [[algorithms]]\nalgorithm = \"hsb-bt\"\ndepth = 5\nregions = 3\n\n[[algorithms]]\nalgorithm = \"exp3\"\n",
    )?;
    std::fs::write(
        root.join("ecoc.toml"),
        "horizon = 900\nseeds = [1, 2]\n\n[environment]\nkind = \"ecoc\"\nclasses = 4\nfeatures = 8\nsamples = 900\nepochs = 3\n\n\
         [[algorithms]]\nalgorithm = \"hsb-aps\"\ndepth = 2\nregions = 4\n\n\
         [[algorithms]]\nalgorithm = \"sexp3\"\ndepth = 1\n\n[[algorithms]]\nalgorithm = \"hamming\"\n",
    )?;
    let bin = env!("CARGO_BIN_EXE_hsb");
    let run = |args: &[&str], out: &Path| -> Result<Vec<u8>> {
        std::fs::create_dir_all(out)?;
        let output = Command::new(bin).args(args).current_dir(out).output()?;
        if !output.status.success() {
            return Err(hsb::Error::Protocol(format!(
                "hsb {} failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&output.stderr)
            )));
        }
        Ok(output.stdout)
    };
    let cfg = |name: &str| root.join(name).to_string_lossy().into_owned();
    let (synthetic, replay, ecoc) = (cfg("synthetic.toml"), cfg("replay.toml"), cfg("ecoc.toml"));
    let subcommands: Vec<(&str, Vec<&str>)> = vec![
        ("run-synthetic", vec!["run-synthetic", "--config", &synthetic, "--output-dir", "."]),
        ("run-replay", vec!["run-replay", "--config", &replay, "--output-dir", "."]),
        ("run-ecoc", vec!["run-ecoc", "--config", &ecoc, "--output-dir", "."]),
        ("verify", vec!["verify", "--seeds", "3", "--rounds", "60", "--json"]),
        (
            "dump-structure",
            vec![
                "dump-structure", "--algorithm", "hsb-kgroup", "--leaves", "6", "--k", "3", "--arms", "2",
                "--out", "structure.json", "--experts-csv", "experts.csv",
            ],
        ),
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (name, args) in &subcommands {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let dir = root.join(format!("{name}-{attempt}"));
            let stdout = run(args, &dir)?;
            let mut files = BTreeMap::new();
            collect_files(&dir, &mut files)?;
            outputs.push((stdout, files));
        }
        let csvs = outputs[0].1.keys().filter(|p| p.extension().is_some_and(|e| e == "csv")).count();
        let same = outputs[0] == outputs[1];
        pass &= same && (csvs > 0 || *name == "verify");
        details.push(format!("{name} {} ({csvs} csv)", if same { "identical" } else { "DIFFERS" }));
    }
    Ok(Outcome {
        pass,
        detail: details.join(", "),
    })
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    // bare numbers select criteria; other harness flags are ignored
    let only: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: u32| only.is_empty() || only.contains(&id);
    let mut all = true;

    if wanted(1) || wanted(2) {
        let start = Instant::now();
        let oracles = oracle_suites();
        let elapsed = start.elapsed();
        let (w, p) = match oracles {
            Ok((w, p)) => (Ok(w), Ok(p)),
            Err(e) => {
                let msg = e.to_string();
                (Err(e), Err(hsb::Error::Protocol(msg)))
            }
        };
        all &= report(1, "node weights equal enumerated expert sums", w, elapsed);
        all &= report(2, "arm distribution equals the flat mixture", p, elapsed);
    }
    let criteria: [Criterion; 9] = [
        (3, "fresh weights are one and priors sum to one", initialization),
        (4, "flat mixture regret bound on adversarial losses", mixture_bound),
        (5, "hierarchical regret bound on the stationary model", hierarchical_bound),
        (6, "stationary ensemble ordering", stationary_ordering),
        (7, "switched ensemble ordering", switched_ordering),
        (8, "quantization gap bound", quantization),
        (9, "replay matches online loss rate", replay_unbiased),
        (10, "per-round cost", complexity),
        (11, "identical runs give identical files", determinism),
    ];
    for (id, name, f) in criteria {
        if wanted(id) {
            let start = Instant::now();
            let outcome = f();
            all &= report(id, name, outcome, start.elapsed());
        }
    }

    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria FAIL");
        ExitCode::FAILURE
    }
}
