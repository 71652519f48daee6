use std::process::Command;

use pes::gp::Hyperparams;
use pes::rng::SeedStream;
use pes_harness::config::ExperimentConfig;
use pes_harness::experiment::{reaggregate, run_experiment, write_results, Summary};
use pes_harness::objective::{Benchmark, BenchmarkName, Objective};
use pes_harness::regret::median;
use pes_harness::within_model::{default_hyperparams, gen_within_model_objective, CERTIFY_GRID};

#[test]
fn benchmark_optima_certified() {
    for name in BenchmarkName::ALL {
        let b = Benchmark::new(name);
        let (x, v) = b.certify(1e-6).unwrap_or_else(|e| panic!("{e}"));
        assert!(b.domain().contains(&x));
        assert!(b.regret(&x).unwrap() < 1e-6, "{}: {v}", name.as_str());
        for m in b.maximizers() {
            assert!(b.regret(m).unwrap() < 1e-6, "{}: {m:?}", name.as_str());
        }
    }
    assert!((Benchmark::new(BenchmarkName::Branin).optimum() + 0.397887).abs() < 1e-6);
    assert!((Benchmark::new(BenchmarkName::Hartmann6).optimum() - 3.32237).abs() < 1e-5);
    assert_eq!(Benchmark::new(BenchmarkName::Cosines).optimum(), 1.6);
}

#[test]
fn benchmark_rejects_out_of_domain() {
    let b = Benchmark::new(BenchmarkName::Branin);
    assert!(b.value(&[1.2, 0.5]).is_err());
    assert!(b.value(&[0.5]).is_err());
}

#[test]
fn within_model_objective_properties() {
    let hp = default_hyperparams();
    let obj = gen_within_model_objective(&hp, SeedStream::new(5)).unwrap();
    assert_eq!(obj.locations().len(), 1024);
    let worst = obj
        .locations()
        .iter()
        .zip(obj.samples())
        .map(|(x, y)| (obj.value(x).unwrap() - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-2, "interpolation error {worst}");
    let again = gen_within_model_objective(&hp, SeedStream::new(5)).unwrap();
    assert_eq!(obj.samples(), again.samples());
    assert_eq!(obj.optimum(), again.optimum());
    assert!(obj.regret(obj.maximizer()).unwrap() == 0.0);

    // no grid value exceeds the certified maximum, and slopes stay on the
    // lengthscale scale
    let h = 1.0 / CERTIFY_GRID as f64;
    let mut max_slope: f64 = 0.0;
    for i in 0..CERTIFY_GRID {
        for j in 0..CERTIFY_GRID - 1 {
            let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            let a = obj.value(&x).unwrap();
            let b = obj.value(&[x[0], x[1] + h]).unwrap();
            assert!(a <= obj.optimum() + 1e-12);
            max_slope = max_slope.max((b - a).abs() / h);
        }
    }
    // γ = 1, ℓ = √0.1: gradients beyond ~6 standard deviations are implausible
    assert!(max_slope < 6.0 / 0.1f64.sqrt(), "{max_slope}");
}

#[test]
fn within_model_rejects_other_dimensions() {
    let hp = Hyperparams::isotropic(1.0, 0.3, 3, 1e-6).unwrap();
    assert!(gen_within_model_objective(&hp, SeedStream::new(1)).is_err());
}

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        "methods = [\"pes\", \"ei\"]\nfunctions = [\"cosines\", \"within-model\"]\nrestarts = 3\nbudget = 3\nsamples = 3\nfeatures = 200\nseed = {seed}\nbootstrap = 100\n[schedule]\nburn_in = 5\nthin = 1\n"
    ))
    .unwrap()
}

#[test]
fn experiment_files_round_trip_and_repeat() {
    let cfg = small_config(11);
    let result = run_experiment(&cfg).unwrap();
    assert!(result.failures.is_empty(), "{:?}", result.failures);
    for c in &result.curves {
        assert_eq!(c.len(), cfg.budget + 1);
        for t in 0..c.len() {
            assert_eq!(c.median[t], median(&c.at(t)));
            assert!(c.regrets.iter().all(|r| r[t] >= 0.0));
        }
    }
    let dir = std::env::temp_dir().join(format!("pes-harness-{}", std::process::id()));
    let (a, b) = (dir.join("a"), dir.join("b"));
    write_results(&result, &a).unwrap();
    write_results(&run_experiment(&cfg).unwrap(), &b).unwrap();
    for name in ["cosines_pes.csv", "cosines_ei.csv", "within-model_pes.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let stored: Summary = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(stored, Summary::new(&result));
    assert_eq!(reaggregate(&a).unwrap(), stored);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn cli_selftest_and_validation() {
    let exe = env!("CARGO_BIN_EXE_pes");
    let out = Command::new(exe).args(["--seed", "3", "selftest"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));

    let dir = std::env::temp_dir().join(format!("pes-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("toy.toml");
    std::fs::write(&cfg, "grid = 8\nsamples = 10\nfeatures = 200\nrs_samples = 2000\n").unwrap();
    let out = Command::new(exe).arg("--out").arg(&dir).arg("validate-acquisition").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("surfaces.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x0,x1,rs,rs_se,pes"));
    assert_eq!(csv.lines().count(), 65);
    assert!(std::fs::read_to_string(dir.join("report.json")).unwrap().contains("spearman"));

    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "methods = [\"ucb\"]\n").unwrap();
    let out = Command::new(exe).args(["run"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    std::fs::remove_dir_all(&dir).ok();
}
