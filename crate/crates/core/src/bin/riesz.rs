//! `riesz`: run Riesz-potential experiments from a TOML config.
//!
//! Exit codes: 0 when all verdicts and invariants pass, 2 when a verdict
//! fails, 1 on usage or configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riesz_core::experiments::{run_to_dir, ExperimentConfig, ExperimentKind, VerdictStatus};

#[derive(Parser)]
#[command(name = "riesz", version, about = "Spectral experiments for Riesz potential operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full spectrum, decay envelope and ground-state checks per shape.
    Spectrum(Common),
    /// Schatten norms compared with the equal-measure ball.
    Schatten(Common),
    /// First eigenvalue compared with the equal-measure ball.
    Rfk(Common),
    /// Second eigenvalue of two receding balls.
    Hks(Common),
    /// Monte Carlo estimate of the cyclic trace integral.
    TraceMc(Common),
    /// Trace comparison of a domain with its equal-measure ball.
    Bll(Common),
    /// Riesz rearrangement inequality on seeded random functions.
    RearrangeCheck(Common),
    /// Grid refinement study with Richardson extrapolation.
    Converge(Common),
    /// Numerical check of the kernel convolution identity.
    ProbeConvolution(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's output_dir, then ".").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the Monte Carlo seed and the first rearrangement seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "RIESZ_THREADS")]
    threads: Option<usize>,
    /// Replace the resolution list with a single cell size.
    #[arg(long)]
    h: Option<f64>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Spectrum(c) => (ExperimentKind::Spectrum, c),
            Command::Schatten(c) => (ExperimentKind::Schatten, c),
            Command::Rfk(c) => (ExperimentKind::Rfk, c),
            Command::Hks(c) => (ExperimentKind::Hks, c),
            Command::TraceMc(c) => (ExperimentKind::TraceMc, c),
            Command::Bll(c) => (ExperimentKind::Bll, c),
            Command::RearrangeCheck(c) => (ExperimentKind::RearrangeCheck, c),
            Command::Converge(c) => (ExperimentKind::Converge, c),
            Command::ProbeConvolution(c) => (ExperimentKind::ProbeConvolution, c),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(parse_exit_code(&e));
        }
    };
    let (kind, common) = cli.command.split();
    match run(kind, common) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// `--help` and `--version` are successful exits; anything else is a usage error.
fn parse_exit_code(e: &clap::Error) -> u8 {
    u8::from(e.use_stderr())
}

fn run(kind: ExperimentKind, common: Common) -> riesz_core::Result<u8> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        if let Some(mc) = config.mc.as_mut() {
            mc.seed = seed;
        }
        if let Some(r) = config.rearrange.as_mut() {
            r.first_seed = seed;
        }
    }
    if let Some(h) = common.h {
        config.resolutions = vec![h];
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| riesz_core::RieszError::Usage(e.to_string()))?;
    }
    if config.exploratory {
        eprintln!(
            "WARNING: exploratory mode. Non-integer p and p <= d/alpha are outside the proven \
             range; their rows carry no verdicts."
        );
    }
    let dir = common
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));

    let outcome = run_to_dir(kind, &config, &dir)?;
    for path in &outcome.outputs {
        println!("wrote {}", path.display());
    }
    for v in &outcome.artifacts.table.verdicts {
        let tag = match v.status {
            VerdictStatus::Confirmed => "PASS",
            VerdictStatus::Inconclusive => "INCONCLUSIVE",
            VerdictStatus::Violated => "FAIL",
        };
        println!(
            "{tag} {} {} h={} gap={:e} error={:e}",
            v.shape, v.quantity, v.h, v.gap, v.error
        );
    }
    if !outcome.artifacts.invariants_passed {
        println!("FAIL an asserted invariant did not hold; see {kind}.csv");
    }
    Ok(outcome.exit_code() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    const RFK: &str = r#"
        resolutions = [0.125, 0.0625]
        [params]
        alpha = 1.0
        dim = 2
        [[shapes]]
        label = "disk"
        shape = { type = "ball", center = [0.0, 0.0], radius = 0.5641895835477563 }
        [[shapes]]
        label = "rectangle"
        shape = { type = "box", corner = [-0.7071067811865476, -0.3535533905932738], sides = [1.4142135623730951, 0.7071067811865476] }
    "#;

    fn invoke(args: &[&str]) -> riesz_core::Result<u8> {
        let cli = Cli::try_parse_from(args).expect("arguments parse");
        let (kind, common) = cli.command.split();
        run(kind, common)
    }

    fn write_config(dir: &Path, text: &str) -> String {
        let path = dir.join("config.toml");
        std::fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    }

    #[test]
    fn help_and_version_exit_zero_and_bad_arguments_exit_one() {
        let e = Cli::try_parse_from(["riesz", "--help"]).err().unwrap();
        assert_eq!(parse_exit_code(&e), 0);
        let e = Cli::try_parse_from(["riesz", "--version"]).err().unwrap();
        assert_eq!(parse_exit_code(&e), 0);
        let e = Cli::try_parse_from(["riesz", "rfk"]).err().unwrap();
        assert_eq!(parse_exit_code(&e), 1);
        let e = Cli::try_parse_from(["riesz", "frobnicate", "--config", "x"]).err().unwrap();
        assert_eq!(parse_exit_code(&e), 1);
    }

    #[test]
    fn every_subcommand_parses() {
        for sub in [
            "spectrum",
            "schatten",
            "rfk",
            "hks",
            "trace-mc",
            "bll",
            "rearrange-check",
            "converge",
            "probe-convolution",
        ] {
            assert!(Cli::try_parse_from(["riesz", sub, "--config", "c.toml", "--seed", "3"]).is_ok(), "{sub}");
        }
    }

    #[test]
    fn rfk_run_writes_outputs_and_repeats_bytewise() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(dir.path(), RFK);
        let out = dir.path().join("out");
        let out = out.to_str().unwrap();
        assert_eq!(invoke(&["riesz", "rfk", "--config", &config, "--out", out]).unwrap(), 0);
        let first = std::fs::read(Path::new(out).join("rfk.csv")).unwrap();
        assert!(Path::new(out).join("rfk_manifest.json").exists());
        assert_eq!(invoke(&["riesz", "rfk", "--config", &config, "--out", out]).unwrap(), 0);
        let second = std::fs::read(Path::new(out).join("rfk.csv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn failed_verdict_exits_two() {
        // a circular ellipse is the disk under another name: there is no gap to confirm
        let text = RFK.replace(
            r#"shape = { type = "box", corner = [-0.7071067811865476, -0.3535533905932738], sides = [1.4142135623730951, 0.7071067811865476] }"#,
            r#"shape = { type = "ellipse", center = [0.0, 0.0], semi_axes = [0.5641895835477563, 0.5641895835477563] }"#,
        );
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(dir.path(), &text);
        let out = dir.path().to_str().unwrap();
        assert_eq!(invoke(&["riesz", "rfk", "--config", &config, "--out", out]).unwrap(), 2);
    }

    #[test]
    fn configuration_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let missing = dir.path().join("missing.toml");
        assert!(invoke(&["riesz", "rfk", "--config", missing.to_str().unwrap()]).is_err());

        let config = write_config(dir.path(), &format!("p = [2.5]\n{RFK}"));
        assert!(invoke(&["riesz", "schatten", "--config", &config, "--out", out]).is_err());

        let config = write_config(dir.path(), &format!("kind = \"hks\"\n{RFK}"));
        assert!(invoke(&["riesz", "rfk", "--config", &config, "--out", out]).is_err());
    }

    #[test]
    fn seed_override_reaches_the_estimate() {
        let text = r#"
            resolutions = [0.25]
            [params]
            alpha = 0.8
            dim = 1
            [[shapes]]
            label = "interval"
            shape = { type = "box", corner = [0.0], sides = [1.0] }
            [mc]
            s = 2
            n_samples = 2000
            seed = 1
        "#;
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(dir.path(), text);
        let read = |seed: &str| {
            let out = dir.path().join(seed);
            let out = out.to_str().unwrap();
            invoke(&["riesz", "trace-mc", "--config", &config, "--out", out, "--seed", seed]).unwrap();
            std::fs::read_to_string(Path::new(out).join("trace_mc.csv")).unwrap()
        };
        let (a, b, c) = (read("5"), read("6"), read("5"));
        assert_eq!(a, c);
        assert_ne!(a, b);
        assert!(a.contains(",5\n"), "{a}");
    }
}
