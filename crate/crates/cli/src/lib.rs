//! Batch front end: each subcommand reads the run configuration, consumes
//! the artifacts of earlier commands from the output directory and writes
//! CSV reports that carry the configuration hash and seed.

pub mod commands;
pub mod config;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MISSING_ARTIFACT: i32 = 2;
pub const EXIT_INVALID_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing artifact {}: run the command that produces it first", .0.display())]
    MissingArtifact(PathBuf),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),
}

/// Exit status for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CliError>() {
        Some(CliError::MissingArtifact(_)) => EXIT_MISSING_ARTIFACT,
        Some(CliError::InvalidConfig(_)) => EXIT_INVALID_CONFIG,
        None => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "factorlab", version, about = "Long-short factor construction and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic market: prices, indicators and classification.
    Simulate,
    /// Validate the input files and summarize the universe.
    Ingest,
    /// Build factor weights and factor returns.
    Build,
    /// Factor correlation level of every built factor.
    Fcl,
    /// Eigenvalue spectrum of the asset correlation matrix.
    Pca,
    /// Performance statistics, inter-factor and rolling correlations.
    Stats,
    /// Construction-rule ladder from the standard sort to the full method.
    Ladder,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ingest => "ingest",
            Command::Build => "build",
            Command::Fcl => "fcl",
            Command::Pca => "pca",
            Command::Stats => "stats",
            Command::Ladder => "ladder",
        }
    }
}

/// Loads the configuration, applies the command-line overrides and runs one command.
pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    commands::execute(cli.command, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use std::path::Path;

    fn small_config(out: &Path) -> RunConfig {
        let mut cfg = RunConfig::from_toml(
            r#"
seed = 5
[synth]
n_assets = 40
n_days = 400
[factors]
indicators = ["remuneration", "dividend", "noise"]
bands = ["Q1", "Q3"]
[ladder]
indicators = ["remuneration", "dividend"]
"#,
        )
        .unwrap();
        cfg.out = out.to_path_buf();
        cfg
    }

    fn cli(command: Command, cfg_path: &Path) -> Cli {
        Cli {
            command,
            config: Some(cfg_path.to_path_buf()),
            out: None,
            seed: None,
        }
    }

    fn write_config(dir: &Path, cfg: &RunConfig) -> std::path::PathBuf {
        let path = dir.join("run.toml");
        fs::write(&path, cfg.to_toml()).unwrap();
        path
    }

    fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for e in fs::read_dir(&dir).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(root).unwrap().display().to_string();
                    out.push((rel, fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    const CHAIN: [Command; 7] = [
        Command::Simulate,
        Command::Ingest,
        Command::Build,
        Command::Fcl,
        Command::Pca,
        Command::Stats,
        Command::Ladder,
    ];

    #[test]
    fn fcl_without_build_names_the_weights_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(&dir.path().join("out"));
        let path = write_config(dir.path(), &cfg);
        run(&cli(Command::Simulate, &path)).unwrap();
        let err = run(&cli(Command::Fcl, &path)).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_MISSING_ARTIFACT);
        assert!(err.to_string().contains("weights.csv"), "{err}");
    }

    #[test]
    fn commands_without_data_name_the_price_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), &small_config(&dir.path().join("out")));
        for c in [Command::Ingest, Command::Build, Command::Pca, Command::Ladder] {
            let err = run(&cli(c, &path)).unwrap_err();
            assert_eq!(exit_code(&err), EXIT_MISSING_ARTIFACT);
            assert!(err.to_string().contains("prices.csv"), "{err}");
        }
        let err = run(&cli(Command::Stats, &path)).unwrap_err();
        assert!(err.to_string().contains("returns.csv"), "{err}");
    }

    #[test]
    fn invalid_config_lists_every_violation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "[periods]\nvol = 0\nbeta = 0\n[factors]\nbands = [\"Q7\"]\n").unwrap();
        let err = run(&cli(Command::Build, &path)).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_INVALID_CONFIG);
        let msg = err.to_string();
        for needle in ["periods.vol", "periods.beta", "Q7"] {
            assert!(msg.contains(needle), "{needle} not in {msg}");
        }

        fs::write(&path, "[periods]\nvolatility = 3\n").unwrap();
        let err = run(&cli(Command::Build, &path)).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_INVALID_CONFIG);
        assert!(err.to_string().contains("volatility"), "{err}");
    }

    #[test]
    fn full_chain_is_byte_identical_and_self_describing() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let cfg = small_config(&a);
        let path = write_config(dir.path(), &cfg);
        for c in CHAIN {
            run(&cli(c, &path)).unwrap();
            run(&Cli {
                out: Some(b.clone()),
                ..cli(c, &path)
            })
            .unwrap();
        }
        let (ta, tb) = (tree(&a), tree(&b));
        assert!(ta.len() >= 18, "{} files", ta.len());
        assert_eq!(ta, tb);

        let hash = cfg.hash();
        for (name, bytes) in &ta {
            let text = String::from_utf8(bytes.clone()).unwrap();
            assert!(text.starts_with("# factorlab "), "{name}");
            assert!(text.contains(&format!("# config_sha256: {hash}")), "{name}");
            assert!(text.contains("# seed: 5"), "{name}");
        }

        // a different seed changes the data but not the layout
        let c = dir.path().join("c");
        run(&Cli {
            out: Some(c.clone()),
            seed: Some(6),
            ..cli(Command::Simulate, &path)
        })
        .unwrap();
        let prices = |root: &Path| fs::read(root.join("data/prices.csv")).unwrap();
        assert_ne!(prices(&a), prices(&c));
    }

    #[test]
    fn weights_read_back_by_fcl_match_the_build() {
        use factorlab::pipeline::{build_standard_factor, estimate, MarketData};
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let cfg = small_config(&out);
        let path = write_config(dir.path(), &cfg);
        for c in [Command::Simulate, Command::Build, Command::Fcl] {
            run(&cli(c, &path)).unwrap();
        }
        let res = cfg.resolve().unwrap();
        let market = factorlab::synth::generate_market(&res.synth).unwrap();
        let data = MarketData::from_synthetic(&market);
        let est = estimate(&data.panel, &res.periods);
        let f = build_standard_factor(
            &data,
            &est,
            factorlab::panel::IndicatorId::Remuneration,
            factorlab::factor::QuantileBand::Q1,
            &res.periods,
            Some(cfg.seed),
        )
        .unwrap();
        let mut expected = Vec::new();
        factorlab::riskmetrics::write_fcl_csv(std::slice::from_ref(&f.fcl), &mut expected).unwrap();
        let expected = String::from_utf8(expected).unwrap();
        let written = fs::read_to_string(out.join("fcl/fcl.csv")).unwrap();
        let rows: Vec<&str> = expected.lines().skip(1).collect();
        assert!(!rows.is_empty());
        for r in rows {
            assert!(written.contains(r), "missing {r}");
        }
    }
}
