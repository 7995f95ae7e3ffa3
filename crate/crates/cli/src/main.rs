use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eraser_core::analysis::{report, Group};
use eraser_core::attack::{recover_key, AttackConfig, AttackInput};
use eraser_core::cbkap::{run_protocol, ttp_keygen_seeded, KappaChoice, Params, Transcript};
use eraser_core::express::{express, idealized_baseline, Expression, GenSet, SearchConfig};
use eraser_core::harness::{self, AttackSpec, ExpressSpec};
use eraser_core::io as files;
use eraser_core::perm::Permutation;

#[derive(Parser)]
#[command(name = "eraser", version, about = "Colored Burau key agreement, its attack, and short permutation expressions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum KappaArg {
    Auto,
    Primitive,
    Irreducible,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
            None => Box::new(std::io::stdout().lock()),
        })
    }

    fn json<T: serde::Serialize>(&self, value: &T) -> Result<()> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        Ok(())
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Degrees to run; defaults to 8,16,32,64 (plus 128,256 with --extended).
    #[arg(long = "n", value_delimiter = ',')]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Groups to draw generators from (S, A or both); S draws are uniform in S_n.
    #[arg(long, value_delimiter = ',', default_values_t = [Group::Symmetric])]
    draw: Vec<Group>,
    #[arg(long)]
    extended: bool,
    /// Per-trial wall-clock cap in seconds.
    #[arg(long)]
    time_cap: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    output: Output,
}

impl BenchArgs {
    fn spec(&self) -> ExpressSpec {
        let mut n_list = self.n_list.clone();
        if n_list.is_empty() {
            n_list = vec![8, 16, 32, 64];
            if self.extended {
                n_list.extend([128, 256]);
            }
        }
        let mut spec = ExpressSpec::new(n_list, self.trials, self.seed);
        spec.k = self.k;
        spec.groups = self.draw.clone();
        spec.time_budget = self
            .time_cap
            .or(self.extended.then_some(3600))
            .map(Duration::from_secs);
        spec
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a protocol instance.
    Keygen {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 251)]
        p: u64,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, value_enum, default_value_t = KappaArg::Auto)]
        kappa: KappaArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Run both parties on an instance and write the transcript.
    Agree {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Keep private keys and the shared key in the transcript.
        #[arg(long)]
        with_secrets: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Recover the shared key from public data.
    Attack {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Write a target permutation as a word in the generators.
    Express {
        #[arg(long)]
        gens: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        idealized: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Word-count cap for each step.
        #[arg(long)]
        cap: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Print the cost and length estimates.
    Estimate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        group: Group,
        #[command(flatten)]
        output: Output,
    },
    /// Search statistics against the estimates.
    BenchExpress(BenchArgs),
    /// Real against idealized search counts.
    BenchDensity(BenchArgs),
    /// End-to-end attacks on fresh instances.
    BenchAttack {
        #[arg(long = "n", value_delimiter = ',', default_values_t = [16])]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 251)]
        p: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        retries: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
}

fn emit_rows<T: serde::Serialize>(rows: &[T], format: Format, output: &Output) -> Result<()> {
    match format {
        Format::Csv => harness::write_csv(rows, output.writer()?)?,
        Format::Json => output.json(&rows)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Keygen { n, p, k, t, ell, r, kappa, seed, output } => {
            let mut params = Params::with_size(n, p);
            params.k = k.unwrap_or(params.k);
            params.t = t.unwrap_or(params.t);
            params.ell = ell.unwrap_or(params.ell);
            params.r = r.unwrap_or(params.r);
            params.kappa = match kappa {
                KappaArg::Auto => KappaChoice::Auto,
                KappaArg::Primitive => KappaChoice::Primitive,
                KappaArg::Irreducible => KappaChoice::Irreducible,
            };
            let inst = ttp_keygen_seeded(&params, seed)?;
            output.json(&inst)?;
        }
        Command::Agree { instance, seed, with_secrets, output } => {
            let inst = files::load_instance(&instance)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = &inst.metadata.params;
            let tr = run_protocol(&inst, params.ell, params.r, &mut rng)?;
            if with_secrets {
                output.json(&tr)?;
            } else {
                output.json(&tr.without_secrets())?;
            }
        }
        Command::Attack { instance, transcript, seed, output } => {
            let inst = files::load_instance(&instance)?;
            let tr: Transcript = files::load_transcript(&transcript, &inst)?;
            let input = AttackInput::from_public(&inst, &tr);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let started = Instant::now();
            let search = SearchConfig {
                fallback: true,
                ..SearchConfig::default()
            };
            let rep = recover_key(&input, &AttackConfig::default(), &search, &mut rng)?;
            let total_ms = started.elapsed().as_secs_f64() * 1e3;
            let verdict = tr
                .secrets
                .as_ref()
                .map(|s| if s.shared == rep.key { "MATCH" } else { "MISMATCH" });
            output.json(&serde_json::json!({
                "key": rep.key,
                "verdict": verdict,
                "total_ms": total_ms,
                "phase1_ms": rep.phase1_ms,
                "express_ms": rep.express_ms,
                "phase2_ms": rep.phase2_ms,
                "kernel_history": rep.phase1.kernel_history,
                "expression_length": rep.expression_length,
                "braid_length": rep.braid_length,
            }))?;
            if verdict == Some("MISMATCH") {
                bail!("recovered key differs from the shared key");
            }
        }
        Command::Express { gens, target, idealized, seed, cap, output } => {
            let gs: GenSet = files::load(&gens)?;
            let target: Permutation = files::load(&target)?;
            let config = SearchConfig {
                step1_cap: cap,
                step2_cap: cap,
                seed,
                ..if idealized { SearchConfig::idealized(seed) } else { SearchConfig::default() }
            };
            if idealized {
                let stats = idealized_baseline(&gs, &target, &config)?;
                output.json(&serde_json::json!({ "expression": null, "stats": stats }))?;
            } else {
                let (expr, stats): (Expression, _) = express(&gs, &target, &config)?;
                output.json(&serde_json::json!({ "expression": expr, "stats": stats }))?;
            }
        }
        Command::Estimate { n, k, group, output } => output.json(&report(n, k, group)?)?,
        Command::BenchExpress(args) => {
            let rows = harness::bench_express(&args.spec())?;
            emit_rows(&rows, args.format, &args.output)?;
        }
        Command::BenchDensity(args) => {
            let rows = harness::bench_density(&args.spec())?;
            emit_rows(&rows, args.format, &args.output)?;
        }
        Command::BenchAttack { n_list, p, trials, seed, retries, format, output } => {
            let mut spec = AttackSpec::new(n_list, p, trials, seed);
            spec.retries = retries;
            let rows = harness::bench_attack(&spec)?;
            emit_rows(&rows, format, &output)?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
