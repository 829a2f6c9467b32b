use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fnsyn::commands::{run_characterize, run_continual_cmd, run_lifetime_cmd, run_stochastic};
use fnsyn::config::{
    layered, CharacterizeSettings, ContinualSettings, ExperimentConfig, LifetimeSettings, StochasticSettings,
};
use fnsyn::core::consolidation::SynapseModelKind;
use fnsyn::core::learning::{Method, MlpConfig};
use fnsyn::data::NormScope;
use fnsyn::{CliError, CliResult};

/// Differential Fowler-Nordheim synapse experiments.
#[derive(Parser, Debug)]
#[command(name = "fnsyn", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Let explicit flags override the configuration file.
    #[arg(long, global = true)]
    strict_flags: bool,
    /// Output directory (default: out/<subcommand>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Initial usage W_c0, V.
    #[arg(long, global = true)]
    wc0: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single-synapse sweeps, random walk and repeated-pulse series.
    Characterize {
        /// Random-walk length.
        #[arg(long)]
        pulses: Option<usize>,
        /// Identical pulses in the repeated-pulse series.
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        magnitude: Option<f64>,
        #[arg(long)]
        width: Option<f64>,
    },
    /// Monte-Carlo memory lifetime (signal, noise, SNR, retention).
    Lifetime(LifetimeArgs),
    /// Single-electron lifetime runs with deterministic twins.
    Stochastic {
        /// Comma-separated initial usages, V.
        #[arg(long, value_delimiter = ',')]
        wc0s: Option<Vec<f64>>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long = "mc")]
        mc: Option<usize>,
        #[arg(long)]
        magnitude: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Split-MNIST continual learning.
    Continual {
        /// Comma-separated methods or `all`.
        #[arg(long, value_delimiter = ',')]
        method: Option<Vec<String>>,
        /// Hidden layer sizes, e.g. `80,60` or `400,400`.
        #[arg(long, value_delimiter = ',')]
        arch: Option<Vec<usize>>,
        /// Comma-separated seeds (overrides --seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// MNIST directory.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        normalization: Option<NormScope>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Relative k1/k2 jitter of FN synapses.
        #[arg(long)]
        mismatch: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct LifetimeArgs {
    /// Synapses per network.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Patterns stored.
    #[arg(long = "T")]
    t: Option<usize>,
    /// fn, cfn, cascade, stochastic-fn or fn-exact.
    #[arg(long)]
    model: Option<String>,
    /// Cascade depth for `--model cascade`.
    #[arg(long)]
    m: Option<u8>,
    /// Monte-Carlo iterations.
    #[arg(long = "mc")]
    mc: Option<usize>,
    /// Target gamma; sets W_c0 for the pulse width.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
    /// Evaluate retention every this many patterns.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    mismatch: Option<f64>,
    /// Omit the analytic overlay columns.
    #[arg(long)]
    no_analytic: bool,
}

fn put<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

fn parse_model(name: &str, m: Option<u8>) -> CliResult<SynapseModelKind> {
    let tag = match (name, m) {
        ("cascade", Some(m)) => format!("cascade-{m}"),
        ("cascade", None) => return Err(CliError::Config("--model cascade needs --m <levels>".into())),
        (other, _) => other.to_string(),
    };
    Ok(tag.parse()?)
}

fn run(cli: Cli) -> CliResult<()> {
    let c = cli.common;
    let file = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let out = |name: &str| c.out.clone().unwrap_or_else(|| PathBuf::from("out").join(name));
    match cli.cmd {
        Command::Characterize { pulses, repeats, magnitude, width } => {
            let s = layered(CharacterizeSettings::default(), c.strict_flags, |s| s.apply_file(&file), |s| {
                put(&mut s.seed, c.seed);
                put(&mut s.pulses, pulses);
                put(&mut s.repeats, repeats);
                put(&mut s.pulse.magnitude, magnitude);
                put(&mut s.pulse.width, width);
                put(&mut s.device.wc0, c.wc0);
            });
            run_characterize(&s, &out("characterize"))?;
        }
        Command::Lifetime(a) => {
            let model = a.model.as_deref().map(|n| parse_model(n, a.m)).transpose()?;
            let s = layered(LifetimeSettings::default(), c.strict_flags, |s| s.apply_file(&file), |s| {
                let r = &mut s.run;
                put(&mut r.seed, c.seed);
                put(&mut r.n_synapses, a.n);
                put(&mut r.n_patterns, a.t);
                put(&mut r.model, model);
                put(&mut r.mc_iters, a.mc);
                put(&mut r.pulse.magnitude, a.magnitude);
                put(&mut r.pulse.width, a.width);
                put(&mut r.track_stride, a.stride);
                put(&mut r.mismatch, a.mismatch);
                put(&mut r.device.wc0, c.wc0);
                if let (Some(g), None) = (a.gamma, c.wc0) {
                    r.device.wc0 = r.device.wc0_for_gamma(g, r.pulse.width);
                }
                if a.no_analytic {
                    s.analytic = false;
                }
            });
            run_lifetime_cmd(&s, &out("lifetime"), c.jobs)?;
        }
        Command::Stochastic { wc0s, n, t, mc, magnitude, stride } => {
            let s = layered(StochasticSettings::default(), c.strict_flags, |s| s.apply_file(&file), |s| {
                put(&mut s.run.seed, c.seed);
                put(&mut s.wc0s, wc0s);
                if let Some(w) = c.wc0 {
                    s.wc0s = vec![w];
                }
                put(&mut s.run.n_synapses, n);
                put(&mut s.run.n_patterns, t);
                put(&mut s.run.mc_iters, mc);
                put(&mut s.run.pulse.magnitude, magnitude);
                put(&mut s.run.track_stride, stride);
            });
            run_stochastic(&s, &out("stochastic"), c.jobs)?;
        }
        Command::Continual { method, arch, seeds, data, normalization, epochs, lr, mismatch } => {
            let methods = method
                .map(|ms| -> CliResult<Vec<Method>> {
                    if ms.iter().any(|m| m == "all") {
                        return Ok(Method::ALL.to_vec());
                    }
                    ms.iter().map(|m| m.parse().map_err(CliError::from)).collect()
                })
                .transpose()?;
            let mut file_err = None;
            let s = layered(
                ContinualSettings::default(),
                c.strict_flags,
                |s| {
                    if let Err(e) = s.apply_file(&file) {
                        file_err = Some(e);
                    }
                },
                |s| {
                    put(&mut s.methods, methods);
                    if let Some(seed) = c.seed {
                        s.seeds = vec![seed];
                    }
                    put(&mut s.seeds, seeds);
                    if data.is_some() {
                        s.data = data;
                    }
                    put(&mut s.normalization, normalization);
                    if let Some(h) = &arch {
                        s.run.mlp = MlpConfig::with_hidden(h);
                    }
                    put(&mut s.run.epochs, epochs);
                    put(&mut s.run.learning_rate, lr);
                    put(&mut s.run.fn_store.mismatch, mismatch);
                    put(&mut s.run.fn_store.device.wc0, c.wc0);
                },
            );
            if let Some(e) = file_err {
                return Err(e);
            }
            run_continual_cmd(&s, &out("continual"), c.jobs)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.into()
        }
    }
}
