//! Subcommand bodies. Each takes fully resolved settings, writes its tables
//! (plus a gnuplot stub per table) into `out` and returns the manifest.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use fnsyn_core::consolidation::{
    analytic_noise, analytic_signal, analytic_snr, LifetimeCurves, SynapseModelKind,
};
use fnsyn_core::learning::{run_continual_with_progress, ContinualResult, Method};
use fnsyn_core::synapse::{apply_pulse_ode, characterize, Sweep};
use fnsyn_core::{rng, Polarity, Pulse, SynapseState};
use rand::Rng;
use serde::Serialize;

use crate::config::{CharacterizeSettings, ContinualSettings, LifetimeSettings, StochasticSettings};
use crate::data::{load_mnist, split_tasks, N_TASKS};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::parallel::{map_ordered, run_lifetime};
use crate::plot::{write_stub, PlotSpec};
use crate::table::Table;

/// Environment variable naming the MNIST directory.
pub const MNIST_ENV: &str = "FNSYN_MNIST_DIR";
/// Searched when neither `--data` nor the environment variable is given.
pub const DEFAULT_MNIST_DIR: &str = "data/mnist";

/// Writes progress lines to stderr: `progress <fraction>`.
pub fn report_progress(f: f64) {
    eprintln!("progress {f:.4}");
}

fn config_json<T: Serialize>(v: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| CliError::Config(e.to_string()))
}

/// Collects outputs for the manifest and stamps every table with the
/// resolved configuration, so the header alone reproduces the run.
struct Outputs<'a> {
    dir: &'a Path,
    config: String,
    manifest: RunManifest,
}

impl<'a> Outputs<'a> {
    fn new<T: Serialize>(dir: &'a Path, subcommand: &str, settings: &T, seeds: Vec<u64>) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        let value = config_json(settings)?;
        Ok(Self {
            dir,
            config: value.to_string(),
            manifest: RunManifest::begin(subcommand, value, seeds),
        })
    }

    fn table(&mut self, name: &str, table: Table, plot: Option<PlotSpec>) -> CliResult<PathBuf> {
        let table = Table { meta: [("subcommand".into(), self.manifest.subcommand.clone()),
            ("config".into(), self.config.clone())].into_iter().chain(table.meta).collect(), ..table };
        let path = self.dir.join(name);
        table.write(&path)?;
        self.manifest.record(self.dir, &path);
        if let Some(spec) = plot {
            let gp = write_stub(&path, &table.columns, &spec)?;
            self.manifest.record(self.dir, &gp);
        }
        Ok(path)
    }

    fn finish(self) -> CliResult<RunManifest> {
        let m = self.manifest.clone();
        self.manifest.finish(self.dir)?;
        Ok(m)
    }
}

pub fn run_characterize(s: &CharacterizeSettings, out: &Path) -> CliResult<RunManifest> {
    s.validate()?;
    let mut o = Outputs::new(out, "characterize", s, vec![s.seed])?;
    let p = &s.device;
    let s0 = SynapseState::symmetric(p.wc0);

    let mut widths = Table::new(["width", "delta_w_d"]);
    for (x, y) in characterize(s0, &Sweep::Widths(s.widths.clone()), &s.pulse, p)? {
        widths.push(vec![x, y]);
    }
    o.table("width_sweep.csv", widths, Some(PlotSpec { title: "Weight change vs pulse width", x: "width", ys: &["delta_w_d"], ..Default::default() }))?;

    let mut mags = Table::new(["magnitude", "delta_w_d"]);
    for (x, y) in characterize(s0, &Sweep::Magnitudes(s.magnitudes.clone()), &s.pulse, p)? {
        mags.push(vec![x, y]);
    }
    o.table("magnitude_sweep.csv", mags, Some(PlotSpec { title: "Weight change vs pulse magnitude", x: "magnitude", ys: &["delta_w_d"], logy: true, ..Default::default() }))?;

    let mut walk = Table::new(["pulse", "polarity", "w_plus", "w_minus", "w_d", "w_c"]);
    let mut rng = rng::stream(s.seed, 0);
    let mut st = s0;
    for k in 0..s.pulses {
        let pol = if rng.random::<bool>() { Polarity::Potentiation } else { Polarity::Depression };
        st = apply_pulse_ode(st, &s.pulse.with_polarity(pol), p)?;
        walk.push(vec![(k + 1) as f64, pol.sign(), st.w_plus, st.w_minus, st.w_d(), st.w_c()]);
    }
    o.table("random_walk.csv", walk, Some(PlotSpec { title: "Random pulse train", x: "pulse", ys: &["w_d", "w_c"], ..Default::default() }))?;

    let mut rep = Table::new(["pulse", "delta_w_d", "w_c"]);
    let pot = Pulse { polarity: Polarity::Potentiation, ..s.pulse };
    let mut st = s0;
    for k in 0..s.repeats {
        let next = apply_pulse_ode(st, &pot, p)?;
        rep.push(vec![(k + 1) as f64, next.w_d() - st.w_d(), next.w_c()]);
        st = next;
    }
    o.table("repeated_pulse.csv", rep, Some(PlotSpec { title: "Repeated potentiation", x: "pulse", ys: &["delta_w_d"], ..Default::default() }))?;
    o.finish()
}

/// Lifetime curves as a table; `frac_retained` is NaN where not evaluated.
pub fn lifetime_table(c: &LifetimeCurves, n_synapses: usize, analytic: bool) -> Table {
    let with_theory = analytic && c.gamma.is_finite();
    let mut cols = vec!["n", "signal", "noise", "snr", "snr_se", "frac_retained", "tracked_noise", "max_abs_weight", "mean_wc"];
    if analytic {
        cols.push("analytic_snr");
    }
    if with_theory {
        cols.extend(["analytic_signal", "analytic_noise"]);
    }
    let mut t = Table::new(cols)
        .meta("unit", c.unit)
        .meta("gamma", c.gamma)
        .meta("iterations", c.iterations);
    let mut frac = c.frac_n.iter().zip(&c.frac_retained).peekable();
    for (i, &n) in c.n_axis.iter().enumerate() {
        let f = match frac.peek() {
            Some((&fnn, &v)) if fnn == n => {
                frac.next();
                v
            }
            _ => f64::NAN,
        };
        let get = |v: &Vec<f64>| v.get(i).copied().unwrap_or(f64::NAN);
        let nf = n as f64;
        let mut row = vec![nf, c.signal[i], c.noise[i], c.snr[i], get(&c.snr_se), f, get(&c.tracked_noise), get(&c.max_abs_weight), get(&c.mean_wc)];
        if analytic {
            row.push(analytic_snr(nf, n_synapses));
        }
        if with_theory {
            row.extend([analytic_signal(nf, c.gamma), analytic_noise(nf, c.gamma, n_synapses)]);
        }
        t.push(row);
    }
    t
}

fn snr_plot() -> PlotSpec<'static> {
    PlotSpec { title: "Memory SNR", x: "n", ys: &["snr", "analytic_snr"], logx: true, logy: true }
}

pub fn run_lifetime_cmd(s: &LifetimeSettings, out: &Path, jobs: usize) -> CliResult<RunManifest> {
    s.run.validate()?;
    let mut o = Outputs::new(out, "lifetime", s, vec![s.run.seed])?;
    let curves = run_lifetime(&s.run, jobs, &report_progress)?;
    check_finite(&curves)?;
    let name = format!("lifetime_{}.csv", s.run.model);
    o.table(&name, lifetime_table(&curves, s.run.n_synapses, s.analytic).meta("model", s.run.model), Some(snr_plot()))?;
    o.finish()
}

fn check_finite(c: &LifetimeCurves) -> CliResult<()> {
    if c.snr.iter().any(|v| v.is_infinite()) {
        return Err(CliError::Numeric("SNR diverged".into()));
    }
    Ok(())
}

pub fn run_stochastic(s: &StochasticSettings, out: &Path, jobs: usize) -> CliResult<RunManifest> {
    s.validate()?;
    let mut o = Outputs::new(out, "stochastic", s, vec![s.run.seed])?;
    let total = 2 * s.wc0s.len();
    for (k, &wc0) in s.wc0s.iter().enumerate() {
        for (j, model) in [SynapseModelKind::StochasticFn, SynapseModelKind::ExactFn].into_iter().enumerate() {
            let cfg = s.config_for(wc0, model);
            let done = 2 * k + j;
            let curves = run_lifetime(&cfg, jobs, &|f| report_progress((done as f64 + f) / total as f64))?;
            check_finite(&curves)?;
            let table = lifetime_table(&curves, cfg.n_synapses, true).meta("model", model).meta("wc0", wc0);
            o.table(&format!("{model}_wc{wc0}.csv"), table, Some(snr_plot()))?;
            if let Some(h) = &curves.electron_histogram {
                let mut t = Table::new(["electrons", "count"]).meta("wc0", wc0).meta("last_bin", "overflow");
                for (e, &c) in h.iter().enumerate() {
                    t.push(vec![e as f64, c as f64]);
                }
                o.table(&format!("electrons_wc{wc0}.csv"), t, Some(PlotSpec { title: "Electrons per update", x: "electrons", ys: &["count"], ..Default::default() }))?;
            }
        }
    }
    o.finish()
}

/// MNIST directory: explicit path, then the environment, then the default.
pub fn mnist_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(MNIST_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_MNIST_DIR))
}

fn matrix_table(r: &ContinualResult) -> Table {
    let n = r.matrix.n_tasks();
    let mut t = Table::new(std::iter::once("trained".to_string()).chain((1..=n).map(|j| format!("t{j}"))))
        .meta("method", r.method)
        .meta("seed", r.seed)
        .meta("overall_average", r.matrix.overall_average());
    for i in 0..n {
        t.push(std::iter::once((i + 1) as f64).chain((0..n).map(|j| r.matrix.get(i, j))).collect());
    }
    t
}

fn usage_table(r: &ContinualResult) -> Option<Table> {
    let last = r.usage.last()?;
    let mut t = Table::new(["layer", "bin_lo", "bin_hi", "count"]).meta("method", r.method).meta("seed", r.seed);
    for (l, u) in last.iter().enumerate() {
        t.meta.push((format!("layer{l}"), format!("mean {} variance {}", u.mean, u.variance)));
        let h = &u.histogram;
        let w = (h.hi - h.lo) / h.counts.len() as f64;
        for (b, &c) in h.counts.iter().enumerate() {
            t.push(vec![u.layer as f64, h.lo + w * b as f64, h.lo + w * (b + 1) as f64, c as f64]);
        }
    }
    Some(t)
}

fn log_table(r: &ContinualResult) -> Table {
    let mut t = Table::new(["task", "epoch", "loss", "accuracy"]).meta("method", r.method).meta("seed", r.seed);
    for e in &r.log {
        t.push(vec![(e.task + 1) as f64, (e.epoch + 1) as f64, e.loss, e.accuracy]);
    }
    t
}

/// Per-run summary columns: overall average, the first task's accuracy
/// after tasks 1 and 3, and input/output-layer usage variance.
pub fn summary_table(results: &[ContinualResult]) -> Table {
    let mut t = Table::new(["method", "seed", "overall", "t1_after_t1", "t1_after_t3", "usage_var_in", "usage_var_out", "pulses", "clamped", "pulse_seconds"])
        .meta("methods", Method::ALL.iter().enumerate().map(|(i, m)| format!("{i}={m}")).collect::<Vec<_>>().join(" "));
    for r in results {
        let idx = Method::ALL.iter().position(|m| *m == r.method).unwrap_or(usize::MAX) as f64;
        let (vin, vout) = r
            .usage
            .last()
            .and_then(|u| Some((u.first()?.variance, u.last()?.variance)))
            .unwrap_or((f64::NAN, f64::NAN));
        let t1_after = |i: usize| if i < r.matrix.n_tasks() { r.matrix.get(i, 0) } else { f64::NAN };
        t.push(vec![idx, r.seed as f64, r.matrix.overall_average(), t1_after(0), t1_after(2), vin, vout, r.pulses as f64, r.clamped as f64, r.pulse_seconds]);
    }
    t
}

/// Runs every `(method, seed)` pair on the split tasks found in the data directory.
pub fn run_continual_cmd(s: &ContinualSettings, out: &Path, jobs: usize) -> CliResult<(RunManifest, Vec<ContinualResult>)> {
    s.validate()?;
    let dir = mnist_dir(s.data.as_deref());
    let (train, test) = load_mnist(&dir, s.normalization)?;
    let tasks = split_tasks(&train, &test);
    drop((train, test));
    let mut o = Outputs::new(out, "continual", s, s.seeds.clone())?;
    let runs: Vec<(Method, u64)> = s.methods.iter().flat_map(|&m| s.seeds.iter().map(move |&seed| (m, seed))).collect();
    let fractions = Mutex::new(vec![0.0; runs.len()]);
    let results = map_ordered(runs.iter().copied().enumerate().collect(), jobs, |(k, (m, seed))| {
        let cfg = s.config_for(m, seed);
        let mut last = 0.0;
        let r = run_continual_with_progress(&cfg, &tasks, &mut |f| {
            let mut fr = fractions.lock().unwrap_or_else(|e| e.into_inner());
            fr[k] = f;
            if f - last >= 0.05 || f >= 1.0 {
                last = f;
                report_progress(fr.iter().sum::<f64>() / fr.len() as f64);
            }
        })?;
        for e in &r.log {
            eprintln!("train method={m} seed={seed} task={} epoch={} loss={:.6} accuracy={:.4}", e.task + 1, e.epoch + 1, e.loss, e.accuracy);
        }
        eprintln!("done method={m} seed={seed} overall={:.4}", r.matrix.overall_average());
        Ok(r)
    })?;
    for r in &results {
        let tag = format!("{}_seed{}", r.method, r.seed);
        o.table(&format!("accuracy_{tag}.csv"), matrix_table(r), None)?;
        o.table(&format!("log_{tag}.csv"), log_table(r), Some(PlotSpec { title: "Training loss", x: "epoch", ys: &["loss"], ..Default::default() }))?;
        if let Some(t) = usage_table(r) {
            o.table(&format!("usage_{tag}.csv"), t, None)?;
        }
    }
    debug_assert!(results.iter().all(|r| r.matrix.n_tasks() == N_TASKS));
    o.table("summary.csv", summary_table(&results), None)?;
    Ok((o.finish()?, results))
}
