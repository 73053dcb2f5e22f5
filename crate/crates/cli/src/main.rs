use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tvlin::figures::emit_figure_data;
use tvlin::montecarlo::{
    run_experiment_with_threads, summarize, Layout, LayoutSpec, PresetTable,
};
use tvlin::rng::child_stream;
use tvlin::{
    run_test, simulate, BootstrapConfig, DgpSpec, ExperimentConfig, MeanParams, Method,
    TimeSeries, TransitionParams, VarianceParams,
};

#[derive(Parser)]
#[command(name = "tvlin", version, about = "Time-varying linearity tests and Monte Carlo tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one series and write `t,y[,h2]` CSV to stdout.
    Simulate(SimulateArgs),
    /// Run linearity tests on a series read from a CSV file or stdin.
    Test(TestArgs),
    /// Run a Monte Carlo experiment and write rejection tables.
    Experiment(ExperimentArgs),
    /// Write transition curves as CSV to stdout.
    Figure(FigureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ar,
    TvMean,
    Arch,
    TvArch,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "ar")]
    kind: Kind,
    #[arg(long = "T", short = 'T', default_value_t = 200)]
    sample_size: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.3)]
    beta0: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 0.0)]
    beta1: f64,
    #[arg(long, default_value_t = 1.0)]
    a0: f64,
    #[arg(long, default_value_t = 0.0)]
    b0: f64,
    #[arg(long, default_value_t = 0.0)]
    a1: f64,
    #[arg(long, default_value_t = 0.0)]
    b1: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Transition threshold; defaults to T/2.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = tvlin::dgp::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the conditional variance path as column `h2`.
    #[arg(long)]
    latent: bool,
}

#[derive(Args)]
struct TestArgs {
    /// CSV with one column `y` or two columns `t,y`; `-` or absent reads stdin.
    input: Option<PathBuf>,
    /// Tests to run; repeat or separate with commas. Defaults to all six.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[arg(long, default_value_t = tvlin::linearity::DEFAULT_BOOTSTRAP_ITERATIONS)]
    boot_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    config: Option<PathBuf>,
    /// Preset grid: 1, 2, 3, 4 or all.
    #[arg(long)]
    table: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    boot_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(long = "T", short = 'T', default_value_t = 200)]
    sample_size: usize,
    #[arg(long, default_values_t = [0.01, 0.1])]
    gamma: Vec<f64>,
    /// Defaults to T/2.
    #[arg(long)]
    c: Option<f64>,
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Test(a) => cmd_test(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Figure(a) => cmd_figure(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // a closed downstream pipe (`| head`) is not a failure
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>().is_some_and(|err| {
                matches!(err.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe)
            })
    })
}

/// Parameter flags that have no effect for `kind` must be left at zero.
fn check_unused_flags(a: &SimulateArgs) -> Result<()> {
    let flags = [
        ("alpha1", a.alpha1, matches!(a.kind, Kind::TvMean)),
        ("beta1", a.beta1, matches!(a.kind, Kind::TvMean)),
        ("b0", a.b0, matches!(a.kind, Kind::Arch | Kind::TvArch)),
        ("a1", a.a1, matches!(a.kind, Kind::TvArch)),
        ("b1", a.b1, matches!(a.kind, Kind::TvArch)),
        ("gamma", a.gamma, matches!(a.kind, Kind::TvMean | Kind::TvArch)),
    ];
    for (name, value, used) in flags {
        if !used && value != 0.0 {
            bail!("--{name} has no effect for this --kind");
        }
    }
    if matches!(a.kind, Kind::Ar | Kind::TvMean) && a.a0 != 1.0 {
        bail!("--a0 has no effect for this --kind");
    }
    Ok(())
}

fn dgp_spec(a: &SimulateArgs) -> Result<DgpSpec> {
    check_unused_flags(a)?;
    let n = a.sample_size;
    let c = a.c.unwrap_or(n as f64 / 2.0);
    let transition = TransitionParams::new(a.gamma, c)?;
    let spec = match a.kind {
        Kind::Ar => DgpSpec::ar_homoskedastic(a.alpha0, a.beta0, n),
        Kind::Arch => DgpSpec::ar_arch(a.alpha0, a.beta0, a.a0, a.b0, n),
        Kind::TvMean => DgpSpec::tv_mean(
            MeanParams {
                alpha1: a.alpha1,
                beta1: a.beta1,
                transition,
                ..MeanParams::ar(a.alpha0, a.beta0)
            },
            n,
        ),
        Kind::TvArch => DgpSpec::tv_arch(
            a.alpha0,
            a.beta0,
            VarianceParams {
                a1: a.a1,
                b1: a.b1,
                transition,
                ..VarianceParams::arch(a.a0, a.b0)
            },
            n,
        ),
    }
    .with_burn_in(a.burn_in);
    spec.validate()?;
    Ok(spec)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let spec = dgp_spec(&a)?;
    let series = simulate(&spec, &mut child_stream(a.seed, &[]))?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    if a.latent {
        w.write_record(["t", "y", "h2"])?;
        let h2 = series.latent_h2().context("simulation kept no variance path")?;
        for (t, (y, h)) in series.values().iter().zip(h2).enumerate() {
            w.write_record([(t + 1).to_string(), y.to_string(), h.to_string()])?;
        }
    } else {
        w.write_record(["t", "y"])?;
        for (t, y) in series.values().iter().enumerate() {
            w.write_record([(t + 1).to_string(), y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the last column of a one- or two-column CSV. A non-numeric first
/// row is treated as a header.
fn parse_series(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if !(1..=2).contains(&record.len()) {
            bail!("line {}: expected 1 or 2 columns, got {}", i + 1, record.len());
        }
        let field = &record[record.len() - 1];
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => bail!("line {}: '{field}' is not a number", i + 1),
        }
    }
    if values.is_empty() {
        bail!("input contains no observations");
    }
    Ok(TimeSeries::new(values))
}

fn cmd_test(a: TestArgs) -> Result<()> {
    let text = match a.input.as_deref() {
        None => read_stdin()?,
        Some(p) if p == Path::new("-") => read_stdin()?,
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
    };
    let y = parse_series(&text)?;
    let cfg = BootstrapConfig::with_seed(a.boot_iters, a.seed);
    let methods = if a.method.is_empty() {
        vec![Method::Ma, Method::Mwb, Method::Va, Method::Vb, Method::Vwb, Method::Tr2]
    } else {
        a.method
    };
    let outcomes = methods
        .iter()
        .map(|&m| run_test(m, &y, &cfg).with_context(|| format!("running {m}")))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["method", "statistic", "p_value"])?;
    for out in outcomes {
        let row = [out.method.name().to_string(), out.statistic.to_string(), out.p_value.to_string()];
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_stdin() -> Result<String> {
    let mut s = String::new();
    io::stdin().read_to_string(&mut s)?;
    Ok(s)
}

fn apply_overrides(cfg: &mut ExperimentConfig, a: &ExperimentArgs) {
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(m) = a.boot_iters {
        cfg.bootstrap.iterations = m;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let threads = a.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut jobs: Vec<(String, ExperimentConfig, Layout)> = Vec::new();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        apply_overrides(&mut cfg, &a);
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("experiment")
            .to_string();
        let layout = Layout::Custom(LayoutSpec::from_config(&cfg));
        jobs.push((stem, cfg, layout));
    } else {
        let which = a.table.as_deref().unwrap_or("all");
        let presets = if which.eq_ignore_ascii_case("all") {
            PresetTable::ALL.to_vec()
        } else {
            let k: u8 = which
                .parse()
                .with_context(|| format!("--table expects 1, 2, 3, 4 or all, got '{which}'"))?;
            vec![PresetTable::from_number(k)?]
        };
        for p in presets {
            let boot = BootstrapConfig::default();
            let mut cfg = p.config(tvlin::montecarlo::DEFAULT_REPLICATIONS, boot, 0);
            apply_overrides(&mut cfg, &a);
            jobs.push((format!("table{}", p.number()), cfg, Layout::Preset(p)));
        }
    }

    let mut stdout = io::stdout().lock();
    for (name, cfg, layout) in jobs {
        let table = run_experiment_with_threads(&cfg, threads)?;
        let summary = summarize(&table, &layout)?;
        let write = |file: String, body: &str| -> Result<()> {
            let path = a.out.join(file);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
        };
        write(format!("{name}.csv"), &summary.csv)?;
        write(format!("{name}.txt"), &summary.text)?;
        write(format!("{name}_cells.csv"), &table.to_csv())?;
        writeln!(stdout, "{}", summary.text)?;
    }
    Ok(())
}

fn cmd_figure(a: FigureArgs) -> Result<()> {
    let c = a.c.unwrap_or(a.sample_size as f64 / 2.0);
    let data = emit_figure_data(a.sample_size, &a.gamma, c)?;
    io::stdout().lock().write_all(data.as_bytes())?;
    Ok(())
}
