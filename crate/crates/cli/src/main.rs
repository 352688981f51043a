use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distortion_exponent::broadcast::{bs_allocation, bs_allocation_exponent, DEFAULT_EPSILON};
use distortion_exponent::curve::{b_grid, curves_to_csv, curves_to_json, format_sig, overlay_schemes, sweep, Spacing};
use distortion_exponent::montecarlo::{fit_slope, layer_outage_curve, scheme_distortion_curve, SimPlan};
use distortion_exponent::{
    bs_allocation_thm1, bs_allocation_thm4, bs_layer_exponents, scheme_exponent, Allocation, BandwidthRatio,
    ChannelConfig, Error, FillOrder, LayerAllocation, SchemeId, SchemeOptions,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "dse", version, about = "Distortion-SNR exponents of layered transmission over block-fading MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exponent of one scheme at one bandwidth ratio.
    Exponent(ExponentArgs),
    /// Exponent curves over a grid of bandwidth ratios.
    Sweep(SweepArgs),
    /// Power and rate allocation with per-layer exponents, as JSON.
    Allocation(AllocationArgs),
    /// Simulated outage probability or distortion over an SNR list.
    Montecarlo(MonteCarloArgs),
}

#[derive(Args)]
struct ChannelArgs {
    /// Transmit antennas.
    #[arg(long)]
    m: usize,
    /// Receive antennas.
    #[arg(long)]
    n: usize,
    /// Independently faded blocks.
    #[arg(long, default_value_t = 1)]
    l: usize,
}

impl ChannelArgs {
    fn config(&self) -> Result<ChannelConfig, Failure> {
        ChannelConfig::new(self.m, self.n, self.l).map_err(Failure::Usage)
    }
}

#[derive(Args)]
struct SchemeArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    a: Option<usize>,
    /// Superposition layers.
    #[arg(long, default_value_t = 16)]
    ns: usize,
    /// Time layers.
    #[arg(long, default_value_t = 16)]
    nt: usize,
    #[arg(long, default_value = "sequential")]
    order: FillOrder,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Resolution of the Box exponent search.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

impl SchemeArgs {
    fn options(&self) -> SchemeOptions {
        SchemeOptions {
            k: self.k,
            a: self.a,
            n_super: self.ns,
            n_time: self.nt,
            order: self.order,
            epsilon: self.epsilon,
            tol: self.tol,
        }
    }
}

#[derive(Args)]
struct ExponentArgs {
    #[arg(long)]
    scheme: SchemeId,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long)]
    b: f64,
    #[command(flatten)]
    scheme_args: SchemeArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// A scheme id, or `all` for every scheme plus the bound.
    #[arg(long)]
    scheme: String,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long)]
    b_min: f64,
    #[arg(long)]
    b_max: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Linear instead of logarithmic spacing.
    #[arg(long)]
    linear: bool,
    #[command(flatten)]
    scheme_args: SchemeArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct AllocationArgs {
    /// `bs` or `box`.
    #[arg(long, default_value = "bs")]
    scheme: SchemeId,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long)]
    b: f64,
    #[command(flatten)]
    scheme_args: SchemeArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Target {
    /// One genie-aided layer.
    Outage,
    /// Broadcast allocation, successive decoding.
    Bs,
    /// Greedy Box grid, successive decoding.
    Box,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[arg(long, value_enum, default_value = "outage")]
    target: Target,
    #[command(flatten)]
    channel: ChannelArgs,
    /// Layer rate (outage target).
    #[arg(long, default_value_t = 0.5)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma_prev: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma_cur: f64,
    /// Bandwidth ratio (scheme targets).
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[command(flatten)]
    scheme_args: SchemeArgs,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated SNR values in dB.
    #[arg(long, value_delimiter = ',', required = true)]
    snr_db: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(Error),
    Io(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

fn bw(b: f64) -> Result<BandwidthRatio, Failure> {
    Ok(BandwidthRatio::new(b)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn run_exponent(args: &ExponentArgs) -> Result<(), Failure> {
    let cfg = args.channel.config()?;
    let e = scheme_exponent(args.scheme, bw(args.b)?, &cfg, &args.scheme_args.options())?;
    if args.json {
        let v = json!({
            "scheme": e.scheme,
            "m_tx": cfg.tx(),
            "n_rx": cfg.rx(),
            "blocks": cfg.blocks(),
            "b": e.b,
            "exponent": e.exponent,
            "params": Value::Object(e.params),
        });
        println!("{v}");
    } else {
        println!("{:.6}", e.exponent);
    }
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let cfg = args.channel.config()?;
    let spacing = if args.linear { Spacing::Linear } else { Spacing::Log };
    let grid = b_grid(args.b_min, args.b_max, args.points, spacing)?;
    let ids = if args.scheme == "all" {
        overlay_schemes(&cfg)
    } else {
        let id: SchemeId = args
            .scheme
            .parse()
            .map_err(|e: String| Failure::Usage(Error::Config(e)))?;
        vec![id]
    };
    let opts = args.scheme_args.options();
    let curves = ids
        .into_iter()
        .map(|id| sweep(id, &cfg, &grid, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let text = if args.json { curves_to_json(&curves) } else { curves_to_csv(&curves) };
    emit(&args.out, &text)
}

fn layer_allocation(b: BandwidthRatio, cfg: &ChannelConfig, sa: &SchemeArgs) -> Result<(LayerAllocation, Value), Failure> {
    if let Some(k) = sa.k {
        let a = sa.a.unwrap_or(0);
        let alloc = if cfg.blocks() == 1 && a == 0 {
            bs_allocation_thm1(b, cfg, k, sa.ns, sa.epsilon)?
        } else {
            bs_allocation_thm4(b, cfg, k, a, sa.ns, sa.epsilon)?
        };
        let meta = json!({ "k": k, "a": a, "flat_band": false, "effective_b": b.get() });
        return Ok((alloc, meta));
    }
    let (alloc, choice) = bs_allocation(b, cfg, sa.ns, sa.epsilon)?;
    let meta = json!({
        "k": choice.band.k,
        "a": choice.band.a,
        "flat_band": choice.flat,
        "effective_b": choice.effective_b,
    });
    Ok((alloc, meta))
}

fn run_allocation(args: &AllocationArgs) -> Result<(), Failure> {
    let cfg = args.channel.config()?;
    let b = bw(args.b)?;
    let sa = &args.scheme_args;
    let v = match args.scheme {
        SchemeId::BsLimit => {
            let (alloc, meta) = layer_allocation(b, &cfg, sa)?;
            let per_layer = bs_layer_exponents(&alloc, b, &cfg)?;
            let mut v = json!({
                "scheme": SchemeId::BsLimit,
                "m_tx": cfg.tx(),
                "n_rx": cfg.rx(),
                "blocks": cfg.blocks(),
                "b": b.get(),
                "gammas": alloc.gammas,
                "rates": alloc.rates,
                "per_layer_exponents": per_layer,
                "exponent": bs_allocation_exponent(&alloc, b, &cfg)?,
                "epsilon": alloc.epsilon,
            });
            v.as_object_mut().unwrap().extend(meta.as_object().unwrap().clone());
            v
        }
        SchemeId::BoxGreedy => {
            let e = scheme_exponent(SchemeId::BoxGreedy, b, &cfg, &sa.options())?;
            json!({
                "scheme": e.scheme,
                "m_tx": cfg.tx(),
                "n_rx": cfg.rx(),
                "blocks": cfg.blocks(),
                "b": e.b,
                "exponent": e.exponent,
                "grid": e.allocation,
            })
        }
        other => {
            return Err(Failure::Usage(Error::Config(format!(
                "allocations are available for bs and box, not {other}"
            ))))
        }
    };
    let mut text = serde_json::to_string_pretty(&v).expect("allocation serialises");
    text.push('\n');
    emit(&args.out, &text)
}

fn run_montecarlo(args: &MonteCarloArgs) -> Result<(), Failure> {
    let cfg = args.channel.config()?;
    let plan = SimPlan::new(args.trials, args.seed, args.snr_db.clone())?;
    // (snr, estimate, stderr, usable for the fit)
    let rows: Vec<(f64, f64, f64, bool)> = match args.target {
        Target::Outage => layer_outage_curve(args.r, args.gamma_prev, args.gamma_cur, &cfg, &plan)?
            .into_iter()
            .map(|e| (e.snr_db, e.probability, e.stderr, e.is_resolved()))
            .collect(),
        Target::Bs | Target::Box => {
            let b = bw(args.b)?;
            let alloc = match args.target {
                Target::Bs => Allocation::Layers(layer_allocation(b, &cfg, &args.scheme_args)?.0),
                _ => scheme_exponent(SchemeId::BoxGreedy, b, &cfg, &args.scheme_args.options())?
                    .allocation
                    .expect("box search returns its grid"),
            };
            scheme_distortion_curve(&alloc, b, &cfg, &plan)?
                .into_iter()
                .map(|e| (e.snr_db, e.mean, e.stderr, e.mean > 0.0))
                .collect()
        }
    };
    let mut text = String::from("snr_db,estimate,stderr,trials,seed\n");
    for (snr, est, se, _) in &rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            format_sig(*snr),
            format_sig(*est),
            format_sig(*se),
            plan.trials,
            plan.seed
        ));
    }
    let usable: Vec<(f64, f64)> = rows.iter().filter(|r| r.3).map(|r| (r.0, r.1)).collect();
    let fit = if usable.len() < 3 {
        Err(Error::Unresolved(format!(
            "only {} of {} SNR points have enough events for a slope fit",
            usable.len(),
            rows.len()
        )))
    } else {
        fit_slope(&usable)
    };
    match fit {
        Ok(f) => {
            text.push_str(&format!("# slope={} stderr={}\n", format_sig(f.slope), format_sig(f.stderr)));
            emit(&args.out, &text)
        }
        Err(e) => {
            text.push_str("# slope=unresolved\n");
            emit(&args.out, &text)?;
            Err(Failure::Domain(e))
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("DSE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Exponent(a) => run_exponent(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Allocation(a) => run_allocation(a),
        Command::Montecarlo(a) => run_montecarlo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
