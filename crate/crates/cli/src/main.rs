mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lfci_core::citest::{read_data_csv, sample_covariance, CiTester};
use lfci_core::discovery::{
    default_gamma, estimate_moral_graph, fci, lfci, lfci_mb, pc, DiscoveryError, FciOptions, PcVariant, RunOutput,
    FCI_DEFAULT_MAX_NODES,
};
use lfci_core::mixed_graph::{edge_symbol, parse_graph, serialize_graph};
use lfci_core::projection::true_pag;
use lfci_core::separation::{is_maximal, moral_graph};
use lfci_core::simbench::{
    fmt6, local_moral_equality, min_gamma_short_trek, moral_threshold, oracle_experiment_with, pr_sweep_with,
    ExperimentConfig, Method, SimError, SweepOptions, TrekProbe, ORACLE_HEADER, PR_HEADER,
};
use lfci_core::MixedGraph;

use config::{parse_config, HarnessConfig};

#[derive(Parser)]
#[command(name = "lfci", version, about = "Local FCI causal discovery with latent variables")]
struct Cli {
    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true, env = "LFCI_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a PAG from a data CSV (header row of labels, one sample per row).
    Learn {
        data: PathBuf,
        #[command(flatten)]
        algo: AlgoArgs,
        /// Significance level of the Fisher-z tests.
        #[arg(long, default_value_t = 1e-3)]
        alpha: f64,
    },
    /// Run a pipeline with a separation oracle on a MAG file.
    Oracle {
        graph: PathBuf,
        #[command(flatten)]
        algo: AlgoArgs,
    },
    /// Finite-sample precision/recall sweep over the alpha grid.
    Simulate(HarnessArgs),
    /// Oracle experiment: recovery rate, test counts, reach levels.
    Bench(HarnessArgs),
    /// Short-trek gamma probe and local moral graph equality.
    Probe(HarnessArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Lfci,
    #[value(name = "lfci_mb")]
    LfciMb,
    Fci,
    Pc,
    Rpc,
}

#[derive(Args)]
struct AlgoArgs {
    #[arg(long, value_enum, default_value = "lfci")]
    algo: Algo,
    /// Largest separator size (also the rPC level).
    #[arg(long, default_value_t = 3)]
    eta: usize,
    /// Path-length bound; defaults to ceil(ln p).
    #[arg(long)]
    gamma: Option<usize>,
    /// Output path for the PAG; stats go to `<out>.stats.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow FCI on more than 40 nodes.
    #[arg(long)]
    allow_large_fci: bool,
}

#[derive(Args)]
struct HarnessArgs {
    /// key=value configuration file.
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the config seed; a random seed is drawn and printed when
    /// neither is given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    gamma: Option<usize>,
    /// Allow FCI on more than 40 observed nodes.
    #[arg(long)]
    allow_large_fci: bool,
}

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(m: impl ToString) -> Self {
        Failure { code: 2, message: m.to_string() }
    }
    fn tester(m: impl ToString) -> Self {
        Failure { code: 3, message: m.to_string() }
    }
    fn not_mag(m: impl ToString) -> Self {
        Failure { code: 4, message: m.to_string() }
    }
    fn other(m: impl ToString) -> Self {
        Failure { code: 1, message: m.to_string() }
    }
}

impl From<DiscoveryError> for Failure {
    fn from(e: DiscoveryError) -> Self {
        match e {
            DiscoveryError::Tester { .. } | DiscoveryError::SingularAfterRidge => Failure::tester(e),
            DiscoveryError::TooLargeForFci(_) | DiscoveryError::InvalidParameter(_) => Failure::usage(e),
            _ => Failure::other(e),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => Failure::usage(e),
            SimError::Discovery(d) => d.into(),
            SimError::Ci(_) => Failure::tester(e),
            _ => Failure::other(e),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::other(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn graph_text(g: &MixedGraph) -> String {
    match g.labels() {
        Some(labels) => format!("# labels: {}\n{}", labels.join(","), serialize_graph(g)),
        None => serialize_graph(g),
    }
}

fn run_algo(
    tester: &CiTester,
    p: usize,
    a: &AlgoArgs,
    gamma: usize,
    moral: impl FnOnce() -> Result<MixedGraph, Failure>,
) -> Result<RunOutput, Failure> {
    Ok(match a.algo {
        Algo::Lfci => lfci(tester, p, a.eta, gamma)?,
        Algo::LfciMb => lfci_mb(tester, p, a.eta, gamma, &moral()?)?,
        Algo::Fci => fci(tester, p, FciOptions { allow_large: a.allow_large_fci, max_pdsep_size: None })?,
        Algo::Pc => pc(tester, p, PcVariant::Standard)?,
        Algo::Rpc => pc(tester, p, PcVariant::Reduced(a.eta))?,
    })
}

/// Writes the graph and stats, or prints them when no output path is set.
fn emit(out: &RunOutput, labels: Option<Vec<String>>, a: &AlgoArgs, runtime_ms: u128) -> Result<(), Failure> {
    let mut g = out.graph.clone();
    g.set_labels(labels);
    let stats = json!({
        "algo": a.algo.to_possible_value().map(|v| v.get_name().to_string()),
        "n_tests": out.stats.n_tests,
        "m_reach": out.stats.m_reach,
        "runtime_ms": runtime_ms,
    });
    match &a.out {
        Some(path) => {
            write_file(path, &graph_text(&g))?;
            write_file(&with_suffix(path, ".stats.json"), &format!("{stats}\n"))?;
        }
        None => {
            print!("{}", graph_text(&g));
            eprintln!("{stats}");
        }
    }
    Ok(())
}

fn cmd_learn(data: &Path, a: &AlgoArgs, alpha: f64) -> Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::usage("--alpha must lie in (0, 1)"));
    }
    let file = fs::File::open(data).map_err(|e| Failure::usage(format!("cannot read {}: {e}", data.display())))?;
    let (labels, x) = read_data_csv(file).map_err(Failure::usage)?;
    let est = sample_covariance(&x).map_err(Failure::usage)?;
    let p = labels.len();
    let gamma = a.gamma.unwrap_or_else(|| default_gamma(p));
    let tester = CiTester::sample_test(est.clone(), alpha);
    let t = Instant::now();
    let out =
        run_algo(&tester, p, a, gamma, || Ok(estimate_moral_graph(&est, 1e-10, moral_threshold(alpha, est.n, p))?))?;
    emit(&out, Some(labels), a, t.elapsed().as_millis())
}

/// One line per pair whose edge differs between `est` and `truth`.
fn diff_report(est: &MixedGraph, truth: &MixedGraph) -> Vec<String> {
    let show = |g: &MixedGraph, a: usize, b: usize| match g.edge(a, b) {
        Some(e) => {
            let (l, r) = if e.a == a { (e.mark_at_a, e.mark_at_b) } else { (e.mark_at_b, e.mark_at_a) };
            format!("{} {} {}", g.node_name(a), edge_symbol(l, r), g.node_name(b))
        }
        None => format!("{} (none) {}", g.node_name(a), g.node_name(b)),
    };
    let p = truth.n_nodes();
    let mut out = Vec::new();
    for a in 0..p {
        for b in (a + 1)..p {
            if est.edge(a, b) != truth.edge(a, b) {
                out.push(format!("estimated {} | truth {}", show(est, a, b), show(truth, a, b)));
            }
        }
    }
    out
}

/// Parses a graph file, taking node names from a `# labels:` line if present.
fn read_graph(path: &Path) -> Result<MixedGraph, Failure> {
    let text = read_file(path)?;
    let mut g = parse_graph(&text).map_err(Failure::usage)?;
    if let Some(line) = text.lines().find_map(|l| l.trim().strip_prefix("# labels:")) {
        let labels: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if labels.len() != g.n_nodes() {
            return Err(Failure::usage(format!("{} labels for {} nodes", labels.len(), g.n_nodes())));
        }
        g.set_labels(Some(labels));
    }
    Ok(g)
}

fn cmd_oracle(graph: &Path, a: &AlgoArgs) -> Result<(), Failure> {
    let mag = read_graph(graph)?;
    let ok = mag.is_ancestral().map_err(Failure::not_mag)? && is_maximal(&mag).map_err(Failure::not_mag)?;
    if !ok {
        return Err(Failure::not_mag(format!("{} is not a maximal ancestral graph", graph.display())));
    }
    let p = mag.n_nodes();
    let gamma = a.gamma.unwrap_or_else(|| default_gamma(p));
    let truth = true_pag(&mag).map_err(Failure::other)?;
    // the local methods query γ-local separation, the global ones m-separation
    let tester = match a.algo {
        Algo::Lfci | Algo::LfciMb => CiTester::local_oracle(mag.clone(), gamma),
        Algo::Fci | Algo::Pc | Algo::Rpc => CiTester::graph_oracle(mag.clone()),
    };
    let t = Instant::now();
    let out = run_algo(&tester, p, a, gamma, || Ok(moral_graph(&mag, Some(gamma))))?;
    let labels = mag.labels().map(<[String]>::to_vec);
    emit(&out, labels.clone(), a, t.elapsed().as_millis())?;
    let mut truth_l = truth.clone();
    truth_l.set_labels(labels.clone());
    if let Some(path) = &a.out {
        write_file(&with_suffix(path, ".true_pag"), &graph_text(&truth_l))?;
    }
    let mut est = out.graph.clone();
    est.set_labels(labels);
    let diff = diff_report(&est, &truth_l);
    eprintln!("{} edge(s) differ from the true PAG", diff.len());
    for line in diff {
        eprintln!("  {line}");
    }
    Ok(())
}

fn load_harness(args: &HarnessArgs) -> Result<HarnessConfig, Failure> {
    let mut cfg = parse_config(&read_file(&args.config)?).map_err(Failure::usage)?;
    if let Some(s) = args.seed {
        cfg.base.seed = s;
    } else if !cfg.seed_given {
        cfg.base.seed = rand_seed();
        eprintln!("seed: {}", cfg.base.seed);
    }
    if let Some(e) = args.eta {
        cfg.base.eta = e;
    }
    if let Some(g) = args.gamma {
        cfg.base.gamma = g;
    }
    for c in cfg.cells() {
        c.validate()?;
    }
    fs::create_dir_all(&args.out).map_err(|e| Failure::other(format!("cannot create {}: {e}", args.out.display())))?;
    Ok(cfg)
}

fn rand_seed() -> u64 {
    use std::hash::{BuildHasher, RandomState};
    RandomState::new().hash_one(Instant::now())
}

fn observed(c: &ExperimentConfig) -> usize {
    c.p - (c.latent_fraction * c.p as f64).round() as usize
}

fn check_fci_size(cfg: &HarnessConfig, allow: bool) -> Result<(), Failure> {
    if allow || !cfg.methods.contains(&Method::Fci) {
        return Ok(());
    }
    match cfg.cells().iter().map(observed).max() {
        Some(q) if q > FCI_DEFAULT_MAX_NODES => Err(Failure::usage(format!(
            "fci on {q} observed nodes needs --allow-large-fci (limit {FCI_DEFAULT_MAX_NODES})"
        ))),
        _ => Ok(()),
    }
}

fn cmd_simulate(args: &HarnessArgs) -> Result<(), Failure> {
    let cfg = load_harness(args)?;
    check_fci_size(&cfg, args.allow_large_fci)?;
    let opts = SweepOptions { fci_max_pdsep_size: cfg.fci_max_pdsep_size };
    let mut lines = vec![format!("family,p,{PR_HEADER}")];
    let mut best: Vec<(String, f64)> = Vec::new();
    for c in cfg.cells() {
        for pt in pr_sweep_with(&c, &cfg.methods, opts)? {
            lines.push(format!("{},{},{}", c.family.name(), c.p, pt.csv()));
            let key = format!("{}/{}/{}", c.family.name(), c.p, pt.method.name());
            match best.iter_mut().find(|(k, _)| *k == key) {
                Some((_, f)) => *f = f.max(pt.f1_of_means()),
                None => best.push((key, pt.f1_of_means())),
            }
        }
    }
    let path = args.out.join("pr.csv");
    write_file(&path, &(lines.join("\n") + "\n"))?;
    let summary: Vec<String> = best.iter().map(|(k, f)| format!("{k} {}", fmt6(*f))).collect();
    println!("{}: {} rows; best F1 {}", path.display(), lines.len() - 1, summary.join(", "));
    Ok(())
}

fn cmd_bench(args: &HarnessArgs) -> Result<(), Failure> {
    let cfg = load_harness(args)?;
    check_fci_size(&cfg, args.allow_large_fci)?;
    let mut lines = vec![ORACLE_HEADER.to_string()];
    let mut min_recovered = 1.0f64;
    for c in cfg.cells() {
        for row in oracle_experiment_with(&c, &cfg.methods)? {
            min_recovered = min_recovered.min(row.recovered_frac);
            lines.push(row.csv());
        }
    }
    let path = args.out.join("oracle.csv");
    write_file(&path, &(lines.join("\n") + "\n"))?;
    println!("{}: {} rows; min recovered_frac {}", path.display(), lines.len() - 1, fmt6(min_recovered));
    Ok(())
}

fn median(xs: &mut [usize]) -> f64 {
    xs.sort_unstable();
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2] as f64
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0
    }
}

fn cmd_probe(args: &HarnessArgs) -> Result<(), Failure> {
    let cfg = load_harness(args)?;
    let mut gamma_lines = vec!["family,p,replicate,min_gamma".to_string()];
    let mut moral_lines = vec!["family,p,gamma,equal_frac".to_string()];
    let mut medians = Vec::new();
    let mut fracs = Vec::new();
    for c in cfg.cells() {
        let probe = TrekProbe {
            spec: c.graph_spec(),
            weights: cfg.probe_weights,
            omega_range: c.omega_range,
            replicates: c.replicates,
            seed: c.seed,
        };
        let mut mins = min_gamma_short_trek(&probe, cfg.tol)?;
        for (r, g) in mins.iter().enumerate() {
            gamma_lines.push(format!("{},{},{r},{g}", c.family.name(), c.p));
        }
        medians.push(format!("{}/{} {}", c.family.name(), c.p, fmt6(median(&mut mins))));
        let frac = local_moral_equality(&c)?;
        moral_lines.push(format!("{},{},{},{}", c.family.name(), c.p, c.gamma, fmt6(frac)));
        fracs.push(format!("{}/{} {}", c.family.name(), c.p, fmt6(frac)));
    }
    let gpath = args.out.join("min_gamma.csv");
    let mpath = args.out.join("moral.csv");
    write_file(&gpath, &(gamma_lines.join("\n") + "\n"))?;
    write_file(&mpath, &(moral_lines.join("\n") + "\n"))?;
    println!("{}: {} rows; median min_gamma {}", gpath.display(), gamma_lines.len() - 1, medians.join(", "));
    println!("{}: {} rows; equality {}", mpath.display(), moral_lines.len() - 1, fracs.join(", "));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Learn { data, algo, alpha } => cmd_learn(data, algo, *alpha),
        Command::Oracle { graph, algo } => cmd_oracle(graph, algo),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Probe(a) => cmd_probe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
