use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::{info, warn};

use dapsvrg::analysis;
use dapsvrg::data::LowRankSpec;
use dapsvrg::engine::{Algorithm, CostModel};
use dapsvrg::experiment::{self, ExperimentConfig, RegChoice};
use dapsvrg::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

/// Simulated asynchronous proximal SVRG / SGD on synthetic low-rank
/// regression; writes convergence, speedup and variance-bound CSVs.
#[derive(Debug, Parser)]
#[command(name = "dapsvrg", version)]
struct Cli {
    /// Algorithms to run, comma separated or repeated.
    #[arg(long = "algorithm", value_delimiter = ',', default_value = "dap-svrg")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Step size; defaults to 1/(8 L_max).
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    stages: usize,
    /// Inner iterations per stage; defaults to 2n.
    #[arg(long)]
    inner: Option<usize>,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    lambda1: f64,
    #[arg(long, default_value_t = 1e-3)]
    lambda2: f64,
    #[arg(long, default_value = "nuclear")]
    reg: RegChoice,
    #[arg(long, default_value_t = 1.0)]
    cost_grad: f64,
    #[arg(long, default_value_t = 10.0)]
    cost_prox: f64,
    #[arg(long, default_value_t = 0.01)]
    cost_add: f64,
    #[arg(long, default_value_t = 0.0)]
    cost_net: f64,
    /// Run seeds; repeat for averaging.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Seed of the synthetic dataset.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Record variance diagnostics and write `<out>.lemma.csv`.
    #[arg(long)]
    instrument: bool,
    /// 100 x 50, rank 10, n = 10000.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker counts for a speedup table instead of convergence curves.
    #[arg(long, value_delimiter = ',')]
    speedup: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1e-6)]
    target_subopt: f64,
    /// Sweep eta (and beta for the decaying schedule) first, then run the
    /// best point per algorithm.
    #[arg(long)]
    grid: bool,
}

impl Cli {
    fn config(&self) -> ExperimentConfig {
        let mut data =
            if self.paper_scale { LowRankSpec::paper(self.data_seed) } else { LowRankSpec::desk(self.data_seed) };
        data.d1 = self.d1.unwrap_or(data.d1);
        data.d2 = self.d2.unwrap_or(data.d2);
        data.rank = self.rank.unwrap_or(data.rank);
        data.n = self.n.unwrap_or(data.n);
        data.lambda1 = self.lambda1;
        data.lambda2 = self.lambda2;
        ExperimentConfig {
            algorithms: self.algorithms.clone(),
            workers: self.workers,
            eta: self.eta,
            beta: self.beta,
            stages: self.stages,
            inner: self.inner,
            data,
            reg: self.reg,
            cost: CostModel {
                grad_cost: self.cost_grad,
                prox_cost: self.cost_prox,
                add_cost: self.cost_add,
                net_cost: self.cost_net,
            },
            seeds: if self.seeds.is_empty() { vec![0] } else { self.seeds.clone() },
            instrument: self.instrument,
            target_subopt: self.target_subopt,
        }
    }
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(out: Option<&Path>, suffix: &str, body: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            let path = sibling(p, suffix);
            std::fs::write(&path, body)?;
            info!("wrote {}", path.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn exec(cli: &Cli) -> Result<u8, Error> {
    let mut cfg = cli.config();
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    for a in &cfg.algorithms {
        for w in cfg.algo_config(&problem, *a, cfg.seeds[0]).warnings(&problem) {
            warn!("{a}: {w}");
        }
    }
    let reference = analysis::solve_reference(&problem, analysis::REFERENCE_TOL, analysis::REFERENCE_MAX_ITERS)?;
    info!("reference objective {:.16e}", reference.p_star);
    let out = cli.out.as_deref();

    if let Some(counts) = &cli.speedup {
        let table = experiment::run_speedup_on(&cfg, &problem, &reference, counts)?;
        emit(out, "", &table.to_csv())?;
        return Ok(0);
    }

    if cli.grid {
        let mut all = Vec::new();
        let mut outputs = Vec::new();
        for &a in &cfg.algorithms {
            let (cells, best) = experiment::tune_grid(&cfg, &problem, &reference, a)?;
            info!("{a}: best eta {} beta {} (score {:e})", best.eta, best.beta, best.score);
            all.extend(cells);
            let tuned = ExperimentConfig { algorithms: vec![a], eta: Some(best.eta), beta: best.beta, ..cfg.clone() };
            outputs.push(experiment::run_benchmark_on(&tuned, &problem, &reference)?);
        }
        let grid_target = out.map(|p| sibling(p, ".grid.csv"));
        match grid_target {
            Some(p) => std::fs::write(p, experiment::grid_csv(&all))?,
            None => eprint!("{}", experiment::grid_csv(&all)),
        }
        let mut metrics = String::from(experiment::METRICS_HEADER);
        metrics.push('\n');
        let mut diverged = false;
        for o in &outputs {
            metrics.extend(o.metrics_csv.lines().skip(1).map(|l| format!("{l}\n")));
            eprint!("{}", o.summary);
            diverged |= o.any_diverged();
        }
        emit(out, "", &metrics)?;
        return Ok(if diverged { EXIT_DIVERGED } else { 0 });
    }

    cfg.instrument = cli.instrument;
    let result = experiment::run_benchmark_on(&cfg, &problem, &reference)?;
    emit(out, "", &result.metrics_csv)?;
    if let Some(lemma) = &result.lemma_csv {
        match out {
            Some(_) => emit(out, ".lemma.csv", lemma)?,
            None => eprint!("{lemma}"),
        }
    }
    eprint!("{}", result.summary);
    Ok(if result.any_diverged() { EXIT_DIVERGED } else { 0 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match exec(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Divergence { .. } => EXIT_DIVERGED,
                _ => EXIT_CONFIG,
            })
        }
    }
}
