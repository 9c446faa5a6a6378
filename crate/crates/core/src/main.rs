use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use parisi_lab::finite_n::free_energy_mc;
use parisi_lab::hopflax::{best_bound, beta_c_bisect, counterexample_search, hopflax_bound};
use parisi_lab::parisi::{parisi_pde_solve, parisi_value, rs_gap, PdeGrid};
use parisi_lab::rs_at::alpha;
use parisi_lab::scan::{inclusion_violations, phase_grid, to_csv, Axis, ScanConfig};
use parisi_lab::{par, CouplingParams, Error, Lab, MixtureSpec, RsbMeasure, Settings};

#[derive(Parser, Debug)]
#[command(
    name = "parisi-lab",
    version,
    about = "Numerical laboratory for mixed p-spin glasses"
)]
struct Cli {
    /// JSON file with sections model, params, scan, tolerances, seed.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout (CSV or JSON by extension).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the optimizer starts and the disorder samples.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Point {
    /// Mixture: `sk`, `sk+p4c5`, `p3c1`, or `{"terms":[[p,c],...]}`.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fixed points of the RS equation and the AT statistic.
    AtCheck(Point),
    /// Parisi functional of a given atomic measure.
    ParisiEval {
        #[command(flatten)]
        point: Point,
        /// `{"atoms":[[q,w],...]}` inline or a path to such a file.
        #[arg(long)]
        measure: String,
        /// Also solve the PDE on the default grid.
        #[arg(long)]
        pde: bool,
    },
    /// Optimal measures with up to k+1 atoms and the RS gap.
    RsbOptimize {
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Hopf-Lax upper bound at h = 0.
    Hopflax {
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        l: Option<f64>,
    },
    /// Search C for a model in the AT region that is not replica symmetric.
    Counterexample {
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 4)]
        p: u32,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40,80")]
        c_grid: Vec<f64>,
    },
    /// Zero-field critical inverse temperature by bisection.
    BetaC {
        #[arg(long)]
        spec: Option<String>,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
    },
    /// Disorder-averaged free energy of a finite system.
    FiniteN {
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Grid scan over (beta, h) written as CSV.
    PhaseDiagram {
        #[arg(long)]
        spec: Option<String>,
        #[arg(long)]
        beta_lo: Option<f64>,
        #[arg(long)]
        beta_hi: Option<f64>,
        #[arg(long)]
        n_beta: Option<usize>,
        #[arg(long)]
        h_lo: Option<f64>,
        #[arg(long)]
        h_hi: Option<f64>,
        #[arg(long)]
        n_h: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ModelField {
    Shorthand(String),
    Full(MixtureSpec),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ParamsSection {
    beta: Option<f64>,
    h: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScanSection {
    beta: Option<Axis>,
    h: Option<Axis>,
    k_max: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    model: Option<ModelField>,
    params: ParamsSection,
    scan: ScanSection,
    tolerances: Settings,
    seed: Option<u64>,
}

enum Failure {
    Lab(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lab(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Context {
    config: ConfigFile,
    lab: Lab,
    seed: u64,
    out: Option<PathBuf>,
}

impl Context {
    fn spec(&self, cli: Option<&str>) -> Outcome<MixtureSpec> {
        match (cli, &self.config.model) {
            (Some(s), _) => Ok(s.parse()?),
            (None, Some(ModelField::Shorthand(s))) => Ok(s.parse()?),
            (None, Some(ModelField::Full(spec))) => Ok(spec.clone()),
            (None, None) => Err(Failure::Usage(
                "no mixture given (use --spec or the config model)".into(),
            )),
        }
    }

    fn beta(&self, cli: Option<f64>) -> Outcome<f64> {
        cli.or(self.config.params.beta)
            .ok_or_else(|| Failure::Usage("no beta given".into()))
    }

    fn params(&self, point: &Point) -> Outcome<CouplingParams> {
        let h = point.h.or(self.config.params.h).unwrap_or(0.0);
        Ok(CouplingParams::new(self.beta(point.beta)?, h)?)
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Outcome<()> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
        self.emit(&(text + "\n"))
    }

    fn emit(&self, text: &str) -> Outcome<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Outcome<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_measure(arg: &str) -> Outcome<RsbMeasure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Failure::Usage(format!("{arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Lab(Error::InvalidMeasure(e.to_string())))
}

#[derive(Serialize)]
struct ParisiEvalReport {
    measure: RsbMeasure,
    value: f64,
    pde_value: Option<f64>,
}

#[derive(Serialize)]
struct PointBound {
    l: f64,
    bound: f64,
    t_xi0_1: f64,
}

fn run(cli: Cli) -> Outcome<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        par::set_threads(n);
    }
    let config = load_config(cli.config.as_deref())?;
    let lab = Lab::new(config.tolerances.clone())?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let ctx = Context {
        config,
        lab,
        seed,
        out: cli.out,
    };
    let lab = &ctx.lab;

    match cli.command {
        Command::AtCheck(point) => {
            let spec = ctx.spec(point.spec.as_deref())?;
            let params = ctx.params(&point)?;
            lab.check_scale(&spec, &params)?;
            ctx.emit_json(&alpha(lab, &spec, &params))
        }
        Command::ParisiEval {
            point,
            measure,
            pde,
        } => {
            let spec = ctx.spec(point.spec.as_deref())?;
            let params = ctx.params(&point)?;
            let measure = read_measure(&measure)?;
            let value = parisi_value(lab, &measure, &spec, &params)?;
            let pde_value = if pde {
                Some(
                    parisi_pde_solve(
                        &measure,
                        &spec,
                        &params,
                        &PdeGrid::default_for(&spec, &params),
                    )?
                    .value,
                )
            } else {
                None
            };
            ctx.emit_json(&ParisiEvalReport {
                measure,
                value,
                pde_value,
            })
        }
        Command::RsbOptimize { point, k } => {
            let spec = ctx.spec(point.spec.as_deref())?;
            ctx.emit_json(&rs_gap(lab, &spec, &ctx.params(&point)?, k, ctx.seed)?)
        }
        Command::Hopflax { point, l } => {
            let spec = ctx.spec(point.spec.as_deref())?;
            let params = ctx.params(&point)?;
            match l {
                Some(l) => ctx.emit_json(&PointBound {
                    l,
                    bound: hopflax_bound(lab, &spec, &params, l)?,
                    t_xi0_1: params.t() * spec.xi0(1.0),
                }),
                None => ctx.emit_json(&best_bound(lab, &spec, &params)?),
            }
        }
        Command::Counterexample { beta, p, c_grid } => {
            let beta = ctx.beta(beta)?;
            ctx.emit_json(&counterexample_search(lab, beta, p, &c_grid, ctx.seed)?)
        }
        Command::BetaC { spec, k, lo, hi } => {
            let spec = ctx.spec(spec.as_deref())?;
            ctx.emit_json(&beta_c_bisect(lab, &spec, k, lo, hi, ctx.seed)?)
        }
        Command::FiniteN { point, n, samples } => {
            let spec = ctx.spec(point.spec.as_deref())?;
            ctx.emit_json(&free_energy_mc(
                &spec,
                &ctx.params(&point)?,
                n,
                samples,
                ctx.seed,
                lab.exec,
            )?)
        }
        Command::PhaseDiagram {
            spec,
            beta_lo,
            beta_hi,
            n_beta,
            h_lo,
            h_hi,
            n_h,
            k_max,
        } => {
            let spec = ctx.spec(spec.as_deref())?;
            let section = &ctx.config.scan;
            let axis = |base: Option<&Axis>,
                        lo: Option<f64>,
                        hi: Option<f64>,
                        n: Option<usize>,
                        name: &str|
             -> Outcome<Axis> {
                let lo = lo
                    .or(base.map(|a| a.lo))
                    .ok_or_else(|| Failure::Usage(format!("no {name} range given")))?;
                let hi = hi.or(base.map(|a| a.hi)).unwrap_or(lo);
                let n = n
                    .or(base.map(|a| a.n))
                    .unwrap_or(if hi == lo { 1 } else { 2 });
                Ok(Axis { lo, hi, n })
            };
            let h_default = Axis {
                lo: 0.0,
                hi: 0.0,
                n: 1,
            };
            let scan = ScanConfig {
                beta: axis(section.beta.as_ref(), beta_lo, beta_hi, n_beta, "beta")?,
                h: axis(
                    section.h.as_ref().or(Some(&h_default)),
                    h_lo,
                    h_hi,
                    n_h,
                    "h",
                )?,
                k_max: k_max.or(section.k_max).unwrap_or(1),
                seed: ctx.seed,
            };
            let cells = phase_grid(lab, &spec, &scan)?;
            for cell in cells.iter().filter(|c| c.error.is_some()) {
                eprintln!(
                    "cell beta={} h={} failed: {}",
                    cell.beta,
                    cell.h,
                    cell.error.as_deref().unwrap_or("")
                );
            }
            for i in inclusion_violations(&cells) {
                eprintln!(
                    "inclusion violated at beta={} h={}: RS cell outside the AT region",
                    cells[i].beta, cells[i].h
                );
            }
            let as_json = ctx
                .out
                .as_ref()
                .is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
            if as_json {
                ctx.emit_json(&cells)
            } else {
                ctx.emit(&to_csv(&cells))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lab(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
