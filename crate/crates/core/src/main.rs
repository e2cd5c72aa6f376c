use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scalar_ensemble::error::Error;
use scalar_ensemble::frames::LemmaOptions;
use scalar_ensemble::harness::{
    load_config, output_path, run_check, run_concat, run_fid_curves, run_frames, run_scaling, write_curves_csv,
    write_json, write_populations_csv, write_records_csv, Format, RunConfig,
};

#[derive(Parser)]
#[command(name = "scalar-ensemble", version, about = "Chirped-pulse ensemble population transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the spectral-gap conditions over the parameter box.
    Check {
        #[command(flatten)]
        common: Common,
        /// Exit with status 3 if a condition fails.
        #[arg(long)]
        strict: bool,
    },
    /// Propagate the first parameter point.
    Simulate(Common),
    /// Propagate every parameter point.
    Sweep(Common),
    /// Final distance along `eps1_list` and its log-log slope.
    Scaling(Common),
    /// Concatenated sweep through `pulse.segments`.
    Concat(Common),
    /// Frame-cascade diagnostics along `eps1_list`.
    Frames {
        #[command(flatten)]
        common: Common,
        /// Slow-time grid points for the pointwise checks.
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
        /// Skip the residual integrals and the truncated-dynamics comparison.
        #[arg(long)]
        no_residuals: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    steps_per_period: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = load_config(&self.config)?;
        if let Some(d) = &self.out {
            cfg.output.dir = d.clone();
        }
        if let Some(w) = self.workers {
            cfg.output.workers = w;
        }
        if let Some(m) = self.steps_per_period {
            cfg.run.steps_per_period = m;
        }
        if let Some(n) = self.samples {
            cfg.run.n_samples = n;
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        cfg.validate()?;
        fs::create_dir_all(&cfg.output.dir)?;
        Ok(cfg)
    }
}

const DEGRADED: u8 = 4;
const CHECK_FAILED: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) | Error::Singularity(_) => DEGRADED,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn create(cfg: &RunConfig, stem: &str) -> Result<(PathBuf, BufWriter<File>), Error> {
    let path = output_path(&cfg.output.dir, stem, cfg.output.format);
    let file = BufWriter::new(File::create(&path)?);
    Ok((path, file))
}

fn alpha_dim(cfg: &RunConfig) -> usize {
    cfg.system.alpha[0].len()
}

fn sweep(cfg: &RunConfig) -> Result<u8, Error> {
    let out = run_fid_curves(cfg, cfg.output.workers)?;
    let (p1, w) = create(cfg, "records")?;
    let (p2, w2) = create(cfg, "curves")?;
    match cfg.output.format {
        Format::Csv => {
            write_records_csv(&out.records, alpha_dim(cfg), w)?;
            write_curves_csv(&out.curves, alpha_dim(cfg), w2)?;
        }
        Format::Json => {
            write_json(&out.records, w)?;
            write_json(&out.curves, w2)?;
        }
    }
    write_json(&out.conditions, File::create(cfg.output.dir.join("conditions.json"))?)?;
    for r in &out.records {
        println!(
            "run {:>3} alpha {:?} fid {:.6} distance {:.3e}{}",
            r.run_id,
            r.alpha,
            r.fidelity,
            r.distance,
            if r.degraded { " DEGRADED" } else { "" }
        );
    }
    println!("wrote {} and {}", p1.display(), p2.display());
    Ok(if out.degraded() { DEGRADED } else { 0 })
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Check { common, strict } => {
            let cfg = common.load()?;
            let report = run_check(&cfg)?;
            let path = output_path(&cfg.output.dir, "conditions", Format::Json);
            write_json(&report, File::create(&path)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            println!("wrote {}", path.display());
            Ok(if strict && !report.holds() { CHECK_FAILED } else { 0 })
        }
        Command::Simulate(common) => {
            let mut cfg = common.load()?;
            cfg.system.alpha.truncate(1);
            sweep(&cfg)
        }
        Command::Sweep(common) => sweep(&common.load()?),
        Command::Scaling(common) => {
            let cfg = common.load()?;
            let out = run_scaling(&cfg, cfg.output.workers)?;
            let (path, w) = create(&cfg, "scaling")?;
            match cfg.output.format {
                Format::Csv => write_records_csv(&out.records, alpha_dim(&cfg), w)?,
                Format::Json => write_json(&out, w)?,
            }
            for r in &out.records {
                println!("eps1 {:.4e} eps2 {:.4e} distance {:.4e}", r.eps1, r.eps2, r.distance);
            }
            println!(
                "slope {:.4} (rms residual {:.3e}){}",
                out.fit.slope,
                out.fit.residual,
                if out.fit.reliable { "" } else { " UNRELIABLE" }
            );
            println!("wrote {}", path.display());
            Ok(if out.fit.reliable { 0 } else { DEGRADED })
        }
        Command::Concat(common) => {
            let cfg = common.load()?;
            let out = run_concat(&cfg)?;
            let (path, w) = create(&cfg, "populations")?;
            match cfg.output.format {
                Format::Csv => write_populations_csv(&out, w)?,
                Format::Json => write_json(&out, w)?,
            }
            let last = out.populations.last().map(Vec::as_slice).unwrap_or(&[]);
            println!("final populations {last:.4?}");
            println!("wrote {}", path.display());
            Ok(if out.record.degraded { DEGRADED } else { 0 })
        }
        Command::Frames { common, grid, no_residuals } => {
            let cfg = common.load()?;
            let opts = LemmaOptions {
                grid,
                include_residuals: !no_residuals,
                steps_per_period: cfg.run.steps_per_period,
                ..Default::default()
            };
            let table = run_frames(&cfg, opts)?;
            let (path, w) = create(&cfg, "lemmas")?;
            match cfg.output.format {
                Format::Csv => table.write_csv(w)?,
                Format::Json => write_json(&table, w)?,
            }
            for r in &table.rows {
                println!(
                    "eps ({:.1e}, {:.1e}): eps1 sup|theta'| {:.4}, int|theta'| {:.6}, margins {:.3e} {:.3e} {:.3e}",
                    r.eps1,
                    r.eps2,
                    r.theta_rate,
                    r.theta_variation,
                    r.gap_margin_before,
                    r.gap_margin_after,
                    r.slope_margin
                );
            }
            println!("wrote {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
