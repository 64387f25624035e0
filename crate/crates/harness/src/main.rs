use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use affine_core::catalog;
use affine_core::frame_bundle::Frame;
use affine_core::{Coords, Tangent};
use affine_harness::{dump, load_scenario, run_suite, HarnessError};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "affine", version, about = "Affine connections on charted manifolds: checks and trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario's checks and write a JSON report.
    Run {
        scenario: PathBuf,
        /// Override the integrator step.
        #[arg(long)]
        step: Option<f64>,
        /// Multiply every check tolerance.
        #[arg(long)]
        tol_scale: Option<f64>,
        /// Override the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List catalog manifolds with their charts, connections and fields.
    List,
    /// Write a trajectory as CSV.
    Dump {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        kind: DumpKind,
        /// Field to flow, for `--kind flow`. Defaults to the scenario's first field.
        #[arg(long)]
        field: Option<String>,
        /// Chart the starting point is given in. Defaults to the first chart.
        #[arg(long)]
        chart: Option<String>,
        /// Starting coordinates, comma separated. Sampled when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        /// Initial geodesic velocity. Random unit vector when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        vector: Option<Vec<f64>>,
        /// Parameter of the standard horizontal field, for `--kind frame`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        duration: f64,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum DumpKind {
    Geodesic,
    Flow,
    Frame,
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn coords(xs: &[f64], n: usize, what: &str) -> Result<Coords> {
    if xs.len() != n {
        bail!("--{what} needs {n} components, got {}", xs.len());
    }
    Ok(Coords::from_row_slice(xs))
}

fn list() {
    for name in catalog::NAMES {
        let e = catalog::lookup(name).expect("catalog names resolve");
        let charts: Vec<&str> = e.atlas.chart_ids().map(|c| e.atlas.chart_name(c)).collect();
        println!("{name} (dim {})", e.atlas.dim());
        println!("  charts:      {}", charts.join(", "));
        println!("  connections: {}", e.connection_names().join(", "));
        println!("  fields:      {}", e.field_names().join(", "));
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::List => {
            list();
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scenario, step, tol_scale, seed, out } => {
            let mut s = load_scenario(&scenario)?;
            if step.is_some() {
                s.integrator.step = step;
            }
            if let Some(k) = tol_scale {
                s.tol_scale = k;
            }
            if let Some(seed) = seed {
                s.rng_seed = seed;
            }
            let report = run_suite(&s)?;
            let mut w = output(out.as_ref())?;
            writeln!(w, "{}", report.to_json())?;
            w.flush()?;
            eprint!("{}", report.summary());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Dump { scenario, kind, field, chart, point, vector, lambda, duration, step, seed, out } => {
            let mut s = load_scenario(&scenario)?;
            if step.is_some() {
                s.integrator.step = step;
            }
            let entry = s.entry()?;
            let conn = s.connection_in(&entry)?;
            let cfg = s.integrator_config();
            let n = entry.atlas.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(s.rng_seed));
            let start = match point {
                Some(xs) => {
                    let id = match &chart {
                        Some(name) => entry.atlas.chart_id(name).map_err(|_| HarnessError::UnknownCatalogName { kind: "chart", name: name.clone() })?,
                        None => entry.atlas.chart_ids().next().ok_or_else(|| anyhow!("atlas has no charts"))?,
                    };
                    entry.atlas.point(id, coords(&xs, n, "point")?)?
                }
                None => entry.sample_point(&mut rng),
            };
            let w = output(out.as_ref())?;
            match kind {
                DumpKind::Geodesic => {
                    let v = match vector {
                        Some(xs) => coords(&xs, n, "vector")?,
                        None => catalog::random_unit_vector(&mut rng, n),
                    };
                    dump::geodesic_csv(conn, &Tangent::new(start, v), duration, &cfg, w)?;
                }
                DumpKind::Flow => {
                    let name = field.or_else(|| s.fields.first().cloned()).ok_or_else(|| anyhow!("--kind flow needs --field or a scenario field"))?;
                    let f = s.fields_in(&entry, &[name])?.remove(0);
                    dump::flow_csv(&f, &start, duration, &cfg, w)?;
                }
                DumpKind::Frame => {
                    let l = match lambda {
                        Some(xs) => coords(&xs, n, "lambda")?,
                        None => catalog::random_unit_vector(&mut rng, n),
                    };
                    let frame = Frame::identity_at(&start);
                    dump::frame_csv(conn, &l, &frame, duration, &cfg, w)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
