use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};

use quorum_core::bounds::BoundsTable;
use quorum_core::dynamics::{self, InitSpec, ProcessParams};
use quorum_core::gen::{self, GraphConfig};
use quorum_core::graph::RegularGraph;
use quorum_core::harness::{self, ScanConfig};
use quorum_core::isoperimetry::{self, AuditConfig, SamplerKind};
use quorum_core::oracle::{self, EventKind};
use quorum_core::{Error, Result};

#[derive(Parser)]
#[command(name = "quorum", version, about = "Threshold-two contact process on random regular graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a uniform simple r-regular graph and write it to a file.
    Generate {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Give up after this many rejection-sampling attempts.
        #[arg(long, default_value_t = 1_000_000)]
        max_attempts: u64,
    },
    /// Run the process on a stored graph and write the trajectory CSV.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        p: f64,
        /// Occupation threshold: a site needs at least this many occupied neighbors.
        #[arg(long, default_value_t = 2)]
        theta: u32,
        /// full | random:<density> | file:<path>
        #[arg(long, default_value = "full")]
        init: String,
        #[arg(long)]
        t_max: u64,
        #[arg(long)]
        seed: u64,
        /// Stop early once density drops below this value.
        #[arg(long)]
        stop_below: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample vertex subsets and tally expansion / blocked-set events.
    Audit {
        #[arg(long)]
        graph: PathBuf,
        /// Subset size.
        #[arg(long)]
        m: u32,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        samples: u32,
        /// uniform | ball | mixed
        #[arg(long, default_value = "uniform")]
        sampler: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact small-instance distributions by pairing enumeration.
    Oracle {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        r: u32,
        /// Subset size the statistic is evaluated on.
        #[arg(long)]
        m: u32,
        /// Condition on the multigraph being simple.
        #[arg(long)]
        simple: bool,
        /// cross-edges | E | H | F
        #[arg(long)]
        stat: String,
        /// Event threshold; required for E, H and F.
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the constants table for given degree and infection probability.
    Bounds {
        #[arg(long)]
        r: u32,
        #[arg(long)]
        p: f64,
        /// Override the expansion margin instead of deriving it from p.
        #[arg(long)]
        eta: Option<f64>,
        /// Text table destination; a CSV sibling with the same stem is written too.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter scan described by a config file.
    Scan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarize scan results: extinction-time slope, p_c bracket, or density gap.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// slope | pc | gap
        #[arg(long)]
        kind: String,
        /// Infection probability to fit (slope reports only).
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Generate { n, r, seed, out, max_attempts } => {
            let mut cfg = GraphConfig::new(n, r, seed);
            cfg.max_attempts = max_attempts;
            let sampled = gen::sample_simple_regular(&cfg)?;
            sampled.graph.write_path(&out)?;
            println!(
                "wrote {} (n={n} r={r} seed={seed}, {} attempts)",
                out.display(),
                sampled.attempts
            );
            Ok(())
        }
        Cmd::Simulate { graph, p, theta, init, t_max, seed, stop_below, out } => {
            let g = RegularGraph::read_path(&graph)?;
            let spec = InitSpec::from_str(&init)?;
            let init_state = spec.build(g.n(), quorum_core::rng::child_seed(seed, &[3]))?;
            let params = ProcessParams { p, theta, seed, t_max, stop_below };
            let record = dynamics::run(&g, &init_state, &params)?;
            write_file(&out, &record.to_csv())?;
            match record.extinction_time {
                Some(t) => println!("extinct at t={t}"),
                None => println!(
                    "ran {} steps, final density {:.6}",
                    record.steps(),
                    record.final_density()
                ),
            }
            Ok(())
        }
        Cmd::Audit { graph, m, eta, samples, sampler, seed, out } => {
            let g = RegularGraph::read_path(&graph)?;
            let cfg = AuditConfig {
                m,
                eta,
                samples,
                sampler: SamplerKind::from_str(&sampler)?,
                seed,
            };
            let report = isoperimetry::audit_events(&g, &cfg)?;
            write_file(&out, &report.to_csv())?;
            println!(
                "samples={samples} freq_E={:.4} freq_H={:.4} freq_F={:.4}",
                report.freq_e, report.freq_h, report.freq_f
            );
            println!(
                "star2/m max {:.4}, star1/m min {:.4}, blocked/m max {:.4}",
                report.star2_ratio_max, report.star1_ratio_min, report.blocked_ratio_max
            );
            Ok(())
        }
        Cmd::Oracle { n, r, m, simple, stat, k, out } => {
            let body = match stat.as_str() {
                "cross-edges" => {
                    let pmf = oracle::exact_cross_edge_pmf(n, r, m, simple)?;
                    let mut s = String::from("s,count,numerator,denominator,probability\n");
                    for (val, count, prob) in &pmf.entries {
                        s.push_str(&format!(
                            "{val},{count},{},{},{}\n",
                            prob.numer(),
                            prob.denom(),
                            *prob.numer() as f64 / *prob.denom() as f64
                        ));
                    }
                    s
                }
                other => {
                    let event = EventKind::from_str(other)?;
                    let k = k.ok_or_else(|| {
                        Error::invalid(format!("--k is required for --stat {other}"))
                    })?;
                    let prob = oracle::exact_event_probability(n, r, m, k, event, simple)?;
                    format!(
                        "event,n,r,m,k,simple,numerator,denominator,probability\n{event},{n},{r},{m},{k},{},{},{},{}\n",
                        u8::from(simple),
                        prob.numer(),
                        prob.denom(),
                        *prob.numer() as f64 / *prob.denom() as f64
                    )
                }
            };
            write_file(&out, &body)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Bounds { r, p, eta, out } => {
            let table = BoundsTable::compute(r, p, eta)?;
            match out {
                Some(path) => {
                    write_file(&path, &table.to_string())?;
                    let csv_path = path.with_extension("csv");
                    write_file(&csv_path, &table.to_csv())?;
                    println!("wrote {} and {}", path.display(), csv_path.display());
                }
                None => print!("{table}"),
            }
            Ok(())
        }
        Cmd::Scan { config } => {
            let cfg = ScanConfig::read_path(&config)?;
            let output = harness::run_scan(&cfg)?;
            let failed = output.rows.iter().filter(|row| !row.is_ok()).count();
            println!(
                "{} cells ({failed} failed), results in {}, manifest in {}",
                output.rows.len(),
                output.results_path.display(),
                output.manifest_path.display()
            );
            Ok(())
        }
        Cmd::Report { input, kind, p, out } => {
            let rows = harness::read_results_csv(&input)?;
            let body = match kind.as_str() {
                "slope" => {
                    let p = p.ok_or_else(|| Error::invalid("--p is required for --kind slope"))?;
                    harness::fit_extinction_slope(&rows, p)?.to_csv()
                }
                "pc" => harness::estimate_pc(&rows)?.to_csv(),
                "gap" => harness::gap_report(&rows).to_csv(),
                other => {
                    return Err(Error::invalid(format!(
                        "unknown report kind {other:?} (expected slope|pc|gap)"
                    )))
                }
            };
            match out {
                Some(path) => {
                    write_file(&path, &body)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{body}"),
            }
            Ok(())
        }
    }
}
