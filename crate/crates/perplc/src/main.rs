//! `perplc`: command-line driver for the perpl pipeline.
//!
//! Subcommands expose each stage (check, transform, mspe, solve, oracle) and
//! `test-corpus` validates the bundled example programs. Exit codes: 0 on
//! success, 1 for diagnostics, 2 when no sequence of transformations can
//! eliminate every recursive type, 3 when a solver or compiler budget is
//! exceeded.

mod corpus;

use clap::{Args, Parser, Subcommand};
use perpl::pipeline::{self, PipelineError, DEFAULT_MAX_VARS};
use perpl::solver::{Exact, SolveConfig};
use perpl::typecheck::Mode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "perplc", version, about = "Compiler and exact-inference engine for a probabilistic language with linear types")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Source file.
    file: PathBuf,
    /// Check with strict linearity (every binding used exactly once) instead
    /// of the affine default.
    #[arg(long)]
    linear: bool,
    /// Emit machine-readable JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, desugar, and typecheck a program.
    Check {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Eliminate every recursive type, printing the transformation sequence.
    Transform {
        #[command(flatten)]
        common: CommonArgs,
        /// Print each transformation step and the DR-graph.
        #[arg(long)]
        trace_dr: bool,
        /// Print the transformed program.
        #[arg(long)]
        emit_transformed: bool,
    },
    /// Compile the program to its system of polynomial equations.
    Mspe {
        #[command(flatten)]
        common: CommonArgs,
        /// Print the full (reduced) equation system.
        #[arg(long)]
        emit_mspe: bool,
        /// Abort if the equation system would exceed this many variables.
        #[arg(long, default_value_t = DEFAULT_MAX_VARS)]
        max_vars: u128,
    },
    /// Solve for the exact distribution of the main expression.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Solve in exact rational arithmetic (with an explicit infinity).
        #[arg(long)]
        exact: bool,
        /// Convergence tolerance for the iterative solver.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Iteration limit per strongly connected component.
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Abort if the equation system would exceed this many variables.
        #[arg(long, default_value_t = DEFAULT_MAX_VARS)]
        max_vars: u128,
        /// Print each transformation step.
        #[arg(long)]
        trace_dr: bool,
        /// Print the transformed program.
        #[arg(long)]
        emit_transformed: bool,
        /// Print the reduced equation system.
        #[arg(long)]
        emit_mspe: bool,
    },
    /// Enumerate runs exhaustively up to a step budget; prints a lower bound
    /// on the distribution plus the unexplored (residual) mass.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Reduction steps allowed per branch.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Run every bundled example program against its expected results.
    TestCorpus {
        /// Emit machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                PipelineError::Diagnostics(_) => 1,
                PipelineError::NoSequence { .. } => 2,
                PipelineError::Budget(_) => 3,
            })
        }
    }
}

fn read_source(path: &PathBuf) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| {
        PipelineError::Diagnostics(
            perpl::diag::Diagnostic::new(None, format!("cannot read {}: {e}", path.display()))
                .into(),
        )
    })
}

fn mode_of(linear: bool) -> Mode {
    if linear {
        Mode::Linear
    } else {
        Mode::Affine
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.cmd {
        Cmd::Check { common } => {
            let source = read_source(&common.file)?;
            let tp = pipeline::check_source(&source, mode_of(common.linear))?;
            let main_ty = perpl::core::render_type(tp.main_type(), &tp.program.tag_names);
            if common.json {
                println!("{}", serde_json::json!({"ok": true, "main_type": main_ty}));
            } else {
                println!("ok: main : {main_ty}");
            }
            Ok(())
        }
        Cmd::Transform {
            common,
            trace_dr,
            emit_transformed,
        } => {
            let source = read_source(&common.file)?;
            let tp = pipeline::check_source(&source, mode_of(common.linear))?;
            let elim = pipeline::transform(&tp)?;
            if common.json {
                let seq: Vec<serde_json::Value> = elim
                    .sequence
                    .iter()
                    .map(|(tag, name, label)| {
                        serde_json::json!({"tag": tag, "type": name, "transform": label})
                    })
                    .collect();
                let mut out = serde_json::json!({"sequence": seq});
                if trace_dr {
                    out["graph"] = serde_json::to_value(&elim.initial_graph).unwrap();
                }
                if emit_transformed {
                    out["program"] =
                        serde_json::json!(perpl::pretty::print_program(&elim.result.program));
                }
                println!("{out}");
            } else {
                for (_, name, label) in &elim.sequence {
                    println!("{name}: {label}");
                }
                if trace_dr {
                    print!("{}", perpl::dr::render_dot(&elim.initial_graph));
                }
                if emit_transformed {
                    print!("{}", perpl::pretty::print_program(&elim.result.program));
                }
            }
            Ok(())
        }
        Cmd::Mspe {
            common,
            emit_mspe,
            max_vars,
        } => {
            let source = read_source(&common.file)?;
            let tp = pipeline::check_source(&source, mode_of(common.linear))?;
            let elim = pipeline::transform(&tp)?;
            let m = pipeline::compile(&elim.result, max_vars)?;
            if common.json {
                println!("{}", m.to_json(&elim.result));
            } else {
                println!(
                    "{} variable(s) ({} before reduction)",
                    m.var_count(),
                    m.raw_var_count
                );
                if emit_mspe {
                    print!("{}", m.to_text());
                }
            }
            Ok(())
        }
        Cmd::Solve {
            common,
            exact,
            tol,
            max_iters,
            max_vars,
            trace_dr,
            emit_transformed,
            emit_mspe,
        } => {
            let source = read_source(&common.file)?;
            let cfg = SolveConfig { tol, max_iters };
            let mode = mode_of(common.linear);
            let (dist, report, extras) = if exact {
                let s = pipeline::solve_source::<Exact>(&source, mode, &cfg, max_vars)?;
                (
                    pipeline::distribution_json(&s.distribution),
                    s.report,
                    (s.mspe, s.transformed, s.elimination),
                )
            } else {
                let s = pipeline::solve_source::<f64>(&source, mode, &cfg, max_vars)?;
                (
                    pipeline::distribution_json(&s.distribution),
                    s.report,
                    (s.mspe, s.transformed, s.elimination),
                )
            };
            let (mspe, transformed, sequence) = extras;
            if trace_dr {
                for (_, name, label) in &sequence {
                    eprintln!("{name}: {label}");
                }
            }
            if emit_transformed {
                eprint!("{}", perpl::pretty::print_program(&transformed.program));
            }
            if emit_mspe {
                eprint!("{}", mspe.to_text());
            }
            if common.json {
                let mut out = dist;
                out["report"] = serde_json::to_value(&report).unwrap();
                println!("{out}");
            } else {
                println!("{dist}");
            }
            Ok(())
        }
        Cmd::Oracle { common, steps } => {
            let source = read_source(&common.file)?;
            let tp = pipeline::check_source(&source, mode_of(common.linear))?;
            let oracle = perpl::oracle::Oracle::new(&tp.program);
            let result = oracle.explore(steps);
            println!("{}", result.to_json());
            Ok(())
        }
        Cmd::TestCorpus { json } => corpus::run_corpus(json),
    }
}
