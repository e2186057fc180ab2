mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anonarray::io::{read_array, read_constraints, read_schema, serialize_array};
use anonarray::{
    anonymity_profile, check_feasibility, closeness_matrix, compute_guarantee, construct_padding, export_hypergraph,
    local_homogeneity, validate, AccessProfileArray, AttributeSchema, ConstraintSet, ConstructionConfig, Error,
    HypergraphFormat,
};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use report::ConstructSummary;

const EXIT_ERROR: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_HARD_VIOLATION: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_INFEASIBLE: u8 = 5;

/// Verify, score and construct anonymizing arrays.
#[derive(Parser)]
#[command(name = "anonarray", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Emit a versioned JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the anonymity guarantee, or check it against a target.
    Verify {
        #[command(flatten)]
        input: ArrayInput,
        #[arg(long)]
        t: usize,
        /// Target guarantee; exit 2 when it is not met.
        #[arg(long)]
        r: Option<u64>,
    },
    /// Guarantee for t = 1, 2, ... until it drops to 1.
    Profile {
        #[command(flatten)]
        input: ArrayInput,
        #[arg(long)]
        t_max: Option<usize>,
    },
    /// Local and global homogeneity scores.
    Homogeneity {
        schema: PathBuf,
        array: PathBuf,
        #[arg(long)]
        t: usize,
        /// Include the pairwise closeness matrix.
        #[arg(long)]
        closeness: bool,
        /// Export the neighborhood hypergraph (json or text).
        #[arg(long, requires = "hypergraph_out")]
        hypergraph: Option<HypergraphFormat>,
        #[arg(long, requires = "hypergraph")]
        hypergraph_out: Option<PathBuf>,
    },
    /// Pad a base array with rows until the target guarantee holds.
    Construct {
        schema: PathBuf,
        /// Base array (default: start from no rows).
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        r: u64,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_rows: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        homogeneity_weight: f64,
        #[arg(long, default_value_t = 64)]
        candidates: usize,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        /// Output array file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive implicit hard constraints and check feasibility.
    ConstraintsDerive {
        schema: PathBuf,
        constraints: PathBuf,
        #[arg(long)]
        t: usize,
    },
}

#[derive(Args)]
struct ArrayInput {
    schema: PathBuf,
    array: PathBuf,
    #[arg(long)]
    constraints: Option<PathBuf>,
}

impl ArrayInput {
    fn load(&self) -> anonarray::Result<(AccessProfileArray, ConstraintSet)> {
        let schema = read_schema(&self.schema)?;
        let array = read_array(&self.array, &schema)?;
        let constraints = load_constraints(self.constraints.as_deref(), &schema)?;
        Ok((array, constraints))
    }
}

fn load_constraints(path: Option<&Path>, schema: &AttributeSchema) -> anonarray::Result<ConstraintSet> {
    match path {
        Some(p) => read_constraints(p, schema),
        None => Ok(ConstraintSet::unconstrained()),
    }
}

fn emit(json: bool, human: impl FnOnce() -> String, doc: impl FnOnce() -> Value) {
    if json {
        println!("{}", serde_json::to_string_pretty(&doc()).expect("report serializes"));
    } else {
        print!("{}", human());
    }
}

fn write_file(path: &Path, contents: &str) -> anonarray::Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli) -> anonarray::Result<u8> {
    let json = cli.json;
    match cli.command {
        Command::Verify { input, t, r } => {
            let (array, cs) = input.load()?;
            let validation = r.map(|r| validate(&array, r, t, &cs)).transpose()?;
            let report = match &validation {
                Some(v) => v.report.clone(),
                None => compute_guarantee(&array, t, &cs)?,
            };
            emit(
                json,
                || report::guarantee_human(&array, &report, validation.as_ref()),
                || report::guarantee_json(&array, &report, validation.as_ref()),
            );
            Ok(match validation {
                Some(_) if !report.hard_violations.is_empty() => EXIT_HARD_VIOLATION,
                Some(v) if !v.valid => EXIT_VIOLATION,
                _ => 0,
            })
        }
        Command::Profile { input, t_max } => {
            let (array, cs) = input.load()?;
            let profile = anonymity_profile(&array, &cs, t_max)?;
            emit(
                json,
                || report::profile_human(&array, &profile),
                || report::profile_json(&array, &profile),
            );
            Ok(if profile.hard_violations.is_empty() {
                0
            } else {
                EXIT_HARD_VIOLATION
            })
        }
        Command::Homogeneity {
            schema,
            array,
            t,
            closeness,
            hypergraph,
            hypergraph_out,
        } => {
            let schema = read_schema(&schema)?;
            let array = read_array(&array, &schema)?;
            let report = local_homogeneity(&array, t)?;
            let matrix = closeness.then(|| closeness_matrix(&array, t)).transpose()?;
            if let (Some(format), Some(path)) = (hypergraph, hypergraph_out) {
                write_file(&path, &export_hypergraph(&array, t, format)?)?;
            }
            emit(
                json,
                || report::homogeneity_human(&array, &report, matrix.as_ref()),
                || report::homogeneity_json(&array, &report, matrix.as_ref()),
            );
            Ok(0)
        }
        Command::Construct {
            schema,
            base,
            constraints,
            r,
            t,
            seed,
            max_rows,
            homogeneity_weight,
            candidates,
            restarts,
            out,
        } => {
            let schema = read_schema(&schema)?;
            let base = match &base {
                Some(p) => read_array(p, &schema)?,
                None => AccessProfileArray::empty(schema.clone()),
            };
            let cs = load_constraints(constraints.as_deref(), &schema)?;
            let config = ConstructionConfig {
                seed,
                max_rows,
                candidates_per_row: candidates,
                restarts,
                homogeneity_weight,
                ..ConstructionConfig::new(r, t)
            };
            let result = match construct_padding(&base, &cs, &config) {
                Ok(result) => result,
                Err(Error::Infeasible(report)) => {
                    eprintln!("constraint system is infeasible at t = {t}");
                    emit(
                        json,
                        || report::feasibility_human(&schema, t, &report),
                        || report::feasibility_json(&schema, t, &report),
                    );
                    return Ok(EXIT_INFEASIBLE);
                }
                Err(Error::BudgetExceeded(b)) => {
                    eprintln!(
                        "row budget of {} exhausted; {} credential(s) still short, for example:",
                        b.max_rows,
                        b.remaining.len()
                    );
                    for (c, n) in b.remaining.iter().take(10) {
                        eprintln!("  {} needs {n} more", c.display(&schema));
                    }
                    return Ok(EXIT_BUDGET);
                }
                Err(e) => return Err(e),
            };
            let global = local_homogeneity(&result.array, t)?.global;
            let csv = serialize_array(&result.array);
            let out_name = out.as_ref().map(|p| p.display().to_string());
            if let Some(path) = &out {
                write_file(path, &csv)?;
            }
            let summary = ConstructSummary {
                result: &result,
                global: &global,
                out: out_name.as_deref(),
            };
            if json {
                let embedded = out.is_none().then(|| csv.clone());
                emit(true, String::new, || report::construct_json(&summary, embedded));
            } else if out.is_some() {
                print!("{}", report::construct_human(&summary));
            } else {
                eprint!("{}", report::construct_human(&summary));
                print!("{csv}");
            }
            Ok(0)
        }
        Command::ConstraintsDerive { schema, constraints, t } => {
            let schema = read_schema(&schema)?;
            let cs = read_constraints(&constraints, &schema)?;
            let report = check_feasibility(&schema, &cs, t)?;
            emit(
                json,
                || report::feasibility_human(&schema, t, &report),
                || report::feasibility_json(&schema, t, &report),
            );
            Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_ERROR);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
