//! `repcount`, a command-line front end for repair counting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use repcount_core::eval::{count_entailing, ratio, rel_freq};
use repcount_core::fpras::{karp_luby_count, monte_carlo_count, ApproxParams};
use repcount_core::gen::{
    cook_reduce, expected_gap_count, gap_decide, gen_gap3sat, gen_gap3sat_tabulated, gen_rfreq_family, Cnf3,
    GapDecision, GapParams, STAR,
};
use repcount_core::model::{ConjunctiveQuery, Constant, Database, FdSet, Schema};
use repcount_core::repair::{count_repairs, enumerate_repairs, oracle_counts, DEFAULT_ORACLE_CAP};
use repcount_core::safety::classify;
use repcount_core::sampler::sample_repair;
use repcount_core::syntax::{parse_answer, parse_facts, parse_query, parse_schema_fds, print_facts, print_schema_fds};
use repcount_core::Error;

#[derive(Parser, Debug)]
#[command(name = "repcount", version, about = "Repair counting for inconsistent databases under functional dependencies")]
struct Cli {
    #[command(flatten)]
    inputs: Inputs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Inputs {
    /// Relation declarations and FDs.
    #[arg(long, global = true, value_name = "FILE")]
    schema: Option<PathBuf>,
    /// One fact per line.
    #[arg(long, global = true, value_name = "FILE")]
    facts: Option<PathBuf>,
    /// A rule `Ans(...) :- ... .`
    #[arg(long, global = true, value_name = "FILE")]
    query: Option<PathBuf>,
    /// Values for the head variables of the query, comma separated.
    #[arg(long, global = true, value_name = "V1,V2,...")]
    answer: Option<String>,
    /// Seed for every randomized command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Largest database the brute-force enumerator accepts.
    #[arg(long, global = true, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    /// Print a JSON record instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether counting the repairs entailing the query is tractable.
    Classify,
    /// Exact number of repairs (FDs need an LHS chain).
    CountRepairs,
    /// Exact number of repairs entailing the query (safe queries only).
    Count,
    /// Exact fraction of repairs entailing the query (safe queries only).
    Rfreq,
    /// Uniformly random repairs.
    Sample {
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Karp-Luby estimate of the number of repairs entailing the query.
    Approx {
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Refuse queries with more homomorphic images than this.
        #[arg(long)]
        image_cap: Option<usize>,
    },
    /// Naive Monte-Carlo estimate from uniform repair samples.
    Mc {
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Brute-force repair enumeration, for checking small inputs.
    Oracle {
        /// Also print every repair.
        #[arg(long)]
        list: bool,
    },
    /// Generate instance families.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Reduce counting query answers to counting entailing repairs.
    Reduce {
        /// Write facts.txt and query.txt here instead of printing the facts.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// The repair-counting gadget of a 3CNF formula.
    Gap3sat {
        /// DIMACS file with three literals per clause.
        #[arg(long, value_name = "FILE")]
        cnf: PathBuf,
        /// Copies of each clause gadget.
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Omit the per-variable anchor facts.
        #[arg(long)]
        tabulated: bool,
        /// Run the threshold test with gamma = 1/16 and epsilon = 1/3, counting
        /// repairs as a sum over assignments. Needs `--k` divisible by 16.
        #[arg(long)]
        decide: bool,
        /// Write schema.txt and facts.txt here instead of printing them.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// The low-frequency family with `2n + 1` facts.
    Rfreq {
        /// Number of conflicting pairs.
        #[arg(long)]
        n: usize,
        /// Write schema.txt, facts.txt and query.txt here instead of printing them.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
}

/// What a command produced: a text rendering and a JSON result.
struct Report {
    text: String,
    result: Value,
    exact: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Parse { .. }) => 2,
        Some(Error::OracleCapExceeded { .. }) => 4,
        Some(_) => 3,
        // unreadable or missing inputs
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut loaded = Loaded::default();
    match run(&cli, &mut loaded) {
        Ok(report) => {
            if cli.inputs.json {
                let record = json!({
                    "command": command_name(&cli.command),
                    "inputs-digest": loaded.digest(),
                    "result": report.result,
                    "exact": report.exact,
                });
                println!("{}", serde_json::to_string_pretty(&record).expect("valid JSON"));
            } else {
                print!("{}", report.text);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Classify => "classify",
        Command::CountRepairs => "count-repairs",
        Command::Count => "count",
        Command::Rfreq => "rfreq",
        Command::Sample { .. } => "sample",
        Command::Approx { .. } => "approx",
        Command::Mc { .. } => "mc",
        Command::Oracle { .. } => "oracle",
        Command::Gen(GenCommand::Gap3sat { .. }) => "gen gap3sat",
        Command::Gen(GenCommand::Rfreq { .. }) => "gen rfreq",
        Command::Reduce { .. } => "reduce",
    }
}

/// Raw input texts, kept for the digest.
#[derive(Default)]
struct Loaded {
    texts: BTreeMap<&'static str, String>,
}

impl Loaded {
    fn read(&mut self, label: &'static str, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {} file {}", label, path.display()))?;
        self.texts.insert(label, text.clone());
        Ok(text)
    }

    fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (label, text) in &self.texts {
            h.update(label.as_bytes());
            h.update([0]);
            h.update(text.len().to_le_bytes());
            h.update(text.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| anyhow!("this command needs --{flag}"))
}

fn load_schema(inputs: &Inputs, loaded: &mut Loaded) -> Result<(Arc<Schema>, FdSet)> {
    let text = loaded.read("schema", required(&inputs.schema, "schema")?)?;
    Ok(parse_schema_fds(&text)?)
}

fn load_facts(inputs: &Inputs, loaded: &mut Loaded, schema: &Arc<Schema>) -> Result<Database> {
    let text = loaded.read("facts", required(&inputs.facts, "facts")?)?;
    Ok(parse_facts(&text, schema)?)
}

/// The Boolean query, grounded with `--answer` when the head is nonempty.
fn load_query(inputs: &Inputs, loaded: &mut Loaded, schema: &Schema) -> Result<ConjunctiveQuery> {
    let text = loaded.read("query", required(&inputs.query, "query")?)?;
    let parsed = parse_query(&text, schema)?;
    match &inputs.answer {
        Some(answer) => {
            loaded.texts.insert("answer", answer.clone());
            Ok(parsed.ground(&parse_answer(answer)?)?)
        }
        None => Ok(parsed.into_boolean()?),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A 15-significant-digit decimal rendering of a non-negative rational.
fn approximate(r: &BigRational) -> String {
    let x = r.to_f64().unwrap_or(f64::NAN);
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        format!("{:.*}", (14 - exp).max(0) as usize, x)
    } else {
        format!("{x:.14e}")
    }
}

fn ratio_json(r: &BigRational) -> Value {
    json!({
        "numerator": r.numer().to_string(),
        "denominator": r.denom().to_string(),
        "fraction": r.to_string(),
        "approximate": approximate(r),
    })
}

fn ratio_text(r: &BigRational) -> String {
    format!("{r} (approximately {})", approximate(r))
}

fn facts_json(db: &Database) -> Value {
    Value::Array(db.facts().map(|f| Value::String(f.to_string())).collect())
}

fn run(cli: &Cli, loaded: &mut Loaded) -> Result<Report> {
    let inputs = &cli.inputs;
    match &cli.command {
        Command::Classify => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let q = load_query(inputs, loaded, &schema)?;
            let v = classify(&schema, &sigma, &q)?;
            let mut text = format!(
                "complexity: {}\nlhs chain: {}\nsafe: {}\n",
                v.complexity,
                yes_no(v.chain_ok),
                yes_no(v.safe)
            );
            if !v.trace.is_empty() {
                text.push_str("trace:\n");
                for step in &v.trace {
                    text.push_str(&format!("  {step}\n"));
                }
            }
            Ok(Report {
                text,
                result: json!({
                    "complexity": v.complexity.to_string(),
                    "lhs_chain": v.chain_ok,
                    "safe": v.safe,
                    "trace": v.trace.iter().map(|s| json!({"depth": s.depth, "query": s.query, "rule": s.rule.to_string()})).collect::<Vec<_>>(),
                }),
                exact: true,
            })
        }
        Command::CountRepairs => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let db = load_facts(inputs, loaded, &schema)?;
            let n = count_repairs(&db, &sigma)?;
            Ok(count_report("repairs", &n))
        }
        Command::Count => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let db = load_facts(inputs, loaded, &schema)?;
            let q = load_query(inputs, loaded, &schema)?;
            let n = count_entailing(&db, &sigma, &q)?;
            Ok(count_report("repairs entailing the query", &n))
        }
        Command::Rfreq => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let db = load_facts(inputs, loaded, &schema)?;
            let q = load_query(inputs, loaded, &schema)?;
            let f = rel_freq(&db, &sigma, &q)?;
            Ok(Report {
                text: format!("relative frequency: {}\n", ratio_text(&f)),
                result: ratio_json(&f),
                exact: true,
            })
        }
        Command::Sample { count } => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let db = load_facts(inputs, loaded, &schema)?;
            let mut r = rng(inputs.seed);
            let mut text = String::new();
            let mut samples = Vec::with_capacity(*count);
            for i in 0..*count {
                let rep = sample_repair(&db, &sigma, &mut r)?;
                text.push_str(&format!("# sample {}\n{}", i + 1, print_facts(&rep)));
                samples.push(facts_json(&rep));
            }
            Ok(Report {
                text,
                result: json!({"seed": inputs.seed, "samples": samples}),
                exact: true,
            })
        }
        Command::Approx { eps, delta, image_cap } => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let db = load_facts(inputs, loaded, &schema)?;
            let q = load_query(inputs, loaded, &schema)?;
            let mut params = ApproxParams::new(*eps, *delta, inputs.seed)?;
            if let Some(cap) = image_cap {
                params = params.with_image_cap(*cap);
            }
            let est = karp_luby_count(&db, &sigma, &q, &params)?;
            let text = if est.exact {
                format!("repairs entailing the query: {} (exact, {} images)\n", est.estimate, est.images)
            } else {
                format!(
                    "repairs entailing the query: {} (estimate, eps = {eps}, delta = {delta})\nimages: {}\ntrials: {}\nsuccesses: {}\nraw estimate: {}\n",
                    est.estimate,
                    est.images,
                    est.trials,
                    est.successes,
                    ratio_text(&est.raw)
                )
            };
            Ok(Report {
                text,
                result: json!({
                    "estimate": est.estimate.to_string(),
                    "raw": ratio_json(&est.raw),
                    "images": est.images,
                    "total_weight": est.total_weight.to_string(),
                    "trials": est.trials,
                    "successes": est.successes,
                    "epsilon": eps,
                    "delta": delta,
                    "seed": inputs.seed,
                }),
                exact: est.exact,
            })
        }
        Command::Mc { samples } => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let db = load_facts(inputs, loaded, &schema)?;
            let q = load_query(inputs, loaded, &schema)?;
            let est = monte_carlo_count(&db, &sigma, &q, *samples, &mut rng(inputs.seed))?;
            Ok(Report {
                text: format!(
                    "repairs entailing the query: {} (estimate)\nhits: {} of {} samples\nrepairs: {}\n",
                    est.estimate, est.hits, est.samples, est.repairs
                ),
                result: json!({
                    "estimate": est.estimate.to_string(),
                    "raw": ratio_json(&est.raw),
                    "hits": est.hits,
                    "samples": est.samples,
                    "repairs": est.repairs.to_string(),
                    "seed": inputs.seed,
                }),
                exact: false,
            })
        }
        Command::Oracle { list } => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let db = load_facts(inputs, loaded, &schema)?;
            let cap = inputs.oracle_cap;
            let mut result = serde_json::Map::new();
            let mut text;
            if inputs.query.is_some() {
                let q = load_query(inputs, loaded, &schema)?;
                let (total, hits) = oracle_counts(&db, &sigma, &q, cap)?;
                let f = ratio(&hits, &total);
                text = format!(
                    "repairs: {total}\nrepairs entailing the query: {hits}\nrelative frequency: {}\n",
                    ratio_text(&f)
                );
                result.insert("repairs".into(), json!(total.to_string()));
                result.insert("entailing".into(), json!(hits.to_string()));
                result.insert("rfreq".into(), ratio_json(&f));
            } else {
                let n = BigUint::from(enumerate_repairs(&db, &sigma, cap)?.len());
                text = format!("repairs: {n}\n");
                result.insert("repairs".into(), json!(n.to_string()));
            }
            if *list {
                let reps = enumerate_repairs(&db, &sigma, cap)?;
                for (i, rep) in reps.iter().enumerate() {
                    text.push_str(&format!("# repair {}\n{}", i + 1, print_facts(rep)));
                }
                result.insert("list".into(), Value::Array(reps.iter().map(facts_json).collect()));
            }
            Ok(Report {
                text,
                result: Value::Object(result),
                exact: true,
            })
        }
        Command::Gen(GenCommand::Gap3sat { cnf, k, tabulated, decide, out_dir }) => {
            let text = loaded.read("cnf", cnf)?;
            let phi = Cnf3::parse_dimacs(&text)?;
            let (db, sigma) = if *tabulated { gen_gap3sat_tabulated(&phi, *k)? } else { gen_gap3sat(&phi, *k)? };
            let conflicts = db.facts().filter(|f| f.value(0) == &Constant::new(STAR)).count();
            let mut summary = format!(
                "# facts: {}, conflict facts: {}, clauses: {}, variables: {}\n",
                db.len(),
                conflicts,
                phi.clauses().len(),
                phi.variables().len()
            );
            let mut result = serde_json::Map::new();
            result.insert("facts_count".into(), json!(db.len()));
            result.insert("conflict_facts".into(), json!(conflicts));
            if !*tabulated && phi.variables().len() <= 24 {
                let expected = expected_gap_count(&phi, *k)?;
                summary.push_str(&format!("# repairs: {expected}\n"));
                result.insert("expected_repairs".into(), json!(expected.to_string()));
            }
            if *decide {
                let k = u32::try_from(*k).context("k is too large")?;
                let gamma = BigRational::new(1.into(), 16.into());
                let params = GapParams::new(gamma, BigRational::new(1.into(), 3.into()), k)?;
                let outcome = gap_decide(&phi, &params, |phi, _, _| expected_gap_count(phi, k as usize))?;
                let verdict = match outcome.decision {
                    GapDecision::Accept => "accept",
                    GapDecision::Reject => "reject",
                };
                summary.push_str(&format!(
                    "# decision: {verdict} (count {} against threshold {})\n",
                    outcome.count, outcome.threshold
                ));
                result.insert("decision".into(), json!(verdict));
                result.insert("threshold".into(), ratio_json(&outcome.threshold));
            }
            let files = [("schema.txt", print_schema_fds(db.schema(), &sigma)), ("facts.txt", print_facts(&db))];
            Ok(emit(files, out_dir.as_deref(), summary, result)?)
        }
        Command::Gen(GenCommand::Rfreq { n, out_dir }) => {
            let (db, sigma, q) = gen_rfreq_family(*n);
            let summary = format!("# facts: {}, relative frequency: 1/(2^{n}+1)\n", db.len());
            let files = [
                ("schema.txt", print_schema_fds(db.schema(), &sigma)),
                ("facts.txt", print_facts(&db)),
                ("query.txt", format!("{q}\n")),
            ];
            Ok(emit(files, out_dir.as_deref(), summary, serde_json::Map::new())?)
        }
        Command::Reduce { out_dir } => {
            let (schema, sigma) = load_schema(inputs, loaded)?;
            let db = load_facts(inputs, loaded, &schema)?;
            let text = loaded.read("query", required(&inputs.query, "query")?)?;
            let parsed = parse_query(&text, &schema)?;
            let red = cook_reduce(&db, &sigma, &parsed.body, &parsed.head)?;
            let tuple: Vec<String> = red.tuple.iter().map(Constant::to_string).collect();
            let mut out = format!("# answer tuple: ({})\n# query: {}\n", tuple.join(", "), red.grounded);
            for (from, to) in &red.renamed {
                out.push_str(&format!("# renamed {from} to {to}\n"));
            }
            let mut result = serde_json::Map::new();
            result.insert("tuple".into(), json!(tuple));
            result.insert("query".into(), json!(red.grounded.to_string()));
            result.insert(
                "renamed".into(),
                Value::Object(red.renamed.iter().map(|(a, b)| (a.to_string(), Value::String(b.to_string()))).collect()),
            );
            if let Some(dir) = out_dir {
                let files = [("facts.txt", print_facts(&red.database)), ("query.txt", format!("{}\n", red.grounded))];
                return emit(files, Some(dir), out, result);
            }
            out.push_str(&print_facts(&red.database));
            Ok(Report {
                text: out,
                result: json!({
                    "facts": facts_json(&red.database),
                    "tuple": tuple,
                    "query": red.grounded.to_string(),
                    "renamed": red.renamed.iter().map(|(a, b)| (a.to_string(), Value::String(b.to_string()))).collect::<serde_json::Map<_, _>>(),
                }),
                exact: true,
            })
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn count_report(what: &str, n: &BigUint) -> Report {
    Report {
        text: format!("{what}: {n}\n"),
        result: json!({ "count": n.to_string() }),
        exact: true,
    }
}

/// Writes generated files to `dir`, or prints them one after another.
fn emit<const N: usize>(
    files: [(&str, String); N],
    dir: Option<&Path>,
    summary: String,
    mut result: serde_json::Map<String, Value>,
) -> Result<Report> {
    let mut text = summary;
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            for (name, content) in &files {
                let path = dir.join(name);
                fs::write(&path, content).with_context(|| format!("cannot write {}", path.display()))?;
                text.push_str(&format!("wrote {}\n", path.display()));
            }
        }
        None => {
            for (name, content) in &files {
                text.push_str(&format!("# --- {name}\n{content}"));
            }
        }
    }
    for (name, content) in files {
        result.insert(name.trim_end_matches(".txt").to_string(), Value::String(content));
    }
    Ok(Report {
        text,
        result: Value::Object(result),
        exact: true,
    })
}
