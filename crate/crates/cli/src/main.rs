//! Command-line entry point for the QPL toolchain.
//!
//! Exit codes are the contract: 0 success, 1 operational failure (with a
//! structured JSON message on stderr), 2 usage error. Payloads go to
//! stdout, diagnostics to stderr.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qpl_core::compile::{
    compile_to_cte, execute, execution_match, DatabaseBackend, Dialect, ResultSet, SqliteBackend,
};
use qpl_core::encode::{
    align_qd_qpl, build_qd_prompt, encode_rich, encode_simple, generate_qd, split_qd_steps,
    EndpointConfig,
};
use qpl_core::harness::{
    dir_backend_factory, evaluate, load_dataset, load_predictions, report_render, ReportFormat,
};
use qpl_core::interp::{eval_plan, Database};
use qpl_core::parser::parse;
use qpl_core::validator::{has_errors, validate, Severity};
use qpl_core::{QplPlan, SchemaCatalog};

#[derive(Parser)]
#[command(
    name = "qpl",
    version,
    about = "Parse, validate, interpret, compile, and evaluate QPL plans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a QPL file and dump its AST.
    Parse { file: PathBuf },
    /// Validate a QPL file against a schema; prints JSON-line diagnostics.
    Check {
        file: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Compile a QPL file to CTE SQL.
    Compile {
        file: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value = "ansi")]
        dialect: String,
    },
    /// Compile and execute on the embedded backend; prints rows as CSV.
    Run {
        file: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Evaluate with the reference interpreter; prints rows as CSV.
    Interp {
        file: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Execution-match a gold SQL query against a QPL plan.
    Compare {
        #[arg(long)]
        gold_sql: PathBuf,
        #[arg(long)]
        qpl: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Serialize a schema for model input.
    EncodeSchema {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_parser = ["simple", "rich"])]
        style: String,
        #[arg(long, default_value = "")]
        question: String,
    },
    /// Assemble the question-decomposition prompt; optionally send it.
    QdPrompt {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        question: String,
        #[arg(long)]
        qpl: PathBuf,
        /// Send the prompt to the configured chat endpoint and print the
        /// decomposition steps instead of the prompt.
        #[arg(long)]
        send: bool,
        /// Key/value config file with endpoint settings (url, model,
        /// api_key_env, timeout_secs); flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        url: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        api_key_env: Option<String>,
        #[arg(long)]
        timeout_secs: Option<u64>,
    },
    /// Score QPL-QD alignment; prints the report as JSON.
    Align {
        #[arg(long)]
        qd: PathBuf,
        #[arg(long)]
        qpl: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Batch execution-accuracy evaluation over a dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        db_root: PathBuf,
        #[arg(long, default_value = "md", value_parser = ["md", "markdown", "json", "text"])]
        format: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

struct Failure {
    error: String,
    detail: Option<String>,
}

impl Failure {
    fn new(error: impl Into<String>) -> Self {
        Failure {
            error: error.into(),
            detail: None,
        }
    }

    fn with_detail(error: impl Into<String>, detail: impl Into<String>) -> Self {
        Failure {
            error: error.into(),
            detail: Some(detail.into()),
        }
    }
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe (`qpl parse ... | head`) instead of
    // panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(failure) => {
            let mut message = serde_json::json!({ "error": failure.error });
            if let Some(detail) = failure.detail {
                message["detail"] = serde_json::json!(detail);
            }
            eprintln!("{message}");
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::with_detail(format!("cannot read {}", path.display()), e.to_string()))
}

fn load_plan(path: &Path) -> Result<QplPlan, Failure> {
    let text = read(path)?;
    parse(&text).map_err(|e| Failure::with_detail("syntax error", e.to_string()))
}

fn load_schema(path: &Path) -> Result<SchemaCatalog, Failure> {
    SchemaCatalog::from_json_file(path)
        .map_err(|e| Failure::with_detail("schema error", e.to_string()))
}

fn result_csv(rs: &ResultSet) -> String {
    let escape = |s: &str| {
        if s.contains(',') || s.contains('"') || s.contains('\n') {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    let mut out = rs
        .columns
        .iter()
        .map(|c| escape(c))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in &rs.rows {
        let line = row
            .iter()
            .map(|v| escape(&v.to_string()))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Parse { file } => {
            let plan = load_plan(&file)?;
            println!("{plan:#?}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { file, schema } => {
            let plan = load_plan(&file)?;
            let schema = load_schema(&schema)?;
            let diagnostics = validate(&plan, &schema);
            for d in &diagnostics {
                println!("{}", d.to_json());
            }
            if has_errors(&diagnostics) {
                Ok(ExitCode::from(1))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Compile {
            file,
            schema,
            dialect,
        } => {
            let plan = load_plan(&file)?;
            let schema = load_schema(&schema)?;
            let dialect = Dialect::by_name(&dialect)
                .ok_or_else(|| Failure::new(format!("unknown dialect `{dialect}`")))?;
            let diagnostics = validate(&plan, &schema);
            if has_errors(&diagnostics) {
                let detail = diagnostics
                    .iter()
                    .filter(|d| d.severity() == Severity::Error)
                    .map(|d| d.to_json())
                    .collect::<Vec<_>>()
                    .join("\n");
                return Err(Failure::with_detail("plan does not validate", detail));
            }
            let program = compile_to_cte(&plan, &schema, &dialect)
                .map_err(|e| Failure::with_detail("compile error", e.to_string()))?;
            println!("{}", program.to_sql());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { file, db } => {
            let plan = load_plan(&file)?;
            let database = Database::load_dir(&db)
                .map_err(|e| Failure::with_detail("database error", e.to_string()))?;
            let mut backend = SqliteBackend::with_database(&database)
                .map_err(|e| Failure::with_detail("backend error", e.to_string()))?;
            let program = compile_to_cte(&plan, &database.schema, &backend.dialect())
                .map_err(|e| Failure::with_detail("compile error", e.to_string()))?;
            let rs = execute(&program, &mut backend)
                .map_err(|e| Failure::with_detail("backend error", e.to_string()))?;
            print!("{}", result_csv(&rs));
            Ok(ExitCode::SUCCESS)
        }
        Command::Interp { file, db } => {
            let plan = load_plan(&file)?;
            let database = Database::load_dir(&db)
                .map_err(|e| Failure::with_detail("database error", e.to_string()))?;
            let rel = eval_plan(&plan, &database)
                .map_err(|e| Failure::with_detail("evaluation error", e.to_string()))?;
            print!("{}", rel.to_csv());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { gold_sql, qpl, db } => {
            let sql = read(&gold_sql)?;
            let plan = load_plan(&qpl)?;
            let database = Database::load_dir(&db)
                .map_err(|e| Failure::with_detail("database error", e.to_string()))?;
            let mut backend = SqliteBackend::with_database(&database)
                .map_err(|e| Failure::with_detail("backend error", e.to_string()))?;
            let outcome = execution_match(sql.trim(), &plan, &mut backend, &database.schema);
            let verdict = if outcome.matched { "match" } else { "no-match" };
            let mut line = serde_json::json!({
                "result": verdict,
                "empty_gold": outcome.empty_gold,
            });
            if let Some(failure) = &outcome.failure {
                line["cause"] = serde_json::json!(format!("{failure:?}"));
            }
            println!("{line}");
            Ok(if outcome.matched {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::EncodeSchema {
            schema,
            style,
            question,
        } => {
            let schema = load_schema(&schema)?;
            let encoded = match style.as_str() {
                "simple" => encode_simple(&schema),
                _ => encode_rich(&schema, &question),
            };
            println!("{}", encoded.text);
            Ok(ExitCode::SUCCESS)
        }
        Command::QdPrompt {
            schema,
            question,
            qpl,
            send,
            config,
            url,
            model,
            api_key_env,
            timeout_secs,
        } => {
            let schema = load_schema(&schema)?;
            let plan = load_plan(&qpl)?;
            let prompt = build_qd_prompt(&encode_simple(&schema), &question, &plan);
            if !send {
                print!("{prompt}");
                return Ok(ExitCode::SUCCESS);
            }
            let endpoint =
                endpoint_config(config.as_deref(), url, model, api_key_env, timeout_secs)?;
            let response = generate_qd(&prompt, &endpoint)
                .map_err(|e| Failure::with_detail("qd generation failed", e.to_string()))?;
            for step in &response.steps {
                println!("{step}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Align { qd, qpl, schema } => {
            let qd_steps = split_qd_steps(&read(&qd)?);
            let plan = load_plan(&qpl)?;
            let schema = load_schema(&schema)?;
            let report = align_qd_qpl(&qd_steps, &plan, &schema);
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            dataset,
            predictions,
            db_root,
            format,
            jobs,
        } => {
            let load = load_dataset(&dataset)
                .map_err(|e| Failure::with_detail("cannot read dataset", e.to_string()))?;
            for error in &load.errors {
                eprintln!(
                    "{}",
                    serde_json::json!({ "error": "bad dataset record", "detail": error.to_string() })
                );
            }
            let (predictions, pred_errors) = load_predictions(&predictions)
                .map_err(|e| Failure::with_detail("cannot read predictions", e.to_string()))?;
            for error in &pred_errors {
                eprintln!(
                    "{}",
                    serde_json::json!({ "error": "bad prediction record", "detail": error.to_string() })
                );
            }
            let format = ReportFormat::by_name(&format)
                .ok_or_else(|| Failure::new(format!("unknown format `{format}`")))?;
            let factory = dir_backend_factory(db_root);
            let report = evaluate(&load.records, &predictions, &factory, jobs);
            println!("{}", report_render(&report, format));
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Endpoint settings: defaults, then the config file, then flags.
fn endpoint_config(
    config: Option<&Path>,
    url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    timeout_secs: Option<u64>,
) -> Result<EndpointConfig, Failure> {
    let mut endpoint = EndpointConfig::default();
    if let Some(path) = config {
        let text = read(path)?;
        let value: toml::Value = text
            .parse()
            .map_err(|e: toml::de::Error| Failure::with_detail("bad config", e.to_string()))?;
        let table: HashMap<String, toml::Value> = value
            .as_table()
            .map(|t| t.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
            .unwrap_or_default();
        if let Some(v) = table.get("url").and_then(|v| v.as_str()) {
            endpoint.url = v.to_string();
        }
        if let Some(v) = table.get("model").and_then(|v| v.as_str()) {
            endpoint.model = v.to_string();
        }
        if let Some(v) = table.get("api_key_env").and_then(|v| v.as_str()) {
            endpoint.api_key_env = v.to_string();
        }
        if let Some(v) = table.get("timeout_secs").and_then(|v| v.as_integer()) {
            endpoint.timeout_secs = v as u64;
        }
    }
    if let Some(v) = url {
        endpoint.url = v;
    }
    if let Some(v) = model {
        endpoint.model = v;
    }
    if let Some(v) = api_key_env {
        endpoint.api_key_env = v;
    }
    if let Some(v) = timeout_secs {
        endpoint.timeout_secs = v;
    }
    Ok(endpoint)
}
