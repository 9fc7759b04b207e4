use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use ehresmann::expr::parse;
use ehresmann::geometry::{frame_coefficients, At, DEFAULT_SAMPLES, DEFAULT_SEED};
use ehresmann::jets::DEFAULT_DEPTH;
use ehresmann::report::{Format, RunConfig, DEFAULT_TOL};
use ehresmann::scenarios::{resolve, Op, Scenario, Settings, BUILTINS};

/// Points on embedded spaces are accepted within this constraint residual.
const POINT_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "ehresmann",
    version,
    about = "Covariant derivatives from Ehresmann connection data, checked numerically"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios.
    List {
        #[arg(long, default_value = "table", value_parser = parse_format)]
        format: Format,
    },
    /// Show a scenario's space, frame, split and expected results.
    Describe {
        scenario: String,
        #[arg(long, default_value = "table", value_parser = parse_format)]
        format: Format,
    },
    /// Evaluate nabla, bracket, torsion or curvature of two named fields at a point.
    Eval {
        scenario: String,
        op: String,
        x: String,
        y: String,
        /// Comma-separated coordinates; each entry may be an expression such as pi/2.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long, default_value = "table", value_parser = parse_format)]
        format: Format,
    },
    /// Run every check on a built-in scenario or a scenario file.
    Verify {
        scenario: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[arg(long, default_value = "table", value_parser = parse_format)]
        format: Format,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((text, code)) => {
            print!("{text}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(String, u8), String> {
    match command {
        Command::List { format } => Ok((list(format), 0)),
        Command::Describe { scenario, format } => {
            let s = resolve(&scenario, Settings::default()).map_err(|e| e.to_string())?;
            Ok((describe(&s, format), 0))
        }
        Command::Eval {
            scenario,
            op,
            x,
            y,
            at,
            format,
        } => {
            let s = resolve(&scenario, Settings::default()).map_err(|e| e.to_string())?;
            let op: Op = op.parse()?;
            Ok((eval(&s, op, &x, &y, &at, format)?, 0))
        }
        Command::Verify {
            scenario,
            seed,
            samples,
            tol,
            depth,
            format,
        } => {
            let config = RunConfig {
                scenario,
                seed,
                samples,
                tol,
                depth,
                format,
            };
            let report = ehresmann::verify::run(&config).map_err(|e| e.to_string())?;
            let code = if report.all_passed() { 0 } else { 1 };
            Ok((report.render(format), code))
        }
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn list(format: Format) -> String {
    match format {
        Format::Json => {
            let rows: Vec<Value> = BUILTINS
                .iter()
                .map(|b| json!({"name": b.name, "section": b.reference, "dim": b.dim}))
                .collect();
            format!(
                "{}\n",
                serde_json::to_string_pretty(&rows).expect("serializes")
            )
        }
        Format::Csv => {
            let mut s = String::from("name,section,dim,description\n");
            for b in BUILTINS {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    b.name,
                    csv_cell(b.reference),
                    b.dim,
                    csv_cell(b.description)
                );
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for b in BUILTINS {
                let _ = writeln!(
                    s,
                    "{:<18} dim {}  {}  [{}]",
                    b.name, b.dim, b.description, b.reference
                );
            }
            s
        }
    }
}

fn describe(s: &Scenario, format: Format) -> String {
    let split = s.split();
    let blocks: Vec<Vec<String>> = split
        .blocks()
        .iter()
        .map(|f| f.fields().iter().map(|v| v.name().to_string()).collect())
        .collect();
    let expected: Vec<Value> = s
        .expected()
        .iter()
        .map(|r| {
            json!({
                "op": r.op.name(),
                "args": r.args,
                "components": r.components.iter().map(|(f, c)| (f.clone(), Value::String(c.name().to_string()))).collect::<serde_json::Map<_, _>>(),
                "family": r.family,
                "reference": r.reference,
            })
        })
        .collect();
    let doc = json!({
        "name": s.name(),
        "description": s.description(),
        "reference": s.reference(),
        "family": s.family().label(),
        "coords": s.space().coords(),
        "dim": s.space().dim(),
        "fields": s.fields().keys().collect::<Vec<_>>(),
        "frame": s.frame_names(),
        "orientation": format!("{:?}", split.orientation()),
        "K": split.k().fields().iter().map(|v| v.name()).collect::<Vec<_>>(),
        "blocks": blocks,
        "metric": s.metric().is_some(),
        "expected": expected,
        "notes": s.notes(),
    });
    match format {
        Format::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&doc).expect("serializes")
        ),
        Format::Csv => {
            let mut out = String::from("op,x,y,family,components\n");
            for r in s.expected() {
                let comps = r
                    .components
                    .iter()
                    .map(|(f, c)| format!("{f}:{}", c.name()))
                    .collect::<Vec<_>>()
                    .join(";");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.op.name(),
                    csv_cell(&r.args[0]),
                    csv_cell(&r.args[1]),
                    csv_cell(&r.family),
                    csv_cell(&comps)
                );
            }
            out
        }
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "{}: {}", s.name(), s.description());
            let _ = writeln!(out, "reference: {}", s.reference());
            let _ = writeln!(
                out,
                "coordinates: {} (dimension {})",
                s.space().coords().join(", "),
                s.space().dim()
            );
            let _ = writeln!(out, "frame: {}", s.frame_names().join(", "));
            let _ = writeln!(
                out,
                "split: {:?}, K = [{}], blocks = {:?}",
                split.orientation(),
                split
                    .k()
                    .fields()
                    .iter()
                    .map(|v| v.name())
                    .collect::<Vec<_>>()
                    .join(", "),
                blocks
            );
            if s.metric().is_some() {
                let _ = writeln!(out, "metric: yes");
            }
            let _ = writeln!(out, "expected results: {}", s.expected().len());
            for r in s.expected() {
                let rhs = if r.components.is_empty() {
                    "0".to_string()
                } else {
                    r.components
                        .iter()
                        .map(|(f, c)| format!("({}) {f}", c.name()))
                        .collect::<Vec<_>>()
                        .join(" + ")
                };
                let _ = writeln!(
                    out,
                    "  {}({}, {}) = {rhs}",
                    r.op.name(),
                    r.args[0],
                    r.args[1]
                );
            }
            for n in s.notes() {
                let _ = writeln!(out, "note: {n}");
            }
            out
        }
    }
}

fn parse_point(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            let e = parse(t.trim()).map_err(|e| format!("--at entry `{}`: {e}", t.trim()))?;
            e.eval_with(&|name: &str| (name == "pi").then_some(std::f64::consts::PI))
                .map_err(|e| format!("--at entry `{}`: {e}", t.trim()))
        })
        .collect()
}

fn eval(
    s: &Scenario,
    op: Op,
    x: &str,
    y: &str,
    at: &str,
    format: Format,
) -> Result<String, String> {
    let raw = parse_point(at)?;
    let point = s
        .space()
        .accept_point(&raw, POINT_TOL)
        .map_err(|e| e.to_string())?;
    let field = s.apply(op, x, y).map_err(|e| e.to_string())?;
    let at = At::new(&point, s.settings().depth);
    let coords = field.value(&at).map_err(|e| e.to_string())?;
    let frame = frame_coefficients(s.split().basis(), &at, &coords).map_err(|e| e.to_string())?;
    let names = s.frame_names();
    let label = format!("{}({}, {})", op.name(), x, y);
    Ok(match format {
        Format::Json => {
            let doc = json!({
                "scenario": s.name(),
                "op": op.name(),
                "args": [x, y],
                "point": point,
                "frame": names.iter().zip(&frame).map(|(n, c)| (n.clone(), json!(c))).collect::<serde_json::Map<_, _>>(),
                "coordinates": s.space().coords().iter().zip(&coords).map(|(n, c)| (n.clone(), json!(c))).collect::<serde_json::Map<_, _>>(),
            });
            format!(
                "{}\n",
                serde_json::to_string_pretty(&doc).expect("serializes")
            )
        }
        Format::Csv => {
            let mut out = String::from("kind,name,value\n");
            for (n, c) in names.iter().zip(&frame) {
                let _ = writeln!(out, "frame,{n},{c:e}");
            }
            for (n, c) in s.space().coords().iter().zip(&coords) {
                let _ = writeln!(out, "coordinate,{n},{c:e}");
            }
            out
        }
        Format::Table => {
            let mut out = format!("{label} at ({})\n", fmt_list(&point));
            let _ = writeln!(out, "frame components:");
            for (n, c) in names.iter().zip(&frame) {
                let _ = writeln!(out, "  {n:<8} {}", fmt_num(*c));
            }
            let _ = writeln!(out, "coordinate components:");
            for (n, c) in s.space().coords().iter().zip(&coords) {
                let _ = writeln!(out, "  {n:<8} {}", fmt_num(*c));
            }
            out
        }
    })
}

fn fmt_num(c: f64) -> String {
    // clear printing noise like -0 and 1e-17
    let c = if c.abs() < 1e-14 { 0.0 } else { c };
    format!("{c:.12}")
}

fn fmt_list(p: &[f64]) -> String {
    p.iter()
        .map(|x| format!("{x:.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}
