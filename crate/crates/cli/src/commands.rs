use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use hitwalk::hitting::{Diagnostics, HittingResult, Method, MhtProblem};
use hitwalk::optimizer::minimize_mht;
use hitwalk::par::map_indexed;
use hitwalk::reference::RationalMht;
use hitwalk::spread::{evolve_distribution, SpreadConfig};
use hitwalk::trajectories::{run_trajectories, TrajectoryConfig};
use hitwalk::{ChainGeometry, Execution};
use serde_json::{json, Map, Value};

use crate::cli::{Format, GeometryArgs, MethodArg, MhtArgs, MsdArgs, OptimizeArgs, ReferenceArgs};
use crate::record::{diagnostic_text, fmt_f64, open_output, resolve_output, write_csv, write_json, ResultRecord};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Io(io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical error: {m}"),
            Failure::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl From<hitwalk::Error> for Failure {
    fn from(e: hitwalk::Error) -> Self {
        let text = format!("{}: {e}", e.name());
        if e.is_usage() {
            Failure::Usage(text)
        } else {
            Failure::Numerical(text)
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<(), Failure>;

fn geometry(args: &GeometryArgs) -> Result<ChainGeometry, Failure> {
    let [left, right] = args.targets[..] else {
        return Err(Failure::Usage("--targets takes exactly two positions".into()));
    };
    let g = ChainGeometry::new(args.start, left, right)?;
    args.coin.spec.amplitudes()?;
    Ok(g)
}

fn geometry_echo(args: &GeometryArgs) -> Value {
    json!({ "targets": args.targets, "start": args.start, "coin": args.coin.text })
}

fn check_range(name: &str, values: &[f64], upper_inclusive: bool) -> Outcome {
    for &v in values {
        let ok = v >= 0.0 && if upper_inclusive { v <= 1.0 } else { v < 1.0 };
        if !ok {
            let bound = if upper_inclusive { "[0, 1]" } else { "[0, 1)" };
            return Err(Failure::Usage(format!("{name} = {v} outside {bound}")));
        }
    }
    Ok(())
}

fn diagnostics_map(d: &Diagnostics) -> Map<String, Value> {
    match serde_json::to_value(d).expect("diagnostics serialize") {
        Value::Object(m) => m,
        _ => unreachable!("struct serializes to an object"),
    }
}

fn monte_carlo(problem: &MhtArgs, g: &ChainGeometry, p: f64, q: f64) -> hitwalk::Result<HittingResult> {
    let cfg = TrajectoryConfig::new(problem.trajectories, problem.seed, problem.max_steps, p, q)?;
    let est = run_trajectories(&cfg, g, &problem.geometry.coin.spec)?;
    Ok(HittingResult {
        mht: est.mean,
        method: Method::MonteCarlo,
        diagnostics: Diagnostics {
            standard_error: Some(est.standard_error),
            censored_fraction: Some(est.censored_fraction()),
            ..Diagnostics::default()
        },
    })
}

pub fn mht(args: &MhtArgs) -> Outcome {
    let g = geometry(&args.geometry)?;
    let ps = match (&args.p_grid, args.reset_p) {
        (Some(grid), _) => grid.points(),
        (None, Some(p)) => vec![p],
        (None, None) => vec![0.0],
    };
    let qs = match &args.q_grid {
        Some(grid) => grid.points(),
        None => vec![args.noise_q],
    };
    check_range("reset probability", &ps, false)?;
    check_range("noise probability", &qs, true)?;
    if args.trajectories == 0 || args.max_steps == 0 {
        return Err(Failure::Usage("--trajectories and --max-steps must be positive".into()));
    }
    if !(args.tail_epsilon > 0.0) {
        return Err(Failure::Usage("--tail-epsilon must be positive".into()));
    }
    let methods: &[Method] = match args.method {
        MethodArg::Resolvent => &[Method::Resolvent],
        MethodArg::Series => &[Method::Series],
        MethodArg::Mc => &[Method::MonteCarlo],
        MethodArg::All => &[Method::Resolvent, Method::Series, Method::MonteCarlo],
    };

    let points: Vec<(f64, f64)> = ps.iter().flat_map(|&p| qs.iter().map(move |&q| (p, q))).collect();
    let results = map_indexed(Execution::default(), points.len(), |k| {
        let (p, q) = points[k];
        let problem = MhtProblem::new(&g, &args.geometry.coin.spec, p, q);
        methods
            .iter()
            .map(|m| {
                let problem = problem.as_ref().map_err(Clone::clone)?;
                match m {
                    Method::Resolvent => problem.resolvent(),
                    Method::Series => problem.series_capped(args.tail_epsilon, args.max_steps),
                    Method::MonteCarlo => monte_carlo(args, &g, p, q),
                }
            })
            .collect::<Vec<_>>()
    });

    let mut records = Vec::new();
    let mut failures = 0;
    for (&(p, q), per_method) in points.iter().zip(results) {
        for (method, result) in methods.iter().zip(per_method) {
            let mut input = geometry_echo(&args.geometry);
            let obj = input.as_object_mut().expect("object");
            obj.insert("p".into(), json!(p));
            obj.insert("q".into(), json!(q));
            if *method == Method::MonteCarlo {
                obj.insert("seed".into(), json!(args.seed));
                obj.insert("trajectories".into(), json!(args.trajectories));
            }
            if *method != Method::Resolvent {
                obj.insert("max_steps".into(), json!(args.max_steps));
            }
            if *method == Method::Series {
                obj.insert("tail_epsilon".into(), json!(args.tail_epsilon));
            }
            let (values, diagnostics) = match result {
                Ok(r) => (json!({ "mht": r.mht }), diagnostics_map(&r.diagnostics)),
                Err(e) => {
                    failures += 1;
                    eprintln!("p={p} q={q} {}: {}: {e}", method.as_str(), e.name());
                    let mut d = Map::new();
                    d.insert("error".into(), json!(e.name()));
                    d.insert("message".into(), json!(e.to_string()));
                    (Value::Null, d)
                }
            };
            records.push(
                ResultRecord::new("mht", input, method.as_str(), values, diagnostics).stamped(args.output.timestamp),
            );
        }
    }

    let path = resolve_output(
        args.output.out.as_deref(),
        &format!("mht.{}", args.output.format.extension()),
    );
    let mut out = open_output(path.as_deref())?;
    match args.output.format {
        Format::Json => write_json(&mut out, &records)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.input["p"].as_f64().expect("p")),
                        fmt_f64(r.input["q"].as_f64().expect("q")),
                        r.method.clone(),
                        r.values
                            .get("mht")
                            .and_then(Value::as_f64)
                            .map(fmt_f64)
                            .unwrap_or_default(),
                        diagnostic_text(&r.diagnostics),
                    ]
                })
                .collect();
            write_csv(&mut out, &["p", "q", "method", "mht", "diagnostic"], &rows)?;
        }
    }
    if failures > 0 {
        return Err(Failure::Numerical(format!(
            "{failures} of {} evaluations failed",
            records.len()
        )));
    }
    Ok(())
}

/// `results.csv` → `results.distributions.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn msd(args: &MsdArgs) -> Outcome {
    args.coin.spec.amplitudes()?;
    let mut config = SpreadConfig::new(args.model.into(), args.steps, args.sigma, args.coin.spec)
        .with_snapshots(args.distributions_at.clone());
    if let Some(h) = args.halfwidth {
        config.lattice_halfwidth = h;
    }
    let result = evolve_distribution(&config)?;
    let input = json!({
        "model": config.model,
        "sigma": args.sigma,
        "steps": args.steps,
        "coin": args.coin.text,
        "halfwidth": config.lattice_halfwidth,
        "distributions_at": args.distributions_at,
    });
    let summary = json!({
        "fitted_exponent": result.fitted_exponent,
        "fit_window": [result.fit_window.0, result.fit_window.1],
        "final_msd": result.msd_series.last(),
    });

    let path = resolve_output(
        args.output.out.as_deref(),
        &format!("msd.{}", args.output.format.extension()),
    );
    match args.output.format {
        Format::Json => {
            let mut values = summary;
            values["msd"] = json!(result.msd_series);
            values["distributions"] = json!(result.distributions);
            let record =
                ResultRecord::new("msd", input, "evolution", values, Map::new()).stamped(args.output.timestamp);
            write_json(&mut open_output(path.as_deref())?, &record)?;
        }
        Format::Csv => {
            if !result.distributions.is_empty() && path.is_none() {
                return Err(Failure::Usage(
                    "--distributions-at with CSV output needs --out or HITWALK_OUT_DIR".into(),
                ));
            }
            let rows: Vec<Vec<String>> = result
                .msd_series
                .iter()
                .enumerate()
                .map(|(t, m)| vec![t.to_string(), fmt_f64(*m)])
                .collect();
            write_csv(&mut open_output(path.as_deref())?, &["t", "msd"], &rows)?;
            if let Some(path) = path.as_deref().filter(|_| !result.distributions.is_empty()) {
                let rows: Vec<Vec<String>> = result
                    .distributions
                    .iter()
                    .flat_map(|s| {
                        s.positions()
                            .zip(&s.probabilities)
                            .map(move |(x, pr)| vec![s.t.to_string(), x.to_string(), fmt_f64(*pr)])
                    })
                    .collect();
                write_csv(
                    &mut open_output(Some(&sibling(path, "distributions.csv")))?,
                    &["t", "x", "probability"],
                    &rows,
                )?;
            }
            // Footer record: fit summary on stderr, keeping the CSV a plain table.
            let footer = ResultRecord::new("msd", input, "evolution", summary, Map::new());
            eprintln!("{}", serde_json::to_string(&footer).expect("record serializes"));
        }
    }
    Ok(())
}

pub fn optimize(args: &OptimizeArgs) -> Outcome {
    let g = geometry(&args.geometry)?;
    check_range("noise probability", &[args.noise_q], true)?;
    let report = minimize_mht(
        &g,
        &args.geometry.coin.spec,
        args.noise_q,
        args.grid_resolution,
        Execution::default(),
    )?;
    let mut input = geometry_echo(&args.geometry);
    input["q"] = json!(args.noise_q);
    input["grid_resolution"] = json!(args.grid_resolution);
    let diagnostics = match json!({ "evaluations": report.evaluations }) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    let record = ResultRecord::new("optimize", input, "resolvent", json!(report), diagnostics).stamped(args.timestamp);
    let path = resolve_output(args.out.as_deref(), "optimize.json");
    write_json(&mut open_output(path.as_deref())?, &record)?;
    Ok(())
}

pub fn reference(args: &ReferenceArgs) -> Outcome {
    if !args.emit_coefficients && args.at.is_empty() {
        return Err(Failure::Usage("reference needs --emit-coefficients and/or --at".into()));
    }
    let rational = RationalMht::appendix();
    let mut values = Map::new();
    if args.emit_coefficients {
        values.insert("numerator_coeffs".into(), json!(rational.numerator_coeffs));
        values.insert("denominator_coeffs".into(), json!(rational.denominator_coeffs));
    }
    if !args.at.is_empty() {
        let evaluations = args
            .at
            .iter()
            .map(|&p| rational.evaluate(p).map(|v| json!({ "p": p, "mht": v })))
            .collect::<hitwalk::Result<Vec<_>>>()?;
        values.insert("evaluations".into(), Value::Array(evaluations));
    }
    let input = json!({ "targets": [-5, 5], "start": 0, "coin": "plus", "at": args.at });
    let record =
        ResultRecord::new("reference", input, "rational", Value::Object(values), Map::new()).stamped(args.timestamp);
    let path = resolve_output(args.out.as_deref(), "reference.json");
    write_json(&mut open_output(path.as_deref())?, &record)?;
    Ok(())
}
