//! Subcommand implementations. Each returns the process exit code on
//! success paths that still need a non-zero code (GEE non-convergence,
//! failed acceptance runs).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use dyadnet::array::ArrayStructure;
use dyadnet::estimators::SeKind;
use dyadnet::exec::Execution;
use dyadnet::fit::{condition_number, fit};
use dyadnet::gee::{gee_fit, GeeConfig};
use dyadnet::relational::RelationalDataset;
use dyadnet::simulation::{gravity_panel_fixture, run_coverage, z_multiplier, SimReport};
use dyadnet::theory::{check_bias_dominance, check_consistency, check_dc_rank, check_limiting_variance, TheoremReport};

use crate::config::{parse_config, AcceptanceSpec, RunSpec};
use crate::ingest::{parse_csv, write_csv, Ingested};
use crate::report::{flatten, num, OutDir};
use crate::{exit, CliError, SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub input: PathBuf,
    pub se: SeKind,
    pub gee: bool,
    pub gee_max_iter: usize,
    pub directed: bool,
    pub structure: ArrayStructure,
    pub ci: f64,
    pub intercept: bool,
    pub out: PathBuf,
    pub format: OutputFormat,
}

fn with_intercept(ds: &RelationalDataset) -> Result<RelationalDataset, CliError> {
    let x = ds.x();
    let mut wide = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    wide.columns_mut(1, x.ncols()).copy_from(x);
    Ok(RelationalDataset::new(ds.layout(), ds.y().clone(), wide)?)
}

struct Estimate {
    beta: DVector<f64>,
    vcov: DMatrix<f64>,
    params: Value,
    diagnostics: Value,
    converged: bool,
}

fn estimate(ds: &RelationalDataset, opts: &FitOptions) -> Result<Estimate, CliError> {
    let condition = condition_number(ds.x());
    if opts.gee {
        let cfg = GeeConfig {
            se_kind: opts.se,
            max_iter: opts.gee_max_iter,
            ..GeeConfig::for_dataset(ds)
        };
        let r = gee_fit(ds, &cfg)?;
        if r.vcov.iter().any(|v| !v.is_finite()) {
            return Err(CliError::new(exit::NUMERIC, "non-finite GEE covariance"));
        }
        let params = serde_json::to_value(r.param_trajectory.last()).unwrap_or(Value::Null);
        Ok(Estimate {
            beta: r.beta_hat,
            vcov: r.vcov,
            params,
            diagnostics: json!({
                "design_condition": condition,
                "gee_iterations": r.iterations,
                "gee_converged": r.converged,
                "pd_shrink_events": r.shrink_events,
            }),
            converged: r.converged,
        })
    } else {
        let r = fit(ds, opts.se, opts.structure)?;
        Ok(Estimate {
            beta: r.beta_hat,
            vcov: r.vcov,
            params: serde_json::to_value(&r.params).unwrap_or(Value::Null),
            diagnostics: json!({ "design_condition": condition }),
            converged: true,
        })
    }
}

/// `dyadnet fit`: returns [`exit::GEE_NOT_CONVERGED`] when GEE stopped at
/// its iteration cap, after writing the outputs.
pub fn run_fit(opts: &FitOptions) -> Result<u8, CliError> {
    if !(opts.ci > 0.0 && opts.ci < 1.0) {
        return Err(CliError::new(exit::CONFIG, format!("--ci {} outside (0, 1)", opts.ci)));
    }
    let file = fs::File::open(&opts.input).map_err(|e| CliError::io(&format!("opening {}", opts.input.display()), e))?;
    let data = parse_csv(std::io::BufReader::new(file), opts.directed)?;
    let ds = if opts.intercept {
        with_intercept(&data.dataset)?
    } else {
        data.dataset.clone()
    };
    let mut terms: Vec<String> = Vec::new();
    if opts.intercept {
        terms.push("intercept".into());
    }
    terms.extend(data.covariate_names.iter().cloned());

    let est = estimate(&ds, opts)?;
    let z = z_multiplier(opts.ci);
    let se: Vec<f64> = est.vcov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    let coef_rows: Vec<Vec<String>> = terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let b = est.beta[k];
            vec![t.clone(), num(b), num(se[k]), num(b - z * se[k]), num(b + z * se[k])]
        })
        .collect();

    let mut out = OutDir::create(&opts.out)?;
    out.write_csv("coefficients.csv", &["term", "estimate", "se", "ci_lo", "ci_hi"], &coef_rows)?;

    let mut diagnostics = est.diagnostics;
    diagnostics["converged"] = json!(est.converged);
    let method = json!({
        "estimator": if opts.gee { "gee" } else { "ols" },
        "se": opts.se.name(),
        "array_structure": opts.structure,
        "ci_level": opts.ci,
        "intercept": opts.intercept,
    });
    let labels = json!({ "actors": data.actor_labels, "layers": data.layer_labels });
    let input = json!({
        "file": opts.input.file_name().map(|f| f.to_string_lossy().into_owned()),
        "directed": opts.directed,
        "actors": ds.n(),
        "layers": ds.layers(),
        "observations": ds.layout().len(),
        "covariates": terms.len(),
    });
    match opts.format {
        OutputFormat::Json => {
            let coefficients: Vec<Value> = terms
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    json!({
                        "term": t,
                        "estimate": est.beta[k],
                        "se": se[k],
                        "ci_lo": est.beta[k] - z * se[k],
                        "ci_hi": est.beta[k] + z * se[k],
                    })
                })
                .collect();
            let vcov: Vec<Vec<f64>> = (0..est.vcov.nrows())
                .map(|r| est.vcov.row(r).iter().copied().collect())
                .collect();
            out.write_json(
                "fit.json",
                &json!({
                    "schema": SCHEMA,
                    "command": "fit",
                    "input": input,
                    "method": method,
                    "labels": labels,
                    "coefficients": coefficients,
                    "vcov": vcov,
                    "params": est.params,
                    "diagnostics": diagnostics,
                }),
            )?;
        }
        OutputFormat::Csv => {
            let kv = |v: &Value| -> Vec<Vec<String>> { flatten(v).into_iter().map(|(k, v)| vec![k, v]).collect() };
            out.write_csv("params.csv", &["name", "value"], &kv(&est.params))?;
            let mut diag = kv(&json!({ "input": input, "method": method, "diagnostics": diagnostics }));
            diag.insert(0, vec!["schema".into(), SCHEMA.into()]);
            out.write_csv("diagnostics.csv", &["name", "value"], &diag)?;
            let mut label_rows: Vec<Vec<String>> = data
                .actor_labels
                .iter()
                .enumerate()
                .map(|(k, l)| vec!["actor".into(), k.to_string(), l.clone()])
                .collect();
            label_rows.extend(
                data.layer_labels
                    .iter()
                    .enumerate()
                    .map(|(k, l)| vec!["layer".into(), k.to_string(), l.clone()]),
            );
            out.write_csv("labels.csv", &["kind", "id", "label"], &label_rows)?;
        }
    }
    Ok(if est.converged { exit::OK } else { exit::GEE_NOT_CONVERGED })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    command: &'static str,
    kind: &'a str,
    /// Absent for runs without an acceptance section.
    passed: Option<bool>,
    report: &'a T,
}

fn coverage_rows(prefix: &[String], report: &SimReport) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut by_draw = Vec::new();
    let mut summary = Vec::new();
    for c in &report.cells {
        let mut head = prefix.to_vec();
        head.push(c.estimator.name().to_string());
        head.push(c.coefficient.to_string());
        for (d, cov) in c.coverage.iter().enumerate() {
            let mut row = head.clone();
            row.extend([d.to_string(), num(*cov), num(c.se_error[d]), num(c.se_sd[d])]);
            by_draw.push(row);
        }
        let mut row = head;
        row.extend([
            num(c.median_coverage),
            num(c.coverage_q10),
            num(c.coverage_q90),
            num(dyadnet::simulation::quantile(&c.coverage, 0.025)),
            num(dyadnet::simulation::quantile(&c.coverage, 0.975)),
        ]);
        summary.push(row);
    }
    (by_draw, summary)
}

const BY_DRAW_COLUMNS: [&str; 6] = ["estimator", "coefficient", "draw", "coverage", "se_error", "se_sd"];
const SUMMARY_COLUMNS: [&str; 7] = ["estimator", "coefficient", "median", "q10", "q90", "q025", "q975"];

fn coverage_passed(acceptance: Option<&AcceptanceSpec>, reports: &[SimReport]) -> Option<bool> {
    acceptance.map(|a| reports.iter().flat_map(|r| &r.cells).all(|c| a.coverage_ok(c.median_coverage)))
}

fn theorem_outputs(out: &mut OutDir, kind: &str, report: &TheoremReport, passed: Option<bool>) -> Result<(), CliError> {
    out.write_json(
        "report.json",
        &Envelope {
            schema: SCHEMA,
            command: "simulate",
            kind,
            passed,
            report,
        },
    )?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .flat_map(|row| row.metrics.iter().map(|(k, v)| vec![row.n.to_string(), k.clone(), num(*v)]))
        .collect();
    out.write_csv("metrics.csv", &["n", "metric", "value"], &rows)
}

/// `dyadnet simulate`: returns [`exit::ACCEPTANCE_FAILED`] when an
/// acceptance-tagged run fails its rule.
pub fn run_simulate(config: &Path, out: &Path, exec: Execution) -> Result<u8, CliError> {
    let text = fs::read_to_string(config).map_err(|e| CliError::io(&format!("reading {}", config.display()), e))?;
    let cfg = parse_config(&text)?;
    let acceptance = cfg.acceptance.as_ref();
    let mut dir = OutDir::create(out)?;
    let passed = match &cfg.run {
        RunSpec::Coverage(design) => {
            let report = run_coverage(design, exec)?;
            let passed = coverage_passed(acceptance, std::slice::from_ref(&report));
            let (by_draw, summary) = coverage_rows(&[], &report);
            dir.write_csv("coverage.csv", &BY_DRAW_COLUMNS, &by_draw)?;
            dir.write_csv("summary.csv", &SUMMARY_COLUMNS, &summary)?;
            dir.write_json(
                "report.json",
                &Envelope {
                    schema: SCHEMA,
                    command: "simulate",
                    kind: "coverage",
                    passed,
                    report: &report,
                },
            )?;
            passed
        }
        RunSpec::Preset(preset) => {
            let mut reports = Vec::new();
            let mut by_draw = Vec::new();
            let mut summary = Vec::new();
            for design in preset.designs() {
                let report = run_coverage(&design, exec)?;
                let model = serde_json::to_value(design.error_model)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                let (d, s) = coverage_rows(&[model, design.n.to_string()], &report);
                by_draw.extend(d);
                summary.extend(s);
                reports.push(report);
            }
            let passed = coverage_passed(acceptance, &reports);
            let prefixed = |cols: &[&'static str]| -> Vec<&'static str> {
                ["error_model", "n"].into_iter().chain(cols.iter().copied()).collect()
            };
            dir.write_csv("figure_coverage_by_draw.csv", &prefixed(&BY_DRAW_COLUMNS), &by_draw)?;
            dir.write_csv("figure_coverage_summary.csv", &prefixed(&SUMMARY_COLUMNS), &summary)?;
            dir.write_json(
                "report.json",
                &Envelope {
                    schema: SCHEMA,
                    command: "simulate",
                    kind: "preset",
                    passed,
                    report: &reports,
                },
            )?;
            passed
        }
        RunSpec::LimitingVariance(c) => {
            let r = check_limiting_variance(c, exec)?;
            let passed = acceptance.map(|_| r.passed);
            theorem_outputs(&mut dir, "limiting-variance", &r, passed)?;
            passed
        }
        RunSpec::Consistency(c) => {
            let check = dyadnet::theory::CheckConfig {
                n_grid: c.n_grid.clone(),
                reps: c.reps,
                bilinear: c.bilinear,
                seed: c.seed,
            };
            let r = check_consistency(&check, c.error_model, exec)?;
            let passed = acceptance.map(|_| r.passed);
            theorem_outputs(&mut dir, "consistency", &r, passed)?;
            passed
        }
        RunSpec::BiasDominance(c) => {
            let r = check_bias_dominance(c.n, c.reps, &c.bilinear, c.seed, exec)?;
            let passed = acceptance.map(|_| r.passed);
            theorem_outputs(&mut dir, "bias-dominance", &r, passed)?;
            passed
        }
        RunSpec::DcRank(c) => {
            let r = check_dc_rank(&c.n_grid, c.draws, c.seed)?;
            let passed = acceptance.map(|_| r.passed);
            theorem_outputs(&mut dir, "dc-rank", &r, passed)?;
            passed
        }
    };
    Ok(if passed == Some(false) {
        exit::ACCEPTANCE_FAILED
    } else {
        exit::OK
    })
}

/// `dyadnet fixture`: a synthetic gravity-style trade panel as long-format
/// CSV (without the intercept column) plus the true coefficients.
pub fn run_fixture(n: usize, layers: usize, seed: u64, out: &Path) -> Result<u8, CliError> {
    let fx = gravity_panel_fixture(n, layers, seed)?;
    let x = fx.dataset.x();
    let without_intercept = RelationalDataset::new(
        fx.dataset.layout(),
        fx.dataset.y().clone(),
        x.columns(1, x.ncols() - 1).into_owned(),
    )?;
    let data = Ingested {
        dataset: without_intercept,
        actor_labels: fx.actor_labels,
        layer_labels: fx.layer_labels,
        covariate_names: fx.covariate_names[1..].to_vec(),
    };
    let mut bytes = Vec::new();
    write_csv(&data, &mut bytes).map_err(|e| CliError::io("formatting CSV", e))?;
    let mut dir = OutDir::create(out)?;
    dir.write("gravity.csv", &bytes)?;
    dir.write_json(
        "fixture.json",
        &json!({
            "schema": SCHEMA,
            "command": "fixture",
            "actors": n,
            "layers": layers,
            "seed": seed,
            "terms": fx.covariate_names,
            "beta_true": fx.beta_true,
        }),
    )?;
    Ok(exit::OK)
}
