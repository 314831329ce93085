//! Subcommand bodies.

use std::path::PathBuf;

use serde::Serialize;

use crate::calibration::{calibrate_analytic, calibrate_monte_carlo, CalibrationMethod, CalibrationResult};
use crate::engine::McSettings;
use crate::error::{Error, Result};
use crate::simulation::{
    default_oracle_cases, recipe, run_oracle_case, run_sweep, Curve, OracleCase, SweepSpec, RECIPES,
    RESIDUAL_WARNING,
};
use crate::theory::{are_decentralized, are_synchronous, format_rational, AreFamily};

use super::config::{AreRequest, AreSection, ConfigList, ModelKind, RunConfig};
use super::output::{number, optional, OutDir, Stamp};
use super::{Cli, Command, DEFAULT_OUT_DIR};

/// Files written by a command and whether a checked comparison failed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub acceptance_failed: bool,
}

/// Everything that determines a command's output, hashed into every file.
#[derive(Serialize)]
struct Inputs<'a> {
    command: &'static str,
    recipe: Option<&'a str>,
    allow_partial: bool,
    config: RunConfig,
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Calibrate => "calibrate",
        Command::Sweep => "sweep",
        Command::Are => "are",
        Command::Oracle => "oracle",
        Command::ListRecipes => "list-recipes",
    }
}

fn stamp(cli: &Cli, config: &RunConfig, seed: u64) -> Result<Stamp> {
    let mut resolved = config.clone();
    resolved.experiment.seed = Some(seed);
    resolved.output = None;
    Stamp::new(
        seed,
        &Inputs {
            command: command_name(cli.command),
            recipe: cli.recipe.as_deref(),
            allow_partial: cli.allow_partial,
            config: resolved,
        },
    )
}

fn out_dir(cli: &Cli, config: &RunConfig) -> Result<OutDir> {
    let dir = cli
        .out
        .clone()
        .or_else(|| config.output.as_ref().and_then(|o| o.dir.as_ref()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    OutDir::create(&dir)
}

fn file_label(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn reject_recipe(cli: &Cli) -> Result<()> {
    match &cli.recipe {
        Some(_) => Err(Error::config(format!(
            "--recipe does not apply to `{}`",
            command_name(cli.command)
        ))),
        None => Ok(()),
    }
}

pub(super) fn dispatch(cli: &Cli, config: RunConfig) -> Result<Outcome> {
    match cli.command {
        Command::ListRecipes => {
            for (name, description) in RECIPES {
                println!("{name:<14} {description}");
            }
            Ok(Outcome::default())
        }
        Command::Calibrate => {
            reject_recipe(cli)?;
            calibrate(cli, &config)
        }
        Command::Sweep => sweep(cli, &config),
        Command::Are => are(cli, &config),
        Command::Oracle => {
            reject_recipe(cli)?;
            oracle(cli, &config)
        }
    }
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CalibrationRow {
    procedure: &'static str,
    #[serde(flatten)]
    result: CalibrationResult,
}

#[derive(Serialize)]
struct CalibrationFile<'a> {
    version: &'a str,
    seed: u64,
    config_hash: &'a str,
    experiment: &'a str,
    method: CalibrationMethod,
    alpha: f64,
    beta: f64,
    replications: usize,
    k: usize,
    l: usize,
    u: usize,
    results: Vec<CalibrationRow>,
}

fn calibrate(cli: &Cli, config: &RunConfig) -> Result<Outcome> {
    let section = config
        .models
        .as_ref()
        .ok_or_else(|| Error::config("missing [models] section"))?;
    let k = section.k()?;
    let prior = config.prior(k)?;
    let (cal, targets) = config.targets()?;
    let settings = config.settings(cli.seed)?;
    let models = if section.kind == ModelKind::CompositeGaussian {
        section.build_composite()?;
        if cal.method == CalibrationMethod::MonteCarlo {
            return Err(Error::config(
                "monte_carlo calibration needs gaussian_mean or bernoulli models",
            ));
        }
        None
    } else {
        Some(section.build()?)
    };
    let kinds = config.kinds();
    let stamp = stamp(cli, config, settings.seed)?;
    let out = out_dir(cli, config)?;
    let selection = cal.selection.into();
    let mut results = Vec::new();
    for kind in kinds {
        let result = match (cal.method, &models) {
            (CalibrationMethod::MonteCarlo, Some(models)) => {
                calibrate_monte_carlo(kind, models, &prior, &targets, &selection, &settings)?
            }
            _ => calibrate_analytic(kind, &prior, &targets)?,
        };
        results.push(CalibrationRow {
            procedure: kind.name(),
            result,
        });
    }
    println!("{:<20} {:>12} {:>12} {:>12} {:>12} {:>10}", "procedure", "a", "b", "c", "d", "offset");
    for r in &results {
        let t = &r.result.thresholds;
        println!(
            "{:<20} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>10.6}",
            r.procedure, t.a, t.b, t.c, t.d, r.result.offset
        );
    }
    let file = CalibrationFile {
        version: &stamp.version,
        seed: stamp.seed,
        config_hash: &stamp.config_hash,
        experiment: &config.experiment.name,
        method: cal.method,
        alpha: targets.alpha,
        beta: targets.beta,
        replications: settings.replications,
        k,
        l: prior.l,
        u: prior.u,
        results,
    };
    let path = out.write_json("calibration.json", &file)?;
    Ok(Outcome {
        files: vec![path],
        acceptance_failed: false,
    })
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn recipe_sweeps(name: &str, config: &RunConfig, settings: &McSettings, allow_partial: bool) -> Result<Vec<(String, SweepSpec)>> {
    if config.models.is_some() || config.prior.is_some() || config.procedures.is_some() {
        return Err(Error::config(
            "a recipe fixes models, prior and procedures; remove those sections",
        ));
    }
    let r = recipe(name, settings)?;
    let mut out = Vec::new();
    for (label, mut spec) in r.sweeps {
        if let Some(s) = &config.sweep {
            if s.configs.is_some() {
                return Err(Error::config("a recipe fixes the sweep configurations"));
            }
            if let Some(grid) = &s.grid {
                spec.grid = grid.clone();
            }
            spec.error_configs = s.error_configs.into();
            spec.estimation = s.estimation;
            spec.scheme = s.is_scheme;
            spec.allow_partial = s.allow_partial;
        }
        spec.allow_partial |= allow_partial;
        if let Some(m) = config.experiment.max_replications {
            spec.max_replications = m;
        }
        spec.validate()?;
        out.push((format!("{}_{label}", r.name), spec));
    }
    Ok(out)
}

#[derive(Serialize)]
struct SweepSidecar<'a> {
    version: &'a str,
    seed: u64,
    config_hash: &'a str,
    label: &'a str,
    recipe: Option<&'a str>,
    grid: &'a [f64],
    spec: &'a SweepSpec,
}

fn sweep(cli: &Cli, config: &RunConfig) -> Result<Outcome> {
    let settings = config.settings(cli.seed)?;
    let sweeps = match &cli.recipe {
        Some(name) => recipe_sweeps(name, config, &settings, cli.allow_partial)?,
        None => {
            if matches!(
                config.sweep.as_ref().and_then(|s| s.configs.as_ref()),
                Some(ConfigList::Explicit(c)) if c.is_empty()
            ) {
                return Err(Error::config("[sweep] configs must be nonempty"));
            }
            vec![(
                file_label(&config.experiment.name),
                config.sweep_spec(&settings, cli.allow_partial)?,
            )]
        }
    };
    let stamp = stamp(cli, config, settings.seed)?;
    let out = out_dir(cli, config)?;
    let mut files = Vec::new();
    for (label, spec) in &sweeps {
        let curves = run_sweep(spec)?;
        files.extend(write_sweep(&out, &stamp, label, spec, &curves)?);
        let sidecar = SweepSidecar {
            version: &stamp.version,
            seed: stamp.seed,
            config_hash: &stamp.config_hash,
            label,
            recipe: cli.recipe.as_deref(),
            grid: &spec.grid,
            spec,
        };
        files.push(out.write_json(&format!("sweep_{label}.json"), &sidecar)?);
        let truncated: usize = curves.iter().flat_map(|c| &c.points).map(|p| p.truncated).sum();
        println!(
            "{label}: {} curve(s) x {} grid points{}",
            curves.len(),
            spec.grid.len(),
            if truncated > 0 {
                format!(", {truncated} truncated replication(s)")
            } else {
                String::new()
            }
        );
    }
    Ok(Outcome {
        files,
        acceptance_failed: false,
    })
}

fn write_sweep(out: &OutDir, stamp: &Stamp, label: &str, spec: &SweepSpec, curves: &[Curve]) -> Result<Vec<PathBuf>> {
    let k = spec.prior.k;
    let grid: Vec<String> = spec.grid.iter().map(|&x| number(x)).collect();
    let extra = vec![
        ("label".to_string(), label.to_string()),
        ("k".to_string(), k.to_string()),
        ("l".to_string(), spec.prior.l.to_string()),
        ("u".to_string(), spec.prior.u.to_string()),
        ("replications".to_string(), spec.settings.replications.to_string()),
        ("grid".to_string(), grid.join(";")),
    ];
    let mut header: Vec<String> = ["procedure", "config_id", "free_param", "a", "b", "c", "d"]
        .map(String::from)
        .to_vec();
    header.extend((1..=k).map(|j| format!("mean_{j}")));
    header.extend((1..=k).map(|j| format!("se_{j}")));
    header.extend(
        [
            "alpha_hat", "alpha_se", "beta_hat", "beta_se", "log10_alpha", "log10_beta",
            "alpha_method", "beta_method", "alpha_config", "beta_config", "replications", "truncated",
        ]
        .map(String::from),
    );
    let mut rows = Vec::new();
    let mut metric_rows = Vec::new();
    for c in curves {
        for p in &c.points {
            let t = &p.thresholds;
            let mut row = vec![
                c.kind.name().to_string(),
                c.config.label(),
                number(p.free_parameter),
                number(t.a),
                number(t.b),
                number(t.c),
                number(t.d),
            ];
            row.extend(p.mean_time.iter().map(|&x| number(x)));
            row.extend(p.time_se.iter().map(|&x| number(x)));
            row.extend([
                number(p.alpha.estimate),
                number(p.alpha.std_error),
                number(p.beta.estimate),
                number(p.beta.std_error),
                number(p.log10_alpha()),
                number(p.log10_beta()),
                p.alpha.method.name().to_string(),
                p.beta.method.name().to_string(),
                p.alpha.config.clone(),
                p.beta.config.clone(),
                p.replications.to_string(),
                p.truncated.to_string(),
            ]);
            rows.push(row);
            for m in &p.metrics {
                metric_rows.push(vec![
                    c.kind.name().to_string(),
                    c.config.label(),
                    number(p.free_parameter),
                    m.metric.name().to_string(),
                    optional(m.value),
                    optional(m.std_error),
                    m.effective.to_string(),
                ]);
            }
        }
    }
    let metric_header: Vec<String> = ["procedure", "config_id", "free_param", "metric", "value", "se", "effective"]
        .map(String::from)
        .to_vec();
    Ok(vec![
        out.write_csv(&format!("sweep_{label}.csv"), stamp, &extra, &header, &rows)?,
        out.write_csv(&format!("metrics_{label}.csv"), stamp, &extra, &metric_header, &metric_rows)?,
    ])
}

// ---------------------------------------------------------------------------
// are
// ---------------------------------------------------------------------------

fn are_section(means: &[&str], rows: Vec<Vec<usize>>, bounds: Option<(usize, usize)>) -> AreSection {
    AreSection {
        means: Some(means.iter().map(|m| m.to_string()).collect()),
        kl: None,
        rows,
        l: bounds.map(|b| b.0),
        u: bounds.map(|b| b.1),
        regime: super::config::RegimeKind::Ratio,
        r: "1".to_string(),
        families: vec![AreFamily::Decentralized, AreFamily::Synchronous],
    }
}

/// Efficiency tables of a built-in preset.
pub fn builtin_are_requests(name: &str) -> Result<Vec<AreRequest>> {
    let homogeneous = ["0.5"; 10];
    let first = |m: usize| (1..=m).collect::<Vec<usize>>();
    match name {
        "nonhomo" => {
            let means = ["0.25", "0.25", "0.5", "0.5"];
            let rows = vec![vec![1], vec![3], vec![1, 2], vec![1, 3]];
            Ok(vec![
                are_section(&means, rows.clone(), None).resolve("nonhomo_known")?,
                are_section(&means, rows, Some((1, 3))).resolve("nonhomo_l1_u3")?,
            ])
        }
        "homo-gap" => Ok(vec![are_section(
            &homogeneous,
            [1, 3, 5, 7, 9].into_iter().map(first).collect(),
            None,
        )
        .resolve("homo-gap")?]),
        "homo-gapinter" => Ok(vec![are_section(
            &homogeneous,
            (3..=7).map(first).collect(),
            Some((3, 7)),
        )
        .resolve("homo-gapinter")?]),
        other => Err(Error::config(format!("no efficiency tables for recipe {other:?}"))),
    }
}

fn family_name(f: AreFamily) -> &'static str {
    match f {
        AreFamily::Decentralized => "decentralized",
        AreFamily::Synchronous => "synchronous",
    }
}

fn are(cli: &Cli, config: &RunConfig) -> Result<Outcome> {
    let requests = match (&cli.recipe, &config.are) {
        (Some(_), Some(_)) => return Err(Error::config("give either --recipe or an [are] section")),
        (Some(name), None) => builtin_are_requests(name)?,
        (None, Some(section)) => vec![section.resolve(&file_label(&config.experiment.name))?],
        (None, None) => return Err(Error::config("`are` needs --recipe or an [are] section")),
    };
    let settings = config.settings(cli.seed)?;
    let stamp = stamp(cli, config, settings.seed)?;
    let out = out_dir(cli, config)?;
    let mut files = Vec::new();
    for req in &requests {
        let k = req.kls.len();
        let kl_text: Vec<String> = req
            .kls
            .iter()
            .map(|(i, j)| format!("{}:{}", format_rational(i), format_rational(j)))
            .collect();
        let extra = vec![
            ("label".to_string(), req.label.clone()),
            ("bounds".to_string(), req.bounds_text.clone()),
            ("r".to_string(), req.r_text.clone()),
            ("kl".to_string(), kl_text.join(";")),
        ];
        let mut header: Vec<String> = ["config", "l", "u"].map(String::from).to_vec();
        header.extend((1..=k).map(|j| format!("stream_{j}")));
        for &family in &req.families {
            let mut rows = Vec::new();
            for (c, prior) in &req.rows {
                let mut row = vec![c.label(), prior.l.to_string(), prior.u.to_string()];
                for stream in 0..k {
                    let v = match family {
                        AreFamily::Decentralized => are_decentralized(stream, c, prior, &req.kls)?,
                        AreFamily::Synchronous => are_synchronous(stream, c, prior, &req.kls, &req.regime)?,
                    };
                    row.push(format_rational(&v));
                }
                rows.push(row);
            }
            println!("{} vs {} ({}, r={})", req.label, family_name(family), req.bounds_text, req.r_text);
            for r in &rows {
                println!("  {:<10} {}", r[0], r[3..].join("  "));
            }
            let name = format!("are_{}_{}.csv", req.label, family_name(family));
            files.push(out.write_csv(&name, &stamp, &extra, &header, &rows)?);
        }
    }
    Ok(Outcome {
        files,
        acceptance_failed: false,
    })
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn oracle(cli: &Cli, config: &RunConfig) -> Result<Outcome> {
    let cases: Vec<OracleCase> = match &config.oracle {
        Some(section) if !section.cases.is_empty() => {
            section.cases.iter().map(|c| c.build()).collect::<Result<_>>()?
        }
        _ => default_oracle_cases()?,
    };
    let settings = config.settings(cli.seed)?;
    let stamp = stamp(cli, config, settings.seed)?;
    let out = out_dir(cli, config)?;
    let mut rows = Vec::new();
    let mut extra = vec![("replications".to_string(), settings.replications.to_string())];
    let mut failed = false;
    for case in &cases {
        let report = run_oracle_case(case, &settings)?;
        let warn = report.residual_warning();
        extra.push((
            format!("residual_{}", case.name),
            number(report.exact.residual_mass),
        ));
        if warn {
            eprintln!(
                "warning: {}: residual mass {} >= {RESIDUAL_WARNING} at depth {}; increase the depth",
                case.name, report.exact.residual_mass, case.depth
            );
        }
        let pass = report.passes();
        failed |= !pass;
        println!(
            "{:<16} {} worst {:.2} sigma, residual {:.2e}{}",
            case.name,
            if pass { "PASS" } else { "FAIL" },
            report.worst_sigmas(),
            report.exact.residual_mass,
            if warn { " (residual warning)" } else { "" }
        );
        for r in &report.rows {
            rows.push(vec![
                r.case.clone(),
                r.quantity.clone(),
                number(r.exact),
                number(r.residual),
                number(r.estimate),
                number(r.std_error),
                number(r.sigmas),
                if r.passes() { "PASS" } else { "FAIL" }.to_string(),
                warn.to_string(),
            ]);
        }
    }
    let header: Vec<String> = [
        "case", "quantity", "exact", "residual", "estimate", "std_error", "sigmas", "status", "residual_warning",
    ]
    .map(String::from)
    .to_vec();
    let path = out.write_csv("oracle_report.csv", &stamp, &extra, &header, &rows)?;
    Ok(Outcome {
        files: vec![path],
        acceptance_failed: failed,
    })
}
