//! Subcommand execution and output files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use edemand::calibration::{
    calibrate as run_calibration, fit_sequential, simulate_sequential_data, CalibrationTargets,
    ChoiceDataset, FitOptions, FreeParameterSet, SequentialData, SimplexOptions, SimulationDesign,
};
use edemand::engine::{compare_scenarios, run_scenario, RunOptions, ScenarioRun};
use edemand::io::{self as out, CdfKind, OutputMeta};
use edemand::model::EvaluationMode;
use edemand::pipeline::{synthesize as run_synthesis, Category, CategoryConfig};
use edemand::population::{Population, SyntheticPopulationSpec};
use edemand::{builtin, Scenario};
use serde::Serialize;
use serde_json::json;

use crate::settings::{
    config_hash, load_params, load_population, load_scenarios, population_fingerprint, read_json,
    resolve_out, resolve_workers, FileConfig,
};
use crate::{
    CalibrateArgs, CliResult, Failure, FitArgs, GenArgs, GenPopulationArgs, Mode, RunArgs,
    SynthesizeArgs,
};

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)
        .map_err(|e| Failure::invalid("out", format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn scenario_entries(flag: &[String], file: &FileConfig, default: &[&str]) -> Vec<String> {
    if !flag.is_empty() {
        return flag.to_vec();
    }
    let from_file = file.scenarios();
    if !from_file.is_empty() {
        return from_file;
    }
    default.iter().map(|s| s.to_string()).collect()
}

fn print_summary_table(runs: &[&ScenarioRun]) {
    println!(
        "{:<12} {:>14} {:>14} {:>10} {:>10} {:>10}",
        "scenario", "total value $", "orders/week", "2-5 days%", "1 day%", "same day%"
    );
    for r in runs {
        let s = &r.summary;
        println!(
            "{:<12} {:>14.2} {:>14.3} {:>10.1} {:>10.1} {:>10.1}",
            s.scenario,
            s.mean_total_value,
            s.mean_order_frequency,
            s.share_by_speed_pct[0],
            s.share_by_speed_pct[1],
            s.share_by_speed_pct[2]
        );
    }
}

pub fn run(args: RunArgs, compare: bool) -> CliResult<()> {
    let command = if compare { "compare" } else { "run" };
    let file = FileConfig::load(args.common.config.as_deref())?;
    let params = load_params(
        args.common
            .params
            .as_ref()
            .or(file.params.as_ref())
            .map(PathBuf::as_path),
    )?;
    let population = load_population(
        args.input
            .population
            .as_ref()
            .or(file.population.as_ref())
            .map(PathBuf::as_path),
    )?;
    let defaults: &[&str] = if compare {
        &["S1", "S2", "S3", "S4"]
    } else {
        &["S1"]
    };
    let scenarios = load_scenarios(&scenario_entries(&args.input.scenario, &file, defaults))?;
    let mode = args.mode.or(file.mode).unwrap_or(Mode::Expectation);
    let seed = args.seed.or(file.seed);
    let replications = args.replications.or(file.replications).unwrap_or(52);
    let workers = resolve_workers(args.common.workers, file.workers)?;
    if mode == Mode::Sample && seed.is_none() {
        return Err(Failure::invalid("seed", "sample mode needs a seed"));
    }
    if compare && scenarios.len() < 2 {
        return Err(Failure::invalid(
            "scenario",
            "compare needs at least two scenarios",
        ));
    }
    let options = RunOptions {
        mode: match mode {
            Mode::Expectation => EvaluationMode::Expectation,
            Mode::Sample => EvaluationMode::Sampled,
        },
        seed: if mode == Mode::Sample { seed } else { None },
        replications,
        workers,
    };
    let meta = OutputMeta {
        command: command.into(),
        config_hash: config_hash(&json!({
            "command": command,
            "population": population_fingerprint(&population),
            "scenarios": scenarios,
            "params": params,
            "mode": options.mode,
            "seed": options.seed,
            "replications": if mode == Mode::Sample { Some(replications) } else { None },
        })),
        seed: options.seed,
    };
    let dir = resolve_out(args.common.out, file.out)?;

    let (runs, deltas) = if compare {
        let c = compare_scenarios(&population, &scenarios, &params, &options)?;
        (c.runs, c.deltas)
    } else {
        let runs = scenarios
            .iter()
            .map(|s| run_scenario(&population, s, &params, &options))
            .collect::<edemand::Result<Vec<_>>>()?;
        (runs, Vec::new())
    };
    let refs: Vec<&ScenarioRun> = runs.iter().collect();
    let summaries: Vec<_> = runs.iter().map(|r| &r.summary).collect();
    out::write_summary_csv(create(&dir, "summary.csv")?, &meta, &summaries)?;
    out::write_households_csv(create(&dir, "households.csv")?, &meta, &refs)?;
    out::write_cdf_csv(
        create(&dir, "tv_cdf.csv")?,
        &meta,
        &summaries,
        CdfKind::TotalValue,
    )?;
    out::write_cdf_csv(
        create(&dir, "frequency_cdf.csv")?,
        &meta,
        &summaries,
        CdfKind::Frequency,
    )?;
    if compare {
        out::write_deltas_csv(create(&dir, "deltas.csv")?, &meta, &deltas)?;
    }
    out::write_json(
        create(&dir, "summary.json")?,
        &meta,
        &json!({ "households": population.len(), "scenarios": summaries, "deltas": deltas }),
    )?;

    println!(
        "{} households, {} mode",
        population.len(),
        match mode {
            Mode::Expectation => "expectation",
            Mode::Sample => "sample",
        }
    );
    print_summary_table(&refs);
    if compare {
        println!();
        println!(
            "{:<12} {:>14} {:>14} {:>10} {:>10} {:>10}",
            "change", "total value %", "orders/week %", "2-5 d pp", "1 d pp", "same d pp"
        );
        for d in deltas.iter().filter(|d| d.base == runs[0].summary.scenario) {
            println!(
                "{:<12} {:>14.1} {:>14.1} {:>10.1} {:>10.1} {:>10.1}",
                format!("{}->{}", d.base, d.other),
                d.total_value_pct,
                d.frequency_pct,
                d.share_pp[0],
                d.share_pp[1],
                d.share_pp[2]
            );
        }
    }
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn parse_category(name: &str) -> CliResult<Category> {
    Category::ALL
        .into_iter()
        .find(|c| c.label().eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            let known: Vec<_> = Category::ALL.iter().map(|c| c.label()).collect();
            Failure::invalid(
                "category",
                format!(
                    "unknown category `{name}`; expected one of {}",
                    known.join(", ")
                ),
            )
        })
}

fn load_categories(path: Option<&Path>) -> CliResult<Vec<CategoryConfig>> {
    let list = match path {
        None => CategoryConfig::defaults(),
        Some(p) => read_json("categories", p)?,
    };
    for c in &list {
        c.validate()?;
    }
    Ok(list)
}

fn first_scenario(flag: &[String], file: &FileConfig) -> CliResult<Scenario> {
    let mut list = load_scenarios(&scenario_entries(flag, file, &["S1"]))?;
    if list.len() != 1 {
        return Err(Failure::invalid(
            "scenario",
            "this command takes exactly one scenario",
        ));
    }
    Ok(list.remove(0))
}

pub fn calibrate(args: CalibrateArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let mut params = load_params(
        args.common
            .params
            .as_ref()
            .or(file.params.as_ref())
            .map(PathBuf::as_path),
    )?;
    if let Some(a) = args.start_alpha.or(file.start_alpha) {
        params.alpha = a;
        params.validate()?;
    }
    let population = load_population(
        args.input
            .population
            .as_ref()
            .or(file.population.as_ref())
            .map(PathBuf::as_path),
    )?;
    let scenario = first_scenario(&args.input.scenario, &file)?;
    let targets = match args.targets.as_ref().or(file.targets.as_ref()) {
        None => CalibrationTargets::default(),
        Some(p) => read_json("targets", p)?,
    };
    targets.validate()?;
    let tolerance = args
        .tolerance
        .or(file.tolerance)
        .unwrap_or(targets.tolerance);
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Failure::invalid("tolerance", "must be positive"));
    }
    let category = parse_category(
        args.category
            .as_deref()
            .or(file.category.as_deref())
            .unwrap_or(Category::OtherPackages.label()),
    )?;
    let categories = load_categories(
        args.categories
            .as_ref()
            .or(file.categories.as_ref())
            .map(PathBuf::as_path),
    )?;
    let config = categories
        .into_iter()
        .find(|c| c.category == category)
        .unwrap_or_else(|| CategoryConfig::new(category, 1.0));
    let free = match args.free.as_ref().or(file.free.as_ref()) {
        None => FreeParameterSet::alpha_only(),
        Some(p) => read_json("free", p)?,
    };
    free.validate()?;
    let simplex = SimplexOptions {
        max_iterations: args.max_iterations.or(file.max_iterations).unwrap_or(500),
        ..Default::default()
    };
    let workers = resolve_workers(args.common.workers, file.workers)?;
    let category_targets = targets.get(category)?;
    let meta = OutputMeta {
        command: "calibrate".into(),
        config_hash: config_hash(&json!({
            "command": "calibrate",
            "population": population_fingerprint(&population),
            "scenario": scenario,
            "params": params,
            "targets": category_targets,
            "tolerance": tolerance,
            "category": config,
            "free": free,
            "max_iterations": simplex.max_iterations,
        })),
        seed: None,
    };
    let dir = resolve_out(args.common.out, file.out)?;
    let report = run_calibration(
        &category_targets,
        tolerance,
        &free,
        &population,
        &scenario,
        &params,
        &config,
        &simplex,
        workers,
    )?;
    out::write_json(create(&dir, "calibration.json")?, &meta, &report)?;
    out::write_plain_json(create(&dir, "calibrated_params.json")?, &report.params)?;

    println!(
        "category {}, scenario {}, {} households",
        category.label(),
        scenario.name,
        population.len()
    );
    for b in &report.free.bounds {
        let name = b.parameter.name();
        println!(
            "  {:<16} start {:>12.6}  fitted {:>12.6}",
            name, report.start[name], report.fitted[name]
        );
    }
    let names = ["deliveries/person-month", "purchase $/household-month"];
    let target_values = [
        category_targets.deliveries_per_person_month,
        category_targets.purchase_usd_per_household_month,
    ];
    let simulated = [
        report.simulated.deliveries_per_person_month,
        report.simulated.purchase_usd_per_household_month,
    ];
    for k in 0..2 {
        println!(
            "  {:<28} target {:>9.3}  simulated {:>9.3}  residual {:>+7.2}%",
            names[k],
            target_values[k],
            simulated[k],
            100.0 * report.relative_residuals[k]
        );
    }
    println!(
        "{} after {} iterations ({:?}); tolerance {:.1}%",
        if report.converged {
            "converged"
        } else {
            "NOT converged"
        },
        report.iterations,
        report.stop_reason,
        100.0 * tolerance
    );
    if !report.converged {
        let implied = category_targets.purchase_usd_per_household_month
            / (category_targets.deliveries_per_person_month
                * population.mean_size()
                * config.persons_15_plus_share);
        println!(
            "note: the targets imply a mean order value of ${implied:.2}; the order value grid starts at ${}",
            scenario.ov_grid.min
        );
    }
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn load_dataset(field: &str, path: Option<&PathBuf>) -> CliResult<ChoiceDataset> {
    let path =
        path.ok_or_else(|| Failure::invalid(field, "required unless --simulate is given"))?;
    crate::settings::require_file(field, path)?;
    Ok(ChoiceDataset::from_path(path)?)
}

#[derive(Serialize)]
struct LevelRow<'a> {
    level: usize,
    name: &'a str,
    estimate: f64,
    standard_error: f64,
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let params = load_params(
        args.common
            .params
            .as_ref()
            .or(file.params.as_ref())
            .map(PathBuf::as_path),
    )?;
    let scenario_flag: Vec<String> = args.scenario.into_iter().collect();
    let mut scenarios = load_scenarios(&scenario_entries(&scenario_flag, &file, &["estimation"]))?;
    if scenarios.len() != 1 {
        return Err(Failure::invalid(
            "scenario",
            "fit takes exactly one scenario",
        ));
    }
    let scenario = scenarios.remove(0);
    let simulate = args.simulate || file.simulate.unwrap_or(false);
    let workers = resolve_workers(args.common.workers, file.workers)?;
    let (data, design) = if simulate {
        let design = SimulationDesign {
            observations: args.observations.or(file.observations).unwrap_or(20_000),
            seed: args.seed.or(file.seed).unwrap_or(2019),
            ..Default::default()
        };
        if design.observations == 0 {
            return Err(Failure::invalid("observations", "must be at least 1"));
        }
        (
            simulate_sequential_data(&scenario, &params, &design)?,
            Some(design),
        )
    } else {
        let data = SequentialData {
            level1: load_dataset("level1", args.level1.as_ref().or(file.level1.as_ref()))?,
            level2: load_dataset("level2", args.level2.as_ref().or(file.level2.as_ref()))?,
            level3: load_dataset("level3", args.level3.as_ref().or(file.level3.as_ref()))?,
        };
        (data, None)
    };
    let mut data_bytes = Vec::new();
    for level in [&data.level1, &data.level2, &data.level3] {
        level.write_csv(&mut data_bytes)?;
    }
    let meta = OutputMeta {
        command: "fit".into(),
        config_hash: config_hash(&json!({
            "command": "fit",
            "scenario": scenario,
            "params": params,
            "data": config_hash(&json!(String::from_utf8_lossy(&data_bytes))),
        })),
        seed: design.map(|d| d.seed),
    };
    let dir = resolve_out(args.common.out, file.out)?;
    if simulate {
        for (name, level) in [
            ("level1.csv", &data.level1),
            ("level2.csv", &data.level2),
            ("level3.csv", &data.level3),
        ] {
            let mut w = create(&dir, name)?;
            writeln!(w, "{}", meta.header_line())?;
            level.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    let options = FitOptions {
        workers,
        ..Default::default()
    };
    let fit = fit_sequential(&data, &scenario, &params, &options)?;
    let checks = simulate.then(|| fit.compare(&params));
    out::write_json(
        create(&dir, "fit.json")?,
        &meta,
        &json!({
            "levels": fit.levels(),
            "params": fit.params,
            "alpha": fit.alpha,
            "alpha_standard_error": fit.alpha_standard_error,
            "converged": fit.converged(),
            "truth_comparison": checks,
        }),
    )?;
    {
        let mut w = create(&dir, "coefficients.csv")?;
        writeln!(w, "{}", meta.header_line())?;
        let mut csv = csv::Writer::from_writer(&mut w);
        for (i, level) in fit.levels().iter().enumerate() {
            for ((name, &estimate), &standard_error) in level
                .names
                .iter()
                .zip(&level.coefficients)
                .zip(&level.standard_errors)
            {
                csv.serialize(LevelRow {
                    level: i + 1,
                    name,
                    estimate,
                    standard_error,
                })
                .map_err(edemand::Error::from)?;
            }
        }
        csv.flush()?;
        drop(csv);
        w.flush()?;
    }

    for (i, level) in fit.levels().iter().enumerate() {
        println!(
            "level {}: {} observations, log-likelihood {:.3} (start {:.3}), {} iterations, {:?}",
            i + 1,
            level.observations,
            level.loglik,
            level.initial_loglik,
            level.iterations,
            level.status
        );
    }
    println!(
        "{:<28} {:>12} {:>10} {:>12} {:>7}",
        "coefficient", "estimate", "s.e.", "truth", "z"
    );
    match &checks {
        Some(checks) => {
            for c in checks {
                println!(
                    "{:<28} {:>12.6} {:>10.6} {:>12.6} {:>+7.2}",
                    c.name, c.estimate, c.standard_error, c.truth, c.z
                );
            }
        }
        None => {
            for level in fit.levels() {
                for ((n, e), s) in level
                    .names
                    .iter()
                    .zip(&level.coefficients)
                    .zip(&level.standard_errors)
                {
                    println!("{n:<28} {e:>12.6} {s:>10.6}");
                }
            }
        }
    }
    println!(
        "alpha {:.4} (s.e. {:.4})",
        fit.alpha, fit.alpha_standard_error
    );
    println!("outputs written to {}", dir.display());
    Ok(())
}

pub fn synthesize(args: SynthesizeArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let params = load_params(
        args.common
            .params
            .as_ref()
            .or(file.params.as_ref())
            .map(PathBuf::as_path),
    )?;
    let population = load_population(
        args.input
            .population
            .as_ref()
            .or(file.population.as_ref())
            .map(PathBuf::as_path),
    )?;
    let scenario = first_scenario(&args.input.scenario, &file)?;
    let categories = load_categories(
        args.categories
            .as_ref()
            .or(file.categories.as_ref())
            .map(PathBuf::as_path),
    )?;
    let weeks = args.weeks.or(file.weeks).unwrap_or(4);
    if weeks == 0 {
        return Err(Failure::invalid("weeks", "must be at least 1"));
    }
    let seed = args
        .seed
        .or(file.seed)
        .ok_or_else(|| Failure::invalid("seed", "synthesis samples at random and needs a seed"))?;
    let workers = resolve_workers(args.common.workers, file.workers)?;
    let meta = OutputMeta {
        command: "synthesize".into(),
        config_hash: config_hash(&json!({
            "command": "synthesize",
            "population": population_fingerprint(&population),
            "scenario": scenario,
            "params": params,
            "categories": categories,
            "weeks": weeks,
            "seed": seed,
        })),
        seed: Some(seed),
    };
    let dir = resolve_out(args.common.out, file.out)?;
    let result = run_synthesis(
        &population,
        &scenario,
        &params,
        &categories,
        weeks,
        seed,
        workers,
    )?;
    out::write_packages_csv(create(&dir, "packages.csv")?, &meta, &result.packages)?;
    out::write_json(
        create(&dir, "synthesis.json")?,
        &meta,
        &json!({ "weeks": result.weeks, "categories": result.categories }),
    )?;

    println!(
        "{} households, scenario {}, {} weeks",
        population.len(),
        scenario.name,
        weeks
    );
    println!(
        "{:<32} {:>9} {:>9} {:>10} {:>16}",
        "category", "adopters", "orders", "packages", "E[orders/week]"
    );
    for c in &result.categories {
        println!(
            "{:<32} {:>9} {:>9} {:>10} {:>16.3}",
            c.category.label(),
            c.adopters,
            c.orders,
            c.packages,
            c.expected_orders_per_household_week
        );
    }
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn emit<T: Serialize>(args: &GenArgs, value: &T) -> CliResult<()> {
    match &args.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| {
                Failure::invalid("output", format!("cannot write {}: {e}", path.display()))
            })?;
            out::write_plain_json(BufWriter::new(f), value)?;
        }
        None => out::write_plain_json(io::stdout().lock(), value)?,
    }
    Ok(())
}

pub fn gen_population(args: GenPopulationArgs) -> CliResult<()> {
    let spec = SyntheticPopulationSpec::default();
    if args.spec {
        return emit(&args.gen, &spec);
    }
    let population = Population::synthetic(&spec)?;
    match &args.gen.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| {
                Failure::invalid("output", format!("cannot write {}: {e}", path.display()))
            })?;
            population.write_csv(BufWriter::new(f))?;
        }
        None => population.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

pub fn gen_params(args: GenArgs) -> CliResult<()> {
    emit(&args, &edemand::Params::default())
}

pub fn gen_scenarios(args: GenArgs) -> CliResult<()> {
    emit(&args, &builtin::scenarios::<f64>())
}

pub fn gen_targets(args: GenArgs) -> CliResult<()> {
    emit(&args, &CalibrationTargets::default())
}

pub fn gen_categories(args: GenArgs) -> CliResult<()> {
    emit(&args, &CategoryConfig::defaults())
}
