use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use bargecast::ais::write_ais_csv;
use bargecast::dataprep::{kmeans_impute_fit, BargeClassMap};
use bargecast::features::{extract_features, VesselDims};
use bargecast::geo::{write_linestring_geojson, write_segments_csv};
use bargecast::learners::load_model;
use bargecast::matching::{read_dataset_file, write_dataset, LabeledDataset};
use bargecast::metrics::emit_report;
use bargecast::pipeline::{
    build_labeled, build_path, evaluate_dataset, grouping_sensitivity, prepare_presence, prepare_quantity, prepared_trips,
    run_training, segment_sensitivity, transfer_run, write_predictions, write_segment_table, write_stage_csv, write_synthetic,
    HierarchicalModel, PipelineConfig, PipelineError, SyntheticScenario,
};

#[derive(Parser)]
#[command(name = "bargecast", version, about = "Barge presence and quantity estimation from AIS tracks")]
struct Cli {
    /// JSON pipeline config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, clean and buffer-filter AIS records.
    Clean,
    /// Build centerline segments and the average path.
    Path,
    /// Match camera observations to trips.
    Match,
    /// Extract features for matched trips and write the labeled dataset.
    Features,
    /// Write the presence and quantity stage datasets.
    Prep {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train both stages with feature selection and tuning.
    Train {
        #[arg(long)]
        no_rfe: bool,
        #[arg(long)]
        no_tune: bool,
    },
    /// Train with tuning forced on and feature selection off.
    Tune,
    /// Score a saved model on a labeled dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Predict barge presence and quantity for every trip in an AIS file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// AIS CSV; defaults to the config input.
        #[arg(long)]
        ais: Option<PathBuf>,
    },
    /// Generate a synthetic scenario and a config pointing at it.
    Synth {
        /// JSON scenario; defaults apply when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Average-path error for each configured segment length.
    SensitivitySegment,
    /// Merge adjacent barge-count classes and score each grouping.
    SensitivityGrouping {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train the quantity stage without one location and score it there.
    Transfer {
        #[arg(long)]
        holdout: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| path.display().to_string())?;
    Ok(())
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::File::create(path).with_context(|| path.display().to_string())
}

fn dataset_or_build(cfg: &PipelineConfig, dataset: &Option<PathBuf>) -> Result<LabeledDataset> {
    Ok(match dataset {
        Some(p) => read_dataset_file(p)?,
        None => build_labeled(cfg)?.dataset,
    })
}

fn imputed_rows(cfg: &PipelineConfig, data: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    let model = kmeans_impute_fit(&data.rows, cfg.imputation_k, cfg.seed + 2)?;
    Ok(data
        .rows
        .iter()
        .map(|r| {
            let mut v = r.clone();
            model.apply(&mut v);
            v
        })
        .collect())
}

fn run(cli: &Cli) -> Result<()> {
    let out = &cli.out;
    match &cli.command {
        Command::Synth { scenario } => {
            let sc: SyntheticScenario = match scenario {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?).map_err(|e| PipelineError::Config(e.to_string()))?,
                None => SyntheticScenario::default(),
            };
            let base = load_config(cli)?;
            let sc = SyntheticScenario { seed: cli.seed.unwrap_or(sc.seed), ..sc };
            let files = write_synthetic(&sc, out, &base)?;
            println!("{}", files.config.display());
        }
        Command::Clean => {
            let cfg = load_config(cli)?;
            let t = prepared_trips(&cfg)?;
            write_ais_csv(create(&out.join("data/clean.csv"))?, &t.records)?;
            write_json(
                &out.join("reports/cleaning.json"),
                &serde_json::json!({"parse": t.parse, "cleaning": t.cleaning, "outside_buffer": t.outside_buffer, "trips": t.trips.len()}),
            )?;
            println!("{} records kept, {} trips", t.records.len(), t.trips.len());
        }
        Command::Path => {
            let cfg = load_config(cli)?;
            let t = prepared_trips(&cfg)?;
            let p = build_path(&t.centerline, &t.records, cfg.segment_length_miles)?;
            fs::create_dir_all(out.join("data"))?;
            write_segments_csv(&out.join("data/segments.csv"), &p.river)?;
            write_linestring_geojson(&out.join("data/avg_path.geojson"), &p.avg_path)?;
            println!("{} segments, {} vertices in the average path", p.river.segments.len(), p.avg_path.points().len());
        }
        Command::Match => {
            let cfg = load_config(cli)?;
            let b = build_labeled(&cfg)?;
            write_json(&out.join("data/matches.json"), &b.matches)?;
            write_json(&out.join("reports/unmatched.json"), &b.unmatched)?;
            println!("{} matches", b.matches.len());
        }
        Command::Features => {
            let cfg = load_config(cli)?;
            let b = build_labeled(&cfg)?;
            write_dataset(create(&out.join("data/labeled.csv"))?, &b.dataset)?;
            write_json(&out.join("reports/data_summary.json"), &b.summary)?;
            println!("{} labeled rows", b.dataset.len());
        }
        Command::Prep { dataset } => {
            let cfg = load_config(cli)?;
            let data = dataset_or_build(&cfg, dataset)?;
            let rows = imputed_rows(&cfg, &data)?;
            let p = prepare_presence(&rows, &data.barge_count, &cfg, cfg.seed + 100)?;
            let q = prepare_quantity(&rows, &data.barge_count, &BargeClassMap::default(), &cfg, cfg.seed + 200)?;
            write_stage_csv(create(&out.join("data/presence_stage.csv"))?, &p)?;
            write_stage_csv(create(&out.join("data/quantity_stage.csv"))?, &q)?;
            println!("presence {} train / {} test, quantity {} train / {} test", p.x_train.len(), p.x_test.len(), q.x_train.len(), q.x_test.len());
        }
        Command::Train { no_rfe, no_tune } => {
            let mut cfg = load_config(cli)?;
            cfg.run_rfe &= !no_rfe;
            cfg.run_tuning &= !no_tune;
            let t = run_training(&cfg, out)?;
            println!(
                "presence weighted F1 {:.4}, quantity weighted F1 {:.4}",
                t.presence.report.weighted.f1, t.quantity.report.weighted.f1
            );
        }
        Command::Tune => {
            let mut cfg = load_config(cli)?;
            cfg.run_rfe = false;
            cfg.run_tuning = true;
            let t = run_training(&cfg, out)?;
            println!(
                "presence weighted F1 {:.4}, quantity weighted F1 {:.4}",
                t.presence.report.weighted.f1, t.quantity.report.weighted.f1
            );
        }
        Command::Evaluate { model, dataset } => {
            let m: HierarchicalModel = load_model(model)?;
            let data = read_dataset_file(dataset)?;
            let (p, q) = evaluate_dataset(&m, &data)?;
            emit_report(&p, &out.join("reports"), "evaluate_presence")?;
            if let Some(q) = &q {
                emit_report(q, &out.join("reports"), "evaluate_quantity")?;
            }
            println!("presence weighted F1 {:.4}", p.weighted.f1);
            if let Some(q) = q {
                println!("quantity weighted F1 {:.4}", q.weighted.f1);
            }
        }
        Command::Predict { model, ais } => {
            let mut cfg = load_config(cli)?;
            if let Some(a) = ais {
                cfg.ais_csv = a.clone();
            }
            let m: HierarchicalModel = load_model(model)?;
            let t = prepared_trips(&cfg)?;
            let mut ids = Vec::new();
            let mut rows = Vec::new();
            for trip in &t.trips {
                match extract_features(trip, VesselDims::from_trip(trip)) {
                    Ok((fv, _)) => {
                        ids.push((trip.trip_id.clone(), trip.mmsi));
                        rows.push(fv.0);
                    }
                    Err(e) => log::warn!("skipping {}: {e}", trip.trip_id),
                }
            }
            let preds = m.predict_rows(&rows)?;
            write_predictions(create(&out.join("predictions.csv"))?, &ids, &preds, m.class_map.len())?;
            println!("{} trips predicted", preds.len());
        }
        Command::SensitivitySegment => {
            let cfg = load_config(cli)?;
            let (reference, rows) = segment_sensitivity(&cfg)?;
            write_segment_table(create(&out.join("reports/sensitivity_segment.csv"))?, &rows)?;
            write_json(&out.join("reports/sensitivity_segment.json"), &serde_json::json!({"reference": reference, "rows": rows}))?;
            for r in rows {
                println!("{:>5} mi  {:.5}", r.segment_miles, r.mean_error_miles);
            }
        }
        Command::SensitivityGrouping { dataset } => {
            let cfg = load_config(cli)?;
            let data = dataset_or_build(&cfg, dataset)?;
            let rows = imputed_rows(&cfg, &data)?;
            let rep = grouping_sensitivity(&rows, &data.barge_count, &cfg, cfg.seed)?;
            write_json(&out.join("reports/sensitivity_grouping.json"), &rep)?;
            println!("best grouping: {:?}", rep.best_groups());
        }
        Command::Transfer { holdout, dataset } => {
            let cfg = load_config(cli)?;
            let data = dataset_or_build(&cfg, dataset)?;
            let t = transfer_run(&data, holdout, &cfg.quantity_learner, &cfg)?;
            write_json(&out.join(format!("reports/transfer_{holdout}.json")), &t)?;
            println!("in-domain weighted F1 {:.4}, holdout weighted F1 {:.4}", t.in_domain.weighted.f1, t.holdout.weighted.f1);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<PipelineError>(), Some(p) if !p.is_data_error());
            ExitCode::from(if usage { 1 } else { 2 })
        }
    }
}
