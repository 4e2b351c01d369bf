//! generate-data, train and explain.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use silofed::dataset::{
    encode, generate_synthetic, load_and_filter, split_and_partition, write_csv, RawSurveyTable, SplitPartition,
    SurveySchema,
};
use silofed::explain::{
    bin_distributions, sample_rows, summarize_attributions, write_attributions_csv, write_bins_csv, write_summary_csv,
    BackgroundSet, BinSpec, Explainer, GroupStructure,
};
use silofed::federation::{
    run_centralized, run_federated, run_local_baselines, write_epochs_csv, write_local_csv, write_rounds_csv,
    write_silo_metrics_csv, CommLedger, CostStrategy,
};
use silofed::nn::ModelParams;
use silofed::seed::derive_seed;

use crate::config::{DataSource, ExperimentConfig, StructureKind};
use crate::error::{CliError, CliResult, Phase};
use crate::manifest::RunManifest;

pub const DATA_FILE: &str = "data.csv";
pub const SCHEMA_FILE: &str = "schema.json";
pub const MODEL_FILE: &str = "model.bin";
pub const CENTRAL_MODEL_FILE: &str = "centralized_model.bin";
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const SILO_FILE: &str = "silo_metrics.csv";
pub const LEDGER_FILE: &str = "ledger.json";
pub const FEDERATED_FILE: &str = "federated.json";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const CENTRAL_FILE: &str = "centralized.json";
pub const LOCAL_FILE: &str = "local_baselines.csv";
pub const LOCAL_SUMMARY_FILE: &str = "local_summary.json";
pub const ATTRIBUTIONS_FILE: &str = "attributions.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const BINS_FILE: &str = "bins.csv";
pub const EXPLAIN_FILE: &str = "explain.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Federated,
    Centralized,
    LocalBaselines,
}

/// A command's view of the run directory.
pub struct Run {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub manifest: RunManifest,
}

impl Run {
    pub fn open(dir: &Path, config: ExperimentConfig) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let manifest = RunManifest::open(dir, &config.hash(), config.seed);
        Ok(Run {
            dir: dir.to_path_buf(),
            config,
            manifest,
        })
    }

    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| CliError::io(path, e))
    }

    fn write_with<F>(&mut self, name: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> silofed::Result<()>,
    {
        let mut w = self.create(name)?;
        f(&mut w).phase("write")?;
        drop(w);
        self.manifest.record(&self.dir, name)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("serializable");
        let path = self.dir.join(name);
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        self.manifest.record(&self.dir, name)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.record(&self.dir, name)
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce(&mut Self) -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.manifest
            .timings
            .insert(phase.into(), start.elapsed().as_secs_f64());
        Ok(out)
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.manifest.save(&self.dir)
    }
}

/// Filtered, encoded and split data for a config.
pub fn load_split(config: &ExperimentConfig) -> CliResult<(SurveySchema, SplitPartition)> {
    let (schema, table) = match &config.data {
        DataSource::Synthetic(synth) => {
            let schema = synth.schema();
            let rows = generate_synthetic(synth, derive_seed(config.seed, "data", 0)).phase("generate")?;
            (schema.clone(), RawSurveyTable::filter(rows, &schema))
        }
        DataSource::Csv(src) => {
            let schema = SurveySchema::from_json_file(&src.schema).phase("schema")?;
            let table = load_and_filter(&src.path, &schema, src.delimiter as u8).phase("load")?;
            (schema, table)
        }
    };
    if table.report.dropped() > 0 {
        log::info!("dropped {} of {} rows", table.report.dropped(), table.report.dropped() + table.row_count());
    }
    let ds = encode(&table, &schema);
    let split = split_and_partition(&ds, config.train_ratio, derive_seed(config.seed, "split", 0)).phase("split")?;
    Ok((schema, split))
}

pub fn generate_data(run: &mut Run) -> CliResult<()> {
    let DataSource::Synthetic(synth) = run.config.data.clone() else {
        return Err(CliError::Config("generate-data needs a synthetic data source".into()));
    };
    run.timed("generate-data", |run| {
        let rows = generate_synthetic(&synth, derive_seed(run.config.seed, "data", 0)).phase("generate")?;
        let schema = synth.schema();
        run.write_with(DATA_FILE, |w| write_csv(w, &schema, &rows, b','))?;
        run.write_json(SCHEMA_FILE, &schema)?;
        log::info!("wrote {} rows", rows.len());
        Ok(())
    })
}

pub fn train(run: &mut Run, mode: Mode) -> CliResult<()> {
    let (_, split) = load_split(&run.config)?;
    let fed = run.config.federation.clone();
    match mode {
        Mode::Federated => run.timed("train:federated", |run| {
            let out = run_federated(&split, &fed).phase("federated training")?;
            run.write_with(ROUNDS_FILE, |w| write_rounds_csv(w, &out.history))?;
            let last = out.history.last().expect("at least one round");
            run.write_with(SILO_FILE, |w| write_silo_metrics_csv(w, last))?;
            run.write_bytes(MODEL_FILE, &out.params.to_bytes())?;
            let naive = CommLedger::projected(
                CostStrategy::BroadcastAll,
                out.ledger.model_bytes,
                fed.clients_per_round,
                fed.total_clients,
                out.ledger.rounds.len(),
            )
            .summary();
            let actual = out.ledger.summary();
            let reduction = 1.0 - actual.total_bytes as f64 / naive.total_bytes as f64;
            run.write_json(
                LEDGER_FILE,
                &json!({
                    "ledger": actual,
                    "broadcast_all": naive,
                    "reduction_vs_broadcast_all": reduction,
                }),
            )?;
            run.write_json(
                FEDERATED_FILE,
                &json!({
                    "rounds": out.history.len(),
                    "pos_weight": out.pos_weight,
                    "final": last.global,
                }),
            )?;
            Ok(())
        }),
        Mode::Centralized => run.timed("train:centralized", |run| {
            let out = run_centralized(&split, &fed, fed.n_rounds).phase("centralized training")?;
            run.write_with(EPOCHS_FILE, |w| write_epochs_csv(w, &out.history))?;
            run.write_bytes(CENTRAL_MODEL_FILE, &out.params.to_bytes())?;
            run.write_json(
                CENTRAL_FILE,
                &json!({
                    "epochs_run": out.stats.epoch_losses.len(),
                    "best_epoch": out.stats.best_epoch,
                    "stopped_early": out.stats.stopped_early,
                    "pos_weight": out.pos_weight,
                    "final": out.final_metrics,
                    "warnings": out.stats.warnings,
                }),
            )
        }),
        Mode::LocalBaselines => run.timed("train:local-baselines", |run| {
            let out = run_local_baselines(&split, &fed, fed.local_baseline_epochs).phase("local baselines")?;
            run.write_with(LOCAL_FILE, |w| write_local_csv(w, &out))?;
            let degenerate: Vec<u32> = out
                .per_silo
                .iter()
                .filter(|r| r.degenerate_class_weight)
                .map(|r| r.silo)
                .collect();
            for silo in &degenerate {
                log::warn!("silo {silo} lacks a class in its training rows; trained unweighted");
            }
            run.write_json(
                LOCAL_SUMMARY_FILE,
                &json!({
                    "macro_average": out.macro_average,
                    "excluded_from_f1": out.excluded,
                    "degenerate_class_weight": degenerate,
                    "epochs": fed.local_baseline_epochs,
                }),
            )
        }),
    }
}

fn build_structure(run: &Run, split: &SplitPartition) -> CliResult<GroupStructure> {
    let ex = &run.config.explain;
    let ds = &split.test;
    let has_views = ds
        .span(&ex.view_source)
        .map(|(k, _)| ds.spans.iter().any(|s| matches!(&s.derived, Some(d) if d.source == k)))
        .unwrap_or(false);
    let structure = match ex.structure {
        StructureKind::Views => GroupStructure::with_views(ds, &ex.view_source),
        StructureKind::Auto if has_views => GroupStructure::with_views(ds, &ex.view_source),
        _ => GroupStructure::features(ds),
    }
    .phase("structure")?;
    let Some(named) = &ex.blocks else {
        return Ok(structure);
    };
    let mut taken = vec![false; structure.len()];
    let mut blocks = Vec::new();
    for names in named {
        let block = names
            .iter()
            .map(|n| {
                structure
                    .player(n)
                    .ok_or_else(|| CliError::Config(format!("explain.blocks: unknown player {n}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        for &p in &block {
            if std::mem::replace(&mut taken[p], true) {
                return Err(CliError::Config(format!(
                    "explain.blocks: {} appears twice",
                    structure.players[p].name
                )));
            }
        }
        blocks.push(block);
    }
    blocks.extend((0..structure.len()).filter(|&p| !taken[p]).map(|p| vec![p]));
    structure
        .with_blocks(blocks)
        .map_err(|e| CliError::Config(e.to_string()))
}

pub fn explain(run: &mut Run, model: Option<PathBuf>) -> CliResult<()> {
    let (_, split) = load_split(&run.config)?;
    let model_path = model.unwrap_or_else(|| run.dir.join(MODEL_FILE));
    let bytes = std::fs::read(&model_path).map_err(|e| CliError::io(&model_path, e))?;
    let params = ModelParams::from_bytes(&bytes).phase("model")?;
    let expected = run
        .config
        .federation
        .net
        .resolved(split.test.width())
        .map_err(|e| CliError::Config(e.to_string()))?;
    if !params.layout.matches(&expected) {
        return Err(CliError::Phase {
            phase: "model",
            source: silofed::Error::IncompatibleModel(format!(
                "{} holds a {:?} net of width {} x {} blocks over {} inputs; the config expects {:?}, {} x {} over {}",
                model_path.display(),
                params.layout.architecture,
                params.layout.hidden_width,
                params.layout.n_blocks,
                params.layout.input_dim,
                expected.architecture,
                expected.hidden_width,
                expected.n_blocks,
                expected.input_dim
            )),
        });
    }
    let structure = build_structure(run, &split)?;
    let ex = run.config.explain.clone();
    let seed = derive_seed(run.config.seed, "explain", 0);
    run.timed("explain", |run| {
        let background = BackgroundSet::sample(&split.train, ex.background_size, derive_seed(seed, "background", 0))
            .phase("background")?;
        let picked = sample_rows(split.test.len(), ex.instances, derive_seed(seed, "instances", 0));
        let explainer = Explainer::new(&params, &structure, &background).phase("explain")?;
        let atts = explainer
            .explain_rows(&split.test, &picked, ex.method, ex.permutations, seed)
            .phase("explain")?;
        let worst = atts.iter().map(|a| a.efficiency_residual.abs()).fold(0.0, f64::max);
        if !ex.method.is_sampled() && worst > 1e-6 {
            return Err(CliError::Runtime(format!(
                "efficiency residual {worst:e} exceeds 1e-6 for an exact method"
            )));
        }
        let summary = summarize_attributions(&structure, &atts).phase("summary")?;
        let bins: Vec<BinSpec> = match &ex.bins {
            Some(b) => b.clone(),
            None => structure
                .players
                .iter()
                .flat_map(|p| {
                    split.test.spans[p.spans[0]].codes.iter().map(move |&code| BinSpec {
                        player: p.name.clone(),
                        code,
                    })
                })
                .collect(),
        };
        let dists = bin_distributions(&structure, &atts, &split.test, &bins).phase("bins")?;
        run.write_with(ATTRIBUTIONS_FILE, |w| write_attributions_csv(w, &structure, &atts))?;
        run.write_with(SUMMARY_FILE, |w| write_summary_csv(w, &summary))?;
        run.write_with(BINS_FILE, |w| write_bins_csv(w, &dists))?;
        run.write_json(
            EXPLAIN_FILE,
            &json!({
                "method": ex.method,
                "players": structure.names(),
                "blocks": structure.blocks,
                "instances": picked.len(),
                "background_size": background.len(),
                "max_abs_efficiency_residual": worst,
                "bins_without_positives": dists.iter().filter(|d| d.no_positives).map(|d| d.bin.name()).collect::<Vec<_>>(),
            }),
        )
    })
}
