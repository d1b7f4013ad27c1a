//! End-to-end experiment: load data, corrupt the test split, classify every
//! query and, for sweeps, keep the best hyperparameter triple.

use std::time::Instant;

use qmr_core::dataio::{corrupt, load_image_native, procedural_patch, synth_dataset, DatasetManifest};
use qmr_core::{
    BlockSource, ClassificationResult, CorruptionRecipe, LabeledDictionary, LabeledImage, NqmrClassifier,
    QuaternionMatrix, RnqmrClassifier, RnqmrConfig, RnqmrSolver,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BlockFill, DataSource, ExperimentConfig, Solver};
use crate::error::{CliError, Result};
use crate::report;

/// Side length of the built-in occluder before it is resized to the block.
const PATCH_SIDE: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryRecord {
    pub query_id: usize,
    pub true_class: usize,
    pub predicted_class: usize,
    pub correct: bool,
    pub iterations: usize,
    pub per_class_error: Vec<f64>,
    #[serde(skip)]
    pub wall_time_ms: f64,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Params {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(flatten)]
    pub params: Params,
    pub correct: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Clone, Debug)]
pub struct ResultsRecord {
    pub config: ExperimentConfig,
    /// Queries of the reported run (the best grid point for sweeps),
    /// ordered by id.
    pub queries: Vec<QueryRecord>,
    /// Rate of every grid point, in grid order. Empty for nqmr.
    pub sweep: Vec<SweepPoint>,
    pub best: Option<Params>,
}

impl ResultsRecord {
    pub fn total(&self) -> usize {
        self.queries.len()
    }

    pub fn correct(&self) -> usize {
        self.queries.iter().filter(|q| q.correct).count()
    }

    pub fn rate(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }
}

/// Training dictionary and clean test queries.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(LabeledDictionary, Vec<LabeledImage>)> {
    match cfg.data_source()? {
        DataSource::Manifest { path, size } => Ok(DatasetManifest::read(&path, size)?.load()?),
        DataSource::Synth(spec) => {
            let data = synth_dataset(&spec)?;
            Ok((data.train, data.test))
        }
    }
}

pub fn corruption_recipe(cfg: &ExperimentConfig) -> Result<CorruptionRecipe> {
    let block_source = match (cfg.block_source, &cfg.patch) {
        (BlockFill::Noise, _) => BlockSource::Noise,
        (BlockFill::Patch, None) => BlockSource::Patch(procedural_patch(PATCH_SIDE, PATCH_SIDE)),
        (BlockFill::Patch, Some(path)) => BlockSource::Patch(load_image_native(path)?),
    };
    let recipe = CorruptionRecipe {
        block_fraction: cfg.block_fraction,
        block_source,
        sp_probability: cfg.sp_probability,
        gaussian_variance: cfg.gaussian_variance,
        seed: cfg.seed,
    };
    recipe.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(recipe)
}

/// Query `i` is corrupted with its own generator stream, so the result does
/// not depend on thread count or order.
pub fn corrupt_queries(test: &[LabeledImage], recipe: &CorruptionRecipe) -> Vec<LabeledImage> {
    if recipe.is_clean() {
        return test.to_vec();
    }
    test.iter()
        .enumerate()
        .map(|(i, q)| LabeledImage {
            image: corrupt(&q.image, recipe, &mut recipe.rng_for(i as u64)),
            class: q.class,
        })
        .collect()
}

fn record(query_id: usize, true_class: usize, res: ClassificationResult, wall_time_ms: f64) -> QueryRecord {
    QueryRecord {
        query_id,
        true_class,
        predicted_class: res.predicted,
        correct: res.predicted == true_class,
        iterations: res.iterations,
        per_class_error: res.per_class_error,
        wall_time_ms,
        trace: res.trace,
    }
}

fn classify_all<F>(pool: &rayon::ThreadPool, queries: &[LabeledImage], classify: F) -> Result<Vec<QueryRecord>>
where
    F: Fn(&QuaternionMatrix) -> qmr_core::Result<ClassificationResult> + Sync,
{
    pool.install(|| {
        queries
            .par_iter()
            .enumerate()
            .map(|(i, q)| {
                let start = Instant::now();
                let res = classify(&q.image)?;
                Ok(record(i, q.class, res, start.elapsed().as_secs_f64() * 1e3))
            })
            .collect()
    })
}

/// Runs the experiment without writing anything.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<ResultsRecord> {
    cfg.validate()?;
    let recipe = corruption_recipe(cfg)?;
    let (train, test) = load_data(cfg)?;
    if test.is_empty() {
        return Err(CliError::Runtime(
            "test split is empty; recognition rate is undefined".into(),
        ));
    }
    let queries = corrupt_queries(&test, &recipe);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;

    match cfg.solver {
        Solver::Nqmr => {
            let classifier = NqmrClassifier::new(&train, cfg.nqmr_config())?;
            let records = classify_all(&pool, &queries, |b| classifier.classify(b))?;
            Ok(ResultsRecord {
                config: cfg.clone(),
                queries: records,
                sweep: Vec::new(),
                best: None,
            })
        }
        Solver::Rnqmr => {
            let base = cfg.rnqmr_config();
            let ridge = train.dictionary().ridge_system(base.eta / base.mu)?;
            let mut sweep = Vec::new();
            let mut best: Option<(Params, Vec<QueryRecord>)> = None;
            for (omega, alpha, beta) in cfg.grid() {
                let rc = RnqmrConfig {
                    omega,
                    alpha,
                    beta,
                    ..base
                };
                rc.validate()?;
                let solver = RnqmrSolver::with_ridge(train.dictionary(), ridge.clone(), rc);
                let classifier = RnqmrClassifier::from_solver(&train, solver, cfg.weights.into());
                let records = classify_all(&pool, &queries, |b| classifier.classify(b))?;
                let correct = records.iter().filter(|r| r.correct).count();
                let params = Params { omega, alpha, beta };
                sweep.push(SweepPoint {
                    params,
                    correct,
                    total: records.len(),
                    rate: correct as f64 / records.len() as f64,
                });
                let better = best
                    .as_ref()
                    .is_none_or(|(_, b)| correct > b.iter().filter(|r| r.correct).count());
                if better {
                    best = Some((params, records));
                }
            }
            let (params, records) = best.expect("grid is nonempty");
            Ok(ResultsRecord {
                config: cfg.clone(),
                queries: records,
                sweep: if cfg.is_sweep() { sweep } else { Vec::new() },
                best: Some(params),
            })
        }
    }
}

/// Runs the experiment and writes its reports to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsRecord> {
    let results = evaluate(cfg)?;
    report::write_all(&results, &cfg.out)?;
    Ok(results)
}
