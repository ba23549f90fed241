//! Corpus orchestration: shard I/O, example assembly, per-preset feature
//! preparation, the training driver for both model modes (including sharded
//! carry-over training), model persistence, and split evaluation.

use crate::bureau::{parse_customer, CustomerFile, ParseError, SegmentType};
use crate::labeling::{
    assign_partition, oversample, LabeledExample, LabelingError, Partition, SplitSets, SplitSpec,
};
use crate::lexicon::{self, Vocabulary};
use crate::metrics::{self, MetricsError, MetricsReport, VersionPreset};
use crate::model::{
    self, EpochLog, Mode, ModelConfig, ModelError, ModelInput, ModelParams, SegmentBag, Tensor,
    TrainConfig,
};
use crate::story::{RuleTable, StoryError};
use crate::temporal::{fit_standardizer, Standardizer, TemporalError, TemporalVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const MODEL_FILE_VERSION: &str = "lnv1";
pub const SHARD_SIZE: usize = 1000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}, block starting line {block_line}: {source}")]
    Parse {
        file: String,
        block_line: usize,
        source: ParseError,
    },
    #[error(transparent)]
    Story(#[from] StoryError),
    #[error(transparent)]
    Labeling(#[from] LabelingError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("unknown version preset {0:?}")]
    UnknownVersion(String),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("manifest not found at {0}")]
    MissingManifest(String),
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Split corpus text into customer blocks (CUST.. through END0) and parse each.
pub fn parse_corpus(text: &str, file: &str) -> Result<Vec<CustomerFile>, DatasetError> {
    let mut customers = Vec::new();
    let mut block = String::new();
    let mut block_line = 1usize;
    let mut line_no = 0usize;
    for line in text.lines() {
        line_no += 1;
        if block.is_empty() {
            block_line = line_no;
        }
        block.push_str(line);
        block.push('\n');
        if line.starts_with("END0") {
            let cf = parse_customer(&block).map_err(|source| DatasetError::Parse {
                file: file.to_string(),
                block_line,
                source,
            })?;
            customers.push(cf);
            block.clear();
        }
    }
    if !block.is_empty() {
        let cf = parse_customer(&block).map_err(|source| DatasetError::Parse {
            file: file.to_string(),
            block_line,
            source,
        })?;
        customers.push(cf);
    }
    Ok(customers)
}

/// Read every `*.lnb` shard in a directory (sorted by name) or a single file.
pub fn load_corpus(path: &Path) -> Result<Vec<CustomerFile>, DatasetError> {
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path).map_err(|e| io_err(path, e))? {
            let entry = entry.map_err(|e| io_err(path, e))?;
            let p = entry.path();
            if p.extension().map_or(false, |e| e == "lnb") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut customers = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
        customers.extend(parse_corpus(&text, &file.display().to_string())?);
    }
    Ok(customers)
}

/// Write a corpus as fixed-size shards: corpus-00000.lnb, corpus-00001.lnb, ...
pub fn write_shards(customers: &[CustomerFile], dir: &Path) -> Result<Vec<String>, DatasetError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut names = Vec::new();
    for (i, chunk) in customers.chunks(SHARD_SIZE).enumerate() {
        let name = format!("corpus-{i:05}.lnb");
        let mut text = String::new();
        for cf in chunk {
            text.push_str(&crate::bureau::serialize_customer(cf).map_err(|e| {
                DatasetError::BadModelFile(format!("unserializable customer: {e}"))
            })?);
        }
        let path = dir.join(&name);
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        names.push(name);
    }
    Ok(names)
}

/// Labeled, storyfied, temporally aggregated corpus with split assignments.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub assignments: Vec<Partition>,
    pub spec: SplitSpec,
}

impl Dataset {
    pub fn build(
        customers: &[CustomerFile],
        rules: &RuleTable,
        spec: SplitSpec,
    ) -> Result<Self, DatasetError> {
        let mut examples = Vec::with_capacity(customers.len());
        let mut assignments = Vec::with_capacity(customers.len());
        for cf in customers {
            examples.push(LabeledExample::from_customer(cf, rules)?);
            assignments.push(assign_partition(&cf.customer_id, cf.run_date, &spec));
        }
        Ok(Dataset {
            examples,
            assignments,
            spec,
        })
    }

    pub fn partition(&self, partition: Partition) -> Vec<&LabeledExample> {
        self.examples
            .iter()
            .zip(&self.assignments)
            .filter(|(_, &p)| p == partition)
            .map(|(e, _)| e)
            .collect()
    }

    pub fn manifest(&self) -> Manifest {
        let mut sets = SplitSets::default();
        for (example, &partition) in self.examples.iter().zip(&self.assignments) {
            let bucket = match partition {
                Partition::Train => &mut sets.train,
                Partition::Validation => &mut sets.validation,
                Partition::Holdout => &mut sets.holdout,
                Partition::Oot => &mut sets.oot,
            };
            bucket.push(example.customer_id.clone());
        }
        let mut event_rates = BTreeMap::new();
        let mut unlabeled = 0usize;
        let mut labeled = 0usize;
        let mut positives = 0usize;
        for partition in Partition::ALL {
            let mut p_pos = 0usize;
            let mut p_lab = 0usize;
            for example in self.partition(partition) {
                match example.label {
                    Some(true) => {
                        p_pos += 1;
                        p_lab += 1;
                    }
                    Some(false) => p_lab += 1,
                    None => unlabeled += 1,
                }
            }
            positives += p_pos;
            labeled += p_lab;
            event_rates.insert(
                partition.name().to_string(),
                if p_lab > 0 {
                    p_pos as f64 / p_lab as f64
                } else {
                    0.0
                },
            );
        }
        Manifest {
            seed: self.spec.seed,
            cutoff: self.spec.cutoff,
            fractions: self.spec.fractions,
            partitions: sets,
            labeled_event_rate: if labeled > 0 {
                positives as f64 / labeled as f64
            } else {
                0.0
            },
            unlabeled_count: unlabeled,
            event_rates,
        }
    }
}

/// Persisted split manifest: per-partition customer ids plus the knobs that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub cutoff: chrono::NaiveDate,
    pub fractions: (f64, f64, f64),
    pub partitions: SplitSets,
    pub labeled_event_rate: f64,
    pub unlabeled_count: usize,
    pub event_rates: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        if !path.exists() {
            return Err(DatasetError::MissingManifest(path.display().to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::BadModelFile(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| DatasetError::BadModelFile(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| io_err(path, e))
    }
}

/// Tokenize one example's stories into the three segment bags. Segments with
/// no records feed the `[EMPTY]` token instead of their rendered sentence.
fn bags_for(example: &LabeledExample, vocab: &Vocabulary, domain: bool) -> [SegmentBag; 3] {
    let encode = |text: &str| {
        if domain {
            lexicon::encode(text, vocab)
        } else {
            lexicon::encode_base(text, vocab)
        }
    };
    let mut bags = Vec::with_capacity(3);
    for i in 0..3 {
        let tokens = if example.empty_segments[i] {
            lexicon::encode("", vocab)
        } else {
            encode(&example.stories[i])
        };
        bags.push(SegmentBag::from_tokens(&tokens));
    }
    [bags.remove(0), bags.remove(0), bags.remove(0)]
}

fn build_input(
    example: &LabeledExample,
    vocab: &Vocabulary,
    preset: &VersionPreset,
    standardizer: Option<&Standardizer>,
) -> ModelInput {
    let temporal = match standardizer {
        Some(s) => crate::temporal::apply(s, &example.temporal),
        None => [0.0; crate::temporal::RECORD_VECTOR_LEN],
    };
    ModelInput {
        bags: bags_for(example, vocab, preset.domain_tokenizer),
        temporal,
        label: example.label.unwrap_or(false),
    }
}

/// Labeled model inputs of one partition; unlabeled customers are excluded
/// and counted.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub inputs: Vec<ModelInput>,
    pub ids: Vec<String>,
    pub excluded_unlabeled: usize,
}

fn prepare_split(
    dataset: &Dataset,
    partition: Partition,
    vocab: &Vocabulary,
    preset: &VersionPreset,
    standardizer: Option<&Standardizer>,
) -> PreparedSplit {
    let mut inputs = Vec::new();
    let mut ids = Vec::new();
    let mut excluded = 0usize;
    for example in dataset.partition(partition) {
        if example.label.is_none() {
            excluded += 1;
            continue;
        }
        inputs.push(build_input(example, vocab, preset, standardizer));
        ids.push(example.customer_id.clone());
    }
    PreparedSplit {
        inputs,
        ids,
        excluded_unlabeled: excluded,
    }
}

fn fit_train_standardizer(
    dataset: &Dataset,
    preset: &VersionPreset,
) -> Result<Option<Standardizer>, DatasetError> {
    if !preset.temporal {
        return Ok(None);
    }
    let train_vectors: Vec<TemporalVector> = dataset
        .partition(Partition::Train)
        .iter()
        .filter(|e| e.label.is_some())
        .map(|e| e.temporal)
        .collect();
    Ok(Some(fit_standardizer(&train_vectors)?))
}

/// A trained model with everything needed to score raw customer blocks:
/// preset flags, vocabulary, train-split standardizer and all tensors.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub preset: VersionPreset,
    pub seed: u64,
    pub vocab: Vocabulary,
    pub standardizer: Option<Standardizer>,
    pub parts: Vec<ModelParams>,
}

impl TrainedModel {
    /// Ranking score of one prepared input: the pooled probability, or the
    /// mean segment probability in vote mode.
    pub fn score_input(&self, input: &ModelInput) -> Result<f64, ModelError> {
        match self.preset.mode {
            Mode::Pooled => model::forward(input, &self.parts[0]),
            Mode::PerSegmentVote => model::predict_vote(input, &self.parts).map(|(_, s)| s),
        }
    }

    /// Full-path score of a raw customer: stories, tokens, temporal vector,
    /// standardization, forward pass.
    pub fn score_customer(&self, cf: &CustomerFile) -> Result<f64, DatasetError> {
        let example = LabeledExample::from_customer(cf, &RuleTable::standard())?;
        let input = build_input(
            &example,
            &self.vocab,
            &self.preset,
            self.standardizer.as_ref(),
        );
        Ok(self.score_input(&input)?)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_FILE_VERSION.to_string(),
            preset: self.preset.clone(),
            seed: self.seed,
            vocabulary: self.vocab.entries().to_vec(),
            standardizer: self.standardizer.clone(),
            parts: self.parts.iter().map(part_to_file).collect(),
        };
        serde_json::to_string(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| DatasetError::BadModelFile(e.to_string()))?;
        if file.version != MODEL_FILE_VERSION {
            return Err(DatasetError::BadModelFile(format!(
                "unsupported model file version {:?}",
                file.version
            )));
        }
        let vocab = Vocabulary::from_entries(file.vocabulary);
        let parts = file
            .parts
            .into_iter()
            .map(part_from_file)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TrainedModel {
            preset: file.preset,
            seed: file.seed,
            vocab,
            standardizer: file.standardizer,
            parts,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_json()).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: (usize, usize),
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelPartFile {
    segments: Vec<String>,
    config: ModelConfig,
    vocab_size: usize,
    tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    preset: VersionPreset,
    seed: u64,
    vocabulary: Vec<String>,
    standardizer: Option<Standardizer>,
    parts: Vec<ModelPartFile>,
}

fn part_to_file(params: &ModelParams) -> ModelPartFile {
    let tensors = params
        .tensor_names()
        .into_iter()
        .zip(params.tensors())
        .map(|(name, t)| NamedTensor {
            name,
            shape: (t.rows, t.cols),
            data: t.data.clone(),
        })
        .collect();
    ModelPartFile {
        segments: params.segments.iter().map(|s| s.code().to_string()).collect(),
        config: params.config,
        vocab_size: params.vocab_size,
        tensors,
    }
}

fn part_from_file(file: ModelPartFile) -> Result<ModelParams, DatasetError> {
    let segments: Vec<SegmentType> = file
        .segments
        .iter()
        .map(|code| {
            SegmentType::ALL
                .iter()
                .copied()
                .find(|s| s.code() == code)
                .ok_or_else(|| DatasetError::BadModelFile(format!("unknown segment {code:?}")))
        })
        .collect::<Result<_, _>>()?;
    let mut params = model::init_params(file.config, segments, file.vocab_size, 0);
    let names = params.tensor_names();
    if names.len() != file.tensors.len() {
        return Err(DatasetError::BadModelFile(format!(
            "expected {} tensors, found {}",
            names.len(),
            file.tensors.len()
        )));
    }
    for ((expected_name, slot), tensor) in
        names.iter().zip(params.tensors_mut()).zip(&file.tensors)
    {
        if *expected_name != tensor.name {
            return Err(DatasetError::BadModelFile(format!(
                "tensor {:?} where {expected_name:?} expected",
                tensor.name
            )));
        }
        if (slot.rows, slot.cols) != tensor.shape
            || tensor.data.len() != tensor.shape.0 * tensor.shape.1
        {
            return Err(DatasetError::BadModelFile(format!(
                "tensor {:?} has shape {:?}, expected {:?}",
                tensor.name,
                tensor.shape,
                (slot.rows, slot.cols)
            )));
        }
        *slot = Tensor {
            rows: tensor.shape.0,
            cols: tensor.shape.1,
            data: tensor.data.clone(),
        };
    }
    Ok(params)
}

/// One training phase (a shard pass, or the single full pass) with its
/// per-epoch log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseLog {
    pub phase: String,
    pub epochs: Vec<EpochLog>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub version: String,
    pub seed: u64,
    pub pos_weight: f64,
    pub phases: Vec<PhaseLog>,
}

pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: TrainLog,
}

fn shard_indices(n: usize, shards: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = crate::seeds::substream(seed, "shards");
    order.shuffle(&mut rng);
    order
        .chunks(n.div_ceil(shards))
        .map(|c| c.to_vec())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn train_one_part(
    label: &str,
    segments: Vec<SegmentType>,
    config: ModelConfig,
    vocab_size: usize,
    train_inputs: &[ModelInput],
    validation: &[ModelInput],
    preset: &VersionPreset,
    cfg: &TrainConfig,
    phases: &mut Vec<PhaseLog>,
) -> Result<ModelParams, DatasetError> {
    let mut params = model::init_params(config, segments, vocab_size, cfg.seed);
    if preset.sharded {
        let shards = shard_indices(train_inputs.len(), metrics::TRAIN_SHARDS, cfg.seed);
        for (i, shard) in shards.iter().enumerate() {
            let subset: Vec<ModelInput> = shard.iter().map(|&k| train_inputs[k].clone()).collect();
            // the epoch budget is split across the bucket passes
            let shard_cfg = TrainConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                max_epochs: (cfg.max_epochs / metrics::TRAIN_SHARDS).max(1),
                ..cfg.clone()
            };
            let (next, log) = model::train_from(params, &subset, validation, &shard_cfg)?;
            params = next;
            phases.push(PhaseLog {
                phase: format!("{label} shard {}/{}", i + 1, shards.len()),
                epochs: log,
            });
        }
    } else {
        let (next, log) = model::train_from(params, train_inputs, validation, cfg)?;
        params = next;
        phases.push(PhaseLog {
            phase: label.to_string(),
            epochs: log,
        });
    }
    Ok(params)
}

/// Train one version preset on the dataset's train/validation partitions.
pub fn train_version(
    dataset: &Dataset,
    preset: &VersionPreset,
    seed: u64,
) -> Result<TrainOutcome, DatasetError> {
    let vocab = lexicon::extract_vocabulary(&RuleTable::standard());
    let standardizer = fit_train_standardizer(dataset, preset)?;

    let train_split = prepare_split(dataset, Partition::Train, &vocab, preset, standardizer.as_ref());
    let validation =
        prepare_split(dataset, Partition::Validation, &vocab, preset, standardizer.as_ref());

    let train_inputs = oversample(
        &train_split.inputs,
        |input: &ModelInput| input.label,
        preset.oversample,
        seed,
    )?;

    let pos_weight =
        model::LossWeights::from_labels(train_inputs.iter().map(|i| i.label)).positive;
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let config = ModelConfig {
        embed_dim: model::DEFAULT_EMBED_DIM,
        hidden: preset.head,
        temporal: preset.temporal,
        mode: preset.mode,
    };

    let mut phases = Vec::new();
    let parts = match preset.mode {
        Mode::Pooled => vec![train_one_part(
            "full",
            SegmentType::ALL.to_vec(),
            config,
            vocab.size(),
            &train_inputs,
            &validation.inputs,
            preset,
            &cfg,
            &mut phases,
        )?],
        Mode::PerSegmentVote => {
            let mut parts = Vec::with_capacity(3);
            for (i, segment) in SegmentType::ALL.iter().enumerate() {
                let part_cfg = TrainConfig {
                    seed: seed.wrapping_add(1000 * (i as u64 + 1)),
                    ..cfg.clone()
                };
                parts.push(train_one_part(
                    segment.code(),
                    vec![*segment],
                    config,
                    vocab.size(),
                    &train_inputs,
                    &validation.inputs,
                    preset,
                    &part_cfg,
                    &mut phases,
                )?);
            }
            parts
        }
    };

    Ok(TrainOutcome {
        model: TrainedModel {
            preset: preset.clone(),
            seed,
            vocab,
            standardizer,
            parts,
        },
        log: TrainLog {
            version: preset.id.clone(),
            seed,
            pos_weight,
            phases,
        },
    })
}

/// Score one split and compute its metrics report; PSI is measured against
/// the model's train-split score deciles.
pub fn evaluate(
    model: &TrainedModel,
    dataset: &Dataset,
    split: Partition,
) -> Result<MetricsReport, DatasetError> {
    let split_data = prepare_split(
        dataset,
        split,
        &model.vocab,
        &model.preset,
        model.standardizer.as_ref(),
    );
    let scores: Vec<f64> = split_data
        .inputs
        .iter()
        .map(|i| model.score_input(i))
        .collect::<Result<_, _>>()?;
    let labels: Vec<bool> = split_data.inputs.iter().map(|i| i.label).collect();

    let train_data = prepare_split(
        dataset,
        Partition::Train,
        &model.vocab,
        &model.preset,
        model.standardizer.as_ref(),
    );
    let train_scores: Vec<f64> = train_data
        .inputs
        .iter()
        .map(|i| model.score_input(i))
        .collect::<Result<_, _>>()?;

    Ok(metrics::report(
        &scores,
        &labels,
        split_data.excluded_unlabeled,
        Some(&train_scores),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::preset;
    use crate::synthgen::{generate, GeneratorConfig};
    use chrono::NaiveDate;

    fn small_corpus(n: usize, seed: u64) -> Vec<CustomerFile> {
        generate(&GeneratorConfig {
            n_customers: n,
            seed,
            ..GeneratorConfig::default()
        })
        .unwrap()
        .customers
    }

    fn spec() -> SplitSpec {
        SplitSpec::new(NaiveDate::from_ymd_opt(2018, 2, 1).unwrap(), 42)
    }

    #[test]
    fn corpus_blocks_round_trip_through_shards() {
        let customers = small_corpus(120, 3);
        let dir = tempfile::tempdir().unwrap();
        let names = write_shards(&customers, dir.path()).unwrap();
        assert_eq!(names.len(), 1);
        let loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded, customers);
    }

    #[test]
    fn manifest_partitions_are_disjoint_and_exhaustive() {
        let customers = small_corpus(400, 9);
        let dataset = Dataset::build(&customers, &RuleTable::standard(), spec()).unwrap();
        let manifest = dataset.manifest();
        let total = manifest.partitions.total();
        assert_eq!(total, customers.len());
        let mut all_ids: Vec<&String> = Partition::ALL
            .iter()
            .flat_map(|&p| manifest.partitions.of(p).iter())
            .collect();
        all_ids.sort();
        all_ids.dedup();
        assert_eq!(all_ids.len(), customers.len());
    }

    #[test]
    fn pooled_training_runs_and_scores() {
        let customers = small_corpus(2000, 5);
        let dataset = Dataset::build(&customers, &RuleTable::standard(), spec()).unwrap();
        let preset = preset("v6").unwrap();
        let outcome = train_version(&dataset, &preset, 7).unwrap();
        assert_eq!(outcome.model.parts.len(), 1);
        assert!(outcome.model.standardizer.is_some());
        let report = evaluate(&outcome.model, &dataset, Partition::Holdout).unwrap();
        assert!(report.auc > 0.4, "auc {}", report.auc);
        assert!(report.psi.is_some());
        // evaluating the train split against itself has zero drift
        let train_report = evaluate(&outcome.model, &dataset, Partition::Train).unwrap();
        assert_eq!(train_report.psi, Some(0.0));
    }

    #[test]
    fn vote_training_produces_three_parts_and_shard_phases() {
        let customers = small_corpus(2000, 6);
        let dataset = Dataset::build(&customers, &RuleTable::standard(), spec()).unwrap();
        let preset = preset("v1").unwrap();
        let outcome = train_version(&dataset, &preset, 8).unwrap();
        assert_eq!(outcome.model.parts.len(), 3);
        // three segments x four shards
        assert_eq!(outcome.log.phases.len(), 3 * metrics::TRAIN_SHARDS);
        assert!(outcome.log.phases[0].phase.contains("shard 1/4"));
        let report = evaluate(&outcome.model, &dataset, Partition::Holdout).unwrap();
        assert!(report.auc > 0.3);
    }

    #[test]
    fn model_json_round_trips_bitwise() {
        let customers = small_corpus(1500, 4);
        let dataset = Dataset::build(&customers, &RuleTable::standard(), spec()).unwrap();
        let outcome = train_version(&dataset, &preset("v5").unwrap(), 3).unwrap();
        let json = outcome.model.to_json();
        let reloaded = TrainedModel::from_json(&json).unwrap();
        assert_eq!(reloaded.to_json(), json);
        // identical scores on a raw customer
        let cf = &customers[0];
        assert_eq!(
            outcome.model.score_customer(cf).unwrap().to_bits(),
            reloaded.score_customer(cf).unwrap().to_bits()
        );
    }

    #[test]
    fn training_twice_with_same_seed_is_bitwise_identical() {
        let customers = small_corpus(1500, 10);
        let dataset = Dataset::build(&customers, &RuleTable::standard(), spec()).unwrap();
        let a = train_version(&dataset, &preset("v5").unwrap(), 12).unwrap();
        let b = train_version(&dataset, &preset("v5").unwrap(), 12).unwrap();
        assert_eq!(a.model.to_json(), b.model.to_json());
    }

    #[test]
    fn missing_manifest_is_a_distinct_error() {
        let err = Manifest::load(Path::new("/nonexistent/manifest.json")).unwrap_err();
        assert!(matches!(err, DatasetError::MissingManifest(p) if p.contains("nonexistent")));
    }
}
