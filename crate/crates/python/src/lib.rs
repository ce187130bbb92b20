//! Python bindings: normalization, the trigram model, segmentation, rules,
//! dataset generation, the prototype baseline and metrics.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use titlemeta::embeddings::EmbeddingTable;
use titlemeta::ngram_lm::TrainOptions;
use titlemeta::rule_engine::{self, RetentionMode, RuleSampling};
use titlemeta::segment_mapper;
use titlemeta::task_dataset::{self, MetaConfig};
use titlemeta::{metrics, protonet, segmenter, text_norm, LabelVector, TokenSequence};

fn err(e: titlemeta::Error) -> PyErr {
    match e {
        titlemeta::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn labels(bits: Vec<u8>) -> PyResult<LabelVector> {
    LabelVector::new(bits).map_err(err)
}

fn seq(tokens: Vec<String>) -> PyResult<TokenSequence> {
    TokenSequence::from_tokens(tokens).map_err(err)
}

fn modes(names: Option<Vec<String>>) -> PyResult<Vec<RetentionMode>> {
    match names {
        None => Ok(RetentionMode::EVERY.to_vec()),
        Some(ns) => ns.iter().map(|m| RetentionMode::parse(m).map_err(err)).collect(),
    }
}

/// Lowercased tokens of a raw title.
#[pyfunction]
fn normalize(raw: &str) -> PyResult<Vec<String>> {
    text_norm::normalize(raw).map(|t| t.tokens).map_err(err)
}

#[pyfunction]
fn render(tokens: Vec<String>, labels_: Vec<u8>) -> PyResult<String> {
    text_norm::render(&seq(tokens)?, &labels(labels_)?).map_err(err)
}

#[pyclass(name = "MknModel", frozen)]
struct PyMknModel(titlemeta::MknModel);

#[pymethods]
impl PyMknModel {
    /// Trains on raw query strings (normalized here).
    #[staticmethod]
    #[pyo3(signature = (queries, unk_singletons = false))]
    fn train(queries: Vec<String>, unk_singletons: bool) -> PyResult<Self> {
        let corpus = queries
            .iter()
            .map(|q| text_norm::normalize(q))
            .collect::<titlemeta::Result<Vec<_>>>()
            .map_err(err)?;
        titlemeta::MknModel::train(&corpus, TrainOptions { unk_singletons })
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        titlemeta::MknModel::load(path).map(Self).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    #[pyo3(signature = (word, context = Vec::new()))]
    fn prob(&self, word: &str, context: Vec<String>) -> f64 {
        self.0.prob(word, &context)
    }

    fn sequence_prob(&self, tokens: Vec<String>) -> PyResult<f64> {
        self.0.sequence_prob(&tokens).map_err(err)
    }

    fn length_normalized_score(&self, tokens: Vec<String>, alpha: f64) -> PyResult<f64> {
        self.0.length_normalized_score(&tokens, alpha).map_err(err)
    }

    /// `(d1, d2, d3plus)` for unigram, bigram and trigram orders.
    fn discounts(&self) -> Vec<(f64, f64, f64)> {
        self.0.discounts().iter().map(|d| (d.d1, d.d2, d.d3plus)).collect()
    }

    fn vocab(&self) -> Vec<String> {
        self.0.vocab().tokens().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.vocab().len()
    }
}

#[pyclass(name = "EmbeddingTable", frozen)]
struct PyEmbeddingTable(EmbeddingTable);

#[pymethods]
impl PyEmbeddingTable {
    /// `"hashed"`, `"hashed:<dim>:<seed>"` or a path to a text table.
    #[new]
    #[pyo3(signature = (spec = "hashed"))]
    fn new(spec: &str) -> PyResult<Self> {
        EmbeddingTable::from_spec(spec).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn vector(&self, token: &str) -> Vec<f64> {
        self.0.vector(token)
    }
}

#[pyfunction]
fn segment(model: &PyMknModel, tokens: Vec<String>, alpha: f64, t: f64) -> PyResult<Vec<usize>> {
    segmenter::segment(&model.0, &tokens, alpha, t)
        .map(|s| s.ids)
        .map_err(err)
}

#[pyfunction]
fn boundary_scores(model: &PyMknModel, tokens: Vec<String>, alpha: f64) -> Vec<f64> {
    segmenter::boundary_scores(&model.0, &tokens, alpha)
}

/// Bucket label per token under freshly sampled mapping parameters.
#[pyfunction]
#[pyo3(signature = (model, table, tokens, alpha, t, buckets, seed))]
fn map_segments(
    model: &PyMknModel,
    table: &PyEmbeddingTable,
    tokens: Vec<String>,
    alpha: f64,
    t: f64,
    buckets: usize,
    seed: u64,
) -> PyResult<Vec<usize>> {
    let seg = segmenter::segment(&model.0, &tokens, alpha, t).map_err(err)?;
    let params = segment_mapper::sample_mapping_params(table.0.dim(), buckets, (alpha, alpha), seed).map_err(err)?;
    segment_mapper::map_segments(&tokens, &seg, &model.0, &table.0, &params)
        .map(|m| m.labels)
        .map_err(err)
}

#[pyclass(name = "CompressionRule", frozen)]
struct PyRule(rule_engine::CompressionRule);

#[pymethods]
impl PyRule {
    #[staticmethod]
    #[pyo3(signature = (category, seed, dim, buckets, alpha_range, t_range, modes = None))]
    fn sample(
        category: &str,
        seed: u64,
        dim: usize,
        buckets: usize,
        alpha_range: (f64, f64),
        t_range: (f64, f64),
        modes: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let cfg = RuleSampling {
            dim,
            buckets,
            alpha_range,
            t_range,
            modes: self::modes(modes)?,
        };
        rule_engine::sample_rule(category, seed, &cfg).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        rule_engine::CompressionRule::from_json(s).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn apply(&self, model: &PyMknModel, table: &PyEmbeddingTable, tokens: Vec<String>) -> PyResult<Vec<u8>> {
        rule_engine::apply_rule(&self.0, &seq(tokens)?, &model.0, &table.0)
            .map(LabelVector::into_inner)
            .map_err(err)
    }

    fn transfer(
        &self,
        model: &PyMknModel,
        table: &PyEmbeddingTable,
        example: Vec<String>,
        test: Vec<String>,
    ) -> PyResult<(Vec<u8>, Vec<u8>)> {
        let (a, b) = rule_engine::transfer_rule(&self.0, &seq(example)?, &seq(test)?, &model.0, &table.0)
            .map_err(err)?;
        Ok((a.into_inner(), b.into_inner()))
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn category(&self) -> String {
        self.0.category.clone()
    }
}

/// Meta rows as JSON strings, from `(title, category)` pairs.
#[pyfunction]
#[pyo3(signature = (model, table, products, pairs, rules_per_pair, seed, buckets = 12, alpha_range = (-1.0, 1.0), t_range = None, modes = None))]
#[allow(clippy::too_many_arguments)]
fn generate_meta_dataset(
    model: &PyMknModel,
    table: &PyEmbeddingTable,
    products: Vec<(String, String)>,
    pairs: usize,
    rules_per_pair: usize,
    seed: u64,
    buckets: usize,
    alpha_range: (f64, f64),
    t_range: Option<(f64, f64)>,
    modes: Option<Vec<String>>,
) -> PyResult<Vec<String>> {
    let rows: Vec<task_dataset::ProductRow> = products
        .into_iter()
        .map(|(title, category)| task_dataset::ProductRow { title, category })
        .collect();
    let groups: BTreeMap<String, Vec<TokenSequence>> = task_dataset::group_products(&rows).map_err(err)?;
    let t_range = t_range.unwrap_or_else(|| {
        let all: Vec<&TokenSequence> = groups.values().flatten().collect();
        task_dataset::empirical_threshold_range(&model.0, &all, alpha_range, (5.0, 95.0))
    });
    let cfg = MetaConfig {
        n_pairs: pairs,
        rules_per_pair,
        seed,
        sampling: RuleSampling {
            dim: table.0.dim(),
            buckets,
            alpha_range,
            t_range,
            modes: self::modes(modes)?,
        },
        reject_all_ones: false,
    };
    let (rows, _) = task_dataset::generate_meta_dataset(&groups, &cfg, &model.0, &table.0).map_err(err)?;
    rows.iter()
        .map(|r| serde_json::to_string(r).map_err(|e| PyValueError::new_err(e.to_string())))
        .collect()
}

/// Predicted test labels and class-1 probabilities for one episode.
#[pyfunction]
fn protonet_predict(
    table: &PyEmbeddingTable,
    x_ex: Vec<String>,
    y_ex: Vec<u8>,
    x_ts: Vec<String>,
) -> PyResult<(Vec<u8>, Vec<f64>)> {
    let (y, p) = protonet::predict_episode(&table.0, &x_ex, &labels(y_ex)?, &x_ts).map_err(err)?;
    Ok((y.into_inner(), p))
}

/// Micro precision / recall / F1 on class 1 and exact-match percentage.
#[pyfunction]
fn evaluate(gold: Vec<Vec<u8>>, pred: Vec<Vec<u8>>) -> PyResult<BTreeMap<&'static str, f64>> {
    let g = gold.into_iter().map(labels).collect::<PyResult<Vec<_>>>()?;
    let p = pred.into_iter().map(labels).collect::<PyResult<Vec<_>>>()?;
    let r = metrics::evaluate(&g, &p).map_err(err)?;
    Ok(BTreeMap::from([
        ("precision", r.precision),
        ("recall", r.recall),
        ("f1", r.f1),
        ("em", r.em),
        ("n", r.n as f64),
    ]))
}

#[pymodule]
fn titlemeta_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMknModel>()?;
    m.add_class::<PyEmbeddingTable>()?;
    m.add_class::<PyRule>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_scores, m)?)?;
    m.add_function(wrap_pyfunction!(map_segments, m)?)?;
    m.add_function(wrap_pyfunction!(generate_meta_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(protonet_predict, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
