use std::path::PathBuf;

use hatelab_core::annotation::{self, Decision};
use hatelab_core::corpus::{self, CleanPost, CleanResources, PipelineConfig, RawPost};
use hatelab_core::encoding;
use hatelab_core::lexicon::{self, Lexicon as CoreLexicon, Matcher};
use hatelab_core::models::{self, Dataset, Example, ModelArtifact, ModelInput, ModelSpec, ModelType};
use hatelab_core::review::{self, ReviewItem, Strategy};
use hatelab_core::segment::{self, Dictionary};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hands a serde value to Python as plain dicts and lists.
fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&s).map_err(value_err)
}

fn decisions(xs: Vec<String>) -> PyResult<Vec<Decision>> {
    xs.iter().map(|s| s.parse().map_err(value_err)).collect()
}

#[pyfunction]
fn detect_encoding<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &encoding::detect_encoding(text))
}

#[pyfunction]
fn zawgyi_to_unicode(text: &str) -> String {
    encoding::zawgyi_to_unicode(text)
}

/// Returns (text, was_zawgyi).
#[pyfunction]
#[pyo3(signature = (text, threshold = 0.5))]
fn normalize(text: &str, threshold: f64) -> PyResult<(String, bool)> {
    encoding::normalize(text, threshold).map_err(value_err)
}

#[pyfunction]
fn segment_syllables<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &segment::segment_syllables(text).map_err(value_err)?)
}

/// Word tokens from the built-in dictionary, or from `words` when given.
#[pyfunction]
#[pyo3(signature = (text, words = None))]
fn segment_words(text: &str, words: Option<Vec<String>>) -> PyResult<Vec<String>> {
    let syllables = segment::segment_syllables(text).map_err(value_err)?;
    let owned;
    let dict = match &words {
        Some(w) => {
            owned = Dictionary::from_words(w.iter().map(String::as_str));
            &owned
        }
        None => Dictionary::builtin(),
    };
    Ok(segment::segment_words(&syllables, dict).into_iter().map(|t| t.text).collect())
}

#[pyfunction]
fn strip_emoji(text: &str) -> String {
    segment::strip_emoji(text)
}

#[pyfunction]
fn percent_agreement(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    annotation::percent_agreement_decisions(&decisions(a)?, &decisions(b)?).map_err(value_err)
}

#[pyfunction]
fn cohen_kappa(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    annotation::cohen_kappa_decisions(&decisions(a)?, &decisions(b)?).map_err(value_err)
}

/// One row per item, one decision per rater.
#[pyfunction]
fn fleiss_kappa(rows: Vec<Vec<String>>) -> PyResult<f64> {
    let matrix = rows.into_iter().map(decisions).collect::<PyResult<Vec<_>>>()?;
    annotation::fleiss_kappa(&matrix).map_err(value_err)
}

#[pyclass(module = "hatelab")]
struct Lexicon {
    inner: CoreLexicon,
    matcher: Matcher,
}

impl Lexicon {
    fn wrap(inner: CoreLexicon) -> Self {
        let matcher = lexicon::build_matcher(&inner);
        Lexicon { inner, matcher }
    }
}

#[pymethods]
impl Lexicon {
    /// Parses `term<TAB>note` lines.
    #[new]
    #[pyo3(signature = (src, source = "lexicon"))]
    fn new(src: &str, source: &str) -> Self {
        Lexicon::wrap(CoreLexicon::parse(src, source))
    }

    #[staticmethod]
    #[pyo3(signature = (path, source = None))]
    fn load(path: PathBuf, source: Option<&str>) -> PyResult<Self> {
        let tag = source.map(str::to_owned).unwrap_or_else(|| path.display().to_string());
        lexicon::load_lexicon(&path, &tag).map(Lexicon::wrap).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn terms(&self) -> Vec<String> {
        self.inner.terms.iter().map(|t| t.term.clone()).collect()
    }

    /// Returns (merged, report).
    fn merge<'py>(&self, py: Python<'py>, other: &Lexicon) -> PyResult<(Lexicon, Bound<'py, PyAny>)> {
        let (merged, report) = lexicon::merge_lexicons(&self.inner, &other.inner);
        Ok((Lexicon::wrap(merged), to_py(py, &report)?))
    }

    fn exclude(&self, terms: Vec<String>) -> Lexicon {
        Lexicon::wrap(self.inner.exclude(terms.iter().map(String::as_str)))
    }

    #[pyo3(signature = (text, post_id = ""))]
    fn match_terms<'py>(&self, py: Python<'py>, text: &str, post_id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.matcher.match_terms(text, post_id))
    }

    fn to_tsv(&self) -> String {
        self.inner.to_tsv()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Lexicon({} terms)", self.inner.len())
    }
}

/// Runs the cleaning pipeline over raw post dicts with the built-in
/// dictionary, stoplist and converter. Returns (posts, report).
#[pyfunction]
#[pyo3(signature = (posts, lexicon, seed, min_syllables = None))]
fn clean_posts<'py>(
    py: Python<'py>,
    posts: &Bound<'py, PyAny>,
    lexicon: &Lexicon,
    seed: u64,
    min_syllables: Option<usize>,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let raw: Vec<RawPost> = from_py(py, posts)?;
    let mut config = PipelineConfig::with_seed(seed);
    if let Some(m) = min_syllables {
        config.min_syllables = m;
    }
    let res = CleanResources::with_matcher(lexicon.matcher.clone());
    let (clean, report) = corpus::clean_pipeline(raw, &config, &res).map_err(value_err)?;
    Ok((to_py(py, &clean)?, to_py(py, &report)?))
}

#[pyfunction]
fn read_corpus<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &corpus::read_jsonl(path).map_err(|e| PyIOError::new_err(e.to_string()))?)
}

fn dataset(examples: Vec<(String, Vec<String>, bool)>) -> Dataset {
    Dataset::new(
        examples
            .into_iter()
            .map(|(post_id, tokens, label)| Example { post_id, tokens, label })
            .collect(),
    )
}

fn spec_of(py: Python<'_>, model_type: &str, spec: Option<&Bound<'_, PyAny>>) -> PyResult<ModelSpec> {
    match spec {
        Some(s) => from_py(py, s),
        None => Ok(ModelSpec::default_for(model_type.parse::<ModelType>().map_err(value_err)?)),
    }
}

#[pyclass(module = "hatelab")]
struct Model {
    inner: ModelArtifact,
}

#[pymethods]
impl Model {
    /// Trains on (post_id, tokens, is_hate) triples. `spec` is a model spec
    /// dict; without it the default spec of `model_type` is used.
    #[staticmethod]
    #[pyo3(signature = (examples, model_type = "svm", seed = 0, oversample = false, spec = None))]
    fn train(
        py: Python<'_>,
        examples: Vec<(String, Vec<String>, bool)>,
        model_type: &str,
        seed: u64,
        oversample: bool,
        spec: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Model> {
        let spec = spec_of(py, model_type, spec)?;
        let mut data = dataset(examples);
        if oversample {
            data = models::random_oversample(&data, seed).map_err(value_err)?;
        }
        let inner = py.detach(|| models::train(&spec, &data, seed)).map_err(value_err)?;
        Ok(Model { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        ModelArtifact::load(path).map(|inner| Model { inner }).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Model> {
        ModelArtifact::from_json(s).map(|inner| Model { inner }).map_err(value_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn model_type(&self) -> String {
        self.inner.model_type.to_string()
    }

    /// Hate score in [0, 1].
    fn score(&self, tokens: Vec<String>) -> PyResult<f64> {
        self.inner.score(ModelInput::Tokens(&tokens)).map_err(value_err)
    }

    /// Returns (is_hate, score).
    fn predict(&self, tokens: Vec<String>) -> (bool, f64) {
        self.inner.predict_tokens(&tokens)
    }

    /// Review items for cleaned post dicts.
    fn infer<'py>(&self, py: Python<'py>, posts: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let posts: Vec<CleanPost> = from_py(py, posts)?;
        to_py(py, &review::infer_batch(&self.inner, &posts).map_err(value_err)?)
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.inner.model_type)
    }
}

/// Stratified k-fold report for (post_id, tokens, is_hate) triples.
#[pyfunction]
#[pyo3(signature = (examples, model_type = "svm", k = 5, seed = 0, oversample = false, spec = None))]
fn cross_validate<'py>(
    py: Python<'py>,
    examples: Vec<(String, Vec<String>, bool)>,
    model_type: &str,
    k: usize,
    seed: u64,
    oversample: bool,
    spec: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = spec_of(py, model_type, spec)?;
    let data = dataset(examples);
    let report = py.detach(|| models::cross_validate(&data, &spec, k, seed, oversample)).map_err(value_err)?;
    to_py(py, &report)
}

#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    predictions: Vec<(String, bool)>,
    gold: Vec<(String, bool)>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &models::evaluate(&predictions, &gold).map_err(value_err)?)
}

#[pyfunction]
#[pyo3(signature = (items, n, strategy = "uncertainty", seed = 0))]
fn sample_for_review<'py>(
    py: Python<'py>,
    items: &Bound<'py, PyAny>,
    n: usize,
    strategy: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let items: Vec<ReviewItem> = from_py(py, items)?;
    let strategy: Strategy = strategy.parse().map_err(value_err)?;
    to_py(py, &review::sample_for_review(&items, strategy, n, seed).map_err(value_err)?)
}

#[pyfunction]
fn disagreement_report<'py>(py: Python<'py>, items: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let items: Vec<ReviewItem> = from_py(py, items)?;
    to_py(py, &review::disagreement_report(&items).map_err(value_err)?)
}

#[pymodule]
fn hatelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lexicon>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(detect_encoding, m)?)?;
    m.add_function(wrap_pyfunction!(zawgyi_to_unicode, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(segment_syllables, m)?)?;
    m.add_function(wrap_pyfunction!(segment_words, m)?)?;
    m.add_function(wrap_pyfunction!(strip_emoji, m)?)?;
    m.add_function(wrap_pyfunction!(percent_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(cohen_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(fleiss_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(clean_posts, m)?)?;
    m.add_function(wrap_pyfunction!(read_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(sample_for_review, m)?)?;
    m.add_function(wrap_pyfunction!(disagreement_report, m)?)?;
    Ok(())
}
