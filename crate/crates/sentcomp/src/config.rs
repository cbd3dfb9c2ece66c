//! Run configuration: one TOML file, optionally overridden from the command line.
//!
//! Relative paths in the file resolve against the file's directory; paths given as flags
//! resolve against the working directory. Precedence is flags, then file, then defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sentcomp_core::metrics::{ReferenceAggregation, ReportConfig, RougeMode, ScoreOptions};
use sentcomp_core::postprocess::ExtractionConfig;
use sentcomp_core::templating::Prompting;
use sentcomp_core::{CorpusFormat, InstructionTemplate, LengthPolicy, Origin, Split, TemplateName};

use crate::backend::{DecodingParams, HttpConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub skip_failures: bool,
    pub corpus: CorpusSection,
    pub template: TemplateSection,
    pub length: LengthSection,
    pub backend: BackendSection,
    pub extraction: ExtractionSection,
    pub scoring: ScoringSection,
    pub labels: LabelSection,
    /// Directory that relative paths in the file resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            parallelism: 1,
            output_dir: "out".into(),
            skip_failures: false,
            corpus: CorpusSection::default(),
            template: TemplateSection::default(),
            length: LengthSection::default(),
            backend: BackendSection::default(),
            extraction: ExtractionSection::default(),
            scoring: ScoringSection::default(),
            labels: LabelSection::default(),
            base_dir: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    pub format: CorpusFormat,
    /// Dataset name in reports; defaults to the file stem.
    pub name: Option<String>,
    pub split: Split,
    pub origin: Origin,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            format: CorpusFormat::LabeledTsv,
            name: None,
            split: Split::Test,
            origin: Origin::Custom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSection {
    /// A built-in name such as `priming#3`, or `custom` together with `file`.
    pub name: String,
    pub file: Option<PathBuf>,
    /// `none`, `chain-of-thought`, `tree-of-thought` or `custom` (uses `prefix`).
    pub prompting: String,
    pub prefix: Option<String>,
}

impl Default for TemplateSection {
    fn default() -> Self {
        Self { name: TemplateName::Priming.as_str().into(), file: None, prompting: "none".into(), prefix: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LengthSection {
    /// `gold`, `none`, `ratio:<r>` or `fixed:<k>`.
    pub policy: String,
}

impl Default for LengthSection {
    fn default() -> Self {
        Self { policy: "gold".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Live OpenAI-compatible endpoint; every response goes through the replay cache.
    Http,
    /// Cache only, unless `strict = false` and an endpoint is configured.
    Replay,
    Oracle,
    Predictions,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Http => "http",
            BackendKind::Replay => "replay",
            BackendKind::Oracle => "oracle",
            BackendKind::Predictions => "predictions",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "http" => Ok(BackendKind::Http),
            "replay" => Ok(BackendKind::Replay),
            "oracle" => Ok(BackendKind::Oracle),
            "predictions" => Ok(BackendKind::Predictions),
            other => Err(Error::Config(format!("unknown backend kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub model_id: String,
    pub temperature: f64,
    pub max_new_tokens: u32,
    /// Defaults to `cache.jsonl` inside the output directory.
    pub cache: Option<PathBuf>,
    /// Replay only: never fall through to the endpoint on a miss.
    pub strict: bool,
    pub predictions: Option<PathBuf>,
    pub endpoint: String,
    pub api_key_env: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        let http = HttpConfig::default();
        let params = DecodingParams::default();
        Self {
            kind: BackendKind::Oracle,
            model_id: params.model_id,
            temperature: params.temperature,
            max_new_tokens: params.max_new_tokens,
            cache: None,
            strict: true,
            predictions: None,
            endpoint: http.endpoint,
            api_key_env: http.api_key_env,
            max_retries: http.max_retries,
            initial_backoff_ms: http.initial_backoff_ms,
            max_backoff_ms: http.max_backoff_ms,
            timeout_secs: http.timeout_secs,
        }
    }
}

impl BackendSection {
    pub fn params(&self) -> DecodingParams {
        DecodingParams {
            model_id: self.model_id.clone(),
            temperature: self.temperature,
            max_new_tokens: self.max_new_tokens,
        }
    }

    pub fn http(&self) -> HttpConfig {
        HttpConfig {
            endpoint: self.endpoint.clone(),
            api_key_env: self.api_key_env.clone(),
            max_retries: self.max_retries,
            initial_backoff_ms: self.initial_backoff_ms,
            max_backoff_ms: self.max_backoff_ms,
            timeout_secs: self.timeout_secs,
        }
    }
}

/// A named profile plus optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSection {
    /// `default` or `duc`.
    pub profile: String,
    pub cue_phrase: Option<String>,
    pub strip_quotes: Option<bool>,
    pub preamble_patterns: Option<Vec<String>>,
    pub truncate_chars: Option<usize>,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        Self {
            profile: "default".into(),
            cue_phrase: None,
            strip_quotes: None,
            preamble_patterns: None,
            truncate_chars: None,
        }
    }
}

impl ExtractionSection {
    pub fn resolve(&self) -> Result<ExtractionConfig> {
        let mut cfg = ExtractionConfig::profile(&self.profile)
            .ok_or_else(|| Error::Config(format!("unknown extraction profile {:?}", self.profile)))?;
        if let Some(cue) = &self.cue_phrase {
            cfg.cue_phrase = cue.clone();
        }
        if let Some(strip) = self.strip_quotes {
            cfg.strip_quotes = strip;
        }
        if let Some(patterns) = &self.preamble_patterns {
            cfg.preamble_patterns = patterns.clone();
        }
        if self.truncate_chars.is_some() {
            cfg.truncate_chars = self.truncate_chars;
        }
        Ok(cfg)
    }
}

/// Unset fields take their defaults, except that the `duc` extraction profile switches
/// ROUGE to recall.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub rouge_mode: Option<RougeMode>,
    pub reference_aggregation: Option<ReferenceAggregation>,
    pub stemming: bool,
    pub allow_partial: bool,
    pub permutations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    pub setting: String,
    /// Defaults to the template's short label, e.g. `#3`.
    pub instruction: Option<String>,
}

impl Default for LabelSection {
    fn default() -> Self {
        Self { setting: "zero-shot".into(), instruction: None }
    }
}

/// Command line overrides; `None` keeps the file value. Paths are taken as given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub format: Option<CorpusFormat>,
    pub dataset: Option<String>,
    pub template: Option<String>,
    pub template_file: Option<PathBuf>,
    pub prompting: Option<String>,
    pub policy: Option<String>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub model_id: Option<String>,
    pub temperature: Option<f64>,
    pub max_new_tokens: Option<u32>,
    pub cache: Option<PathBuf>,
    pub strict: Option<bool>,
    pub predictions: Option<PathBuf>,
    pub extraction_profile: Option<String>,
    pub rouge_mode: Option<RougeMode>,
    pub stemming: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub skip_failures: Option<bool>,
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_owned())
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = absolute(base_dir);
        cfg.resolve_paths();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Defaults only, with relative paths anchored at the working directory.
    pub fn defaults() -> Self {
        let mut cfg = Self { base_dir: absolute(Path::new(".")), ..Self::default() };
        cfg.resolve_paths();
        cfg
    }

    fn resolve_paths(&mut self) {
        let base = self.base_dir.clone();
        let join = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        join(&mut self.corpus.path);
        for p in [&mut self.template.file, &mut self.backend.cache, &mut self.backend.predictions].into_iter().flatten() {
            join(p);
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        let abs = |p: PathBuf| absolute(&p);
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(self.corpus.path, o.corpus.map(abs));
        set!(self.corpus.format, o.format);
        set!(self.corpus.name, o.dataset.map(Some));
        set!(self.template.name, o.template);
        set!(self.template.file, o.template_file.map(|p| Some(abs(p))));
        set!(self.template.prompting, o.prompting);
        set!(self.length.policy, o.policy);
        set!(self.backend.kind, o.backend);
        set!(self.backend.endpoint, o.endpoint);
        set!(self.backend.model_id, o.model_id);
        set!(self.backend.temperature, o.temperature);
        set!(self.backend.max_new_tokens, o.max_new_tokens);
        set!(self.backend.cache, o.cache.map(|p| Some(abs(p))));
        set!(self.backend.strict, o.strict);
        set!(self.backend.predictions, o.predictions.map(|p| Some(abs(p))));
        set!(self.extraction.profile, o.extraction_profile);
        set!(self.scoring.rouge_mode, o.rouge_mode.map(Some));
        set!(self.scoring.stemming, o.stemming);
        set!(self.output_dir, o.output_dir.map(abs));
        set!(self.seed, o.seed);
        set!(self.parallelism, o.parallelism);
        set!(self.skip_failures, o.skip_failures);
    }

    pub fn dataset_name(&self) -> String {
        self.corpus.name.clone().unwrap_or_else(|| {
            self.corpus.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into())
        })
    }

    pub fn cache_path(&self) -> PathBuf {
        self.backend.cache.clone().unwrap_or_else(|| self.output_dir.join("cache.jsonl"))
    }

    pub fn policy(&self) -> Result<LengthPolicy> {
        Ok(self.length.policy.parse::<LengthPolicy>()?.validate()?)
    }

    pub fn prompting(&self) -> Result<Prompting> {
        match self.template.prompting.as_str() {
            "none" => Ok(Prompting::None),
            "chain-of-thought" | "cot" => Ok(Prompting::ChainOfThought),
            "tree-of-thought" | "tot" => Ok(Prompting::TreeOfThought),
            "custom" => self
                .template
                .prefix
                .clone()
                .map(Prompting::Custom)
                .ok_or_else(|| Error::Config("custom prompting needs template.prefix".into())),
            other => Err(Error::Config(format!("unknown prompting {other:?}"))),
        }
    }

    pub fn instruction_template(&self) -> Result<InstructionTemplate> {
        let name: TemplateName = self.template.name.parse()?;
        let template = match (name, &self.template.file) {
            (TemplateName::Custom, Some(file)) => InstructionTemplate::custom(crate::io::read_text(file)?)?,
            (TemplateName::Custom, None) => return Err(Error::Config("custom template needs template.file".into())),
            (_, Some(_)) => return Err(Error::Config("template.file is only read for the custom template".into())),
            (builtin, None) => InstructionTemplate::builtin(builtin)?,
        };
        Ok(template.with_prefix(self.prompting()?.prefix()))
    }

    pub fn score_options(&self) -> ScoreOptions {
        let duc = self.extraction.profile == "duc";
        ScoreOptions {
            rouge_mode: self.scoring.rouge_mode.unwrap_or(if duc { RougeMode::Recall } else { RougeMode::F1 }),
            reference_aggregation: self.scoring.reference_aggregation.unwrap_or_default(),
            stemming: self.scoring.stemming,
            allow_partial: self.scoring.allow_partial,
        }
    }

    pub fn permutations(&self) -> usize {
        self.scoring.permutations.unwrap_or(sentcomp_core::analysis::DEFAULT_PERMUTATIONS)
    }

    fn require_file(&self, what: &str, path: &Path) -> Result<()> {
        if path.as_os_str().is_empty() {
            return Err(Error::Config(format!("{what} path is not set")));
        }
        if !path.is_file() {
            return Err(Error::Config(format!("{what} {} does not exist", path.display())));
        }
        Ok(())
    }

    /// Checks everything a run needs before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.seed == 0 {
            return Err(Error::Config("seed must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be positive".into()));
        }
        self.require_file("corpus", &self.corpus.path)?;
        let template = self.instruction_template()?;
        let policy = self.policy()?;
        if template.uses_length() && policy == LengthPolicy::None {
            return Err(Error::Config(format!(
                "template {} has length placeholders but the length policy is none",
                template.name()
            )));
        }
        self.backend.params().validate().map_err(|e| Error::Config(e.to_string()))?;
        match self.backend.kind {
            BackendKind::Http if self.backend.endpoint.is_empty() => {
                return Err(Error::Config("http backend needs backend.endpoint".into()))
            }
            BackendKind::Replay => self.require_file("replay cache", &self.cache_path())?,
            BackendKind::Predictions => {
                let path = self.backend.predictions.clone().unwrap_or_default();
                self.require_file("predictions", &path)?;
            }
            _ => {}
        }
        self.extraction.resolve()?.compile()?;
        if let Some(r) = self.scoring.permutations {
            if r < sentcomp_core::analysis::MIN_PERMUTATIONS {
                return Err(Error::Config(format!(
                    "permutations must be at least {}",
                    sentcomp_core::analysis::MIN_PERMUTATIONS
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, with paths relative to the config directory.
    ///
    /// Output directory and parallelism do not change results and are left out.
    pub fn digest(&self) -> String {
        let mut view = self.clone();
        let base = self.base_dir.clone();
        let rel = |p: &mut PathBuf| {
            if let Ok(r) = p.strip_prefix(&base) {
                *p = r.to_owned();
            }
        };
        rel(&mut view.corpus.path);
        for p in [&mut view.template.file, &mut view.backend.cache, &mut view.backend.predictions].into_iter().flatten() {
            rel(p);
        }
        view.output_dir = PathBuf::new();
        view.parallelism = 0;
        let json = serde_json::to_string(&view).expect("serializable");
        crate::backend::hex_digest(json.as_bytes())
    }

    /// Row labels and configuration echo for score reports.
    pub fn report_config(&self) -> Result<ReportConfig> {
        let template = self.instruction_template()?;
        let mut details = std::collections::BTreeMap::new();
        details.insert("config_digest".into(), self.digest());
        details.insert("template".into(), template.name().as_str().into());
        details.insert("length_policy".into(), self.policy()?.to_string());
        details.insert("backend".into(), self.backend.kind.as_str().into());
        details.insert("model_id".into(), self.backend.model_id.clone());
        details.insert("temperature".into(), self.backend.temperature.to_string());
        details.insert("max_new_tokens".into(), self.backend.max_new_tokens.to_string());
        details.insert("extraction_profile".into(), self.extraction.profile.clone());
        Ok(ReportConfig {
            dataset: self.dataset_name(),
            setting: self.labels.setting.clone(),
            instruction: self.labels.instruction.clone().unwrap_or_else(|| template.name().short_label().into()),
            prompting: self.prompting()?.label().into(),
            details,
        })
    }
}
