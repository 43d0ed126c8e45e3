use std::path::PathBuf;

use thiserror::Error;

use crate::tagger::TrainConfig;

/// Every setting a command can take, as a flat `key = value` map.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub model: PathBuf,
    pub history: PathBuf,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub spans: Option<PathBuf>,
    /// Word dimension when no embedding file is given.
    pub word_dim: Option<usize>,
    pub train: TrainConfig,
}

pub const DEFAULT_WORD_DIM: usize = 50;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            embeddings: None,
            model: PathBuf::from("model.ctg"),
            history: PathBuf::from("history.tsv"),
            input: None,
            output: None,
            spans: None,
            word_dim: None,
            train: TrainConfig::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "corpus",
    "embeddings",
    "model",
    "history",
    "input",
    "output",
    "spans",
    "word_dim",
    "window",
    "overlap",
    "epochs",
    "lr",
    "clip_norm",
    "dropout",
    "batch_size",
    "patience",
    "seed",
    "valid_fraction",
    "min_count",
    "pos_dim",
    "char_dim",
    "char_widths",
    "char_filters",
    "hidden",
    "fine_tune_words",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown configuration key `{key}`{}", at(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("invalid value `{value}` for `{key}`: expected {expected}{}", at(*.line))]
    Value {
        key: String,
        value: String,
        expected: &'static str,
        line: Option<usize>,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
}

fn at(line: Option<usize>) -> String {
    line.map_or_else(String::new, |l| format!(" (line {l})"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        expected,
        line: None,
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            expected: "true or false",
            line: None,
        }),
    }
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let t = &mut self.train;
        let value = value.trim();
        const UINT: &str = "a non-negative integer";
        const REAL: &str = "a number";
        match key {
            "corpus" => self.corpus = Some(value.into()),
            "embeddings" => self.embeddings = Some(value.into()),
            "model" => self.model = value.into(),
            "history" => self.history = value.into(),
            "input" => self.input = Some(value.into()),
            "output" => self.output = Some(value.into()),
            "spans" => self.spans = Some(value.into()),
            "word_dim" => self.word_dim = Some(parse(key, value, UINT)?),
            "window" => t.chunk.window = parse(key, value, UINT)?,
            "overlap" => t.chunk.overlap = parse(key, value, UINT)?,
            "epochs" => t.epochs = parse(key, value, UINT)?,
            "lr" => t.lr = parse(key, value, REAL)?,
            "clip_norm" => t.clip_norm = parse(key, value, REAL)?,
            "dropout" => t.dropout = parse(key, value, REAL)?,
            "batch_size" => t.batch_size = parse(key, value, UINT)?,
            "patience" => {
                t.patience = match value.to_ascii_lowercase().as_str() {
                    "none" | "off" => None,
                    _ => Some(parse(key, value, "a positive integer, `none` or `off`")?),
                }
            }
            "seed" => t.seed = parse(key, value, UINT)?,
            "valid_fraction" => t.valid_fraction = parse(key, value, REAL)?,
            "min_count" => t.min_count = parse(key, value, UINT)?,
            "pos_dim" => t.dims.pos_dim = parse(key, value, UINT)?,
            "char_dim" => t.dims.char_dim = parse(key, value, UINT)?,
            "char_widths" => {
                t.dims.char_widths = value
                    .split(',')
                    .map(|w| parse(key, w.trim(), "a comma-separated list of widths"))
                    .collect::<Result<_, _>>()?
            }
            "char_filters" => t.dims.char_filters = parse(key, value, UINT)?,
            "hidden" => t.dims.hidden = parse(key, value, UINT)?,
            "fine_tune_words" => t.dims.fine_tune_words = parse_bool(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line: None,
                })
            }
        }
        Ok(())
    }

    /// Text form of one key, as accepted by [`RunConfig::set`]. Unset
    /// optional values are empty.
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let path = |p: &Option<PathBuf>| p.as_ref().map_or_else(String::new, |p| p.display().to_string());
        Some(match key {
            "corpus" => path(&self.corpus),
            "embeddings" => path(&self.embeddings),
            "model" => self.model.display().to_string(),
            "history" => self.history.display().to_string(),
            "input" => path(&self.input),
            "output" => path(&self.output),
            "spans" => path(&self.spans),
            "word_dim" => self.word_dim.map_or_else(String::new, |d| d.to_string()),
            "window" => t.chunk.window.to_string(),
            "overlap" => t.chunk.overlap.to_string(),
            "epochs" => t.epochs.to_string(),
            "lr" => t.lr.to_string(),
            "clip_norm" => t.clip_norm.to_string(),
            "dropout" => t.dropout.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "patience" => t.patience.map_or_else(|| "none".to_string(), |p| p.to_string()),
            "seed" => t.seed.to_string(),
            "valid_fraction" => t.valid_fraction.to_string(),
            "min_count" => t.min_count.to_string(),
            "pos_dim" => t.dims.pos_dim.to_string(),
            "char_dim" => t.dims.char_dim.to_string(),
            "char_widths" => t
                .dims
                .char_widths
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "char_filters" => t.dims.char_filters.to_string(),
            "hidden" => t.dims.hidden.to_string(),
            "fine_tune_words" => t.dims.fine_tune_words.to_string(),
            _ => return None,
        })
    }

    /// Applies a configuration file. `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() && self.get(key).is_some() {
                // an empty value leaves the key unset
                continue;
            }
            self.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey {
                    key,
                    line: Some(line_no),
                },
                ConfigError::Value {
                    key, value, expected, ..
                } => ConfigError::Value {
                    key,
                    value,
                    expected,
                    line: Some(line_no),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Every key in [`KEYS`] order, suitable for [`RunConfig::apply_file`].
    pub fn to_file(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }
}
