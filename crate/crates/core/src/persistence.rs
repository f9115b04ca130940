//! Versioned JSON archives for harvests and fitted models, plus TOML
//! configuration files.
//!
//! Every archive is an envelope
//!
//! ```json
//! { "format": "esn-lrofr", "format_version": 1, "kind": "model",
//!   "checksum": "<sha256 of the compact payload>", "payload": { ... } }
//! ```
//!
//! Matrices are stored row-major as `{ "rows", "cols", "data" }`. Floats
//! are written in shortest round-trip form, so loading and re-saving is
//! byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::esn::{EsnConfig, EsnWeights, StateHarvest};
use crate::readout::{Readout, ReadoutModel};
use crate::scalar::Real;
use crate::selection::LrofrFit;

pub const FORMAT: &str = "esn-lrofr";
pub const FORMAT_VERSION: u32 = 1;

const DIMENSION_TAG: &str = "dimension mismatch";

#[derive(Debug, thiserror::Error)]
pub enum PersistenceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported archive version {found} (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("archive holds an empty readout")]
    EmptyReadout,
    #[error("config error: {0}")]
    Config(String),
}

/// Serde adapter for `DMatrix`: row-major with declared dimensions.
pub mod matrix_serde {
    use nalgebra::DMatrix;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scalar::Real;

    #[derive(Serialize, Deserialize)]
    #[serde(bound = "T: Real")]
    struct Stored<T: Real> {
        rows: usize,
        cols: usize,
        data: Vec<T>,
    }

    pub fn serialize<S: Serializer, T: Real>(m: &DMatrix<T>, s: S) -> Result<S::Ok, S::Error> {
        let data = (0..m.nrows())
            .flat_map(|i| m.row(i).iter().copied().collect::<Vec<_>>())
            .collect();
        Stored {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Real>(d: D) -> Result<DMatrix<T>, D::Error> {
        let s = Stored::<T>::deserialize(d)?;
        if s.rows.checked_mul(s.cols) != Some(s.data.len()) {
            return Err(D::Error::custom(format!(
                "{}: {}x{} matrix with {} entries",
                super::DIMENSION_TAG,
                s.rows,
                s.cols,
                s.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(s.rows, s.cols, &s.data))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// Supplied by the caller so that replays stay byte-identical.
    pub created: String,
    pub library_version: String,
}

impl Provenance {
    pub fn new(seed: u64, created: impl Into<String>) -> Self {
        Self {
            seed,
            created: created.into(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Selection metadata for one output component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SelectionSummary<T: Real> {
    pub selected: Vec<usize>,
    pub lambdas: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub final_unexplained: Option<T>,
}

impl<T: Real> SelectionSummary<T> {
    pub fn from_fit(fit: &LrofrFit<T>) -> Self {
        let state = &fit.state;
        let final_unexplained = if state.selected().is_empty() || state.response_energy() == T::zero() {
            None
        } else {
            Some(state.residual().norm_squared() / state.response_energy())
        };
        Self {
            selected: fit.selected().to_vec(),
            lambdas: fit.regularization.lambdas.clone(),
            iterations: fit.regularization.iteration_count,
            converged: fit.regularization.converged,
            final_unexplained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HarvestArchive<T: Real> {
    pub esn_config: EsnConfig<T>,
    pub esn_weights: EsnWeights<T>,
    pub harvest: StateHarvest<T>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModelArchive<T: Real> {
    pub esn_config: EsnConfig<T>,
    pub esn_weights: EsnWeights<T>,
    pub readout: ReadoutModel<T>,
    #[serde(default)]
    pub selection: Vec<SelectionSummary<T>>,
    /// Training mean squared error of the readout.
    pub training_mse: T,
    pub provenance: Provenance,
}

/// Payloads that can live inside an envelope.
pub trait Archive: Serialize + DeserializeOwned {
    const KIND: &'static str;
    /// Structural checks run before the checksum is compared.
    fn validate(&self) -> Result<(), PersistenceError>;
}

fn dims(what: &str, found: (usize, usize), expected: (usize, usize)) -> Result<(), PersistenceError> {
    if found == expected {
        Ok(())
    } else {
        Err(PersistenceError::DimensionMismatch(format!(
            "{what} is {}x{}, expected {}x{}",
            found.0, found.1, expected.0, expected.1
        )))
    }
}

fn check_weights<T: Real>(config: &EsnConfig<T>, w: &EsnWeights<T>) -> Result<(), PersistenceError> {
    let m = config.reservoir_size;
    dims("W", w.w.shape(), (m, m))?;
    dims("W_in", w.w_in.shape(), (m, config.input_dim))?;
    dims("W_fb", w.w_fb.shape(), (m, config.output_dim))
}

fn check_readout<T: Real>(config: &EsnConfig<T>, readout: &ReadoutModel<T>) -> Result<(), PersistenceError> {
    let d = config.feature_dim();
    let p = config.output_dim;
    match readout {
        ReadoutModel::Linear(r) => {
            let width = r.feature_indices.as_ref().map_or(d, Vec::len);
            dims("linear readout", r.weights.shape(), (p, width))?;
            dims("readout features", (1, r.feature_dim), (1, d))?;
            if let Some(idx) = &r.feature_indices {
                if idx.iter().any(|&i| i >= d) {
                    return Err(PersistenceError::DimensionMismatch("feature index out of range".into()));
                }
            }
            dims("offsets", (1, r.offsets.len()), (1, p))?;
        }
        ReadoutModel::RegularizedLinear(r) => {
            dims("regularized readout", r.weights.shape(), (p, d))?;
            dims("offsets", (1, r.offsets.len()), (1, p))?;
            dims("lambda sets", (1, r.lambdas.len()), (1, p))?;
            for l in &r.lambdas {
                dims("lambdas", (1, l.len()), (1, d))?;
            }
        }
        ReadoutModel::Rbf { outputs } => {
            dims("rbf outputs", (1, outputs.len()), (1, p))?;
            for o in outputs {
                if o.centers.is_empty() {
                    return Err(PersistenceError::EmptyReadout);
                }
                dims("rbf weights", (1, o.weights.len()), (1, o.centers.len()))?;
                for c in &o.centers {
                    dims("rbf centre", (1, c.len()), (1, d))?;
                }
            }
        }
    }
    if readout.output_dim() == 0 || readout.term_count() == 0 {
        return Err(PersistenceError::EmptyReadout);
    }
    Ok(())
}

impl<T: Real> Archive for HarvestArchive<T> {
    const KIND: &'static str = "harvest";

    fn validate(&self) -> Result<(), PersistenceError> {
        check_weights(&self.esn_config, &self.esn_weights)?;
        let h = &self.harvest;
        let rows = h.states.nrows();
        dims("states", h.states.shape(), (rows, self.esn_config.feature_dim()))?;
        dims("targets", h.targets.shape(), (rows, self.esn_config.output_dim))?;
        dims("final state", (1, h.final_state.len()), (1, self.esn_config.reservoir_size))
    }
}

impl<T: Real> Archive for ModelArchive<T> {
    const KIND: &'static str = "model";

    fn validate(&self) -> Result<(), PersistenceError> {
        check_weights(&self.esn_config, &self.esn_weights)?;
        check_readout(&self.esn_config, &self.readout)
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a, P> {
    format: &'a str,
    format_version: u32,
    kind: &'a str,
    checksum: String,
    payload: &'a P,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    format: serde_json::Value,
    format_version: serde_json::Value,
    kind: serde_json::Value,
    checksum: String,
    payload: serde_json::Value,
}

fn checksum<P: Serialize>(payload: &P) -> Result<String, PersistenceError> {
    let bytes = serde_json::to_vec(payload).map_err(|e| PersistenceError::CorruptArchive(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Renders an archive to its canonical text form.
pub fn to_archive_string<A: Archive>(archive: &A) -> Result<String, PersistenceError> {
    archive.validate()?;
    let envelope = EnvelopeOut {
        format: FORMAT,
        format_version: FORMAT_VERSION,
        kind: A::KIND,
        checksum: checksum(archive)?,
        payload: archive,
    };
    let mut text =
        serde_json::to_string_pretty(&envelope).map_err(|e| PersistenceError::CorruptArchive(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Parses and verifies an archive: version, structure, dimensions, then
/// checksum.
pub fn from_archive_str<A: Archive>(text: &str) -> Result<A, PersistenceError> {
    let envelope: EnvelopeIn =
        serde_json::from_str(text).map_err(|e| PersistenceError::CorruptArchive(e.to_string()))?;
    if envelope.format != serde_json::Value::from(FORMAT) {
        return Err(PersistenceError::CorruptArchive(format!("unknown format {}", envelope.format)));
    }
    if envelope.format_version != serde_json::Value::from(FORMAT_VERSION) {
        return Err(PersistenceError::VersionMismatch {
            found: envelope.format_version.to_string(),
            expected: FORMAT_VERSION,
        });
    }
    if envelope.kind != serde_json::Value::from(A::KIND) {
        return Err(PersistenceError::CorruptArchive(format!(
            "expected a {} archive, found {}",
            A::KIND,
            envelope.kind
        )));
    }
    let archive: A = serde_json::from_value(envelope.payload).map_err(|e| {
        let msg = e.to_string();
        if msg.contains(DIMENSION_TAG) {
            PersistenceError::DimensionMismatch(msg)
        } else {
            PersistenceError::CorruptArchive(msg)
        }
    })?;
    archive.validate()?;
    let actual = checksum(&archive)?;
    if actual != envelope.checksum {
        return Err(PersistenceError::CorruptArchive(format!(
            "checksum mismatch: stored {}, computed {actual}",
            envelope.checksum
        )));
    }
    Ok(archive)
}

/// Reads the `kind` tag of an archive without decoding the payload.
pub fn archive_kind(text: &str) -> Result<String, PersistenceError> {
    let envelope: EnvelopeIn =
        serde_json::from_str(text).map_err(|e| PersistenceError::CorruptArchive(e.to_string()))?;
    if envelope.format != serde_json::Value::from(FORMAT) {
        return Err(PersistenceError::CorruptArchive(format!("unknown format {}", envelope.format)));
    }
    envelope
        .kind
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| PersistenceError::CorruptArchive("kind is not a string".into()))
}

/// Writes `text` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &[u8]) -> Result<(), PersistenceError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        // tempfile defaults to 0600; outputs are ordinary files
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir)?;
    tmp.write_all(text)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| PersistenceError::Io(e.error))?;
    Ok(())
}

pub fn save_archive<A: Archive>(archive: &A, path: &Path) -> Result<(), PersistenceError> {
    write_atomic(path, to_archive_string(archive)?.as_bytes())
}

pub fn load_archive<A: Archive>(path: &Path) -> Result<A, PersistenceError> {
    from_archive_str(&fs::read_to_string(path)?)
}

pub fn config_to_toml<T: Real>(config: &EsnConfig<T>) -> Result<String, PersistenceError> {
    toml::to_string(config).map_err(|e| PersistenceError::Config(e.to_string()))
}

pub fn config_from_toml<T: Real>(text: &str) -> Result<EsnConfig<T>, PersistenceError> {
    let config: EsnConfig<T> = toml::from_str(text).map_err(|e| PersistenceError::Config(e.to_string()))?;
    config.validate().map_err(|e| PersistenceError::Config(e.to_string()))?;
    Ok(config)
}

pub fn save_config<T: Real>(config: &EsnConfig<T>, path: &Path) -> Result<(), PersistenceError> {
    write_atomic(path, config_to_toml(config)?.as_bytes())
}

pub fn load_config<T: Real>(path: &Path) -> Result<EsnConfig<T>, PersistenceError> {
    config_from_toml(&fs::read_to_string(path)?)
}
