//! The `.kwsm` model file: a JSON header describing the config and tensor
//! manifest, followed by the raw little-endian f32 payloads in manifest
//! order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;

use super::{AcousticModel, ModelConfig, ModelError, ModelWeights, Tensor};

const MAGIC: &[u8; 4] = b"KWSM";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ConfigHeader,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct ConfigHeader {
    conv_filter_time: usize,
    conv_filter_freq: usize,
    conv_filters: usize,
    conv_stride_time: usize,
    conv_stride_freq: usize,
    num_recurrent_layers: usize,
    hidden_size: usize,
    input_bins: usize,
    /// Alphabet symbols with the blank encoded as U+0000.
    alphabet: String,
    blank_index: usize,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dims: Vec<usize>,
}

impl ConfigHeader {
    fn from_config(config: &ModelConfig) -> Self {
        ConfigHeader {
            conv_filter_time: config.conv_filter_time,
            conv_filter_freq: config.conv_filter_freq,
            conv_filters: config.conv_filters,
            conv_stride_time: config.conv_stride_time,
            conv_stride_freq: config.conv_stride_freq,
            num_recurrent_layers: config.num_recurrent_layers,
            hidden_size: config.hidden_size,
            input_bins: config.input_bins,
            alphabet: config.alphabet.symbols().iter().collect(),
            blank_index: config.alphabet.blank_index(),
        }
    }

    fn into_config(self) -> Result<ModelConfig, ModelError> {
        let symbols: Vec<char> = self.alphabet.chars().collect();
        let alphabet = Alphabet::new(symbols, self.blank_index)?;
        Ok(ModelConfig {
            conv_filter_time: self.conv_filter_time,
            conv_filter_freq: self.conv_filter_freq,
            conv_filters: self.conv_filters,
            conv_stride_time: self.conv_stride_time,
            conv_stride_freq: self.conv_stride_freq,
            num_recurrent_layers: self.num_recurrent_layers,
            hidden_size: self.hidden_size,
            input_bins: self.input_bins,
            alphabet,
        })
    }
}

/// Writes config and weights in the `.kwsm` layout.
pub fn save_model(model: &AcousticModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    save_model_to(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn save_model_to(model: &AcousticModel, w: &mut impl Write) -> Result<(), ModelError> {
    let entries = model.weights().tensor_entries();
    let header = Header {
        config: ConfigHeader::from_config(model.config()),
        tensors: entries
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                dims: t.dims.clone(),
            })
            .collect(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| ModelError::HeaderSyntax(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, tensor) in entries {
        for &v in &tensor.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a `.kwsm` file, validating every tensor shape against the config.
pub fn load_model(path: impl AsRef<Path>) -> Result<AcousticModel, ModelError> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    load_model_from(&mut r)
}

pub fn load_model_from(r: &mut impl Read) -> Result<AcousticModel, ModelError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| ModelError::Truncated("magic"))?;
    if &magic != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)
        .map_err(|_| ModelError::Truncated("version"))?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    r.read_exact(&mut buf4)
        .map_err(|_| ModelError::Truncated("header length"))?;
    let header_len = u32::from_le_bytes(buf4) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|_| ModelError::Truncated("header"))?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| ModelError::HeaderSyntax(e.to_string()))?;

    let config = header.config.into_config()?;
    let mut named = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        let len: usize = entry.dims.iter().product();
        let mut bytes = vec![0u8; len * 4];
        r.read_exact(&mut bytes)
            .map_err(|_| ModelError::Truncated("tensor payload"))?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        named.push((
            entry.name,
            Tensor {
                dims: entry.dims,
                data,
            },
        ));
    }
    let weights = ModelWeights::from_named(&config, named)?;
    AcousticModel::new(config, weights)
}
