//! Binary checkpoint format.
//!
//! Layout: magic `WNN1`, little-endian `u32` version, little-endian `u32`
//! header length, a UTF-8 JSON header, then raw little-endian `f32`
//! payloads. The header holds the model configuration, free-form run
//! metadata and a manifest of `{name, shape, dtype, offset}` entries whose
//! offsets are relative to the start of the payload section.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};
use crate::web::{WebConfig, WebParams};

use super::{Classifier, ConvLayer, MnistArch, MnistModel, TitanicModel};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"WNN1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Model architecture, tagged by task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum ModelSpec {
    Titanic { web: WebConfig },
    Mnist { arch: MnistArch },
}

impl ModelSpec {
    /// Checkpoint tensor names in manifest order: conv kernels, conv
    /// biases, web weights, web bias.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if let Self::Mnist { arch } = self {
            names.extend((0..arch.convs.len()).map(|i| format!("conv{i}.kernel")));
            names.extend((0..arch.convs.len()).map(|i| format!("conv{i}.bias")));
        }
        names.extend(["web.weights".to_string(), "web.bias".to_string()]);
        names
    }

    /// Pairs parameters given in [`Classifier::parameters`] order with
    /// their names.
    pub fn name_tensors(&self, params: Vec<&Tensor<f32>>) -> Vec<(String, Tensor<f32>)> {
        self.tensor_names()
            .into_iter()
            .zip(params)
            .map(|(n, t)| (n, t.clone()))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderConfig {
    model: ModelSpec,
    #[serde(default)]
    run: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    dtype: DType,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: HeaderConfig,
    tensors: Vec<ManifestEntry>,
}

/// Decoded checkpoint contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelSpec,
    /// Run metadata such as preprocessing statistics and split settings.
    pub run: serde_json::Value,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Checkpoint(reason.into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0u64;
        let tensors = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let entry = ManifestEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                    dtype: DType::F32,
                    offset,
                };
                offset += 4 * t.len() as u64;
                entry
            })
            .collect();
        let header = Header {
            config: HeaderConfig {
                model: self.model.clone(),
                run: self.run.clone(),
            },
            tensors,
        };
        let json = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(json.len()).map_err(|_| bad("header too large"))?;
        let mut out = Vec::with_capacity(12 + json.len() + offset as usize);
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(bad("file shorter than the fixed preamble"));
        }
        if bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let header_end = 12usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(&bytes[12..header_end]).map_err(|e| bad(format!("invalid header: {e}")))?;
        let payload = &bytes[header_end..];

        let mut expected = 0u64;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            if entry.dtype != DType::F32 {
                return Err(bad(format!("tensor {} has unsupported dtype", entry.name)));
            }
            if entry.offset != expected {
                return Err(bad(format!("tensor {} is not contiguous", entry.name)));
            }
            let count = entry.shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let end = count
                .and_then(|c| c.checked_mul(4))
                .and_then(|b| (entry.offset as usize).checked_add(b))
                .filter(|&e| e <= payload.len())
                .ok_or_else(|| bad(format!("tensor {} runs past the end of the file", entry.name)))?;
            let data = payload[entry.offset as usize..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let tensor = Tensor::new(entry.shape, data).map_err(|e| bad(format!("tensor {}: {e}", entry.name)))?;
            expected = end as u64;
            tensors.push((entry.name, tensor));
        }
        if expected as usize != payload.len() {
            return Err(bad(format!(
                "payload has {} bytes, manifest describes {expected}",
                payload.len()
            )));
        }
        Ok(Self {
            model: header.config.model,
            run: header.config.run,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    fn take(&mut self, name: &str) -> Result<Tensor<f32>> {
        let at = self
            .tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| bad(format!("missing tensor {name}")))?;
        Ok(self.tensors.remove(at).1)
    }
}

/// Either task model in training precision.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Titanic(TitanicModel<f32>),
    Mnist(MnistModel<f32>),
}

impl AnyModel {
    pub fn spec(&self) -> ModelSpec {
        match self {
            Self::Titanic(m) => ModelSpec::Titanic { web: m.config },
            Self::Mnist(m) => ModelSpec::Mnist { arch: m.arch.clone() },
        }
    }

    pub fn classifier(&self) -> &dyn Classifier<f32> {
        match self {
            Self::Titanic(m) => m,
            Self::Mnist(m) => m,
        }
    }

    pub fn classifier_mut(&mut self) -> &mut dyn Classifier<f32> {
        match self {
            Self::Titanic(m) => m,
            Self::Mnist(m) => m,
        }
    }

    /// Parameters with their checkpoint names, in manifest order.
    pub fn named_tensors(&self) -> Vec<(String, Tensor<f32>)> {
        self.spec().name_tensors(self.classifier().parameters())
    }

    pub fn to_checkpoint(&self, run: serde_json::Value) -> Checkpoint {
        Checkpoint {
            model: self.spec(),
            run,
            tensors: self.named_tensors(),
        }
    }

    pub fn from_checkpoint(mut ckpt: Checkpoint) -> Result<Self> {
        let web_weights = ckpt.take("web.weights")?;
        let web_bias = ckpt.take("web.bias")?;
        let model = match ckpt.model.clone() {
            ModelSpec::Titanic { web } => {
                let params = WebParams::from_tensors(&web, web_weights, web_bias).map_err(|e| bad(e.to_string()))?;
                Self::Titanic(TitanicModel::from_params(web, params).map_err(|e| bad(e.to_string()))?)
            }
            ModelSpec::Mnist { arch } => {
                let mut convs = Vec::with_capacity(arch.convs.len());
                for (i, &spec) in arch.convs.iter().enumerate() {
                    convs.push(ConvLayer {
                        spec,
                        kernel: ckpt.take(&format!("conv{i}.kernel"))?,
                        bias: ckpt.take(&format!("conv{i}.bias"))?,
                    });
                }
                let params =
                    WebParams::from_tensors(&arch.web, web_weights, web_bias).map_err(|e| bad(e.to_string()))?;
                Self::Mnist(MnistModel::from_parts(arch, convs, params).map_err(|e| bad(e.to_string()))?)
            }
        };
        if let Some((name, _)) = ckpt.tensors.first() {
            return Err(bad(format!("unexpected tensor {name}")));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn titanic() -> AnyModel {
        AnyModel::Titanic(TitanicModel::new(WebConfig::titanic(), 3).unwrap())
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        for model in [
            titanic(),
            AnyModel::Mnist(MnistModel::new(MnistArch::desk(), 5).unwrap()),
        ] {
            let bytes = model.to_checkpoint(json!({"seed": 5})).to_bytes().unwrap();
            assert_eq!(&bytes[..4], b"WNN1");
            let ckpt = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(ckpt.run, json!({"seed": 5}));
            assert_eq!(AnyModel::from_checkpoint(ckpt).unwrap(), model);
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = titanic().to_checkpoint(json!(null)).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(Checkpoint::from_bytes(&wrong).is_err());
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(Checkpoint::from_bytes(&version).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn missing_tensor_rejected() {
        let mut ckpt = titanic().to_checkpoint(json!(null));
        ckpt.tensors.pop();
        let ckpt = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap();
        assert!(AnyModel::from_checkpoint(ckpt).is_err());
    }
}
