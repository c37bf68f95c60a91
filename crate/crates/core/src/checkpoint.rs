//! Binary checkpoints: the 8-byte magic `KFORMS01`, a little-endian `u64`
//! header length, a JSON header describing the architecture, then every
//! parameter as a little-endian `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::NeuralKForm;
use crate::model::{KFormClassifier, ReadoutKind};
use crate::nn::{Activation, Mlp};

pub const MAGIC: &[u8; 8] = b"KFORMS01";
const FORMAT: &str = "kforms-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Architecture {
    Mlp {
        activation: Activation,
        layers: Vec<usize>,
    },
    Classifier {
        n: usize,
        k: usize,
        num_forms: usize,
        num_classes: usize,
        steps: usize,
        readout: ReadoutKind,
        activation: Activation,
        psi_layers: Vec<usize>,
        head_activation: Option<Activation>,
        head_layers: Option<Vec<usize>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub num_params: usize,
    pub architecture: Architecture,
}

fn encode(architecture: Architecture, params: &[f64]) -> Result<Vec<u8>> {
    let header = Header { format: FORMAT.into(), version: VERSION, num_params: params.len(), architecture };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

/// Splits a checkpoint into its header and parameters.
pub fn decode(bytes: &[u8]) -> Result<(Header, Vec<f64>)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing KFORMS01 magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let end = usize::try_from(len).ok().and_then(|l| l.checked_add(16)).filter(|&e| e <= bytes.len());
    let end = end.ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[16..end])?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported {} v{}", header.format, header.version)));
    }
    let body = &bytes[end..];
    if body.len() != 8 * header.num_params {
        return Err(Error::Checkpoint(format!(
            "header announces {} parameters but {} bytes follow",
            header.num_params,
            body.len()
        )));
    }
    let params: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(bad("non-finite parameter"));
    }
    Ok((header, params))
}

pub fn mlp_to_bytes(mlp: &Mlp) -> Result<Vec<u8>> {
    encode(Architecture::Mlp { activation: mlp.activation(), layers: mlp.sizes().to_vec() }, mlp.params())
}

pub fn mlp_from_bytes(bytes: &[u8]) -> Result<Mlp> {
    match decode(bytes)? {
        (Header { architecture: Architecture::Mlp { activation, layers }, .. }, params) => {
            Mlp::from_params(&layers, activation, params).map_err(|e| Error::Checkpoint(e.to_string()))
        }
        _ => Err(Error::Checkpoint("not an MLP checkpoint".into())),
    }
}

pub fn classifier_to_bytes(model: &KFormClassifier) -> Result<Vec<u8>> {
    let psi = model.form.psi();
    let architecture = Architecture::Classifier {
        n: model.form.n(),
        k: model.form.k(),
        num_forms: model.form.num_forms(),
        num_classes: model.num_classes(),
        steps: model.steps(),
        readout: model.readout,
        activation: psi.activation(),
        psi_layers: psi.sizes().to_vec(),
        head_activation: model.head.as_ref().map(Mlp::activation),
        head_layers: model.head.as_ref().map(|h| h.sizes().to_vec()),
    };
    encode(architecture, &model.params())
}

pub fn classifier_from_bytes(bytes: &[u8]) -> Result<KFormClassifier> {
    let (header, params) = decode(bytes)?;
    let Architecture::Classifier {
        n,
        k,
        num_forms,
        num_classes,
        steps,
        readout,
        activation,
        psi_layers,
        head_activation,
        head_layers,
    } = header.architecture
    else {
        return Err(Error::Checkpoint("not a classifier checkpoint".into()));
    };
    let build = || -> Result<KFormClassifier> {
        let psi = Mlp::zeros(&psi_layers, activation)?;
        let form = NeuralKForm::from_mlp(psi, n, k, num_forms)?;
        let head = match (head_activation, head_layers) {
            (Some(act), Some(layers)) => Some(Mlp::zeros(&layers, act)?),
            (None, None) => None,
            _ => return Err(Error::Checkpoint("head activation and layers must both be present".into())),
        };
        let mut model = KFormClassifier::new(form, readout, head, steps, num_classes)?;
        model.set_params(&params)?;
        Ok(model)
    };
    build().map_err(|e| match e {
        Error::Checkpoint(_) => e,
        other => Error::Checkpoint(other.to_string()),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.into()),
        _ => Error::io(path, e),
    })
}

pub fn save_mlp(path: &Path, mlp: &Mlp) -> Result<()> {
    write(path, &mlp_to_bytes(mlp)?)
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    mlp_from_bytes(&read(path)?)
}

pub fn save_classifier(path: &Path, model: &KFormClassifier) -> Result<()> {
    write(path, &classifier_to_bytes(model)?)
}

pub fn load_classifier(path: &Path) -> Result<KFormClassifier> {
    classifier_from_bytes(&read(path)?)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::TrainConfig;

    #[test]
    fn mlp_roundtrip_is_bit_exact() {
        let mlp = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let bytes = mlp_to_bytes(&mlp).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        let back = mlp_from_bytes(&bytes).unwrap();
        assert_eq!(back, mlp);
        let x = [0.1, -0.7, 2.0];
        assert_eq!(back.forward(&x).unwrap(), mlp.forward(&x).unwrap());
    }

    #[test]
    fn classifier_roundtrip() {
        for head in [crate::model::HeadKind::Mlp, crate::model::HeadKind::None] {
            let cfg = TrainConfig { k: 2, num_forms: 3, head, ..Default::default() };
            let model = KFormClassifier::from_config(&cfg, 3, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            let back = classifier_from_bytes(&classifier_to_bytes(&model).unwrap()).unwrap();
            assert_eq!(back, model);
        }
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let mlp = Mlp::new(&[2, 2], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let bytes = mlp_to_bytes(&mlp).unwrap();
        assert!(mlp_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(mlp_from_bytes(&bytes[..12]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(mlp_from_bytes(&wrong), Err(Error::Checkpoint(_))));
        let mut huge = bytes.clone();
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(mlp_from_bytes(&huge).is_err());
        assert!(classifier_from_bytes(&bytes).is_err());
    }
}
