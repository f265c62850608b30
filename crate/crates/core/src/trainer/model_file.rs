//! Model file layout (little-endian):
//!
//! ```text
//! "MLRM" | version u32 | L u32 | d u32 | P as a full MLRH f32 record
//! | rbf flag u8 | [anchors as MLRH f32 record | sigma f64]
//! | alpha f64 | beta f64 | lambda f64 | seed u64 | sylvester_form u8
//! ```

use std::path::Path;

use super::{Hyperparams, SylvesterForm, TrainedModel};
use crate::codec::{read_file, write_atomic, Decoder};
use crate::data::{decode_matrix, encode_matrix, DType};
use crate::error::{Error, Result};
use crate::features::RbfMap;

pub const MODEL_MAGIC: &[u8; 4] = b"MLRM";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &TrainedModel) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.bits as u32).to_le_bytes());
    out.extend_from_slice(&(model.p.rows() as u32).to_le_bytes());
    out.extend(encode_matrix(&model.p, DType::F32)?);
    match &model.rbf {
        Some(map) => {
            out.push(1);
            out.extend(encode_matrix(map.anchors(), DType::F32)?);
            out.extend_from_slice(&map.sigma().to_le_bytes());
        }
        None => out.push(0),
    }
    let hp = &model.hyperparams;
    out.extend_from_slice(&hp.alpha.to_le_bytes());
    out.extend_from_slice(&hp.beta.to_le_bytes());
    out.extend_from_slice(&hp.lambda.to_le_bytes());
    out.extend_from_slice(&hp.seed.to_le_bytes());
    out.push(hp.sylvester_form.code());
    Ok(out)
}

/// Parse a model file. Hyperparameters not stored in the file keep their defaults.
pub fn decode_model(buf: &[u8]) -> Result<TrainedModel> {
    let mut d = Decoder::new(buf);
    d.expect_magic(MODEL_MAGIC)?;
    let at = d.offset();
    let version = d.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::format(at, format!("unsupported model version {version}")));
    }
    let bits = d.u32("bits")? as usize;
    let dim = d.u32("dim")? as usize;
    let at = d.offset();
    let (p, _) = decode_matrix(&mut d)?;
    if p.shape() != (dim, bits) {
        return Err(Error::format(
            at,
            format!("projection is {:?}, header says {dim}x{bits}", p.shape()),
        ));
    }
    let at = d.offset();
    let rbf = match d.u8("rbf flag")? {
        0 => None,
        1 => {
            let (anchors, _) = decode_matrix(&mut d)?;
            let sigma = d.f64("sigma")?;
            Some(RbfMap::new(anchors, sigma).map_err(|e| Error::format(at, e.to_string()))?)
        }
        other => return Err(Error::format(at, format!("bad rbf flag {other}"))),
    };
    let alpha = d.f64("alpha")?;
    let beta = d.f64("beta")?;
    let lambda = d.f64("lambda")?;
    let seed = d.u64("seed")?;
    let at = d.offset();
    let code = d.u8("sylvester form")?;
    let sylvester_form = SylvesterForm::from_code(code)
        .ok_or_else(|| Error::format(at, format!("unknown sylvester form {code}")))?;
    d.finish()?;
    let hyperparams = Hyperparams {
        alpha,
        beta,
        lambda,
        bits,
        seed,
        sylvester_form,
        ..Hyperparams::default()
    };
    TrainedModel::new(p, rbf, hyperparams).map_err(|e| Error::format(0, e.to_string()))
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    write_atomic(path, &encode_model(model)?)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    decode_model(&read_file(path)?).map_err(|e| e.context(path.display()))
}
