//! Binary checkpoint format.
//!
//! ```text
//! "BSGC"                      magic
//! u32                         format version (1)
//! [u8; 32]                    catalog fingerprint
//! u32 u32 f32                 classes, hidden width, dropout
//! u32                         tensor count
//! (u32 rows, u32 cols) × k    shape table, vectors stored as rows × 1
//! f32 × Σ rows·cols           parameter blob in table order
//! [u8; 32]                    SHA-256 of everything above
//! ```
//!
//! All integers and floats are little-endian. Tensor order per layer `l`:
//! `W_l, b_l`, then for each hidden layer `γ, β, running mean, running var`.

use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use super::{BatchNorm, CeciModel, GcnLayer, TrainConfig, LAYERS};
use crate::catalog::ClassCatalog;
use crate::error::ModelError;

pub const MAGIC: &[u8; 4] = b"BSGC";
pub const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

fn tensors(model: &CeciModel) -> Vec<((usize, usize), &[f64])> {
    let mut out = Vec::new();
    for l in &model.layers {
        out.push((l.weight.dim(), l.weight.as_slice().expect("standard layout")));
        out.push(((l.bias.len(), 1), l.bias.as_slice().expect("standard layout")));
    }
    for n in &model.norms {
        for v in [&n.gamma, &n.beta, &n.running_mean, &n.running_var] {
            out.push(((v.len(), 1), v.as_slice().expect("standard layout")));
        }
    }
    out
}

/// Encodes `model`; values are stored as `f32`.
pub fn to_bytes(model: &CeciModel) -> Result<Vec<u8>, ModelError> {
    if !model.is_finite() {
        return Err(ModelError::Checkpoint("refusing to save non-finite parameters".into()));
    }
    let tensors = tensors(model);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.fingerprint);
    out.extend_from_slice(&(model.classes() as u32).to_le_bytes());
    out.extend_from_slice(&(model.hidden() as u32).to_le_bytes());
    out.extend_from_slice(&(model.dropout as f32).to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for ((r, c), _) in &tensors {
        out.extend_from_slice(&(*r as u32).to_le_bytes());
        out.extend_from_slice(&(*c as u32).to_le_bytes());
    }
    for (_, data) in &tensors {
        for &x in *data {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    let digest: [u8; 32] = Sha256::digest(&out).into();
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| ModelError::Checkpoint("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32, ModelError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Decodes a checkpoint, verifying checksum, magic, version and shapes.
pub fn from_bytes(bytes: &[u8]) -> Result<CeciModel, ModelError> {
    if bytes.len() < MAGIC.len() + CHECKSUM_LEN {
        return Err(ModelError::Checksum);
    }
    let (body, digest) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    let actual: [u8; 32] = Sha256::digest(body).into();
    if actual.as_slice() != digest {
        return Err(ModelError::Checksum);
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelError::Version(version));
    }
    let fingerprint: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let classes = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let dropout = f64::from(r.f32()?);
    let count = r.u32()? as usize;

    let mut model = CeciModel::with_dims(classes, hidden, dropout, fingerprint, 0)?;
    let expected: Vec<(usize, usize)> = tensors(&model).iter().map(|(s, _)| *s).collect();
    if count != expected.len() {
        return Err(ModelError::Checkpoint(format!("{count} tensors, expected {}", expected.len())));
    }
    for (k, want) in expected.iter().enumerate() {
        let got = (r.u32()? as usize, r.u32()? as usize);
        if got != *want {
            return Err(ModelError::Checkpoint(format!("tensor {k} has shape {got:?}, expected {want:?}")));
        }
    }
    let mut read_vec = |n: usize| -> Result<Vec<f64>, ModelError> {
        (0..n).map(|_| r.f32().map(f64::from)).collect()
    };
    let mut layers = Vec::with_capacity(LAYERS);
    for l in &model.layers {
        let (rows, cols) = l.weight.dim();
        let weight = Array2::from_shape_vec((rows, cols), read_vec(rows * cols)?).expect("shape checked");
        let bias = Array1::from(read_vec(cols)?);
        layers.push(GcnLayer { weight, bias });
    }
    let mut norms = Vec::with_capacity(LAYERS - 1);
    for _ in &model.norms {
        norms.push(BatchNorm {
            gamma: Array1::from(read_vec(hidden)?),
            beta: Array1::from(read_vec(hidden)?),
            running_mean: Array1::from(read_vec(hidden)?),
            running_var: Array1::from(read_vec(hidden)?),
        });
    }
    if r.pos != body.len() {
        return Err(ModelError::Checkpoint("trailing bytes after parameter blob".into()));
    }
    model.layers = layers;
    model.norms = norms;
    if !model.is_finite() {
        return Err(ModelError::Checkpoint("non-finite parameters".into()));
    }
    if model.norms.iter().any(|n| n.running_var.iter().any(|v| *v <= 0.0)) {
        return Err(ModelError::Checkpoint("non-positive running variance".into()));
    }
    Ok(model)
}

pub fn save(model: &CeciModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<CeciModel, ModelError> {
    from_bytes(&std::fs::read(path)?)
}

/// Loads and checks the model against `catalog` (class count, then fingerprint).
pub fn load_for(path: impl AsRef<Path>, catalog: &ClassCatalog) -> Result<CeciModel, ModelError> {
    let model = load(path)?;
    model.check_catalog(catalog)?;
    Ok(model)
}

/// Path of the JSON sidecar that echoes the training configuration.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    name.into()
}

pub fn write_sidecar(path: &Path, config: &TrainConfig, catalog: &ClassCatalog) -> Result<(), ModelError> {
    let value = serde_json::json!({
        "catalog_fingerprint": catalog.fingerprint_hex(),
        "classes": catalog.len(),
        "format_version": VERSION,
        "train_config": config,
    });
    let mut text = serde_json::to_vec_pretty(&value).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    text.push(b'\n');
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(classes: usize) -> (ClassCatalog, CeciModel) {
        let catalog = ClassCatalog::new((0..classes).map(|i| format!("c{i}"))).unwrap();
        let mut m = CeciModel::new(&catalog, 6, 0.5, 9).unwrap();
        m.norms[1].running_mean.fill(0.25);
        m.norms[2].running_var.fill(1.5);
        (catalog, m)
    }

    #[test]
    fn round_trip_exact() {
        let (_, m) = model(5);
        let bytes = to_bytes(&m).unwrap();
        assert_eq!(&bytes[..4], MAGIC);
        assert_eq!(from_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn truncated_fails_checksum() {
        let (_, m) = model(5);
        let bytes = to_bytes(&m).unwrap();
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 7]), Err(ModelError::Checksum)));
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(from_bytes(&flipped), Err(ModelError::Checksum)));
        assert!(matches!(from_bytes(b"BS"), Err(ModelError::Checksum)));
    }

    #[test]
    fn version_mismatch() {
        let (_, m) = model(3);
        let mut bytes = to_bytes(&m).unwrap();
        bytes.truncate(bytes.len() - CHECKSUM_LEN);
        bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
        let digest: [u8; 32] = Sha256::digest(&bytes).into();
        bytes.extend_from_slice(&digest);
        assert!(matches!(from_bytes(&bytes), Err(ModelError::Version(7))));
    }

    #[test]
    fn class_count_mismatch_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bsgc");
        let (catalog, m) = model(45);
        save(&m, &path).unwrap();
        assert!(load_for(&path, &catalog).is_ok());
        let smaller = ClassCatalog::new((0..44).map(|i| format!("c{i}"))).unwrap();
        assert!(matches!(load_for(&path, &smaller), Err(ModelError::Shape(_))));
        let renamed = ClassCatalog::new((0..45).map(|i| format!("d{i}"))).unwrap();
        assert!(matches!(load_for(&path, &renamed), Err(ModelError::CatalogMismatch { .. })));
    }

    #[test]
    fn non_finite_not_saved() {
        let (_, mut m) = model(3);
        m.layers[0].weight[[0, 0]] = f64::NAN;
        assert!(to_bytes(&m).is_err());
    }
}
