//! Binary matrix container and model persistence.
//!
//! Container layout: magic `MOR1`, `u32` LE rows, `u32` LE cols, then the
//! entries row-major as `f64` LE.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Embedding, GlobalMap};
use crate::pod::{LpodModel, LpodParams, PodBasis};
use crate::rom::{ManlModel, ManlParams, PodModel, RomModel, TwoStageModel};

const MAGIC: &[u8; 4] = b"MOR1";

pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_matrix(bytes: &[u8], origin: &Path) -> Result<DMatrix<f64>> {
    let bad = |reason: &str| Error::Container { path: origin.to_path_buf(), reason: reason.to_string() };
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing MOR1 header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if bytes.len() != 12 + 8 * rows * cols {
        return Err(bad(&format!("payload holds {} bytes, expected {}", bytes.len() - 12, 8 * rows * cols)));
    }
    let vals: Vec<f64> = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_matrix(&bytes, path)
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn vector(m: DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// JSON description of a stored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub method: String,
    pub label: String,
    pub d: usize,
    pub seed: u64,
    /// Logical name to container file.
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core_clusters: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lpod: Option<LpodParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manl: Option<ManlParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_col: Option<usize>,
}

struct Store<'a> {
    dir: &'a Path,
    files: BTreeMap<String, String>,
}

impl Store<'_> {
    fn put(&mut self, name: &str, m: &DMatrix<f64>) -> Result<()> {
        let file = format!("{name}.mor");
        write_matrix(&self.dir.join(&file), m)?;
        self.files.insert(name.to_string(), file);
        Ok(())
    }
}

fn get(dir: &Path, man: &ModelManifest, name: &str) -> Result<DMatrix<f64>> {
    let file = man
        .files
        .get(name)
        .ok_or_else(|| Error::Config(format!("manifest lacks entry {name}")))?;
    read_matrix(&dir.join(file))
}

fn save_manl(store: &mut Store, prefix: &str, m: &ManlModel) -> Result<()> {
    store.put(&format!("{prefix}u_ambient"), &m.u_ambient)?;
    store.put(&format!("{prefix}y"), &m.embedding.y)?;
    store.put(&format!("{prefix}eigenvalues"), &column(&m.embedding.eigenvalues))?;
    if let Some(g) = &m.global {
        store.put(&format!("{prefix}global_psi"), &g.psi)?;
        store.put(&format!("{prefix}global_psi_perp"), &g.psi_perp)?;
    }
    Ok(())
}

fn load_manl(dir: &Path, man: &ModelManifest, prefix: &str) -> Result<ManlModel> {
    let params = man.manl.ok_or_else(|| Error::Config("manifest lacks manifold parameters".into()))?;
    let y = get(dir, man, &format!("{prefix}y"))?;
    let global = if man.files.contains_key(&format!("{prefix}global_psi")) {
        Some(GlobalMap {
            psi: get(dir, man, &format!("{prefix}global_psi"))?,
            psi_perp: get(dir, man, &format!("{prefix}global_psi_perp"))?,
        })
    } else {
        None
    };
    Ok(ManlModel {
        u_ambient: get(dir, man, &format!("{prefix}u_ambient"))?,
        embedding: Embedding {
            d: y.nrows(),
            y,
            method: params.method,
            eigenvalues: vector(get(dir, man, &format!("{prefix}eigenvalues"))?),
        },
        zero_col: man.zero_col.unwrap_or(0),
        params,
        global,
    })
}

/// Write `manifest.json` plus containers into `dir`.
pub fn save_model(dir: &Path, model: &RomModel, label: &str, seed: u64) -> Result<ModelManifest> {
    fs::create_dir_all(dir)?;
    let mut store = Store { dir, files: BTreeMap::new() };
    let mut man = ModelManifest {
        method: model.kind().to_string(),
        label: label.to_string(),
        d: model.dim(),
        seed,
        files: BTreeMap::new(),
        clusters: None,
        core_clusters: None,
        lpod: None,
        manl: None,
        zero_col: None,
    };
    match model {
        RomModel::Pod(m) => {
            store.put("psi", &m.basis.psi)?;
            store.put("eigenvalues", &column(&m.basis.eigenvalues))?;
        }
        RomModel::Lpod(m) => {
            store.put("centroids", &m.centroids)?;
            for (j, b) in m.bases.iter().enumerate() {
                store.put(&format!("basis_{j}"), &b.psi)?;
                store.put(&format!("eigenvalues_{j}"), &column(&b.eigenvalues))?;
            }
            man.clusters = Some(m.clusters.clone());
            man.core_clusters = Some(m.core_clusters.clone());
            man.lpod = Some(m.params);
        }
        RomModel::Manl(m) => {
            save_manl(&mut store, "", m)?;
            man.manl = Some(m.params);
            man.zero_col = Some(m.zero_col);
        }
        RomModel::TwoStage(m) => {
            store.put("psi_stage1", &m.psi_stage1)?;
            save_manl(&mut store, "inner_", &m.inner)?;
            man.manl = Some(m.inner.params);
            man.zero_col = Some(m.inner.zero_col);
        }
    }
    man.files = store.files;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&man)?)?;
    Ok(man)
}

pub fn load_model(dir: &Path) -> Result<(RomModel, ModelManifest)> {
    let man: ModelManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let model = match man.method.as_str() {
        "pod" => {
            let psi = get(dir, &man, "psi")?;
            RomModel::Pod(PodModel {
                basis: PodBasis { d: psi.ncols(), psi, eigenvalues: vector(get(dir, &man, "eigenvalues")?) },
            })
        }
        "lpod" => {
            let clusters = man.clusters.clone().ok_or_else(|| Error::Config("manifest lacks clusters".into()))?;
            let bases = (0..clusters.len())
                .map(|j| {
                    let psi = get(dir, &man, &format!("basis_{j}"))?;
                    Ok(PodBasis { d: psi.ncols(), psi, eigenvalues: vector(get(dir, &man, &format!("eigenvalues_{j}"))?) })
                })
                .collect::<Result<Vec<_>>>()?;
            RomModel::Lpod(LpodModel {
                centroids: get(dir, &man, "centroids")?,
                core_clusters: man.core_clusters.clone().unwrap_or_default(),
                clusters,
                bases,
                params: man.lpod.ok_or_else(|| Error::Config("manifest lacks LPOD parameters".into()))?,
            })
        }
        "manl" => RomModel::Manl(load_manl(dir, &man, "")?),
        "two_stage" => RomModel::TwoStage(TwoStageModel {
            psi_stage1: get(dir, &man, "psi_stage1")?,
            inner: load_manl(dir, &man, "inner_")?,
        }),
        other => return Err(Error::Config(format!("unknown model kind {other}"))),
    };
    Ok((model, man))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, -6.5]);
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..4], b"MOR1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        // row-major payload
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 2.0);
        assert_eq!(decode_matrix(&bytes, Path::new("mem")).unwrap(), m);
    }

    #[test]
    fn truncated_container_rejected() {
        let bytes = encode_matrix(&DMatrix::zeros(2, 2));
        assert!(decode_matrix(&bytes[..20], Path::new("mem")).is_err());
    }
}
