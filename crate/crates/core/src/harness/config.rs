//! Campaign configuration (JSON) with dot-path overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fem::{MaterialParams, QuadratureRule, SolverSettings};
use crate::manifold::{EmbeddingMethod, GraphMethod};
use crate::mesh::{carve_pores, generate_cube_mesh, Mesh, PoreSpec};
use crate::pod::{ClusterBounds, LpodParams};
use crate::rom::{Linearisation, ManlParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_edge")]
    pub edge_length: f64,
    #[serde(default = "default_divisions")]
    pub divisions: usize,
    #[serde(default = "default_pores")]
    pub pores: PoreSpec,
    #[serde(default)]
    pub quadrature: QuadratureRule,
}

fn default_edge() -> f64 {
    6.0
}

fn default_divisions() -> usize {
    6
}

fn default_pores() -> PoreSpec {
    PoreSpec { centers: vec![[2.0, 2.0, 2.0], [4.0, 4.0, 4.0]], radius: 1.5 }
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { edge_length: 6.0, divisions: 6, pores: default_pores(), quadrature: QuadratureRule::default() }
    }
}

impl MeshConfig {
    pub fn build(&self) -> Result<Mesh> {
        let cube = generate_cube_mesh(self.edge_length, self.divisions)?;
        if self.pores.centers.is_empty() {
            Ok(cube)
        } else {
            carve_pores(&cube, &self.pores)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig { e: 1000.0, nu: 0.2 }
    }
}

impl MaterialConfig {
    pub fn params(&self) -> Result<MaterialParams> {
        MaterialParams::from_youngs(self.e, self.nu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub steps: usize,
    #[serde(rename = "dH_lp")]
    pub dh_lp: f64,
    #[serde(rename = "dH_ls")]
    pub dh_ls: f64,
    pub seed: u64,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { n_train: 10, n_val: 40, steps: 10, dh_lp: 0.03, dh_ls: 0.015, seed: 42 }
    }
}

impl PathsConfig {
    pub fn total(&self) -> usize {
        self.n_train + self.n_val
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub res_max: f64,
    pub max_iter: usize,
    pub n_load_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverConfig { res_max: s.res_max, max_iter: s.max_iterations, n_load_steps: s.n_load_steps }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings { res_max: self.res_max, max_iterations: self.max_iter, n_load_steps: self.n_load_steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Pod,
    Lpod,
    Lem,
    Lle,
}

/// One reduced dimension or a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dims {
    One(usize),
    Many(Vec<usize>),
}

impl Dims {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Dims::One(d) => vec![*d],
            Dims::Many(v) => v.clone(),
        }
    }
}

/// A method entry; unset fields take the standard parameters of the method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: MethodName,
    pub d: Dims,
    #[serde(default)]
    pub label: Option<String>,
    // LPOD
    #[serde(default)]
    pub clusters: Option<usize>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub core_min: Option<usize>,
    #[serde(default)]
    pub min: Option<usize>,
    #[serde(default)]
    pub max: Option<usize>,
    #[serde(default)]
    pub max_restarts: Option<usize>,
    // manifold learning
    #[serde(default)]
    pub graph: Option<GraphMethod>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub n_lin: Option<usize>,
    #[serde(default)]
    pub linearisation: Option<Linearisation>,
    #[serde(default)]
    pub orthonormalise: Option<bool>,
    #[serde(default)]
    pub two_stage: bool,
    /// Stage-one dimension; defaults to `min(s − 1, 60)`.
    #[serde(default)]
    pub d_bar: Option<usize>,
}

impl MethodConfig {
    pub fn new(name: MethodName, d: Dims) -> Self {
        MethodConfig {
            name,
            d,
            label: None,
            clusters: None,
            r: None,
            core_min: None,
            min: None,
            max: None,
            max_restarts: None,
            graph: None,
            k: None,
            t: None,
            delta: None,
            n_lin: None,
            linearisation: None,
            orthonormalise: None,
            two_stage: false,
            d_bar: None,
        }
    }

    /// Report label, e.g. `lem_local` or `lle_global_2stage`.
    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.name {
            MethodName::Pod => "pod".into(),
            MethodName::Lpod => "lpod".into(),
            MethodName::Lem | MethodName::Lle => {
                let base = if self.name == MethodName::Lem { "lem" } else { "lle" };
                let lin = match self.linearisation.unwrap_or(Linearisation::Local) {
                    Linearisation::Local => "local",
                    Linearisation::Global => "global",
                };
                let mut s = format!("{base}_{lin}");
                if self.orthonormalise == Some(false) {
                    s.push_str("_noqr");
                }
                if self.two_stage {
                    s.push_str("_2stage");
                }
                s
            }
        }
    }

    pub fn lpod_params(&self) -> LpodParams {
        let def = LpodParams::default();
        LpodParams {
            k: self.clusters.unwrap_or(def.k),
            r: self.r.unwrap_or(def.r),
            bounds: ClusterBounds {
                core_min: self.core_min.unwrap_or(def.bounds.core_min),
                min: self.min.unwrap_or(def.bounds.min),
                max: self.max.unwrap_or(def.bounds.max),
            },
            max_restarts: self.max_restarts.unwrap_or(def.max_restarts),
        }
    }

    /// Manifold parameters at reduced dimension `d`; `None` for POD/LPOD.
    pub fn manl_params(&self, d: usize) -> Option<ManlParams> {
        let method = match self.name {
            MethodName::Lem => EmbeddingMethod::Lem,
            MethodName::Lle => EmbeddingMethod::Lle,
            _ => return None,
        };
        let mut p = ManlParams::defaults(method, d);
        if let Some(g) = self.graph {
            p.graph = g;
        } else if let Some(k) = self.k {
            p.graph = GraphMethod::SymmetricKnn { k };
        }
        p.t_gauss = self.t.filter(|t| t.is_finite());
        if let Some(v) = self.delta {
            p.delta = v;
        }
        if let Some(v) = self.n_lin {
            p.n_lin = v;
        }
        if let Some(v) = self.linearisation {
            p.linearisation = v;
        }
        if let Some(v) = self.orthonormalise {
            p.orthonormalise = v;
        }
        Some(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Default for CampaignConfig {
    /// Desk-scale problem with POD, LPOD and both local-linearisation ROMs at d = 15.
    fn default() -> Self {
        CampaignConfig {
            mesh: MeshConfig::default(),
            material: MaterialConfig::default(),
            paths: PathsConfig::default(),
            methods: [MethodName::Pod, MethodName::Lpod, MethodName::Lem, MethodName::Lle]
                .into_iter()
                .map(|m| MethodConfig::new(m, Dims::One(15)))
                .collect(),
            solver: SolverConfig::default(),
        }
    }
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: CampaignConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a JSON file and apply `key=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        Self::from_value(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.n_train == 0 || self.paths.steps == 0 {
            return Err(Error::Config("paths.n_train and paths.steps must be positive".into()));
        }
        self.solver.settings().validate().map_err(|e| Error::Config(e.to_string()))?;
        for m in &self.methods {
            if m.d.values().iter().any(|&d| d == 0) {
                return Err(Error::Config(format!("method {} has d = 0", m.label())));
            }
            if m.two_stage && !matches!(m.name, MethodName::Lem | MethodName::Lle) {
                return Err(Error::Config("two_stage applies to lem/lle only".into()));
            }
        }
        Ok(())
    }
}

/// Set `a.b.0.c=value` in a JSON tree. The value is parsed as JSON when
/// possible and taken as a string otherwise. Missing object keys are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` in `{key}` must index an array")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range in `{key}`")))?
            }
            Value::Object(map) => map.entry(part.to_string()).or_insert(if last { Value::Null } else { Value::Object(Default::default()) }),
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just set").entry(part.to_string()).or_insert(Value::Null)
            }
            _ => return Err(Error::Config(format!("`{key}` descends into a scalar"))),
        };
    }
    *cur = value;
    Ok(())
}
