use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{from_rows, Mat, Vector};

use super::{
    build_networked_sis, build_sidarthe_v, build_system, BilinearProducts, DomainKind, LinearMap,
    LipschitzSystem, ModelError, Nonlinearity, NonlinearitySpec, SidartheVParams, SisNetworkParams,
    StateDomain,
};

/// On-disk model description.
///
/// ```json
/// {"kind": "sidarthe_v", "params": {"alpha": 0.3872, ...}, "domain": {"kind": "simplex"}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    SidartheV {
        params: SidartheVParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DomainSpec>,
    },
    NetworkedSis {
        params: SisParamsFile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DomainSpec>,
    },
    Generic {
        params: GenericParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DomainSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SisParamsFile {
    pub betas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Row-major weighted adjacency.
    pub w: Vec<Vec<f64>>,
    pub measured_nodes: Vec<usize>,
    #[serde(default)]
    pub allow_self_loops: bool,
}

/// Dense row-major matrices plus a registry nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericParams {
    pub a: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub nonlinearity: NonlinearitySpec,
}

/// Domain section. Missing bounds default to `[0, 1]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplex_indices: Option<Vec<usize>>,
}

impl DomainSpec {
    pub fn build(&self, n: usize) -> Result<StateDomain, ModelError> {
        let bound = |given: &Option<Vec<f64>>, default: f64| -> Result<Vector, ModelError> {
            match given {
                None => Ok(Vector::from_element(n, default)),
                Some(v) if v.len() == n => Ok(Vector::from_column_slice(v)),
                Some(v) => Err(ModelError::InvalidDomain(format!(
                    "bound vector has {} entries for a {n}-state model",
                    v.len()
                ))),
            }
        };
        StateDomain::new(self.kind, bound(&self.lower, 0.0)?, bound(&self.upper, 1.0)?, self.simplex_indices.clone())
    }
}

fn matrix(name: &'static str, rows: &[Vec<f64>], ncols_if_empty: usize) -> Result<Mat, ModelError> {
    from_rows(rows, ncols_if_empty).ok_or_else(|| ModelError::DimensionMismatch {
        first: name,
        second: name,
        detail: "ragged rows".into(),
    })
}

fn nonlinearity_from_spec(spec: &NonlinearitySpec, input_dim: usize) -> Result<Arc<dyn Nonlinearity>, ModelError> {
    match spec {
        NonlinearitySpec::BilinearProducts { pairs } => BilinearProducts::new(input_dim, pairs.clone())
            .map(|f| Arc::new(f) as Arc<dyn Nonlinearity>)
            .ok_or_else(|| ModelError::BadNonlinearity(format!("bilinear pair index exceeds input dimension {input_dim}"))),
        NonlinearitySpec::Linear { matrix: rows } => {
            let m = matrix("f", rows, input_dim)?;
            Ok(Arc::new(LinearMap::new(m)))
        }
    }
}

impl ModelFile {
    pub fn build(&self) -> Result<LipschitzSystem, ModelError> {
        let (sys, domain) = match self {
            ModelFile::SidartheV { params, domain } => (build_sidarthe_v(params)?, domain),
            ModelFile::NetworkedSis { params, domain } => {
                let weights = matrix("W", &params.w, params.betas.len())?;
                let p = SisNetworkParams {
                    betas: params.betas.clone(),
                    deltas: params.deltas.clone(),
                    weights,
                    measured_nodes: params.measured_nodes.clone(),
                    allow_self_loops: params.allow_self_loops,
                };
                (build_networked_sis(&p)?, domain)
            }
            ModelFile::Generic { params, domain } => {
                let a = matrix("A", &params.a, 0)?;
                let nx = a.nrows();
                let g = matrix("G", &params.g, 0)?;
                let h = matrix("H", &params.h, nx)?;
                let c = matrix("C", &params.c, nx)?;
                let f = nonlinearity_from_spec(&params.nonlinearity, h.nrows())?;
                let sys = build_system(a, g, h, c, f, StateDomain::unit_box(nx))?;
                (sys, domain)
            }
        };
        match domain {
            None => Ok(sys),
            Some(spec) => sys.with_domain(spec.build(sys.dims().nx)?),
        }
    }
}

pub fn load_model_file(path: &Path) -> Result<(ModelFile, LipschitzSystem), ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|source| ModelError::Parse { path: path.display().to_string(), source })?;
    let sys = file.build()?;
    Ok((file, sys))
}
