//! JSON interchange for instances.
//!
//! ```json
//! {"n": 2, "p": [3, 7], "c": 10, "W": {"dense": [[2, 1], [1, 2]]}}
//! {"n": 2, "p": [3, 7], "c": 10, "W": {"factor": [[1, 1]], "row_weights": [2]}}
//! {"n": 2, "p": [3, 7], "constraints": [{"c": 10, "W": {"dense": [[2, 1], [1, 2]]}}]}
//! ```
//!
//! `factor` holds the rows `u_e` of `W = Σ_e β_e u_e u_eᵀ`; `row_weights` (the
//! `β_e`) default to one. Item indices are zero-based everywhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Constraint, FactorForm, Instance, ModelError, MultiInstance, WeightMatrix};

pub const INSTANCE_EXT: &str = ".qkp.json";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("\"n\" is {n} but the profit vector has {len} entries")]
    CountMismatch { n: usize, len: usize },
    #[error("matrix must give exactly one of \"dense\" or \"factor\"")]
    MatrixKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatrixSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_weights: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub p: Vec<u64>,
    pub c: u64,
    #[serde(rename = "W")]
    pub w: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub c: u64,
    #[serde(rename = "W")]
    pub w: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiInstanceFile {
    pub n: usize,
    pub p: Vec<u64>,
    pub constraints: Vec<ConstraintFile>,
}

enum Matrix {
    Dense(WeightMatrix),
    Factor(FactorForm),
}

fn build_matrix(spec: &MatrixSpec, n: usize) -> Result<Matrix, IoError> {
    match (&spec.dense, &spec.factor) {
        (Some(d), None) => Ok(Matrix::Dense(WeightMatrix::from_dense(d)?)),
        (None, Some(f)) => Ok(Matrix::Factor(FactorForm::new(n, f.clone(), spec.row_weights.clone())?)),
        _ => Err(IoError::MatrixKind),
    }
}

fn matrix_spec(inst: &Instance) -> MatrixSpec {
    match inst.factor() {
        Some(f) => MatrixSpec {
            dense: None,
            factor: Some(f.rows().to_vec()),
            row_weights: f.row_weights().map(<[u64]>::to_vec),
        },
        None => MatrixSpec {
            dense: Some(inst.matrix().to_dense()),
            ..Default::default()
        },
    }
}

pub fn instance_from_json(text: &str) -> Result<Instance, IoError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.p.len() != file.n {
        return Err(IoError::CountMismatch {
            n: file.n,
            len: file.p.len(),
        });
    }
    Ok(match build_matrix(&file.w, file.n)? {
        Matrix::Dense(w) => Instance::from_matrix(w, file.p, file.c)?,
        Matrix::Factor(f) => Instance::from_factor(f, file.p, file.c)?,
    })
}

pub fn instance_to_json(inst: &Instance) -> String {
    let file = InstanceFile {
        n: inst.n(),
        p: inst.profits().to_vec(),
        c: inst.budget(),
        w: matrix_spec(inst),
    };
    serde_json::to_string(&file).expect("instances always serialize")
}

pub fn multi_from_json(text: &str) -> Result<MultiInstance, IoError> {
    let file: MultiInstanceFile = serde_json::from_str(text)?;
    if file.p.len() != file.n {
        return Err(IoError::CountMismatch {
            n: file.n,
            len: file.p.len(),
        });
    }
    let mut constraints = Vec::with_capacity(file.constraints.len());
    for k in &file.constraints {
        let w = match build_matrix(&k.w, file.n)? {
            Matrix::Dense(w) => w,
            Matrix::Factor(f) => f.to_matrix()?,
        };
        constraints.push(Constraint { w, c: k.c });
    }
    Ok(MultiInstance::new(file.p, constraints)?)
}

pub fn multi_to_json(minst: &MultiInstance) -> String {
    let file = MultiInstanceFile {
        n: minst.n(),
        p: minst.profits().to_vec(),
        constraints: minst
            .constraints()
            .iter()
            .map(|k| ConstraintFile {
                c: k.c,
                w: MatrixSpec {
                    dense: Some(k.w.to_dense()),
                    ..Default::default()
                },
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("instances always serialize")
}

/// Either file kind, distinguished by the presence of `constraints`.
pub enum AnyInstance {
    Single(Instance),
    Multi(MultiInstance),
}

pub fn any_from_json(text: &str) -> Result<AnyInstance, IoError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("constraints").is_some() {
        Ok(AnyInstance::Multi(multi_from_json(text)?))
    } else {
        Ok(AnyInstance::Single(instance_from_json(text)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_roundtrip() {
        let text = r#"{"n": 2, "p": [3, 7], "c": 10, "W": {"dense": [[2, 1], [1, 2]]}}"#;
        let inst = instance_from_json(text).unwrap();
        assert_eq!(inst.weight(&[0, 1]), 6);
        assert_eq!(instance_from_json(&instance_to_json(&inst)).unwrap(), inst);
    }

    #[test]
    fn factor_roundtrip() {
        let text = r#"{"n": 2, "p": [3, 7], "c": 10, "W": {"factor": [[1, 1]], "row_weights": [2]}}"#;
        let inst = instance_from_json(text).unwrap();
        assert_eq!(inst.matrix().to_dense(), vec![vec![2, 2], vec![2, 2]]);
        assert_eq!(instance_from_json(&instance_to_json(&inst)).unwrap(), inst);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            instance_from_json(r#"{"n": 1, "p": [3, 7], "c": 1, "W": {"dense": [[1]]}}"#),
            Err(IoError::CountMismatch { .. })
        ));
        assert!(matches!(
            instance_from_json(r#"{"n": 1, "p": [3], "c": 1, "W": {}}"#),
            Err(IoError::MatrixKind)
        ));
        assert!(matches!(
            instance_from_json(r#"{"n": 2, "p": [1, 1], "c": 1, "W": {"dense": [[0, 1], [1, 0]]}}"#),
            Err(IoError::Model(ModelError::NotPsd { .. }))
        ));
        assert!(matches!(instance_from_json("{"), Err(IoError::Json(_))));
    }

    #[test]
    fn multi_roundtrip() {
        let text = r#"{"n": 2, "p": [1, 1], "constraints": [{"c": 1, "W": {"dense": [[1, 0], [0, 1]]}}, {"c": 2, "W": {"factor": [[1, 1]]}}]}"#;
        let m = multi_from_json(text).unwrap();
        assert_eq!(m.r(), 2);
        assert_eq!(multi_from_json(&multi_to_json(&m)).unwrap(), m);
        assert!(matches!(any_from_json(text).unwrap(), AnyInstance::Multi(_)));
    }
}
