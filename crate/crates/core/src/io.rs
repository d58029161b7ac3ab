//! JSON documents for classes, distributions and streams.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::domain::{Example, FiniteDistribution, FunctionClass, InstanceId, LabelKind, LabelVec, Stream};
use crate::error::{MorError, Result};

/// A label written either as a bare number (K = 1) or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelJson {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl From<&LabelJson> for LabelVec {
    fn from(l: &LabelJson) -> Self {
        match l {
            LabelJson::Scalar(v) => LabelVec::scalar(*v),
            LabelJson::Vector(v) => LabelVec::new(v.clone()),
        }
    }
}

impl From<&LabelVec> for LabelJson {
    fn from(l: &LabelVec) -> Self {
        LabelJson::Vector(l.as_slice().to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDoc {
    #[serde(default)]
    pub name: Option<String>,
    pub domain: Vec<InstanceId>,
    #[serde(rename = "K")]
    pub k: usize,
    pub kind: LabelKind,
    pub functions: IndexMap<String, Vec<LabelJson>>,
}

impl ClassDoc {
    pub fn build(&self) -> Result<FunctionClass> {
        let names: Vec<String> = self.functions.keys().cloned().collect();
        let table: Vec<Vec<LabelVec>> =
            self.functions.values().map(|row| row.iter().map(LabelVec::from).collect()).collect();
        let class = FunctionClass::new(
            self.name.clone().unwrap_or_else(|| "class".into()),
            self.domain.clone(),
            self.kind,
            names,
            table,
        )?;
        if class.k() != self.k {
            return Err(MorError::Arity { expected: self.k, found: class.k() });
        }
        Ok(class)
    }

    pub fn from_class(class: &FunctionClass) -> Self {
        let functions = (0..class.len())
            .map(|f| (class.names()[f].clone(), class.row(f).iter().map(LabelJson::from).collect()))
            .collect();
        ClassDoc {
            name: Some(class.name().to_string()),
            domain: class.instances().to_vec(),
            k: class.k(),
            kind: class.kind(),
            functions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleJson {
    pub x: InstanceId,
    pub y: LabelJson,
}

impl From<&ExampleJson> for Example {
    fn from(e: &ExampleJson) -> Self {
        Example { x: e.x, y: LabelVec::from(&e.y) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionDoc {
    pub support: Vec<ExampleJson>,
    pub weights: Vec<f64>,
}

impl DistributionDoc {
    pub fn build(&self) -> Result<FiniteDistribution> {
        FiniteDistribution::new(self.support.iter().map(Example::from).collect(), self.weights.clone())
    }

    pub fn from_distribution(d: &FiniteDistribution) -> Self {
        DistributionDoc {
            support: d.support().iter().map(|e| ExampleJson { x: e.x, y: LabelJson::from(&e.y) }).collect(),
            weights: d.weights().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamDoc {
    pub rounds: Vec<ExampleJson>,
}

impl StreamDoc {
    pub fn build(&self) -> Stream {
        Stream::new(self.rounds.iter().map(Example::from).collect())
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MorError::Config { path: path.display().to_string(), msg: e.to_string() })?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| MorError::Config {
        path: format!("{origin}:{}:{}", e.line(), e.column()),
        msg: e.to_string(),
    })
}
