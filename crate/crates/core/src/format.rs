//! Self-describing JSON documents for operators, testers, distributions and
//! example manifests.
//!
//! Every document carries `"format_version": "1"` and a `"kind"` tag.
//! Complex matrices are row-major lists of `[re, im]` pairs over the big
//! index, and numbers are written with 17 significant digits.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::classical::JointDistribution;
use crate::error::{Error, Result};
use crate::maps::{InstrumentSequence, TesterElement};
use crate::tensor::{FactorLabel, LabeledOperator, C64};

pub const FORMAT_VERSION: &str = "1";

/// A float written as `{:.16e}`, which round-trips every finite `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite number {}", self.0)));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Num)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFile {
    pub format_version: String,
    pub factors: Vec<FactorSpec>,
    pub matrix: Vec<[Num; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TesterEntry {
    pub label: String,
    pub matrix: Vec<[Num; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TesterFile {
    pub format_version: String,
    pub steps: Vec<usize>,
    pub factors: Vec<FactorSpec>,
    pub elements: Vec<TesterEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    pub format_version: String,
    pub alphabet: Vec<usize>,
    pub table: Vec<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub role: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<FactorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: String,
    pub example: String,
    pub files: Vec<ManifestEntry>,
    /// Partitions as `history|memory|future` step lists.
    pub partitions: Vec<String>,
    #[serde(default)]
    pub parameters: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Document {
    Operator(OperatorFile),
    Tester(TesterFile),
    Distribution(DistributionFile),
    Manifest(Manifest),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Operator(_) => "operator",
            Document::Tester(_) => "tester",
            Document::Distribution(_) => "distribution",
            Document::Manifest(_) => "manifest",
        }
    }

    fn version(&self) -> &str {
        match self {
            Document::Operator(f) => &f.format_version,
            Document::Tester(f) => &f.format_version,
            Document::Distribution(f) => &f.format_version,
            Document::Manifest(f) => &f.format_version,
        }
    }
}

/// Parses a document and checks its version.
pub fn parse(text: &str) -> Result<Document> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if doc.version() != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format_version `{}`",
            doc.version()
        )));
    }
    Ok(doc)
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json(doc: &Document) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn specs(factors: &[FactorLabel]) -> Vec<FactorSpec> {
    factors
        .iter()
        .map(|f| FactorSpec {
            name: f.name.clone(),
            dim: f.dim,
        })
        .collect()
}

fn labels(specs: &[FactorSpec]) -> Vec<FactorLabel> {
    specs.iter().map(|f| FactorLabel::new(f.name.clone(), f.dim)).collect()
}

fn entries(m: &DMatrix<C64>) -> Vec<[Num; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            out.push([Num(z.re), Num(z.im)]);
        }
    }
    out
}

fn matrix_from(factors: &[FactorSpec], data: &[[Num; 2]]) -> Result<LabeledOperator> {
    let d = factors
        .iter()
        .try_fold(1usize, |acc, f| acc.checked_mul(f.dim))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    if data.len() != d * d {
        return Err(Error::Format(format!(
            "matrix has {} entries, factors require {}",
            data.len(),
            d * d
        )));
    }
    let m = DMatrix::from_fn(d, d, |r, c| {
        let [re, im] = data[r * d + c];
        C64::new(re.0, im.0)
    });
    LabeledOperator::new(labels(factors), m)
}

impl OperatorFile {
    pub fn from_operator(op: &LabeledOperator) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            factors: specs(op.factors()),
            matrix: entries(op.matrix()),
        }
    }

    pub fn to_operator(&self) -> Result<LabeledOperator> {
        matrix_from(&self.factors, &self.matrix)
    }
}

impl TesterFile {
    pub fn from_sequence(seq: &InstrumentSequence) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            steps: seq.steps().to_vec(),
            factors: specs(seq.factors()),
            elements: seq
                .elements()
                .iter()
                .map(|e| TesterEntry {
                    label: e.label.clone(),
                    matrix: entries(e.op.matrix()),
                })
                .collect(),
        }
    }

    pub fn to_sequence(&self) -> Result<InstrumentSequence> {
        let elements = self
            .elements
            .iter()
            .map(|e| {
                Ok(TesterElement {
                    label: e.label.clone(),
                    op: matrix_from(&self.factors, &e.matrix)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        InstrumentSequence::new(self.steps.clone(), elements)
    }
}

impl DistributionFile {
    pub fn from_distribution(d: &JointDistribution) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            alphabet: d.alphabet().to_vec(),
            table: d.table().iter().map(|&p| Num(p)).collect(),
        }
    }

    pub fn to_distribution(&self) -> Result<JointDistribution> {
        JointDistribution::new(
            self.alphabet.clone(),
            self.table.iter().map(|n| n.0).collect(),
        )
    }
}
