//! JSON file formats.
//!
//! Matrices are nested arrays of `[re, im]` pairs, algebra elements and
//! functionals are arrays of such blocks, and algebras are `{"blocks": [...]}`.
//! Keyed collections (effects, ensembles, Choi blocks) keep file order.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, AlgebraElement, Measurement, StateEnsemble, StateFunctional};
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, HermitianMatrix};
use crate::sdp::SdpProblem;
use crate::witness::{DiscriminationTask, Term, WitnessForm};

pub type MatrixDoc = Vec<Vec<[f64; 2]>>;
pub type BlocksDoc = Vec<MatrixDoc>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraDoc {
    pub blocks: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementDoc {
    pub algebra: AlgebraDoc,
    pub effects: IndexMap<String, BlocksDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    #[serde(rename = "in")]
    pub input: AlgebraDoc,
    pub out: AlgebraDoc,
    pub choi: IndexMap<String, MatrixDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessDoc {
    #[serde(rename = "in")]
    pub input: AlgebraDoc,
    pub out1: AlgebraDoc,
    pub out2: AlgebraDoc,
    pub delta0: f64,
    pub phi1: Vec<(BlocksDoc, BlocksDoc)>,
    pub phi2: Vec<(BlocksDoc, BlocksDoc)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDoc {
    #[serde(rename = "in")]
    pub input: AlgebraDoc,
    pub ensemble: IndexMap<String, BlocksDoc>,
    pub m1: MeasurementDoc,
    pub m2: MeasurementDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintDoc {
    pub terms: Vec<(usize, MatrixDoc)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpDoc {
    pub blocks: Vec<usize>,
    pub objective: Vec<MatrixDoc>,
    pub constraints: Vec<ConstraintDoc>,
}

/// Objects with a JSON file representation.
pub trait JsonFormat: Sized {
    type Doc: Serialize + for<'de> Deserialize<'de>;

    fn to_doc(&self) -> Self::Doc;
    fn from_doc(doc: Self::Doc) -> Result<Self>;

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("documents always serialize")
    }

    /// Parse; syntax and shape errors carry line and column.
    fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }
}

pub fn load<T: JsonFormat>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    T::from_json(&text).map_err(|e| match e {
        Error::Json(j) => Error::Parse(format!("{}: {j}", path.display())),
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save<T: JsonFormat>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, value.to_json() + "\n")
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// Signed zeros are written as `0.0` so exports are canonical.
pub fn matrix_to_doc(m: &ComplexMatrix) -> MatrixDoc {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| [m[(r, c)].re + 0.0, m[(r, c)].im + 0.0]).collect())
        .collect()
}

pub fn matrix_from_doc(doc: &MatrixDoc) -> Result<ComplexMatrix> {
    let rows = doc.len();
    let cols = doc.first().map_or(0, Vec::len);
    if doc.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    let data = doc.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
    ComplexMatrix::new(rows, cols, data)
}

fn hermitian_from_doc(doc: &MatrixDoc, what: &str) -> Result<HermitianMatrix> {
    HermitianMatrix::new(matrix_from_doc(doc)?).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn blocks_to_doc(blocks: &[ComplexMatrix]) -> BlocksDoc {
    blocks.iter().map(matrix_to_doc).collect()
}

fn blocks_from_doc(doc: &BlocksDoc) -> Result<Vec<ComplexMatrix>> {
    doc.iter().map(matrix_from_doc).collect()
}

fn algebra_from_doc(doc: &AlgebraDoc) -> Result<Algebra> {
    Algebra::new(doc.blocks.clone())
}

fn algebra_doc(a: &Algebra) -> AlgebraDoc {
    AlgebraDoc { blocks: a.blocks().to_vec() }
}

/// Algebra implied by the block shapes of a functional or element.
fn implied_algebra(blocks: &[ComplexMatrix]) -> Result<Algebra> {
    if blocks.iter().any(|b| !b.is_square()) {
        return Err(Error::Parse("blocks must be square".into()));
    }
    Algebra::new(blocks.iter().map(ComplexMatrix::rows).collect())
}

fn element_in(a: &Algebra, doc: &BlocksDoc) -> Result<AlgebraElement> {
    AlgebraElement::new(a.clone(), blocks_from_doc(doc)?)
}

fn functional_in(a: &Algebra, doc: &BlocksDoc) -> Result<StateFunctional> {
    StateFunctional::new(a.clone(), blocks_from_doc(doc)?)
}

impl JsonFormat for Algebra {
    type Doc = AlgebraDoc;

    fn to_doc(&self) -> AlgebraDoc {
        algebra_doc(self)
    }

    fn from_doc(doc: AlgebraDoc) -> Result<Self> {
        algebra_from_doc(&doc)
    }
}

impl JsonFormat for AlgebraElement {
    type Doc = BlocksDoc;

    fn to_doc(&self) -> BlocksDoc {
        blocks_to_doc(self.blocks())
    }

    fn from_doc(doc: BlocksDoc) -> Result<Self> {
        let blocks = blocks_from_doc(&doc)?;
        AlgebraElement::new(implied_algebra(&blocks)?, blocks)
    }
}

impl JsonFormat for StateFunctional {
    type Doc = BlocksDoc;

    fn to_doc(&self) -> BlocksDoc {
        blocks_to_doc(self.blocks())
    }

    fn from_doc(doc: BlocksDoc) -> Result<Self> {
        let blocks = blocks_from_doc(&doc)?;
        StateFunctional::new(implied_algebra(&blocks)?, blocks)
    }
}

impl JsonFormat for Measurement {
    type Doc = MeasurementDoc;

    fn to_doc(&self) -> MeasurementDoc {
        MeasurementDoc {
            algebra: algebra_doc(self.algebra()),
            effects: self
                .labels()
                .iter()
                .zip(self.effects())
                .map(|(l, e)| (l.clone(), blocks_to_doc(e.blocks())))
                .collect(),
        }
    }

    fn from_doc(doc: MeasurementDoc) -> Result<Self> {
        let a = algebra_from_doc(&doc.algebra)?;
        let mut labels = Vec::with_capacity(doc.effects.len());
        let mut effects = Vec::with_capacity(doc.effects.len());
        for (label, e) in &doc.effects {
            labels.push(label.clone());
            effects.push(element_in(&a, e).map_err(|err| Error::Parse(format!("effect {label}: {err}")))?);
        }
        Measurement::new(a, labels, effects)
    }
}

fn parse_choi_key(key: &str) -> Option<(usize, usize)> {
    let (i, j) = key.split_once(',')?;
    Some((i.trim().parse().ok()?, j.trim().parse().ok()?))
}

impl JsonFormat for Channel {
    type Doc = ChannelDoc;

    fn to_doc(&self) -> ChannelDoc {
        let m = self.output().num_blocks();
        let mut choi = IndexMap::new();
        for i in 0..self.input().num_blocks() {
            for j in 0..m {
                choi.insert(format!("{i},{j}"), matrix_to_doc(self.choi(i, j)));
            }
        }
        ChannelDoc { input: algebra_doc(self.input()), out: algebra_doc(self.output()), choi }
    }

    fn from_doc(doc: ChannelDoc) -> Result<Self> {
        let input = algebra_from_doc(&doc.input)?;
        let output = algebra_from_doc(&doc.out)?;
        let (n, m) = (input.num_blocks(), output.num_blocks());
        let mut slots: Vec<Option<HermitianMatrix>> = vec![None; n * m];
        for (key, mat) in &doc.choi {
            let (i, j) = parse_choi_key(key)
                .filter(|&(i, j)| i < n && j < m)
                .ok_or_else(|| Error::Parse(format!("bad Choi key \"{key}\" for {n}x{m} blocks")))?;
            if slots[i * m + j].is_some() {
                return Err(Error::Parse(format!("duplicate Choi key \"{key}\"")));
            }
            slots[i * m + j] = Some(hermitian_from_doc(mat, &format!("Choi block {key}"))?);
        }
        let choi = slots
            .into_iter()
            .enumerate()
            .map(|(k, s)| s.ok_or_else(|| Error::Parse(format!("missing Choi block \"{},{}\"", k / m, k % m))))
            .collect::<Result<Vec<_>>>()?;
        Channel::new(input, output, choi)
    }
}

fn terms_to_doc(terms: &[Term]) -> Vec<(BlocksDoc, BlocksDoc)> {
    terms.iter().map(|(a, b)| (blocks_to_doc(a.blocks()), blocks_to_doc(b.blocks()))).collect()
}

fn terms_from_doc(input: &Algebra, out: &Algebra, doc: &[(BlocksDoc, BlocksDoc)]) -> Result<Vec<Term>> {
    doc.iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let wrap = |e: Error| Error::Parse(format!("term {k}: {e}"));
            Ok((functional_in(input, a).map_err(wrap)?, element_in(out, b).map_err(wrap)?))
        })
        .collect()
}

impl JsonFormat for WitnessForm {
    type Doc = WitnessDoc;

    fn to_doc(&self) -> WitnessDoc {
        WitnessDoc {
            input: algebra_doc(self.input()),
            out1: algebra_doc(self.out1()),
            out2: algebra_doc(self.out2()),
            delta0: self.delta0(),
            phi1: terms_to_doc(self.phi1()),
            phi2: terms_to_doc(self.phi2()),
        }
    }

    fn from_doc(doc: WitnessDoc) -> Result<Self> {
        let input = algebra_from_doc(&doc.input)?;
        let out1 = algebra_from_doc(&doc.out1)?;
        let out2 = algebra_from_doc(&doc.out2)?;
        let phi1 = terms_from_doc(&input, &out1, &doc.phi1)?;
        let phi2 = terms_from_doc(&input, &out2, &doc.phi2)?;
        WitnessForm::new(input, out1, out2, doc.delta0, phi1, phi2)
    }
}

impl JsonFormat for DiscriminationTask {
    type Doc = TaskDoc;

    fn to_doc(&self) -> TaskDoc {
        let e = self.ensemble();
        TaskDoc {
            input: algebra_doc(self.input()),
            ensemble: e
                .labels()
                .iter()
                .zip(e.members())
                .map(|(l, s)| (l.clone(), blocks_to_doc(s.blocks())))
                .collect(),
            m1: self.m1().to_doc(),
            m2: self.m2().to_doc(),
        }
    }

    fn from_doc(doc: TaskDoc) -> Result<Self> {
        let input = algebra_from_doc(&doc.input)?;
        let mut labels = Vec::with_capacity(doc.ensemble.len());
        let mut members = Vec::with_capacity(doc.ensemble.len());
        for (label, s) in &doc.ensemble {
            labels.push(label.clone());
            members.push(functional_in(&input, s).map_err(|e| Error::Parse(format!("ensemble member {label}: {e}")))?);
        }
        let ensemble = StateEnsemble::new(input, labels, members)?;
        DiscriminationTask::new(ensemble, Measurement::from_doc(doc.m1)?, Measurement::from_doc(doc.m2)?)
    }
}

impl JsonFormat for SdpProblem {
    type Doc = SdpDoc;

    fn to_doc(&self) -> SdpDoc {
        SdpDoc {
            blocks: self.blocks().to_vec(),
            objective: self.objective().iter().map(|c| matrix_to_doc(c)).collect(),
            constraints: self
                .constraints()
                .iter()
                .map(|c| ConstraintDoc {
                    terms: c.terms.iter().map(|(k, a)| (*k, matrix_to_doc(a))).collect(),
                    rhs: c.rhs,
                })
                .collect(),
        }
    }

    fn from_doc(doc: SdpDoc) -> Result<Self> {
        let mut p = SdpProblem::new(doc.blocks);
        for (k, c) in doc.objective.iter().enumerate() {
            p.set_objective(k, hermitian_from_doc(c, "objective")?)?;
        }
        for c in &doc.constraints {
            let terms = c
                .terms
                .iter()
                .map(|(k, a)| Ok((*k, hermitian_from_doc(a, "constraint")?)))
                .collect::<Result<Vec<_>>>()?;
            p.add_constraint(terms, c.rhs)?;
        }
        Ok(p)
    }
}
