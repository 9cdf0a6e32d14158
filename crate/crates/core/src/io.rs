//! JSON documents for Hamiltonians, states and channels, and the report
//! writer.
//!
//! Complex matrices are row-major nested arrays of `[re, im]` pairs. Floats
//! are written with 17 significant digits so that every value round-trips
//! exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channels::{ChannelFamily, KrausChannel};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{c, CMatrix};
use crate::spectra::{DensityMatrix, Hamiltonian};

pub type MatrixDoc = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_doc(m: &CMatrix) -> MatrixDoc {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn doc_to_matrix(doc: &MatrixDoc) -> Result<CMatrix> {
    let rows = doc.len();
    let cols = doc.first().map_or(0, Vec::len);
    if rows == 0 || doc.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("matrix rows must be nonempty and of equal length".into()));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| c(doc[i][j][0], doc[i][j][1])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianDoc {
    pub eigenvalues: Vec<f64>,
    #[serde(default)]
    pub basis: Option<MatrixDoc>,
}

impl HamiltonianDoc {
    pub fn from_hamiltonian(h: &Hamiltonian) -> Self {
        Self {
            eigenvalues: h.eigenvalues().to_vec(),
            basis: h.basis().map(matrix_to_doc),
        }
    }

    pub fn to_hamiltonian(&self) -> Result<Hamiltonian> {
        match &self.basis {
            Some(b) => Hamiltonian::with_basis(self.eigenvalues.clone(), doc_to_matrix(b)?),
            None => Hamiltonian::new(self.eigenvalues.clone()),
        }
    }
}

/// `{"dim", "hamiltonian": {"eigenvalues", "basis"}, "rho"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub dim: usize,
    pub hamiltonian: HamiltonianDoc,
    pub rho: MatrixDoc,
}

impl StateDoc {
    pub fn new(h: &Hamiltonian, rho: &DensityMatrix) -> Self {
        Self {
            dim: rho.dim(),
            hamiltonian: HamiltonianDoc::from_hamiltonian(h),
            rho: matrix_to_doc(rho.matrix()),
        }
    }

    pub fn parse(&self) -> Result<(Hamiltonian, DensityMatrix)> {
        let h = self.hamiltonian.to_hamiltonian()?;
        let rho = DensityMatrix::new(doc_to_matrix(&self.rho)?)?;
        ensure_dim(self.dim, h.dim())?;
        ensure_dim(self.dim, rho.dim())?;
        Ok((h, rho))
    }
}

/// `{"dim", "label", "kraus"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub dim: usize,
    #[serde(default)]
    pub label: String,
    pub kraus: Vec<MatrixDoc>,
}

impl ChannelDoc {
    pub fn from_channel(ch: &KrausChannel) -> Self {
        Self {
            dim: ch.dim(),
            label: ch.label().to_string(),
            kraus: ch.kraus().iter().map(matrix_to_doc).collect(),
        }
    }

    pub fn to_channel(&self) -> Result<KrausChannel> {
        let kraus = self.kraus.iter().map(doc_to_matrix).collect::<Result<Vec<_>>>()?;
        let ch = KrausChannel::new(kraus, self.label.clone())?;
        ensure_dim(self.dim, ch.dim())?;
        Ok(ch)
    }
}

/// A channel file: either explicit Kraus operators or a named family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Kraus(ChannelDoc),
    Family(ChannelFamily),
}

impl ChannelSpec {
    pub fn to_family(&self) -> Result<ChannelFamily> {
        match self {
            ChannelSpec::Kraus(doc) => Ok(ChannelFamily::Fixed(doc.to_channel()?)),
            ChannelSpec::Family(f) => Ok(f.clone()),
        }
    }
}

pub fn read_state(text: &str) -> Result<(Hamiltonian, DensityMatrix)> {
    let doc: StateDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.parse()
}

pub fn read_channel(text: &str) -> Result<ChannelFamily> {
    let spec: ChannelSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    spec.to_family()
}

/// Writes every float as `{:.16e}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write!(writer, "{:.16e}", f64::from(value))
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    value.serialize(&mut ser)?;
    String::from_utf8(out).map_err(|e| Error::Parse(e.to_string()))
}

/// Float cell for CSV output, locale independent.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}
