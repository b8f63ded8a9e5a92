//! Block-structured linear systems.

use std::ops::Range;

use super::sparse::CsrMatrix;
use crate::fem::{DofMap, Field};
use crate::{Error, Result};

/// Maps matrix rows to `(field, coefficient)` pairs. Before boundary
/// conditions are applied every coefficient of every field has a row; after,
/// only the free ones remain.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    fields: Vec<(Field, usize)>,
    rows: Vec<(Field, usize)>,
    reduced: bool,
}

impl BlockLayout {
    /// Full layout over `fields` in the given order.
    pub fn full(dofs: &DofMap, fields: &[Field]) -> Self {
        let fields: Vec<(Field, usize)> = fields.iter().map(|&f| (f, dofs.field_len(f))).collect();
        let rows = fields
            .iter()
            .flat_map(|&(f, len)| (0..len).map(move |c| (f, c)))
            .collect();
        BlockLayout { fields, rows, reduced: false }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn fields(&self) -> impl Iterator<Item = Field> + '_ {
        self.fields.iter().map(|&(f, _)| f)
    }

    pub fn row(&self, i: usize) -> (Field, usize) {
        self.rows[i]
    }

    pub fn rows(&self) -> &[(Field, usize)] {
        &self.rows
    }

    /// Rows belonging to `field`; they are contiguous.
    pub fn range(&self, field: Field) -> Option<Range<usize>> {
        let start = self.rows.iter().position(|&(f, _)| f == field)?;
        let len = self.rows[start..].iter().take_while(|&&(f, _)| f == field).count();
        Some(start..start + len)
    }

    /// Offset of `field` inside a full-layout vector.
    pub fn full_offset(&self, field: Field) -> Option<Range<usize>> {
        let mut off = 0;
        for &(f, len) in &self.fields {
            if f == field {
                return Some(off..off + len);
            }
            off += len;
        }
        None
    }

    pub fn full_len(&self) -> usize {
        self.fields.iter().map(|&(_, l)| l).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub layout: BlockLayout,
    /// Full-layout vector of prescribed values; nonzero only at eliminated
    /// coefficients.
    pub lift: Vec<f64>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>, layout: BlockLayout) -> Result<Self> {
        if matrix.nrows() != layout.len() || matrix.ncols() != layout.len() || rhs.len() != layout.len() {
            return Err(Error::Parameter(format!(
                "system dimensions {}x{} with rhs {} do not match layout {}",
                matrix.nrows(),
                matrix.ncols(),
                rhs.len(),
                layout.len()
            )));
        }
        let lift = vec![0.0; layout.full_len()];
        Ok(SparseSystem { matrix, rhs, layout, lift })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Removes constrained rows and columns; constrained coefficients take
    /// the values in `prescribed` (a full-layout vector; `None` means zero)
    /// and the right-hand side is adjusted. Applying it to an already reduced
    /// system returns the system unchanged.
    pub fn eliminate(&self, dofs: &DofMap, prescribed: Option<&[f64]>) -> Result<SparseSystem> {
        if self.layout.reduced {
            return Ok(self.clone());
        }
        let full = self.layout.full_len();
        let lift = match prescribed {
            Some(p) if p.len() != full => {
                return Err(Error::Parameter(format!("prescribed values have length {}, expected {full}", p.len())))
            }
            Some(p) => p.to_vec(),
            None => vec![0.0; full],
        };
        let mut keep = Vec::new();
        let mut lift_masked = vec![0.0; full];
        for (i, &(f, c)) in self.layout.rows.iter().enumerate() {
            if dofs.is_constrained(f, c) {
                lift_masked[i] = lift[i];
            } else {
                keep.push(i);
            }
        }
        let a_lift = self.matrix.mul_vec(&lift_masked);
        let rhs = keep.iter().map(|&i| self.rhs[i] - a_lift[i]).collect();
        let matrix = self.matrix.submatrix(&keep, &keep);
        let layout = BlockLayout {
            fields: self.layout.fields.clone(),
            rows: keep.iter().map(|&i| self.layout.rows[i]).collect(),
            reduced: true,
        };
        Ok(SparseSystem { matrix, rhs, layout, lift: lift_masked })
    }

    /// Full-layout vector from a solution of this system.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        if !self.layout.reduced {
            return x.to_vec();
        }
        let mut out = self.lift.clone();
        let mut pos = 0;
        for &(f, c) in &self.layout.rows {
            let off = self.layout.full_offset(f).map_or(0, |r| r.start);
            out[off + c] = x[pos];
            pos += 1;
        }
        out
    }

    /// Restriction of a full-layout vector to this system's rows.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.layout
            .rows
            .iter()
            .map(|&(f, c)| full[self.layout.full_offset(f).map_or(0, |r| r.start) + c])
            .collect()
    }

    /// The block of a full-layout vector belonging to `field`.
    pub fn field_slice<'a>(&self, full: &'a [f64], field: Field) -> &'a [f64] {
        match self.layout.full_offset(field) {
            Some(r) => &full[r],
            None => &[],
        }
    }

    pub fn write_matrix_market(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.matrix.write_matrix_market(std::io::BufWriter::new(file))?;
        Ok(())
    }
}
