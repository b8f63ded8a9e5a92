//! Discrete fields at one time level.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::fem::{DofMap, Field};

/// Full nodal coefficient vectors of every field; entries at constrained
/// coefficients are exactly zero (or the prescribed value in clamped mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub u_f: Vec<f64>,
    pub p_f: Vec<f64>,
    pub u_m: Vec<f64>,
    pub p_m: Vec<f64>,
    pub mu: Vec<f64>,
    pub theta: Vec<f64>,
}

impl State {
    pub fn zeros(dofs: &DofMap, t: f64) -> Self {
        State {
            t,
            u_f: vec![0.0; dofs.field_len(Field::VelocityFree)],
            p_f: vec![0.0; dofs.field_len(Field::PressureFree)],
            u_m: vec![0.0; dofs.field_len(Field::VelocityMatrix)],
            p_m: vec![0.0; dofs.field_len(Field::PressureMatrix)],
            mu: vec![0.0; dofs.field_len(Field::Multiplier)],
            theta: vec![0.0; dofs.field_len(Field::Temperature)],
        }
    }

    pub fn field(&self, field: Field) -> &[f64] {
        match field {
            Field::VelocityFree => &self.u_f,
            Field::PressureFree => &self.p_f,
            Field::VelocityMatrix => &self.u_m,
            Field::PressureMatrix => &self.p_m,
            Field::Multiplier => &self.mu,
            Field::Temperature => &self.theta,
        }
    }

    pub fn field_mut(&mut self, field: Field) -> &mut Vec<f64> {
        match field {
            Field::VelocityFree => &mut self.u_f,
            Field::PressureFree => &mut self.p_f,
            Field::VelocityMatrix => &mut self.u_m,
            Field::PressureMatrix => &mut self.p_m,
            Field::Multiplier => &mut self.mu,
            Field::Temperature => &mut self.theta,
        }
    }

    /// Concatenation of `fields` in the given order.
    pub fn gather(&self, fields: &[Field]) -> Vec<f64> {
        fields.iter().flat_map(|&f| self.field(f).iter().copied()).collect()
    }

    /// Inverse of [`State::gather`].
    pub fn scatter(&mut self, fields: &[Field], full: &[f64]) {
        let mut off = 0;
        for &f in fields {
            let dst = self.field_mut(f);
            let n = dst.len();
            dst.copy_from_slice(&full[off..off + n]);
            off += n;
        }
    }

    pub fn validate_sizes(&self, dofs: &DofMap) -> Result<()> {
        for f in Field::ALL {
            let n = self.field(f).len();
            if n != dofs.field_len(f) {
                return param_err(format!("{} has {n} coefficients, expected {}", f.name(), dofs.field_len(f)));
            }
        }
        Ok(())
    }

    /// Checks sizes against the map and that constrained entries vanish.
    pub fn validate(&self, dofs: &DofMap) -> Result<()> {
        self.validate_sizes(dofs)?;
        for f in Field::ALL {
            let v = self.field(f);
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return param_err(format!("{}[{k}] is not finite", f.name()));
            }
            for &(c, _) in &dofs.field(f).constrained {
                if v[c] != 0.0 {
                    return param_err(format!("{}[{c}] is constrained but equals {}", f.name(), v[c]));
                }
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        Field::ALL
            .iter()
            .flat_map(|&f| self.field(f).iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}
