//! Degree-of-freedom bookkeeping for all six discrete fields.

use std::ops::Range;

use crate::mesh::{DecomposedMesh, Region};

use super::space::{Degree, InterfaceSpace, NodalSpace, NodeTags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    VelocityFree,
    PressureFree,
    VelocityMatrix,
    PressureMatrix,
    Temperature,
    Multiplier,
}

impl Field {
    /// Global numbering order.
    pub const ALL: [Field; 6] = [
        Field::VelocityFree,
        Field::PressureFree,
        Field::VelocityMatrix,
        Field::PressureMatrix,
        Field::Temperature,
        Field::Multiplier,
    ];

    /// Unknowns of the momentum/mass step, in block order.
    pub const FLOW: [Field; 5] = [
        Field::VelocityFree,
        Field::PressureFree,
        Field::VelocityMatrix,
        Field::PressureMatrix,
        Field::Multiplier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::VelocityFree => "u_f",
            Field::PressureFree => "P_f",
            Field::VelocityMatrix => "u_m",
            Field::PressureMatrix => "P_m",
            Field::Temperature => "theta",
            Field::Multiplier => "mu",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Why a coefficient is eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// `u_f = 0` on `Gamma_f`.
    NoSlip,
    /// `u_m . n = 0` on `Gamma_m` (or both components in clamped mode).
    NoPenetration,
    /// `theta = 0` on the outer boundary.
    TemperatureWall,
    /// Interface values fixed to the exact trace (manufactured-solution runs).
    InterfaceClamp,
    /// Pressure constant fixed by pinning one nodal value.
    PressurePin,
}

/// How the interface is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BoundaryMode {
    /// Full coupling through the interface conditions.
    #[default]
    Coupled,
    /// Each subdomain sees homogeneous Dirichlet data on the interface; the
    /// multiplier is inactive and each pressure carries its own constant.
    Clamped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDofs {
    pub field: Field,
    /// Global free index of each coefficient, `None` if eliminated.
    pub free: Vec<Option<usize>>,
    pub constrained: Vec<(usize, Constraint)>,
    pub range: Range<usize>,
}

impl FieldDofs {
    pub fn num_free(&self) -> usize {
        self.range.len()
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    mode: BoundaryMode,
    pub velocity_free: NodalSpace,
    pub pressure_free: NodalSpace,
    pub velocity_matrix: NodalSpace,
    pub pressure_matrix: NodalSpace,
    pub temperature: NodalSpace,
    pub multiplier: InterfaceSpace,
    fields: Vec<FieldDofs>,
}

pub fn build_dof_map(mesh: &DecomposedMesh) -> DofMap {
    DofMap::new(mesh, BoundaryMode::Coupled)
}

impl DofMap {
    pub fn new(mesh: &DecomposedMesh, mode: BoundaryMode) -> Self {
        let velocity_free = NodalSpace::new(mesh, Degree::P2, Some(Region::Free), 2);
        let pressure_free = NodalSpace::new(mesh, Degree::P1, Some(Region::Free), 1);
        let velocity_matrix = NodalSpace::new(mesh, Degree::P2, Some(Region::Matrix), 2);
        let pressure_matrix = NodalSpace::new(mesh, Degree::P1, Some(Region::Matrix), 1);
        let temperature = NodalSpace::new(mesh, Degree::P2, None, 1);
        let multiplier = InterfaceSpace::new(mesh);
        let tags = NodeTags::new(mesh);
        let clamped = mode == BoundaryMode::Clamped;

        let mut constraints: Vec<Vec<(usize, Constraint)>> = vec![Vec::new(); 6];
        for (i, &n) in velocity_free.nodes().iter().enumerate() {
            if tags.gamma_f[n] {
                constraints[0].extend([(2 * i, Constraint::NoSlip), (2 * i + 1, Constraint::NoSlip)]);
            } else if clamped && tags.gamma_i[n] {
                constraints[0]
                    .extend([(2 * i, Constraint::InterfaceClamp), (2 * i + 1, Constraint::InterfaceClamp)]);
            }
        }
        if clamped {
            constraints[1].push((0, Constraint::PressurePin));
        }
        for (i, &n) in velocity_matrix.nodes().iter().enumerate() {
            if clamped && (tags.gamma_m[n] || tags.gamma_i[n]) {
                let kind = if tags.gamma_m[n] { Constraint::NoPenetration } else { Constraint::InterfaceClamp };
                constraints[2].extend([(2 * i, kind), (2 * i + 1, kind)]);
            } else {
                for c in 0..2 {
                    if tags.gamma_m_zero[n][c] {
                        constraints[2].push((2 * i + c, Constraint::NoPenetration));
                    }
                }
            }
        }
        constraints[3].push((0, Constraint::PressurePin));
        for (i, &n) in temperature.nodes().iter().enumerate() {
            if tags.gamma_f[n] || tags.gamma_m[n] {
                constraints[4].push((i, Constraint::TemperatureWall));
            } else if clamped && tags.gamma_i[n] {
                constraints[4].push((i, Constraint::InterfaceClamp));
            }
        }
        if clamped {
            constraints[5].extend((0..multiplier.len()).map(|i| (i, Constraint::InterfaceClamp)));
        }

        let lens = [
            velocity_free.len(),
            pressure_free.len(),
            velocity_matrix.len(),
            pressure_matrix.len(),
            temperature.len(),
            multiplier.len(),
        ];
        let mut fields = Vec::with_capacity(6);
        let mut next = 0;
        for (k, field) in Field::ALL.into_iter().enumerate() {
            let mut fixed = vec![false; lens[k]];
            for &(c, _) in &constraints[k] {
                fixed[c] = true;
            }
            let start = next;
            let free = fixed
                .iter()
                .map(|&f| {
                    (!f).then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect();
            fields.push(FieldDofs {
                field,
                free,
                constrained: std::mem::take(&mut constraints[k]),
                range: start..next,
            });
        }
        DofMap {
            mode,
            velocity_free,
            pressure_free,
            velocity_matrix,
            pressure_matrix,
            temperature,
            multiplier,
            fields,
        }
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn field(&self, field: Field) -> &FieldDofs {
        &self.fields[field.index()]
    }

    /// Number of coefficients of a field, constrained ones included.
    pub fn field_len(&self, field: Field) -> usize {
        self.fields[field.index()].free.len()
    }

    pub fn total_free(&self) -> usize {
        self.fields.last().map_or(0, |f| f.range.end)
    }

    pub fn num_constrained(&self) -> usize {
        self.fields.iter().map(|f| f.constrained.len()).sum()
    }

    pub fn num_constrained_in(&self, fields: &[Field]) -> usize {
        fields.iter().map(|&f| self.field(f).constrained.len()).sum()
    }

    pub fn is_constrained(&self, field: Field, coeff: usize) -> bool {
        self.field(field).free[coeff].is_none()
    }

    /// Nodal space backing a volume field. Panics for the multiplier.
    pub fn space(&self, field: Field) -> &NodalSpace {
        match field {
            Field::VelocityFree => &self.velocity_free,
            Field::PressureFree => &self.pressure_free,
            Field::VelocityMatrix => &self.velocity_matrix,
            Field::PressureMatrix => &self.pressure_matrix,
            Field::Temperature => &self.temperature,
            Field::Multiplier => panic!("the multiplier lives on the interface space"),
        }
    }
}
