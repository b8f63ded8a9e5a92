//! Lagrange elements, quadrature, degree-of-freedom maps and field norms.

pub mod dofs;
pub mod field;
pub mod quadrature;
pub mod shape;
pub mod space;

pub use dofs::{build_dof_map, BoundaryMode, Constraint, DofMap, Field, FieldDofs};
pub use field::{
    edge_rule, eval_at_ref, eval_on_cell, evaluate, field_norm, interpolate, interpolate_scalar, tables, NormKind,
    PointValue, RefTables,
};
pub use quadrature::{quadrature_rule, segment_rule, QuadratureRule, SegmentRule};
pub use shape::{shape_functions, AffineMap, ElementKind, ShapeEval};
pub use space::{Degree, InterfaceSegment, InterfaceSpace, NodalSpace};
