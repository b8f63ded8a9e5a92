//! Sparse linear algebra: storage, Krylov iteration, factorizations.

mod direct;
mod gmres;
mod ilu;
mod solve;
mod sparse;
mod system;

pub use direct::{dense_solve, DenseLu, SparseLu};
pub use gmres::{gmres, GmresOutcome, IdentityPreconditioner, Preconditioner};
pub use ilu::Ilu0;
pub use solve::{relative_residual, solve_linear, solve_matrix, ReusedLuSolver, SolveMethod, SolveReport, DENSE_LIMIT};
pub use sparse::{dot, norm2, CsrMatrix, TripletBuilder};
pub use system::{BlockLayout, SparseSystem};
