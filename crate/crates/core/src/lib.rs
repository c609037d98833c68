//! Solver and certifier for coupled two-point boundary value problems of
//! Riemann–Liouville nabla fractional difference equations
//!
//! ```text
//! (∇^{α1}_{ρ(a)} u1)(t) + f1(t, u1(t), u2(t)) = 0,   t ∈ N_{a+2}^b
//! (∇^{α2}_{ρ(a)} u2)(t) + f2(t, u1(t), u2(t)) = 0,   t ∈ N_{a+2}^b
//! u1(a) = u1(b) = u2(a) = u2(b) = 0,                 1 < α1, α2 < 2
//! ```
//!
//! * [`specfun`]: log-gamma, rising factorials, nabla Taylor monomials.
//! * [`nabla`]: grid functions, integer and fractional nabla differences and sums.
//! * [`green`]: the Green's kernel, its row-sum constant and property scan.
//! * [`expr`]: the expression language used for `f1`, `f2` in configs.
//! * [`system`]: the coupled problem, the fixed-point operator and Picard solver.
//! * [`certify`]: existence/uniqueness and Ulam–Hyers certificates.
//! * [`oracle`]: kernel-free verification paths (operator matrices, direct solves).

pub mod certify;
pub mod expr;
pub mod green;
pub mod linalg;
pub mod nabla;
pub mod oracle;
pub mod specfun;
pub mod system;

pub use certify::{Certificate, ExistenceCertificate, LipschitzData};
pub use expr::{parse, Expr};
pub use green::{GreenKernel, PropertyReport};
pub use nabla::{FracOrder, Grid, GridFunction};

pub use system::{CoupledProblem, SolveReport, SolverConfig};
