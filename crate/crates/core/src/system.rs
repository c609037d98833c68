//! The coupled problem, its fixed-point operator `T = (T1, T2)` and the
//! Picard iteration that realizes the contraction argument.
//!
//! `T_i(u1, u2)(t) = Σ_{s=a+1}^{b} G_i(t, s) f_i(s, u1(s), u2(s))`, so a fixed
//! point of `T` is exactly a solution of the coupled boundary value problem.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::green::{self, GreenError, GreenKernel};
use crate::nabla::{nabla_frac_diff, FracOrder, Grid, GridFunction, NablaError};

/// Boundary values must vanish to within this before residuals are taken.
pub const BOUNDARY_TOLERANCE: f64 = 1e-14;

/// A right-hand side `f(t, u1, u2)`.
pub trait Nonlinearity: Send + Sync {
    fn eval(&self, t: f64, u1: f64, u2: f64) -> Result<f64, EvalError>;
}

impl Nonlinearity for Expr {
    fn eval(&self, t: f64, u1: f64, u2: f64) -> Result<f64, EvalError> {
        self.evaluate(t, u1, u2)
    }
}

impl<F> Nonlinearity for F
where
    F: Fn(f64, f64, f64) -> f64 + Send + Sync,
{
    fn eval(&self, t: f64, u1: f64, u2: f64) -> Result<f64, EvalError> {
        Ok(self(t, u1, u2))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Grid(#[from] NablaError),
    #[error("f{component} failed at (s = {t}, u1 = {u1}, u2 = {u2}): {source}")]
    Eval {
        component: u8,
        t: i64,
        u1: f64,
        u2: f64,
        #[source]
        source: EvalError,
    },
    #[error("grid function on [{start}, {end}] does not match the problem grid [{a}, {b}]")]
    GridMismatch {
        a: i64,
        b: i64,
        start: i64,
        end: i64,
    },
    #[error("u{component}({t}) = {value:e} violates the zero boundary condition")]
    BoundaryViolation { component: u8, t: i64, value: f64 },
}

/// Coupled problem data. Both Green's kernels are built on construction and
/// shared read-only.
#[derive(Clone)]
pub struct CoupledProblem {
    grid: Grid,
    alpha1: f64,
    alpha2: f64,
    f1: Arc<dyn Nonlinearity>,
    f2: Arc<dyn Nonlinearity>,
    kernel1: Arc<GreenKernel>,
    kernel2: Arc<GreenKernel>,
}

impl fmt::Debug for CoupledProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoupledProblem")
            .field("grid", &self.grid)
            .field("alpha1", &self.alpha1)
            .field("alpha2", &self.alpha2)
            .finish_non_exhaustive()
    }
}

impl CoupledProblem {
    pub fn new(
        a: i64,
        b: i64,
        alpha1: f64,
        alpha2: f64,
        f1: impl Nonlinearity + 'static,
        f2: impl Nonlinearity + 'static,
    ) -> Result<Self, SystemError> {
        Self::from_shared(a, b, alpha1, alpha2, Arc::new(f1), Arc::new(f2))
    }

    pub fn from_shared(
        a: i64,
        b: i64,
        alpha1: f64,
        alpha2: f64,
        f1: Arc<dyn Nonlinearity>,
        f2: Arc<dyn Nonlinearity>,
    ) -> Result<Self, SystemError> {
        let grid = Grid::new(a, b)?;
        let kernel1 = Arc::new(green::build_kernel(alpha1, a, b)?);
        let kernel2 = if alpha2 == alpha1 {
            kernel1.clone()
        } else {
            Arc::new(green::build_kernel(alpha2, a, b)?)
        };
        Ok(Self {
            grid,
            alpha1,
            alpha2,
            f1,
            f2,
            kernel1,
            kernel2,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn a(&self) -> i64 {
        self.grid.a()
    }

    pub fn b(&self) -> i64 {
        self.grid.b()
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn kernel1(&self) -> &GreenKernel {
        &self.kernel1
    }

    pub fn kernel2(&self) -> &GreenKernel {
        &self.kernel2
    }

    /// `f_component(t, u1, u2)` with the evaluation point attached to errors.
    pub fn eval_f(&self, component: u8, t: i64, u1: f64, u2: f64) -> Result<f64, SystemError> {
        let f = if component == 1 { &self.f1 } else { &self.f2 };
        f.eval(t as f64, u1, u2)
            .map_err(|source| SystemError::Eval {
                component,
                t,
                u1,
                u2,
                source,
            })
    }

    fn check_on_grid(&self, u: &GridFunction) -> Result<(), SystemError> {
        if u.start() != self.a() || u.end() != self.b() {
            return Err(SystemError::GridMismatch {
                a: self.a(),
                b: self.b(),
                start: u.start(),
                end: u.end(),
            });
        }
        Ok(())
    }
}

/// `‖(u1, u2)‖ = ‖u1‖ + ‖u2‖`.
pub fn product_norm(u1: &GridFunction, u2: &GridFunction) -> f64 {
    u1.norm() + u2.norm()
}

/// `‖(u1, u2) - (v1, v2)‖` in the product norm.
pub fn product_distance(
    u: (&GridFunction, &GridFunction),
    v: (&GridFunction, &GridFunction),
) -> f64 {
    u.0.distance(v.0) + u.1.distance(v.1)
}

/// `T(u1, u2)`: both outputs vanish at `a` and `b`.
pub fn apply_t(
    p: &CoupledProblem,
    u1: &GridFunction,
    u2: &GridFunction,
) -> Result<(GridFunction, GridFunction), SystemError> {
    p.check_on_grid(u1)?;
    p.check_on_grid(u2)?;
    let (a, b) = (p.a(), p.b());
    let mut h1 = Vec::with_capacity((b - a) as usize);
    let mut h2 = Vec::with_capacity((b - a) as usize);
    for s in (a + 1)..=b {
        let (x, y) = (u1.at(s), u2.at(s));
        h1.push(p.eval_f(1, s, x, y)?);
        h2.push(p.eval_f(2, s, x, y)?);
    }
    let h1 = GridFunction::new(a + 1, h1)?;
    let h2 = GridFunction::new(a + 1, h2)?;
    Ok((
        green::apply_kernel(p.kernel1(), &h1)?,
        green::apply_kernel(p.kernel2(), &h2)?,
    ))
}

/// Max defect of each equation on `N_{a+2}^b`, computed with the nabla
/// operators directly (no kernels involved).
pub fn residuals(
    p: &CoupledProblem,
    u1: &GridFunction,
    u2: &GridFunction,
) -> Result<(f64, f64), SystemError> {
    p.check_on_grid(u1)?;
    p.check_on_grid(u2)?;
    let (a, b) = (p.a(), p.b());
    for (component, u) in [(1u8, u1), (2, u2)] {
        for t in [a, b] {
            let value = u.at(t);
            if value.abs() > BOUNDARY_TOLERANCE {
                return Err(SystemError::BoundaryViolation {
                    component,
                    t,
                    value,
                });
            }
        }
    }
    let d1 = nabla_frac_diff(u1, FracOrder::new(p.alpha1)?, a - 1)?;
    let d2 = nabla_frac_diff(u2, FracOrder::new(p.alpha2)?, a - 1)?;
    let mut r = (0.0f64, 0.0f64);
    for t in (a + 2)..=b {
        let (x, y) = (u1.at(t), u2.at(t));
        r.0 = r.0.max((d1.at(t) + p.eval_f(1, t, x, y)?).abs());
        r.1 = r.1.max((d2.at(t) + p.eval_f(2, t, x, y)?).abs());
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once the product-norm step falls to this.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting pair; the zero pair when `None`.
    pub initial: Option<(GridFunction, GridFunction)>,
    /// Certified contraction constant, if one was established. Reports are
    /// stamped certified only when this lies in `[0, 1)`.
    pub contraction: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            initial: None,
            contraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub u1: GridFunction,
    pub u2: GridFunction,
    pub iterations: usize,
    /// `‖x_{k+1} - x_k‖` for each sweep, in the product norm.
    pub step_norms: Vec<f64>,
    pub residual1: f64,
    pub residual2: f64,
    pub converged: bool,
    /// False when no contraction constant below one backed the run.
    pub certified: bool,
}

impl SolveReport {
    pub fn max_residual(&self) -> f64 {
        self.residual1.max(self.residual2)
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} after {} iterations ({})",
            if self.converged {
                "converged"
            } else {
                "NOT converged"
            },
            self.iterations,
            if self.certified {
                "certified"
            } else {
                "uncertified"
            }
        )?;
        if let Some(last) = self.step_norms.last() {
            writeln!(f, "final step: {last:.3e}")?;
        }
        writeln!(f, "residual u1: {:.3e}", self.residual1)?;
        write!(f, "residual u2: {:.3e}", self.residual2)
    }
}

/// Picard iteration `x_{k+1} = T(x_k)` until the step is within `cfg.tol`
/// or `cfg.max_iter` sweeps have run. Non-convergence is reported, not
/// raised; evaluation failures are raised.
pub fn solve_picard(p: &CoupledProblem, cfg: &SolverConfig) -> Result<SolveReport, SystemError> {
    let (mut x1, mut x2) = match &cfg.initial {
        Some((u1, u2)) => {
            p.check_on_grid(u1)?;
            p.check_on_grid(u2)?;
            (u1.clone(), u2.clone())
        }
        None => (p.grid().zeros(), p.grid().zeros()),
    };
    let mut step_norms = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let (y1, y2) = apply_t(p, &x1, &x2)?;
        let step = product_distance((&y1, &y2), (&x1, &x2));
        step_norms.push(step);
        x1 = y1;
        x2 = y2;
        if step <= cfg.tol {
            converged = true;
            break;
        }
        if !step.is_finite() {
            break;
        }
    }
    let (residual1, residual2) = residuals(p, &x1, &x2)?;
    Ok(SolveReport {
        u1: x1,
        u2: x2,
        iterations: step_norms.len(),
        step_norms,
        residual1,
        residual2,
        converged,
        certified: cfg.contraction.is_some_and(|l| (0.0..1.0).contains(&l)),
    })
}
