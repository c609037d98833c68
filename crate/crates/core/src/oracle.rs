//! Brute-force checks that bypass the Green's kernels entirely: the
//! fractional difference as an explicit matrix, and direct solves of the
//! discrete boundary value problems built on it.

use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix};
use crate::nabla::{nabla_frac_diff, FracOrder, Grid, GridFunction, NablaError};
use crate::system::{CoupledProblem, SystemError};

/// Largest `b - a` accepted by [`direct_solve_nonlinear`].
pub const MAX_NEWTON_SPAN: i64 = 50;
/// Newton stops once the stacked residual is this small.
pub const NEWTON_TARGET: f64 = 1e-12;
/// Anything above this after the iteration budget is a failure.
pub const NEWTON_ACCEPT: f64 = 1e-10;
/// Relative finite-difference step for the Jacobian.
pub const FD_STEP: f64 = 1e-7;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("order {0} outside (1, 2]")]
    OrderOutOfRange(f64),
    #[error(transparent)]
    Nabla(#[from] NablaError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("forcing must cover [{need_from}, {need_to}], got [{start}, {end}]")]
    ForcingDomain {
        need_from: i64,
        need_to: i64,
        start: i64,
        end: i64,
    },
    #[error("grid span {span} exceeds the oracle limit of {MAX_NEWTON_SPAN}")]
    GridTooLarge { span: i64 },
    #[error("Newton stalled after {iterations} iterations at residual {residual:e}")]
    NewtonFailed { iterations: usize, residual: f64 },
}

/// `∇^α_{a-1}` restricted to `N_{a+2}^b` as a dense matrix acting on values
/// at `a..=b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    alpha: f64,
    a: i64,
    b: i64,
    m: Matrix,
}

/// Builds the matrix column by column from unit impulses.
pub fn assemble_operator(alpha: f64, a: i64, b: i64) -> Result<OperatorMatrix, OracleError> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(OracleError::OrderOutOfRange(alpha));
    }
    Grid::new(a, b)?;
    let order = FracOrder::new(alpha)?;
    let n = (b - a + 1) as usize;
    let rows = n - 2;
    let mut m = Matrix::zeros(rows, n);
    for (j, s) in (a..=b).enumerate() {
        let impulse = GridFunction::from_fn(a, b, |t| if t == s { 1.0 } else { 0.0 });
        let d = nabla_frac_diff(&impulse, order, a - 1)?;
        for (i, t) in ((a + 2)..=b).enumerate() {
            m[(i, j)] = d.at(t);
        }
    }
    Ok(OperatorMatrix { alpha, a, b, m })
}

impl OperatorMatrix {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn base(&self) -> i64 {
        self.a - 1
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    /// Entry for row `t ∈ N_{a+2}^b`, column `s ∈ N_a^b`.
    pub fn get(&self, t: i64, s: i64) -> f64 {
        assert!((self.a + 2..=self.b).contains(&t) && (self.a..=self.b).contains(&s));
        self.m[((t - self.a - 2) as usize, (s - self.a) as usize)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    /// Largest magnitude above the diagonal; zero for a causal operator.
    pub fn upper_max(&self) -> f64 {
        let mut worst = 0.0f64;
        for t in (self.a + 2)..=self.b {
            for s in (t + 1)..=self.b {
                worst = worst.max(self.get(t, s).abs());
            }
        }
        worst
    }

    /// `(∇^α u)(t)` for `t ∈ N_{a+2}^b`; `u` must live on `a..=b`.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction, OracleError> {
        if u.start() != self.a || u.end() != self.b {
            return Err(OracleError::ForcingDomain {
                need_from: self.a,
                need_to: self.b,
                start: u.start(),
                end: u.end(),
            });
        }
        Ok(GridFunction::new(self.a + 2, self.m.mul_vec(u.values()))?)
    }
}

/// Solves `∇^α u + h = 0` on `N_{a+2}^b`, `u(a) = u(b) = 0`, as one square
/// system. `h` must cover `N_{a+2}^b`.
pub fn direct_solve_linear(
    alpha: f64,
    a: i64,
    b: i64,
    h: &GridFunction,
) -> Result<GridFunction, OracleError> {
    let op = assemble_operator(alpha, a, b)?;
    if !(h.contains(a + 2) && h.contains(b)) {
        return Err(OracleError::ForcingDomain {
            need_from: a + 2,
            need_to: b,
            start: h.start(),
            end: h.end(),
        });
    }
    let n = (b - a + 1) as usize;
    let mut sys = Matrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    sys[(0, 0)] = 1.0;
    sys[(n - 1, n - 1)] = 1.0;
    // row 0 and row n-1 pin the boundary values; rows between hold t = a+2..b
    for (i, t) in ((a + 2)..=b).enumerate() {
        for j in 0..n {
            sys[(i + 1, j)] = op.m[(i, j)];
        }
        rhs[i + 1] = -h.at(t);
    }
    let x = linalg::solve(sys, rhs)?;
    Ok(GridFunction::new(a, x)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub u1: GridFunction,
    pub u2: GridFunction,
    pub iterations: usize,
    /// Max abs residual of the stacked system at the returned point.
    pub residual: f64,
}

struct Stacked<'a> {
    p: &'a CoupledProblem,
    op1: OperatorMatrix,
    op2: OperatorMatrix,
    /// interior points per component
    m: usize,
}

impl Stacked<'_> {
    fn unpack(&self, x: &[f64]) -> (GridFunction, GridFunction) {
        let a = self.p.a();
        let embed = |part: &[f64]| {
            let mut v = Vec::with_capacity(self.m + 2);
            v.push(0.0);
            v.extend_from_slice(part);
            v.push(0.0);
            GridFunction::new(a, v).expect("nonempty")
        };
        (embed(&x[..self.m]), embed(&x[self.m..]))
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>, OracleError> {
        let (u1, u2) = self.unpack(x);
        let d1 = self.op1.apply(&u1)?;
        let d2 = self.op2.apply(&u2)?;
        let (a, b) = (self.p.a(), self.p.b());
        let mut r = vec![0.0; 2 * self.m];
        for (i, t) in ((a + 2)..=b).enumerate() {
            let (x1, x2) = (u1.at(t), u2.at(t));
            r[i] = d1.at(t) + self.p.eval_f(1, t, x1, x2)?;
            r[self.m + i] = d2.at(t) + self.p.eval_f(2, t, x1, x2)?;
        }
        Ok(r)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped Newton on the stacked residual of the coupled system, with
/// unknowns at the interior points and a forward-difference Jacobian.
pub fn direct_solve_nonlinear(p: &CoupledProblem) -> Result<NewtonReport, OracleError> {
    let span = p.b() - p.a();
    if span > MAX_NEWTON_SPAN {
        return Err(OracleError::GridTooLarge { span });
    }
    let sys = Stacked {
        p,
        op1: assemble_operator(p.alpha1(), p.a(), p.b())?,
        op2: assemble_operator(p.alpha2(), p.a(), p.b())?,
        m: (span - 1) as usize,
    };
    let dim = 2 * sys.m;
    let mut x = vec![0.0; dim];
    let mut r = sys.residual(&x)?;
    let mut norm = max_abs(&r);
    let mut iterations = 0;
    while norm > NEWTON_TARGET && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let mut jac = Matrix::zeros(dim, dim);
        for j in 0..dim {
            let h = FD_STEP * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let h = xp[j] - x[j];
            let rp = sys.residual(&xp)?;
            for i in 0..dim {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let step = linalg::solve(jac, r.iter().map(|v| -v).collect())?;
        let mut damping = 1.0;
        let mut accepted = false;
        while damping >= 1.0 / 1024.0 {
            let trial: Vec<f64> = x
                .iter()
                .zip(&step)
                .map(|(xi, di)| xi + damping * di)
                .collect();
            let rt = sys.residual(&trial)?;
            let nt = max_abs(&rt);
            if nt < norm {
                x = trial;
                r = rt;
                norm = nt;
                accepted = true;
                break;
            }
            damping /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    if norm > NEWTON_ACCEPT || !norm.is_finite() {
        return Err(OracleError::NewtonFailed {
            iterations,
            residual: norm,
        });
    }
    let (u1, u2) = sys.unpack(&x);
    Ok(NewtonReport {
        u1,
        u2,
        iterations,
        residual: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::green::{apply_kernel, build_kernel};
    use crate::system::{solve_picard, SolverConfig};

    #[test]
    fn second_order_is_the_three_point_stencil() {
        let op = assemble_operator(2.0, 0, 6).unwrap();
        for t in 2..=6 {
            for s in 0..=6 {
                let want = match t - s {
                    0 => 1.0,
                    1 => -2.0,
                    2 => 1.0,
                    _ => 0.0,
                };
                assert_eq!(op.get(t, s), want, "({t}, {s})");
            }
        }
    }

    #[test]
    fn operator_is_causal() {
        for alpha in [1.1, 1.5, 1.9, 2.0] {
            assert_eq!(assemble_operator(alpha, -3, 9).unwrap().upper_max(), 0.0);
        }
    }

    #[test]
    fn order_range() {
        assert!(assemble_operator(1.0, 0, 5).is_err());
        assert!(assemble_operator(2.5, 0, 5).is_err());
        assert!(assemble_operator(1.5, 0, 1).is_err());
    }

    #[test]
    fn operator_inverts_kernel_columns() {
        for alpha in [1.1, 1.5, 1.9] {
            for span in 2..=12 {
                let op = assemble_operator(alpha, 0, span).unwrap();
                let g = build_kernel(alpha, 0, span).unwrap();
                for s0 in 1..=span {
                    let col = GridFunction::from_fn(0, span, |t| g.get(t, s0));
                    let d = op.apply(&col).unwrap();
                    for t in 2..=span {
                        let want = if t == s0 { -1.0 } else { 0.0 };
                        assert!(
                            (d.at(t) - want).abs() <= 1e-9,
                            "alpha {alpha} span {span} ({t}, {s0})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn linear_solve_matches_kernel() {
        let h = GridFunction::from_fn(1, 9, |t| (1.3 * t as f64).sin() + 0.2);
        let u = direct_solve_linear(1.5, 0, 9, &h).unwrap();
        let g = build_kernel(1.5, 0, 9).unwrap();
        let want = apply_kernel(&g, &h).unwrap();
        assert!(u.distance(&want) <= 1e-9, "{}", u.distance(&want));
        assert_eq!((u.at(0), u.at(9)), (0.0, 0.0));
    }

    #[test]
    fn impulse_gives_kernel_column() {
        let g = build_kernel(1.5, 0, 9).unwrap();
        for s0 in 2..=9 {
            let h = GridFunction::from_fn(2, 9, |t| if t == s0 { 1.0 } else { 0.0 });
            let u = direct_solve_linear(1.5, 0, 9, &h).unwrap();
            for t in 0..=9 {
                assert!((u.at(t) - g.get(t, s0)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn zero_forcing() {
        let u = direct_solve_linear(1.3, 2, 8, &GridFunction::zeros(4, 8)).unwrap();
        assert_eq!(u.norm(), 0.0);
        let p = CoupledProblem::new(0, 5, 1.5, 1.5, |_, _, _| 0.0, |_, _, _| 0.0).unwrap();
        let r = direct_solve_nonlinear(&p).unwrap();
        assert_eq!((r.u1.norm(), r.u2.norm(), r.iterations), (0.0, 0.0, 0));
    }

    #[test]
    fn forcing_domain_checked() {
        assert!(matches!(
            direct_solve_linear(1.5, 0, 9, &GridFunction::zeros(3, 9)),
            Err(OracleError::ForcingDomain { .. })
        ));
    }

    #[test]
    fn newton_agrees_with_picard_on_worked_example() {
        let p = CoupledProblem::new(
            0,
            9,
            1.5,
            1.5,
            parse("0.01*exp(-t)*(1 + atan(u1) + atan(u2))").unwrap(),
            parse("0.02*(exp(-t) + sin(u1) + sin(u2))").unwrap(),
        )
        .unwrap();
        let newton = direct_solve_nonlinear(&p).unwrap();
        let picard = solve_picard(&p, &SolverConfig::default()).unwrap();
        assert!(newton.residual <= NEWTON_ACCEPT);
        assert!(newton.u1.distance(&picard.u1) <= 1e-8);
        assert!(newton.u2.distance(&picard.u2) <= 1e-8);
    }

    #[test]
    fn newton_on_constant_forcing_matches_linear_solves() {
        let p = CoupledProblem::new(
            1,
            11,
            1.25,
            1.8,
            |t: f64, _, _| t.cos(),
            |t: f64, _, _| 1.0 / (1.0 + t),
        )
        .unwrap();
        let r = direct_solve_nonlinear(&p).unwrap();
        let h1 = GridFunction::from_fn(3, 11, |t| (t as f64).cos());
        let h2 = GridFunction::from_fn(3, 11, |t| 1.0 / (1.0 + t as f64));
        assert!(r.u1.distance(&direct_solve_linear(1.25, 1, 11, &h1).unwrap()) <= 1e-9);
        assert!(r.u2.distance(&direct_solve_linear(1.8, 1, 11, &h2).unwrap()) <= 1e-9);
    }

    #[test]
    fn newton_grid_limit() {
        let p = CoupledProblem::new(0, 51, 1.5, 1.5, |_, _, _| 0.0, |_, _, _| 0.0).unwrap();
        assert!(matches!(
            direct_solve_nonlinear(&p),
            Err(OracleError::GridTooLarge { span: 51 })
        ));
    }

    #[test]
    fn newton_reports_failure() {
        // forcing so large that finite differences cannot see the operator
        let p = CoupledProblem::new(0, 6, 1.5, 1.5, |_, _, _| 1e200, |_, _, _| 0.0).unwrap();
        assert!(direct_solve_nonlinear(&p).is_err());
    }
}
