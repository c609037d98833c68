//! Green's kernel of the two-point problem
//! `(∇^α_{ρ(a)} u)(t) + h(t) = 0` on `N_{a+2}^b`, `u(a) = u(b) = 0`,
//! for a single order `α ∈ (1, 2)`.
//!
//! The solution is `u(t) = Σ_{s=a+1}^{b} G(t, s) h(s)` with
//!
//! ```text
//! Γ(α) G(t, s) = (b-s+1)^{(α-1)} (t-a)^{(α-1)} / (b-a)^{(α-1)}                       t <= s-1
//!              = (b-s+1)^{(α-1)} (t-a)^{(α-1)} / (b-a)^{(α-1)} - (t-s+1)^{(α-1)}     t >= s
//! ```

use std::fmt;

use thiserror::Error;

use crate::nabla::{Grid, GridFunction, NablaError};
use crate::specfun::{self, DomainError};

/// Tie tolerance for the argmax and row-sum comparisons.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreenError {
    #[error("order alpha must lie in (1, 2), got {0}")]
    OrderOutOfRange(f64),
    #[error(transparent)]
    Grid(#[from] NablaError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("forcing term must be defined on [{need_from}, {need_to}], got [{start}, {end}]")]
    GridMismatch {
        need_from: i64,
        need_to: i64,
        start: i64,
        end: i64,
    },
}

fn check_alpha(alpha: f64) -> Result<(), GreenError> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(GreenError::OrderOutOfRange(alpha));
    }
    Ok(())
}

/// Dense table of `G(t, s)` for `t ∈ N_a^b`, `s ∈ N_{a+1}^b`, stored column
/// by column.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenKernel {
    alpha: f64,
    grid: Grid,
    rows: usize,
    table: Vec<f64>,
    lambda: f64,
}

/// `G(t, s)` straight from the two-branch formula, without the structural
/// zeros that [`build_kernel`] writes on the boundary rows and first column.
pub fn green_entry(alpha: f64, a: i64, b: i64, t: i64, s: i64) -> Result<f64, GreenError> {
    check_alpha(alpha)?;
    let r = alpha - 1.0;
    if t == a {
        return Ok(0.0);
    }
    let ln_norm = specfun::log_gamma(alpha)?;
    let ln_ratio =
        specfun::log_rising((t - a) as f64, r)? - specfun::log_rising((b - a) as f64, r)?;
    let first = (ln_ratio + specfun::log_rising((b - s + 1) as f64, r)? - ln_norm).exp();
    if t < s {
        Ok(first)
    } else {
        Ok(first - (specfun::log_rising((t - s + 1) as f64, r)? - ln_norm).exp())
    }
}

/// Builds the kernel table for order `alpha` on `N_a^b`.
pub fn build_kernel(alpha: f64, a: i64, b: i64) -> Result<GreenKernel, GreenError> {
    check_alpha(alpha)?;
    let grid = Grid::new(a, b)?;
    let r = alpha - 1.0;
    let n = grid.len();
    let ln_norm = specfun::log_gamma(alpha)?;

    // ln k^{(α-1)} for k = 1..=b-a; every rising factorial below has an integer base in that range.
    let ln_rise: Vec<f64> = (1..=(b - a))
        .map(|k| specfun::log_rising(k as f64, r))
        .collect::<Result<_, _>>()?;
    let lr = |k: i64| ln_rise[(k - 1) as usize];
    let ln_total = lr(b - a);

    let mut table = vec![0.0; n * (n - 1)];
    // Column s = a+1 and rows t = a, t = b are identically zero; skip them.
    for s in (a + 2)..=b {
        let col = &mut table[((s - a - 1) as usize) * n..((s - a) as usize) * n];
        let ln_left = lr(b - s + 1) - ln_total - ln_norm;
        for t in (a + 1)..b {
            let first = (lr(t - a) + ln_left).exp();
            col[(t - a) as usize] = if t < s {
                first
            } else {
                first - (lr(t - s + 1) - ln_norm).exp()
            };
        }
    }

    Ok(GreenKernel {
        alpha,
        grid,
        rows: n,
        table,
        lambda: lambda_bound(alpha, a, b)?,
    })
}

/// Closed-form row-sum constant
/// `λ = (b-a-1) / (α Γ(α+1)) · (((α-1)(b-a) + 1) / α)^{(α-1)}`.
///
/// This is the value the stability certificates are built on. It does not
/// dominate the actual row sums on most grids; see [`row_sum_bound`].
pub fn lambda_bound(alpha: f64, a: i64, b: i64) -> Result<f64, GreenError> {
    check_alpha(alpha)?;
    Grid::new(a, b)?;
    let len = (b - a) as f64;
    let base = ((alpha - 1.0) * len + 1.0) / alpha;
    let ln = specfun::log_rising(base, alpha - 1.0)? - specfun::log_gamma(alpha + 1.0)?;
    Ok((len - 1.0) / alpha * ln.exp())
}

/// Exact maximum row sum `max_t Σ_s G(t, s)`.
///
/// Summing the kernel in closed form gives
/// `Σ_s G(t, s) = (b - t) (t - a)^{(α-1)} / Γ(α + 1)`; this maximizes it over
/// the grid without building the table.
pub fn row_sum_bound(alpha: f64, a: i64, b: i64) -> Result<f64, GreenError> {
    check_alpha(alpha)?;
    Grid::new(a, b)?;
    let ln_norm = specfun::log_gamma(alpha + 1.0)?;
    let mut best = 0.0f64;
    for t in (a + 1)..b {
        let v =
            (b - t) as f64 * (specfun::log_rising((t - a) as f64, alpha - 1.0)? - ln_norm).exp();
        best = best.max(v);
    }
    Ok(best)
}

impl GreenKernel {
    pub fn alpha(&self) -> f64 {
        self.alpha
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

    /// The closed-form constant of [`lambda_bound`].
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `G(t, s)`.
    ///
    /// # Panics
    /// If `t ∉ [a, b]` or `s ∉ [a+1, b]`.
    pub fn get(&self, t: i64, s: i64) -> f64 {
        let (a, b) = (self.a(), self.b());
        assert!(
            t >= a && t <= b && s > a && s <= b,
            "G({t}, {s}) outside the table"
        );
        self.table[((s - a - 1) as usize) * self.rows + (t - a) as usize]
    }

    /// Column `G(·, s)` over `t = a..=b`.
    pub fn column(&self, s: i64) -> &[f64] {
        let i = (s - self.a() - 1) as usize;
        &self.table[i * self.rows..(i + 1) * self.rows]
    }

    /// `Σ_s G(t, s)` for each `t = a..=b`.
    pub fn row_sums(&self) -> GridFunction {
        GridFunction::from_fn(self.a(), self.b(), |t| {
            ((self.a() + 1)..=self.b()).map(|s| self.get(t, s)).sum()
        })
    }

    pub fn max_row_sum(&self) -> f64 {
        self.row_sums().norm()
    }
}

/// `u(t) = Σ_{s=a+1}^{b} G(t, s) h(s)` on `N_a^b`.
pub fn apply_kernel(kernel: &GreenKernel, h: &GridFunction) -> Result<GridFunction, GreenError> {
    let (a, b) = (kernel.a(), kernel.b());
    if h.start() > a + 1 || h.end() < b {
        return Err(GreenError::GridMismatch {
            need_from: a + 1,
            need_to: b,
            start: h.start(),
            end: h.end(),
        });
    }
    let mut u = vec![0.0; kernel.rows];
    for s in (a + 1)..=b {
        let hs = h.at(s);
        for (ui, g) in u.iter_mut().zip(kernel.column(s)) {
            *ui += g * hs;
        }
    }
    Ok(GridFunction::new(a, u)?)
}

/// Outcome of one item of the kernel property check.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// First violation found, if any.
    pub witness: Option<String>,
}

/// Results of [`verify_properties`], items 1 through 5 in order.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub alpha: f64,
    pub a: i64,
    pub b: i64,
    pub checks: Vec<PropertyCheck>,
    /// For each `s ∈ N_{a+2}^b`, the `t` maximizing `G(t, s)` over the interior.
    pub argmax: Vec<(i64, i64)>,
    pub lambda: f64,
    pub max_row_sum: f64,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, id: u8) -> &PropertyCheck {
        &self.checks[(id - 1) as usize]
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kernel alpha={} on [{}, {}]", self.alpha, self.a, self.b)?;
        for c in &self.checks {
            write!(
                f,
                "  {} {}: {}",
                c.id,
                c.name,
                if c.passed { "pass" } else { "FAIL" }
            )?;
            if let Some(w) = &c.witness {
                write!(f, " ({w})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Scans the table for the five kernel properties:
///
/// 1. `G(a, s) = G(b, s) = 0`;
/// 2. `G(t, a+1) = 0`;
/// 3. `G(t, s) > 0` on `N_{a+1}^{b-1} × N_{a+2}^b`;
/// 4. `max_t G(t, s)` over the interior is attained at `t = s - 1`;
/// 5. `Σ_s G(t, s) <= λ` for every `t`.
///
/// Items 4 and 5 accept ties within [`TIE_TOLERANCE`] (relative for 5).
pub fn verify_properties(kernel: &GreenKernel) -> PropertyReport {
    let (a, b) = (kernel.a(), kernel.b());

    let mut w1 = None;
    'p1: for s in (a + 1)..=b {
        for t in [a, b] {
            let g = kernel.get(t, s);
            if g != 0.0 {
                w1 = Some(format!("G({t}, {s}) = {g:e}"));
                break 'p1;
            }
        }
    }

    let w2 = (a..=b).find_map(|t| {
        let g = kernel.get(t, a + 1);
        (g != 0.0).then(|| format!("G({t}, {}) = {g:e}", a + 1))
    });

    let mut w3 = None;
    'p3: for s in (a + 2)..=b {
        for t in (a + 1)..b {
            let g = kernel.get(t, s);
            if g <= 0.0 || g.is_nan() {
                w3 = Some(format!("G({t}, {s}) = {g:e}"));
                break 'p3;
            }
        }
    }

    let mut w4 = None;
    let mut argmax = Vec::new();
    for s in (a + 2)..=b {
        let mut best_t = a + 1;
        let mut best = f64::NEG_INFINITY;
        for t in (a + 1)..b {
            let g = kernel.get(t, s);
            if g > best {
                best = g;
                best_t = t;
            }
        }
        argmax.push((s, best_t));
        let peak = kernel.get(s - 1, s);
        if w4.is_none() && best - peak > TIE_TOLERANCE {
            w4 = Some(format!(
                "s = {s}: max at t = {best_t} ({best:e}) exceeds G({}, {s}) = {peak:e}",
                s - 1
            ));
        }
    }

    let sums = kernel.row_sums();
    let lambda = kernel.lambda();
    let slack = TIE_TOLERANCE * lambda.max(1.0);
    let w5 = sums.iter().find_map(|(t, v)| {
        (v > lambda + slack).then(|| format!("row t = {t}: sum {v:.12} > lambda {lambda:.12}"))
    });

    let mk = |id, name, witness: Option<String>| PropertyCheck {
        id,
        name,
        passed: witness.is_none(),
        witness,
    };
    PropertyReport {
        alpha: kernel.alpha(),
        a,
        b,
        checks: vec![
            mk(1, "boundary rows vanish", w1),
            mk(2, "first column vanishes", w2),
            mk(3, "interior positivity", w3),
            mk(4, "column maximum at t = s - 1", w4),
            mk(5, "row sums bounded by lambda", w5),
        ],
        argmax,
        lambda,
        max_row_sum: sums.norm(),
    }
}
