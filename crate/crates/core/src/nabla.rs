//! Integer and fractional nabla (backward) differences and sums on integer
//! grids.
//!
//! A [`GridFunction`] carries the first grid point it is defined on, so the
//! shrinking domains of the operators (`∇^N u` lives on `N_{a+N}`) are explicit
//! and reads outside them fail instead of returning padding.

use thiserror::Error;

use crate::specfun::{self, DomainError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NablaError {
    #[error("grid function must have at least one value")]
    Empty,
    #[error("grid [{a}, {b}] needs b - a >= 2")]
    GridTooSmall { a: i64, b: i64 },
    #[error("operator needs at least {needed} points, grid function has {len}")]
    GridTooShort { needed: usize, len: usize },
    #[error("point {t} is outside the domain [{start}, {end}]")]
    OutOfDomain { t: i64, start: i64, end: i64 },
    #[error(
        "grid function starts at {start}, operator based at {base} needs values from {needed}"
    )]
    BaseMismatch { start: i64, base: i64, needed: i64 },
    #[error("order must be finite and positive, got {0}")]
    InvalidOrder(f64),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// The closed integer grid `N_a^b` of a boundary value problem, `b - a >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    a: i64,
    b: i64,
}

impl Grid {
    pub fn new(a: i64, b: i64) -> Result<Self, NablaError> {
        if b - a < 2 {
            return Err(NablaError::GridTooSmall { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    /// Number of points, `b - a + 1`.
    pub fn len(&self) -> usize {
        (self.b - self.a + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> std::ops::RangeInclusive<i64> {
        self.a..=self.b
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction::zeros(self.a, self.b)
    }
}

/// Real values on consecutive integer points `start, start + 1, ..., end`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    start: i64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(start: i64, values: Vec<f64>) -> Result<Self, NablaError> {
        if values.is_empty() {
            return Err(NablaError::Empty);
        }
        Ok(Self { start, values })
    }

    /// Zero function on `start..=end`.
    ///
    /// # Panics
    /// If `end < start`.
    pub fn zeros(start: i64, end: i64) -> Self {
        assert!(end >= start, "empty range {start}..={end}");
        Self {
            start,
            values: vec![0.0; (end - start + 1) as usize],
        }
    }

    /// Tabulates `f` on `start..=end`.
    ///
    /// # Panics
    /// If `end < start`.
    pub fn from_fn(start: i64, end: i64, mut f: impl FnMut(i64) -> f64) -> Self {
        assert!(end >= start, "empty range {start}..={end}");
        Self {
            start,
            values: (start..=end).map(&mut f).collect(),
        }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t <= self.end()
    }

    pub fn get(&self, t: i64) -> Result<f64, NablaError> {
        if !self.contains(t) {
            return Err(NablaError::OutOfDomain {
                t,
                start: self.start,
                end: self.end(),
            });
        }
        Ok(self.values[(t - self.start) as usize])
    }

    /// Value at `t`.
    ///
    /// # Panics
    /// If `t` is outside the domain.
    pub fn at(&self, t: i64) -> f64 {
        match self.get(t) {
            Ok(v) => v,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start + i as i64, v))
    }

    /// Restriction to `from..=to`.
    pub fn restrict(&self, from: i64, to: i64) -> Result<Self, NablaError> {
        for t in [from, to] {
            if !self.contains(t) {
                return Err(NablaError::OutOfDomain {
                    t,
                    start: self.start,
                    end: self.end(),
                });
            }
        }
        if to < from {
            return Err(NablaError::Empty);
        }
        let lo = (from - self.start) as usize;
        let hi = (to - self.start) as usize;
        Ok(Self {
            start: from,
            values: self.values[lo..=hi].to_vec(),
        })
    }

    /// Maximum norm `max_t |u(t)|`.
    pub fn norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_t |self(t) - other(t)|` over the common domain.
    pub fn distance(&self, other: &Self) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        (lo..=hi)
            .map(|t| (self.at(t) - other.at(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// A positive order `nu` and its ceiling `N` with `N - 1 < nu <= N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    nu: f64,
    ceil: usize,
}

impl FracOrder {
    pub fn new(nu: f64) -> Result<Self, NablaError> {
        if !nu.is_finite() || nu <= 0.0 {
            return Err(NablaError::InvalidOrder(nu));
        }
        Ok(Self {
            nu,
            ceil: nu.ceil() as usize,
        })
    }

    pub fn value(&self) -> f64 {
        self.nu
    }

    pub fn ceil(&self) -> usize {
        self.ceil
    }
}

/// `N`-th order nabla difference. The result lives on `start + N ..= end`.
pub fn nabla_diff(u: &GridFunction, order: usize) -> Result<GridFunction, NablaError> {
    if u.len() < order + 1 {
        return Err(NablaError::GridTooShort {
            needed: order + 1,
            len: u.len(),
        });
    }
    let mut v = u.values.clone();
    for _ in 0..order {
        v = v.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(GridFunction {
        start: u.start + order as i64,
        values: v,
    })
}

/// `H_{nu-1}(k + 1, 0)` for `k = 0..n`: the weight of `u(t - k)` in a sum of
/// order `nu`.
pub(crate) fn sum_weights(nu: f64, n: usize) -> Result<Vec<f64>, NablaError> {
    (0..n as i64)
        .map(|k| specfun::taylor_monomial(nu - 1.0, k + 1, 0).map_err(NablaError::from))
        .collect()
}

/// Nabla sum of order `nu` based at `base`:
/// `(∇_base^{-nu} u)(t) = Σ_{s=base+1}^{t} H_{nu-1}(t, s - 1) u(s)`.
///
/// `u` must be defined from `base + 1` (a value at `base` is ignored). The
/// result lives on `base..=u.end()` and is zero at `base`.
pub fn nabla_sum(u: &GridFunction, nu: FracOrder, base: i64) -> Result<GridFunction, NablaError> {
    let first = base + 1;
    if u.start > first || u.end() < first {
        return Err(NablaError::BaseMismatch {
            start: u.start,
            base,
            needed: first,
        });
    }
    let src = &u.values[(first - u.start) as usize..];
    let w = sum_weights(nu.value(), src.len())?;
    let mut out = Vec::with_capacity(src.len() + 1);
    out.push(0.0);
    for i in 0..src.len() {
        // t = first + i; s = first + j; weight index t - s = i - j
        let acc: f64 = (0..=i).map(|j| w[i - j] * src[j]).sum();
        out.push(acc);
    }
    Ok(GridFunction {
        start: base,
        values: out,
    })
}

/// Riemann–Liouville nabla difference `∇_base^nu u = ∇^N ∇_base^{-(N - nu)} u`.
///
/// For non-integer `nu` the result lives on `base + N ..= u.end()`. For
/// integer `nu` the inner sum is the identity and `u` is differenced on its
/// own domain, giving `u.start() + N ..= u.end()`.
pub fn nabla_frac_diff(
    u: &GridFunction,
    nu: FracOrder,
    base: i64,
) -> Result<GridFunction, NablaError> {
    let n = nu.ceil();
    let inner_order = n as f64 - nu.value();
    if inner_order == 0.0 {
        return nabla_diff(u, n);
    }
    let inner = nabla_sum(u, FracOrder::new(inner_order)?, base)?;
    nabla_diff(&inner, n)
}
