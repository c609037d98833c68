//! Existence and Ulam–Hyers stability certificates.
//!
//! With Lipschitz data `|f1(t,u) - f1(t,v)| <= L1|u1-v1| + L2|u2-v2|` (and
//! `L3`, `L4` for `f2`), the operator `T` contracts in the product norm with
//! rate `L = λ1(L1+L2) + λ2(L3+L4)`. Componentwise the defect of any pair
//! obeys `d <= ε + H d`, which is where `H` and `(I - H)^{-1}` come from.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

use crate::nabla::GridFunction;
use crate::system::{apply_t, product_distance, CoupledProblem, SystemError};

pub type Mat2 = [[f64; 2]; 2];

/// Relative gap between the closed-form λ and the exact kernel row-sum
/// maximum above which a note is attached.
const LAMBDA_GAP_NOTE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("{name} must be finite and nonnegative, got {value}")]
    InvalidConstant { name: &'static str, value: f64 },
    #[error("stability was not certified (spectral radius {0} >= 1)")]
    NotStable(f64),
    #[error("fixed point does not live on the problem grid")]
    FixedPointGrid,
    #[error("epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("certificate JSON: {0}")]
    Json(String),
}

/// Lipschitz constants `L1..L4` and forcing bounds `M1 = max |f1(t,0,0)|`,
/// `M2 = max |f2(t,0,0)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzData {
    pub l: [f64; 4],
    pub m1: f64,
    pub m2: f64,
}

impl LipschitzData {
    pub fn new(l: [f64; 4], m1: f64, m2: f64) -> Result<Self, CertifyError> {
        const NAMES: [&str; 4] = ["L1", "L2", "L3", "L4"];
        for (name, value) in NAMES.iter().zip(l).chain([(&"M1", m1), (&"M2", m2)]) {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CertifyError::InvalidConstant { name, value });
            }
        }
        Ok(Self { l, m1, m2 })
    }

    /// Fills `M1`, `M2` from the problem itself.
    pub fn with_computed_bounds(p: &CoupledProblem, l: [f64; 4]) -> Result<Self, CertifyError> {
        let (m1, m2) = forcing_bounds(p)?;
        Self::new(l, m1, m2)
    }
}

/// `(max |f1(t,0,0)|, max |f2(t,0,0)|)` over `t ∈ N_{a+1}^b`.
pub fn forcing_bounds(p: &CoupledProblem) -> Result<(f64, f64), SystemError> {
    let mut m = (0.0f64, 0.0f64);
    for t in (p.a() + 1)..=p.b() {
        m.0 = m.0.max(p.eval_f(1, t, 0.0, 0.0)?.abs());
        m.1 = m.1.max(p.eval_f(2, t, 0.0, 0.0)?.abs());
    }
    Ok(m)
}

/// First half of a certificate: the contraction constant and ball radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceCertificate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lipschitz: LipschitzData,
    pub l: f64,
    /// `None` when `L >= 1`.
    pub r_min: Option<f64>,
    pub existence_ok: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub l: f64,
    pub r_min: Option<f64>,
    pub h: Mat2,
    pub spectral_radius: f64,
    /// `(I - H)^{-1}`, present only when the radius is below one.
    pub urs_constants: Option<Mat2>,
    pub existence_ok: bool,
    pub stability_ok: bool,
    pub notes: String,
}

pub fn contraction_constant(lambda1: f64, lambda2: f64, l: [f64; 4]) -> f64 {
    lambda1 * (l[0] + l[1]) + lambda2 * (l[2] + l[3])
}

pub fn comparison_matrix(lambda1: f64, lambda2: f64, l: [f64; 4]) -> Mat2 {
    [
        [lambda1 * l[0], lambda1 * l[1]],
        [lambda2 * l[2], lambda2 * l[3]],
    ]
}

pub fn certify_existence(p: &CoupledProblem, lip: &LipschitzData) -> ExistenceCertificate {
    let (lambda1, lambda2) = (p.kernel1().lambda(), p.kernel2().lambda());
    let l = contraction_constant(lambda1, lambda2, lip.l);
    // L = 0 is a constant map, which contracts trivially
    let existence_ok = (0.0..1.0).contains(&l);
    let r_min = existence_ok.then(|| (lambda1 * lip.m1 + lambda2 * lip.m2) / (1.0 - l));
    let mut notes = vec![
        "Lipschitz hypothesis checked as |f1(t,u)-f1(t,v)| <= L1|u1-v1| + L2|u2-v2| \
         and |f2(t,u)-f2(t,v)| <= L3|u1-v1| + L4|u2-v2|"
            .to_string(),
        "R_min = (lambda1*M1 + lambda2*M2)/(1 - L) serves both the existence and the stability ball"
            .to_string(),
    ];
    for (i, k) in [(1, p.kernel1()), (2, p.kernel2())] {
        let exact = k.max_row_sum();
        if exact > k.lambda() * (1.0 + LAMBDA_GAP_NOTE) {
            notes.push(format!(
                "closed-form lambda{i} = {:.6} is below the exact max row sum {exact:.6} of G{i}; \
                 with the exact value L would be {:.6}",
                k.lambda(),
                if i == 1 {
                    contraction_constant(exact, lambda2, lip.l)
                } else {
                    contraction_constant(lambda1, exact, lip.l)
                }
            ));
        }
    }
    if !existence_ok {
        notes.push(format!("L = {l:.6} >= 1: no contraction, R_min undefined"));
    }
    ExistenceCertificate {
        lambda1,
        lambda2,
        lipschitz: *lip,
        l,
        r_min,
        existence_ok,
        notes,
    }
}

/// Largest eigenvalue modulus of a 2×2 matrix from `(tr ± √(tr² - 4 det))/2`.
pub fn spectral_radius_2x2(m: &Mat2) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        ((tr + r) / 2.0).abs().max(((tr - r) / 2.0).abs())
    } else {
        // complex pair, |λ|² = det
        det.sqrt()
    }
}

/// `(I - H)^{-1}` by the 2×2 adjugate formula.
pub fn urs_matrix(h: &Mat2) -> Option<Mat2> {
    let (a, b, c, d) = (1.0 - h[0][0], -h[0][1], -h[1][0], 1.0 - h[1][1]);
    let det = a * d - b * c;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[d / det, -b / det], [-c / det, a / det]])
}

pub fn mat_mul(x: &Mat2, y: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

/// Max absolute row sum.
pub fn inf_norm(m: &Mat2) -> f64 {
    (m[0][0].abs() + m[0][1].abs()).max(m[1][0].abs() + m[1][1].abs())
}

pub fn certify_stability(e: ExistenceCertificate) -> Certificate {
    let h = comparison_matrix(e.lambda1, e.lambda2, e.lipschitz.l);
    let spectral_radius = spectral_radius_2x2(&h);
    let stability_ok = spectral_radius < 1.0;
    let urs_constants = if stability_ok { urs_matrix(&h) } else { None };
    let mut notes = e.notes;
    if !stability_ok {
        notes.push(format!(
            "spectral radius {spectral_radius:.6} >= 1: Ulam-Hyers constants undefined"
        ));
    }
    Certificate {
        lambda1: e.lambda1,
        lambda2: e.lambda2,
        l: e.l,
        r_min: e.r_min,
        h,
        spectral_radius,
        urs_constants,
        existence_ok: e.existence_ok,
        stability_ok,
        notes: notes.join("; "),
    }
}

pub fn certify(p: &CoupledProblem, lip: &LipschitzData) -> Certificate {
    certify_stability(certify_existence(p, lip))
}

impl Certificate {
    pub fn push_note(&mut self, note: &str) {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(note);
    }

    /// Records an externally quoted spectral radius next to the computed one.
    pub fn note_reference_radius(&mut self, quoted: f64) {
        let note = format!(
            "reference spectral radius {quoted} vs computed {:.4}; stability verdict {} under either value",
            self.spectral_radius,
            if (quoted < 1.0) == self.stability_ok {
                "unchanged"
            } else {
                "differs"
            }
        );
        self.push_note(&note);
    }

    pub fn is_ok(&self) -> bool {
        self.existence_ok && self.stability_ok
    }

    /// JSON with a fixed key order; reals carry 17 significant digits.
    pub fn to_json(&self) -> String {
        fn real(x: f64) -> String {
            if x.is_finite() {
                format!("{x:.16e}")
            } else {
                "null".into()
            }
        }
        fn mat(m: &Mat2) -> String {
            format!(
                "[{}, {}, {}, {}]",
                real(m[0][0]),
                real(m[0][1]),
                real(m[1][0]),
                real(m[1][1])
            )
        }
        let mut s = String::from("{\n");
        let _ = writeln!(s, "  \"lambda1\": {},", real(self.lambda1));
        let _ = writeln!(s, "  \"lambda2\": {},", real(self.lambda2));
        let _ = writeln!(s, "  \"L\": {},", real(self.l));
        let _ = writeln!(
            s,
            "  \"R_min\": {},",
            self.r_min.map_or("null".into(), real)
        );
        let _ = writeln!(s, "  \"H\": {},", mat(&self.h));
        let _ = writeln!(s, "  \"spectral_radius\": {},", real(self.spectral_radius));
        let _ = writeln!(
            s,
            "  \"urs_constants\": {},",
            self.urs_constants.as_ref().map_or("null".into(), mat)
        );
        let _ = writeln!(s, "  \"existence_ok\": {},", self.existence_ok);
        let _ = writeln!(s, "  \"stability_ok\": {},", self.stability_ok);
        let _ = writeln!(s, "  \"notes\": {}", Value::String(self.notes.clone()));
        s.push_str("}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CertifyError> {
        let v: Value = serde_json::from_str(text).map_err(|e| CertifyError::Json(e.to_string()))?;
        let field = |k: &str| {
            v.get(k)
                .ok_or_else(|| CertifyError::Json(format!("missing key {k}")))
        };
        let real = |k: &str| {
            field(k)?
                .as_f64()
                .ok_or_else(|| CertifyError::Json(format!("{k} is not a number")))
        };
        let opt_real = |k: &str| match field(k)? {
            Value::Null => Ok(None),
            x => x
                .as_f64()
                .map(Some)
                .ok_or_else(|| CertifyError::Json(format!("{k} is not a number"))),
        };
        let flag = |k: &str| {
            field(k)?
                .as_bool()
                .ok_or_else(|| CertifyError::Json(format!("{k} is not a boolean")))
        };
        let opt_mat = |k: &str| -> Result<Option<Mat2>, CertifyError> {
            match field(k)? {
                Value::Null => Ok(None),
                Value::Array(xs) if xs.len() == 4 => {
                    let mut m = [[0.0; 2]; 2];
                    for (i, x) in xs.iter().enumerate() {
                        m[i / 2][i % 2] = x.as_f64().ok_or_else(|| {
                            CertifyError::Json(format!("{k}[{i}] is not a number"))
                        })?;
                    }
                    Ok(Some(m))
                }
                _ => Err(CertifyError::Json(format!("{k} must be a 4-element array"))),
            }
        };
        Ok(Self {
            lambda1: real("lambda1")?,
            lambda2: real("lambda2")?,
            l: real("L")?,
            r_min: opt_real("R_min")?,
            h: opt_mat("H")?.ok_or_else(|| CertifyError::Json("H is null".into()))?,
            spectral_radius: real("spectral_radius")?,
            urs_constants: opt_mat("urs_constants")?,
            existence_ok: flag("existence_ok")?,
            stability_ok: flag("stability_ok")?,
            notes: field("notes")?
                .as_str()
                .ok_or_else(|| CertifyError::Json("notes is not a string".into()))?
                .to_string(),
        })
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "lambda1 = {:.6}, lambda2 = {:.6}",
            self.lambda1, self.lambda2
        )?;
        writeln!(
            f,
            "L = {:.6} ({})",
            self.l,
            if self.existence_ok {
                "contraction"
            } else {
                "no contraction"
            }
        )?;
        match self.r_min {
            Some(r) => writeln!(f, "R_min = {r:.6}")?,
            None => writeln!(f, "R_min undefined")?,
        }
        writeln!(
            f,
            "H = [[{:.6}, {:.6}], [{:.6}, {:.6}]]",
            self.h[0][0], self.h[0][1], self.h[1][0], self.h[1][1]
        )?;
        write!(
            f,
            "spectral radius = {:.6} ({})",
            self.spectral_radius,
            if self.stability_ok {
                "stable"
            } else {
                "not certified"
            }
        )
    }
}

/// How a quasi-solution was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuasiMode {
    /// `u = v* + e` for a random bounded `e`, kept only if the in-equation holds.
    Perturbed,
    /// `u` solves `u = T(u) + r` for a random `r` with `|r_i| <= ε_i`.
    Forced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub mode: QuasiMode,
    /// Measured `‖u_i - T_i(u)‖`.
    pub defect: [f64; 2],
    pub distance: [f64; 2],
    pub bound: [f64; 2],
    pub rejections: usize,
}

impl TrialOutcome {
    pub fn ratio(&self) -> f64 {
        (0..2)
            .map(|i| {
                if self.distance[i] == 0.0 {
                    0.0
                } else {
                    self.distance[i] / self.bound[i]
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn holds(&self) -> bool {
        self.distance[0] <= self.bound[0] && self.distance[1] <= self.bound[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UlamHyersReport {
    pub eps: [f64; 2],
    pub seed: u64,
    /// `‖v* - T(v*)‖` of the supplied fixed point; folded into every bound.
    pub fixed_point_defect: [f64; 2],
    pub outcomes: Vec<TrialOutcome>,
    /// Trials that found no admissible quasi-solution.
    pub exhausted: usize,
}

impl UlamHyersReport {
    pub const SCHEME: &'static str = "even trials perturb the fixed point by a random vector \
        and keep it only if the in-equations hold (halving the amplitude on rejection); \
        odd trials solve u = T(u) + r for random |r_i| <= eps_i by Picard iteration";

    pub fn max_ratio(&self) -> f64 {
        self.outcomes
            .iter()
            .map(TrialOutcome::ratio)
            .fold(0.0, f64::max)
    }

    pub fn all_hold(&self) -> bool {
        self.exhausted == 0 && self.outcomes.iter().all(TrialOutcome::holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TrialOutcome> {
        self.outcomes.iter().filter(|o| !o.holds())
    }
}

impl fmt::Display for UlamHyersReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rejections: usize = self.outcomes.iter().map(|o| o.rejections).sum();
        write!(
            f,
            "{} trials at eps = ({:e}, {:e}), seed {}: {} violations, {} exhausted, {} rejections, max ratio {:.6}",
            self.outcomes.len() + self.exhausted,
            self.eps[0],
            self.eps[1],
            self.seed,
            self.failures().count(),
            self.exhausted,
            rejections,
            self.max_ratio()
        )
    }
}

const MAX_REJECTIONS: usize = 64;
const FORCED_TOL: f64 = 1e-15;
const FORCED_MAX_ITER: usize = 2_000;

fn defect(p: &CoupledProblem, u: &(GridFunction, GridFunction)) -> Result<[f64; 2], SystemError> {
    let (t1, t2) = apply_t(p, &u.0, &u.1)?;
    Ok([u.0.distance(&t1), u.1.distance(&t2)])
}

fn random_interior(rng: &mut ChaCha8Rng, like: &GridFunction, amplitude: f64) -> Vec<f64> {
    let n = like.len();
    (0..n)
        .map(|k| {
            if k == 0 || k == n - 1 || amplitude == 0.0 {
                0.0
            } else {
                rng.gen_range(-1.0..=1.0) * amplitude
            }
        })
        .collect()
}

fn shifted(base: &GridFunction, delta: &[f64]) -> GridFunction {
    let values = base
        .values()
        .iter()
        .zip(delta)
        .map(|(v, d)| v + d)
        .collect();
    GridFunction::new(base.start(), values).expect("nonempty")
}

/// Property-based check of the Ulam–Hyers bound
/// `‖u_i - v*_i‖ <= Σ_j C_ij ε_j` over random quasi-solutions.
///
/// Trial `k` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `k`, so
/// outcomes do not depend on trial order. The fixed point's own defect `δ*`
/// is admitted in the in-equations and the bound becomes `C (ε + 2δ*)`.
pub fn verify_ulam_hyers(
    p: &CoupledProblem,
    cert: &Certificate,
    fixed: (&GridFunction, &GridFunction),
    eps: [f64; 2],
    trials: usize,
    seed: u64,
) -> Result<UlamHyersReport, CertifyError> {
    let c = match (cert.stability_ok, cert.urs_constants) {
        (true, Some(c)) => c,
        _ => return Err(CertifyError::NotStable(cert.spectral_radius)),
    };
    for e in eps {
        if !(e.is_finite() && e >= 0.0) {
            return Err(CertifyError::InvalidEpsilon(e));
        }
    }
    let grid = p.grid();
    for u in [fixed.0, fixed.1] {
        if u.start() != grid.a() || u.end() != grid.b() {
            return Err(CertifyError::FixedPointGrid);
        }
    }
    let v = (fixed.0.clone(), fixed.1.clone());
    let star = defect(p, &v)?;
    let admitted = [eps[0] + star[0], eps[1] + star[1]];
    let slack = [eps[0] + 2.0 * star[0], eps[1] + 2.0 * star[1]];
    let bound = [
        c[0][0] * slack[0] + c[0][1] * slack[1],
        c[1][0] * slack[0] + c[1][1] * slack[1],
    ];

    let mut outcomes = Vec::with_capacity(trials);
    let mut exhausted = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mode = if trial % 2 == 0 {
            QuasiMode::Perturbed
        } else {
            QuasiMode::Forced
        };
        let mut rejections = 0;
        let mut found = None;
        let mut scale = rng.gen_range(0.5..=1.0);
        while rejections <= MAX_REJECTIONS {
            let u = match mode {
                QuasiMode::Perturbed => {
                    let d1 = random_interior(&mut rng, &v.0, scale * eps[0]);
                    let d2 = random_interior(&mut rng, &v.1, scale * eps[1]);
                    (shifted(&v.0, &d1), shifted(&v.1, &d2))
                }
                QuasiMode::Forced => {
                    let r1 = random_interior(&mut rng, &v.0, scale * eps[0]);
                    let r2 = random_interior(&mut rng, &v.1, scale * eps[1]);
                    solve_forced(p, &v, &r1, &r2)?
                }
            };
            let d = defect(p, &u)?;
            if d[0] <= admitted[0] && d[1] <= admitted[1] {
                found = Some((u, d));
                break;
            }
            rejections += 1;
            scale /= 2.0;
        }
        match found {
            Some((u, d)) => outcomes.push(TrialOutcome {
                trial,
                mode,
                defect: d,
                distance: [u.0.distance(&v.0), u.1.distance(&v.1)],
                bound,
                rejections,
            }),
            None => exhausted += 1,
        }
    }
    Ok(UlamHyersReport {
        eps,
        seed,
        fixed_point_defect: star,
        outcomes,
        exhausted,
    })
}

fn solve_forced(
    p: &CoupledProblem,
    start: &(GridFunction, GridFunction),
    r1: &[f64],
    r2: &[f64],
) -> Result<(GridFunction, GridFunction), SystemError> {
    let mut x = start.clone();
    if r1.iter().chain(r2).all(|r| *r == 0.0) {
        return Ok(x);
    }
    for _ in 0..FORCED_MAX_ITER {
        let (t1, t2) = apply_t(p, &x.0, &x.1)?;
        let y = (shifted(&t1, r1), shifted(&t2, r2));
        let step = product_distance((&y.0, &y.1), (&x.0, &x.1));
        x = y;
        if step <= FORCED_TOL || !step.is_finite() {
            break;
        }
    }
    Ok(x)
}
