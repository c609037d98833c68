use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nabla_bvp::certify::{self, verify_ulam_hyers, Certificate};
use nabla_bvp::expr::{estimate_lipschitz, LipschitzBox, DEFAULT_DENSITY};
use nabla_bvp::green::{self, apply_kernel, verify_properties, GreenKernel};
use nabla_bvp::nabla::{nabla_frac_diff, FracOrder, GridFunction};
use nabla_bvp::oracle::{
    assemble_operator, direct_solve_linear, direct_solve_nonlinear, MAX_NEWTON_SPAN,
};
use nabla_bvp::system::{apply_t, product_distance, solve_picard, SolveReport, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{self, ConfigError, LoadedProblem};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_CERTIFY: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

const UH_TRIALS: usize = 100;
const UH_EPS: f64 = 1e-3;
const RANDOM_FORCINGS: usize = 20;
const CONTRACTION_PAIRS: usize = 100;

/// Everything that maps to exit code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        EXIT_INPUT
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolverOverrides {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn console(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

/// 17 significant digits: enough for an exact round trip.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn solver_config(
    p: &LoadedProblem,
    o: SolverOverrides,
    contraction: Option<f64>,
) -> Result<SolverConfig, CliError> {
    let tol = o.tol.unwrap_or_else(|| p.tol());
    let max_iter = o.max_iter.unwrap_or_else(|| p.max_iter());
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Input(format!("--tol {tol} must be positive")));
    }
    if max_iter == 0 {
        return Err(CliError::Input("--max-iter must be positive".into()));
    }
    Ok(SolverConfig {
        tol,
        max_iter,
        initial: None,
        contraction,
    })
}

fn run_solver(
    p: &LoadedProblem,
    o: SolverOverrides,
) -> Result<(SolveReport, Option<Certificate>), CliError> {
    let cert = p.lipschitz()?.map(|lip| certify::certify(&p.problem, &lip));
    let contraction = cert.as_ref().filter(|c| c.existence_ok).map(|c| c.l);
    let cfg = solver_config(p, o, contraction)?;
    let report = solve_picard(&p.problem, &cfg).map_err(|e| CliError::Input(e.to_string()))?;
    Ok((report, cert))
}

pub fn solution_csv(u1: &GridFunction, u2: &GridFunction) -> String {
    let mut s = String::from("t,u1,u2\n");
    for ((t, x), y) in u1.iter().zip(u2.values()) {
        let _ = writeln!(s, "{t},{},{}", fmt_real(x), fmt_real(*y));
    }
    s
}

pub fn cmd_solve(
    config_path: &Path,
    out_path: &Path,
    o: SolverOverrides,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let p = config::load(config_path)?;
    let (report, _) = run_solver(&p, o)?;
    write_file(out_path, &solution_csv(&report.u1, &report.u2))?;
    console(out, &format!("{report}\n"))?;
    Ok(if report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn cmd_certify(
    config_path: &Path,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let p = config::load(config_path)?;
    let lip = p.lipschitz()?.ok_or_else(|| {
        CliError::Input(format!(
            "{}: certify needs a \"lipschitz\" block with L1..L4",
            config_path.display()
        ))
    })?;
    let mut cert = certify::certify(&p.problem, &lip);
    if let Some(r) = p.config.reference.and_then(|r| r.spectral_radius) {
        cert.note_reference_radius(r);
    }
    write_file(out_path, &cert.to_json())?;
    console(out, &format!("{cert}\n"))?;
    Ok(if cert.is_ok() { EXIT_OK } else { EXIT_CERTIFY })
}

pub fn green_csv(k: &GreenKernel) -> String {
    let (a, b) = (k.a(), k.b());
    let mut s = String::from("t\\s");
    for col in (a + 1)..=b {
        let _ = write!(s, ",{col}");
    }
    s.push('\n');
    for t in a..=b {
        let _ = write!(s, "{t}");
        for col in (a + 1)..=b {
            let _ = write!(s, ",{}", fmt_real(k.get(t, col)));
        }
        s.push('\n');
    }
    s
}

pub fn cmd_green(
    alpha: f64,
    a: i64,
    b: i64,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let k = green::build_kernel(alpha, a, b).map_err(|e| CliError::Input(e.to_string()))?;
    write_file(out_path, &green_csv(&k))?;
    console(
        out,
        &format!(
            "lambda (closed form) = {}; max row sum = {}\n",
            fmt_real(k.lambda()),
            fmt_real(k.max_row_sum())
        ),
    )?;
    Ok(EXIT_OK)
}

struct Row {
    name: String,
    passed: bool,
    detail: String,
}

fn row(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Row {
    Row {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn kernel_rows(
    k: &GreenKernel,
    label: &str,
    rng: &mut ChaCha8Rng,
    rows: &mut Vec<Row>,
) -> Result<(), CliError> {
    let report = verify_properties(k);
    for c in &report.checks {
        rows.push(row(
            format!("{label} property {} ({})", c.id, c.name),
            c.passed,
            c.witness.clone().unwrap_or_default(),
        ));
    }

    let (a, b, alpha) = (k.a(), k.b(), k.alpha());
    let input = |e: &dyn std::fmt::Display| CliError::Input(e.to_string());
    let op = assemble_operator(alpha, a, b).map_err(|e| input(&e))?;
    rows.push(row(
        format!("{label} operator causality"),
        op.upper_max() == 0.0,
        format!("max entry above the diagonal {:.1e}", op.upper_max()),
    ));
    let mut duality = 0.0f64;
    for s in (a + 1)..=b {
        let col = GridFunction::from_fn(a, b, |t| k.get(t, s));
        let d = op.apply(&col).map_err(|e| input(&e))?;
        for t in (a + 2)..=b {
            let want = if t == s { -1.0 } else { 0.0 };
            duality = duality.max((d.at(t) - want).abs());
        }
    }
    rows.push(row(
        format!("{label} operator/kernel duality"),
        duality <= 1e-9,
        format!("max |(D G + I)(t, s)| = {duality:.2e}"),
    ));

    let order = FracOrder::new(alpha).map_err(|e| input(&e))?;
    let (mut identity, mut direct) = (0.0f64, 0.0f64);
    for _ in 0..RANDOM_FORCINGS {
        let h = GridFunction::from_fn(a + 1, b, |_| rng.gen_range(-1.0..=1.0));
        let u = apply_kernel(k, &h).map_err(|e| input(&e))?;
        let d = nabla_frac_diff(&u, order, a - 1).map_err(|e| input(&e))?;
        for t in (a + 2)..=b {
            identity = identity.max((d.at(t) + h.at(t)).abs());
        }
        let v = direct_solve_linear(alpha, a, b, &h).map_err(|e| input(&e))?;
        direct = direct.max(v.distance(&u));
    }
    rows.push(row(
        format!("{label} residual identity"),
        identity <= 1e-8,
        format!("{RANDOM_FORCINGS} random h, max defect {identity:.2e}"),
    ));
    rows.push(row(
        format!("{label} direct solve vs kernel"),
        direct <= 1e-9,
        format!("{RANDOM_FORCINGS} random h, max gap {direct:.2e}"),
    ));
    Ok(())
}

pub fn cmd_verify(
    config_path: &Path,
    seed: u64,
    o: SolverOverrides,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let p = config::load(config_path)?;
    let problem = &p.problem;
    let (a, b) = (problem.a(), problem.b());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();

    kernel_rows(problem.kernel1(), "G1", &mut rng, &mut rows)?;
    if problem.alpha2() != problem.alpha1() {
        kernel_rows(problem.kernel2(), "G2", &mut rng, &mut rows)?;
    }

    let (picard, cert) = run_solver(&p, o)?;
    rows.push(row(
        "Picard convergence",
        picard.converged,
        format!("{} iterations", picard.iterations),
    ));
    rows.push(row(
        "Picard residuals",
        picard.max_residual() <= 1e-8,
        format!("max defect {:.2e}", picard.max_residual()),
    ));
    if b - a <= MAX_NEWTON_SPAN {
        match direct_solve_nonlinear(problem) {
            Ok(newton) => {
                let gap = newton
                    .u1
                    .distance(&picard.u1)
                    .max(newton.u2.distance(&picard.u2));
                rows.push(row(
                    "Picard vs Newton",
                    gap <= 1e-8,
                    format!(
                        "max gap {gap:.2e} (Newton residual {:.1e})",
                        newton.residual
                    ),
                ));
            }
            Err(e) => rows.push(row("Picard vs Newton", false, e.to_string())),
        }
    } else {
        warnings.push(format!(
            "Newton cross-check skipped: b - a = {} exceeds {MAX_NEWTON_SPAN}",
            b - a
        ));
    }

    if let (Some(cert), Some(claimed)) = (&cert, p.lipschitz_constants()) {
        let radius = cert.r_min.unwrap_or(1.0).max(1e-3);
        let t_grid: Vec<f64> = ((a + 1)..=b).map(|t| t as f64).collect();
        let bx = LipschitzBox::symmetric(radius);
        for (i, f) in [(0usize, &p.f1), (1, &p.f2)] {
            match estimate_lipschitz(f, &bx, &t_grid, DEFAULT_DENSITY) {
                Ok(est) => {
                    for (j, seen) in [est.l_u1, est.l_u2].into_iter().enumerate() {
                        let k = 2 * i + j;
                        if seen > claimed[k] * (1.0 + 1e-9) + 1e-15 {
                            warnings.push(format!(
                                "L{} = {} is below the sampled slope {seen:.6e} of f{} in u{} on |u| <= {radius:.4}",
                                k + 1,
                                claimed[k],
                                i + 1,
                                j + 1
                            ));
                        }
                    }
                }
                Err(e) => warnings.push(format!("Lipschitz sampling of f{} failed: {e}", i + 1)),
            }
        }

        if cert.existence_ok {
            let radius = cert.r_min.unwrap_or(0.0);
            let ball = |rng: &mut ChaCha8Rng| {
                let mut f = || {
                    GridFunction::from_fn(a, b, |t| {
                        if t == a || t == b {
                            0.0
                        } else {
                            rng.gen_range(-0.5..=0.5) * radius
                        }
                    })
                };
                (f(), f())
            };
            let mut worst = 0.0f64;
            let mut violated = false;
            for _ in 0..CONTRACTION_PAIRS {
                let x = ball(&mut rng);
                let y = ball(&mut rng);
                let tx =
                    apply_t(problem, &x.0, &x.1).map_err(|e| CliError::Input(e.to_string()))?;
                let ty =
                    apply_t(problem, &y.0, &y.1).map_err(|e| CliError::Input(e.to_string()))?;
                let num = product_distance((&tx.0, &tx.1), (&ty.0, &ty.1));
                let den = product_distance((&x.0, &x.1), (&y.0, &y.1));
                violated |= num > cert.l * den + 1e-12;
                if den > 0.0 {
                    worst = worst.max(num / den);
                }
            }
            rows.push(row(
                "contraction rate",
                !violated,
                format!("max ratio {worst:.6} vs certified L = {:.6}", cert.l),
            ));
        }

        if cert.stability_ok && picard.converged {
            match verify_ulam_hyers(
                problem,
                cert,
                (&picard.u1, &picard.u2),
                [UH_EPS; 2],
                UH_TRIALS,
                seed,
            ) {
                Ok(r) => rows.push(row(
                    "Ulam-Hyers trials",
                    r.all_hold() && r.max_ratio() <= 1.0,
                    r.to_string(),
                )),
                Err(e) => rows.push(row("Ulam-Hyers trials", false, e.to_string())),
            }
        }
    }

    let mut table = String::new();
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &rows {
        let line = format!(
            "{}  {:width$}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        let _ = writeln!(table, "{}", line.trim_end());
    }
    for w in &warnings {
        let _ = writeln!(table, "warning: {w}");
    }
    let failed: Vec<&Row> = rows.iter().filter(|r| !r.passed).collect();
    if failed.is_empty() {
        let _ = writeln!(table, "all {} checks passed", rows.len());
    } else {
        for r in &failed {
            let _ = writeln!(table, "verification failed: {}: {}", r.name, r.detail);
        }
    }
    console(out, &table)?;
    Ok(if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    })
}
