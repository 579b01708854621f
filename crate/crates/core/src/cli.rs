//! Command implementations behind the `conformal-ensembles` binary.

use crate::balayage::{
    area_integrals, balayage_grid, balayage_integral, convergence_along, equilibrium_certificate, TestFunction,
};
use crate::coulomb::{empirical_moments, run_chains, PotentialSpec, RunSettings};
use crate::curve::{ContourGrid, PolynomialCurve};
use crate::error::Error;
use crate::inversion::{deform, invert_near_slit, invert_regular, Regime, REGIME_SWITCH};
use crate::io::{
    csv_with_config, num, read_toml, sibling, to_toml, write_text, CurveFile, CurveSpec, FileResult, MomentsFile,
    RunConfigFile, ScheduleFile, FORMAT_VERSION,
};
use crate::moments::{forward_moments, forward_moments_quadrature, HarmonicMoments};
use crate::schwarz::branch_point_check;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "conformal-ensembles", version, about = "Polynomial curves, harmonic moments and normal matrix ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Input file (TOML).
    #[arg(long)]
    pub input: PathBuf,
    /// Main output file; auxiliary outputs are written next to it.
    #[arg(long)]
    pub output: PathBuf,
    /// Seed for random operations (overrides seeds in the input).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Acceptance tolerance for consistency checks.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of contour nodes (a power of two, at least 4).
    #[arg(long)]
    pub grid_size: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Harmonic moments of a curve, cross-checked by quadrature.
    Moments(Common),
    /// Curve from harmonic moments, with automatic regime selection.
    Invert(Common),
    /// Trajectory along a deformation schedule plus semicircle convergence.
    Deform {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing s values.
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
    },
    /// Coulomb-gas Metropolis sample and moment report.
    Sample(Common),
    /// Equilibrium certificate, branch points and balayage-vs-area check.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo samples for the area integrals.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
    },
}

/// Default `--tol` for moment and roundtrip checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default s values `10^{-k/10}`, `k = 0..=30`.
pub fn default_s_values() -> Vec<f64> {
    (0..=30).map(|k| 10f64.powf(-(k as f64) / 10.0)).collect()
}

/// Runs one command and returns a one-line summary.
pub fn run(command: &Command) -> FileResult<String> {
    match command {
        Command::Moments(c) => cmd_moments(c),
        Command::Invert(c) => cmd_invert(c),
        Command::Deform { common, s } => cmd_deform(common, s.as_deref()),
        Command::Sample(c) => cmd_sample(c),
        Command::Verify { common, samples } => cmd_verify(common, *samples),
    }
}

fn tolerance(c: &Common) -> FileResult<f64> {
    let tol = c.tol.unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Validation(format!("--tol must be positive, got {tol}")).into());
    }
    Ok(tol)
}

#[derive(Serialize)]
struct MomentsOutput<'a> {
    format_version: u32,
    t0: f64,
    t: &'a [Complex64],
    diagnostics: MomentsDiagnostics,
    config: &'a CurveFile,
}

#[derive(Serialize)]
struct MomentsDiagnostics {
    xi: f64,
    quadrature_nodes: usize,
    quadrature_discrepancy: f64,
    tol: f64,
}

fn cmd_moments(c: &Common) -> FileResult<String> {
    let file: CurveFile = read_toml(&c.input)?;
    let curve = file.to_curve()?;
    let tol = tolerance(c)?;
    let exact = forward_moments(&curve)?;
    let grid = match c.grid_size {
        Some(m) => ContourGrid::new(m)?,
        None => ContourGrid::for_moments_of(&curve),
    };
    let quadrature = forward_moments_quadrature(&curve, &grid)?;
    let discrepancy = exact.max_difference(&quadrature);
    if discrepancy > tol {
        return Err(Error::Precision(format!(
            "quadrature disagrees with the exact moments by {discrepancy:.3e} on {} nodes (tol {tol:e})",
            grid.len()
        ))
        .into());
    }
    let out = MomentsOutput {
        format_version: FORMAT_VERSION,
        t0: exact.t0,
        t: &exact.t,
        diagnostics: MomentsDiagnostics {
            xi: curve.simplicity_margin(),
            quadrature_nodes: grid.len(),
            quadrature_discrepancy: discrepancy,
            tol,
        },
        config: &file,
    };
    write_text(&c.output, &to_toml(&out))?;
    Ok(format!(
        "moments: t0 = {:e}, |t2| = {:e}, quadrature discrepancy {discrepancy:.3e}",
        exact.t0,
        exact.get(2).norm()
    ))
}

#[derive(Serialize)]
struct CurveOutput<'a> {
    format_version: u32,
    r: f64,
    a: &'a [Complex64],
    diagnostics: InvertDiagnostics,
    config: &'a MomentsFile,
}

#[derive(Serialize)]
struct InvertDiagnostics {
    regime: &'static str,
    xi: f64,
    roundtrip_residual: f64,
    tol: f64,
}

/// Inverts moments: regular below `|t_2| = 0.45`, near-slit (schedule required) up to `1/2`.
pub fn invert_auto(m: &HarmonicMoments, file: &MomentsFile) -> crate::Result<(PolynomialCurve, Regime)> {
    let t2 = m.get(2).norm();
    if t2 >= 0.5 {
        return Err(Error::Validation(format!(
            "|t2| = {t2} is outside both regimes (needs |t2| < 1/2)"
        )));
    }
    if t2 < REGIME_SWITCH {
        return Ok((invert_regular(m)?, Regime::Regular));
    }
    let spec = file.schedule.as_ref().ok_or_else(|| {
        Error::Validation(format!("|t2| = {t2} is in the near-slit regime, which needs a [schedule] table"))
    })?;
    Ok((invert_near_slit(m, &spec.to_schedule()?)?, Regime::NearSlit))
}

fn cmd_invert(c: &Common) -> FileResult<String> {
    let file: MomentsFile = read_toml(&c.input)?;
    let m = file.to_moments()?;
    let tol = tolerance(c)?;
    let (curve, regime) = invert_auto(&m, &file)?;
    let residual = forward_moments(&curve)?.max_difference(&m);
    if residual > tol {
        return Err(Error::Precision(format!("roundtrip residual {residual:.3e} exceeds tol {tol:e}")).into());
    }
    let regime = match regime {
        Regime::Regular => "regular",
        Regime::NearSlit => "near-slit",
    };
    let out = CurveOutput {
        format_version: FORMAT_VERSION,
        r: curve.r(),
        a: curve.coefficients(),
        diagnostics: InvertDiagnostics {
            regime,
            xi: curve.simplicity_margin(),
            roundtrip_residual: residual,
            tol,
        },
        config: &file,
    };
    write_text(&c.output, &to_toml(&out))?;
    Ok(format!("invert ({regime}): r = {:e}, roundtrip residual {residual:.3e}", curve.r()))
}

fn cmd_deform(c: &Common, s_flag: Option<&[f64]>) -> FileResult<String> {
    let file: ScheduleFile = read_toml(&c.input)?;
    let schedule = file.schedule.to_schedule()?;
    let s_values = s_flag
        .map(<[f64]>::to_vec)
        .or_else(|| file.schedule.s.clone())
        .unwrap_or_else(default_s_values);
    let mut echo = file.clone();
    echo.schedule.s = Some(s_values.clone());
    let config = to_toml(&echo);

    let trajectory = deform(&schedule, &s_values)?;
    let n = schedule.degree();
    let mut header = vec!["s", "regime", "t0", "xi", "t2_re", "t2_im"];
    let coeff_names: Vec<String> = (0..=n).flat_map(|j| [format!("a{j}_re"), format!("a{j}_im")]).collect();
    header.extend(coeff_names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = trajectory
        .steps
        .iter()
        .map(|step| {
            let t2 = step.moments.get(2);
            let mut row = vec![
                num(step.s),
                match step.regime {
                    Regime::Regular => "regular".into(),
                    Regime::NearSlit => "near-slit".into(),
                },
                num(step.moments.t0),
                num(step.curve.simplicity_margin()),
                num(t2.re),
                num(t2.im),
            ];
            for a in step.curve.coefficients() {
                row.push(num(a.re));
                row.push(num(a.im));
            }
            row
        })
        .collect();
    let mut trailer = vec![format!("admissible: {}", schedule.is_admissible())];
    if let Some(report) = &trajectory.asymptotics {
        trailer.push(format!(
            "asymptotics: alpha0_decays = {}, alpha1_decays = {}, alpha_rest_decays = {}",
            report.alpha0_decays, report.alpha1_decays, report.alpha_rest_decays
        ));
    }

    let mut written = vec![c.output.display().to_string()];
    if schedule.all_delta_above_one() {
        for k in [2, 4] {
            let f = TestFunction::monomial(k)?;
            let report = convergence_along(&trajectory, &f)?;
            let rows: Vec<Vec<String>> = report
                .points
                .iter()
                .map(|p| vec![num(p.s), num(p.value.re), num(p.value.im), num(p.semicircle.re), num(p.error)])
                .collect();
            let path = sibling(&c.output, &format!("convergence_x{k}.csv"));
            let text = csv_with_config(
                &format!("{config}f = \"x^{k}\"\n"),
                &["s", "value_re", "value_im", "semicircle_value", "abs_error"],
                &rows,
                &[format!("decreasing: {}", report.decreasing)],
            );
            write_text(&path, &text)?;
            written.push(path.display().to_string());
        }
    } else {
        trailer.push("convergence skipped: some Delta_j <= 1".into());
    }
    write_text(&c.output, &csv_with_config(&config, &header, &rows, &trailer))?;
    let last = trajectory.steps.last().expect("non-empty trajectory");
    Ok(format!(
        "deform: {} steps down to s = {:e} (t0/r^2 = {:e}); wrote {}",
        trajectory.steps.len(),
        last.s,
        last.moments.t0 / (schedule.r() * schedule.r()),
        written.join(", ")
    ))
}

#[derive(Serialize)]
struct SampleReport<'a> {
    format_version: u32,
    inside_fraction: f64,
    inside_error: f64,
    configurations: usize,
    chains: Vec<ChainReport>,
    moments: Vec<MomentRow>,
    config: &'a RunConfigFile,
}

#[derive(Serialize)]
struct ChainReport {
    seed: u64,
    acceptance_rate: f64,
    step: f64,
    energy: f64,
    max_drift: f64,
}

#[derive(Serialize)]
struct MomentRow {
    k: usize,
    empirical: Complex64,
    error: f64,
    prediction: Complex64,
    agrees: bool,
}

fn cmd_sample(c: &Common) -> FileResult<String> {
    let mut file: RunConfigFile = read_toml(&c.input)?;
    if let Some(seed) = c.seed {
        let count = file.seeds.len().max(1) as u64;
        file.seeds = (0..count).map(|i| seed + i).collect();
    }
    if file.seeds.is_empty() {
        return Err(Error::Validation("at least one seed is required".into()).into());
    }
    let m = HarmonicMoments::new(file.t0, file.t.clone())?;
    if m.get(1).norm() > 1e-10 {
        return Err(Error::Validation(format!("t1 must vanish, got |t1| = {:e}", m.get(1).norm())).into());
    }
    let mut settings = RunSettings::new(file.n, file.sweeps, file.step, file.seeds[0]);
    if let Some(b) = file.burn_in {
        settings.burn_in = b;
    }
    if let Some(t) = file.thin {
        settings.thin = t;
    }
    if settings.n < 2 {
        return Err(Error::Validation(format!("N must be at least 2, got {}", settings.n)).into());
    }
    let curve = match &file.curve {
        Some(spec) => PolynomialCurve::new(spec.r, spec.a.clone())?,
        None => invert_regular(&m)?,
    };
    curve.require_certified()?;
    let sigma = file.sigma_radius.unwrap_or_else(|| crate::balayage::sigma_radius(&curve));
    file.sigma_radius = Some(sigma);
    if file.curve.is_none() {
        file.curve = Some(CurveSpec {
            r: curve.r(),
            a: curve.coefficients().to_vec(),
        });
    }
    let pot = PotentialSpec::new(file.t0, file.t.iter().skip(1).copied().collect(), sigma)?;
    let chains = run_chains(&pot, &settings, &file.seeds)?;
    let k_max = file.k_max.unwrap_or(4);
    let report = empirical_moments(&chains, &curve, k_max)?;

    let rows: Vec<Vec<String>> = chains
        .iter()
        .enumerate()
        .flat_map(|(chain, sample)| {
            sample
                .points
                .iter()
                .enumerate()
                .map(move |(i, z)| vec![chain.to_string(), i.to_string(), num(z.re), num(z.im)])
        })
        .collect();
    let config = to_toml(&file);
    write_text(&c.output, &csv_with_config(&config, &["chain_id", "index", "z_re", "z_im"], &rows, &[]))?;
    let out = SampleReport {
        format_version: FORMAT_VERSION,
        inside_fraction: report.inside_fraction,
        inside_error: report.inside_error,
        configurations: report.configurations,
        chains: chains
            .iter()
            .map(|s| ChainReport {
                seed: s.seed,
                acceptance_rate: s.acceptance_rate,
                step: s.step,
                energy: s.energy,
                max_drift: s.max_drift,
            })
            .collect(),
        moments: report
            .moments
            .iter()
            .map(|m| MomentRow {
                k: m.k,
                empirical: m.empirical,
                error: m.error,
                prediction: m.prediction,
                agrees: m.agrees,
            })
            .collect(),
        config: &file,
    };
    let report_path = sibling(&c.output, "report.toml");
    write_text(&report_path, &to_toml(&out))?;
    Ok(format!(
        "sample: {} chains, inside fraction {:.4} +- {:.4}; wrote {}, {}",
        chains.len(),
        report.inside_fraction,
        report.inside_error,
        c.output.display(),
        report_path.display()
    ))
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    format_version: u32,
    all_pass: bool,
    certificate: CertificateRow,
    branch_points: BranchRow,
    balayage: Vec<BalayageRow>,
    config: VerifyConfig<'a>,
}

#[derive(Serialize)]
struct CertificateRow {
    passes: bool,
    min_value: f64,
    min_location: Complex64,
    min_image: Complex64,
    boundary_max: f64,
    sigma_radius: f64,
    w_max: f64,
    radii: usize,
    angles: usize,
}

#[derive(Serialize)]
struct BranchRow {
    count: usize,
    inside: usize,
    even_inside: bool,
    critical_radius: f64,
    points: Vec<Complex64>,
}

#[derive(Serialize)]
struct BalayageRow {
    k: usize,
    contour: Complex64,
    area: Complex64,
    std_error: f64,
    agrees: bool,
}

#[derive(Serialize)]
struct VerifyConfig<'a> {
    seed: u64,
    samples: usize,
    curve: &'a CurveFile,
}

/// Highest monomial degree in the balayage-vs-area check.
pub const VERIFY_MAX_DEGREE: usize = 6;

fn cmd_verify(c: &Common, samples: usize) -> FileResult<String> {
    let file: CurveFile = read_toml(&c.input)?;
    let curve = file.to_curve()?;
    curve.require_certified()?;
    let seed = c.seed.unwrap_or(0);
    let grid = ContourGrid::new(c.grid_size.unwrap_or(256))?;
    let cert = equilibrium_certificate(&curve, &grid)?;
    let branches = branch_point_check(&curve)?;
    let fs = (0..=VERIFY_MAX_DEGREE)
        .map(TestFunction::monomial)
        .collect::<crate::Result<Vec<_>>>()?;
    let area = area_integrals(&curve, &fs, samples, seed)?;
    let balayage = fs
        .iter()
        .zip(&area)
        .enumerate()
        .map(|(k, (f, est))| {
            let contour = balayage_integral(&curve, f, &balayage_grid(&curve, f))?;
            let gap = (contour - est.value).norm();
            Ok(BalayageRow {
                k,
                contour,
                area: est.value,
                std_error: est.std_error,
                agrees: gap <= 3.0 * est.std_error || gap < 1e-12,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let all_pass = cert.passes && balayage.iter().all(|b| b.agrees);
    let out = VerifyReport {
        format_version: FORMAT_VERSION,
        all_pass,
        certificate: CertificateRow {
            passes: cert.passes,
            min_value: cert.min_value,
            min_location: cert.min_location,
            min_image: curve.h(cert.min_location),
            boundary_max: cert.boundary_max,
            sigma_radius: cert.sigma_radius,
            w_max: cert.w_max,
            radii: cert.radii,
            angles: cert.angles,
        },
        branch_points: BranchRow {
            count: branches.branch_points.len(),
            inside: branches.inside_count(),
            even_inside: branches.even_inside(),
            critical_radius: branches.critical_radius,
            points: branches.branch_points.clone(),
        },
        balayage,
        config: VerifyConfig {
            seed,
            samples,
            curve: &file,
        },
    };
    write_text(&c.output, &to_toml(&out))?;
    Ok(format!(
        "verify: certificate {} (min {:.3e} at w = {:.4}), {} branch points ({} inside), balayage {}",
        if cert.passes { "passes" } else { "fails" },
        cert.min_value,
        cert.min_location,
        branches.branch_points.len(),
        branches.inside_count(),
        if out.balayage.iter().all(|b| b.agrees) { "agrees with area" } else { "disagrees with area" }
    ))
}
