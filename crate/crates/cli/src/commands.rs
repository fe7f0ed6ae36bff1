//! Subcommand bodies. Each writes its document, then reports non-convergence.

use crate::config::Settings;
use crate::CliError;
use rieszlab_core::io::{
    write_json, write_kernel_scan_csv, write_profile_csv, write_sweep_csv, KernelScanRow, VerdictRecord,
};
use rieszlab_core::movingplane::{
    characterize, difference_quotient_probe, sweep, sweep_table, verify_comparison_sign,
    CharacterizeConfig, EventKind, QuotientSample, ReportStatus, SignReport, SweepConfig, SweepResult,
};
use rieszlab_core::potentials::{constancy_verdict, error_budget, eval_potential, eval_potential_mc};
use rieszlab_core::{Domain, Hyperplane, IntegralEstimate, KernelSpec, PotentialSpec, QuadratureConfig};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};

fn output(s: &Settings) -> Result<Box<dyn Write>, CliError> {
    Ok(match &s.output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn finish(mut w: Box<dyn Write>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Config(format!("write failed: {e}")))
}

fn potential_spec(s: &Settings) -> Result<PotentialSpec<f64>, CliError> {
    let kernel = KernelSpec::parse(s.kernel()?)?;
    let domain = Domain::parse(s.domain()?)?;
    let quad = s.quad.apply(QuadratureConfig::default());
    Ok(PotentialSpec::new(kernel, domain, quad)?)
}

/// Sweeps sample the boundary, so they need a seed.
fn sweep_config(s: &Settings) -> Result<SweepConfig<f64>, CliError> {
    let base = SweepConfig::<f64>::default();
    Ok(SweepConfig {
        seed: s.seed()?,
        cap_quad: s.quad.apply(base.cap_quad.clone()),
        ..base
    })
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn kernel_scan(s: &Settings) -> Result<(), CliError> {
    let k = KernelSpec::<f64>::parse(s.kernel()?)?;
    let (a, b, n) = (s.smin(), s.smax(), s.steps());
    if !(a > 0.0 && b > a && n >= 2) {
        return Err(CliError::Config(format!("need 0 < smin < smax and steps >= 2, got {a}, {b}, {n}")));
    }
    let rows = (0..n)
        .map(|i| {
            let sv = a + (b - a) * i as f64 / (n - 1) as f64;
            let v = k.eval_value(sv, true)?;
            Ok(KernelScanRow {
                s: sv,
                k: v.value,
                dk: v.derivative.unwrap_or(f64::NAN),
            })
        })
        .collect::<rieszlab_core::Result<Vec<_>>>()?;
    let best = rows.iter().copied().fold(rows[0], |m, r| if r.k > m.k { r } else { m });
    let footer = vec![
        ("kernel".to_string(), k.to_string()),
        ("argmax_s".into(), best.s.to_string()),
        ("max_k".into(), best.k.to_string()),
    ];
    let mut w = output(s)?;
    write_kernel_scan_csv(&mut w, &rows, &footer)?;
    finish(w)
}

pub fn potential(s: &Settings) -> Result<(), CliError> {
    let p = potential_spec(s)?;
    let x = s.point.clone().ok_or_else(|| CliError::Config("--point is required".into()))?;
    let est = if s.monte_carlo()? {
        let q = p.quad().clone().with_seed(s.seed()?);
        eval_potential_mc(&p.with_quad(q)?, &x)?
    } else {
        eval_potential(&p, &x)?
    };
    let mut w = output(s)?;
    writeln!(w, "{} ± {:e}", est.value, est.error_bound).map_err(|e| CliError::Config(e.to_string()))?;
    finish(w)?;
    if !est.converged {
        return Err(CliError::NonConvergence(format!("error bound {:e} at {x:?}", est.error_bound)));
    }
    Ok(())
}

pub fn boundary_profile(s: &Settings) -> Result<(), CliError> {
    let p = potential_spec(s)?;
    let seed = s.seed()?;
    let prof = rieszlab_core::boundary_profile(&p, s.samples(), seed)?;
    let verdict = constancy_verdict(&prof, 0.0);
    let footer = vec![
        ("domain".to_string(), p.domain().label().to_string()),
        ("kernel".into(), p.kernel().to_string()),
        ("seed".into(), seed.to_string()),
        ("error_budget".into(), error_budget(&prof, 0.0).to_string()),
        ("verdict".into(), format!("{verdict:?}")),
    ];
    let mut w = output(s)?;
    write_profile_csv(&mut w, &prof, &footer)?;
    finish(w)?;
    eprintln!(
        "mean {} spread {:e} (relative {:e}), verdict {verdict:?}",
        prof.mean, prof.abs_spread, prof.rel_spread
    );
    if !prof.all_converged() {
        let n = prof.samples.iter().filter(|x| !x.converged).count();
        return Err(CliError::NonConvergence(format!("{n} of {} samples", prof.samples.len())));
    }
    Ok(())
}

pub fn moving_plane(s: &Settings) -> Result<(), CliError> {
    let d = Domain::<f64>::parse(s.domain()?)?;
    let e = s.direction(d.dim());
    let cfg = sweep_config(s)?;
    let steps = s.steps.unwrap_or(100);
    if steps < 2 {
        return Err(CliError::Config("--steps must be at least 2".into()));
    }
    let rows = sweep_table(&d, &e, steps, &cfg)?;
    let sw = sweep(&d, &e, &cfg)?;
    let mut w = output(s)?;
    write_sweep_csv(&mut w, &rows, Some(&sw))?;
    finish(w)
}

/// One check of `u(x_lambda) - u(x)` against the cap integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lambda: f64,
    pub point: Vec<f64>,
    pub cap_integral: f64,
    pub potential_difference: f64,
    pub gap: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub domain: String,
    pub kernel: String,
    pub seed: u64,
    pub sign: SignReport<f64>,
    pub identity: Vec<IdentityCheck>,
    pub sign_passed: bool,
    pub identity_passed: bool,
    pub out_of_hypothesis: bool,
}

pub fn verify_lemmas(s: &Settings) -> Result<(), CliError> {
    let p = potential_spec(s)?;
    let seed = s.seed()?;
    let e = s.direction(p.domain().dim());
    let cfg = sweep_config(s)?;
    let sign = verify_comparison_sign(&p, &e, s.n_lambda(), s.n_points(), seed, &cfg)?;
    let mut unconverged = sign.samples.iter().filter(|x| !x.difference.converged).count();
    let mut identity = Vec::with_capacity(sign.samples.len());
    for smp in &sign.samples {
        let plane = Hyperplane::new(&sign.direction, smp.lambda)?;
        let ux = eval_potential(&p, &smp.point)?;
        let uxl = eval_potential(&p, &plane.reflect(&smp.point))?;
        let diff = smp.difference.clone();
        unconverged += usize::from(!ux.converged) + usize::from(!uxl.converged);
        let pd = uxl.value - ux.value;
        let gap = (diff.value - pd).abs();
        let bound = diff.error_bound + ux.error_bound + uxl.error_bound;
        identity.push(IdentityCheck {
            lambda: smp.lambda,
            point: smp.point.clone(),
            cap_integral: diff.value,
            potential_difference: pd,
            gap,
            bound,
            ok: gap <= bound,
        });
    }
    let report = LemmaReport {
        domain: p.domain().label().to_string(),
        kernel: p.kernel().to_string(),
        seed,
        sign_passed: sign.status == ReportStatus::Pass,
        out_of_hypothesis: sign.status == ReportStatus::OutOfHypothesis,
        identity_passed: identity.iter().all(|c| c.ok),
        sign,
        identity,
    };
    let mut w = output(s)?;
    write_json(&mut w, &report)?;
    finish(w)?;
    eprintln!(
        "sign suite: {:?}; difference identity: {}/{} within bounds",
        report.sign.status,
        report.identity.iter().filter(|c| c.ok).count(),
        report.identity.len()
    );
    if unconverged > 0 {
        return Err(CliError::NonConvergence(format!("{unconverged} integrals")));
    }
    Ok(())
}

pub fn ball_test(s: &Settings) -> Result<(), CliError> {
    let p = potential_spec(s)?;
    let seed = s.seed()?;
    let cfg = CharacterizeConfig {
        sweep: sweep_config(s)?,
        profile_samples: s.samples.unwrap_or(CharacterizeConfig::<f64>::default().profile_samples),
    };
    let v = characterize(&p, s.directions(), seed, &cfg)?;
    let mut w = output(s)?;
    write_json(&mut w, &VerdictRecord::from_verdict(&v))?;
    finish(w)
}

/// Sweep summary without infinities, so the JSON reads back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub direction: Vec<f64>,
    pub lambda0: f64,
    pub lambda_max: f64,
    pub kind: EventKind,
    pub lambda_bar: f64,
    pub witness: Vec<f64>,
    pub lambda_tangency: Option<f64>,
    pub lambda_orthogonality: Option<f64>,
    pub symmetry_residual: f64,
    pub cap_volume: f64,
    pub cap_err: f64,
}

impl From<&SweepResult<f64>> for SweepSummary {
    fn from(s: &SweepResult<f64>) -> Self {
        SweepSummary {
            direction: s.direction.clone(),
            lambda0: s.lambda0,
            lambda_max: s.lambda_max,
            kind: s.event.kind,
            lambda_bar: s.event.lambda_bar,
            witness: s.event.witness.clone(),
            lambda_tangency: finite(s.event.lambda_tangency),
            lambda_orthogonality: finite(s.event.lambda_orthogonality),
            symmetry_residual: s.symmetry_residual,
            cap_volume: s.omega_cap_volume.value,
            cap_err: s.omega_cap_volume.error_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub domain: String,
    pub kernel: String,
    pub sweep: SweepSummary,
    pub applicable: bool,
    pub reason: Option<String>,
    pub predicted_sign: Option<f64>,
    pub target: Vec<f64>,
    pub samples: Vec<QuotientSample<f64>>,
    pub min_abs_quotient: Option<f64>,
    pub gradient_along_e: Option<IntegralEstimate<f64>>,
    pub inscribed_radius: f64,
    pub signs_ok: bool,
}

pub fn quotient_probe(s: &Settings) -> Result<(), CliError> {
    let p = potential_spec(s)?;
    let e = s.direction(p.domain().dim());
    let sw = sweep(p.domain(), &e, &sweep_config(s)?)?;
    let r = difference_quotient_probe(&p, &sw, s.n_approach())?;
    let record = ProbeRecord {
        domain: p.domain().label().to_string(),
        kernel: p.kernel().to_string(),
        sweep: SweepSummary::from(&sw),
        applicable: r.applicable,
        reason: r.reason,
        predicted_sign: r.predicted_sign,
        target: r.target,
        samples: r.samples,
        min_abs_quotient: finite(r.min_abs_quotient),
        gradient_along_e: r.gradient_along_e,
        inscribed_radius: r.inscribed_radius,
        signs_ok: r.signs_ok,
    };
    let mut w = output(s)?;
    write_json(&mut w, &record)?;
    finish(w)?;
    if record.gradient_along_e.as_ref().is_some_and(|g| !g.converged) {
        return Err(CliError::NonConvergence("gradient at the critical point".into()));
    }
    Ok(())
}
