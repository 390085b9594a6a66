//! `tt-amen diag`: randomized checks of the convergence bounds.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tt_amen::amen::EnrichmentMethod;
use tt_amen::diagnostics::{check_rate_report, exact_sweep_config, fom_trials, instrumented_rate_run, instrumented_spd_system, kantorovich_trials};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Exact steepest descent against the Kantorovich bound.
    Kantorovich,
    /// Instrumented AMEn sweeps: monotone energy and the rate identity.
    Rate,
    /// Single-step Galerkin projection bound on nonsymmetric matrices.
    Fom,
}

pub struct DiagOutcome {
    pub passed: bool,
    pub report: Value,
}

/// Sweeps whose errors fall below this are not compared (roundoff).
const RATE_RESOLUTION: f64 = 1e-6;

pub fn run_check(check: Check, trials: usize, seed: u64) -> Result<DiagOutcome> {
    Ok(match check {
        Check::Kantorovich => {
            let s = kantorovich_trials(trials, 50, 20, seed)?;
            DiagOutcome {
                passed: s.violations == 0,
                report: json!({
                    "check": "kantorovich", "systems": s.systems, "steps": s.steps,
                    "violations": s.violations, "worst_margin": s.worst_margin,
                }),
            }
        }
        Check::Fom => {
            let s = fom_trials(trials, seed);
            DiagOutcome {
                passed: s.violations == 0 && s.in_span_violations == 0,
                report: json!({
                    "check": "fom", "trials": s.trials, "inapplicable": s.inapplicable,
                    "violations": s.violations, "in_span_violations": s.in_span_violations,
                    "worst_margin": s.worst_margin,
                }),
            }
        }
        Check::Rate => {
            let mut passed = true;
            let mut runs = Vec::new();
            for t in 0..trials {
                let (a, y, x0) = instrumented_spd_system(3, 4, seed.wrapping_add(t as u64))?;
                let rep = instrumented_rate_run(&a, &y, &x0, &exact_sweep_config(EnrichmentMethod::Svd, 64, 3), 10)?;
                let c = check_rate_report(&rep, RATE_RESOLUTION);
                passed &= c.passed(1e-10);
                runs.push(json!({
                    "lambda_min": rep.lambda_min,
                    "lambda_max": rep.lambda_max,
                    "omega_a": rep.omega_a,
                    "sd_ratios": rep.sd_ratios,
                    "sweeps": rep.sweeps.iter().map(|s| json!({
                        "sweep": s.sweep,
                        "mu": s.mu,
                        "omega": s.omega,
                        "omega_ztilde": s.omega_ztilde,
                        "omega_reduced": s.omega_reduced,
                        "j_ratio": s.j_ratio,
                        "phi_d_squared": s.phi_squared,
                        "start_error": s.start_error,
                    })).collect::<Vec<_>>(),
                    "sweeps_checked": c.sweeps_checked,
                    "monotonicity_violations": c.monotonicity_violations,
                    "identity_error": c.identity_error,
                    "nesting_violations": c.nesting_violations,
                    "ordering_violations": c.ordering_violations,
                    "sd_violations": c.sd_violations,
                }));
            }
            DiagOutcome { passed, report: json!({ "check": "rate", "trials": trials, "runs": runs }) }
        }
    })
}
