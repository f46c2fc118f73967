//! Lyapunov bookkeeping over a telemetry stream.

use serde::Serialize;

use crate::certify::CertificationReport;

use super::TelemetryRecord;

/// Largest tolerated per-step increase of the basic `V_R`, J.
pub const LYAPUNOV_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MonitorResult {
    /// The stream carries no Lyapunov values (no controller gains).
    NotApplicable,
    Monitored {
        tolerance: f64,
        /// Steps where `V_R` grew by more than `tolerance`.
        increases: usize,
        max_increase: f64,
        first_increase_time: Option<f64>,
        /// `−slope` of a least-squares fit of `ln V` over the transient, 1/s.
        fitted_decay_rate: Option<f64>,
        /// `min_t −ln(V(t)/V(0))/t` over the transient, 1/s.
        envelope_decay_rate: Option<f64>,
        /// `λ_min(W)/λ_max(P_2)` when the gains certify.
        certified_decay_rate: Option<f64>,
        decay_consistent: Option<bool>,
    },
}

/// The transient ends once `V` has dropped by this factor.
const TRANSIENT_DROP: f64 = 1e-6;

pub fn lyapunov_monitor(records: &[TelemetryRecord], report: Option<&CertificationReport>, tol: f64) -> MonitorResult {
    if records.is_empty() || records.iter().any(|r| !r.v_r.is_finite() || !r.v_total.is_finite()) {
        return MonitorResult::NotApplicable;
    }
    let mut increases = 0;
    let mut max_increase = f64::NEG_INFINITY;
    let mut first_increase_time = None;
    for w in records.windows(2) {
        let d = w[1].v_r - w[0].v_r;
        max_increase = max_increase.max(d);
        if d > tol {
            increases += 1;
            first_increase_time.get_or_insert(w[1].t);
        }
    }
    let (fitted, envelope) = decay_rates(records);
    let certified = report.filter(|r| r.certified).map(|r| r.decay_rate_bound);
    let decay_consistent = match (certified, fitted) {
        (Some(c), Some(f)) => Some(f >= c),
        _ => None,
    };
    MonitorResult::Monitored {
        tolerance: tol,
        increases,
        max_increase: if records.len() < 2 { 0.0 } else { max_increase },
        first_increase_time,
        fitted_decay_rate: fitted,
        envelope_decay_rate: envelope,
        certified_decay_rate: certified,
        decay_consistent,
    }
}

fn decay_rates(records: &[TelemetryRecord]) -> (Option<f64>, Option<f64>) {
    let v0 = records[0].v_total;
    let t0 = records[0].t;
    if !(v0 > 0.0) {
        return (None, None);
    }
    let floor = v0 * TRANSIENT_DROP;
    let transient: Vec<(f64, f64)> = records
        .iter()
        .take_while(|r| r.v_total > floor)
        .map(|r| (r.t - t0, r.v_total.ln()))
        .collect();
    if transient.len() < 3 {
        return (None, None);
    }
    let n = transient.len() as f64;
    let mean_t = transient.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = transient.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = transient.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let sxx: f64 = transient.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let fitted = -sxy / sxx;
    let ln_v0 = v0.ln();
    let envelope = transient
        .iter()
        .skip(1)
        .map(|&(t, y)| -(y - ln_v0) / t)
        .fold(f64::INFINITY, f64::min);
    (Some(fitted), Some(envelope))
}
