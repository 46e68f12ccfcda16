//! Structured verification reports.
//!
//! A report is a list of per-point records plus aggregates derived from
//! them; the aggregate maximum of every check equals the maximum over the
//! per-point records by construction.

use crate::spray::CotangentPoint;

/// One named residual at one point, with the tolerance it is judged by.
#[derive(Clone, Debug)]
pub struct CheckRecord {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckRecord {
    pub fn pass(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tolerance
    }
}

/// A quantity that must stay above a floor (e.g. |det| of a realized form).
#[derive(Clone, Debug)]
pub struct MarginRecord {
    pub name: &'static str,
    pub value: f64,
    pub floor: f64,
}

impl MarginRecord {
    pub fn pass(&self) -> bool {
        self.value.is_finite() && self.value >= self.floor
    }
}

/// Everything recorded at one sample point.
#[derive(Clone, Debug)]
pub struct PointRecord {
    pub index: usize,
    pub point: CotangentPoint,
    pub inside_u: bool,
    /// Failure time and reason when the flow never reached t = 1.
    pub failure: Option<String>,
    pub checks: Vec<CheckRecord>,
    pub margins: Vec<MarginRecord>,
}

/// Aggregate of one named check over all points where it was evaluated.
#[derive(Clone, Debug)]
pub struct CheckSummary {
    pub name: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
    pub points: usize,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct MarginSummary {
    pub name: &'static str,
    pub min_value: f64,
    pub floor: f64,
    pub points: usize,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub kind: String,
    pub points: Vec<PointRecord>,
    pub summaries: Vec<CheckSummary>,
    pub margin_summaries: Vec<MarginSummary>,
    pub points_inside: usize,
}

impl VerificationReport {
    pub fn from_points(kind: &str, points: Vec<PointRecord>) -> VerificationReport {
        let mut summaries: Vec<CheckSummary> = Vec::new();
        let mut margin_summaries: Vec<MarginSummary> = Vec::new();
        for rec in &points {
            for c in &rec.checks {
                match summaries.iter_mut().find(|s| s.name == c.name) {
                    Some(s) => {
                        // NaN propagates into the aggregate maximum
                        if c.residual > s.max_residual || c.residual.is_nan() {
                            s.max_residual = c.residual;
                        }
                        s.points += 1;
                        s.pass = s.pass && c.pass();
                    }
                    None => summaries.push(CheckSummary {
                        name: c.name,
                        max_residual: c.residual,
                        tolerance: c.tolerance,
                        points: 1,
                        pass: c.pass(),
                    }),
                }
            }
            for m in &rec.margins {
                match margin_summaries.iter_mut().find(|s| s.name == m.name) {
                    Some(s) => {
                        if m.value < s.min_value || m.value.is_nan() {
                            s.min_value = m.value;
                        }
                        s.points += 1;
                        s.pass = s.pass && m.pass();
                    }
                    None => margin_summaries.push(MarginSummary {
                        name: m.name,
                        min_value: m.value,
                        floor: m.floor,
                        points: 1,
                        pass: m.pass(),
                    }),
                }
            }
        }
        let points_inside = points.iter().filter(|p| p.inside_u).count();
        VerificationReport {
            kind: kind.to_string(),
            points,
            summaries,
            margin_summaries,
            points_inside,
        }
    }

    /// All checks and margins pass and at least one point was usable.
    pub fn passed(&self) -> bool {
        self.points_inside > 0
            && self.summaries.iter().all(|s| s.pass)
            && self.margin_summaries.iter().all(|m| m.pass)
    }

    pub fn all_points_outside(&self) -> bool {
        !self.points.is_empty() && self.points_inside == 0
    }

    /// First failing point of a named check, if any.
    pub fn first_failure(&self) -> Option<(&PointRecord, &CheckRecord)> {
        for p in &self.points {
            for c in &p.checks {
                if !c.pass() {
                    return Some((p, c));
                }
            }
        }
        None
    }
}
