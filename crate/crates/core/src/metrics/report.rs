use std::fmt::Write as _;

use serde::Serialize;

use super::{ApReport, MotaReport};
use crate::error::{Error, Result};

/// Combined evaluation output, rendered either as a fixed-column text table
/// or as JSON with the same fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tau_factor: f64,
    pub mota: MotaReport,
    pub ap: ApReport,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tau_factor {}", self.tau_factor);
        let _ = writeln!(
            s,
            "{:<14} {:>10} {:>10} {:>8} {:>8} {:>8} {:>8}",
            "joint", "ap", "mota", "fp", "fn", "idsw", "gt"
        );
        for (m, a) in self.mota.joints.iter().zip(&self.ap.joints) {
            let c = &m.counts;
            let _ = writeln!(
                s,
                "{:<14} {:>10} {:>10} {:>8} {:>8} {:>8} {:>8}",
                m.joint,
                opt(a.ap),
                opt(c.mota),
                c.fp,
                c.fn_,
                c.idsw,
                c.gt
            );
        }
        let t = &self.mota.total;
        let _ = writeln!(
            s,
            "{:<14} {:>10} {:>10} {:>8} {:>8} {:>8} {:>8}",
            "total",
            format!("{:.6}", self.ap.map),
            opt(t.mota),
            t.fp,
            t.fn_,
            t.idsw,
            t.gt
        );
        if !self.mota.has_ground_truth() {
            let _ = writeln!(s, "no ground truth");
        }
        let _ = writeln!(s, "total_mota {}", t.mota.map_or("n/a".to_string(), |v| v.to_string()));
        let _ = writeln!(s, "total_map {}", self.ap.map);
        s
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        if !self.tau_factor.is_finite() {
            return Err(Error::NonFinite("tau_factor".into()));
        }
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
