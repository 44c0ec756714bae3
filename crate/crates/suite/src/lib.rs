//! Shared helpers for the acceptance run: timing and PASS/FAIL lines.

use std::time::Instant;

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

/// Runs one criterion, prints its line and returns whether it passed.
pub fn criterion(id: u32, title: &str, f: impl FnOnce() -> Result<Outcome, String>) -> bool {
    let t = Instant::now();
    let out = f().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
    let tag = if out.pass { "PASS" } else { "FAIL" };
    println!("{tag} [{id:>2}] {title}: {} ({:.1}s)", out.detail, t.elapsed().as_secs_f64());
    out.pass
}

/// Ratios of consecutive entries, coarse over fine.
pub fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

pub fn fmt(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", s.join(", "))
}
