use std::path::PathBuf;

use clap::ValueEnum;
use qrgrad::gradcheck::{
    run_duality_check, run_equivalence_check, run_forward_check, run_gradcheck,
};
use qrgrad::{GradCheckReport, Mode, Order, Shape};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeSelection {
    Qr,
    Lq,
    Both,
}

impl ModeSelection {
    fn modes(self) -> &'static [Mode] {
        match self {
            ModeSelection::Qr => &[Mode::Qr],
            ModeSelection::Lq => &[Mode::Lq],
            ModeSelection::Both => &[Mode::Qr, Mode::Lq],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Check {
    Grad,
    Equiv,
    Duality,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

pub const DEFAULT_SHAPES: [&str; 7] = ["3x3", "5x3", "3x5", "8x2", "2x8", "6x3", "3x6"];

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub mode: ModeSelection,
    pub shapes: Vec<Shape>,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    pub checks: Vec<Check>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.shapes.is_empty() {
            return Err("at least one shape is required".into());
        }
        if self.checks.is_empty() {
            return Err("at least one check is required".into());
        }
        if self.trials == 0 {
            return Err("--trials must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err("--tol must be positive".into());
        }
        Ok(())
    }
}

/// Reports grouped by check family; absent families are not serialized.
#[derive(Debug, Default, Serialize)]
pub struct CampaignReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad: Option<Vec<GradCheckReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equiv: Option<Vec<GradCheckReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality: Option<Vec<GradCheckReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forward: Option<Vec<GradCheckReport>>,
}

impl CampaignReport {
    pub fn families(&self) -> impl Iterator<Item = (&'static str, &[GradCheckReport])> {
        [
            ("grad", &self.grad),
            ("equiv", &self.equiv),
            ("duality", &self.duality),
            ("forward", &self.forward),
        ]
        .into_iter()
        .filter_map(|(name, r)| r.as_deref().map(|r| (name, r)))
    }

    pub fn all_passed(&self) -> bool {
        self.families().all(|(_, r)| r.iter().all(|x| x.passed))
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (family, reports) in self.families() {
            for r in reports {
                out.push_str(&format!(
                    "{family:<8} {} {:<6} seed={:<6} max_rel={:.3e} max_abs={:.3e} {}\n",
                    r.mode,
                    r.shape.to_string(),
                    r.seed,
                    r.max_rel_error,
                    r.max_abs_error,
                    if r.passed { "PASS" } else { "FAIL" }
                ));
            }
            let passed = reports.iter().filter(|r| r.passed).count();
            out.push_str(&format!("{family}: {passed}/{} passed\n", reports.len()));
        }
        out
    }
}

/// Runs every selected check over every shape. Within a family reports are
/// ordered by shape, then mode, then trial index.
pub fn run(config: &CampaignConfig) -> qrgrad::Result<CampaignReport> {
    let mut report = CampaignReport::default();
    let mut checks = config.checks.clone();
    checks.sort();
    checks.dedup();
    for check in checks {
        let mut reports = Vec::new();
        for &shape in &config.shapes {
            for &mode in config.mode.modes() {
                let batch = match check {
                    Check::Grad => {
                        run_gradcheck(mode, shape, config.trials, config.seed, config.tol)?
                    }
                    // The mask-form comparison exists for QR with m >= n only.
                    Check::Equiv if mode == Mode::Qr && shape.order != Order::Wide => {
                        run_equivalence_check(shape, config.trials, config.seed)?
                    }
                    Check::Equiv => continue,
                    Check::Duality => run_duality_check(mode, shape, config.trials, config.seed)?,
                    Check::Forward => run_forward_check(mode, shape, config.trials, config.seed)?,
                };
                reports.extend(batch);
            }
        }
        let slot = match check {
            Check::Grad => &mut report.grad,
            Check::Equiv => &mut report.equiv,
            Check::Duality => &mut report.duality,
            Check::Forward => &mut report.forward,
        };
        *slot = Some(reports);
    }
    Ok(report)
}
