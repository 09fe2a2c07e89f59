//! Batch runs over sampled targets and the controller comparison study.

use super::cycle::{run_harvest_cycle, run_motion_test, PhaseDurations, TrialRecord};
use super::{ControllerKind, SimConfig, SimError};
use crate::kinematics::{
    forward_kinematics, inverse_kinematics, sample_joint_states, CartesianPoint, KinematicsError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{self, Write};

/// Mix a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How batch targets are drawn: FK images of joint states sampled uniformly
/// inside the joint limits shrunk about their midpoints by `limit_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub limit_scale: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { limit_scale: 0.9 }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.limit_scale > 0.0 && self.limit_scale <= 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "scene.limit_scale must be in (0, 1], got {}",
                self.limit_scale
            )));
        }
        Ok(())
    }

    pub fn targets(&self, cfg: &SimConfig, n: usize, seed: u64) -> Vec<CartesianPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
        sample_joint_states(&cfg.limits.scaled(self.limit_scale), n, &mut rng)
            .iter()
            .map(|q| forward_kinematics(q, &cfg.links))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n: usize,
    pub success_rate: f64,
    pub mean_error_m: f64,
    pub max_error_m: f64,
    pub threshold_m: f64,
    pub seed: u64,
    pub controller: ControllerKind,
    pub phase_means_s: PhaseDurations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub summary: BatchSummary,
    pub trials: Vec<TrialRecord>,
}

/// Run `n` independent harvest cycles on sampled targets. Trials run in
/// parallel; results keep trial-index order, so output depends only on the
/// inputs.
pub fn run_batch(
    n: usize,
    scene: &SceneConfig,
    kind: ControllerKind,
    cfg: &SimConfig,
    seed: u64,
) -> Result<BatchResult, SimError> {
    if n == 0 {
        return Err(SimError::InvalidConfig("batch size must be >= 1".into()));
    }
    scene.validate()?;
    cfg.validate()?;
    let targets = scene.targets(cfg, n, seed);
    let trials = targets
        .par_iter()
        .enumerate()
        .map(|(i, target)| run_harvest_cycle(target, kind, cfg, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let nf = n as f64;
    let successes = trials.iter().filter(|t| t.success).count();
    let mut phase_means = PhaseDurations::default();
    for t in &trials {
        phase_means.localize += t.phase_durations.localize / nf;
        phase_means.approach += t.phase_durations.approach / nf;
        phase_means.detach += t.phase_durations.detach / nf;
        phase_means.return_home += t.phase_durations.return_home / nf;
    }
    let summary = BatchSummary {
        n,
        success_rate: successes as f64 / nf,
        mean_error_m: trials.iter().map(|t| t.final_error).sum::<f64>() / nf,
        max_error_m: trials.iter().map(|t| t.final_error).fold(0.0, f64::max),
        threshold_m: cfg.settings.success_threshold,
        seed,
        controller: kind,
        phase_means_s: phase_means,
    };
    Ok(BatchResult { summary, trials })
}

/// The three Cartesian targets of the hardware comparison study.
pub fn reference_cases() -> [CartesianPoint; 3] {
    [
        CartesianPoint::new(0.6876, -0.0505, 0.011),
        CartesianPoint::new(0.5874, -0.1483, 0.3695),
        CartesianPoint::new(0.6936, 0.1938, 0.01),
    ]
}

/// Revolute limit used when a comparison case violates the configured limits.
pub const WIDENED_LIMIT_DEG: f64 = 28.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// 1-based case number.
    pub case: usize,
    pub controller: ControllerKind,
    pub mean_error_mm: f64,
    pub std_mm: f64,
    pub repetitions: usize,
    /// Empty, `widened_limits`, `unreachable` or `failed`.
    pub flag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn mean_mm(&self, case: usize, kind: ControllerKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.case == case && r.controller == kind)
            .map(|r| r.mean_error_mm)
            .filter(|v| v.is_finite())
    }

    /// proposed < position-mode < open-loop for `case`.
    pub fn ordering_holds(&self, case: usize) -> bool {
        match (
            self.mean_mm(case, ControllerKind::Proposed),
            self.mean_mm(case, ControllerKind::PositionMode),
            self.mean_mm(case, ControllerKind::OpenLoop),
        ) {
            (Some(p), Some(m), Some(o)) => p < m && m < o,
            _ => false,
        }
    }

    pub fn cases(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.rows.iter().map(|r| r.case).collect();
        c.dedup();
        c
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "case,controller,mean_error_mm,std_mm,repetitions,flag")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.6},{:.6},{},{}",
                r.case, r.controller, r.mean_error_mm, r.std_mm, r.repetitions, r.flag
            )?;
        }
        Ok(())
    }

    /// Human-readable table: one line per case, mean ± std in mm per method.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6} {:>20} {:>20} {:>20}  note",
            "case", "open_loop [mm]", "position_mode [mm]", "proposed [mm]"
        );
        for case in self.cases() {
            let mut line = format!("{case:<6}");
            let mut flag = String::new();
            for kind in ControllerKind::ALL {
                if let Some(r) = self
                    .rows
                    .iter()
                    .find(|r| r.case == case && r.controller == kind)
                {
                    let cell = format!("{:.3} ± {:.3}", r.mean_error_mm, r.std_mm);
                    let _ = write!(line, " {cell:>20}");
                    if !r.flag.is_empty() {
                        flag = r.flag.clone();
                    }
                }
            }
            let _ = writeln!(s, "{line}  {flag}");
        }
        s
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Move from home to each case with every controller, `repetitions` times.
///
/// Repetition `r` of a case uses the same seed for all three controllers, so
/// they see the same actuator realization. A case whose joint solution lies
/// outside the configured revolute limits is rerun with the limits widened to
/// ±28° and flagged `widened_limits`; if it is still infeasible it is flagged
/// `unreachable` and reports NaN errors.
pub fn compare_controllers(
    cases: &[CartesianPoint],
    repetitions: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<ComparisonTable, SimError> {
    if repetitions == 0 {
        return Err(SimError::InvalidConfig("repetitions must be >= 1".into()));
    }
    cfg.validate()?;
    let mut base = cfg.clone();
    base.settings.log_decimation = 0;

    let mut rows = Vec::new();
    for (ci, target) in cases.iter().enumerate() {
        let mut case_cfg = base.clone();
        let mut flag = String::new();
        match inverse_kinematics(target, &case_cfg.links, &case_cfg.limits) {
            Ok(_) => {}
            Err(KinematicsError::LimitViolation(_)) => {
                case_cfg.limits = case_cfg.limits.with_revolute_deg(WIDENED_LIMIT_DEG);
                flag = "widened_limits".to_string();
                if inverse_kinematics(target, &case_cfg.links, &case_cfg.limits).is_err() {
                    flag = "unreachable".to_string();
                }
            }
            Err(_) => flag = "unreachable".to_string(),
        }
        if flag == "unreachable" {
            for kind in ControllerKind::ALL {
                rows.push(ComparisonRow {
                    case: ci + 1,
                    controller: kind,
                    mean_error_mm: f64::NAN,
                    std_mm: f64::NAN,
                    repetitions,
                    flag: flag.clone(),
                });
            }
            continue;
        }
        for kind in ControllerKind::ALL {
            let errors: Vec<Result<f64, SimError>> = (0..repetitions)
                .into_par_iter()
                .map(|r| {
                    let s = derive_seed(seed, (ci as u64) << 32 | r as u64);
                    run_motion_test(target, kind, &case_cfg, s).map(|m| m.final_error * 1e3)
                })
                .collect();
            let ok: Vec<f64> = errors.iter().filter_map(|e| e.as_ref().ok().copied()).collect();
            let mut row_flag = flag.clone();
            if ok.len() < errors.len() {
                row_flag = if row_flag.is_empty() {
                    "failed".to_string()
                } else {
                    format!("{row_flag};failed")
                };
            }
            let (mean, std) = if ok.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_std(&ok)
            };
            rows.push(ComparisonRow {
                case: ci + 1,
                controller: kind,
                mean_error_mm: mean,
                std_mm: std,
                repetitions,
                flag: row_flag,
            });
        }
    }
    Ok(ComparisonTable { seed, rows })
}
