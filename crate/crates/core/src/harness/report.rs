use std::collections::BTreeMap;

use super::config::{ExperimentConfig, InitKind};
use super::curve::LearningCurve;
use crate::env::ChannelKind;
use crate::policy::TaskKind;
use crate::{Error, Result};

pub const REPORT_HEADER: &str =
    "task,init,regime,channel,seeds,final_success_mean,final_success_std,eval_accuracy_mean,steps_to_80_mean,ordering_ok";

/// Success level whose first crossing is reported.
pub const TARGET_SUCCESS: f64 = 0.80;

const REGIME_ORDER: [&str; 3] = ["full", "partial", "partial_noisy"];

/// Seed-averaged summary of one (task, init, regime, channel) panel entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub task: TaskKind,
    pub init: InitKind,
    pub regime: &'static str,
    pub channel: ChannelKind,
    pub seeds: usize,
    pub final_success_mean: f64,
    pub final_success_std: f64,
    pub eval_accuracy_mean: f64,
    /// Mean over seeds that got there; `None` if any seed never did.
    pub steps_to_80_mean: Option<f64>,
    /// Full >= partial >= partial_noisy within the row's panel.
    pub ordering_ok: bool,
}

impl ReportRow {
    pub fn to_csv(&self) -> String {
        let channel = match self.channel {
            ChannelKind::Oracle => "oracle",
            ChannelKind::Learned => "learned",
        };
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            self.task.name(),
            self.init.name(),
            self.regime,
            channel,
            self.seeds,
            self.final_success_mean,
            self.final_success_std,
            self.eval_accuracy_mean,
            self.steps_to_80_mean.map_or(String::new(), |s| format!("{s:.1}")),
            self.ordering_ok
        )
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Groups cells across seeds and checks the regime ordering per panel.
pub fn summarize(cells: &[(ExperimentConfig, LearningCurve)]) -> Result<Vec<ReportRow>> {
    type Key = (TaskKind, InitKind, usize, ChannelKind);
    let mut groups: BTreeMap<Key, Vec<&(ExperimentConfig, LearningCurve)>> = BTreeMap::new();
    for cell in cells {
        let regime = REGIME_ORDER
            .iter()
            .position(|&r| r == cell.0.regime.name())
            .expect("known regime name");
        groups
            .entry((cell.0.task, cell.0.init, regime, cell.0.channel))
            .or_default()
            .push(cell);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((task, init, regime, channel), members) in &groups {
        let mut finals = Vec::new();
        let mut evals = Vec::new();
        let mut reach = Vec::new();
        for (exp, curve) in members {
            let last = curve.last().ok_or(Error::Empty("curve of a reported run"))?;
            finals.push(last.rolling_success);
            evals.push(last.eval_accuracy);
            reach.push(curve.steps_to(TARGET_SUCCESS, exp.window).map(|s| s as f64));
        }
        let steps_to_80_mean = reach.iter().copied().collect::<Option<Vec<f64>>>().map(|v| mean(&v));
        rows.push(ReportRow {
            task: *task,
            init: *init,
            regime: REGIME_ORDER[*regime],
            channel: *channel,
            seeds: members.len(),
            final_success_mean: mean(&finals),
            final_success_std: std_dev(&finals),
            eval_accuracy_mean: mean(&evals),
            steps_to_80_mean,
            ordering_ok: true,
        });
    }
    let panels: Vec<(TaskKind, InitKind, ChannelKind)> = rows.iter().map(|r| (r.task, r.init, r.channel)).collect();
    for panel in panels {
        let idx: Vec<usize> = (0..rows.len())
            .filter(|&i| (rows[i].task, rows[i].init, rows[i].channel) == panel)
            .collect();
        let ok = idx
            .windows(2)
            .all(|w| rows[w[0]].final_success_mean >= rows[w[1]].final_success_mean);
        for i in idx {
            rows[i].ordering_ok = ok;
        }
    }
    Ok(rows)
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FeedbackRegime;
    use crate::harness::config::Config;
    use crate::harness::curve::CurveRow;

    fn curve(points: &[(u64, f64)]) -> LearningCurve {
        let mut c = LearningCurve::default();
        for &(step, r) in points {
            c.push(CurveRow {
                step,
                rolling_success: r,
                eval_accuracy: r,
            })
            .unwrap();
        }
        c
    }

    #[test]
    fn one_row_per_panel_regime_with_ordering() {
        let cfg = Config::default();
        let cells: Vec<(ExperimentConfig, LearningCurve)> = ExperimentConfig::grid(&cfg)
            .unwrap()
            .into_iter()
            .map(|e| {
                let base = match e.regime {
                    FeedbackRegime::Full => 0.9,
                    FeedbackRegime::Partial { .. } => 0.85,
                    FeedbackRegime::PartialNoisy { .. } => {
                        if e.task == TaskKind::MultiLabel && e.init == InitKind::Pretrained {
                            0.95
                        } else {
                            0.6
                        }
                    }
                };
                let c = curve(&[(500, base - 0.05), (1000, base + e.seed as f64 * 0.01)]);
                (e, c)
            })
            .collect();
        let rows = summarize(&cells).unwrap();
        assert_eq!(rows.len(), 12);
        for r in &rows {
            assert_eq!(r.seeds, 3);
            let bad_panel = r.task == TaskKind::MultiLabel && r.init == InitKind::Pretrained;
            assert_eq!(r.ordering_ok, !bad_panel, "{r:?}");
        }
        let full = rows.iter().find(|r| r.regime == "full").unwrap();
        assert!((full.final_success_mean - 0.92).abs() < 1e-12);
        assert!((full.final_success_std - 0.01).abs() < 1e-12);
        assert_eq!(full.steps_to_80_mean, Some(500.0));
        let noisy = rows.iter().find(|r| r.regime == "partial_noisy").unwrap();
        assert_eq!(noisy.steps_to_80_mean, None);
        let csv = report_csv(&rows);
        assert_eq!(csv.lines().count(), 13);
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("multiclass,scratch,full,oracle,3,0.920000,"));
    }
}
