use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub const CURVE_HEADER: &str = "step,rolling_success,eval_accuracy";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    /// Interactions completed so far.
    pub step: u64,
    pub rolling_success: f64,
    pub eval_accuracy: f64,
}

impl CurveRow {
    pub fn to_csv(&self) -> String {
        format!("{},{:.6},{:.6}", self.step, self.rolling_success, self.eval_accuracy)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    pub fn push(&mut self, row: CurveRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(Error::Contract(format!("curve step {} after {}", row.step, last.step)));
            }
        }
        for v in [row.rolling_success, row.eval_accuracy] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Contract(format!("curve rate {v} outside [0, 1]")));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&CurveRow> {
        self.rows.last()
    }

    /// Rolling success of the last row.
    pub fn final_success(&self) -> Option<f64> {
        self.last().map(|r| r.rolling_success)
    }

    /// First step at which the rolling success, over a full window, reaches
    /// `target`.
    pub fn steps_to(&self, target: f64, window: u64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.step >= window && r.rolling_success >= target)
            .map(|r| r.step)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CURVE_HEADER) {
            return Err(Error::Config(format!("curve file must start with {CURVE_HEADER:?}")));
        }
        let mut curve = LearningCurve::default();
        for (n, line) in lines.enumerate() {
            let bad = || Error::Config(format!("curve line {}: {line:?}", n + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            curve.push(CurveRow {
                step: f[0].parse().map_err(|_| bad())?,
                rolling_success: f[1].parse().map_err(|_| bad())?,
                eval_accuracy: f[2].parse().map_err(|_| bad())?,
            })?;
        }
        Ok(curve)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Mean of the most recent `window` outcomes.
#[derive(Debug, Clone)]
pub struct RollingSuccess {
    window: usize,
    recent: VecDeque<bool>,
    hits: usize,
}

impl RollingSuccess {
    pub fn new(window: usize) -> Self {
        RollingSuccess {
            window: window.max(1),
            recent: VecDeque::with_capacity(window),
            hits: 0,
        }
    }

    pub fn push(&mut self, correct: bool) {
        if self.recent.len() == self.window && self.recent.pop_front() == Some(true) {
            self.hits -= 1;
        }
        self.recent.push_back(correct);
        self.hits += usize::from(correct);
    }

    /// 0 before the first outcome.
    pub fn rate(&self) -> f64 {
        if self.recent.is_empty() {
            0.0
        } else {
            self.hits as f64 / self.recent.len() as f64
        }
    }

    pub fn len(&self) -> usize {
        self.recent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recent.is_empty()
    }
}

/// Writes curve rows as they are produced, flushing each one, so an
/// interrupted run leaves a readable prefix.
pub struct CurveWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CurveWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = CurveWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.line(CURVE_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn append(&mut self, row: &CurveRow) -> Result<()> {
        self.line(&row.to_csv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rolling_rate_is_mean_of_last_window(outcomes in proptest::collection::vec(any::<bool>(), 0..300), window in 1usize..50) {
            let mut r = RollingSuccess::new(window);
            for (i, &o) in outcomes.iter().enumerate() {
                r.push(o);
                let tail = &outcomes[(i + 1).saturating_sub(window)..=i];
                let direct = tail.iter().filter(|&&b| b).count() as f64 / tail.len() as f64;
                prop_assert!((r.rate() - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip_and_ordering() {
        let mut c = LearningCurve::default();
        c.push(CurveRow {
            step: 10,
            rolling_success: 0.25,
            eval_accuracy: 0.5,
        })
        .unwrap();
        c.push(CurveRow {
            step: 20,
            rolling_success: 0.125,
            eval_accuracy: 1.0,
        })
        .unwrap();
        assert!(c
            .push(CurveRow {
                step: 20,
                rolling_success: 0.1,
                eval_accuracy: 0.1
            })
            .is_err());
        assert!(c
            .push(CurveRow {
                step: 30,
                rolling_success: 1.5,
                eval_accuracy: 0.1
            })
            .is_err());
        let text = c.to_csv();
        assert_eq!(
            text,
            "step,rolling_success,eval_accuracy\n10,0.250000,0.500000\n20,0.125000,1.000000\n"
        );
        assert_eq!(LearningCurve::parse(&text).unwrap(), c);
    }

    #[test]
    fn steps_to_needs_full_window() {
        let mut c = LearningCurve::default();
        for (s, r) in [(100, 0.9), (200, 0.5), (500, 0.81), (600, 0.7)] {
            c.push(CurveRow {
                step: s,
                rolling_success: r,
                eval_accuracy: 0.0,
            })
            .unwrap();
        }
        assert_eq!(c.steps_to(0.8, 500), Some(500));
        assert_eq!(c.steps_to(0.8, 100), Some(100));
        assert_eq!(c.steps_to(0.95, 100), None);
    }

    #[test]
    fn writer_leaves_valid_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves/a.csv");
        let mut w = CurveWriter::create(&path).unwrap();
        w.append(&CurveRow {
            step: 1,
            rolling_success: 1.0,
            eval_accuracy: 0.0,
        })
        .unwrap();
        // read while the writer is still open
        let c = LearningCurve::load(&path).unwrap();
        assert_eq!(c.rows.len(), 1);
    }
}
