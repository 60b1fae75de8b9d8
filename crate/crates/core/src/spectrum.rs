//! Frequency-resolved results shared by the analytic and numeric paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered `(frequency, value)` samples with a note on how they were made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSeries {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    /// Formula or oracle that produced the values.
    pub source: String,
    /// Franck-Condon truncation order, if a series was summed.
    pub m_max: Option<usize>,
    /// Vibrational Fock truncation, if a density matrix was used.
    pub fock_dim: Option<usize>,
    /// Conditions that make the values less trustworthy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SpectrumSeries {
    pub fn new(omega: Vec<f64>, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} frequencies but {} values",
                omega.len(),
                values.len()
            )));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                field: "omega",
                reason: "frequency grid must be strictly increasing".into(),
            });
        }
        Ok(Self {
            omega,
            values,
            source: source.into(),
            m_max: None,
            fock_dim: None,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Copy scaled so that the largest value is one.
    pub fn peak_normalized(&self) -> Self {
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = self.clone();
        if max > 0.0 {
            out.values.iter_mut().for_each(|v| *v /= max);
        }
        out
    }

    /// Indices of strict local maxima whose value exceeds `floor`.
    pub fn local_maxima(&self, floor: f64) -> Vec<usize> {
        let v = &self.values;
        (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > floor)
            .collect()
    }

    /// Index of the largest value with frequency in `[lo, hi]`.
    pub fn argmax_in(&self, lo: f64, hi: f64) -> Option<usize> {
        self.omega
            .iter()
            .enumerate()
            .filter(|(_, &w)| w >= lo && w <= hi)
            .max_by(|a, b| self.values[a.0].total_cmp(&self.values[b.0]))
            .map(|(i, _)| i)
    }

    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.omega
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1]))
            .sum()
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}
