use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::train::Dataset;
use crate::error::{Error, Result};

/// Largest category id (exclusive) accepted on a categorical feature.
pub const MAX_CATEGORIES: u32 = 1 << 16;

/// How one feature's raw values map to histogram bins.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBins {
    /// Bin `k` holds values `x` with `thresholds[k-1] < x <= thresholds[k]`.
    Numeric { thresholds: Vec<f64> },
    /// One bin per category id.
    Categorical { num_categories: u32 },
}

impl FeatureBins {
    pub fn num_bins(&self) -> usize {
        match self {
            FeatureBins::Numeric { thresholds } => thresholds.len() + 1,
            FeatureBins::Categorical { num_categories } => *num_categories as usize,
        }
    }

    pub fn bin(&self, x: f64) -> u32 {
        match self {
            FeatureBins::Numeric { thresholds } => thresholds.partition_point(|t| *t < x) as u32,
            FeatureBins::Categorical { .. } => x as u32,
        }
    }

    /// Upper edge of a numeric bin, used as the split threshold.
    pub fn upper_edge(&self, bin: usize) -> f64 {
        match self {
            FeatureBins::Numeric { thresholds } => thresholds[bin],
            FeatureBins::Categorical { .. } => f64::NAN,
        }
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn numeric_thresholds(values: &mut [f64], max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut uniques: Vec<(f64, usize)> = Vec::new();
    for &v in values.iter() {
        match uniques.last_mut() {
            Some((u, c)) if *u == v => *c += 1,
            _ => uniques.push((v, 1)),
        }
    }
    if uniques.len() <= max_bins {
        return uniques.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
    }
    // Count-weighted quantile cuts between distinct values.
    let mut cuts = Vec::with_capacity(max_bins - 1);
    let mut seen = 0usize;
    let mut next_cut = 1usize;
    for w in uniques.windows(2) {
        seen += w[0].1;
        if next_cut < max_bins && seen * max_bins >= next_cut * n {
            cuts.push(midpoint(w[0].0, w[1].0));
            while next_cut < max_bins && seen * max_bins >= next_cut * n {
                next_cut += 1;
            }
        }
    }
    cuts
}

/// Column-major binned copy of a dataset.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    features: Vec<FeatureBins>,
    columns: Vec<Vec<u32>>,
}

impl BinnedMatrix {
    pub fn build(data: &Dataset, max_bins: usize) -> Result<Self> {
        if max_bins < 2 {
            return Err(Error::InvalidConfig(format!("max_bins must be >= 2, got {max_bins}")));
        }
        let n_rows = data.n_rows();
        let mut features = Vec::with_capacity(data.n_features());
        let mut columns = Vec::with_capacity(data.n_features());
        for f in 0..data.n_features() {
            let mut col: Vec<f64> = (0..n_rows).map(|i| data.value(i, f)).collect();
            if let Some(bad) = col.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("feature {f} has non-finite value {bad}")));
            }
            let bins = if data.is_categorical(f) {
                let mut max = 0u32;
                for &v in &col {
                    if v < 0.0 || crate::math::floor(v) != v || v >= f64::from(MAX_CATEGORIES) {
                        return Err(Error::InvalidConfig(format!("categorical feature {f} has invalid category {v}")));
                    }
                    max = max.max(v as u32);
                }
                FeatureBins::Categorical { num_categories: max + 1 }
            } else {
                FeatureBins::Numeric { thresholds: numeric_thresholds(&mut col.clone(), max_bins) }
            };
            let binned = col.drain(..).map(|v| bins.bin(v)).collect();
            features.push(bins);
            columns.push(binned);
        }
        Ok(Self { n_rows, features, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature(&self, f: usize) -> &FeatureBins {
        &self.features[f]
    }

    pub fn column(&self, f: usize) -> &[u32] {
        &self.columns[f]
    }

    pub fn bin(&self, row: usize, f: usize) -> u32 {
        self.columns[f][row]
    }

    pub(crate) fn histogram(&self, f: usize, rows: &[usize], grad: &[f64], hess: &[f64]) -> Vec<BinStats> {
        let mut hist = vec![BinStats::default(); self.features[f].num_bins()];
        let col = &self.columns[f];
        for &r in rows {
            let b = &mut hist[col[r] as usize];
            b.grad += grad[r];
            b.hess += hess[r];
            b.count += 1;
        }
        hist
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct BinStats {
    pub grad: f64,
    pub hess: f64,
    pub count: usize,
}

impl core::ops::AddAssign for BinStats {
    fn add_assign(&mut self, o: Self) {
        self.grad += o.grad;
        self.hess += o.hess;
        self.count += o.count;
    }
}

impl core::ops::Sub for BinStats {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { grad: self.grad - o.grad, hess: self.hess - o.hess, count: self.count - o.count }
    }
}
