//! Empirical CDFs, point-mass (bunching) detection, and histograms over
//! hours.

use std::io::Write;

use crate::data::PaycheckTable;
use crate::{Error, Result, GRID_TOL};

/// Empirical CDF of a sample, right-continuous, F(x) = #{h <= x} / n.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value {bad} in sample"
            )));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(EmpiricalCdf { sorted })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().unwrap()
    }

    /// Values in nondecreasing order; each carries weight 1/n.
    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// F(x) = #{h <= x} / n. Zero below the sample minimum.
    pub fn eval(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Left limit: #{h < x} / n.
    pub fn left_limit(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v < x);
        count as f64 / self.sorted.len() as f64
    }
}

/// The point mass of hours at a kink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BunchingStats {
    pub k: f64,
    /// Share of rows at the kink, in [0, 1].
    pub mass: f64,
    pub n_at_k: usize,
    pub n_total: usize,
}

/// Share of values within half a grid step of `k`.
pub fn point_mass(values: &[f64], k: f64) -> BunchingStats {
    let n_at_k = values.iter().filter(|&&h| (h - k).abs() < GRID_TOL).count();
    BunchingStats {
        k,
        mass: n_at_k as f64 / values.len().max(1) as f64,
        n_at_k,
        n_total: values.len(),
    }
}

/// Bunching mass of `hours_worked` at `k` over a whole table.
pub fn bunching_mass(table: &PaycheckTable, k: f64) -> BunchingStats {
    let n_at_k = table
        .rows()
        .iter()
        .filter(|r| (r.hours_worked - k).abs() < GRID_TOL)
        .count();
    BunchingStats {
        k,
        mass: n_at_k as f64 / table.len().max(1) as f64,
        n_at_k,
        n_total: table.len(),
    }
}

/// How histogram edges relate to the kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinAlignment {
    /// `k` falls on a bin boundary.
    EdgeAtK,
    /// `k` falls on a bin center.
    CenterAtK,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    pub share: f64,
}

/// Histogram of values over `[range.0, range.1]` with the given width,
/// edges aligned to `k`. Bins are left-closed, right-open; the last bin
/// also includes the right edge so total mass in range is conserved.
pub fn histogram(
    values: &[f64],
    bin_width: f64,
    range: (f64, f64),
    k: f64,
    align: BinAlignment,
) -> Result<Vec<Bin>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bin_width must be > 0, got {bin_width}"
        )));
    }
    if !(range.0 < range.1) {
        return Err(Error::InvalidArgument(format!("empty range {range:?}")));
    }
    let anchor = match align {
        BinAlignment::EdgeAtK => k,
        BinAlignment::CenterAtK => k - bin_width / 2.0,
    };
    // leftmost edge at or below range.0, aligned to the anchor
    let start = anchor + ((range.0 - anchor) / bin_width).floor() * bin_width;
    let n_bins = ((range.1 - start) / bin_width).ceil().max(1.0) as usize;
    let mut bins: Vec<Bin> = (0..n_bins)
        .map(|i| Bin {
            left: start + i as f64 * bin_width,
            right: start + (i + 1) as f64 * bin_width,
            count: 0,
            share: 0.0,
        })
        .collect();
    let mut in_range = 0usize;
    for &v in values {
        if v < range.0 || v > range.1 {
            continue;
        }
        in_range += 1;
        let mut idx = ((v - start) / bin_width).floor() as usize;
        if idx >= n_bins {
            idx = n_bins - 1; // right edge of the last bin
        }
        bins[idx].count += 1;
    }
    if in_range > 0 {
        for b in &mut bins {
            b.share = b.count as f64 / in_range as f64;
        }
    }
    Ok(bins)
}

/// Histogram CSV export: `bin_left,bin_right,count,share`.
pub fn write_histogram_csv<W: Write>(bins: &[Bin], mut w: W) -> Result<()> {
    writeln!(w, "bin_left,bin_right,count,share")?;
    for b in bins {
        writeln!(w, "{},{},{},{}", b.left, b.right, b.count, b.share)?;
    }
    Ok(())
}
