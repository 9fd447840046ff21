use serde::{Deserialize, Serialize};

use super::{DiscrepancyError, ScaleDistance};

/// Scale bands, by the size of the structure they respond to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Small,
    Mid,
    Large,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Small, Band::Mid, Band::Large];
}

/// One value per band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerBand<T> {
    pub small: T,
    pub mid: T,
    pub large: T,
}

impl<T: Copy> PerBand<T> {
    pub fn splat(v: T) -> Self {
        Self {
            small: v,
            mid: v,
            large: v,
        }
    }

    pub fn get(&self, b: Band) -> T {
        match b {
            Band::Small => self.small,
            Band::Mid => self.mid,
            Band::Large => self.large,
        }
    }

    pub fn get_mut(&mut self, b: Band) -> &mut T {
        match b {
            Band::Small => &mut self.small,
            Band::Mid => &mut self.mid,
            Band::Large => &mut self.large,
        }
    }
}

/// Per-band trigger levels on the band statistic, in meters.
pub type Thresholds = PerBand<f64>;

impl Thresholds {
    pub fn validate(&self) -> Result<(), DiscrepancyError> {
        for b in Band::ALL {
            let t = self.get(b);
            if !(t.is_finite() && t > 0.0) {
                return Err(DiscrepancyError::InvalidConfig(format!("threshold for {b:?} must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Band of scale `j` in a bank of `count` scales ordered largest first.
/// For seven scales this is `{0,1}` large, `{2,3,4}` mid, `{5,6}` small.
pub fn band_of_scale(j: usize, count: usize) -> Band {
    let outer = ((2 * count) as f64 / 7.0).round().max(1.0) as usize;
    if j < outer {
        Band::Large
    } else if j + outer >= count {
        Band::Small
    } else {
        Band::Mid
    }
}

pub type BandSet = PerBand<bool>;

impl BandSet {
    pub fn is_empty(&self) -> bool {
        !(self.small || self.mid || self.large)
    }

    pub fn iter(&self) -> impl Iterator<Item = Band> + '_ {
        Band::ALL.into_iter().filter(|&b| self.get(b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyVerdict {
    /// Position in the correspondence list.
    pub pair: usize,
    pub server_index: usize,
    pub robot_index: usize,
    pub bands: BandSet,
    /// Maximum scale-wise distance within each band.
    pub stats: PerBand<f64>,
}

/// Band statistics of one distance vector.
pub fn band_stats(d: &ScaleDistance) -> PerBand<f64> {
    let mut stats = PerBand::splat(0.0_f64);
    let count = d.distances.len();
    for (j, &v) in d.distances.iter().enumerate() {
        let s = stats.get_mut(band_of_scale(j, count));
        *s = s.max(v);
    }
    stats
}

/// A band triggers when its statistic strictly exceeds its threshold.
pub fn classify(pair: usize, d: &ScaleDistance, thresholds: &Thresholds) -> DiscrepancyVerdict {
    let stats = band_stats(d);
    let mut bands = BandSet::splat(false);
    for b in Band::ALL {
        *bands.get_mut(b) = stats.get(b) > thresholds.get(b);
    }
    DiscrepancyVerdict {
        pair,
        server_index: d.server_index,
        robot_index: d.robot_index,
        bands,
        stats,
    }
}

/// `μ + 3σ` of each band statistic over `samples`, never below `floor`.
pub fn calibrate_thresholds(samples: &[PerBand<f64>], floor: f64) -> Thresholds {
    let mut out = Thresholds::splat(floor);
    if samples.is_empty() {
        return out;
    }
    let n = samples.len() as f64;
    for b in Band::ALL {
        let mean = samples.iter().map(|s| s.get(b)).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.get(b) - mean).powi(2)).sum::<f64>() / n;
        *out.get_mut(b) = (mean + 3.0 * var.sqrt()).max(floor);
    }
    out
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::splat(0.05)
    }
}
