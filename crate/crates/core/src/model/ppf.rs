use alloc::vec::Vec;
use core::f64::consts::PI;
use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point3, UnitVector3, Vector3};

/// Oriented point-pair feature `(‖d‖, ∠(n1,d), ∠(n2,d), ∠(n1,n2))` with `d = p2 − p1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPairFeature {
    pub distance: f64,
    pub angle_n1_d: f64,
    pub angle_n2_d: f64,
    pub angle_n1_n2: f64,
}

impl PointPairFeature {
    /// The feature of the reversed pair `(p2, p1)`.
    ///
    /// Reversing flips the baseline, so the two normal-to-baseline angles
    /// swap places and are reflected about π/2.
    pub fn reversed(&self) -> Self {
        Self {
            distance: self.distance,
            angle_n1_d: PI - self.angle_n2_d,
            angle_n2_d: PI - self.angle_n1_d,
            angle_n1_n2: self.angle_n1_n2,
        }
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.angle_n1_d, self.angle_n2_d, self.angle_n1_n2]
    }
}

/// Unsigned angle between two vectors in `[0, π]`.
#[inline]
pub(crate) fn angle_between(a: &Vector3, b: &Vector3) -> f64 {
    libm::atan2(a.cross(b).norm(), a.dot(b))
}

pub fn compute_ppf(
    p1: &Point3,
    n1: &UnitVector3,
    p2: &Point3,
    n2: &UnitVector3,
) -> Result<PointPairFeature> {
    let d = p2 - p1;
    let distance = d.norm();
    if !(distance > 0.0) {
        return Err(Error::CoincidentPoints);
    }
    Ok(PointPairFeature {
        distance,
        angle_n1_d: angle_between(n1, &d),
        angle_n2_d: angle_between(n2, &d),
        angle_n1_n2: angle_between(n1, n2),
    })
}

/// Four bins: distance, ∠(n1,d), ∠(n2,d), ∠(n1,n2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuantizedPPFKey(pub [u32; 4]);

/// Quantization steps for point-pair features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpfSteps {
    /// Meters per distance bin.
    pub distance: f64,
    /// Radians per angle bin.
    pub angle: f64,
}

impl PpfSteps {
    pub const DEFAULT_DISTANCE_FRACTION: f64 = 0.02;
    pub const DEFAULT_ANGLE_DEG: f64 = 12.0;

    /// 2% of the model diameter and 12°.
    pub fn for_diameter(diameter: f64) -> Self {
        Self {
            distance: Self::DEFAULT_DISTANCE_FRACTION * diameter,
            angle: Self::DEFAULT_ANGLE_DEG.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::InvalidParameter("distance step must be positive"));
        }
        if !(self.angle > 0.0 && self.angle <= PI) {
            return Err(Error::InvalidParameter("angle step must be in (0, π]"));
        }
        Ok(())
    }

    /// Number of angle bins covering `[0, π]`.
    pub fn angle_bins(&self) -> u32 {
        let n = libm::ceil(PI / self.angle - 1e-9);
        (n as u32).max(1)
    }

    #[inline]
    pub fn distance_bin(&self, d: f64) -> u32 {
        libm::floor(d / self.distance).max(0.0) as u32
    }

    #[inline]
    pub fn angle_bin(&self, a: f64) -> u32 {
        let b = libm::floor(a / self.angle).max(0.0) as u32;
        b.min(self.angle_bins() - 1)
    }

    pub fn key(&self, f: &PointPairFeature) -> QuantizedPPFKey {
        QuantizedPPFKey([
            self.distance_bin(f.distance),
            self.angle_bin(f.angle_n1_d),
            self.angle_bin(f.angle_n2_d),
            self.angle_bin(f.angle_n1_n2),
        ])
    }
}

/// Counts of model point pairs per quantized feature.
#[derive(Debug, Clone, PartialEq)]
pub struct PpfTable {
    pub steps: PpfSteps,
    counts: HashMap<QuantizedPPFKey, u64>,
    total: u64,
    max_count: u64,
}

impl PpfTable {
    pub fn new(steps: PpfSteps) -> Self {
        Self {
            steps,
            counts: HashMap::new(),
            total: 0,
            max_count: 0,
        }
    }

    /// Rebuilds a table from stored records. Zero counts are rejected.
    pub fn from_records(
        steps: PpfSteps,
        records: impl IntoIterator<Item = (QuantizedPPFKey, u64)>,
    ) -> Result<Self> {
        let mut table = Self::new(steps);
        for (key, count) in records {
            if count == 0 {
                return Err(Error::InvalidParameter("stored feature count must be >= 1"));
            }
            *table.counts.entry(key).or_insert(0) += count;
        }
        table.total = table.counts.values().sum();
        table.max_count = table.counts.values().copied().max().unwrap_or(0);
        Ok(table)
    }

    pub fn insert(&mut self, f: &PointPairFeature) {
        let key = self.steps.key(f);
        let c = self.counts.entry(key).or_insert(0);
        *c += 1;
        self.max_count = self.max_count.max(*c);
        self.total += 1;
    }

    #[inline]
    pub fn count(&self, key: &QuantizedPPFKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    #[inline]
    pub fn contains(&self, key: &QuantizedPPFKey) -> bool {
        self.counts.contains_key(key)
    }

    /// Sum of all counts, i.e. the number of stored ordered pairs.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max_count(&self) -> u64 {
        self.max_count
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Records sorted by key.
    pub fn sorted_records(&self) -> Vec<(QuantizedPPFKey, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }
}
