//! Object models: subsampled oriented cloud, point-pair feature table, diameter.

mod ppf;

pub use ppf::{compute_ppf, PointPairFeature, PpfSteps, PpfTable, QuantizedPPFKey};

use alloc::string::String;
use alloc::vec::Vec;
use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, Point3, PointCloud, UnitVector3};

/// Neighbor count for model normals when the input carries none.
const MODEL_NORMAL_K: usize = 10;

/// How a stored feature count maps to an edge potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeWeighting {
    /// 1 if the quantized feature occurs on the model, else the floor.
    #[default]
    Binary,
    /// `count / max_count`, clamped below by the floor.
    CountWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeParams {
    pub epsilon: f64,
    pub weighting: EdgeWeighting,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            weighting: EdgeWeighting::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    pub id: String,
    pub cloud: PointCloud,
    pub ppf: PpfTable,
    /// Maximum pairwise distance of `cloud`, meters.
    pub diameter: f64,
}

impl ObjectModel {
    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn edge_potential(
        &self,
        p1: &Point3,
        n1: &UnitVector3,
        p2: &Point3,
        n2: &UnitVector3,
    ) -> f64 {
        edge_potential_with(self, &EdgeParams::default(), p1, n1, p2, n2)
    }
}

/// Greedy Poisson-disk thinning with spacing `voxel`, in input order.
///
/// Kept points are at least `voxel` apart (up to a relative 1e-9 slack) and
/// every dropped point lies closer than `voxel` to a kept one.
pub fn subsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(Error::InvalidParameter("voxel size must be positive"));
    }
    let radius = voxel * (1.0 - 1e-9);
    let r2 = radius * radius;
    let cell = |p: &Point3| -> (i64, i64, i64) {
        (
            libm::floor(p.x / radius) as i64,
            libm::floor(p.y / radius) as i64,
            libm::floor(p.z / radius) as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    'points: for (i, p) in cloud.points.iter().enumerate() {
        let (cx, cy, cz) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(members) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        if members
                            .iter()
                            .any(|&j| (cloud.points[j] - p).norm_squared() < r2)
                        {
                            continue 'points;
                        }
                    }
                }
            }
        }
        grid.entry((cx, cy, cz)).or_default().push(i);
        kept.push(i);
    }
    Ok(cloud.select(&kept))
}

/// Subsamples, fills in outward normals if missing, and tabulates the
/// quantized feature of every ordered pair of distinct points.
pub fn build_model(
    cloud: &PointCloud,
    voxel: f64,
    steps: PpfSteps,
    id: impl Into<String>,
) -> Result<ObjectModel> {
    steps.validate()?;
    let mut sub = subsample(cloud, voxel)?;
    if !sub.has_normals() {
        sub = outward_normals(&sub)?;
    }
    Ok(model_from_oriented_cloud(sub, steps, id.into()))
}

/// Builds the table over an already subsampled, oriented cloud.
pub fn model_from_oriented_cloud(cloud: PointCloud, steps: PpfSteps, id: String) -> ObjectModel {
    let diameter = cloud.diameter();
    let mut ppf = PpfTable::new(steps);
    let pts = &cloud.points;
    let nrm = &cloud.normals;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i == j {
                continue;
            }
            if let Ok(f) = compute_ppf(&pts[i], &nrm[i], &pts[j], &nrm[j]) {
                ppf.insert(&f);
            }
        }
    }
    ObjectModel {
        id,
        cloud,
        ppf,
        diameter,
    }
}

fn outward_normals(cloud: &PointCloud) -> Result<PointCloud> {
    let center = cloud.centroid().ok_or(Error::EmptyCloud)?;
    let k = MODEL_NORMAL_K.min(cloud.len().saturating_sub(1));
    let mut oriented = estimate_normals(cloud, k, &center)?;
    for n in oriented.normals.iter_mut() {
        *n = -*n;
    }
    Ok(oriented)
}

/// Plausibility that an oriented scene pair lies on the model.
pub fn edge_potential(
    model: &ObjectModel,
    p1: &Point3,
    n1: &UnitVector3,
    p2: &Point3,
    n2: &UnitVector3,
) -> f64 {
    model.edge_potential(p1, n1, p2, n2)
}

pub fn edge_potential_with(
    model: &ObjectModel,
    params: &EdgeParams,
    p1: &Point3,
    n1: &UnitVector3,
    p2: &Point3,
    n2: &UnitVector3,
) -> f64 {
    let Ok(f) = compute_ppf(p1, n1, p2, n2) else {
        return params.epsilon;
    };
    let count = model.ppf.count(&model.ppf.steps.key(&f));
    match params.weighting {
        _ if count == 0 => params.epsilon,
        EdgeWeighting::Binary => 1.0,
        EdgeWeighting::CountWeighted => {
            (count as f64 / model.ppf.max_count() as f64).max(params.epsilon)
        }
    }
}
