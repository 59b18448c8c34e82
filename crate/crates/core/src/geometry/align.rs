use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use super::{Point3, RigidTransform};
use crate::error::{Error, Result};

/// Relative singular-value floor below which the source scatter is rank-deficient.
const RANK_EPS: f64 = 1e-10;

/// Least-squares rigid transform mapping `src[i]` onto `dst[i]` (Kabsch).
///
/// The rotation is always proper; reflections are corrected by flipping the
/// axis of the smallest singular value. Source sets that are collinear or
/// coincident are rejected.
pub fn best_rigid_alignment(src: &[Point3], dst: &[Point3]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch {
            expected: src.len(),
            got: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: src.len(),
        });
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;

    let mut scatter = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let a = s.coords - cs;
        let b = d.coords - cd;
        scatter += a * a.transpose();
        cross += a * b.transpose();
    }

    let mut sv = scatter.symmetric_eigenvalues();
    sv.as_mut_slice()
        .sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    if !(sv[0] > 0.0) || sv[1] <= RANK_EPS * sv[0] {
        return Err(Error::DegenerateConfiguration);
    }

    let svd = cross.svd(true, true);
    let u = svd.u.ok_or(Error::DegenerateConfiguration)?;
    let v_t = svd.v_t.ok_or(Error::DegenerateConfiguration)?;
    let v = v_t.transpose();
    let mut rot = v * u.transpose();
    if rot.determinant() < 0.0 {
        // flip the axis paired with the smallest singular value
        let (min_idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let mut d = Matrix3::identity();
        d[(min_idx, min_idx)] = -1.0;
        rot = v * d * u.transpose();
    }
    let rotation =
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot));
    let translation = cd - rotation * cs;
    Ok(RigidTransform::new(rotation, translation))
}
