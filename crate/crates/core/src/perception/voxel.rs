//! Voxel-grid downsampling.

use std::collections::BTreeMap;

use super::PerceptionError;
use crate::world::PointCloud;

pub fn voxel_key(p: &[f64; 3], leaf: f64) -> (i64, i64, i64) {
    (
        (p[0] / leaf).floor() as i64,
        (p[1] / leaf).floor() as i64,
        (p[2] / leaf).floor() as i64,
    )
}

/// Replaces the points of every occupied cube (side `leaf`, anchored at the
/// origin) with their centroid. Output is ordered by ascending cube index.
pub fn voxel_downsample(cloud: &PointCloud, leaf: f64) -> Result<PointCloud, PerceptionError> {
    if !(leaf > 0.0 && leaf.is_finite()) {
        return Err(PerceptionError::NonPositiveLeaf(leaf));
    }
    struct Acc {
        sum: [f64; 3],
        lo: [f64; 3],
        hi: [f64; 3],
        n: usize,
    }
    let mut cubes: BTreeMap<(i64, i64, i64), Acc> = BTreeMap::new();
    for p in &cloud.points {
        let acc = cubes.entry(voxel_key(p, leaf)).or_insert(Acc {
            sum: [0.0; 3],
            lo: *p,
            hi: *p,
            n: 0,
        });
        for k in 0..3 {
            acc.sum[k] += p[k];
            acc.lo[k] = acc.lo[k].min(p[k]);
            acc.hi[k] = acc.hi[k].max(p[k]);
        }
        acc.n += 1;
    }
    let points = cubes
        .into_values()
        .map(|a| {
            let n = a.n as f64;
            // rounding must not push the centroid out of the hull of its points
            std::array::from_fn(|k| (a.sum[k] / n).clamp(a.lo[k], a.hi[k]))
        })
        .collect();
    Ok(PointCloud {
        stamp: cloud.stamp,
        points,
    })
}
