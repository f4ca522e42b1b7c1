//! Monte Carlo localization: odometry prediction, likelihood-field weighting
//! and systematic resampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::edt::distance_transform;
use super::PerceptionError;
use crate::geometry::{normalize_angle, Pose2D};
use crate::world::{GridMap, LaserScan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    #[serde(flatten)]
    pub pose: Pose2D,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub stamp: f64,
}

impl ParticleSet {
    pub const DEFAULT_COUNT: usize = 500;

    pub fn from_poses(poses: impl IntoIterator<Item = Pose2D>, stamp: f64) -> Self {
        let mut particles: Vec<Particle> = poses.into_iter().map(|pose| Particle { pose, weight: 0.0 }).collect();
        let w = 1.0 / particles.len().max(1) as f64;
        particles.iter_mut().for_each(|p| p.weight = w);
        Self { particles, stamp }
    }

    /// Particles spread uniformly over the free cells, heading uniform.
    pub fn uniform_free(map: &GridMap, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let free = free_cells(map);
        let poses: Vec<Pose2D> = (0..n)
            .map(|_| {
                random_free_pose(map, &free, &mut rng)
            })
            .collect();
        Self::from_poses(poses, 0.0)
    }

    /// Gaussian cloud around a known pose.
    pub fn around(center: Pose2D, sigma_xy: f64, sigma_theta: f64, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nxy = Normal::new(0.0, sigma_xy).expect("finite sigma");
        let nth = Normal::new(0.0, sigma_theta).expect("finite sigma");
        let poses: Vec<Pose2D> = (0..n)
            .map(|_| {
                Pose2D::new(
                    center.x + nxy.sample(&mut rng),
                    center.y + nxy.sample(&mut rng),
                    center.theta + nth.sample(&mut rng),
                )
            })
            .collect();
        Self::from_poses(poses, 0.0)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn effective_sample_size(&self) -> f64 {
        let s2: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        if s2 > 0.0 {
            1.0 / s2
        } else {
            0.0
        }
    }
}

fn free_cells(map: &GridMap) -> Vec<(usize, usize)> {
    (0..map.height())
        .flat_map(|cy| (0..map.width()).map(move |cx| (cx, cy)))
        .filter(|(cx, cy)| !map.is_occupied(*cx, *cy))
        .collect()
}

fn random_free_pose(map: &GridMap, free: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Pose2D {
    let res = map.resolution();
    let (cx, cy) = free[rng.random_range(0..free.len())];
    let lx = (cx as f64 + rng.random::<f64>()) * res;
    let ly = (cy as f64 + rng.random::<f64>()) * res;
    let (x, y) = map.local_to_world(lx, ly);
    let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Pose2D::new(x, y, theta + map.origin().theta)
}

/// Precomputed distance from every cell to the nearest occupied cell, meters.
#[derive(Debug, Clone)]
pub struct LikelihoodField {
    map: GridMap,
    dist: Vec<f64>,
}

impl LikelihoodField {
    pub fn new(map: &GridMap) -> Self {
        let res = map.resolution();
        let dist = distance_transform(map.width(), map.height(), map.cells())
            .into_iter()
            .map(|d| d * res)
            .collect();
        Self { map: map.clone(), dist }
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    /// Distance to the nearest obstacle, `None` off the map.
    pub fn distance_at(&self, x: f64, y: f64) -> Option<f64> {
        self.map
            .cell_of(x, y)
            .map(|(cx, cy)| self.dist[self.map.index(cx, cy)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MclConfig {
    /// Translation noise per step: `trans_base + trans_per_meter * |d|`.
    pub trans_base: f64,
    pub trans_per_meter: f64,
    /// Rotation noise per step: `rot_base + rot_per_radian * |dtheta|`.
    pub rot_base: f64,
    pub rot_per_radian: f64,
    /// Use every k-th beam.
    pub beam_stride: usize,
    pub sigma_hit: f64,
    pub z_hit: f64,
    pub z_rand: f64,
    /// Distance assigned to endpoints that fall off the map.
    pub max_dist: f64,
    /// Divides the scan log-likelihood. Beams are not independent, so the
    /// raw product is far too peaked for a sparse particle set.
    pub temperature: f64,
}

impl Default for MclConfig {
    fn default() -> Self {
        Self {
            trans_base: 0.15,
            trans_per_meter: 0.1,
            rot_base: 0.1,
            rot_per_radian: 0.1,
            beam_stride: 8,
            sigma_hit: 0.5,
            z_hit: 0.9,
            z_rand: 0.1,
            max_dist: 2.0,
            temperature: 20.0,
        }
    }
}

impl MclConfig {
    pub fn noiseless() -> Self {
        Self {
            trans_base: 0.0,
            trans_per_meter: 0.0,
            rot_base: 0.0,
            rot_per_radian: 0.0,
            ..Self::default()
        }
    }
}

/// Log-likelihood of a scan taken from `pose`, over every `beam_stride`-th
/// beam starting at `phase`. Beams without a return do not contribute.
pub fn scan_log_likelihood(
    pose: &Pose2D,
    scan: &LaserScan,
    field: &LikelihoodField,
    cfg: &MclConfig,
    phase: usize,
) -> f64 {
    let stride = cfg.beam_stride.max(1);
    let inc = scan.angle_increment();
    let rand_term = cfg.z_rand / scan.range_max;
    let two_s2 = 2.0 * cfg.sigma_hit * cfg.sigma_hit;
    let mut ll = 0.0;
    for (i, r) in scan.ranges.iter().enumerate().skip(phase % stride).step_by(stride) {
        let Some(r) = r else { continue };
        let a = pose.theta + scan.angle_min + i as f64 * inc;
        let d = field
            .distance_at(pose.x + r * a.cos(), pose.y + r * a.sin())
            .unwrap_or(cfg.max_dist)
            .min(cfg.max_dist);
        ll += (cfg.z_hit * (-d * d / two_s2).exp() + rand_term).ln();
    }
    ll / cfg.temperature
}

fn systematic_resample(particles: &[Particle], rng: &mut ChaCha8Rng) -> Vec<Particle> {
    let n = particles.len();
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut cum = particles[0].weight;
    let mut i = 0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        while u > cum && i + 1 < n {
            i += 1;
            cum += particles[i].weight;
        }
        out.push(Particle {
            pose: particles[i].pose,
            weight: step,
        });
        u += step;
    }
    out
}

fn normalize(particles: &mut [Particle]) -> bool {
    let sum: f64 = particles.iter().map(|p| p.weight).sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return false;
    }
    particles.iter_mut().for_each(|p| p.weight /= sum);
    true
}

/// One predict / weight / resample cycle.
///
/// `odom_delta` is the motion increment in the robot frame. Resampling runs
/// only when the effective sample size drops below half the particle count.
/// A degenerate likelihood (every weight zero) yields
/// [`PerceptionError::AllZeroWeights`] carrying the predicted particles with
/// uniform weights.
pub fn mcl_step(
    belief: &ParticleSet,
    odom_delta: &Pose2D,
    scan: &LaserScan,
    field: &LikelihoodField,
    cfg: &MclConfig,
    rng_seed: u64,
) -> Result<ParticleSet, PerceptionError> {
    if belief.is_empty() {
        return Err(PerceptionError::EmptyBelief);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let trans = odom_delta.x.hypot(odom_delta.y);
    let sig_t = cfg.trans_base + cfg.trans_per_meter * trans;
    let sig_r = cfg.rot_base + cfg.rot_per_radian * odom_delta.theta.abs();
    let nt = Normal::new(0.0, sig_t).map_err(|_| PerceptionError::BadNoise)?;
    let nr = Normal::new(0.0, sig_r).map_err(|_| PerceptionError::BadNoise)?;

    let mut particles: Vec<Particle> = belief
        .particles
        .iter()
        .map(|p| {
            let noisy = Pose2D {
                x: odom_delta.x + nt.sample(&mut rng),
                y: odom_delta.y + nt.sample(&mut rng),
                theta: odom_delta.theta + nr.sample(&mut rng),
            };
            Particle {
                pose: p.pose.compose(&noisy),
                weight: p.weight,
            }
        })
        .collect();

    // a fresh decimation phase each update so successive scans cover different beams
    let phase = rng.random_range(0..cfg.beam_stride.max(1));
    let lls: Vec<f64> = particles
        .iter()
        .map(|p| scan_log_likelihood(&p.pose, scan, field, cfg, phase))
        .collect();
    let max_ll = lls.iter().cloned().filter(|l| l.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let predicted = particles.clone();
    for (p, ll) in particles.iter_mut().zip(&lls) {
        let factor = if max_ll.is_finite() { (ll - max_ll).exp() } else { 0.0 };
        p.weight *= factor;
    }
    if !normalize(&mut particles) {
        let recovered = ParticleSet::from_poses(predicted.into_iter().map(|p| p.pose), scan.stamp);
        return Err(PerceptionError::AllZeroWeights { recovered });
    }

    let mut out = ParticleSet {
        particles,
        stamp: scan.stamp,
    };
    if out.effective_sample_size() < out.len() as f64 / 2.0 {
        out.particles = systematic_resample(&out.particles, &mut rng);
        normalize(&mut out.particles);
    }
    Ok(out)
}

/// Weighted mean pose (circular mean for heading) and the 3x3 covariance of
/// `(x, y, theta)`.
pub fn estimate_pose(belief: &ParticleSet) -> Result<(Pose2D, [[f64; 3]; 3]), PerceptionError> {
    if belief.is_empty() {
        return Err(PerceptionError::EmptyBelief);
    }
    let total = belief.weight_sum();
    if !(total > 0.0) {
        return Err(PerceptionError::AllZeroWeights {
            recovered: ParticleSet::from_poses(belief.particles.iter().map(|p| p.pose), belief.stamp),
        });
    }
    let (mut mx, mut my, mut ms, mut mc) = (0.0, 0.0, 0.0, 0.0);
    for p in &belief.particles {
        let w = p.weight / total;
        mx += w * p.pose.x;
        my += w * p.pose.y;
        ms += w * p.pose.theta.sin();
        mc += w * p.pose.theta.cos();
    }
    let mean = Pose2D::new(mx, my, ms.atan2(mc));
    let mut cov = [[0.0; 3]; 3];
    for p in &belief.particles {
        let w = p.weight / total;
        let d = [
            p.pose.x - mean.x,
            p.pose.y - mean.y,
            normalize_angle(p.pose.theta - mean.theta),
        ];
        for (i, row) in cov.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c += w * d[i] * d[j];
            }
        }
    }
    Ok((mean, cov))
}
