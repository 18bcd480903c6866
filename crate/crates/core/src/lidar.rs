//! Simulated planar range sensor and the Gaussian noise model applied to
//! pose and range readings.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::grid::traverse_ray;
use crate::worldmodel::{wrap_angle, Pose, WorldMap};

#[derive(Debug, Error, PartialEq)]
pub enum LidarError {
    #[error("pose ({x:.3}, {y:.3}) lies outside the map")]
    PoseOutsideMap { x: f64, y: f64 },
    #[error("invalid lidar configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LidarConfig {
    pub n_rays: usize,
    /// Field of view in radians, in (0, 2pi].
    pub fov: f64,
    /// Meters.
    pub max_range: f64,
}

impl LidarConfig {
    pub fn new(n_rays: usize, fov: f64, max_range: f64) -> Result<Self, LidarError> {
        if n_rays == 0 {
            return Err(LidarError::InvalidConfig("n_rays must be at least 1".into()));
        }
        if !(fov > 0.0 && fov <= 2.0 * PI + 1e-9) {
            return Err(LidarError::InvalidConfig(format!("fov {fov} outside (0, 2pi]")));
        }
        if !(max_range > 0.0) {
            return Err(LidarError::InvalidConfig(format!("max_range {max_range} must be positive")));
        }
        Ok(Self { n_rays, fov, max_range })
    }

    pub fn exploration_omni() -> Self {
        Self { n_rays: 20, fov: 2.0 * PI, max_range: 7.0 }
    }

    pub fn exploration_non_omni() -> Self {
        Self { n_rays: 24, fov: PI, max_range: 3.5 }
    }

    pub fn mowing() -> Self {
        Self { n_rays: 24, fov: PI, max_range: 3.5 }
    }

    pub fn mowing_real() -> Self {
        Self { n_rays: 24, fov: 2.0 * PI, max_range: 3.5 }
    }

    pub fn is_omnidirectional(&self) -> bool {
        self.fov >= 2.0 * PI - 1e-9
    }

    /// Ray angles relative to the heading. A full circle has no duplicate
    /// end ray; a partial fan includes both edges.
    pub fn angle_offsets(&self) -> Vec<f64> {
        let n = self.n_rays;
        if self.is_omnidirectional() {
            (0..n).map(|i| i as f64 * 2.0 * PI / n as f64).collect()
        } else if n == 1 {
            vec![0.0]
        } else {
            (0..n)
                .map(|i| -self.fov / 2.0 + i as f64 * self.fov / (n - 1) as f64)
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LidarScan {
    /// Meters, within [0, max_range].
    pub ranges: Vec<f64>,
    /// Whether the ray hit an obstacle inside the range.
    pub hits: Vec<bool>,
    pub max_range: f64,
}

impl LidarScan {
    /// Ranges divided by the maximum range.
    pub fn normalized(&self) -> impl Iterator<Item = f64> + '_ {
        self.ranges.iter().map(move |r| (r / self.max_range).clamp(0.0, 1.0))
    }
}

/// Casts one ray and returns (range meters, hit).
pub fn cast_ray(map: &WorldMap, x: f64, y: f64, angle: f64, max_range: f64) -> (f64, bool) {
    let res = map.resolution();
    let start = map.to_grid(x, y);
    let max_t = max_range / res;
    let hit = traverse_ray(start, (angle.cos(), angle.sin()), max_t, |cx, cy, t| {
        let blocked = match map.cells().try_get(cx, cy) {
            Some(&o) => o,
            None => true,
        };
        if blocked {
            ControlFlow::Break(t)
        } else {
            ControlFlow::Continue(())
        }
    });
    match hit {
        Some(t) if t * res <= max_range => ((t * res).max(0.0), true),
        _ => (max_range, false),
    }
}

/// Casts all rays of `cfg` from `pose`. Each range is the distance to the
/// entry point of the first obstacle cell along the ray.
pub fn cast_rays(map: &WorldMap, pose: &Pose, cfg: &LidarConfig) -> Result<LidarScan, LidarError> {
    if !map.contains(pose.x, pose.y) {
        return Err(LidarError::PoseOutsideMap { x: pose.x, y: pose.y });
    }
    let mut ranges = Vec::with_capacity(cfg.n_rays);
    let mut hits = Vec::with_capacity(cfg.n_rays);
    for offset in cfg.angle_offsets() {
        let (r, h) = cast_ray(map, pose.x, pose.y, pose.heading + offset, cfg.max_range);
        ranges.push(r);
        hits.push(h);
    }
    Ok(LidarScan {
        ranges,
        hits,
        max_range: cfg.max_range,
    })
}

/// Standard deviations of the Gaussian perturbations.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseConfig {
    pub sigma_position: f64,
    pub sigma_heading: f64,
    pub sigma_lidar: f64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn low() -> Self {
        Self { sigma_position: 0.01, sigma_heading: 0.05, sigma_lidar: 0.05 }
    }

    pub fn medium() -> Self {
        Self { sigma_position: 0.02, sigma_heading: 0.1, sigma_lidar: 0.1 }
    }

    pub fn high() -> Self {
        Self { sigma_position: 0.05, sigma_heading: 0.2, sigma_lidar: 0.2 }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_position == 0.0 && self.sigma_heading == 0.0 && self.sigma_lidar == 0.0
    }

    fn validate(&self) {
        assert!(
            self.sigma_position >= 0.0 && self.sigma_heading >= 0.0 && self.sigma_lidar >= 0.0,
            "noise standard deviations must be non-negative"
        );
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    }
}

/// Adds independent zero-mean Gaussian noise to the pose components and to
/// every returned range. Missed rays stay at max range. Ranges are clipped to
/// [0, max_range].
pub fn perturb<R: Rng + ?Sized>(pose: &Pose, scan: &LidarScan, noise: &NoiseConfig, rng: &mut R) -> (Pose, LidarScan) {
    noise.validate();
    let noisy_pose = Pose {
        x: pose.x + gaussian(rng, noise.sigma_position),
        y: pose.y + gaussian(rng, noise.sigma_position),
        heading: wrap_angle(pose.heading + gaussian(rng, noise.sigma_heading)),
    };
    let mut out = scan.clone();
    for (r, &hit) in out.ranges.iter_mut().zip(&scan.hits) {
        if hit {
            *r = (*r + gaussian(rng, noise.sigma_lidar)).clamp(0.0, scan.max_range);
        }
    }
    (noisy_pose, out)
}
