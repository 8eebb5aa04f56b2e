//! Ideal straight-track toy detector.
//!
//! Layers are planes parallel to xy at `z = spacing * (l + 1)`. Every particle
//! starts at the origin and aims at a point drawn uniformly on the active
//! rectangle of the last layer, so it crosses every layer inside acceptance.
//!
//! Random numbers come from `ChaCha8Rng::seed_from_u64(rng_seed)` and are
//! consumed in a fixed order: two uniforms per particle (target x, target y),
//! then per layer one uniform for the efficiency draw followed by two standard
//! normals when smearing is enabled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, Hit, TruthParticle, MODULE_Z_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorGeometry {
    pub layer_z: Vec<f64>,
    pub half_aperture_x: f64,
    pub half_aperture_y: f64,
}

impl DetectorGeometry {
    pub fn new(layer_z: Vec<f64>, half_aperture_x: f64, half_aperture_y: f64) -> Result<Self> {
        if layer_z.is_empty() {
            return Err(Error::Config("geometry needs at least one layer".into()));
        }
        if layer_z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "layer z positions must be strictly increasing".into(),
            ));
        }
        if !(half_aperture_x > 0.0 && half_aperture_y > 0.0) {
            return Err(Error::Config("apertures must be positive".into()));
        }
        Ok(DetectorGeometry {
            layer_z,
            half_aperture_x,
            half_aperture_y,
        })
    }

    /// Evenly spaced layers, the first one at `z = spacing`.
    pub fn regular(n_layers: usize, spacing: f64, half_x: f64, half_y: f64) -> Result<Self> {
        let z = (1..=n_layers).map(|l| spacing * l as f64).collect();
        Self::new(z, half_x, half_y)
    }

    pub fn n_layers(&self) -> usize {
        self.layer_z.len()
    }

    pub fn id(&self) -> String {
        let spacing = if self.layer_z.len() > 1 {
            self.layer_z[1] - self.layer_z[0]
        } else {
            self.layer_z[0]
        };
        format!(
            "toy:{}x{}mm:{}x{}mm",
            self.layer_z.len(),
            spacing,
            self.half_aperture_x,
            self.half_aperture_y
        )
    }

    /// Verifies that every hit sits on the layer named by its module index.
    pub fn check_event(&self, event: &Event) -> Result<()> {
        for hit in &event.hits {
            let expected = *self.layer_z.get(hit.module).ok_or_else(|| {
                Error::InvalidEvent(format!("hit {} on unknown module {}", hit.id, hit.module))
            })?;
            if (hit.z - expected).abs() > MODULE_Z_TOLERANCE {
                return Err(Error::ModuleMismatch {
                    hit: hit.id,
                    module: hit.module,
                    z: hit.z,
                    expected,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub n_layers: usize,
    pub n_particles: usize,
    pub layer_spacing: f64,
    pub half_aperture_x: f64,
    pub half_aperture_y: f64,
    pub smear_sigma: f64,
    pub hit_efficiency: f64,
    pub rng_seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n_layers: 3,
            n_particles: 5,
            layer_spacing: 30.0,
            half_aperture_x: 50.0,
            half_aperture_y: 50.0,
            smear_sigma: 0.0,
            hit_efficiency: 1.0,
            rng_seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn new(n_layers: usize, n_particles: usize, rng_seed: u64) -> Self {
        ToyConfig {
            n_layers,
            n_particles,
            rng_seed,
            ..Default::default()
        }
    }

    pub fn geometry(&self) -> Result<DetectorGeometry> {
        self.validate()?;
        DetectorGeometry::regular(
            self.n_layers,
            self.layer_spacing,
            self.half_aperture_x,
            self.half_aperture_y,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be at least 1".into()));
        }
        if !(self.layer_spacing > 0.0) {
            return Err(Error::Config("layer_spacing must be positive".into()));
        }
        if !(self.half_aperture_x > 0.0 && self.half_aperture_y > 0.0) {
            return Err(Error::Config("apertures must be positive".into()));
        }
        if !(self.smear_sigma >= 0.0) {
            return Err(Error::Config("smear_sigma must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.hit_efficiency) {
            return Err(Error::Config("hit_efficiency must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub fn generate_event(config: &ToyConfig) -> Result<Event> {
    let geometry = config.geometry()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let z_last = *geometry.layer_z.last().expect("at least one layer");

    let mut hits = Vec::with_capacity(config.n_layers * config.n_particles);
    let mut particles = Vec::with_capacity(config.n_particles);
    for p in 0..config.n_particles {
        let tx = geometry.half_aperture_x * (2.0 * rng.random::<f64>() - 1.0);
        let ty = geometry.half_aperture_y * (2.0 * rng.random::<f64>() - 1.0);
        let norm = (tx * tx + ty * ty + z_last * z_last).sqrt();
        let direction = [tx / norm, ty / norm, z_last / norm];

        let mut hit_ids = Vec::with_capacity(config.n_layers);
        for (module, &z) in geometry.layer_z.iter().enumerate() {
            let keep = rng.random::<f64>() < config.hit_efficiency;
            // intersection with the plane, scaled from the target point
            let mut x = tx * (z / z_last);
            let mut y = ty * (z / z_last);
            if config.smear_sigma > 0.0 {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                x += config.smear_sigma * dx;
                y += config.smear_sigma * dy;
            }
            if keep {
                let id = hits.len();
                hits.push(Hit {
                    id,
                    x,
                    y,
                    z,
                    module,
                    truth_id: Some(p as i64),
                });
                hit_ids.push(id);
            }
        }
        particles.push(TruthParticle {
            id: p as i64,
            origin: [0.0; 3],
            direction,
            hit_ids,
        });
    }

    Ok(Event {
        hits,
        particles,
        geometry_id: geometry.id(),
        original_ids: None,
    })
}

/// Event `k` of the batch uses seed `rng_seed + k`.
pub fn generate_batch(config: &ToyConfig, n_events: usize) -> Result<Vec<Event>> {
    config.validate()?;
    (0..n_events)
        .into_par_iter()
        .map(|k| {
            let cfg = ToyConfig {
                rng_seed: config.rng_seed.wrapping_add(k as u64),
                ..config.clone()
            };
            generate_event(&cfg)
        })
        .collect()
}
