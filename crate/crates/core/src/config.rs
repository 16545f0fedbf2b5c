//! Run configuration: a flat TOML document whose keys are the field names
//! of [`RunConfig`]. Missing keys take the defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::refine::RefineParams;
use crate::scene::Radio;
use crate::tracer::{TraceParams, DEFAULT_CONE_APEX_DEG};
use crate::voxelgrid::{VoxelizationParams, DEFAULT_CELL_BUDGET};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene_path: Option<PathBuf>,
    pub edges_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub carrier_frequency_hz: f64,
    pub voxel_size_m: f64,
    pub division_factor: u32,
    pub kappa: u32,
    pub max_interactions: u32,
    pub max_diffractions: u32,
    pub cone_apex_angle_deg: f64,
    pub diffraction_ray_count: u32,
    pub delta: f64,
    pub rho: u32,
    pub step_size: f64,
    pub fresnel_enabled: bool,
    pub seed: u64,
    /// Worker threads; 0 picks the machine default.
    pub thread_count: usize,
    /// Transmitter positions; ids follow list order.
    pub transmitters: Vec<[f64; 3]>,
    /// Receiver positions; ids follow list order.
    pub receivers: Vec<[f64; 3]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let refine = RefineParams::default();
        Self {
            scene_path: None,
            edges_path: None,
            output_path: None,
            carrier_frequency_hz: 60e9,
            voxel_size_m: 0.5,
            division_factor: 2,
            kappa: 100,
            max_interactions: 5,
            max_diffractions: 1,
            cone_apex_angle_deg: DEFAULT_CONE_APEX_DEG,
            diffraction_ray_count: 360,
            delta: refine.delta,
            rho: refine.rho,
            step_size: refine.step_size,
            fresnel_enabled: refine.fresnel_enabled,
            seed: 0,
            thread_count: 0,
            transmitters: vec![],
            receivers: vec![],
        }
    }
}

/// Fields that change the computed paths; their hash goes into the output.
#[derive(Serialize)]
struct PhysicsFields<'a> {
    carrier_frequency_hz: f64,
    voxel_size_m: f64,
    division_factor: u32,
    kappa: u32,
    max_interactions: u32,
    max_diffractions: u32,
    cone_apex_angle_deg: f64,
    diffraction_ray_count: u32,
    delta: f64,
    rho: u32,
    step_size: f64,
    fresnel_enabled: bool,
    transmitters: &'a [[f64; 3]],
    receivers: &'a [[f64; 3]],
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        config.resolve_relative_to(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    /// Make file paths relative to `dir` absolute.
    pub fn resolve_relative_to(&mut self, dir: &Path) {
        for p in [&mut self.scene_path, &mut self.edges_path, &mut self.output_path].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Override one field from its textual value, as given on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
        *self = table.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.voxelization().validate()?;
        self.trace_params().validate()?;
        self.refine_params().validate()?;
        if !(self.carrier_frequency_hz > 0.0 && self.carrier_frequency_hz.is_finite()) {
            return Err(Error::InvalidParameter { name: "carrier_frequency_hz", reason: "must be positive".into() });
        }
        Ok(())
    }

    pub fn voxelization(&self) -> VoxelizationParams {
        VoxelizationParams {
            voxel_size: self.voxel_size_m,
            division_factor: self.division_factor,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }

    pub fn trace_params(&self) -> TraceParams {
        TraceParams {
            max_interactions: self.max_interactions,
            kappa: self.kappa,
            cone_apex_angle: self.cone_apex_angle_deg.to_radians(),
            diffraction_ray_count: self.diffraction_ray_count,
            max_diffractions: self.max_diffractions,
        }
    }

    pub fn refine_params(&self) -> RefineParams {
        RefineParams {
            delta: self.delta,
            rho: self.rho,
            step_size: self.step_size,
            fresnel_enabled: self.fresnel_enabled,
        }
    }

    pub fn radios(&self) -> (Vec<Radio>, Vec<Radio>) {
        let make = |list: &[[f64; 3]], f: fn(u32, glam::DVec3) -> Radio| {
            list.iter().enumerate().map(|(i, p)| f(i as u32, glam::DVec3::from_array(*p))).collect()
        };
        (make(&self.transmitters, Radio::tx), make(&self.receivers, Radio::rx))
    }

    /// Hex SHA-256 of the fields that affect results. Paths, seed and thread
    /// count are excluded.
    pub fn physics_hash(&self) -> String {
        let fields = PhysicsFields {
            carrier_frequency_hz: self.carrier_frequency_hz,
            voxel_size_m: self.voxel_size_m,
            division_factor: self.division_factor,
            kappa: self.kappa,
            max_interactions: self.max_interactions,
            max_diffractions: self.max_diffractions,
            cone_apex_angle_deg: self.cone_apex_angle_deg,
            diffraction_ray_count: self.diffraction_ray_count,
            delta: self.delta,
            rho: self.rho,
            step_size: self.step_size,
            fresnel_enabled: self.fresnel_enabled,
            transmitters: &self.transmitters,
            receivers: &self.receivers,
        };
        let json = serde_json::to_string(&fields).expect("fields serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
