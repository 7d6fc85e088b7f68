//! Scenario configuration: the room, access points, receivers, wavelengths,
//! QoS thresholds and learning hyperparameters of one experiment.
//!
//! Files are TOML with units spelled out in key names (`fov_deg`,
//! `bandwidth_hz`, ...). Angles are degrees on disk and radians in the
//! domain types. The struct keeps file units so that writing a loaded config
//! back out reproduces it exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelModel, Color, EmitterSpec, PowerMatrix, ReceiverSpec, WavelengthSpec};
use crate::geometry::{Room, Vec3};
use crate::link::{from_db, LinkBudget, NoiseModel, RewardScale};
use crate::mdp::{Environment, QoSConfig};
use crate::qlearn::Hyperparams;
use crate::{Error, Result};

pub const BUILTIN_NAMES: [&str; 2] = ["scenario1", "scenario2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub width_m: f64,
    pub length_m: f64,
    pub height_m: f64,
    pub wall_reflectance: f64,
    pub ceiling_reflectance: f64,
    pub floor_reflectance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessPointConfig {
    pub position_m: [f64; 3],
    #[serde(default = "down")]
    pub normal: [f64; 3],
    pub lambertian_order: f64,
    pub num_lds: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    pub position_m: [f64; 3],
    #[serde(default = "up")]
    pub normal: [f64; 3],
    pub area_m2: f64,
    pub fov_deg: f64,
    pub bandwidth_hz: f64,
    pub noise_spectral_density_a_per_sqrt_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavelengthConfig {
    pub color: Color,
    pub per_ld_power_w: f64,
    pub responsivity_a_per_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosConfigFile {
    /// Minimum SINR per user, dB.
    pub thresholds_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub element_edge_first_order_m: f64,
    pub element_edge_second_order_m: f64,
    pub room: RoomConfig,
    pub access_points: Vec<AccessPointConfig>,
    pub receivers: Vec<ReceiverConfig>,
    pub wavelengths: Vec<WavelengthConfig>,
    pub qos: QosConfigFile,
    pub reward_scale: RewardScale,
    pub hyperparams: Hyperparams,
}

fn down() -> [f64; 3] {
    [0.0, 0.0, -1.0]
}

fn up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

const AP_POSITIONS: [[f64; 3]; 4] = [
    [1.0, 1.0, 3.0],
    [1.0, 3.0, 3.0],
    [3.0, 1.0, 3.0],
    [3.0, 3.0, 3.0],
];
const SCENARIO1_USERS: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, 3.0, 1.0],
    [3.0, 1.0, 1.0],
    [3.0, 3.0, 1.0],
];
const SCENARIO2_USERS: [[f64; 3]; 4] = [
    [3.5, 3.5, 1.0],
    [3.5, 2.5, 1.0],
    [2.5, 3.5, 1.0],
    [2.5, 2.5, 1.0],
];

fn reference_setup(name: &str, users: &[[f64; 3]]) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        element_edge_first_order_m: 0.05,
        element_edge_second_order_m: 0.20,
        room: RoomConfig {
            width_m: 4.0,
            length_m: 4.0,
            height_m: 3.0,
            wall_reflectance: 0.8,
            ceiling_reflectance: 0.8,
            floor_reflectance: 0.3,
        },
        access_points: AP_POSITIONS
            .iter()
            .map(|p| AccessPointConfig {
                position_m: *p,
                normal: down(),
                lambertian_order: 1.0,
                num_lds: 12,
            })
            .collect(),
        receivers: users
            .iter()
            .map(|p| ReceiverConfig {
                position_m: *p,
                normal: up(),
                area_m2: 2e-3,
                fov_deg: 40.0,
                bandwidth_hz: 5e9,
                noise_spectral_density_a_per_sqrt_hz: 4.47e-12,
            })
            .collect(),
        wavelengths: [
            (Color::Red, 0.8, 0.4),
            (Color::Yellow, 0.5, 0.35),
            (Color::Green, 0.3, 0.3),
            (Color::Blue, 0.3, 0.2),
        ]
        .into_iter()
        .map(|(color, p, r)| WavelengthConfig {
            color,
            per_ld_power_w: p,
            responsivity_a_per_w: r,
        })
        .collect(),
        qos: QosConfigFile {
            thresholds_db: vec![10.0; users.len()],
        },
        reward_scale: RewardScale::Linear,
        hyperparams: Hyperparams::default(),
    }
}

impl ScenarioConfig {
    /// Four users, each directly under its own access point.
    pub fn scenario1() -> Self {
        reference_setup("scenario1", &SCENARIO1_USERS)
    }

    /// Four users clustered under the access point at (3, 3, 3).
    pub fn scenario2() -> Self {
        reference_setup("scenario2", &SCENARIO2_USERS)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "scenario1" => Ok(Self::scenario1()),
            "scenario2" => Ok(Self::scenario2()),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format {
            kind: "scenario",
            reason: e.to_string(),
        })
    }

    /// Checks every value and names the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        }
        fn unit_interval(key: &str, v: f64) -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in [0, 1], got {v}")))
            }
        }
        fn unit_vector(key: &str, v: [f64; 3]) -> Result<()> {
            if vec3(v).is_unit() {
                Ok(())
            } else {
                Err(Error::config(key, "must be a unit vector"))
            }
        }
        let r = &self.room;
        positive("room.width_m", r.width_m)?;
        positive("room.length_m", r.length_m)?;
        positive("room.height_m", r.height_m)?;
        unit_interval("room.wall_reflectance", r.wall_reflectance)?;
        unit_interval("room.ceiling_reflectance", r.ceiling_reflectance)?;
        unit_interval("room.floor_reflectance", r.floor_reflectance)?;
        positive(
            "element_edge_first_order_m",
            self.element_edge_first_order_m,
        )?;
        positive(
            "element_edge_second_order_m",
            self.element_edge_second_order_m,
        )?;

        let room = self.room();
        let inside = |key: String, p: [f64; 3]| {
            if room.contains(vec3(p)) {
                Ok(())
            } else {
                Err(Error::config(key, format!("{p:?} lies outside the room")))
            }
        };
        if self.access_points.is_empty() {
            return Err(Error::config(
                "access_points",
                "at least one access point is required",
            ));
        }
        for (i, ap) in self.access_points.iter().enumerate() {
            let key = |f: &str| format!("access_points[{i}].{f}");
            inside(key("position_m"), ap.position_m)?;
            unit_vector(&key("normal"), ap.normal)?;
            if !(ap.lambertian_order.is_finite() && ap.lambertian_order >= 1.0) {
                return Err(Error::config(key("lambertian_order"), "must be >= 1"));
            }
            if ap.num_lds == 0 {
                return Err(Error::config(key("num_lds"), "must be >= 1"));
            }
        }
        for (i, rx) in self.receivers.iter().enumerate() {
            let key = |f: &str| format!("receivers[{i}].{f}");
            inside(key("position_m"), rx.position_m)?;
            unit_vector(&key("normal"), rx.normal)?;
            positive(&key("area_m2"), rx.area_m2)?;
            if !(rx.fov_deg > 0.0 && rx.fov_deg < 90.0) {
                return Err(Error::config(
                    key("fov_deg"),
                    format!("must lie in (0, 90), got {}", rx.fov_deg),
                ));
            }
            positive(&key("bandwidth_hz"), rx.bandwidth_hz)?;
            positive(
                &key("noise_spectral_density_a_per_sqrt_hz"),
                rx.noise_spectral_density_a_per_sqrt_hz,
            )?;
        }
        if self.wavelengths.is_empty() {
            return Err(Error::config(
                "wavelengths",
                "at least one wavelength is required",
            ));
        }
        for (i, w) in self.wavelengths.iter().enumerate() {
            let key = |f: &str| format!("wavelengths[{i}].{f}");
            positive(&key("per_ld_power_w"), w.per_ld_power_w)?;
            if !(w.responsivity_a_per_w > 0.0 && w.responsivity_a_per_w <= 1.0) {
                return Err(Error::config(
                    key("responsivity_a_per_w"),
                    "must lie in (0, 1]",
                ));
            }
            if self.wavelengths[..i].iter().any(|o| o.color == w.color) {
                return Err(Error::config(
                    key("color"),
                    format!("{} listed twice", w.color),
                ));
            }
        }
        let k = self.receivers.len();
        let slots = self.access_points.len() * self.wavelengths.len();
        if k > slots {
            return Err(Error::InfeasibleProblem { users: k, slots });
        }
        if self.qos.thresholds_db.len() != k {
            return Err(Error::config(
                "qos.thresholds_db",
                format!(
                    "needs one entry per receiver ({k}), got {}",
                    self.qos.thresholds_db.len()
                ),
            ));
        }
        if let Some(t) = self.qos.thresholds_db.iter().find(|t| !t.is_finite()) {
            return Err(Error::config(
                "qos.thresholds_db",
                format!("must be finite, got {t}"),
            ));
        }
        if let RewardScale::Db { floor_db } = self.reward_scale {
            if !floor_db.is_finite() {
                return Err(Error::config("reward_scale.floor_db", "must be finite"));
            }
        }
        self.hyperparams.validate().map_err(|e| match e {
            Error::Config { key, reason } => Error::Config {
                key: format!("hyperparams.{key}"),
                reason,
            },
            other => other,
        })
    }

    pub fn users(&self) -> usize {
        self.receivers.len()
    }

    pub fn room(&self) -> Room {
        let r = &self.room;
        Room {
            width: r.width_m,
            length: r.length_m,
            height: r.height_m,
            wall_reflectance: r.wall_reflectance,
            ceiling_reflectance: r.ceiling_reflectance,
            floor_reflectance: r.floor_reflectance,
        }
    }

    pub fn emitters(&self) -> Vec<EmitterSpec> {
        self.access_points
            .iter()
            .map(|ap| EmitterSpec {
                position: vec3(ap.position_m),
                normal: vec3(ap.normal),
                lambertian_order: ap.lambertian_order,
                num_lds: ap.num_lds,
            })
            .collect()
    }

    pub fn receiver_specs(&self) -> Vec<ReceiverSpec> {
        self.receivers
            .iter()
            .map(|rx| ReceiverSpec {
                position: vec3(rx.position_m),
                normal: vec3(rx.normal),
                area: rx.area_m2,
                fov_half_angle: rx.fov_deg.to_radians(),
                bandwidth: rx.bandwidth_hz,
                noise_spectral_density: rx.noise_spectral_density_a_per_sqrt_hz,
            })
            .collect()
    }

    pub fn wavelength_specs(&self) -> Vec<WavelengthSpec> {
        self.wavelengths
            .iter()
            .map(|w| WavelengthSpec {
                color: w.color,
                per_ld_power: w.per_ld_power_w,
                responsivity: w.responsivity_a_per_w,
            })
            .collect()
    }

    pub fn qos_config(&self) -> Result<QoSConfig> {
        QoSConfig::new(self.qos.thresholds_db.iter().map(|t| from_db(*t)).collect())
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        ChannelModel::new(
            self.room(),
            self.emitters(),
            self.receiver_specs(),
            self.wavelength_specs(),
            self.element_edge_first_order_m,
            self.element_edge_second_order_m,
        )
    }

    pub fn compute_power_matrix(&self) -> Result<PowerMatrix> {
        Ok(self.channel_model()?.compute_power_matrix())
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::from_receivers(&self.receiver_specs())
    }

    pub fn link_budget(&self, power: PowerMatrix) -> Result<LinkBudget> {
        let responsivity = self
            .wavelengths
            .iter()
            .map(|w| w.responsivity_a_per_w)
            .collect();
        LinkBudget::new(power, responsivity, self.noise_model()?)
    }

    pub fn environment(&self, power: PowerMatrix, scale: RewardScale) -> Result<Environment> {
        Environment::new(
            self.link_budget(power)?,
            self.qos_config()?,
            scale,
            self.hyperparams.max_steps_per_episode,
        )
    }

    /// SHA-256 (hex) over every field the power matrix depends on.
    pub fn channel_hash(&self) -> String {
        #[derive(Serialize)]
        struct ChannelInputs<'a> {
            format: u32,
            element_edge_first_order_m: f64,
            element_edge_second_order_m: f64,
            room: &'a RoomConfig,
            access_points: &'a [AccessPointConfig],
            receivers: &'a [ReceiverConfig],
            wavelengths: &'a [WavelengthConfig],
        }
        let inputs = ChannelInputs {
            format: 1,
            element_edge_first_order_m: self.element_edge_first_order_m,
            element_edge_second_order_m: self.element_edge_second_order_m,
            room: &self.room,
            access_points: &self.access_points,
            receivers: &self.receivers,
            wavelengths: &self.wavelengths,
        };
        let bytes = serde_json::to_vec(&inputs).expect("plain data serialises");
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A builtin name (`scenario1`, `scenario2`) or a path to a TOML file.
pub fn load_scenario(source: &str) -> Result<ScenarioConfig> {
    if BUILTIN_NAMES.contains(&source) {
        return ScenarioConfig::builtin(source);
    }
    let path = Path::new(source);
    if path.exists() {
        ScenarioConfig::from_file(path)
    } else {
        Err(Error::UnknownScenario(source.to_string()))
    }
}
