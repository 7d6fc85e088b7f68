//! Room geometry, surface discretisation and the generalised Lambertian
//! point-to-point gain.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cartesian point or direction in room coordinates, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);
    pub const DOWN: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction. Fails on the zero vector or
    /// non-finite components.
    pub fn normalized(self) -> Result<Vec3> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "cannot normalise vector {self:?}"
            )));
        }
        Ok(self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-9
    }

    /// Rotation about the z axis by `angle` radians.
    pub fn rotate_z(self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Empty rectangular room with its corner at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Room {
    pub width: f64,
    pub length: f64,
    pub height: f64,
    pub wall_reflectance: f64,
    pub ceiling_reflectance: f64,
    pub floor_reflectance: f64,
}

impl Room {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width", self.width),
            ("length", self.length),
            ("height", self.height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "room {name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("wall_reflectance", self.wall_reflectance),
            ("ceiling_reflectance", self.ceiling_reflectance),
            ("floor_reflectance", self.floor_reflectance),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn surface_area(&self) -> f64 {
        let (w, l, h) = (self.width, self.length, self.height);
        2.0 * (w * l + w * h + l * h)
    }

    /// Whether `p` lies inside the closed box of the room.
    pub fn contains(&self, p: Vec3) -> bool {
        p.is_finite()
            && (0.0..=self.width).contains(&p.x)
            && (0.0..=self.length).contains(&p.y)
            && (0.0..=self.height).contains(&p.z)
    }
}

/// The six boundary planes of the room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    Ceiling,
    Floor,
    /// x = 0
    WallWest,
    /// x = width
    WallEast,
    /// y = 0
    WallSouth,
    /// y = length
    WallNorth,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::Ceiling,
        Face::Floor,
        Face::WallWest,
        Face::WallEast,
        Face::WallSouth,
        Face::WallNorth,
    ];

    /// Inward-pointing unit normal.
    pub fn normal(self) -> Vec3 {
        match self {
            Face::Ceiling => Vec3::DOWN,
            Face::Floor => Vec3::UP,
            Face::WallWest => Vec3::new(1.0, 0.0, 0.0),
            Face::WallEast => Vec3::new(-1.0, 0.0, 0.0),
            Face::WallSouth => Vec3::new(0.0, 1.0, 0.0),
            Face::WallNorth => Vec3::new(0.0, -1.0, 0.0),
        }
    }

    pub fn reflectance(self, room: &Room) -> f64 {
        match self {
            Face::Ceiling => room.ceiling_reflectance,
            Face::Floor => room.floor_reflectance,
            _ => room.wall_reflectance,
        }
    }

    /// The two in-plane extents (u, v) of the face.
    fn extents(self, room: &Room) -> (f64, f64) {
        match self {
            Face::Ceiling | Face::Floor => (room.width, room.length),
            Face::WallWest | Face::WallEast => (room.length, room.height),
            Face::WallSouth | Face::WallNorth => (room.width, room.height),
        }
    }

    fn point(self, room: &Room, u: f64, v: f64) -> Vec3 {
        match self {
            Face::Ceiling => Vec3::new(u, v, room.height),
            Face::Floor => Vec3::new(u, v, 0.0),
            Face::WallWest => Vec3::new(0.0, u, v),
            Face::WallEast => Vec3::new(room.width, u, v),
            Face::WallSouth => Vec3::new(u, 0.0, v),
            Face::WallNorth => Vec3::new(u, room.length, v),
        }
    }
}

/// Small diffuse patch of a room surface that re-emits what it receives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceElement {
    pub center: Vec3,
    pub normal: Vec3,
    pub area: f64,
    pub reflectance: f64,
    pub lambertian_order: f64,
    pub face: Face,
}

/// Lambertian order of a reflecting element with a 60° half-power semi-angle.
pub const ELEMENT_LAMBERTIAN_ORDER: f64 = 1.0;

/// Lambertian order `m` for a given half-power semi-angle.
pub fn lambertian_order(half_power_semi_angle: f64) -> f64 {
    -std::f64::consts::LN_2 / half_power_semi_angle.cos().ln()
}

/// Tiles all six faces with axis-aligned elements of roughly
/// `element_edge` × `element_edge`.
///
/// The per-axis element count is rounded to the nearest integer and the
/// element size adjusted so each face's total area is preserved.
pub fn discretize_surfaces(room: &Room, element_edge: f64) -> Result<Vec<SurfaceElement>> {
    if !(element_edge.is_finite() && element_edge > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "element edge must be positive, got {element_edge}"
        )));
    }
    room.validate()?;

    let mut out = Vec::new();
    for face in Face::ALL {
        let (du, dv) = face.extents(room);
        let nu = ((du / element_edge).round() as usize).max(1);
        let nv = ((dv / element_edge).round() as usize).max(1);
        let (su, sv) = (du / nu as f64, dv / nv as f64);
        let normal = face.normal();
        let reflectance = face.reflectance(room);
        out.reserve(nu * nv);
        for i in 0..nu {
            let u = (i as f64 + 0.5) * su;
            for j in 0..nv {
                let v = (j as f64 + 0.5) * sv;
                out.push(SurfaceElement {
                    center: face.point(room, u, v),
                    normal,
                    area: su * sv,
                    reflectance,
                    lambertian_order: ELEMENT_LAMBERTIAN_ORDER,
                    face,
                });
            }
        }
    }
    Ok(out)
}

/// Generalised Lambertian gain from an emitter at `src_pos` to a receiving
/// aperture of `dst_area` at `dst_pos`:
///
/// ```text
/// (m + 1) cos^m(phi) cos(psi) A / (2 pi d^2)
/// ```
///
/// `phi` is the emission angle from `src_normal`, `psi` the incidence angle
/// from `dst_normal`. Zero when either cosine is non-positive or, with a
/// field of view, when `psi` exceeds it.
pub fn lambertian_gain(
    src_pos: Vec3,
    src_normal: Vec3,
    src_order: f64,
    dst_pos: Vec3,
    dst_normal: Vec3,
    dst_area: f64,
    fov_half_angle: Option<f64>,
) -> Result<f64> {
    let d2 = (dst_pos - src_pos).norm_squared();
    if d2.is_nan() || d2 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "source and destination coincide at {src_pos:?}"
        )));
    }
    let cos_fov = fov_half_angle.map_or(-1.0, f64::cos);
    Ok(point_gain(
        src_pos, src_normal, src_order, dst_pos, dst_normal, dst_area, cos_fov,
    ))
}

/// Unchecked kernel behind [`lambertian_gain`]. Coincident points give 0.
/// `cos_fov` is the cosine of the field-of-view half angle, or -1 for none.
#[inline]
pub(crate) fn point_gain(
    src_pos: Vec3,
    src_normal: Vec3,
    src_order: f64,
    dst_pos: Vec3,
    dst_normal: Vec3,
    dst_area: f64,
    cos_fov: f64,
) -> f64 {
    let r = dst_pos - src_pos;
    let d2 = r.norm_squared();
    if d2 == 0.0 {
        return 0.0;
    }
    let d = d2.sqrt();
    let cos_phi = r.dot(src_normal) / d;
    let cos_psi = -r.dot(dst_normal) / d;
    if cos_phi <= 0.0 || cos_psi <= 0.0 || cos_psi < cos_fov {
        return 0.0;
    }
    let emission = if src_order == 1.0 {
        cos_phi
    } else {
        cos_phi.powf(src_order)
    };
    (src_order + 1.0) * emission * cos_psi * dst_area / (2.0 * PI * d2)
}
