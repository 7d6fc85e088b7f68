//! Received optical power per (user, access point, wavelength).
//!
//! Each access point is a single ceiling-mounted Lambertian point source per
//! wavelength. Received power is the line-of-sight contribution plus first-
//! and second-order diffuse reflections off the discretised room surfaces.
//! Reflectances are wavelength independent, so every path gain is purely
//! geometric and the wavelength enters only through the transmit power.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{discretize_surfaces, point_gain, Room, SurfaceElement, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Yellow,
    Green,
    Blue,
}

impl Color {
    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Yellow => "yellow",
            Color::Green => "green",
            Color::Blue => "blue",
        }
    }
}

impl std::fmt::Display for Color {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One laser-diode colour: optical power per diode and the detector
/// responsivity at that wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthSpec {
    pub color: Color,
    /// Optical power of one diode, W.
    pub per_ld_power: f64,
    /// Photodetector responsivity, A/W.
    pub responsivity: f64,
}

impl WavelengthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.per_ld_power.is_finite() && self.per_ld_power > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{} per-diode power must be positive",
                self.color
            )));
        }
        if !(self.responsivity > 0.0 && self.responsivity <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "{} responsivity must lie in (0, 1]",
                self.color
            )));
        }
        Ok(())
    }
}

/// Ceiling access point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterSpec {
    pub position: Vec3,
    pub normal: Vec3,
    pub lambertian_order: f64,
    pub num_lds: u32,
}

impl EmitterSpec {
    /// Total optical power the access point radiates on `wavelength`.
    pub fn transmit_power(&self, wavelength: &WavelengthSpec) -> f64 {
        self.num_lds as f64 * wavelength.per_ld_power
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.is_finite() {
            return Err(Error::InvalidArgument("emitter position not finite".into()));
        }
        if !self.normal.is_unit() {
            return Err(Error::InvalidArgument(
                "emitter normal must be a unit vector".into(),
            ));
        }
        if !(self.lambertian_order >= 1.0 && self.lambertian_order.is_finite()) {
            return Err(Error::InvalidArgument(
                "emitter Lambertian order must be >= 1".into(),
            ));
        }
        if self.num_lds == 0 {
            return Err(Error::InvalidArgument(
                "emitter needs at least one diode".into(),
            ));
        }
        Ok(())
    }
}

/// Upward-facing photodetector of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverSpec {
    pub position: Vec3,
    pub normal: Vec3,
    /// Detector area, m².
    pub area: f64,
    /// Field-of-view half angle, radians.
    pub fov_half_angle: f64,
    /// Electrical bandwidth, Hz.
    pub bandwidth: f64,
    /// Input-referred noise current density, A/√Hz.
    pub noise_spectral_density: f64,
}

impl ReceiverSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.position.is_finite() {
            return Err(Error::InvalidArgument(
                "receiver position not finite".into(),
            ));
        }
        if !self.normal.is_unit() {
            return Err(Error::InvalidArgument(
                "receiver normal must be a unit vector".into(),
            ));
        }
        if !(self.area.is_finite() && self.area > 0.0) {
            return Err(Error::InvalidArgument(
                "receiver area must be positive".into(),
            ));
        }
        if !(self.fov_half_angle > 0.0 && self.fov_half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidArgument(
                "receiver FOV half angle must lie in (0, 90°)".into(),
            ));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::InvalidArgument(
                "receiver bandwidth must be positive".into(),
            ));
        }
        if !(self.noise_spectral_density.is_finite() && self.noise_spectral_density >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise spectral density must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn cos_fov(&self) -> f64 {
        self.fov_half_angle.cos()
    }
}

/// Received optical power `p[k][l][n]` in watts, dense `K × L × N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMatrix {
    users: usize,
    aps: usize,
    wavelengths: usize,
    data: Vec<f64>,
}

impl PowerMatrix {
    pub fn zeros(users: usize, aps: usize, wavelengths: usize) -> Self {
        Self {
            users,
            aps,
            wavelengths,
            data: vec![0.0; users * aps * wavelengths],
        }
    }

    /// Builds a matrix from row-major `[k][l][n]` data.
    pub fn from_vec(users: usize, aps: usize, wavelengths: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != users * aps * wavelengths {
            return Err(Error::InvalidArgument(format!(
                "power matrix needs {} entries, got {}",
                users * aps * wavelengths,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "power matrix entries must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self {
            users,
            aps,
            wavelengths,
            data,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn aps(&self) -> usize {
        self.aps
    }

    pub fn wavelengths(&self) -> usize {
        self.wavelengths
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.users, self.aps, self.wavelengths)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn index(&self, k: usize, l: usize, n: usize) -> usize {
        debug_assert!(k < self.users && l < self.aps && n < self.wavelengths);
        (k * self.aps + l) * self.wavelengths + n
    }

    pub fn get(&self, k: usize, l: usize, n: usize) -> f64 {
        self.data[self.index(k, l, n)]
    }

    pub fn set(&mut self, k: usize, l: usize, n: usize, value: f64) {
        let i = self.index(k, l, n);
        self.data[i] = value;
    }

    fn zip_add(&self, other: &PowerMatrix) -> PowerMatrix {
        debug_assert_eq!(self.dims(), other.dims());
        PowerMatrix {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
            ..*self
        }
    }
}

/// Received power split by propagation order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBreakdown {
    pub los: PowerMatrix,
    pub first_order: PowerMatrix,
    pub second_order: PowerMatrix,
}

impl PowerBreakdown {
    /// `los + first_order + second_order`, summed in that order.
    pub fn total(&self) -> PowerMatrix {
        self.los
            .zip_add(&self.first_order)
            .zip_add(&self.second_order)
    }
}

/// Line-of-sight power from `ap` on `wavelength` at `rx`.
pub fn los_power(ap: &EmitterSpec, wavelength: &WavelengthSpec, rx: &ReceiverSpec) -> f64 {
    ap.transmit_power(wavelength) * los_gain(ap, rx)
}

fn los_gain(ap: &EmitterSpec, rx: &ReceiverSpec) -> f64 {
    point_gain(
        ap.position,
        ap.normal,
        ap.lambertian_order,
        rx.position,
        rx.normal,
        rx.area,
        rx.cos_fov(),
    )
}

fn illumination(ap: &EmitterSpec, e: &SurfaceElement) -> f64 {
    point_gain(
        ap.position,
        ap.normal,
        ap.lambertian_order,
        e.center,
        e.normal,
        e.area,
        -1.0,
    )
}

fn collection(e: &SurfaceElement, rx: &ReceiverSpec) -> f64 {
    point_gain(
        e.center,
        e.normal,
        e.lambertian_order,
        rx.position,
        rx.normal,
        rx.area,
        rx.cos_fov(),
    )
}

fn element_to_element(src: &SurfaceElement, dst: &SurfaceElement) -> f64 {
    point_gain(
        src.center,
        src.normal,
        src.lambertian_order,
        dst.center,
        dst.normal,
        dst.area,
        -1.0,
    )
}

/// Power reaching `rx` after exactly one diffuse bounce.
pub fn first_order_power(
    ap: &EmitterSpec,
    wavelength: &WavelengthSpec,
    rx: &ReceiverSpec,
    elements: &[SurfaceElement],
) -> Result<f64> {
    if elements.is_empty() {
        return Err(Error::InvalidArgument("empty element list".into()));
    }
    Ok(ap.transmit_power(wavelength) * first_order_gain(ap, rx, elements))
}

fn first_order_gain(ap: &EmitterSpec, rx: &ReceiverSpec, elements: &[SurfaceElement]) -> f64 {
    elements
        .iter()
        .map(|e| {
            let lit = illumination(ap, e);
            if lit == 0.0 {
                0.0
            } else {
                lit * e.reflectance * collection(e, rx)
            }
        })
        .sum()
}

/// Power reaching `rx` after exactly two diffuse bounces, summed directly
/// over every ordered pair of distinct elements. Quadratic in the element
/// count; [`ChannelModel`] uses an equivalent factorised sum.
pub fn second_order_power(
    ap: &EmitterSpec,
    wavelength: &WavelengthSpec,
    rx: &ReceiverSpec,
    elements: &[SurfaceElement],
) -> Result<f64> {
    if elements.is_empty() {
        return Err(Error::InvalidArgument("empty element list".into()));
    }
    let p_tx = ap.transmit_power(wavelength);
    let collected: Vec<f64> = elements
        .iter()
        .map(|e| e.reflectance * collection(e, rx))
        .collect();
    let mut total = 0.0;
    for (i, e1) in elements.iter().enumerate() {
        let lit = illumination(ap, e1) * e1.reflectance;
        if lit == 0.0 {
            continue;
        }
        for (j, e2) in elements.iter().enumerate() {
            if i == j || collected[j] == 0.0 {
                continue;
            }
            total += p_tx * lit * element_to_element(e1, e2) * collected[j];
        }
    }
    Ok(total)
}

/// Everything needed to trace a scene: room, access points, receivers,
/// wavelengths and the two reflection grids.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub room: Room,
    pub emitters: Vec<EmitterSpec>,
    pub receivers: Vec<ReceiverSpec>,
    pub wavelengths: Vec<WavelengthSpec>,
    pub first_order_elements: Vec<SurfaceElement>,
    pub second_order_elements: Vec<SurfaceElement>,
}

impl ChannelModel {
    pub fn new(
        room: Room,
        emitters: Vec<EmitterSpec>,
        receivers: Vec<ReceiverSpec>,
        wavelengths: Vec<WavelengthSpec>,
        first_order_edge: f64,
        second_order_edge: f64,
    ) -> Result<Self> {
        room.validate()?;
        for e in &emitters {
            e.validate()?;
        }
        for r in &receivers {
            r.validate()?;
        }
        for w in &wavelengths {
            w.validate()?;
        }
        Ok(Self {
            first_order_elements: discretize_surfaces(&room, first_order_edge)?,
            second_order_elements: discretize_surfaces(&room, second_order_edge)?,
            room,
            emitters,
            receivers,
            wavelengths,
        })
    }

    /// Traces every (user, AP) pair and scales by each wavelength's
    /// transmit power.
    ///
    /// Work is split across rayon workers per receiver and per element; each
    /// individual sum runs sequentially in a fixed order so the result is
    /// bit-identical for any worker count.
    pub fn compute_breakdown(&self) -> PowerBreakdown {
        let (k_n, l_n, n_n) = (
            self.receivers.len(),
            self.emitters.len(),
            self.wavelengths.len(),
        );
        let per_rx: Vec<Vec<[f64; 3]>> = self
            .receivers
            .par_iter()
            .map(|rx| {
                let bounce = self.second_order_kernel(rx);
                self.emitters
                    .iter()
                    .map(|ap| {
                        let g2: f64 = self
                            .second_order_elements
                            .iter()
                            .zip(&bounce)
                            .map(|(e1, c)| {
                                if *c == 0.0 {
                                    0.0
                                } else {
                                    illumination(ap, e1) * e1.reflectance * c
                                }
                            })
                            .sum();
                        [
                            los_gain(ap, rx),
                            first_order_gain(ap, rx, &self.first_order_elements),
                            g2,
                        ]
                    })
                    .collect()
            })
            .collect();

        let mut los = PowerMatrix::zeros(k_n, l_n, n_n);
        let mut first = los.clone();
        let mut second = los.clone();
        for (k, row) in per_rx.iter().enumerate() {
            for (l, gains) in row.iter().enumerate() {
                for (n, w) in self.wavelengths.iter().enumerate() {
                    let p_tx = self.emitters[l].transmit_power(w);
                    los.set(k, l, n, p_tx * gains[0]);
                    first.set(k, l, n, p_tx * gains[1]);
                    second.set(k, l, n, p_tx * gains[2]);
                }
            }
        }
        PowerBreakdown {
            los,
            first_order: first,
            second_order: second,
        }
    }

    pub fn compute_power_matrix(&self) -> PowerMatrix {
        self.compute_breakdown().total()
    }

    /// For each first-bounce element `e1`: `sum_{e2 != e1} G(e1 -> e2) rho2 G(e2 -> rx)`.
    fn second_order_kernel(&self, rx: &ReceiverSpec) -> Vec<f64> {
        let elements = &self.second_order_elements;
        let visible: Vec<(usize, f64)> = elements
            .iter()
            .enumerate()
            .filter_map(|(j, e)| {
                let c = e.reflectance * collection(e, rx);
                (c != 0.0).then_some((j, c))
            })
            .collect();
        elements
            .par_iter()
            .enumerate()
            .map(|(i, e1)| {
                visible
                    .iter()
                    .filter(|(j, _)| *j != i)
                    .map(|&(j, c)| element_to_element(e1, &elements[j]) * c)
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> Room {
        Room {
            width: 4.0,
            length: 4.0,
            height: 3.0,
            wall_reflectance: 0.8,
            ceiling_reflectance: 0.8,
            floor_reflectance: 0.3,
        }
    }

    fn ap(x: f64, y: f64) -> EmitterSpec {
        EmitterSpec {
            position: Vec3::new(x, y, 3.0),
            normal: Vec3::DOWN,
            lambertian_order: 1.0,
            num_lds: 12,
        }
    }

    fn rx(x: f64, y: f64, fov_deg: f64) -> ReceiverSpec {
        ReceiverSpec {
            position: Vec3::new(x, y, 1.0),
            normal: Vec3::UP,
            area: 2e-3,
            fov_half_angle: fov_deg.to_radians(),
            bandwidth: 5e9,
            noise_spectral_density: 4.47e-12,
        }
    }

    const RED: WavelengthSpec = WavelengthSpec {
        color: Color::Red,
        per_ld_power: 0.8,
        responsivity: 0.4,
    };

    #[test]
    fn los_overhead() {
        let p = los_power(&ap(1.0, 1.0), &RED, &rx(1.0, 1.0, 40.0));
        let expected = 9.6 * 2.0 * 2e-3 / (2.0 * std::f64::consts::PI * 4.0);
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 1.528e-3).abs() < 1e-6);
    }

    #[test]
    fn los_fov_blocked_diagonal() {
        assert_eq!(los_power(&ap(3.0, 3.0), &RED, &rx(1.0, 1.0, 40.0)), 0.0);
    }

    #[test]
    fn los_tiny_fov_directly_below() {
        let narrow = los_power(&ap(1.0, 1.0), &RED, &rx(1.0, 1.0, 1e-9));
        let wide = los_power(&ap(1.0, 1.0), &RED, &rx(1.0, 1.0, 89.0));
        assert_eq!(narrow, wide);
    }

    #[test]
    fn empty_elements_rejected() {
        assert!(first_order_power(&ap(1.0, 1.0), &RED, &rx(1.0, 1.0, 40.0), &[]).is_err());
        assert!(second_order_power(&ap(1.0, 1.0), &RED, &rx(1.0, 1.0, 40.0), &[]).is_err());
    }

    #[test]
    fn zero_reflectance_kills_reflections() {
        let dark = Room {
            wall_reflectance: 0.0,
            ceiling_reflectance: 0.0,
            floor_reflectance: 0.0,
            ..room()
        };
        let elems = discretize_surfaces(&dark, 0.2).unwrap();
        let (a, r) = (ap(1.0, 1.0), rx(1.0, 1.0, 40.0));
        assert_eq!(first_order_power(&a, &RED, &r, &elems).unwrap(), 0.0);
        assert_eq!(second_order_power(&a, &RED, &r, &elems).unwrap(), 0.0);
    }

    #[test]
    fn reflections_positive_and_below_los() {
        let elems = discretize_surfaces(&room(), 0.05).unwrap();
        let (a, r) = (ap(1.0, 1.0), rx(1.0, 1.0, 40.0));
        let first = first_order_power(&a, &RED, &r, &elems).unwrap();
        assert!(first > 0.0);
        assert!(first < los_power(&a, &RED, &r));
    }

    #[test]
    fn factorised_second_order_matches_direct_sum() {
        // coarse grid keeps the quadratic reference cheap
        let model = ChannelModel::new(
            room(),
            vec![ap(1.0, 1.0), ap(3.0, 3.0)],
            vec![rx(1.0, 1.0, 40.0), rx(2.5, 3.5, 60.0)],
            vec![RED],
            0.5,
            0.4,
        )
        .unwrap();
        let b = model.compute_breakdown();
        for (k, r) in model.receivers.iter().enumerate() {
            for (l, a) in model.emitters.iter().enumerate() {
                let direct = second_order_power(a, &RED, r, &model.second_order_elements).unwrap();
                let fast = b.second_order.get(k, l, 0);
                assert!(direct > 0.0);
                assert!(
                    (direct - fast).abs() <= 1e-12 * direct,
                    "{direct} vs {fast}"
                );
                let first = first_order_power(a, &RED, r, &model.first_order_elements).unwrap();
                assert!((first - b.first_order.get(k, l, 0)).abs() <= 1e-12 * first.max(1e-300));
            }
        }
    }

    #[test]
    fn no_users_gives_empty_matrix() {
        let model =
            ChannelModel::new(room(), vec![ap(1.0, 1.0)], vec![], vec![RED], 0.5, 0.5).unwrap();
        let pm = model.compute_power_matrix();
        assert_eq!(pm.dims(), (0, 1, 1));
        assert!(pm.as_slice().is_empty());
    }

    #[test]
    fn transmit_power_linearity_is_exact() {
        let mk = |p: f64| {
            ChannelModel::new(
                room(),
                vec![ap(1.0, 1.0), ap(3.0, 1.0)],
                vec![rx(1.0, 1.0, 40.0), rx(3.0, 3.0, 40.0)],
                vec![WavelengthSpec {
                    per_ld_power: p,
                    ..RED
                }],
                0.4,
                0.5,
            )
            .unwrap()
            .compute_power_matrix()
        };
        let (a, b) = (mk(0.8), mk(1.6));
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn wider_fov_never_decreases_power() {
        let mk = |fov: f64| {
            ChannelModel::new(
                room(),
                vec![ap(1.0, 1.0), ap(1.0, 3.0), ap(3.0, 1.0), ap(3.0, 3.0)],
                vec![rx(1.0, 1.0, fov), rx(2.5, 3.5, fov)],
                vec![RED],
                0.25,
                0.5,
            )
            .unwrap()
            .compute_power_matrix()
        };
        let mut prev = mk(10.0);
        for fov in [25.0, 40.0, 55.0, 70.0, 85.0] {
            let next = mk(fov);
            for (a, b) in prev.as_slice().iter().zip(next.as_slice()) {
                assert!(b >= a);
            }
            prev = next;
        }
    }

    #[test]
    fn power_matrix_rejects_bad_data() {
        assert!(PowerMatrix::from_vec(1, 1, 2, vec![1.0]).is_err());
        assert!(PowerMatrix::from_vec(1, 1, 1, vec![-1.0]).is_err());
        assert!(PowerMatrix::from_vec(1, 1, 1, vec![f64::NAN]).is_err());
    }
}
