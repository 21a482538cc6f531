//! Closed-form encounter geometry between the gripper (A) and the detected hand (B̂).
//!
//! Both agents are modelled as spheres. Motion is the straight-line relative
//! motion of A with respect to B̂, projected onto the plane spanned by the
//! separation and the relative velocity.

use core::f64::consts::{PI, SQRT_2};
use core::ops::{Add, Mul, Sub};

use crate::error::{check_range, Error, Result};

/// Radicands are allowed to dip this far below zero (relative to the squared
/// margins sum) before being treated as a genuine cone violation. Anything
/// inside the band is rounding from evaluating exactly at `alpha_c`.
const RADICAND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, rhs: Vec3) -> f64 {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn cross(self, rhs: Vec3) -> Vec3 {
        Vec3::new(
            self.y * rhs.z - self.z * rhs.y,
            self.z * rhs.x - self.x * rhs.z,
            self.x * rhs.y - self.y * rhs.x,
        )
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Spherical safety radii of the gripper (`s_a`) and the hand (`s_b`), in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyMargins {
    s_a: f64,
    s_b: f64,
}

impl SafetyMargins {
    pub fn new(s_a: f64, s_b: f64) -> Result<Self> {
        for (what, v) in [("s_a", s_a), ("s_b", s_b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::OutOfRange { what, value: v });
            }
        }
        Ok(Self { s_a, s_b })
    }

    /// Splits a margins sum evenly between gripper and hand.
    pub fn split_even(sum: f64) -> Result<Self> {
        Self::new(sum / 2.0, sum / 2.0)
    }

    pub fn s_a(&self) -> f64 {
        self.s_a
    }

    pub fn s_b(&self) -> f64 {
        self.s_b
    }

    /// Contact distance `s_a + s_b`.
    pub fn sum(&self) -> f64 {
        self.s_a + self.s_b
    }
}

/// Relative kinematics of one gripper/hand encounter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncounterState {
    pub r: f64,
    pub u: f64,
    pub alpha: f64,
    pub margins: SafetyMargins,
    /// Set when `r == 0` or `u == 0`; `alpha` is then 0 by convention.
    pub degenerate: bool,
}

impl EncounterState {
    pub fn new(r: f64, u: f64, alpha: f64, margins: SafetyMargins) -> Result<Self> {
        check_range("r", r, 0.0, f64::INFINITY)?;
        check_range("u", u, 0.0, f64::INFINITY)?;
        check_range("alpha", alpha, -PI, PI)?;
        let degenerate = r == 0.0 || u == 0.0;
        Ok(Self {
            r,
            u,
            alpha: if degenerate { 0.0 } else { alpha },
            margins,
            degenerate,
        })
    }

    /// Builds the encounter from camera-frame positions and velocities of
    /// the gripper (`r_a`, `u_a`) and the detected hand (`r_b`, `u_b`).
    pub fn from_vectors(r_a: Vec3, r_b: Vec3, u_a: Vec3, u_b: Vec3, margins: SafetyMargins) -> Self {
        let sep = r_b - r_a;
        let rel = u_a - u_b;
        let r = sep.norm();
        let u = rel.norm();
        let degenerate = r == 0.0 || u == 0.0;
        let alpha = if degenerate {
            0.0
        } else {
            libm::atan2(sep.cross(rel).norm(), sep.dot(rel))
        };
        Self {
            r,
            u,
            alpha,
            margins,
            degenerate,
        }
    }

    pub fn with_margins(self, margins: SafetyMargins) -> Self {
        Self { margins, ..self }
    }

    pub fn in_contact(&self) -> bool {
        self.r <= self.margins.sum()
    }

    /// True when straight-line relative motion reaches contact.
    pub fn in_cone(&self) -> bool {
        match alpha_critical(self.r, self.margins) {
            Ok(ac) => !self.degenerate && libm::fabs(self.alpha) <= ac,
            Err(_) => false,
        }
    }
}

/// Half-angle of the collision cone: `sin(alpha_c) = (s_a + s_b) / r`.
pub fn alpha_critical(r: f64, margins: SafetyMargins) -> Result<f64> {
    let s = margins.sum();
    if !(r > s) {
        return Err(Error::AlreadyInContact { r, contact: s });
    }
    Ok(libm::atan2(s, libm::sqrt((r - s) * (r + s))))
}

fn perpendicular_sq(e: &EncounterState) -> f64 {
    let p = e.r * libm::sin(e.alpha);
    p * p
}

fn sqrt_radicand(radicand: f64, scale_sq: f64) -> f64 {
    assert!(
        radicand >= -RADICAND_TOL * scale_sq,
        "negative radicand {radicand} inside the collision cone"
    );
    libm::sqrt(radicand.max(0.0))
}

fn cone_check(e: &EncounterState) -> Result<()> {
    let alpha_c = alpha_critical(e.r, e.margins)?;
    if libm::fabs(e.alpha) > alpha_c {
        return Err(Error::OutsideCone {
            alpha: e.alpha,
            alpha_c,
        });
    }
    Ok(())
}

/// Maximum distance A can travel along the relative velocity before the
/// spheres touch: `L = r cos(alpha) - sqrt(S^2 - r^2 sin^2(alpha))`.
pub fn safe_travel_distance(e: &EncounterState) -> Result<f64> {
    cone_check(e)?;
    let s = e.margins.sum();
    let root = sqrt_radicand(s * s - perpendicular_sq(e), s * s);
    Ok((e.r * libm::cos(e.alpha) - root).max(0.0))
}

/// IoU of two `s_b`-sided squares offset by `b` along both axes.
pub fn iou_from_shift(b: f64, s_b: f64) -> Result<f64> {
    if !(s_b.is_finite() && s_b > 0.0) {
        return Err(Error::OutOfRange { what: "s_b", value: s_b });
    }
    check_range("shift", b, 0.0, s_b)?;
    let overlap = (s_b - b) * (s_b - b);
    Ok(overlap / (2.0 * s_b * s_b - overlap))
}

/// Per-axis shift `b` that produces the given IoU; inverse of [`iou_from_shift`].
pub fn shift_from_iou(iou: f64, s_b: f64) -> Result<f64> {
    if !(s_b.is_finite() && s_b > 0.0) {
        return Err(Error::OutOfRange { what: "s_b", value: s_b });
    }
    check_range("iou", iou, 0.0, 1.0)?;
    Ok(s_b * (1.0 - overlap_side_fraction(iou)))
}

/// Fraction of the box side that still overlaps after a shift with the given
/// IoU: `sqrt(2 iou / (iou + 1))`.
pub(crate) fn overlap_side_fraction(iou: f64) -> f64 {
    libm::sqrt(2.0 * iou) / libm::sqrt(iou + 1.0)
}

/// A matched IoU / shift pair for a hand box of side `s_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftModel {
    pub iou: f64,
    pub b: f64,
}

impl ShiftModel {
    pub fn from_iou(iou: f64, s_b: f64) -> Result<Self> {
        Ok(Self {
            iou,
            b: shift_from_iou(iou, s_b)?,
        })
    }

    pub fn from_shift(b: f64, s_b: f64) -> Result<Self> {
        Ok(Self {
            iou: iou_from_shift(b, s_b)?,
            b,
        })
    }
}

/// Safe travel distance after the worst-case detection shift and the
/// distance covered during the response latency `t_r`.
pub fn effective_safe_distance(e: &EncounterState, iou: f64, t_r: f64) -> Result<f64> {
    check_range("t_r", t_r, 0.0, f64::INFINITY)?;
    let l = safe_travel_distance(e)?;
    let b = shift_from_iou(iou, e.margins.s_b())?;
    let s = e.margins.sum();
    let perp = perpendicular_sq(e);
    let grown = s + SQRT_2 * b;
    let penalty = sqrt_radicand(grown * grown - perp, s * s) - sqrt_radicand(s * s - perp, s * s);
    Ok((l - penalty - e.u * t_r).max(0.0))
}
