//! Spherical-basis kinematics: unit vectors, body positions, analytic
//! velocity Jacobians, end-effector forward kinematics and the descent
//! error terms.
//!
//! Coordinates are q = (r, theta1, theta2, phi) with the accumulated polar
//! angle theta12 = theta1 + theta2. The base mount sits at a constant tilt
//! `vartheta` from vertical and rotates with phi.

use nalgebra::{Matrix3x4, Vector3, Vector4};

use crate::params::GeometryParams;
use crate::{joint, Error, Result};

/// Generalized coordinates and rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    /// (r, theta1, theta2, phi) in (m, rad, rad, rad).
    pub q: Vector4<f64>,
    /// Matching rates.
    pub qdot: Vector4<f64>,
}

impl JointState {
    pub fn new(q: Vector4<f64>, qdot: Vector4<f64>) -> Self {
        Self { q, qdot }
    }

    /// A resting state (zero rates).
    pub fn at_rest(q: Vector4<f64>) -> Self {
        Self {
            q,
            qdot: Vector4::zeros(),
        }
    }

    pub fn r(&self) -> f64 {
        self.q[joint::R]
    }
    pub fn theta1(&self) -> f64 {
        self.q[joint::THETA1]
    }
    pub fn theta2(&self) -> f64 {
        self.q[joint::THETA2]
    }
    pub fn theta12(&self) -> f64 {
        self.theta1() + self.theta2()
    }
    pub fn phi(&self) -> f64 {
        self.q[joint::PHI]
    }
}

/// Radial unit vector at polar angle `theta` and azimuth `phi`.
fn e_radial(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(phi.cos() * theta.sin(), phi.sin() * theta.sin(), theta.cos())
}

/// Polar unit vector (d/dtheta of the radial one).
fn e_polar(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin())
}

/// Azimuthal derivative of the radial vector; NOT unit length (norm sin(theta)).
fn d_azimuth(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(-phi.sin() * theta.sin(), phi.cos() * theta.sin(), 0.0)
}

/// The spherical basis set at a state.
#[derive(Debug, Clone, Copy)]
pub struct BasisSet {
    pub e_r0: Vector3<f64>,
    pub e_r1: Vector3<f64>,
    pub e_r2: Vector3<f64>,
    pub e_theta1: Vector3<f64>,
    pub e_theta12: Vector3<f64>,
    pub e_phi: Vector3<f64>,
}

/// Unit vectors of the radial, polar and azimuthal directions.
pub fn unit_vectors(state: &JointState, geom: &GeometryParams) -> BasisSet {
    let (t1, t12, phi) = (state.theta1(), state.theta12(), state.phi());
    BasisSet {
        e_r0: e_radial(geom.vartheta, phi),
        e_r1: e_radial(t1, phi),
        e_r2: e_radial(t12, phi),
        e_theta1: e_polar(t1, phi),
        e_theta12: e_polar(t12, phi),
        e_phi: Vector3::new(-phi.sin(), phi.cos(), 0.0),
    }
}

/// Cartesian positions of every body, m.
#[derive(Debug, Clone, Copy)]
pub struct BodyPositions {
    /// Base frame, at the link-1 mount.
    pub s0: Vector3<f64>,
    /// Link-1 centre of mass.
    pub s1: Vector3<f64>,
    /// Link-2 centre of mass.
    pub s2: Vector3<f64>,
    /// Actuator rod reference point.
    pub s_act: Vector3<f64>,
    /// Grasp point (claw + payload).
    pub s_obj: Vector3<f64>,
}

impl BodyPositions {
    /// Positions paired with the masses they carry, in a fixed order.
    pub fn points(&self) -> [Vector3<f64>; 5] {
        [self.s0, self.s1, self.s2, self.s_act, self.s_obj]
    }
}

/// Chain positions of all bodies.
pub fn body_positions(state: &JointState, geom: &GeometryParams) -> BodyPositions {
    let b = unit_vectors(state, geom);
    let s0 = geom.l0 * b.e_r0;
    let link1_tip = s0 + geom.l1 * b.e_r1;
    BodyPositions {
        s0,
        s1: s0 + geom.lbar1 * b.e_r1,
        s2: link1_tip + geom.lbar2 * b.e_r2,
        s_act: link1_tip + (geom.l2 + state.r()) * b.e_r2,
        s_obj: link1_tip + geom.grasp_length(state.r()) * b.e_r2,
    }
}

/// End-effector (grasp point) forward kinematics.
pub fn fk_ee(state: &JointState, geom: &GeometryParams) -> Vector3<f64> {
    body_positions(state, geom).s_obj
}

/// 3x4 velocity Jacobians per body: columns d(position)/d(r, theta1, theta2, phi).
#[derive(Debug, Clone)]
pub struct VelocityJacobians {
    pub s0: Matrix3x4<f64>,
    pub s1: Matrix3x4<f64>,
    pub s2: Matrix3x4<f64>,
    pub s_act: Matrix3x4<f64>,
    pub s_obj: Matrix3x4<f64>,
}

impl VelocityJacobians {
    pub fn jacobians(&self) -> [&Matrix3x4<f64>; 5] {
        [&self.s0, &self.s1, &self.s2, &self.s_act, &self.s_obj]
    }
}

/// Analytic velocity Jacobians of every body.
pub fn velocity_jacobians(state: &JointState, geom: &GeometryParams) -> VelocityJacobians {
    let (t1, t12, phi) = (state.theta1(), state.theta12(), state.phi());
    let e_r2 = e_radial(t12, phi);
    let p1 = e_polar(t1, phi);
    let p12 = e_polar(t12, phi);
    let a0 = d_azimuth(geom.vartheta, phi);
    let a1 = d_azimuth(t1, phi);
    let a12 = d_azimuth(t12, phi);
    let zero = Vector3::zeros();

    let from_cols = |c_r: Vector3<f64>, c_t1: Vector3<f64>, c_t2: Vector3<f64>, c_p: Vector3<f64>| {
        Matrix3x4::from_columns(&[c_r, c_t1, c_t2, c_p])
    };

    let l_act = geom.l2 + state.r();
    let l_obj = geom.grasp_length(state.r());
    VelocityJacobians {
        s0: from_cols(zero, zero, zero, geom.l0 * a0),
        s1: from_cols(
            zero,
            geom.lbar1 * p1,
            zero,
            geom.l0 * a0 + geom.lbar1 * a1,
        ),
        s2: from_cols(
            zero,
            geom.l1 * p1 + geom.lbar2 * p12,
            geom.lbar2 * p12,
            geom.l0 * a0 + geom.l1 * a1 + geom.lbar2 * a12,
        ),
        s_act: from_cols(
            e_r2,
            geom.l1 * p1 + l_act * p12,
            l_act * p12,
            geom.l0 * a0 + geom.l1 * a1 + l_act * a12,
        ),
        s_obj: from_cols(
            e_r2,
            geom.l1 * p1 + l_obj * p12,
            l_obj * p12,
            geom.l0 * a0 + geom.l1 * a1 + l_obj * a12,
        ),
    }
}

/// End-effector error e_EE = FK(q) - target.
pub fn ee_error(
    state: &JointState,
    target: &Vector3<f64>,
    geom: &GeometryParams,
) -> Vector3<f64> {
    fk_ee(state, geom) - target
}

/// Scale factor mapping a link-1 tip-height target onto the CM height.
pub fn link1_z_scale(geom: &GeometryParams) -> f64 {
    let base = geom.l0 * geom.vartheta.cos();
    (base + geom.lbar1) / (base + geom.l1)
}

/// Link-1 height error, normalized with respect to its centre of mass:
/// e_z1 = z1 - scale * z_des.
pub fn link1_z_error(state: &JointState, z_des: f64, geom: &GeometryParams) -> Result<f64> {
    let denom = geom.l0 * geom.vartheta.cos() + geom.l1;
    if !(denom > 0.0) {
        return Err(Error::param(
            "geometry",
            "l0*cos(vartheta) + l1 must be > 0 for the link-1 height scaling",
        ));
    }
    let z1 = body_positions(state, geom).s1.z;
    Ok(z1 - link1_z_scale(geom) * z_des)
}

/// Raw variant: compares the CM height against the target directly.
pub fn link1_z_error_raw(state: &JointState, z_des: f64, geom: &GeometryParams) -> f64 {
    body_positions(state, geom).s1.z - z_des
}

/// Conservative annulus reachability test around the shoulder pivot.
///
/// The pivot sits at distance l0 from the origin; the remaining chain is a
/// two-segment arm whose second segment length varies with the stroke. No
/// self-collision or joint-limit modelling.
pub fn is_reachable(target: &Vector3<f64>, geom: &GeometryParams) -> bool {
    // Rotate the target's azimuth onto the arm plane: the pivot is then at
    // (l0 sin(vartheta), 0, l0 cos(vartheta)) with the target at (rho, 0, z).
    let rho = (target.x * target.x + target.y * target.y).sqrt();
    let pivot_rho = geom.l0 * geom.vartheta.sin();
    let pivot_z = geom.l0 * geom.vartheta.cos();
    let d = ((rho - pivot_rho).powi(2) + (target.z - pivot_z).powi(2)).sqrt();

    let l_min = geom.grasp_length(0.0);
    let l_max = geom.grasp_length(geom.r_ext);
    let outer = geom.l1 + l_max;
    // Union over stroke of the two-link annuli [|l1 - L|, l1 + L].
    let inner = if (l_min..=l_max).contains(&geom.l1) {
        0.0
    } else {
        let a = (geom.l1 - l_min).abs();
        let b = (geom.l1 - l_max).abs();
        a.min(b)
    };
    d >= inner && d <= outer
}
