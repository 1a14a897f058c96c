//! State-coupled rotational inertias, the analytic actuator-rod tensor, the
//! equivalent azimuthal inertia, and CAD-frame tensor transforms with
//! parallel-axis shifting.

use nalgebra::{Matrix3, Vector3};

use crate::kinematics::{unit_vectors, JointState};
use crate::params::{GeometryParams, InertiaSet};
use crate::{Error, Result};

/// Diagonal inertia tensor, kg*m^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalTensor {
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
}

impl DiagonalTensor {
    pub fn new(ixx: f64, iyy: f64, izz: f64) -> Self {
        Self { ixx, iyy, izz }
    }

    pub fn from_array(d: [f64; 3]) -> Self {
        Self::new(d[0], d[1], d[2])
    }

    pub fn to_matrix(self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.ixx, self.iyy, self.izz))
    }
}

/// Principal-axis orientation of a CAD-reported tensor, rad.
#[derive(Debug, Clone, Copy)]
pub struct CadOrientation {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl CadOrientation {
    pub fn from_degrees(rx: f64, ry: f64, rz: f64) -> Self {
        Self {
            rx: rx.to_radians(),
            ry: ry.to_radians(),
            rz: rz.to_radians(),
        }
    }

    /// Composite rotation Rz * Ry * Rx.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sx, cx) = self.rx.sin_cos();
        let (sy, cy) = self.ry.sin_cos();
        let (sz, cz) = self.rz.sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
        let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
        let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
        rz * ry * rx
    }
}

/// Quadratic-form projection e^T * diag * e of a diagonal tensor onto a unit axis.
pub fn polar_inertia(tensor: &DiagonalTensor, axis: &Vector3<f64>) -> f64 {
    debug_assert!(
        (axis.norm() - 1.0).abs() < 1e-9,
        "polar_inertia requires a unit axis, got |e| = {}",
        axis.norm()
    );
    tensor.ixx * axis.x * axis.x + tensor.iyy * axis.y * axis.y + tensor.izz * axis.z * axis.z
}

/// Analytic inertia tensor of the extended rod, modeled as a solid cylinder
/// of length `r` and radius `rod_radius` with density `rho`.
pub fn actuator_tensor(r: f64, rod_radius: f64, rho: f64) -> Result<DiagonalTensor> {
    if r < 0.0 {
        return Err(Error::param("r", "extension must be >= 0"));
    }
    if rod_radius < 0.0 {
        return Err(Error::param("rod_radius", "must be >= 0"));
    }
    let r2 = rod_radius * rod_radius;
    let transverse = std::f64::consts::PI / 12.0 * r2 * r * rho * (3.0 * r2 + r * r);
    let axial = std::f64::consts::FRAC_PI_2 * r2 * r2 * r * rho;
    Ok(DiagonalTensor::new(transverse, transverse, axial))
}

/// Rod inertia projected onto the accumulated polar axis e_theta12:
/// pi/12 * R^2 r rho * (3R^2 sin^2(t12) - r^2 sin^2(t12) + 3R^2 + r^2).
pub fn actuator_polar_inertia(state: &JointState, rod_radius: f64, rho: f64) -> f64 {
    let s2 = state.theta12().sin().powi(2);
    let r = state.r();
    let r2 = rod_radius * rod_radius;
    std::f64::consts::PI / 12.0
        * r2
        * r
        * rho
        * (3.0 * r2 * s2 - r * r * s2 + 3.0 * r2 + r * r)
}

/// Azimuthal projection of a diagonal tensor: Ixx cos^2(phi) + Iyy sin^2(phi).
fn azimuthal_projection(d: [f64; 3], phi: f64) -> f64 {
    d[0] * phi.cos().powi(2) + d[1] * phi.sin().powi(2)
}

/// Equivalent inertia about the azimuth: the three body tensors projected at
/// phi plus the rod's analytic azimuthal terms
/// pi/12 R^2 r^3 rho + pi/4 R^4 r rho.
pub fn equivalent_azimuthal_inertia(
    state: &JointState,
    tensors: &InertiaSet,
    rod_radius: f64,
    rho: f64,
) -> f64 {
    let phi = state.phi();
    let bodies = azimuthal_projection(tensors.base_frame, phi)
        + azimuthal_projection(tensors.link1, phi)
        + azimuthal_projection(tensors.link2, phi);
    let r = state.r();
    let r2 = rod_radius * rod_radius;
    let rod = std::f64::consts::PI / 12.0 * r2 * r.powi(3) * rho
        + std::f64::consts::FRAC_PI_4 * r2 * r2 * r * rho;
    bodies + rod
}

/// Rotate a tensor from the CAD CG frame into the dynamic frame: R0^T I R0.
pub fn cad_to_dynamic(tensor: &Matrix3<f64>, orient: &CadOrientation) -> Matrix3<f64> {
    let r0 = orient.rotation();
    r0.transpose() * tensor * r0
}

/// Parallel-axis shift of a CM tensor by `offset` for a body of mass `mass`.
///
/// `diagonal_only` reproduces the published base-frame numbers, which shift
/// only the diagonal; the full theorem also carries -m*d_i*d_j off-diagonal
/// terms.
pub fn parallel_axis(
    tensor: &Matrix3<f64>,
    mass: f64,
    offset: &Vector3<f64>,
    diagonal_only: bool,
) -> Matrix3<f64> {
    let d = offset;
    let mut out = *tensor;
    out[(0, 0)] += mass * (d.y * d.y + d.z * d.z);
    out[(1, 1)] += mass * (d.x * d.x + d.z * d.z);
    out[(2, 2)] += mass * (d.x * d.x + d.y * d.y);
    if !diagonal_only {
        out[(0, 1)] -= mass * d.x * d.y;
        out[(1, 0)] -= mass * d.x * d.y;
        out[(0, 2)] -= mass * d.x * d.z;
        out[(2, 0)] -= mass * d.x * d.z;
        out[(1, 2)] -= mass * d.y * d.z;
        out[(2, 1)] -= mass * d.y * d.z;
    }
    out
}

/// State-coupled polar inertias consumed by the dynamics: the link-1 channel,
/// the accumulated link-2 + rod channel, and the azimuthal channel.
pub fn rotational_channels(
    state: &JointState,
    tensors: &InertiaSet,
    geom: &GeometryParams,
    rho: f64,
) -> (f64, f64, f64) {
    let b = unit_vectors(state, geom);
    let i1 = polar_inertia(&DiagonalTensor::from_array(tensors.link1), &b.e_theta1);
    let i2 = polar_inertia(&DiagonalTensor::from_array(tensors.link2), &b.e_theta12)
        + actuator_polar_inertia(state, geom.rod_radius, rho);
    let j_eq = equivalent_azimuthal_inertia(state, tensors, geom.rod_radius, rho);
    (i1, i2, j_eq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RobotParams;
    use approx::assert_relative_eq;
    use nalgebra::Vector4;
    use rand::{Rng, SeedableRng};

    #[test]
    fn polar_inertia_axis_cases() {
        let t = DiagonalTensor::new(0.021, 0.024, 0.005);
        assert_eq!(polar_inertia(&t, &Vector3::x()), t.ixx);
        // e_theta1 at theta1 = 0, phi = 0 is the x axis
        let p = RobotParams::reference();
        let s = JointState::at_rest(Vector4::zeros());
        let b = unit_vectors(&s, &p.geometry);
        assert_relative_eq!(polar_inertia(&t, &b.e_theta1), t.ixx, epsilon = 1e-12);
        // at theta1 = pi/2 it is -z
        let s = JointState::at_rest(Vector4::new(0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0));
        let b = unit_vectors(&s, &p.geometry);
        assert_relative_eq!(polar_inertia(&t, &b.e_theta1), t.izz, epsilon = 1e-12);
    }

    /// Midpoint-rule triple integral over the cylinder, the independent route
    /// for the analytic tensor.
    fn numeric_cylinder_tensor(len: f64, radius: f64, rho: f64) -> [f64; 3] {
        let (nr, na, nz) = (60, 60, 60);
        let mut ixx = 0.0;
        let mut iyy = 0.0;
        let mut izz = 0.0;
        for ir in 0..nr {
            let r = (ir as f64 + 0.5) / nr as f64 * radius;
            for ia in 0..na {
                let a = (ia as f64 + 0.5) / na as f64 * std::f64::consts::TAU;
                for iz in 0..nz {
                    let z = -len / 2.0 + (iz as f64 + 0.5) / nz as f64 * len;
                    let (x, y) = (r * a.cos(), r * a.sin());
                    let dv = (radius / nr as f64)
                        * (std::f64::consts::TAU / na as f64)
                        * (len / nz as f64)
                        * r;
                    ixx += rho * (y * y + z * z) * dv;
                    iyy += rho * (x * x + z * z) * dv;
                    izz += rho * (x * x + y * y) * dv;
                }
            }
        }
        [ixx, iyy, izz]
    }

    #[test]
    fn actuator_tensor_matches_numeric_integral() {
        let (r, radius, rho) = (0.1, 0.01, 2700.0);
        let t = actuator_tensor(r, radius, rho).unwrap();
        let n = numeric_cylinder_tensor(r, radius, rho);
        assert_relative_eq!(t.ixx, n[0], max_relative = 1e-3);
        assert_relative_eq!(t.iyy, n[1], max_relative = 1e-3);
        assert_relative_eq!(t.izz, n[2], max_relative = 1e-3);
        // exact closed form
        assert_relative_eq!(
            t.ixx,
            std::f64::consts::PI / 12.0 * 1e-4 * 0.1 * 2700.0 * (3e-4 + 0.01),
            epsilon = 1e-15
        );
    }

    #[test]
    fn actuator_tensor_scaling_and_limits() {
        let t0 = actuator_tensor(0.1, 0.0, 2700.0).unwrap();
        assert_eq!((t0.ixx, t0.iyy, t0.izz), (0.0, 0.0, 0.0));
        let t1 = actuator_tensor(0.1, 0.01, 1000.0).unwrap();
        let t2 = actuator_tensor(0.1, 0.01, 2000.0).unwrap();
        assert_relative_eq!(2.0 * t1.ixx, t2.ixx, epsilon = 1e-15);
        assert_relative_eq!(2.0 * t1.izz, t2.izz, epsilon = 1e-15);
    }

    #[test]
    fn rod_polar_projection_routes_agree() {
        let p = RobotParams::reference();
        let (radius, rho) = (p.geometry.rod_radius, p.masses.rho_act);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s = JointState::at_rest(Vector4::new(
                rng.gen_range(1e-4..p.geometry.r_ext),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-3.0..3.0),
            ));
            let direct = actuator_polar_inertia(&s, radius, rho);
            let t = actuator_tensor(s.r(), radius, rho).unwrap();
            let b = unit_vectors(&s, &p.geometry);
            let projected = polar_inertia(&t, &b.e_theta12);
            assert_relative_eq!(direct, projected, max_relative = 1e-10);
        }
        // published coefficient: pi/12 = 0.2618 to 4 decimals
        assert!((std::f64::consts::PI / 12.0 - 0.2618).abs() < 5e-5);
    }

    #[test]
    fn rod_polar_flat_case_and_zero_limit() {
        let (radius, rho) = (0.01, 2700.0);
        let s = JointState::at_rest(Vector4::new(0.08, 0.4, -0.4, 1.0));
        // theta12 = 0: reduces to the transverse entry
        let got = actuator_polar_inertia(&s, radius, rho);
        let r2: f64 = radius * radius;
        assert_relative_eq!(
            got,
            std::f64::consts::PI / 12.0 * r2 * 0.08 * rho * (3.0 * r2 + 0.08f64.powi(2)),
            epsilon = 1e-15
        );
        let s0 = JointState::at_rest(Vector4::new(0.0, 0.4, 0.2, 0.0));
        assert_eq!(actuator_polar_inertia(&s0, radius, rho), 0.0);
    }

    #[test]
    fn azimuthal_inertia_identities() {
        let p = RobotParams::reference();
        let t = &p.inertia;
        let (radius, rho) = (p.geometry.rod_radius, p.masses.rho_act);
        let r: f64 = 0.06;
        let ixx_sum: f64 = t.base_frame[0] + t.link1[0] + t.link2[0];
        let iyy_sum: f64 = t.base_frame[1] + t.link1[1] + t.link2[1];
        let rod = std::f64::consts::PI / 12.0 * radius * radius * r.powi(3) * rho
            + std::f64::consts::FRAC_PI_4 * radius.powi(4) * r * rho;

        let at = |phi: f64| {
            let s = JointState::at_rest(Vector4::new(r, 0.3, 0.2, phi));
            equivalent_azimuthal_inertia(&s, t, radius, rho)
        };
        assert_relative_eq!(at(0.0), ixx_sum + rod, epsilon = 1e-12);
        assert_relative_eq!(at(std::f64::consts::FRAC_PI_2), iyy_sum + rod, epsilon = 1e-12);
        // complementary angles sum to Ixx + Iyy after removing the rod terms
        let phi = 0.7;
        assert_relative_eq!(
            at(phi) + at(phi + std::f64::consts::FRAC_PI_2) - 2.0 * rod,
            ixx_sum + iyy_sum,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rotation_preserves_eigenvalues() {
        let orient = CadOrientation::from_degrees(12.0, -31.0, 57.0);
        let t = DiagonalTensor::new(0.3, 0.7, 1.1).to_matrix();
        let rotated = cad_to_dynamic(&t, &orient);
        let mut eig: Vec<f64> = rotated.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip([0.3, 0.7, 1.1]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert_relative_eq!(rotated.trace(), t.trace(), epsilon = 1e-12);
        // identity orientation leaves the tensor unchanged
        let id = CadOrientation::from_degrees(0.0, 0.0, 0.0);
        assert_relative_eq!(cad_to_dynamic(&t, &id), t, epsilon = 1e-15);
    }

    #[test]
    fn parallel_axis_cases() {
        let t = DiagonalTensor::new(0.1, 0.2, 0.3).to_matrix();
        // zero offset: identity
        assert_relative_eq!(
            parallel_axis(&t, 2.0, &Vector3::zeros(), false),
            t,
            epsilon = 1e-15
        );
        // offset along x adds m d^2 to Iyy and Izz only
        let shifted = parallel_axis(&t, 2.0, &Vector3::new(0.5, 0.0, 0.0), true);
        assert_relative_eq!(shifted[(0, 0)], 0.1, epsilon = 1e-15);
        assert_relative_eq!(shifted[(1, 1)], 0.2 + 0.5, epsilon = 1e-15);
        assert_relative_eq!(shifted[(2, 2)], 0.3 + 0.5, epsilon = 1e-15);
        // shift never decreases a diagonal entry
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let d = Vector3::new(
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
            );
            let s = parallel_axis(&t, rng.gen_range(0.0..5.0), &d, false);
            for i in 0..3 {
                assert!(s[(i, i)] >= t[(i, i)] - 1e-15);
            }
        }
    }
}
