//! Gearshaft reaction equilibrium for the azimuthal drive.
//!
//! Gravity exerts no generalized force on the azimuth, so the holding torque
//! comes from a static reaction analysis at the gearshaft: six equilibrium
//! equations in the unknowns (A_x, A_y, u_phi0, B_x, B_y, B_z). The module
//! provides the matrix solve, the closed-form holding torque (the dual route
//! the tests compare against), workspace torque surfaces and the critical
//! payload search.

use nalgebra::{Matrix6, Vector6};

use crate::kinematics::{body_positions, JointState};
use crate::params::{GearTrainParams, GeometryParams, MassParams};
use crate::{Error, Result, GRAVITY};

/// Reactions at the gearshaft, N and N*m.
#[derive(Debug, Clone, Copy)]
pub struct ReactionSolution {
    pub a_x: f64,
    pub a_y: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub b_z: f64,
    /// Azimuthal holding torque.
    pub u_phi0: f64,
    /// Max absolute residual of the six equilibrium equations.
    pub residual: f64,
}

/// Weighted position sums that drive the moment equations.
struct LoadSums {
    /// sum of m_i * x_i over all bodies (claw + payload combined).
    sx: f64,
    /// sum of m_i * y_i.
    sy: f64,
    /// total supported weight mass.
    total: f64,
}

fn load_sums(state: &JointState, masses: &MassParams, geom: &GeometryParams) -> LoadSums {
    let p = body_positions(state, geom);
    let ms = [
        masses.m_bf,
        masses.m1,
        masses.m2,
        masses.m_act,
        masses.grasp_mass(),
    ];
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (m, s) in ms.iter().zip(p.points()) {
        sx += m * s.x;
        sy += m * s.y;
    }
    LoadSums {
        sx,
        sy,
        total: ms.iter().sum(),
    }
}

/// Assemble the 6x6 stiffness matrix and load vector of the equilibrium
/// system K * (A_x, A_y, u_phi0, B_x, B_y, B_z) = q.
pub fn assemble_system(
    state: &JointState,
    masses: &MassParams,
    gear: &GearTrainParams,
    geom: &GeometryParams,
) -> (Matrix6<f64>, Vector6<f64>) {
    let s = load_sums(state, masses, geom);
    let a = gear.g_p / gear.r_avg;
    let tan_psi = gear.psi.tan();
    let tan_phi = gear.varphi.tan();

    #[rustfmt::skip]
    let k = Matrix6::new(
        // Fx:      Ax   Ay   u                      Bx          By        Bz
        1.0, 0.0, -a * tan_psi,                      1.0,        0.0,      0.0,
        // Mx
        0.0, 0.0,  a * gear.h_w,                     0.0,        gear.cap_h_w, gear.l_gy,
        // Fy
        0.0, 1.0,  a,                                0.0,        1.0,      0.0,
        // My
        0.0, 0.0,  gear.g_p * tan_phi + a * gear.h_w * tan_psi, -gear.cap_h_w, 0.0, -gear.l_gx,
        // Fz
        0.0, 0.0, -a * tan_phi,                      0.0,        0.0,      1.0,
        // Mz
        0.0, 0.0,  gear.g_p,                        -gear.l_gy,  gear.l_gx, 0.0,
    );
    let q = Vector6::new(
        0.0,
        GRAVITY * s.sy,
        0.0,
        -GRAVITY * s.sx,
        GRAVITY * s.total,
        0.0,
    );
    (k, q)
}

/// Solve the equilibrium system for all six reactions.
pub fn solve_reactions(
    state: &JointState,
    masses: &MassParams,
    gear: &GearTrainParams,
    geom: &GeometryParams,
) -> Result<ReactionSolution> {
    let (k, q) = assemble_system(state, masses, gear, geom);
    let r = k.lu().solve(&q).ok_or(Error::Singular {
        context: "gearshaft equilibrium (degenerate gear geometry)",
    })?;
    let residual = (k * r - q).amax();
    Ok(ReactionSolution {
        a_x: r[0],
        a_y: r[1],
        u_phi0: r[2],
        b_x: r[3],
        b_y: r[4],
        b_z: r[5],
        residual,
    })
}

/// Closed-form holding torque:
/// u_phi0 = R_avg g (l_Gx sum(m y) - l_Gy sum(m x)) / (G_p (h_w l_Gx - H_w R_avg + R_avg l_Gy tan(varphi) + h_w l_Gy tan(psi))).
pub fn closed_form_u_phi0(
    state: &JointState,
    masses: &MassParams,
    gear: &GearTrainParams,
    geom: &GeometryParams,
) -> Result<f64> {
    let denom = gear.u_phi0_denominator();
    if denom.abs() < 1e-12 {
        return Err(Error::param(
            "gear",
            "holding-torque denominator vanishes for this geometry",
        ));
    }
    let s = load_sums(state, masses, geom);
    Ok(gear.r_avg * GRAVITY * (gear.l_gx * s.sy - gear.l_gy * s.sx) / denom)
}

/// The holding torque as an affine function of the payload mass at a fixed
/// pose: u(m) = intercept + slope * m.
pub fn u_phi0_affine(
    state: &JointState,
    masses: &MassParams,
    gear: &GearTrainParams,
    geom: &GeometryParams,
) -> Result<(f64, f64)> {
    let mut unloaded = masses.clone();
    unloaded.m_obj = 0.0;
    let intercept = closed_form_u_phi0(state, &unloaded, gear, geom)?;
    let p = body_positions(state, geom);
    let denom = gear.u_phi0_denominator();
    let slope =
        gear.r_avg * GRAVITY * (gear.l_gx * p.s_obj.y - gear.l_gy * p.s_obj.x) / denom;
    Ok((intercept, slope))
}

/// Grid specification for the torque surfaces.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSpec {
    pub n_theta1: usize,
    pub n_theta2: usize,
    pub theta1_range: [f64; 2],
    pub theta2_range: [f64; 2],
    /// Radial extension held fixed over the sweep.
    pub r: f64,
    /// Azimuth held fixed over the sweep (the surfaces vary only the polar
    /// angles).
    pub phi: f64,
}

impl SurfaceSpec {
    /// The published sweep: [0, pi/2]^2 at full extension, phi = 0.
    pub fn workspace_default(geom: &GeometryParams, n: usize) -> Self {
        Self {
            n_theta1: n,
            n_theta2: n,
            theta1_range: [0.0, std::f64::consts::FRAC_PI_2],
            theta2_range: [0.0, std::f64::consts::FRAC_PI_2],
            r: geom.r_ext,
            phi: 0.0,
        }
    }

    pub fn theta1(&self, i: usize) -> f64 {
        lerp(self.theta1_range, i, self.n_theta1)
    }

    pub fn theta2(&self, j: usize) -> f64 {
        lerp(self.theta2_range, j, self.n_theta2)
    }

    fn validate(&self) -> Result<()> {
        if self.n_theta1 < 2 || self.n_theta2 < 2 {
            return Err(Error::param("grid", "needs at least 2 nodes per axis"));
        }
        Ok(())
    }
}

fn lerp(range: [f64; 2], i: usize, n: usize) -> f64 {
    range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
}

/// |u_phi0| sampled over a (theta1, theta2) grid plus the stall plane.
#[derive(Debug, Clone)]
pub struct TorqueSurface {
    pub spec: SurfaceSpec,
    /// Row-major: values[i * n_theta2 + j] at (theta1_i, theta2_j).
    pub values: Vec<f64>,
    pub stall: f64,
}

impl TorqueSurface {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.n_theta2 + j]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Number of nodes where the surface pierces the stall plane.
    pub fn exceedances(&self) -> usize {
        self.values.iter().filter(|v| **v > self.stall).count()
    }
}

/// Sweep |u_phi0| over the grid for the given payload.
pub fn torque_surface(
    masses: &MassParams,
    gear: &GearTrainParams,
    geom: &GeometryParams,
    spec: &SurfaceSpec,
    stall: f64,
) -> Result<TorqueSurface> {
    spec.validate()?;
    let mut values = Vec::with_capacity(spec.n_theta1 * spec.n_theta2);
    for i in 0..spec.n_theta1 {
        for j in 0..spec.n_theta2 {
            let q = nalgebra::Vector4::new(spec.r, spec.theta1(i), spec.theta2(j), spec.phi);
            let state = JointState::at_rest(q);
            values.push(closed_form_u_phi0(&state, masses, gear, geom)?.abs());
        }
    }
    Ok(TorqueSurface {
        spec: *spec,
        values,
        stall,
    })
}

/// Critical payload outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    /// Stall reached at this payload mass, kg.
    Critical(f64),
    /// No payload reaches the stall plane; reports the largest |du/dm| seen.
    Unbounded { max_slope: f64 },
}

/// Direct critical-payload solve: u_phi0 is affine in the payload at every
/// node, so the first node to reach the stall plane gives the capacity.
pub fn payload_capacity(
    gear: &GearTrainParams,
    geom: &GeometryParams,
    masses: &MassParams,
    stall: f64,
    spec: &SurfaceSpec,
) -> Result<Capacity> {
    spec.validate()?;
    if !(stall > 0.0) {
        return Err(Error::param("stall", "must be > 0"));
    }
    let mut best: Option<f64> = None;
    let mut max_slope: f64 = 0.0;
    for i in 0..spec.n_theta1 {
        for j in 0..spec.n_theta2 {
            let q = nalgebra::Vector4::new(spec.r, spec.theta1(i), spec.theta2(j), spec.phi);
            let state = JointState::at_rest(q);
            let (a, b) = u_phi0_affine(&state, masses, gear, geom)?;
            max_slope = max_slope.max(b.abs());
            if a.abs() >= stall {
                // already at or past the plane with no payload
                return Ok(Capacity::Critical(0.0));
            }
            if b.abs() < 1e-15 {
                continue;
            }
            // smallest m >= 0 with |a + b m| = stall
            let m1 = (stall - a) / b;
            let m2 = (-stall - a) / b;
            let candidate = [m1, m2]
                .into_iter()
                .filter(|m| *m >= 0.0)
                .fold(f64::INFINITY, f64::min);
            if candidate.is_finite() {
                best = Some(best.map_or(candidate, |b: f64| b.min(candidate)));
            }
        }
    }
    Ok(match best {
        Some(m) => Capacity::Critical(m),
        None => Capacity::Unbounded { max_slope },
    })
}

/// Bisection route used as the verification oracle for the direct solve.
/// Brackets by doubling, then bisects max-over-grid |u| - stall to `tol` kg.
pub fn payload_capacity_bisect(
    gear: &GearTrainParams,
    geom: &GeometryParams,
    masses: &MassParams,
    stall: f64,
    spec: &SurfaceSpec,
    tol: f64,
) -> Result<Capacity> {
    spec.validate()?;
    let max_at = |m: f64| -> Result<f64> {
        let mut loaded = masses.clone();
        loaded.m_obj = m;
        Ok(torque_surface(&loaded, gear, geom, spec, stall)?.max())
    };
    if max_at(0.0)? >= stall {
        return Ok(Capacity::Critical(0.0));
    }
    let mut hi = 1.0;
    let mut doubled = 0;
    while max_at(hi)? < stall {
        hi *= 2.0;
        doubled += 1;
        if doubled > 30 {
            return Ok(Capacity::Unbounded { max_slope: 0.0 });
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if max_at(mid)? < stall {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Capacity::Critical(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RobotParams;
    use approx::assert_relative_eq;
    use nalgebra::Vector4;
    use rand::{Rng, SeedableRng};

    fn reference() -> RobotParams {
        RobotParams::reference()
    }

    fn rand_state(rng: &mut impl Rng, geom: &GeometryParams) -> JointState {
        JointState::at_rest(Vector4::new(
            rng.gen_range(0.0..geom.r_ext),
            rng.gen_range(-1.2..1.6),
            rng.gen_range(-1.2..1.8),
            rng.gen_range(-3.1..3.1),
        ))
    }

    #[test]
    fn zero_masses_give_zero_load() {
        let p = reference();
        let masses = MassParams {
            m_bf: 0.0,
            m0: 0.0,
            m1: 0.0,
            m2: 0.0,
            m_act: 0.0,
            rho_act: 1.0,
            m_obj: 0.0,
        };
        let s = JointState::at_rest(Vector4::new(0.05, 0.7, 0.3, 0.9));
        let (_, q) = assemble_system(&s, &masses, &p.gear, &p.geometry);
        assert_eq!(q.norm(), 0.0);
        let sol = solve_reactions(&s, &masses, &p.gear, &p.geometry).unwrap();
        assert!(sol.u_phi0.abs() < 1e-12);
    }

    #[test]
    fn bottom_row_is_state_independent() {
        let p = reference();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let s = rand_state(&mut rng, &p.geometry);
            let (k, _) = assemble_system(&s, &p.masses, &p.gear, &p.geometry);
            assert_eq!(k[(5, 0)], 0.0);
            assert_eq!(k[(5, 1)], 0.0);
            assert_relative_eq!(k[(5, 2)], p.gear.g_p);
            assert_relative_eq!(k[(5, 3)], -p.gear.l_gy);
            assert_relative_eq!(k[(5, 4)], p.gear.l_gx);
            assert_eq!(k[(5, 5)], 0.0);
        }
    }

    #[test]
    fn load_vector_moment_rows_are_weighted_sums() {
        let p = reference().with_payload(1.3);
        let s = JointState::at_rest(Vector4::new(0.04, 0.8, 0.4, 0.6));
        let (_, q) = assemble_system(&s, &p.masses, &p.gear, &p.geometry);
        let sums = load_sums(&s, &p.masses, &p.geometry);
        assert_relative_eq!(q[1], GRAVITY * sums.sy, epsilon = 1e-12);
        assert_relative_eq!(q[3], -GRAVITY * sums.sx, epsilon = 1e-12);
    }

    #[test]
    fn matrix_and_closed_form_agree() {
        let p = reference();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(32);
        for _ in 0..1000 {
            // random states AND random (valid) gear parameter draws
            let mut gear = p.gear.clone();
            gear.r_avg = rng.gen_range(0.01..0.08);
            gear.g_p = rng.gen_range(1.0..6.0);
            gear.h_w = rng.gen_range(0.01..0.10);
            gear.cap_h_w = rng.gen_range(0.05..0.20);
            gear.l_gx = rng.gen_range(0.01..0.10);
            gear.l_gy = rng.gen_range(0.01..0.10);
            gear.psi = rng.gen_range(-0.45..0.45);
            gear.varphi = rng.gen_range(-0.45..0.45);
            if gear.u_phi0_denominator().abs() < 1e-6 {
                continue;
            }
            let mut masses = p.masses.clone();
            masses.m_obj = rng.gen_range(0.0..8.0);
            let s = rand_state(&mut rng, &p.geometry);
            let sol = solve_reactions(&s, &masses, &gear, &p.geometry).unwrap();
            let cf = closed_form_u_phi0(&s, &masses, &gear, &p.geometry).unwrap();
            let scale = cf.abs().max(1e-6);
            assert!(
                (sol.u_phi0 - cf).abs() / scale <= 1e-10,
                "matrix {} vs closed form {cf}",
                sol.u_phi0
            );
            assert!(sol.residual <= 1e-9 * (GRAVITY * masses.grasp_mass()).max(1.0));
        }
    }

    #[test]
    fn centered_mass_layout_needs_no_torque() {
        let p = reference();
        // phi = pi/2 puts every body x at... not zero; instead use the
        // algebraic zero: sums vanish when all masses vanish except a body
        // placed on the torque-free line l_Gx*y = l_Gy*x.
        let mut masses = p.masses.clone();
        masses.m_bf = 0.0;
        masses.m0 = 1.0;
        masses.m1 = 0.0;
        masses.m2 = 0.0;
        masses.m_act = 0.0;
        // choose phi so the grasp point lies on the line: tan(phi) = l_Gy/l_Gx
        let phi = (p.gear.l_gy / p.gear.l_gx).atan();
        let s = JointState::at_rest(Vector4::new(0.05, 0.9, 0.4, phi));
        let u = closed_form_u_phi0(&s, &masses, &p.gear, &p.geometry).unwrap();
        assert!(u.abs() < 1e-12, "torque-free line violated: {u}");
    }

    #[test]
    fn holding_torque_is_affine_in_payload_and_gravity() {
        let p = reference();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..200 {
            let s = rand_state(&mut rng, &p.geometry);
            let (a, b) = u_phi0_affine(&s, &p.masses, &p.gear, &p.geometry).unwrap();
            let mut masses = p.masses.clone();
            masses.m_obj = 2.0;
            let u2 = closed_form_u_phi0(&s, &masses, &p.gear, &p.geometry).unwrap();
            masses.m_obj = 5.0;
            let u5 = closed_form_u_phi0(&s, &masses, &p.gear, &p.geometry).unwrap();
            // two-point slope equals the affine coefficient
            assert_relative_eq!((u5 - u2) / 3.0, b, max_relative = 1e-10, epsilon = 1e-13);
            assert_relative_eq!(a + 2.0 * b, u2, max_relative = 1e-10, epsilon = 1e-13);
        }
    }

    #[test]
    fn surface_monotone_in_payload_and_contains_worst_corner() {
        let p = reference();
        let spec = SurfaceSpec::workspace_default(&p.geometry, 9);
        let stall = p.derived.stall_limit[crate::joint::PHI];
        let m0 = torque_surface(&p.masses, &p.gear, &p.geometry, &spec, stall).unwrap();
        let loaded = p.with_payload(7.11);
        let m7 = torque_surface(&loaded.masses, &p.gear, &p.geometry, &spec, stall).unwrap();
        for (a, b) in m0.values.iter().zip(&m7.values) {
            assert!(b >= a, "payload monotonicity violated");
        }
        // refinement interpolates the coarse grid
        let fine = SurfaceSpec {
            n_theta1: 17,
            n_theta2: 17,
            ..spec
        };
        let mf = torque_surface(&p.masses, &p.gear, &p.geometry, &fine, stall).unwrap();
        for i in 0..spec.n_theta1 {
            for j in 0..spec.n_theta2 {
                assert_relative_eq!(m0.value(i, j), mf.value(2 * i, 2 * j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn capacity_routes_agree_and_match_reference() {
        let p = reference();
        let spec = SurfaceSpec::workspace_default(&p.geometry, 9);
        let stall = p.derived.stall_limit[crate::joint::PHI];
        let direct = payload_capacity(&p.gear, &p.geometry, &p.masses, stall, &spec).unwrap();
        let bisect =
            payload_capacity_bisect(&p.gear, &p.geometry, &p.masses, stall, &spec, 1e-4).unwrap();
        let (Capacity::Critical(md), Capacity::Critical(mb)) = (direct, bisect) else {
            panic!("expected bounded capacity, got {direct:?} / {bisect:?}");
        };
        assert!((md - mb).abs() <= 1e-3, "direct {md} vs bisect {mb}");
        // calibrated geometry pins the published capacity
        assert!((md - 6.80389).abs() < 0.01, "capacity {md}");
    }

    #[test]
    fn capacity_zero_when_already_stalled() {
        let p = reference();
        let spec = SurfaceSpec::workspace_default(&p.geometry, 5);
        let tiny_stall = 1e-6;
        let cap = payload_capacity(&p.gear, &p.geometry, &p.masses, tiny_stall, &spec).unwrap();
        assert_eq!(cap, Capacity::Critical(0.0));
    }

    #[test]
    fn capacity_monotone_in_stall() {
        let p = reference();
        let spec = SurfaceSpec::workspace_default(&p.geometry, 7);
        let cap_at = |stall: f64| match payload_capacity(&p.gear, &p.geometry, &p.masses, stall, &spec)
            .unwrap()
        {
            Capacity::Critical(m) => m,
            Capacity::Unbounded { .. } => f64::INFINITY,
        };
        assert!(cap_at(150.0) <= cap_at(233.4));
        assert!(cap_at(233.4) <= cap_at(400.0));
    }
}
