//! Numeric rigid-body dynamics in the standard manipulator form
//! M(q) qdd + C(q, qd) qd + G(q) + grad V_e(q) + B qd = U.
//!
//! Nothing here transcribes the closed-form torque expansions; the mass
//! matrix is assembled from body Jacobians and the state-coupled polar
//! inertias, the Coriolis matrix from Christoffel symbols of M with
//! finite-difference partials, and the whole chain is certified against an
//! independent finite-difference Euler-Lagrange oracle in the test suite.

use nalgebra::{Matrix4, Vector4};

use crate::inertia::rotational_channels;
use crate::kinematics::{body_positions, velocity_jacobians, JointState};
use crate::params::RobotParams;
use crate::{joint, Error, Result, DOF, GRAVITY};

/// Energy components of a state, J (dissipation rate in W).
#[derive(Debug, Clone, Copy)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub gravitational: f64,
    pub elastic: f64,
    /// Instantaneous Rayleigh dissipation rate 2R = qd^T B qd.
    pub dissipation_rate: f64,
}

/// Masses paired with the moving bodies, in `BodyPositions::points` order.
/// The base frame moves only azimuthally; its mass still contributes
/// kinetic energy through J_s0 but no gravity gradient.
fn body_masses(params: &RobotParams) -> [f64; 5] {
    let m = &params.masses;
    [m.m_bf, m.m1, m.m2, m.m_act, m.grasp_mass()]
}

/// Kinetic energy: translational body terms plus the three rotational
/// channels (theta1, theta1+theta2 including the rod, azimuth).
pub fn kinetic_energy(state: &JointState, params: &RobotParams) -> f64 {
    0.5 * (state.qdot.dot(&(mass_matrix(state, params) * state.qdot)))
}

/// Gravitational and elastic potential energy. The base-frame term is
/// constant in q and therefore excluded.
pub fn potential_energy(
    state: &JointState,
    params: &RobotParams,
    rest: &Vector4<f64>,
) -> (f64, f64) {
    let p = body_positions(state, &params.geometry);
    let m = &params.masses;
    let v_g = GRAVITY
        * (m.m1 * p.s1.z + m.m2 * p.s2.z + m.m_act * p.s_act.z + m.grasp_mass() * p.s_obj.z);
    let mut v_e = 0.0;
    for i in 0..DOF {
        let d = state.q[i] - rest[i];
        v_e += 0.5 * params.derived.kappa[i] * d * d;
    }
    (v_g, v_e)
}

/// Configuration-dependent mass matrix.
pub fn mass_matrix(state: &JointState, params: &RobotParams) -> Matrix4<f64> {
    let jac = velocity_jacobians(state, &params.geometry);
    let masses = body_masses(params);
    let mut m = Matrix4::zeros();
    for (mass, j) in masses.iter().zip(jac.jacobians()) {
        m += *mass * j.transpose() * *j;
    }
    let (i1, i2, j_eq) = rotational_channels(
        state,
        &params.inertia,
        &params.geometry,
        params.masses.rho_act,
    );
    m[(joint::THETA1, joint::THETA1)] += i1;
    for a in [joint::THETA1, joint::THETA2] {
        for b in [joint::THETA1, joint::THETA2] {
            m[(a, b)] += i2;
        }
    }
    m[(joint::PHI, joint::PHI)] += j_eq;
    m
}

/// Finite-difference step for dM/dq_i.
fn partial_step(qi: f64) -> f64 {
    1e-6 * qi.abs().max(1.0)
}

/// dM/dq_i by central differences.
fn mass_matrix_partial(state: &JointState, params: &RobotParams, i: usize) -> Matrix4<f64> {
    let h = partial_step(state.q[i]);
    let mut qp = state.q;
    let mut qm = state.q;
    qp[i] += h;
    qm[i] -= h;
    let mp = mass_matrix(&JointState::at_rest(qp), params);
    let mm = mass_matrix(&JointState::at_rest(qm), params);
    (mp - mm) / (2.0 * h)
}

/// Coriolis matrix from Christoffel symbols of the mass matrix:
/// C_kj = 1/2 sum_i (dM_kj/dq_i + dM_ki/dq_j - dM_ij/dq_k) qd_i.
pub fn coriolis_matrix(state: &JointState, params: &RobotParams) -> Matrix4<f64> {
    let partials: [Matrix4<f64>; DOF] =
        std::array::from_fn(|i| mass_matrix_partial(state, params, i));
    let qd = state.qdot;
    let mut c = Matrix4::zeros();
    for k in 0..DOF {
        for j in 0..DOF {
            let mut sum = 0.0;
            for i in 0..DOF {
                sum += (partials[i][(k, j)] + partials[j][(k, i)] - partials[k][(i, j)]) * qd[i];
            }
            c[(k, j)] = 0.5 * sum;
        }
    }
    c
}

/// Analytic gravity gradient G = dV_g/dq. The azimuthal component is
/// identically zero: gravity exerts no generalized force on phi.
pub fn gravity_gradient(state: &JointState, params: &RobotParams) -> Vector4<f64> {
    let g = &params.geometry;
    let m = &params.masses;
    let (t1, t12) = (state.theta1(), state.theta12());
    let (s1, s12) = (t1.sin(), t12.sin());
    let grasp = m.grasp_mass();
    let l_obj = g.grasp_length(state.r());
    let l_act = g.l2 + state.r();

    let g_r = GRAVITY * t12.cos() * (grasp + m.m_act);
    let g_t1 = -GRAVITY
        * (grasp * (s12 * l_obj + g.l1 * s1)
            + m.m_act * (s12 * l_act + g.l1 * s1)
            + m.m2 * (g.lbar2 * s12 + g.l1 * s1)
            + g.lbar1 * m.m1 * s1);
    let g_t2 = -GRAVITY
        * (m.m_act * s12 * l_act + g.lbar2 * m.m2 * s12 + grasp * s12 * l_obj);
    Vector4::new(g_r, g_t1, g_t2, 0.0)
}

/// Elastic gradient kappa .* (q - q0).
pub fn elastic_gradient(state: &JointState, params: &RobotParams, rest: &Vector4<f64>) -> Vector4<f64> {
    Vector4::from_fn(|i, _| params.derived.kappa[i] * (state.q[i] - rest[i]))
}

/// Viscous damping force B qd.
pub fn damping_force(state: &JointState, params: &RobotParams) -> Vector4<f64> {
    Vector4::from_fn(|i, _| params.derived.damping[i] * state.qdot[i])
}

/// Full energy breakdown at a state.
pub fn energy_breakdown(
    state: &JointState,
    params: &RobotParams,
    rest: &Vector4<f64>,
) -> EnergyBreakdown {
    let (v_g, v_e) = potential_energy(state, params, rest);
    EnergyBreakdown {
        kinetic: kinetic_energy(state, params),
        gravitational: v_g,
        elastic: v_e,
        dissipation_rate: state
            .qdot
            .iter()
            .enumerate()
            .map(|(i, qd)| params.derived.damping[i] * qd * qd)
            .sum(),
    }
}

/// Generalized forces for a prescribed acceleration:
/// U = M qdd + C qd + G + grad V_e + B qd.
pub fn inverse_dynamics(
    state: &JointState,
    qddot: &Vector4<f64>,
    params: &RobotParams,
    rest: &Vector4<f64>,
) -> Vector4<f64> {
    mass_matrix(state, params) * qddot
        + coriolis_matrix(state, params) * state.qdot
        + gravity_gradient(state, params)
        + elastic_gradient(state, params, rest)
        + damping_force(state, params)
}

/// Rigid-body Hamiltonian H = T + V_g + V_e.
pub fn rbd_hamiltonian(state: &JointState, params: &RobotParams, rest: &Vector4<f64>) -> f64 {
    let (v_g, v_e) = potential_energy(state, params, rest);
    kinetic_energy(state, params) + v_g + v_e
}

/// One sample of a forward integration.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub time: f64,
    pub state: JointState,
    /// The control applied over [time, time + dt).
    pub control: Vector4<f64>,
}

/// Explicit-Euler forward integration of qdd = M^{-1} (U - C qd - G - grad V_e - B qd).
///
/// `control` is sampled at the step start (zero-order hold). Returns the
/// state at every step boundary including t = 0 and t = horizon.
pub fn forward_integrate(
    initial: &JointState,
    mut control: impl FnMut(f64, &JointState) -> Vector4<f64>,
    dt: f64,
    horizon: f64,
    params: &RobotParams,
    rest: &Vector4<f64>,
) -> Result<Vec<TrajectorySample>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be > 0"));
    }
    let steps = (horizon / dt).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = *initial;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let u = control(t, &s);
        out.push(TrajectorySample {
            time: t,
            state: s,
            control: u,
        });
        if k == steps {
            break;
        }
        let m = mass_matrix(&s, params);
        let rhs = u - coriolis_matrix(&s, params) * s.qdot
            - gravity_gradient(&s, params)
            - elastic_gradient(&s, params, rest)
            - damping_force(&s, params);
        let qdd = m.lu().solve(&rhs).ok_or(Error::Integration {
            time: t,
            reason: format!("singular mass matrix at q = {:?}", s.q),
        })?;
        s = JointState::new(s.q + s.qdot * dt, s.qdot + qdd * dt);
    }
    Ok(out)
}
