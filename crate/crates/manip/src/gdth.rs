//! Gradient-descent time-horizon estimator.
//!
//! Given a Cartesian grasp target and a link-1 height target, the estimator
//! iterates the joint coordinates under a momentum gradient descent on the
//! operational-space-weighted error terms, clamps every rate to the
//! actuator's no-load speed, freezes each joint once it is stationary inside
//! its tolerance band (recording the freeze time as that joint's horizon),
//! and rolls back overshooting steps while decaying their learning rate.
//!
//! The weighted errors embed the rigid-body physics through the
//! operational-space inertia: directions in which the arm is dynamically
//! weak are penalized harder, which keeps the descent away from
//! near-singular postures. The radial stage is slow hardware (mm/s); its
//! rate is withheld until the angular joints have settled, which mirrors the
//! actuator's timescale and keeps the slow joint from locking the descent
//! into boundary minima.

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};

use crate::dynamics::{gravity_gradient, mass_matrix, rbd_hamiltonian};
use crate::kinematics::{
    body_positions, fk_ee, link1_z_scale, velocity_jacobians, JointState,
};
use crate::params::RobotParams;
use crate::structural::closed_form_u_phi0;
use crate::{joint, Result, DOF};

/// Fraction of the no-load speed below which a far joint counts as stalled
/// and is re-engaged toward its target.
const RESCUE_FRACTION: f64 = 0.05;
/// Rates are capped so one step covers at most this fraction of the joint's
/// remaining distance.
const NEWTON_THROTTLE: f64 = 0.5;
/// Restart postures (theta1, theta2) tried when a descent stalls outside
/// tolerance; the radial seed switches to mid-stroke for the last two.
const RESTART_SEEDS: [(f64, f64); 3] = [(0.6, -0.3), (0.9, 0.9), (0.3, 1.2)];
const MIDSTROKE_SEEDS: [(f64, f64); 2] = [(0.6, 0.3), (1.2, 0.9)];

/// A Cartesian objective for the estimator.
#[derive(Debug, Clone, Copy)]
pub struct GdthTarget {
    /// Grasp-point target, m.
    pub ee_target: Vector3<f64>,
    /// Link-1 height target (tip-height convention unless raw mode), m.
    pub z1_target: f64,
    /// Payload carried during the move, kg.
    pub m_obj: f64,
    /// End-effector error below which the run counts as converged, m.
    pub tolerance: f64,
}

impl GdthTarget {
    pub fn new(ee_target: Vector3<f64>, z1_target: f64, m_obj: f64) -> Self {
        Self {
            ee_target,
            z1_target,
            m_obj,
            tolerance: 25.4e-3,
        }
    }
}

/// Inverse-operational-inertia weights for the error terms, 1/kg.
#[derive(Debug, Clone, Copy)]
pub struct SpatialWeights {
    pub ee: [f64; 3],
    pub link1: [f64; 3],
    /// The link-1 operational inertia is structurally rank-deficient (the
    /// link moves on a sphere), so its weights always come from the
    /// regularized pseudo-inverse.
    pub degenerate: bool,
}

/// One recorded descent iteration.
#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub time: f64,
    pub q: Vector4<f64>,
    /// Full cost of Eq-style functional: Hamiltonian plus weighted errors.
    pub cost: f64,
    pub ee_error: f64,
}

/// Estimator output.
#[derive(Debug, Clone)]
pub struct GdthResult {
    /// Converged joint configuration.
    pub q_star: Vector4<f64>,
    /// Per-joint arrival times, s (freeze time, or the exit time for joints
    /// that never froze).
    pub horizons: [f64; DOF],
    /// Total descent iterations across restarts.
    pub iterations: usize,
    /// Iteration log of the reported attempt.
    pub trace: Vec<TracePoint>,
    /// Final end-effector error is within the target tolerance.
    pub converged: bool,
    pub final_ee_error: f64,
    /// Joints whose initial torque exceeded the stall limit.
    pub stall_warnings: [bool; DOF],
}

/// Operational-space inertia at a task Jacobian: (J M^-1 J^T)^-1.
///
/// Returns the (possibly regularized) inertia and a degeneracy flag set when
/// the task mobility matrix J M^-1 J^T is singular to working precision.
pub fn operational_inertia(
    jacobian: &Matrix3x4<f64>,
    mass: &nalgebra::Matrix4<f64>,
) -> (Matrix3<f64>, bool) {
    let m_inv = mass
        .clone_owned()
        .try_inverse()
        .expect("mass matrix is SPD");
    let mobility = jacobian * m_inv * jacobian.transpose();
    let svd = mobility.svd(true, true);
    let max_sv = svd.singular_values.max();
    let degenerate = svd.singular_values.min() <= 1e-9 * max_sv.max(1e-30);
    let pinv = svd
        .pseudo_inverse(1e-9 * max_sv.max(1e-30))
        .expect("svd computed with u and v");
    (pinv, degenerate)
}

/// Weights beta_i = 1 / (|Lambda_ii| + epsilon) for the end-effector and
/// link-1 inertias.
pub fn weight_calculation(state: &JointState, params: &RobotParams) -> SpatialWeights {
    let m = mass_matrix(state, params);
    let jac = velocity_jacobians(state, &params.geometry);
    let (lam_ee, deg_ee) = operational_inertia(&jac.s_obj, &m);
    let (lam_1, deg_1) = operational_inertia(&jac.s1, &m);
    let eps = params.gdth.epsilon_lambda;
    let weight = |lam: &Matrix3<f64>, i: usize| 1.0 / (lam[(i, i)].abs() + eps);
    SpatialWeights {
        ee: [weight(&lam_ee, 0), weight(&lam_ee, 1), weight(&lam_ee, 2)],
        link1: [weight(&lam_1, 0), weight(&lam_1, 1), weight(&lam_1, 2)],
        degenerate: deg_ee || deg_1,
    }
}

/// The two task errors: Cartesian grasp error and the link-1 height error.
fn task_errors(state: &JointState, target: &GdthTarget, params: &RobotParams) -> (Vector3<f64>, f64) {
    let e_ee = fk_ee(state, &params.geometry) - target.ee_target;
    let z1 = body_positions(state, &params.geometry).s1.z;
    let e_z1 = if params.gdth.raw_z1_error {
        z1 - target.z1_target
    } else {
        z1 - link1_z_scale(&params.geometry) * target.z1_target
    };
    (e_ee, e_z1)
}

/// Weighted error part of the cost: 1/2 e_EE^T R_EE e_EE + 1/2 e_1^T R_1 e_1,
/// where e_1 carries the link-1 height error in its z slot.
fn error_cost(e_ee: &Vector3<f64>, e_z1: f64, w: &SpatialWeights) -> f64 {
    let ee: f64 = (0..3).map(|i| 0.5 * w.ee[i] * e_ee[i] * e_ee[i]).sum();
    ee + 0.5 * w.link1[2] * e_z1 * e_z1
}

/// Full cost functional: rigid-body Hamiltonian plus the weighted errors.
pub fn cost(
    state: &JointState,
    target: &GdthTarget,
    weights: &SpatialWeights,
    params: &RobotParams,
    rest: &Vector4<f64>,
) -> f64 {
    let (e_ee, e_z1) = task_errors(state, target, params);
    rbd_hamiltonian(state, params, rest) + error_cost(&e_ee, e_z1, weights)
}

/// Gradient of the full cost with respect to q: the error part by the chain
/// rule through the task Jacobians, the Hamiltonian part from the gravity
/// gradient, the elastic gradient and the configuration dependence of the
/// mass matrix.
pub fn cost_gradient(
    state: &JointState,
    target: &GdthTarget,
    weights: &SpatialWeights,
    params: &RobotParams,
    rest: &Vector4<f64>,
) -> Vector4<f64> {
    let mut grad = descent_terms(state, target, weights, params).gradient;
    grad += gravity_gradient(state, params);
    grad += crate::dynamics::elastic_gradient(state, params, rest);
    // dT/dq_i = 1/2 qd^T dM/dq_i qd, via the same central differences the
    // Coriolis assembly uses.
    if state.qdot.norm_squared() > 0.0 {
        for i in 0..DOF {
            let h = 1e-6 * state.q[i].abs().max(1.0);
            let mut qp = state.q;
            let mut qm = state.q;
            qp[i] += h;
            qm[i] -= h;
            let tp = 0.5
                * state
                    .qdot
                    .dot(&(mass_matrix(&JointState::new(qp, state.qdot), params) * state.qdot));
            let tm = 0.5
                * state
                    .qdot
                    .dot(&(mass_matrix(&JointState::new(qm, state.qdot), params) * state.qdot));
            grad[i] += (tp - tm) / (2.0 * h);
        }
    }
    grad
}

/// Error-term gradient plus the per-joint Gauss-Newton data the descent
/// loop consumes.
struct DescentTerms {
    /// Gradient of the weighted error cost.
    gradient: Vector4<f64>,
    /// Signed per-joint Newton steps g_j / h_jj: the distance from each
    /// joint to its conditional stationary point (the joint-space error the
    /// freeze and rollback checks act on).
    e_gen: Vector4<f64>,
    ee_error_norm: f64,
}

fn descent_terms(
    state: &JointState,
    target: &GdthTarget,
    weights: &SpatialWeights,
    params: &RobotParams,
) -> DescentTerms {
    let jac = velocity_jacobians(state, &params.geometry);
    let (e_ee, e_z1) = task_errors(state, target, params);
    let j_ee = &jac.s_obj;
    let j1_z = jac.s1.row(2);
    let mut gradient = Vector4::zeros();
    let mut curvature = Vector4::zeros();
    for col in 0..DOF {
        let mut g = 0.0;
        let mut h = 0.0;
        for row in 0..3 {
            g += weights.ee[row] * e_ee[row] * j_ee[(row, col)];
            h += weights.ee[row] * j_ee[(row, col)] * j_ee[(row, col)];
        }
        g += weights.link1[2] * e_z1 * j1_z[col];
        h += weights.link1[2] * j1_z[col] * j1_z[col];
        gradient[col] = g;
        curvature[col] = h;
    }
    let e_gen = Vector4::from_fn(|i, _| gradient[i] / curvature[i].max(1e-12));
    DescentTerms {
        gradient,
        e_gen,
        ee_error_norm: e_ee.norm(),
    }
}

/// Initial torque estimate: the gravity gradient on (r, theta1, theta2) plus
/// the structural azimuthal holding torque.
pub fn initial_torque(state: &JointState, params: &RobotParams) -> Result<Vector4<f64>> {
    let g = gravity_gradient(state, params);
    let u_phi0 = closed_form_u_phi0(state, &params.masses, &params.gear, &params.geometry)?;
    Ok(Vector4::new(g[joint::R], g[joint::THETA1], g[joint::THETA2], u_phi0))
}

/// Torque-headroom-scaled no-load launch rates:
/// v0_j = bound_j * sign_j * max(0, 1 - |tau0_j| / stall_j).
/// The radial bound already carries the mass ratio. Joints with no headroom
/// are flagged stalled and receive zero.
pub fn initial_velocity(
    direction: &[f64; DOF],
    tau0: &Vector4<f64>,
    params: &RobotParams,
) -> (Vector4<f64>, [bool; DOF]) {
    let bounds = params.rate_bounds();
    let mut v = Vector4::zeros();
    let mut stalled = [false; DOF];
    for i in 0..DOF {
        let headroom = 1.0 - tau0[i].abs() / params.derived.stall_limit[i];
        if headroom <= 0.0 {
            stalled[i] = true;
        } else {
            v[i] = bounds[i] * direction[i].signum() * headroom;
            if direction[i] == 0.0 {
                v[i] = 0.0;
            }
        }
    }
    (v, stalled)
}

/// Clamp rates to the per-joint no-load bounds, preserving sign.
pub fn clamp_controls(qdot: &Vector4<f64>, params: &RobotParams) -> Vector4<f64> {
    let bounds = params.rate_bounds();
    Vector4::from_fn(|i, _| qdot[i].clamp(-bounds[i], bounds[i]))
}

/// Joint-space box derived from the stroke and the configured angle ranges.
fn joint_box(params: &RobotParams) -> ([f64; DOF], [f64; DOF]) {
    let g = &params.gdth;
    (
        [0.0, g.theta1_range[0], g.theta2_range[0], f64::NEG_INFINITY],
        [
            params.geometry.r_ext,
            g.theta1_range[1],
            g.theta2_range[1],
            f64::INFINITY,
        ],
    )
}

struct Attempt {
    q: Vector4<f64>,
    horizons: [f64; DOF],
    iterations: usize,
    trace: Vec<TracePoint>,
    frozen: [bool; DOF],
    ee_error: f64,
    stall_warnings: [bool; DOF],
}

/// One descent from a fixed seed posture.
fn descend(
    target: &GdthTarget,
    initial: &JointState,
    params: &RobotParams,
    rest: &Vector4<f64>,
) -> Result<Attempt> {
    let cfg = &params.gdth;
    let dt = cfg.dt;
    let tol = cfg.tolerances();
    let bounds = params.rate_bounds();
    let (lo, hi) = joint_box(params);

    let mut q = initial.q;
    for i in 0..DOF {
        q[i] = q[i].clamp(lo[i], hi[i]);
    }

    // torque-informed launch
    let tau0 = initial_torque(&JointState::at_rest(q), params)?;
    let mut headroom = [0.0; DOF];
    let mut stall_warnings = [false; DOF];
    for i in 0..DOF {
        headroom[i] = (1.0 - tau0[i].abs() / params.derived.stall_limit[i]).clamp(0.0, 1.0);
        stall_warnings[i] = headroom[i] == 0.0;
    }

    let throttle = |j: usize, v: f64, dist: f64| -> f64 {
        let lim = (bounds[j] * headroom[j]).min(NEWTON_THROTTLE * dist.abs() / dt + 1e-15);
        v.clamp(-lim, lim)
    };

    let mut weights = weight_calculation(&JointState::at_rest(q), params);
    let mut terms = descent_terms(&JointState::at_rest(q), target, &weights, params);
    let mut e_prev = terms.e_gen;

    // angular joints launch toward their conditional targets; the radial
    // stage waits for the posture to settle
    let mut qdot = Vector4::zeros();
    for j in [joint::THETA1, joint::THETA2, joint::PHI] {
        let v = -e_prev[j].signum() * bounds[j] * headroom[j];
        qdot[j] = throttle(j, v, e_prev[j]);
    }

    let mut momentum = Vector4::zeros();
    let mut rollback_attenuation = [1.0; DOF];
    let mut frozen = [false; DOF];
    let mut horizons = [0.0; DOF];
    let mut streak = [0usize; DOF];
    let mut trace = Vec::new();
    let mut en = terms.ee_error_norm;
    let mut iterations = 0;

    for i in 1..=cfg.max_iter {
        iterations = i;
        let t = i as f64 * dt;
        let alpha =
            Vector4::from_fn(|j, _| cfg.alpha0[j] / (1.0 + cfg.eta * t) * rollback_attenuation[j]);

        weights = weight_calculation(&JointState::new(q, qdot), params);
        terms = descent_terms(&JointState::at_rest(q), target, &weights, params);
        for j in 0..DOF {
            momentum[j] =
                cfg.momentum_beta[j] * momentum[j] + (1.0 - cfg.momentum_beta[j]) * terms.gradient[j];
        }

        // Euler prediction, then the momentum update
        let x_minus = q + qdot * dt;
        let x_plus = x_minus - alpha.component_mul(&momentum);
        let mut vn = (x_plus - q) / dt;

        let angles_quiet = [joint::THETA1, joint::THETA2, joint::PHI]
            .into_iter()
            .all(|j| frozen[j] || e_prev[j].abs() <= tol[j]);
        for j in 0..DOF {
            if frozen[j] {
                vn[j] = 0.0;
                continue;
            }
            if j == joint::R && !angles_quiet {
                vn[j] = 0.0;
                continue;
            }
            // stall rescue: re-engage a stationary far joint at no-load speed
            if vn[j].abs() < RESCUE_FRACTION * bounds[j] && e_prev[j].abs() > tol[j] {
                vn[j] = -e_prev[j].signum() * bounds[j] * headroom[j];
            }
            vn[j] = throttle(j, vn[j], e_prev[j]);
        }

        let mut qn = q + vn * dt;
        for j in 0..DOF {
            if frozen[j] {
                qn[j] = q[j];
            }
            qn[j] = qn[j].clamp(lo[j], hi[j]);
        }

        let candidate = descent_terms(&JointState::at_rest(qn), target, &weights, params);
        let mut e_new = candidate.e_gen;
        en = candidate.ee_error_norm;

        for j in 0..DOF {
            if frozen[j] {
                e_new[j] = e_prev[j];
                continue;
            }
            let moved = (qn[j] - q[j]).abs() > 1e-15;
            let overshoot = moved
                && e_new[j] * e_prev[j] < 0.0
                && e_new[j].abs() > e_prev[j].abs() + 1e-15;
            let at_bound = (qn[j] <= lo[j] + 1e-12 && e_new[j] > 0.0)
                || (qn[j] >= hi[j] - 1e-12 && e_new[j] < 0.0);
            if overshoot {
                qn[j] = q[j];
                rollback_attenuation[j] /= 1.0 + cfg.eta * t;
                e_new[j] = e_prev[j];
                streak[j] = 0;
            } else if en <= cfg.freeze_gate && (e_new[j].abs() <= tol[j] || at_bound) {
                streak[j] += 1;
                if streak[j] >= cfg.freeze_streak {
                    frozen[j] = true;
                    horizons[j] = t;
                }
            } else {
                streak[j] = 0;
            }
        }

        qdot = (qn - q) / dt;
        q = qn;
        e_prev = e_new;

        let state = JointState::new(q, qdot);
        trace.push(TracePoint {
            time: t,
            q,
            cost: cost(&state, target, &weights, params, rest),
            ee_error: en,
        });

        if en <= cfg.exit_tol || frozen.iter().all(|f| *f) {
            break;
        }
    }

    let exit_time = iterations as f64 * dt;
    for j in 0..DOF {
        if !frozen[j] {
            horizons[j] = exit_time;
        }
    }
    Ok(Attempt {
        q,
        horizons,
        iterations,
        trace,
        frozen,
        ee_error: en,
        stall_warnings,
    })
}

/// Run the estimator: descend from the initial state, restarting from the
/// alternate seed postures if the descent parks outside tolerance, and
/// report the best attempt.
pub fn run(target: &GdthTarget, initial: &JointState, params: &RobotParams) -> Result<GdthResult> {
    let params = params.with_payload(target.m_obj);
    let rest = initial.q;
    let q0 = initial.q;
    let mid = params.geometry.r_ext / 2.0;

    let mut seeds: Vec<Vector4<f64>> = vec![q0];
    seeds.extend(
        RESTART_SEEDS
            .iter()
            .map(|(t1, t2)| Vector4::new(q0[joint::R], *t1, *t2, q0[joint::PHI])),
    );
    seeds.extend(
        MIDSTROKE_SEEDS
            .iter()
            .map(|(t1, t2)| Vector4::new(mid, *t1, *t2, q0[joint::PHI])),
    );

    let mut best: Option<Attempt> = None;
    let mut total_iterations = 0;
    for seed in seeds {
        let attempt = descend(target, &JointState::at_rest(seed), &params, &rest)?;
        total_iterations += attempt.iterations;
        let done = attempt.ee_error <= params.gdth.exit_tol
            || (attempt.ee_error <= target.tolerance && attempt.frozen.iter().all(|f| *f));
        let better = best
            .as_ref()
            .map_or(true, |b| attempt.ee_error < b.ee_error);
        if better {
            best = Some(attempt);
        }
        if done {
            break;
        }
    }
    let best = best.expect("at least one attempt runs");
    Ok(GdthResult {
        q_star: best.q,
        horizons: best.horizons,
        iterations: total_iterations,
        trace: best.trace,
        converged: best.ee_error <= target.tolerance,
        final_ee_error: best.ee_error,
        stall_warnings: best.stall_warnings,
    })
}
