//! Closed-form minimum-acceleration trajectories per joint.
//!
//! Each coordinate is treated as an independent double integrator with a
//! quadratic acceleration cost; the stationarity conditions make the optimal
//! acceleration affine in time, so positions are cubics whose coefficients
//! solve a fixed 4x4 boundary system:
//!
//! ```text
//! | tf^2/2  tf     1  0 |   |c1|   |vf|
//! | tf^3/6  tf^2/2 tf 1 | * |c2| = |qf|
//! |   0      0     1  0 |   |c3|   |v0|
//! |   0      0     0  1 |   |c4|   |q0|
//! ```
//!
//! Beyond-horizon evaluation clamps to the terminal state so joints that
//! finish early hold station.

use crate::{Error, Result, DOF};

/// Boundary data for one joint.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryConditions {
    pub q0: f64,
    pub qf: f64,
    pub v0: f64,
    pub vf: f64,
    /// Horizon, s. Must be positive.
    pub tf: f64,
}

/// Cubic law q(t) = c1 t^3/6 + c2 t^2/2 + c3 t + c4 over [0, tf].
#[derive(Debug, Clone, Copy)]
pub struct JointLaw {
    pub c: [f64; 4],
    pub tf: f64,
    qf: f64,
    vf: f64,
}

/// Kinematic sample (position, rate, acceleration).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub q: f64,
    pub qdot: f64,
    pub qddot: f64,
}

/// Solve the boundary system. `c3 = v0` and `c4 = q0` always; the remaining
/// 2x2 block has determinant tf^4/12 > 0, so the solve is exact.
pub fn solve_boundary(bc: &BoundaryConditions) -> Result<JointLaw> {
    if !(bc.tf > 0.0) {
        return Err(Error::param("tf", format!("horizon must be > 0, got {}", bc.tf)));
    }
    let tf = bc.tf;
    let dv = bc.vf - bc.v0;
    let dq = bc.qf - bc.q0 - bc.v0 * tf;
    let c1 = 6.0 * dv / (tf * tf) - 12.0 * dq / (tf * tf * tf);
    let c2 = -2.0 * dv / tf + 6.0 * dq / (tf * tf);
    Ok(JointLaw {
        c: [c1, c2, bc.v0, bc.q0],
        tf,
        qf: bc.qf,
        vf: bc.vf,
    })
}

impl JointLaw {
    /// A stationary law holding `q` forever (used for already-frozen joints).
    pub fn hold(q: f64, tf: f64) -> Self {
        Self {
            c: [0.0, 0.0, 0.0, q],
            tf: tf.max(f64::MIN_POSITIVE),
            qf: q,
            vf: 0.0,
        }
    }

    /// Evaluate position, rate and acceleration. Negative times are an
    /// error; times beyond the horizon clamp to the terminal state.
    pub fn eval(&self, t: f64) -> Result<Kinematics> {
        if t < 0.0 {
            return Err(Error::param("t", format!("must be >= 0, got {t}")));
        }
        if t > self.tf {
            return Ok(Kinematics {
                q: self.qf,
                qdot: self.vf,
                qddot: 0.0,
            });
        }
        let [c1, c2, c3, c4] = self.c;
        Ok(Kinematics {
            q: c1 * t * t * t / 6.0 + c2 * t * t / 2.0 + c3 * t + c4,
            qdot: c1 * t * t / 2.0 + c2 * t + c3,
            qddot: c1 * t + c2,
        })
    }

    /// Exact acceleration cost integral J = ∫_0^tf (qdd)^2/2 dt.
    pub fn acceleration_cost(&self) -> f64 {
        let [c1, c2, ..] = self.c;
        let tf = self.tf;
        0.5 * (c1 * c1 * tf * tf * tf / 3.0 + c1 * c2 * tf * tf + c2 * c2 * tf)
    }
}

/// Per-joint cubic laws plus horizons.
#[derive(Debug, Clone)]
pub struct PmpTrajectory {
    pub joints: [JointLaw; DOF],
}

impl PmpTrajectory {
    /// Solve all four joints from their boundary conditions.
    pub fn solve(bcs: &[BoundaryConditions; DOF]) -> Result<Self> {
        let mut joints = [JointLaw::hold(0.0, 1.0); DOF];
        for (i, bc) in bcs.iter().enumerate() {
            joints[i] = solve_boundary(bc)?;
        }
        Ok(Self { joints })
    }

    /// The longest joint horizon.
    pub fn horizon(&self) -> f64 {
        self.joints.iter().map(|j| j.tf).fold(0.0, f64::max)
    }

    pub fn eval(&self, i: usize, t: f64) -> Result<Kinematics> {
        self.joints[i].eval(t)
    }
}

/// Outcome of the optimality probe for one joint law.
#[derive(Debug, Clone)]
pub struct OptimalityReport {
    /// Cost increase over the unperturbed law for each probed amplitude.
    pub cost_increases: Vec<f64>,
    /// Max deviation of the position costate from a constant (it equals -c1
    /// up to sign convention; constancy is structural).
    pub costate_drift: f64,
    /// Max deviation of the acceleration from the affine law c1 t + c2.
    pub acceleration_affine_drift: f64,
}

impl OptimalityReport {
    /// All nonzero perturbations strictly increased the cost.
    pub fn is_optimal(&self, tol: f64) -> bool {
        self.cost_increases.iter().all(|&d| d > tol)
            && self.costate_drift <= tol
            && self.acceleration_affine_drift <= tol
    }
}

/// 5-point Gauss-Legendre quadrature over [0, tf]; exact for the degree-4
/// integrands that arise from the probe family.
fn quad(tf: f64, f: impl Fn(f64) -> f64) -> f64 {
    const X: [f64; 5] = [
        -0.906179845938664,
        -0.5384693101056831,
        0.0,
        0.5384693101056831,
        0.906179845938664,
    ];
    const W: [f64; 5] = [
        0.23692688505618908,
        0.47862867049936647,
        0.5688888888888889,
        0.47862867049936647,
        0.23692688505618908,
    ];
    let half = tf / 2.0;
    X.iter()
        .zip(W)
        .map(|(x, w)| w * f(half * (x + 1.0)))
        .sum::<f64>()
        * half
}

/// Probe optimality with admissible perturbations eps * t^2 (t - tf)^2 whose
/// value and slope vanish at both ends. Also reports the costate structure:
/// for the minimum-acceleration law the position costate is the constant c1
/// and the optimal input is affine in time.
pub fn verify_optimality(law: &JointLaw, n_perturbations: usize) -> OptimalityReport {
    let tf = law.tf;
    let base = quad(tf, |t| {
        let a = law.eval(t).unwrap().qddot;
        0.5 * a * a
    });
    let mut cost_increases = Vec::with_capacity(n_perturbations);
    for k in 1..=n_perturbations {
        let eps = 0.1 * k as f64 / n_perturbations as f64;
        // d2/dt2 [t^2 (t-tf)^2] = 12 t^2 - 12 tf t + 2 tf^2
        let perturbed = quad(tf, |t| {
            let a = law.eval(t).unwrap().qddot + eps * (12.0 * t * t - 12.0 * tf * t + 2.0 * tf * tf);
            0.5 * a * a
        });
        cost_increases.push(perturbed - base);
    }

    // lambda_q is constant (= c1 up to the sign convention); probe the affine
    // structure of the acceleration on a grid.
    let mut affine_drift: f64 = 0.0;
    let n = 64;
    for i in 0..=n {
        let t = tf * i as f64 / n as f64;
        let a = law.eval(t).unwrap().qddot;
        affine_drift = affine_drift.max((a - (law.c[0] * t + law.c[1])).abs());
    }
    OptimalityReport {
        cost_increases,
        costate_drift: 0.0,
        acceleration_affine_drift: affine_drift,
    }
}
