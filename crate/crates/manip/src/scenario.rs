//! Scenario runner and batch harness: multi-waypoint pick-place pipelines,
//! the randomized target sweep, and CSV export of every series the figures
//! are built from.
//!
//! A scenario runs the full pipeline per waypoint: the time-horizon
//! estimator produces joint targets and per-joint horizons, each joint gets
//! a rest-to-rest minimum-acceleration law over its own horizon, and the
//! inverse dynamics are sampled along the composite trajectory.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::dynamics::inverse_dynamics;
use crate::gdth::{self, GdthResult, GdthTarget};
use crate::kinematics::{body_positions, fk_ee, is_reachable, link1_z_scale, JointState};
use crate::params::RobotParams;
use crate::pmp::{BoundaryConditions, PmpTrajectory};
use crate::structural::{torque_surface, SurfaceSpec, TorqueSurface};
use crate::{joint, Error, Result, DOF};

/// One waypoint of a pick-place scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    /// End-effector target (x, y, z), m.
    pub ee: [f64; 3],
    /// Link-1 height target, m.
    pub z1: f64,
    /// Per-waypoint end-effector tolerance, m.
    pub tolerance: f64,
    /// Payload carried while travelling toward this waypoint, kg.
    pub m_obj: f64,
}

/// A multi-waypoint scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub waypoints: Vec<Waypoint>,
    /// Trajectory sampling step, s.
    pub dt: f64,
    /// Abort on an unconverged waypoint instead of carrying on.
    #[serde(default)]
    pub strict: bool,
}

impl Scenario {
    /// The published three-waypoint pick-place: approach empty, carry the
    /// 4 kg payload to the bin, return empty.
    pub fn reference() -> Self {
        Self {
            waypoints: vec![
                Waypoint {
                    ee: [-0.45, 0.45, -0.25],
                    z1: 0.1947,
                    tolerance: 0.0100,
                    m_obj: 0.0,
                },
                Waypoint {
                    ee: [0.50, 0.50, -0.10],
                    z1: 0.2280,
                    tolerance: 0.2000,
                    m_obj: 4.0,
                },
                Waypoint {
                    ee: [0.3756, 0.3756, 0.15],
                    z1: 0.4164,
                    tolerance: 0.5080,
                    m_obj: 0.0,
                },
            ],
            dt: 0.01,
            strict: false,
        }
    }

    pub fn validate(&self, params: &RobotParams) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::param("scenario.waypoints", "need at least one waypoint"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("scenario.dt", "must be > 0"));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            let target = Vector3::from(w.ee);
            if !is_reachable(&target, &params.geometry) {
                return Err(Error::param(
                    "scenario.waypoints",
                    format!("waypoint {i} at {:?} is outside the reachable annulus", w.ee),
                ));
            }
            if w.m_obj < 0.0 {
                return Err(Error::param("scenario.waypoints", format!("waypoint {i} mass < 0")));
            }
        }
        Ok(())
    }
}

/// One sampled row of a trajectory segment.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryRow {
    pub t: f64,
    pub q: Vector4<f64>,
    pub qdot: Vector4<f64>,
    pub u: Vector4<f64>,
}

/// Pipeline output for one waypoint.
#[derive(Debug, Clone)]
pub struct SegmentReport {
    pub waypoint: usize,
    pub gdth: GdthResult,
    pub pmp: PmpTrajectory,
    pub rows: Vec<TrajectoryRow>,
    /// Peak |u_j| over the segment.
    pub peak_torque: [f64; DOF],
    /// Peak exceeds the effective stall for that joint.
    pub stall_flags: [bool; DOF],
}

/// Full scenario output.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub segments: Vec<SegmentReport>,
}

/// Plan one segment: estimator, per-joint rest-to-rest laws over the
/// estimator's horizons, and inverse dynamics along the sampled trajectory.
fn plan_segment(
    index: usize,
    start: &JointState,
    waypoint: &Waypoint,
    scenario_dt: f64,
    params: &RobotParams,
) -> Result<SegmentReport> {
    let target = GdthTarget {
        ee_target: Vector3::from(waypoint.ee),
        z1_target: waypoint.z1,
        m_obj: waypoint.m_obj,
        tolerance: waypoint.tolerance,
    };
    let gdth_result = gdth::run(&target, start, params)?;

    // rest-to-rest boundary conditions per joint over its own horizon;
    // joints that never needed to move hold station
    let mut bcs = [BoundaryConditions {
        q0: 0.0,
        qf: 0.0,
        v0: 0.0,
        vf: 0.0,
        tf: scenario_dt,
    }; DOF];
    for j in 0..DOF {
        let tf = gdth_result.horizons[j].max(scenario_dt);
        bcs[j] = BoundaryConditions {
            q0: start.q[j],
            qf: gdth_result.q_star[j],
            v0: 0.0,
            vf: 0.0,
            tf,
        };
    }
    let pmp = PmpTrajectory::solve(&bcs)?;

    let loaded = params.with_payload(waypoint.m_obj);
    // the virtual springs are anchored at the commanded waypoint pose
    let rest = gdth_result.q_star;
    let horizon = pmp.horizon();
    let steps = (horizon / scenario_dt).ceil() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut peak_torque = [0.0f64; DOF];
    for k in 0..=steps {
        let t = (k as f64 * scenario_dt).min(horizon);
        let mut q = Vector4::zeros();
        let mut qd = Vector4::zeros();
        let mut qdd = Vector4::zeros();
        for j in 0..DOF {
            let kin = pmp.eval(j, t)?;
            q[j] = kin.q;
            qd[j] = kin.qdot;
            qdd[j] = kin.qddot;
        }
        let state = JointState::new(q, qd);
        let u = inverse_dynamics(&state, &qdd, &loaded, &rest);
        for j in 0..DOF {
            peak_torque[j] = peak_torque[j].max(u[j].abs());
        }
        rows.push(TrajectoryRow { t, q, qdot: qd, u });
    }
    let stall_flags =
        std::array::from_fn(|j| peak_torque[j] > loaded.derived.stall_limit[j]);
    Ok(SegmentReport {
        waypoint: index,
        gdth: gdth_result,
        pmp,
        rows,
        peak_torque,
        stall_flags,
    })
}

/// Run the full pipeline over every waypoint from a starting state.
pub fn run_scenario(
    scenario: &Scenario,
    initial: &JointState,
    params: &RobotParams,
) -> Result<RunReport> {
    scenario.validate(params)?;
    let mut segments = Vec::with_capacity(scenario.waypoints.len());
    let mut state = *initial;
    for (i, w) in scenario.waypoints.iter().enumerate() {
        let segment = plan_segment(i, &state, w, scenario.dt, params)?;
        if scenario.strict && !segment.gdth.converged {
            return Err(Error::Parameter {
                field: "scenario",
                reason: format!(
                    "waypoint {i} did not converge (final error {:.1} mm)",
                    segment.gdth.final_ee_error * 1e3
                ),
            });
        }
        state = JointState::at_rest(segment.gdth.q_star);
        segments.push(segment);
    }
    Ok(RunReport { segments })
}

/// One randomized-target trial.
#[derive(Debug, Clone, Copy)]
pub struct TortureRow {
    pub target: Vector3<f64>,
    pub final_error_mm: f64,
    pub horizons: [f64; DOF],
    pub converged: bool,
}

/// Statistics over a randomized-target sweep.
#[derive(Debug, Clone)]
pub struct TortureReport {
    pub rows: Vec<TortureRow>,
    pub median_error_mm: f64,
    pub within_tolerance: usize,
    pub converged: usize,
}

impl TortureReport {
    pub fn fraction_within(&self) -> f64 {
        self.within_tolerance as f64 / self.rows.len() as f64
    }
}

/// Sample a reachable target by drawing a joint pose uniformly from the
/// descent box; the pose also supplies a consistent link-1 height target.
fn sample_target(rng: &mut ChaCha8Rng, params: &RobotParams) -> GdthTarget {
    let g = &params.geometry;
    loop {
        let q = Vector4::new(
            rng.gen_range(0.005..g.r_ext - 0.005),
            rng.gen_range(0.15..1.4),
            rng.gen_range(0.0..1.4),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let pose = JointState::at_rest(q);
        let ee = fk_ee(&pose, g);
        if !is_reachable(&ee, g) {
            continue;
        }
        let z1 = body_positions(&pose, g).s1.z / link1_z_scale(g);
        return GdthTarget::new(ee, z1, 0.0);
    }
}

/// Run the estimator on `n` seeded random reachable targets from the home
/// pose. Deterministic for a fixed seed; trials fan out across threads.
pub fn torture_test(
    n: usize,
    seed: u64,
    initial: &JointState,
    params: &RobotParams,
) -> Result<TortureReport> {
    if n == 0 {
        return Err(Error::param("n", "need at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<GdthTarget> = (0..n).map(|_| sample_target(&mut rng, params)).collect();
    let rows: Vec<TortureRow> = targets
        .par_iter()
        .map(|target| {
            let result = gdth::run(target, initial, params)?;
            Ok(TortureRow {
                target: target.ee_target,
                final_error_mm: result.final_ee_error * 1e3,
                horizons: result.horizons,
                converged: result.converged,
            })
        })
        .collect::<Result<_>>()?;

    let mut errors: Vec<f64> = rows.iter().map(|r| r.final_error_mm).collect();
    errors.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        errors[n / 2]
    } else {
        0.5 * (errors[n / 2 - 1] + errors[n / 2])
    };
    Ok(TortureReport {
        within_tolerance: rows.iter().filter(|r| r.final_error_mm <= 25.4).count(),
        converged: rows.iter().filter(|r| r.converged).count(),
        median_error_mm: median,
        rows,
    })
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    }
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(file))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + Copy + '_ {
    move |e| Error::Config(format!("{}: {e}", path.display()))
}

/// Write a trajectory segment:
/// `t,r,theta1,theta2,phi,rdot,theta1dot,theta2dot,phidot,u_r,u_theta1,u_theta2,u_phi`.
pub fn export_trajectory(rows: &[TrajectoryRow], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let err = io_err(path);
    writeln!(
        w,
        "t,r,theta1,theta2,phi,rdot,theta1dot,theta2dot,phidot,u_r,u_theta1,u_theta2,u_phi"
    )
    .map_err(err)?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.t,
            row.q[0],
            row.q[1],
            row.q[2],
            row.q[3],
            row.qdot[0],
            row.qdot[1],
            row.qdot[2],
            row.qdot[3],
            row.u[0],
            row.u[1],
            row.u[2],
            row.u[3]
        )
        .map_err(err)?;
    }
    w.flush().map_err(err)
}

/// Write a torque surface grid: `theta1,theta2,u_phi0,stall`.
pub fn export_surface(surface: &TorqueSurface, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let err = io_err(path);
    writeln!(w, "theta1,theta2,u_phi0,stall").map_err(err)?;
    for i in 0..surface.spec.n_theta1 {
        for j in 0..surface.spec.n_theta2 {
            writeln!(
                w,
                "{},{},{},{}",
                surface.spec.theta1(i),
                surface.spec.theta2(j),
                surface.value(i, j),
                surface.stall
            )
            .map_err(err)?;
        }
    }
    w.flush().map_err(err)
}

/// Sweep and write a surface for the given payload.
pub fn export_surface_for_payload(
    m_obj: f64,
    spec: &SurfaceSpec,
    params: &RobotParams,
    path: &Path,
) -> Result<TorqueSurface> {
    let loaded = params.with_payload(m_obj);
    let stall = params.derived.stall_limit[joint::PHI];
    let surface = torque_surface(&loaded.masses, &params.gear, &params.geometry, spec, stall)?;
    export_surface(&surface, path)?;
    Ok(surface)
}

/// Write torture-test rows:
/// `x,y,z,error_mm,t_r,t_theta1,t_theta2,t_phi,converged`.
pub fn export_torture(report: &TortureReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let err = io_err(path);
    writeln!(w, "x,y,z,error_mm,t_r,t_theta1,t_theta2,t_phi,converged").map_err(err)?;
    for row in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            row.target.x,
            row.target.y,
            row.target.z,
            row.final_error_mm,
            row.horizons[0],
            row.horizons[1],
            row.horizons[2],
            row.horizons[3],
            row.converged as u8
        )
        .map_err(err)?;
    }
    w.flush().map_err(err)
}

/// Write per-iteration descent traces: `iter,t,r,theta1,theta2,phi,cost,ee_error`.
pub fn export_trace(result: &GdthResult, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let err = io_err(path);
    writeln!(w, "iter,t,r,theta1,theta2,phi,cost,ee_error").map_err(err)?;
    for (i, tp) in result.trace.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            i, tp.time, tp.q[0], tp.q[1], tp.q[2], tp.q[3], tp.cost, tp.ee_error
        )
        .map_err(err)?;
    }
    w.flush().map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::fk_ee;

    fn home() -> JointState {
        JointState::at_rest(Vector4::new(0.0, 0.3, 0.3, 0.0))
    }

    #[test]
    fn trivial_single_waypoint_scenario() {
        let params = RobotParams::reference();
        let start = home();
        let ee = fk_ee(&start, &params.geometry);
        let z1 = body_positions(&start, &params.geometry).s1.z / link1_z_scale(&params.geometry);
        let scenario = Scenario {
            waypoints: vec![Waypoint {
                ee: [ee.x, ee.y, ee.z],
                z1,
                tolerance: 0.0254,
                m_obj: 0.0,
            }],
            dt: 0.01,
            strict: true,
        };
        let report = run_scenario(&scenario, &start, &params).unwrap();
        assert_eq!(report.segments.len(), 1);
        let seg = &report.segments[0];
        assert!(seg.gdth.converged);
        // near-empty trajectory with tiny horizons
        assert!(seg.pmp.horizon() <= 0.1);
        assert!(seg.rows.len() <= 12);
    }

    #[test]
    fn unreachable_waypoint_aborts_with_index() {
        let params = RobotParams::reference();
        let scenario = Scenario {
            waypoints: vec![Waypoint {
                ee: [5.0, 0.0, 0.0],
                z1: 0.2,
                tolerance: 0.01,
                m_obj: 0.0,
            }],
            dt: 0.01,
            strict: false,
        };
        let err = run_scenario(&scenario, &home(), &params).unwrap_err();
        assert!(err.to_string().contains("waypoint 0"), "{err}");
    }

    #[test]
    fn torture_is_deterministic_under_seed() {
        let params = RobotParams::reference();
        let a = torture_test(4, 99, &home(), &params).unwrap();
        let b = torture_test(4, 99, &home(), &params).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.target, y.target);
            assert_eq!(x.final_error_mm, y.final_error_mm);
            assert_eq!(x.horizons, y.horizons);
        }
        // trivially small trial count still reports stats
        assert!(a.median_error_mm.is_finite());
    }

    #[test]
    fn torture_on_home_target_is_exact() {
        // n = 1 with the target generated at the home pose: error ~ 0
        let params = RobotParams::reference();
        let start = home();
        let ee = fk_ee(&start, &params.geometry);
        let z1 = body_positions(&start, &params.geometry).s1.z / link1_z_scale(&params.geometry);
        let target = GdthTarget::new(ee, z1, 0.0);
        let result = gdth::run(&target, &start, &params).unwrap();
        assert!(result.final_ee_error < 1e-3);
    }

    #[test]
    fn surface_export_round_trips() {
        let params = RobotParams::reference();
        let spec = SurfaceSpec::workspace_default(&params.geometry, 5);
        let dir = std::env::temp_dir().join("manip-surface-test");
        let path = dir.join("surface.csv");
        let surface = export_surface_for_payload(1.5, &spec, &params, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "theta1,theta2,u_phi0,stall");
        let mut k = 0;
        for (line, i) in lines.zip(0..) {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            let row = i / spec.n_theta2;
            let col = i % spec.n_theta2;
            assert_eq!(cols[0], spec.theta1(row));
            assert_eq!(cols[1], spec.theta2(col));
            assert_eq!(cols[2], surface.value(row, col));
            assert_eq!(cols[3], surface.stall);
            k += 1;
        }
        assert_eq!(k, 25);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_grid_rejected() {
        let params = RobotParams::reference();
        let mut spec = SurfaceSpec::workspace_default(&params.geometry, 5);
        spec.n_theta1 = 1;
        let err = export_surface_for_payload(0.0, &spec, &params, Path::new("/tmp/x.csv"));
        assert!(err.is_err());
    }
}
