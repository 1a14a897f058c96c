//! Physical and algorithmic constants, validation, and derived quantities.
//!
//! Everything the other modules consume comes through [`RobotParams`]: raw
//! geometry, masses, actuator ratings, gear-train geometry, inertia tensors
//! and the gradient-descent settings, plus the derived virtual-spring
//! stiffnesses, critical damping coefficients and effective stall torques.

use serde::Deserialize;

use crate::{joint, Error, Result, DOF};

/// Link and mount geometry. Lengths in metres, angles in radians.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParams {
    /// Base length from the gearshaft to the link-1 mount.
    pub l0: f64,
    /// Mount angle between the vertical and the link-1 pivot (constant).
    pub vartheta: f64,
    /// Link lengths.
    pub l1: f64,
    pub l2: f64,
    /// Link centre-of-mass offsets along each link.
    pub lbar1: f64,
    pub lbar2: f64,
    /// Claw-to-grasp offset past the rod tip.
    pub delta_r: f64,
    /// Rod CM offset such that mid-stroke plus `r_prime` reaches the stroke end.
    pub r_prime: f64,
    /// Actuator rod radius.
    pub rod_radius: f64,
    /// Rod CM position (tabulated; not used by any implemented equation).
    pub rod_cm: f64,
    /// Total actuator stroke.
    pub r_ext: f64,
    /// Virtual strokes per joint (m for r, rad for the angles).
    pub strokes: [f64; DOF],
}

impl GeometryParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("geometry.l0", self.l0),
            ("geometry.l1", self.l1),
            ("geometry.l2", self.l2),
            ("geometry.lbar1", self.lbar1),
            ("geometry.lbar2", self.lbar2),
            ("geometry.r_prime", self.r_prime),
            ("geometry.rod_radius", self.rod_radius),
            ("geometry.r_ext", self.r_ext),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(field, format!("must be > 0, got {v}")));
            }
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.vartheta) {
            return Err(Error::param(
                "geometry.vartheta",
                format!("must lie in [0, pi/2), got {}", self.vartheta),
            ));
        }
        if self.lbar1 > self.l1 {
            return Err(Error::param("geometry.lbar1", "CM offset exceeds link length"));
        }
        if self.lbar2 > self.l2 {
            return Err(Error::param("geometry.lbar2", "CM offset exceeds link length"));
        }
        if self.delta_r < 0.0 {
            return Err(Error::param("geometry.delta_r", "must be >= 0"));
        }
        for (i, s) in self.strokes.iter().enumerate() {
            if !(*s > 0.0) {
                return Err(Error::param(
                    "geometry.strokes",
                    format!("stroke {i} must be > 0, got {s}"),
                ));
            }
        }
        Ok(())
    }

    /// Effective grasp length past the link-2 pivot: l2 + r + r' + delta_r.
    pub fn grasp_length(&self, r: f64) -> f64 {
        self.l2 + r + self.r_prime + self.delta_r
    }
}

/// Body masses, kg, and rod density, kg/m^3.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassParams {
    pub m_bf: f64,
    /// Claw mass; payload attaches at the same grasp point.
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m_act: f64,
    pub rho_act: f64,
    /// Payload mass; scenario-variable.
    #[serde(default)]
    pub m_obj: f64,
}

impl MassParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("masses.m_bf", self.m_bf),
            ("masses.m0", self.m0),
            ("masses.m1", self.m1),
            ("masses.m2", self.m2),
            ("masses.m_act", self.m_act),
            ("masses.m_obj", self.m_obj),
        ] {
            if v < 0.0 {
                return Err(Error::param(field, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.rho_act > 0.0) {
            return Err(Error::param("masses.rho_act", "must be > 0"));
        }
        Ok(())
    }

    /// Combined claw + payload mass carried at the grasp point.
    pub fn grasp_mass(&self) -> f64 {
        self.m0 + self.m_obj
    }
}

/// Motor and gear-train ratings per joint.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorRatings {
    /// Rated force (N) for r, rated torques (N*m) for the angles.
    pub rated: [f64; DOF],
    /// Motor stall torque, N*m (shared motor family).
    pub tau_stall: f64,
    /// No-load linear velocity of the rod, m/s (scaled by the mass ratio at use-site).
    pub v_nl: f64,
    /// No-load angular speed of the geared joints, rad/s.
    pub omega_nl: f64,
    /// Gear efficiency per angular joint (theta1, theta2, phi).
    pub efficiencies: [f64; 3],
    /// Gear ratio per angular joint (theta1, theta2, phi).
    pub gear_ratios: [f64; 3],
}

impl ActuatorRatings {
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.rated.iter().enumerate() {
            if !(*v > 0.0) {
                return Err(Error::param(
                    "actuators.rated",
                    format!("rated[{i}] must be > 0, got {v}"),
                ));
            }
        }
        if !(self.tau_stall > 0.0) {
            return Err(Error::param("actuators.tau_stall", "must be > 0"));
        }
        if !(self.v_nl > 0.0) {
            return Err(Error::param("actuators.v_nl", "must be > 0"));
        }
        if !(self.omega_nl > 0.0) {
            return Err(Error::param("actuators.omega_nl", "must be > 0"));
        }
        for (i, e) in self.efficiencies.iter().enumerate() {
            if !(*e > 0.0 && *e <= 1.0) {
                return Err(Error::param(
                    "actuators.efficiencies",
                    format!("efficiency {i} must lie in (0, 1], got {e}"),
                ));
            }
        }
        for (i, g) in self.gear_ratios.iter().enumerate() {
            if !(*g >= 1.0) {
                return Err(Error::param(
                    "actuators.gear_ratios",
                    format!("ratio {i} must be >= 1, got {g}"),
                ));
            }
        }
        Ok(())
    }
}

/// Gradient-descent time-horizon estimator settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdthConfig {
    /// Initial learning rates per joint.
    pub alpha0: [f64; DOF],
    /// Learning-rate decay constant, 1/s.
    pub eta: f64,
    /// Momentum coefficients per joint.
    pub momentum_beta: [f64; DOF],
    /// Operational-inertia weighting regularizer.
    pub epsilon_lambda: f64,
    /// Descent time step t_{i+1} - t_i, s.
    pub dt: f64,
    /// Radial freeze tolerance, m.
    pub tol_r: f64,
    /// Angular freeze tolerance, rad.
    pub tol_theta: f64,
    /// Iteration cap per descent attempt.
    pub max_iter: usize,
    /// End-effector error norm below which joints may freeze, m.
    pub freeze_gate: f64,
    /// Consecutive in-tolerance iterations required to freeze a joint.
    pub freeze_streak: usize,
    /// End-effector error norm that terminates the descent, m.
    pub exit_tol: f64,
    /// Angular joint range boxes [lo, hi] for theta1 and theta2, rad.
    pub theta1_range: [f64; 2],
    pub theta2_range: [f64; 2],
    /// Compare link-1 height against the raw target instead of the
    /// CM-normalized one.
    #[serde(default)]
    pub raw_z1_error: bool,
}

impl GdthConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.alpha0.iter().enumerate() {
            if !(*a > 0.0) {
                return Err(Error::param(
                    "gdth.alpha0",
                    format!("alpha0[{i}] must be > 0, got {a}"),
                ));
            }
        }
        for (i, b) in self.momentum_beta.iter().enumerate() {
            if !(0.0..1.0).contains(b) {
                return Err(Error::param(
                    "gdth.momentum_beta",
                    format!("beta[{i}] must lie in [0, 1), got {b}"),
                ));
            }
        }
        for (field, v) in [
            ("gdth.epsilon_lambda", self.epsilon_lambda),
            ("gdth.dt", self.dt),
            ("gdth.tol_r", self.tol_r),
            ("gdth.tol_theta", self.tol_theta),
            ("gdth.freeze_gate", self.freeze_gate),
            ("gdth.exit_tol", self.exit_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(field, format!("must be > 0, got {v}")));
            }
        }
        if self.eta < 0.0 {
            return Err(Error::param("gdth.eta", "must be >= 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("gdth.max_iter", "must be >= 1"));
        }
        for (field, r) in [
            ("gdth.theta1_range", self.theta1_range),
            ("gdth.theta2_range", self.theta2_range),
        ] {
            if !(r[0] < r[1]) {
                return Err(Error::param(field, "lo must be < hi"));
            }
        }
        Ok(())
    }

    /// Freeze tolerance per joint: radial in metres, angles in radians.
    pub fn tolerances(&self) -> [f64; DOF] {
        [self.tol_r, self.tol_theta, self.tol_theta, self.tol_theta]
    }
}

/// Gearshaft geometry for the azimuthal reaction analysis.
///
/// No published numerics exist for these; the shipped defaults are a fitted
/// calibration (see the config comments) and capacity results are
/// conditional on them.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GearTrainParams {
    /// Mean gear contact radius, m.
    pub r_avg: f64,
    /// Torque gear ratio seen by the azimuth motor.
    pub g_p: f64,
    /// Gear-contact height above the base frame, m.
    pub h_w: f64,
    /// Motor-shaft reaction height above the base frame, m.
    pub cap_h_w: f64,
    /// Gear offsets in the base plane, m.
    pub l_gx: f64,
    pub l_gy: f64,
    /// Gear pressure/helix angles, rad.
    pub psi: f64,
    pub varphi: f64,
}

impl GearTrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_avg > 0.0) {
            return Err(Error::param("gear.r_avg", "must be > 0"));
        }
        if !(self.g_p >= 1.0) {
            return Err(Error::param("gear.g_p", "must be >= 1"));
        }
        let denom = self.u_phi0_denominator();
        if denom.abs() < 1e-12 {
            return Err(Error::param(
                "gear",
                "holding-torque denominator G_p*(h_w*l_Gx - H_w*R_avg + R_avg*l_Gy*tan(varphi) + h_w*l_Gy*tan(psi)) vanishes",
            ));
        }
        Ok(())
    }

    /// Denominator of the closed-form azimuthal holding torque.
    pub fn u_phi0_denominator(&self) -> f64 {
        self.g_p
            * (self.h_w * self.l_gx - self.cap_h_w * self.r_avg
                + self.r_avg * self.l_gy * self.varphi.tan()
                + self.h_w * self.l_gy * self.psi.tan())
    }
}

/// Per-body diagonal inertia tensors, kg*m^2, in the dynamic frame.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertiaSet {
    pub base_frame: [f64; 3],
    pub link1: [f64; 3],
    pub link2: [f64; 3],
}

impl InertiaSet {
    pub fn validate(&self) -> Result<()> {
        for (field, d) in [
            ("inertia.base_frame", self.base_frame),
            ("inertia.link1", self.link1),
            ("inertia.link2", self.link2),
        ] {
            for v in d {
                if !(v > 0.0) {
                    return Err(Error::param(field, format!("entries must be > 0, got {v}")));
                }
            }
            let [a, b, c] = d;
            if a + b < c || b + c < a || a + c < b {
                return Err(Error::param(field, "triangle inequality violated"));
            }
        }
        Ok(())
    }
}

/// Quantities derived from the raw parameters at load time.
#[derive(Debug, Clone)]
pub struct DerivedParams {
    /// Virtual spring stiffness per joint (N/m or N*m/rad).
    pub kappa: [f64; DOF],
    /// Critical viscous damping per joint.
    pub damping: [f64; DOF],
    /// Feasible force/torque limit per joint: the rated force for r,
    /// the geared effective stall for the angles.
    pub stall_limit: [f64; DOF],
}

/// The full validated parameter set. Immutable after load; shareable.
#[derive(Debug, Clone)]
pub struct RobotParams {
    pub geometry: GeometryParams,
    pub masses: MassParams,
    pub actuators: ActuatorRatings,
    pub gear: GearTrainParams,
    pub inertia: InertiaSet,
    pub gdth: GdthConfig,
    /// Effective inertia scale per joint used for the critical damping.
    pub damping_mass_scale: [f64; DOF],
    pub derived: DerivedParams,
}

impl RobotParams {
    /// Assemble and validate, populating the derived quantities.
    pub fn new(
        geometry: GeometryParams,
        masses: MassParams,
        actuators: ActuatorRatings,
        gear: GearTrainParams,
        inertia: InertiaSet,
        gdth: GdthConfig,
        damping_mass_scale: [f64; DOF],
    ) -> Result<Self> {
        geometry.validate()?;
        masses.validate()?;
        actuators.validate()?;
        gear.validate()?;
        inertia.validate()?;
        gdth.validate()?;
        for (i, m) in damping_mass_scale.iter().enumerate() {
            if !(*m > 0.0) {
                return Err(Error::param(
                    "damping_mass_scale",
                    format!("scale {i} must be > 0, got {m}"),
                ));
            }
        }

        let mut kappa = [0.0; DOF];
        let mut damping = [0.0; DOF];
        for i in 0..DOF {
            kappa[i] = virtual_stiffness(actuators.rated[i], geometry.strokes[i])?;
            damping[i] =
                virtual_damping(damping_mass_scale[i], actuators.rated[i], geometry.strokes[i])?;
        }
        let mut stall_limit = [0.0; DOF];
        stall_limit[joint::R] = actuators.rated[joint::R];
        for (k, j) in [joint::THETA1, joint::THETA2, joint::PHI].into_iter().enumerate() {
            stall_limit[j] = effective_stall(
                actuators.tau_stall,
                actuators.efficiencies[k],
                actuators.gear_ratios[k],
            )?;
        }

        Ok(Self {
            geometry,
            masses,
            actuators,
            gear,
            inertia,
            gdth,
            damping_mass_scale,
            derived: DerivedParams {
                kappa,
                damping,
                stall_limit,
            },
        })
    }

    /// A copy with a different payload mass.
    pub fn with_payload(&self, m_obj: f64) -> Self {
        let mut p = self.clone();
        p.masses.m_obj = m_obj;
        p
    }

    /// Claw/payload mass ratio for the current payload.
    pub fn mass_ratio(&self) -> f64 {
        mass_ratio(self.masses.m0, self.masses.m_obj).expect("validated masses")
    }

    /// No-load rate bound per joint: v_NL*mu for r, omega_NL for the angles.
    pub fn rate_bounds(&self) -> [f64; DOF] {
        let mu = self.mass_ratio();
        let w = self.actuators.omega_nl;
        [self.actuators.v_nl * mu, w, w, w]
    }
}

/// Virtual spring stiffness: rated force or torque over the stroke.
pub fn virtual_stiffness(rated: f64, stroke: f64) -> Result<f64> {
    if !(stroke > 0.0) {
        return Err(Error::param("stroke", format!("must be > 0, got {stroke}")));
    }
    if rated < 0.0 {
        return Err(Error::param("rated", "must be >= 0"));
    }
    Ok(rated / stroke)
}

/// Critically damped coefficient 2*sqrt(M*rated/stroke).
pub fn virtual_damping(mass_scale: f64, rated: f64, stroke: f64) -> Result<f64> {
    if !(mass_scale > 0.0) {
        return Err(Error::param("mass_scale", "must be > 0"));
    }
    if !(stroke > 0.0) {
        return Err(Error::param("stroke", format!("must be > 0, got {stroke}")));
    }
    if rated < 0.0 {
        return Err(Error::param("rated", "must be >= 0"));
    }
    Ok(2.0 * (mass_scale * rated / stroke).sqrt())
}

/// Effective stall torque after gearing: tau_stall * eta * ratio.
pub fn effective_stall(tau_stall: f64, eta: f64, ratio: f64) -> Result<f64> {
    if !(tau_stall > 0.0) {
        return Err(Error::param("tau_stall", "must be > 0"));
    }
    if !(eta > 0.0) {
        return Err(Error::param("eta", "must be > 0"));
    }
    if !(ratio > 0.0) {
        return Err(Error::param("ratio", "must be > 0"));
    }
    Ok(tau_stall * eta * ratio)
}

/// Claw/object mass ratio mu = m_claw / (m_claw + m_obj).
pub fn mass_ratio(m_claw: f64, m_obj: f64) -> Result<f64> {
    if !(m_claw > 0.0) {
        return Err(Error::param("m_claw", "must be > 0"));
    }
    if m_obj < 0.0 {
        return Err(Error::param("m_obj", "must be >= 0"));
    }
    Ok(m_claw / (m_claw + m_obj))
}

// ---------------------------------------------------------------------------
// Config file loading
// ---------------------------------------------------------------------------

/// Raw angle field that may be given in radians or with a `_deg` suffix.
fn merge_deg(rad: Option<f64>, deg: Option<f64>, field: &'static str) -> Result<f64> {
    match (rad, deg) {
        (Some(r), None) => Ok(r),
        (None, Some(d)) => Ok(d.to_radians()),
        (Some(_), Some(_)) => Err(Error::param(field, "given both in radians and degrees")),
        (None, None) => Err(Error::param(field, "missing")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    l0: f64,
    vartheta: Option<f64>,
    vartheta_deg: Option<f64>,
    l1: f64,
    l2: f64,
    lbar1: f64,
    lbar2: f64,
    delta_r: f64,
    r_prime: f64,
    rod_radius: f64,
    rod_cm: f64,
    r_ext: f64,
    strokes: [f64; DOF],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGear {
    r_avg: f64,
    g_p: f64,
    h_w: f64,
    cap_h_w: f64,
    l_gx: f64,
    l_gy: f64,
    psi: Option<f64>,
    psi_deg: Option<f64>,
    varphi: Option<f64>,
    varphi_deg: Option<f64>,
}

/// On-disk layout of the robot configuration file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: RawGeometry,
    masses: MassParams,
    actuators: ActuatorRatings,
    gear: RawGear,
    inertia: InertiaSet,
    gdth: GdthConfig,
    damping_mass_scale: [f64; DOF],
}

/// Parse a TOML robot configuration into a validated parameter set.
pub fn parse_config(text: &str) -> Result<RobotParams> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let geometry = GeometryParams {
        l0: raw.geometry.l0,
        vartheta: merge_deg(raw.geometry.vartheta, raw.geometry.vartheta_deg, "geometry.vartheta")?,
        l1: raw.geometry.l1,
        l2: raw.geometry.l2,
        lbar1: raw.geometry.lbar1,
        lbar2: raw.geometry.lbar2,
        delta_r: raw.geometry.delta_r,
        r_prime: raw.geometry.r_prime,
        rod_radius: raw.geometry.rod_radius,
        rod_cm: raw.geometry.rod_cm,
        r_ext: raw.geometry.r_ext,
        strokes: raw.geometry.strokes,
    };
    let gear = GearTrainParams {
        r_avg: raw.gear.r_avg,
        g_p: raw.gear.g_p,
        h_w: raw.gear.h_w,
        cap_h_w: raw.gear.cap_h_w,
        l_gx: raw.gear.l_gx,
        l_gy: raw.gear.l_gy,
        psi: merge_deg(raw.gear.psi, raw.gear.psi_deg, "gear.psi")?,
        varphi: merge_deg(raw.gear.varphi, raw.gear.varphi_deg, "gear.varphi")?,
    };
    RobotParams::new(
        geometry,
        raw.masses,
        raw.actuators,
        gear,
        raw.inertia,
        raw.gdth,
        raw.damping_mass_scale,
    )
}

/// Load and validate a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<RobotParams> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl RobotParams {
    /// The reference robot: the published simulation constants plus the
    /// calibrated gear geometry documented in the default config.
    pub fn reference() -> Self {
        const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;
        const FRAC_PI_6: f64 = std::f64::consts::FRAC_PI_6;
        let geometry = GeometryParams {
            l0: 0.130,
            vartheta: 0.1756,
            l1: 0.304,
            l2: 0.3048,
            lbar1: 0.152,
            lbar2: 0.052,
            delta_r: 0.103,
            r_prime: 0.0508,
            rod_radius: 0.01,
            rod_cm: 0.0508,
            r_ext: 0.1016,
            strokes: [0.1016, FRAC_PI_2, FRAC_PI_6, FRAC_PI_2],
        };
        let masses = MassParams {
            m_bf: 3.53790071,
            m0: 0.5,
            m1: 2.015,
            m2: 0.170649,
            m_act: 0.228,
            rho_act: 0.228 / (std::f64::consts::PI * 0.01f64.powi(2) * 0.1016),
            m_obj: 0.0,
        };
        let actuators = ActuatorRatings {
            rated: [200.0, 53.0, 53.0, 53.0],
            tau_stall: 68.64655,
            v_nl: 0.004,
            omega_nl: 6.3,
            efficiencies: [0.95, 0.85, 0.85],
            gear_ratios: [2.0, 2.0, 4.0],
        };
        let gear = GearTrainParams {
            r_avg: 0.03,
            g_p: 4.0,
            h_w: 0.04,
            cap_h_w: 0.10,
            l_gx: 0.04956676081034144,
            l_gy: 0.05,
            psi: 20f64.to_radians(),
            varphi: 15f64.to_radians(),
        };
        let inertia = InertiaSet {
            base_frame: [0.0270, 0.0396, 0.0310],
            link1: [0.021, 0.024, 0.005],
            link2: [2.53e-4, 2.52e-4, 4.40e-5],
        };
        let gdth = GdthConfig {
            alpha0: [3e-8, 1e-3, 1e-3, 1e-3],
            eta: 0.01,
            momentum_beta: [0.025; DOF],
            epsilon_lambda: 1e-3,
            dt: 0.01,
            tol_r: 6.35e-3,
            tol_theta: 2f64.to_radians(),
            max_iter: 20_000,
            freeze_gate: 0.1016,
            freeze_streak: 5,
            exit_tol: 6.35e-3,
            theta1_range: [-0.2, 1.7],
            theta2_range: [-0.6, 2.0],
            raw_z1_error: false,
        };
        // Effective inertia near the home pose, used only for critical damping.
        let damping_mass_scale = [0.73, 0.75, 0.12, 0.10];
        Self::new(geometry, masses, actuators, gear, inertia, gdth, damping_mass_scale)
            .expect("reference parameters are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stiffness_matches_rated_over_stroke() {
        assert_relative_eq!(
            virtual_stiffness(200.0, 0.1016).unwrap(),
            1968.503937,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            virtual_stiffness(53.0, std::f64::consts::FRAC_PI_2).unwrap(),
            33.7394,
            max_relative = 1e-4
        );
        assert_eq!(virtual_stiffness(0.0, 0.3).unwrap(), 0.0);
        assert!(virtual_stiffness(10.0, 0.0).is_err());
    }

    #[test]
    fn damping_is_critical() {
        assert_relative_eq!(
            virtual_damping(1.0, 200.0, 0.1016).unwrap(),
            88.7357,
            max_relative = 1e-5
        );
        // scales as sqrt(M)
        assert_relative_eq!(
            virtual_damping(4.0, 200.0, 0.1016).unwrap(),
            177.4714,
            max_relative = 1e-5
        );
        assert_eq!(virtual_damping(3.0, 0.0, 0.2).unwrap(), 0.0);
        // identity b^2 = 4 M kappa
        let (m, u, s) = (2.7, 110.0, 0.43);
        let b = virtual_damping(m, u, s).unwrap();
        let k = virtual_stiffness(u, s).unwrap();
        assert_relative_eq!(b * b, 4.0 * m * k, max_relative = 1e-12);
    }

    #[test]
    fn effective_stalls_reproduce_published_rows() {
        let tau = 68.64655;
        assert!((effective_stall(tau, 0.85, 4.0).unwrap() - 233.4).abs() < 0.05);
        assert!((effective_stall(tau, 0.95, 2.0).unwrap() - 130.4).abs() < 0.05);
        assert!((effective_stall(tau, 0.85, 2.0).unwrap() - 116.7).abs() < 0.05);
    }

    #[test]
    fn mass_ratio_limits() {
        assert_eq!(mass_ratio(0.7, 0.0).unwrap(), 1.0);
        assert_eq!(mass_ratio(1.0, 1.0).unwrap(), 0.5);
        assert_relative_eq!(mass_ratio(0.5, 4.0).unwrap(), 0.1111, max_relative = 1e-3);
        assert!(mass_ratio(0.0, 0.0).is_err());
    }

    #[test]
    fn reference_params_validate_and_derive() {
        let p = RobotParams::reference();
        assert_relative_eq!(p.derived.kappa[0], 1968.503937, max_relative = 1e-9);
        assert!((p.derived.stall_limit[joint::PHI] - 233.4).abs() < 0.05);
        assert!((p.derived.stall_limit[joint::THETA1] - 130.4).abs() < 0.05);
        assert!((p.derived.stall_limit[joint::THETA2] - 116.7).abs() < 0.05);
        assert_eq!(p.derived.stall_limit[joint::R], 200.0);
        assert_eq!(p.gdth.eta, 0.01);
        assert_eq!(p.gdth.momentum_beta[0], 0.025);
    }

    #[test]
    fn config_errors_name_the_field() {
        let mut p = RobotParams::reference();
        p.geometry.strokes[1] = 0.0;
        let err = p.geometry.validate().unwrap_err();
        assert!(err.to_string().contains("strokes"), "{err}");
    }

    #[test]
    fn accepts_published_mount_angle() {
        let mut p = RobotParams::reference();
        p.geometry.vartheta = 0.1756;
        assert!(p.geometry.validate().is_ok());
    }

    #[test]
    fn degree_suffix_is_exclusive() {
        assert!(merge_deg(Some(0.2), Some(11.0), "x").is_err());
        assert_relative_eq!(
            merge_deg(None, Some(90.0), "x").unwrap(),
            std::f64::consts::FRAC_PI_2
        );
    }
}
