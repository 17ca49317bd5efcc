//! Planar 3-DOF surface vessel: state, thrust input, model parameters and the
//! discrete-time dynamics used by both the planner and the simulated plant.
//!
//! Continuous model, with η = [x y ψ]ᵀ and ν = [u v r]ᵀ:
//!
//! ```text
//! η̇ = R(ψ) ν
//! M ν̇ = B f − C(ν) ν − D ν
//! ```
//!
//! The planner advances it by [`PLANNER_SUBSTEPS`] RK4 substeps per stage
//! ([`step_dynamics`]); the simulator uses single RK4 steps at a finer step
//! ([`Integrator::Rk4`]).

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point};
use nalgebra::{Matrix3, Matrix3x4, Matrix6, Matrix6x4, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

/// Pose and body-frame velocities `[x, y, ψ, u, v, r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl VesselState {
    pub fn new(x: f64, y: f64, psi: f64, u: f64, v: f64, r: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
            u,
            v,
            r,
        }
    }

    pub fn at_rest(x: f64, y: f64, psi: f64) -> Self {
        Self::new(x, y, psi, 0.0, 0.0, 0.0)
    }

    pub fn from_vector(z: &Vector6<f64>) -> Self {
        Self::new(z[0], z[1], z[2], z[3], z[4], z[5])
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.x, self.y, self.psi, self.u, self.v, self.r)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn body_velocity(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.r)
    }

    /// Translational velocity in the world frame.
    pub fn world_velocity(&self) -> Point {
        let (s, c) = self.psi.sin_cos();
        Point::new(c * self.u - s * self.v, s * self.u + c * self.v)
    }

    /// Kinetic energy ½ νᵀ M ν; non-increasing under zero thrust.
    pub fn kinetic_energy(&self, model: &VesselModel) -> f64 {
        let nu = self.body_velocity();
        0.5 * nu.dot(&model.mass.component_mul(&nu))
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Forces of the four thrusters, in newtons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustCommand {
    pub forces: [f64; 4],
}

impl ThrustCommand {
    pub fn new(f1: f64, f2: f64, f3: f64, f4: f64) -> Self {
        Self {
            forces: [f1, f2, f3, f4],
        }
    }

    pub fn zero() -> Self {
        Self { forces: [0.0; 4] }
    }

    pub fn from_vector(f: &Vector4<f64>) -> Self {
        Self {
            forces: [f[0], f[1], f[2], f[3]],
        }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::from(self.forces)
    }

    pub fn clamped(&self, f_max: f64) -> Self {
        Self {
            forces: self.forces.map(|f| f.clamp(-f_max, f_max)),
        }
    }

    pub fn within_limits(&self, f_max: f64) -> bool {
        self.forces.iter().all(|f| f.abs() <= f_max)
    }
}

/// On-disk form of [`VesselModel`]; keys follow the documented JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VesselModelFile {
    m11: f64,
    m22: f64,
    m33: f64,
    d11: f64,
    d22: f64,
    d33: f64,
    #[serde(rename = "B")]
    allocation: [f64; 12],
    a: f64,
    b: f64,
    disc_offsets: [[f64; 2]; 3],
    r_disc: f64,
    f_max: f64,
}

/// Physical parameters of the vessel. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VesselModelFile", into = "VesselModelFile")]
pub struct VesselModel {
    /// Diagonal of the rigid-body plus added-mass matrix M.
    pub mass: Vector3<f64>,
    /// Diagonal of the linear damping matrix D.
    pub damping: Vector3<f64>,
    /// Maps thruster forces to body-frame surge force, sway force and yaw moment.
    pub allocation: Matrix3x4<f64>,
    /// Hull width (m).
    pub width: f64,
    /// Hull length (m).
    pub length: f64,
    pub disc_offsets: [Point; 3],
    pub disc_radius: f64,
    pub max_thrust: f64,
}

impl TryFrom<VesselModelFile> for VesselModel {
    type Error = Error;

    fn try_from(f: VesselModelFile) -> Result<Self> {
        let model = VesselModel {
            mass: Vector3::new(f.m11, f.m22, f.m33),
            damping: Vector3::new(f.d11, f.d22, f.d33),
            allocation: Matrix3x4::from_row_slice(&f.allocation),
            width: f.a,
            length: f.b,
            disc_offsets: f.disc_offsets.map(|[x, y]| Point::new(x, y)),
            disc_radius: f.r_disc,
            max_thrust: f.f_max,
        };
        model.validate()?;
        Ok(model)
    }
}

impl From<VesselModel> for VesselModelFile {
    fn from(m: VesselModel) -> Self {
        let mut allocation = [0.0; 12];
        for r in 0..3 {
            for c in 0..4 {
                allocation[r * 4 + c] = m.allocation[(r, c)];
            }
        }
        VesselModelFile {
            m11: m.mass[0],
            m22: m.mass[1],
            m33: m.mass[2],
            d11: m.damping[0],
            d22: m.damping[1],
            d33: m.damping[2],
            allocation,
            a: m.width,
            b: m.length,
            disc_offsets: m.disc_offsets.map(|p| [p.x, p.y]),
            r_disc: m.disc_radius,
            f_max: m.max_thrust,
        }
    }
}

impl Default for VesselModel {
    /// Quarter-scale canal vessel, 0.9 m × 0.45 m, with two longitudinal
    /// thrusters (f1 starboard, f2 port) and two lateral thrusters (f3 bow,
    /// f4 stern). Values are placeholders; see `models/quarter_scale.json`.
    fn default() -> Self {
        let lever_y = 0.18;
        let lever_x = 0.35;
        #[rustfmt::skip]
        let allocation = Matrix3x4::new(
            1.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 1.0,
            lever_y, -lever_y, lever_x, -lever_x,
        );
        Self {
            mass: Vector3::new(12.0, 16.0, 2.0),
            damping: Vector3::new(6.0, 10.0, 2.0),
            allocation,
            width: 0.45,
            length: 0.9,
            disc_offsets: [Point::new(-0.3, 0.0), Point::new(0.0, 0.0), Point::new(0.3, 0.0)],
            disc_radius: 0.28,
            max_thrust: 3.0,
        }
    }
}

impl VesselModel {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = self.mass.iter().chain(self.damping.iter()).all(|v| v.is_finite())
            && self.allocation.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if self.mass.iter().any(|&m| m <= 0.0) {
            return Err(Error::InvalidModel("mass entries must be positive".into()));
        }
        if self.damping.iter().any(|&d| d < 0.0) {
            return Err(Error::InvalidModel("damping entries must be non-negative".into()));
        }
        if !(self.width > 0.0 && self.length > 0.0) {
            return Err(Error::InvalidModel("hull dimensions must be positive".into()));
        }
        if !(self.disc_radius > 0.0) || !(self.max_thrust > 0.0) {
            return Err(Error::InvalidModel("r_disc and f_max must be positive".into()));
        }
        if let Some(p) = self.uncovered_hull_point() {
            return Err(Error::InvalidModel(format!(
                "discs do not cover hull point ({:.3}, {:.3})",
                p.x, p.y
            )));
        }
        Ok(())
    }

    /// First sampled hull boundary point (body frame) not covered by any disc.
    fn uncovered_hull_point(&self) -> Option<Point> {
        const PER_SIDE: usize = 50;
        let (hx, hy) = (self.length / 2.0, self.width / 2.0);
        let corners = [
            Point::new(hx, hy),
            Point::new(-hx, hy),
            Point::new(-hx, -hy),
            Point::new(hx, -hy),
        ];
        let r2 = self.disc_radius * self.disc_radius * (1.0 + 1e-9);
        (0..4)
            .flat_map(|side| {
                let (a, b) = (corners[side], corners[(side + 1) % 4]);
                (0..PER_SIDE).map(move |i| a + (b - a) * (i as f64 / PER_SIDE as f64))
            })
            .find(|p| self.disc_offsets.iter().all(|o| (p - o).norm_squared() > r2))
    }

    pub fn mass_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.mass)
    }

    pub fn damping_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.damping)
    }

    /// Zero command: the planner fallback when no feasible plan exists.
    pub fn fallback_command(&self) -> ThrustCommand {
        fallback_command()
    }
}

/// Zero thrust on all four thrusters.
pub fn fallback_command() -> ThrustCommand {
    ThrustCommand::zero()
}

/// Rotation taking body rates `[u, v, r]` to world rates `[ẋ, ẏ, ψ̇]`.
pub fn heading_rotation(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    #[rustfmt::skip]
    let r = Matrix3::new(
        c, -s, 0.0,
        s,  c, 0.0,
        0.0, 0.0, 1.0,
    );
    r
}

/// Coriolis and centripetal matrix for a diagonal mass matrix.
pub fn coriolis(nu: &Vector3<f64>, model: &VesselModel) -> Matrix3<f64> {
    let (m11, m22) = (model.mass[0], model.mass[1]);
    let (u, v) = (nu[0], nu[1]);
    #[rustfmt::skip]
    let c = Matrix3::new(
        0.0, 0.0, -m22 * v,
        0.0, 0.0, m11 * u,
        m22 * v, -m11 * u, 0.0,
    );
    c
}

/// Continuous-time state derivative ż = f(z, u).
pub fn state_derivative(z: &Vector6<f64>, f: &Vector4<f64>, model: &VesselModel) -> Vector6<f64> {
    let nu = Vector3::new(z[3], z[4], z[5]);
    let eta_dot = heading_rotation(z[2]) * nu;
    let force = model.allocation * f - coriolis(&nu, model) * nu - model.damping.component_mul(&nu);
    let nu_dot = force.component_div(&model.mass);
    Vector6::new(eta_dot[0], eta_dot[1], eta_dot[2], nu_dot[0], nu_dot[1], nu_dot[2])
}

const FIELD_NAMES: [&str; 6] = ["x", "y", "psi", "u", "v", "r"];

fn finish_step(z: Vector6<f64>) -> Result<VesselState> {
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            field: FIELD_NAMES[i],
        });
    }
    Ok(VesselState::from_vector(&z))
}

/// RK4 substeps per planner stage.
pub const PLANNER_SUBSTEPS: usize = 2;

fn rk4(z: &Vector6<f64>, f: &Vector4<f64>, model: &VesselModel, h: f64) -> Vector6<f64> {
    let k1 = state_derivative(z, f, model);
    let k2 = state_derivative(&(z + k1 * (h / 2.0)), f, model);
    let k3 = state_derivative(&(z + k2 * (h / 2.0)), f, model);
    let k4 = state_derivative(&(z + k3 * h), f, model);
    z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Advances the state by `tau` with [`PLANNER_SUBSTEPS`] RK4 substeps; the
/// planner's transcription.
pub fn step_dynamics(
    state: &VesselState,
    cmd: &ThrustCommand,
    model: &VesselModel,
    tau: f64,
) -> Result<VesselState> {
    debug_assert!(tau > 0.0);
    let f = cmd.to_vector();
    let h = tau / PLANNER_SUBSTEPS as f64;
    let mut z = state.to_vector();
    for _ in 0..PLANNER_SUBSTEPS {
        z = rk4(&z, &f, model, h);
    }
    finish_step(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    Rk4,
}

impl Integrator {
    /// One step of length `h`.
    pub fn step(
        self,
        state: &VesselState,
        cmd: &ThrustCommand,
        model: &VesselModel,
        h: f64,
    ) -> Result<VesselState> {
        let z = state.to_vector();
        let f = cmd.to_vector();
        match self {
            Integrator::Euler => finish_step(z + state_derivative(&z, &f, model) * h),
            Integrator::Rk4 => finish_step(rk4(&z, &f, model, h)),
        }
    }
}

/// Jacobian of the continuous dynamics with respect to the state.
pub fn state_jacobian(z: &Vector6<f64>, model: &VesselModel) -> Matrix6<f64> {
    let (s, c) = z[2].sin_cos();
    let (u, v, r) = (z[3], z[4], z[5]);
    let (m11, m22, m33) = (model.mass[0], model.mass[1], model.mass[2]);
    let (d11, d22, d33) = (model.damping[0], model.damping[1], model.damping[2]);

    let mut jac = Matrix6::<f64>::zeros();
    // kinematics
    jac[(0, 2)] = -s * u - c * v;
    jac[(0, 3)] = c;
    jac[(0, 4)] = -s;
    jac[(1, 2)] = c * u - s * v;
    jac[(1, 3)] = s;
    jac[(1, 4)] = c;
    jac[(2, 5)] = 1.0;
    // kinetics: u̇ = (τu + m22 v r − d11 u)/m11, v̇ = (τv − m11 u r − d22 v)/m22,
    // ṙ = (τr − (m22 − m11) u v − d33 r)/m33
    jac[(3, 3)] = -d11 / m11;
    jac[(3, 4)] = m22 * r / m11;
    jac[(3, 5)] = m22 * v / m11;
    jac[(4, 3)] = -m11 * r / m22;
    jac[(4, 4)] = -d22 / m22;
    jac[(4, 5)] = -m11 * u / m22;
    jac[(5, 3)] = -(m22 - m11) * v / m33;
    jac[(5, 4)] = -(m22 - m11) * u / m33;
    jac[(5, 5)] = -d33 / m33;
    jac
}

/// Jacobian of the continuous dynamics with respect to the thrust; constant.
pub fn input_jacobian(model: &VesselModel) -> Matrix6x4<f64> {
    let mut b = Matrix6x4::zeros();
    for row in 0..3 {
        for col in 0..4 {
            b[(row + 3, col)] = model.allocation[(row, col)] / model.mass[row];
        }
    }
    b
}

/// Jacobians `(∂z⁺/∂z, ∂z⁺/∂f)` of [`step_dynamics`], by the chain rule
/// through every RK4 stage.
pub fn linearize_dynamics(
    state: &VesselState,
    cmd: &ThrustCommand,
    model: &VesselModel,
    tau: f64,
) -> (Matrix6<f64>, Matrix6x4<f64>) {
    let f = cmd.to_vector();
    let h = tau / PLANNER_SUBSTEPS as f64;
    let bc = input_jacobian(model);
    let mut z = state.to_vector();
    let mut a = Matrix6::<f64>::identity();
    let mut b = Matrix6x4::<f64>::zeros();
    for _ in 0..PLANNER_SUBSTEPS {
        let k1 = state_derivative(&z, &f, model);
        let z2 = z + k1 * (h / 2.0);
        let k2 = state_derivative(&z2, &f, model);
        let z3 = z + k2 * (h / 2.0);
        let k3 = state_derivative(&z3, &f, model);
        let z4 = z + k3 * h;

        let (a1, a2, a3, a4) = (
            state_jacobian(&z, model),
            state_jacobian(&z2, model),
            state_jacobian(&z3, model),
            state_jacobian(&z4, model),
        );
        let eye = Matrix6::<f64>::identity();
        let k1z = a1;
        let k2z = a2 * (eye + k1z * (h / 2.0));
        let k3z = a3 * (eye + k2z * (h / 2.0));
        let k4z = a4 * (eye + k3z * h);
        let k1u = bc;
        let k2u = a2 * k1u * (h / 2.0) + bc;
        let k3u = a3 * k2u * (h / 2.0) + bc;
        let k4u = a4 * k3u * h + bc;
        let step_z = eye + (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (h / 6.0);
        let step_u = (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);

        b = step_z * b + step_u;
        a = step_z * a;
        z = rk4(&z, &f, model, h);
    }
    (a, b)
}

/// World-frame centers of the footprint discs.
pub fn disc_centers(state: &VesselState, model: &VesselModel) -> [Point; 3] {
    let (s, c) = state.psi.sin_cos();
    model
        .disc_offsets
        .map(|o| Point::new(state.x + c * o.x - s * o.y, state.y + s * o.x + c * o.y))
}
