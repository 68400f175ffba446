//! Penalty-contact planar physics shared by the Push, Slide and Lift tasks.
//!
//! The model is deliberately small: a disc effector driven by a bounded force
//! command, one manipulation object (disc or axis-aligned square), a linear
//! spring contact force `f = k_n * overlap` with no restitution, and Coulomb
//! friction against the support surface. Integration is semi-implicit Euler
//! with a fixed number of substeps per control step, so every trajectory is a
//! pure function of the initial state and the action sequence.

use serde::{Deserialize, Serialize};

use crate::env::EnvError;

/// Standard gravity used for friction normal force and the Lift task (m/s^2).
pub const GRAVITY: f64 = 9.81;

/// Plain 2D vector. Hand-rolled because the whole simulation needs only
/// add/scale/norm and serde support.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, s: f64) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn add(self, o: Vec2) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    /// Unit vector, with a fixed fallback so coincident centers stay deterministic.
    pub fn normalized_or(self, fallback: Vec2) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            fallback
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle, used for workspace bounds and goal regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Rect { min, max }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Rectangle with the same center and half-extents scaled by `factor`.
    pub fn scaled_about_center(&self, factor: f64) -> Rect {
        let c = self.center();
        let hx = 0.5 * (self.max.x - self.min.x) * factor;
        let hy = 0.5 * (self.max.y - self.min.y) * factor;
        Rect::new(Vec2::new(c.x - hx, c.y - hy), Vec2::new(c.x + hx, c.y + hy))
    }

    /// Euclidean distance from a point to this rectangle (0 inside).
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    /// Euclidean distance between two rectangles (0 if they touch or overlap).
    pub fn distance_to_rect(&self, o: &Rect) -> f64 {
        let dx = (self.min.x - o.max.x).max(0.0).max(o.min.x - self.max.x);
        let dy = (self.min.y - o.max.y).max(0.0).max(o.min.y - self.max.y);
        dx.hypot(dy)
    }

    /// Clamp a point into the rectangle.
    pub fn clamp_point(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }
}

/// Which of the three task analogs the config describes. Push and Slide live
/// on a tabletop seen from above (gravity acts only through friction); Lift
/// lives in a vertical plane where `y` is height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Push,
    Slide,
    Lift,
}

impl Task {
    pub fn action_dim(self) -> usize {
        match self {
            Task::Push | Task::Slide => 2,
            Task::Lift => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Push => "push",
            Task::Slide => "slide",
            Task::Lift => "lift",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, EnvError> {
        match s.to_ascii_lowercase().as_str() {
            "push" => Ok(Task::Push),
            "slide" => Ok(Task::Slide),
            "lift" => Ok(Task::Lift),
            other => Err(EnvError::UnknownTask(other.to_string())),
        }
    }
}

/// Full dynamic state of one task instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsState {
    pub effector_pos: Vec2,
    pub effector_vel: Vec2,
    pub object_pos: Vec2,
    pub object_vel: Vec2,
    /// Gripper opening (m). Only meaningful for Lift; fixed at 0 otherwise.
    pub aperture: f64,
    /// Lift grasp latch: once engaged the object tracks the effector.
    pub latched: bool,
    /// Aperture recorded when the latch engaged; opening past it releases.
    pub latch_aperture: f64,
    /// Object offset from the effector while latched.
    pub latch_offset: Vec2,
}

impl PhysicsState {
    pub fn is_finite(&self) -> bool {
        self.effector_pos.is_finite()
            && self.effector_vel.is_finite()
            && self.object_pos.is_finite()
            && self.object_vel.is_finite()
            && self.aperture.is_finite()
    }
}

/// Geometry, material and goal-region parameters for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub task: Task,
    /// Control step (s); each control step runs `substeps` Euler substeps.
    pub dt: f64,
    pub substeps: u32,
    /// Contact stiffness (N/m).
    pub k_n: f64,
    /// Kinetic friction coefficient between object and table.
    pub mu: f64,
    /// Object mass (kg).
    pub m_obj: f64,
    /// Effector mass (kg).
    pub m_eff: f64,
    /// Maximum commanded force per action component (N).
    pub f_max: f64,
    /// Linear velocity damping on the effector (N·s/m).
    pub drag: f64,
    /// Effector disc radius (m).
    pub r_eff: f64,
    /// Object disc radius (m); Push and Slide only.
    pub r_obj: f64,
    /// Object half side length (m); Lift only (axis-aligned square).
    pub obj_half: f64,
    /// Finger disc radius (m); Lift only.
    pub r_finger: f64,
    /// Maximum gripper opening (m); Lift only.
    pub aperture_max: f64,
    /// Gripper open/close speed at full command (m/s); Lift only.
    pub aperture_rate: f64,
    /// Per-finger force needed to engage the grasp latch (N); Lift only.
    pub grasp_threshold: f64,
    /// Region the effector center is clamped to.
    pub effector_bounds: Rect,
    /// Region the object center is clamped to.
    pub object_bounds: Rect,
    /// Hard-difficulty goal region; Simple and Intermediate are this
    /// rectangle scaled about its center by 0.5 and 0.75.
    pub goal_region_hard: Rect,
    pub effector_start: Vec2,
    pub object_start: Vec2,
}

impl PhysicsConfig {
    /// Desk-scale defaults for each task.
    pub fn for_task(task: Task) -> Self {
        let base = PhysicsConfig {
            task,
            dt: 0.02,
            substeps: 2,
            k_n: 1000.0,
            mu: 0.3,
            m_obj: 0.5,
            m_eff: 1.0,
            f_max: 20.0,
            drag: 8.0,
            r_eff: 0.025,
            r_obj: 0.035,
            obj_half: 0.025,
            r_finger: 0.008,
            aperture_max: 0.10,
            aperture_rate: 0.15,
            grasp_threshold: 0.5,
            effector_bounds: Rect::new(Vec2::ZERO, Vec2::new(0.6, 0.6)),
            object_bounds: Rect::new(Vec2::ZERO, Vec2::new(0.6, 0.6)),
            goal_region_hard: Rect::new(Vec2::new(0.27, 0.13), Vec2::new(0.53, 0.47)),
            effector_start: Vec2::new(0.10, 0.30),
            object_start: Vec2::new(0.20, 0.30),
        };
        match task {
            Task::Push => base,
            Task::Slide => PhysicsConfig {
                mu: 0.1,
                effector_bounds: Rect::new(Vec2::ZERO, Vec2::new(0.25, 0.6)),
                object_bounds: Rect::new(Vec2::ZERO, Vec2::new(1.2, 0.6)),
                goal_region_hard: Rect::new(Vec2::new(0.45, 0.10), Vec2::new(1.05, 0.50)),
                effector_start: Vec2::new(0.08, 0.30),
                object_start: Vec2::new(0.18, 0.30),
                ..base
            },
            Task::Lift => PhysicsConfig {
                effector_bounds: Rect::new(Vec2::new(0.05, 0.03), Vec2::new(0.55, 0.45)),
                object_bounds: Rect::new(Vec2::ZERO, Vec2::new(0.6, 0.5)),
                goal_region_hard: Rect::new(Vec2::new(0.12, 0.13), Vec2::new(0.48, 0.37)),
                effector_start: Vec2::new(0.30, 0.15),
                object_start: Vec2::new(0.30, 0.025),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.dt > 0.0) || self.substeps == 0 {
            return Err(EnvError::BadConfig("dt must be > 0 and substeps >= 1".into()));
        }
        if !(self.k_n > 0.0) || self.mu < 0.0 || !(self.m_obj > 0.0) || !(self.m_eff > 0.0) {
            return Err(EnvError::BadConfig(
                "k_n, m_obj, m_eff must be > 0 and mu >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Initial physics state for this task.
    pub fn initial_state(&self) -> PhysicsState {
        PhysicsState {
            effector_pos: self.effector_start,
            effector_vel: Vec2::ZERO,
            object_pos: self.object_start,
            object_vel: Vec2::ZERO,
            aperture: if self.task == Task::Lift {
                self.aperture_max
            } else {
                0.0
            },
            latched: false,
            latch_aperture: 0.0,
            latch_offset: Vec2::ZERO,
        }
    }

    /// Object rest height for the Lift task (square sitting on the table).
    pub fn rest_height(&self) -> f64 {
        self.obj_half
    }

    /// Finger centers for the Lift gripper at a given effector pose.
    pub fn finger_positions(&self, effector_pos: Vec2, aperture: f64) -> [Vec2; 2] {
        let half = 0.5 * aperture;
        [
            Vec2::new(effector_pos.x - half, effector_pos.y),
            Vec2::new(effector_pos.x + half, effector_pos.y),
        ]
    }
}

/// Contact impulses accumulated over one control step. The object and
/// effector entries are exact negatives of each other by construction, which
/// the physics test suite asserts on randomized states.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepImpulses {
    pub on_object: Vec2,
    pub on_effector: Vec2,
}

/// One contact: penalty force on the object plus its magnitude.
#[derive(Debug, Clone, Copy)]
struct Contact {
    force_on_object: Vec2,
    magnitude: f64,
}

fn disc_disc_contact(cfg: &PhysicsConfig, state: &PhysicsState) -> Option<Contact> {
    let sep = state.object_pos.sub(state.effector_pos);
    let overlap = cfg.r_eff + cfg.r_obj - sep.norm();
    if overlap > 0.0 {
        let normal = sep.normalized_or(Vec2::new(1.0, 0.0));
        let magnitude = cfg.k_n * overlap;
        Some(Contact {
            force_on_object: normal.scale(magnitude),
            magnitude,
        })
    } else {
        None
    }
}

/// Penalty contact between one finger disc and the object square.
fn finger_square_contact(cfg: &PhysicsConfig, finger: Vec2, object_pos: Vec2) -> Option<Contact> {
    let closest = Vec2::new(
        finger
            .x
            .clamp(object_pos.x - cfg.obj_half, object_pos.x + cfg.obj_half),
        finger
            .y
            .clamp(object_pos.y - cfg.obj_half, object_pos.y + cfg.obj_half),
    );
    let away = finger.sub(closest);
    let dist = away.norm();
    if dist >= cfg.r_finger {
        return None;
    }
    let normal = if dist > 0.0 {
        away.scale(1.0 / dist)
    } else {
        // Finger center inside the square: push out along the nearest face,
        // x faces preferred on ties.
        let dx = cfg.obj_half - (finger.x - object_pos.x).abs();
        let dy = cfg.obj_half - (finger.y - object_pos.y).abs();
        if dx <= dy {
            Vec2::new(if finger.x >= object_pos.x { 1.0 } else { -1.0 }, 0.0)
        } else {
            Vec2::new(0.0, if finger.y >= object_pos.y { 1.0 } else { -1.0 })
        }
    };
    let overlap = cfg.r_finger - dist;
    let magnitude = cfg.k_n * overlap;
    Some(Contact {
        // Object is pushed opposite to the outward normal at the finger.
        force_on_object: normal.scale(-magnitude),
        magnitude,
    })
}

fn lift_contacts(cfg: &PhysicsConfig, state: &PhysicsState) -> [Option<Contact>; 2] {
    let fingers = cfg.finger_positions(state.effector_pos, state.aperture);
    [
        finger_square_contact(cfg, fingers[0], state.object_pos),
        finger_square_contact(cfg, fingers[1], state.object_pos),
    ]
}

/// Per-finger force magnitudes for the Lift task, `[0, 0]` otherwise.
pub fn finger_forces(state: &PhysicsState, cfg: &PhysicsConfig) -> [f64; 2] {
    if cfg.task != Task::Lift {
        return [0.0, 0.0];
    }
    let contacts = lift_contacts(cfg, state);
    [
        contacts[0].map_or(0.0, |c| c.magnitude),
        contacts[1].map_or(0.0, |c| c.magnitude),
    ]
}

/// Scalar force measured at the effector (N): `k_n * overlap` for the disc
/// tasks, the sum of both finger penalty forces for Lift. Always >= 0 and
/// exactly 0 when nothing overlaps.
pub fn contact_force(state: &PhysicsState, cfg: &PhysicsConfig) -> f64 {
    match cfg.task {
        Task::Push | Task::Slide => disc_disc_contact(cfg, state).map_or(0.0, |c| c.magnitude),
        Task::Lift => {
            let [a, b] = finger_forces(state, cfg);
            a + b
        }
    }
}

/// Clamp a position into `bounds`, zeroing the velocity component that points
/// out of the workspace at a touched wall.
fn clamp_with_velocity(bounds: &Rect, pos: &mut Vec2, vel: &mut Vec2) {
    if pos.x < bounds.min.x {
        pos.x = bounds.min.x;
        vel.x = vel.x.max(0.0);
    } else if pos.x > bounds.max.x {
        pos.x = bounds.max.x;
        vel.x = vel.x.min(0.0);
    }
    if pos.y < bounds.min.y {
        pos.y = bounds.min.y;
        vel.y = vel.y.max(0.0);
    } else if pos.y > bounds.max.y {
        pos.y = bounds.max.y;
        vel.y = vel.y.min(0.0);
    }
}

/// Coulomb friction on the object: reduce speed by `mu*g*h`, never below
/// zero, never changing direction.
fn apply_friction(vel: &mut Vec2, mu: f64, h: f64) {
    let speed = vel.norm();
    if speed > 0.0 {
        let new_speed = (speed - mu * GRAVITY * h).max(0.0);
        *vel = vel.scale(new_speed / speed);
    }
}

/// Advance the state by one control step (`substeps` semi-implicit Euler
/// substeps). `action` must already be clamped to `[-1, 1]` per component;
/// components 0..2 command a planar force `action * f_max` on the effector
/// and component 2 (Lift only) opens (+) or closes (-) the gripper.
///
/// Returns the new state plus the contact impulses exchanged during the step.
/// A non-finite result aborts with `EnvError::NonFiniteState`.
pub fn integrate(
    state: &PhysicsState,
    action: &[f64],
    cfg: &PhysicsConfig,
) -> Result<(PhysicsState, StepImpulses), EnvError> {
    let mut s = state.clone();
    let h = cfg.dt / cfg.substeps as f64;
    let cmd = Vec2::new(
        action.first().copied().unwrap_or(0.0) * cfg.f_max,
        action.get(1).copied().unwrap_or(0.0) * cfg.f_max,
    );
    let grip = if cfg.task == Task::Lift {
        action.get(2).copied().unwrap_or(0.0)
    } else {
        0.0
    };
    let mut impulses = StepImpulses::default();

    for _ in 0..cfg.substeps {
        let mut closing = false;
        if cfg.task == Task::Lift {
            let next = (s.aperture + grip * cfg.aperture_rate * h).clamp(0.0, cfg.aperture_max);
            closing = next < s.aperture;
            s.aperture = next;
            if s.latched && s.aperture > s.latch_aperture + 0.005 {
                s.latched = false;
            }
        }

        // Total contact force on the object; reaction acts on the effector.
        let force_on_object = match cfg.task {
            Task::Push | Task::Slide => disc_disc_contact(cfg, &s)
                .map_or(Vec2::ZERO, |c| c.force_on_object),
            Task::Lift => {
                let contacts = lift_contacts(cfg, &s);
                let mags = [
                    contacts[0].map_or(0.0, |c| c.magnitude),
                    contacts[1].map_or(0.0, |c| c.magnitude),
                ];
                if !s.latched && closing && mags[0] > cfg.grasp_threshold && mags[1] > cfg.grasp_threshold
                {
                    s.latched = true;
                    s.latch_aperture = s.aperture;
                    s.latch_offset = s.object_pos.sub(s.effector_pos);
                }
                contacts
                    .iter()
                    .flatten()
                    .fold(Vec2::ZERO, |acc, c| acc.add(c.force_on_object))
            }
        };

        impulses.on_object = impulses.on_object.add(force_on_object.scale(h));
        impulses.on_effector = impulses.on_effector.sub(force_on_object.scale(h));

        // Effector: commanded force, contact reaction, linear drag.
        let eff_force = cmd.sub(force_on_object).sub(s.effector_vel.scale(cfg.drag));
        s.effector_vel = s.effector_vel.add(eff_force.scale(h / cfg.m_eff));
        s.effector_pos = s.effector_pos.add(s.effector_vel.scale(h));
        clamp_with_velocity(&cfg.effector_bounds, &mut s.effector_pos, &mut s.effector_vel);

        // Object.
        if cfg.task == Task::Lift && s.latched {
            s.object_pos = s.effector_pos.add(s.latch_offset);
            s.object_vel = s.effector_vel;
        } else {
            s.object_vel = s.object_vel.add(force_on_object.scale(h / cfg.m_obj));
            match cfg.task {
                Task::Push | Task::Slide => apply_friction(&mut s.object_vel, cfg.mu, h),
                Task::Lift => {
                    let rest = cfg.rest_height();
                    let on_table = s.object_pos.y <= rest + 1e-9 && s.object_vel.y <= 0.0;
                    if on_table {
                        s.object_pos.y = rest;
                        s.object_vel.y = 0.0;
                        let mut horiz = Vec2::new(s.object_vel.x, 0.0);
                        apply_friction(&mut horiz, cfg.mu, h);
                        s.object_vel.x = horiz.x;
                    } else {
                        s.object_vel.y -= GRAVITY * h;
                    }
                }
            }
            s.object_pos = s.object_pos.add(s.object_vel.scale(h));
            if cfg.task == Task::Lift && s.object_pos.y < cfg.rest_height() {
                s.object_pos.y = cfg.rest_height();
                s.object_vel.y = s.object_vel.y.max(0.0);
            }
            clamp_with_velocity(&cfg.object_bounds, &mut s.object_pos, &mut s.object_vel);
        }
    }

    if !s.is_finite() {
        return Err(EnvError::NonFiniteState);
    }
    Ok((s, impulses))
}
