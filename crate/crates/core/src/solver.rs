//! Quasi-static equilibrium: each finger settles at a local minimum of its
//! potential energy (spring + tendon + contact penalty) inside the joint
//! box limits. Pulley-coupled pairs are tied together by equal branch
//! tension and excursion conservation.
//!
//! Solves are pure functions of their inputs: re-solving after removing all
//! loads returns the rest pose exactly.

use crate::contact::{link_penetration, read_sensors, Obstacle, ObjectShape, ContactPoint, SensorReading};
use crate::error::{Result, SimError};
use crate::geom::Vec2;
use crate::hand_model::{ActuatorSpec, Coupling, FingerName, FingerSpec, HandSpec};
use crate::tendon::TendonState;
use serde::Serialize;
use std::collections::VecDeque;

/// Projected-gradient tolerance (norm of the projected gradient).
pub const SOLVER_TOL: f64 = 1e-8;

/// Iteration cap for a single finger minimization.
pub const SOLVER_MAX_ITER: usize = 10_000;

/// A constant external force pinned to a material point of a link.
/// `local` is expressed in the link frame (x along the link).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExternalLoad {
    pub link: usize,
    pub local: Vec2,
    /// World-frame force, N.
    pub force: Vec2,
}

/// Per-finger external loads, indexed by [`FingerName::index`].
pub type FingerLoads = [Vec<ExternalLoad>; 5];

/// A contact resolved onto a specific link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkContact {
    pub link: usize,
    /// Index into the scenario obstacle list.
    pub obstacle: usize,
    pub contact: ContactPoint,
}

/// One finger at quasi-static equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FingerState {
    pub name: FingerName,
    /// Joint angles, rad, proximal to distal. Always within limits.
    pub angles: Vec<f64>,
    /// Joint origins followed by the fingertip (n+1 points).
    pub endpoints: Vec<Vec2>,
    pub contacts: Vec<LinkContact>,
    /// Wire tension in this finger's branch, N.
    pub branch_tension: f64,
    /// Wire drawn in by this finger's flexion, m.
    pub branch_excursion: f64,
}

impl FingerState {
    /// Summed contact force on the distal link (what the fingertip sensor
    /// measures), N.
    pub fn distal_force(&self) -> f64 {
        let distal = self.angles.len().saturating_sub(1);
        self.contacts
            .iter()
            .filter(|c| c.link == distal)
            .map(|c| c.contact.force)
            .sum()
    }

    /// Deepest penetration over all contacts, m.
    pub fn max_penetration(&self) -> f64 {
        self.contacts
            .iter()
            .map(|c| c.contact.penetration)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// The whole hand at quasi-static equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HandState {
    /// Indexed by [`FingerName::index`].
    pub fingers: Vec<FingerState>,
    /// One per actuator, in spec order.
    pub tendons: Vec<TendonState>,
    /// Five fingertip readings followed by the palm readings.
    pub sensors: Vec<SensorReading>,
    pub diagnostics: SolveDiagnostics,
}

impl HandState {
    pub fn finger(&self, name: FingerName) -> &FingerState {
        &self.fingers[name.index()]
    }

    pub fn fingertip_reading(&self, name: FingerName) -> &SensorReading {
        &self.sensors[name.index()]
    }

    pub fn any_saturated(&self) -> bool {
        self.tendons.iter().any(|t| t.saturated)
    }
}

/// Commands for all actuators, one mode at a time.
#[derive(Debug, Clone, PartialEq)]
pub enum HandCommand {
    /// Actuator tensions, N.
    Tensions(Vec<f64>),
    /// Actuator wire excursions (drawn in past rest), m.
    Excursions(Vec<f64>),
}

/// Planar serial-chain forward kinematics: joint origins plus fingertip.
pub fn forward_kinematics(finger: &FingerSpec, angles: &[f64]) -> Vec<Vec2> {
    let mut points = Vec::with_capacity(angles.len() + 1);
    let mut p = finger.base_pose.position;
    let mut phi = finger.base_pose.angle;
    points.push(p);
    for (j, &theta) in angles.iter().enumerate() {
        phi += theta;
        p = p + Vec2::new(phi.cos(), phi.sin()) * finger.joints[j].link_length;
        points.push(p);
    }
    points
}

/// A single-finger equilibrium problem: the finger, the obstacles that can
/// touch it, and any pinned external loads.
pub struct FingerProblem<'a> {
    pub finger: &'a FingerSpec,
    /// (index into the scenario obstacle list, shape).
    pub obstacles: Vec<(usize, &'a ObjectShape)>,
    pub loads: &'a [ExternalLoad],
    stiffnesses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    pub angles: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl<'a> FingerProblem<'a> {
    pub fn new(
        finger: &'a FingerSpec,
        obstacles: Vec<(usize, &'a ObjectShape)>,
        loads: &'a [ExternalLoad],
    ) -> Result<Self> {
        let stiffnesses = finger
            .joints
            .iter()
            .map(|j| j.stiffness())
            .collect::<Result<Vec<_>>>()?;
        Ok(FingerProblem { finger, obstacles, loads, stiffnesses })
    }

    /// Convenience constructor filtering a scenario obstacle list down to
    /// this finger.
    pub fn for_finger(
        finger: &'a FingerSpec,
        obstacles: &'a [Obstacle],
        loads: &'a [ExternalLoad],
    ) -> Result<Self> {
        let shapes = obstacles
            .iter()
            .enumerate()
            .filter(|(_, o)| o.applies_to(finger.name))
            .map(|(i, o)| (i, &o.shape))
            .collect();
        FingerProblem::new(finger, shapes, loads)
    }

    fn n(&self) -> usize {
        self.finger.joints.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.finger.joints.iter().map(|j| j.limits[0]).collect();
        let hi = self.finger.joints.iter().map(|j| j.limits[1]).collect();
        (lo, hi)
    }

    /// Total potential energy at `angles` under `tension`, J:
    /// spring strain + tendon work + contact penalty + pinned-load work.
    pub fn energy(&self, tension: f64, angles: &[f64]) -> f64 {
        let origins = forward_kinematics(self.finger, angles);
        let mut e = 0.0;
        for (i, j) in self.finger.joints.iter().enumerate() {
            let d = angles[i] - j.rest_angle;
            e += 0.5 * self.stiffnesses[i] * d * d;
            e -= tension * j.moment_arm * d;
        }
        for &(_, shape) in &self.obstacles {
            let k = shape.contact_stiffness();
            for link in 0..self.n() {
                if let Some(cp) = link_penetration(shape, origins[link], origins[link + 1]) {
                    e += 0.5 * k * cp.penetration * cp.penetration;
                }
            }
        }
        if !self.loads.is_empty() {
            let mut phi = self.finger.base_pose.angle;
            let mut phis = Vec::with_capacity(self.n());
            for &theta in angles {
                phi += theta;
                phis.push(phi);
            }
            for load in self.loads {
                let u = Vec2::new(phis[load.link].cos(), phis[load.link].sin());
                let p = origins[load.link] + u * load.local.x + u.perp() * load.local.y;
                e -= load.force.dot(p);
            }
        }
        e
    }

    /// Analytic gradient of [`Self::energy`] with respect to the angles.
    pub fn gradient(&self, tension: f64, angles: &[f64]) -> Vec<f64> {
        let origins = forward_kinematics(self.finger, angles);
        let n = self.n();
        let mut g = vec![0.0; n];
        for (i, j) in self.finger.joints.iter().enumerate() {
            g[i] += self.stiffnesses[i] * (angles[i] - j.rest_angle);
            g[i] -= tension * j.moment_arm;
        }
        for &(_, shape) in &self.obstacles {
            let k = shape.contact_stiffness();
            for link in 0..n {
                if let Some(cp) = link_penetration(shape, origins[link], origins[link + 1]) {
                    // Envelope: the deepest point moves as a material point
                    // of the link; depth falls along the outward normal.
                    let scale = k * cp.penetration;
                    for i in 0..=link {
                        let jac = (cp.point - origins[i]).perp();
                        g[i] -= scale * cp.normal.dot(jac);
                    }
                }
            }
        }
        if !self.loads.is_empty() {
            let mut phi = self.finger.base_pose.angle;
            let mut phis = Vec::with_capacity(n);
            for &theta in angles {
                phi += theta;
                phis.push(phi);
            }
            for load in self.loads {
                let u = Vec2::new(phis[load.link].cos(), phis[load.link].sin());
                let p = origins[load.link] + u * load.local.x + u.perp() * load.local.y;
                for i in 0..=load.link {
                    g[i] -= load.force.dot((p - origins[i]).perp());
                }
            }
        }
        g
    }

    /// Wire excursion at `angles`, m (no limit check; the solver clamps).
    pub fn excursion(&self, angles: &[f64]) -> f64 {
        angles
            .iter()
            .zip(&self.finger.joints)
            .map(|(&theta, j)| j.moment_arm * (theta - j.rest_angle))
            .sum()
    }

    /// Projected gradient descent with a spectral step and nonmonotone
    /// backtracking line search, inside the joint box limits.
    pub fn minimize(&self, tension: f64, x0: &[f64], tol: f64, max_iter: usize) -> SolveRun {
        let (lo, hi) = self.bounds();
        let n = self.n();
        let clamp_vec = |x: &mut [f64]| {
            for i in 0..n {
                x[i] = x[i].clamp(lo[i], hi[i]);
            }
        };

        let mut x: Vec<f64> = x0.to_vec();
        clamp_vec(&mut x);
        let mut e = self.energy(tension, &x);
        let mut g = self.gradient(tension, &x);
        let mut alpha: f64 = 1.0;
        let mut history: VecDeque<f64> = VecDeque::with_capacity(10);
        history.push_back(e);

        let mut residual = f64::INFINITY;
        for it in 0..max_iter {
            let mut res_sq = 0.0;
            for i in 0..n {
                let step = (x[i] - g[i]).clamp(lo[i], hi[i]) - x[i];
                res_sq += step * step;
            }
            residual = res_sq.sqrt();
            if residual <= tol {
                return SolveRun { angles: x, energy: e, iterations: it, residual, converged: true };
            }

            let e_ref = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut a = alpha.clamp(1e-12, 1e12);
            let mut accepted: Option<(Vec<f64>, f64)> = None;
            let mut last: Option<(Vec<f64>, f64)> = None;
            for _ in 0..60 {
                let mut xn: Vec<f64> = (0..n).map(|i| x[i] - a * g[i]).collect();
                clamp_vec(&mut xn);
                let d_sq: f64 = (0..n).map(|i| (xn[i] - x[i]).powi(2)).sum();
                if d_sq < 1e-30 {
                    break;
                }
                let gd: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
                let en = self.energy(tension, &xn);
                if en <= e_ref + 1e-4 * gd {
                    accepted = Some((xn, en));
                    break;
                }
                last = Some((xn, en));
                a *= 0.5;
            }
            let (xn, en) = match accepted.or(last.filter(|(_, en)| *en <= e)) {
                Some(step) => step,
                // Line search stalled at numerical resolution.
                None => {
                    return SolveRun {
                        angles: x,
                        energy: e,
                        iterations: it,
                        residual,
                        converged: residual <= tol,
                    }
                }
            };

            let gn = self.gradient(tension, &xn);
            let mut sy = 0.0;
            let mut ss = 0.0;
            for i in 0..n {
                let s = xn[i] - x[i];
                let y = gn[i] - g[i];
                sy += s * y;
                ss += s * s;
            }
            alpha = if sy > 1e-18 { (ss / sy).clamp(1e-12, 1e12) } else { (alpha * 10.0).min(1e12) };

            x = xn;
            g = gn;
            e = en;
            if history.len() == 10 {
                history.pop_front();
            }
            history.push_back(e);
        }

        SolveRun { angles: x, energy: e, iterations: max_iter, residual, converged: residual <= tol }
    }

    fn grid_seeds(&self, tension: f64, step_rad: f64, keep: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bounds();
        let n = self.n();
        let counts: Vec<usize> = (0..n)
            .map(|i| (((hi[i] - lo[i]) / step_rad).ceil() as usize).max(1) + 1)
            .collect();
        let point = |idx: &[usize]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    if counts[i] == 1 {
                        lo[i]
                    } else {
                        lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (counts[i] - 1) as f64
                    }
                })
                .collect()
        };

        // Keep the lowest-energy grid points as polish seeds.
        let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut idx = vec![0usize; n];
        loop {
            let x = point(&idx);
            let e = self.energy(tension, &x);
            if best.len() < keep {
                best.push((e, x));
                best.sort_by(|a, b| a.0.total_cmp(&b.0));
            } else if e < best[keep - 1].0 {
                best[keep - 1] = (e, x);
                best.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
            // odometer
            let mut carry = true;
            for i in (0..n).rev() {
                if carry {
                    idx[i] += 1;
                    if idx[i] == counts[i] {
                        idx[i] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
        best.into_iter().map(|(_, x)| x).collect()
    }

    /// Robust solve: polishes the rest pose, the contact-free analytic
    /// minimizer, and (when obstacles are present) the best coarse-grid
    /// points, then returns the lowest-energy run. Deterministic.
    pub fn solve(&self, tension: f64) -> Result<SolveRun> {
        if tension < 0.0 {
            return Err(SimError::Domain(format!(
                "branch tension must be non-negative, got {tension}"
            )));
        }
        let rest: Vec<f64> = self.finger.joints.iter().map(|j| j.rest_angle).collect();
        let mut seeds = vec![rest.clone()];
        let free: Vec<f64> = self
            .finger
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| j.rest_angle + j.moment_arm * tension / self.stiffnesses[i])
            .collect();
        seeds.push(free);
        if !self.obstacles.is_empty() {
            seeds.extend(self.grid_seeds(tension, 5.0_f64.to_radians(), 8));
        }

        let mut best: Option<SolveRun> = None;
        for seed in seeds {
            let run = self.minimize(tension, &seed, SOLVER_TOL, SOLVER_MAX_ITER);
            let better = match &best {
                None => true,
                Some(b) => run.energy < b.energy - 1e-15 || (run.converged && !b.converged && run.energy <= b.energy + 1e-12),
            };
            if better {
                best = Some(run);
            }
        }
        Ok(best.expect("at least one seed"))
    }

    /// Warm-started solve for inner loops: polishes the warm start and the
    /// contact-free analytic point only.
    pub fn solve_warm(&self, tension: f64, warm: &[f64]) -> SolveRun {
        let free: Vec<f64> = self
            .finger
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| j.rest_angle + j.moment_arm * tension / self.stiffnesses[i])
            .collect();
        let a = self.minimize(tension, warm, SOLVER_TOL, SOLVER_MAX_ITER);
        let b = self.minimize(tension, &free, SOLVER_TOL, SOLVER_MAX_ITER);
        if b.energy < a.energy - 1e-15 {
            b
        } else {
            a
        }
    }

    /// Packages a solved angle vector into a [`FingerState`].
    pub fn state(&self, tension: f64, run: &SolveRun) -> FingerState {
        let endpoints = forward_kinematics(self.finger, &run.angles);
        let mut contacts = Vec::new();
        for &(obstacle, shape) in &self.obstacles {
            for link in 0..self.n() {
                if let Some(cp) = link_penetration(shape, endpoints[link], endpoints[link + 1]) {
                    contacts.push(LinkContact { link, obstacle, contact: cp });
                }
            }
        }
        FingerState {
            name: self.finger.name,
            angles: run.angles.clone(),
            endpoints,
            contacts,
            branch_tension: tension,
            branch_excursion: self.excursion(&run.angles),
        }
    }
}

/// Computes the quasi-static pose of one finger under a branch tension.
pub fn solve_finger(
    finger: &FingerSpec,
    branch_tension: f64,
    obstacles: &[Obstacle],
) -> Result<(FingerState, SolveDiagnostics)> {
    let problem = FingerProblem::for_finger(finger, obstacles, &[])?;
    let run = problem.solve(branch_tension)?;
    if !run.converged {
        return Err(SimError::NonConvergence {
            iterations: run.iterations,
            residual: run.residual,
        });
    }
    let diag = SolveDiagnostics {
        iterations: run.iterations,
        residual: run.residual,
        converged: run.converged,
    };
    Ok((problem.state(branch_tension, &run), diag))
}

struct ActuatorSolve {
    states: Vec<(FingerName, FingerState, SolveRun)>,
    tendon: TendonState,
}

fn branch_tension(actuator: &ActuatorSpec, t: f64) -> f64 {
    match actuator.coupling {
        Coupling::Direct => t,
        Coupling::MovablePulley => t / 2.0,
    }
}

fn solve_actuator(
    spec: &HandSpec,
    actuator: &ActuatorSpec,
    command: &HandCommand,
    act_index: usize,
    obstacles: &[Obstacle],
    loads: &FingerLoads,
) -> Result<ActuatorSolve> {
    let problems: Vec<FingerProblem> = actuator
        .driven_fingers
        .iter()
        .map(|&name| {
            FingerProblem::for_finger(spec.finger(name), obstacles, &loads[name.index()])
        })
        .collect::<Result<Vec<_>>>()?;

    let solve_all = |t_act: f64| -> Result<Vec<SolveRun>> {
        let tb = branch_tension(actuator, t_act);
        problems.iter().map(|p| p.solve(tb)).collect()
    };

    let (t_act, saturated, runs) = match command {
        HandCommand::Tensions(ts) => {
            let t_req = ts[act_index];
            if t_req < 0.0 {
                return Err(SimError::Domain(format!(
                    "actuator {} commanded negative tension {t_req}",
                    actuator.id
                )));
            }
            let saturated = t_req > actuator.max_tension;
            let t = t_req.min(actuator.max_tension);
            let runs = solve_all(t)?;
            (t, saturated, runs)
        }
        HandCommand::Excursions(es) => {
            let e_cmd = es[act_index];
            if e_cmd < 0.0 {
                return Err(SimError::Domain(format!(
                    "actuator {} commanded negative excursion {e_cmd}",
                    actuator.id
                )));
            }
            let target = e_cmd * actuator.driven_fingers.len() as f64;
            let total = |runs: &[SolveRun]| -> f64 {
                runs.iter()
                    .zip(&problems)
                    .map(|(r, p)| p.excursion(&r.angles))
                    .sum()
            };

            let runs0 = solve_all(0.0)?;
            if total(&runs0) >= target - 1e-12 {
                // Wire slack (or exactly at rest): tension cannot push.
                (0.0, false, runs0)
            } else {
                // Tension continuation: march upward from the zero-tension
                // equilibrium, warm-starting every probe from the pose one
                // step below, so the wire follows one continuous branch.
                // A global re-solve per probe would jump between energy
                // basins and make excursion discontinuous in tension.
                let follow = |t_act: f64, from: &[SolveRun]| -> Vec<SolveRun> {
                    let tb = branch_tension(actuator, t_act);
                    from.iter()
                        .zip(&problems)
                        .map(|(r, p)| p.minimize(tb, &r.angles, SOLVER_TOL, SOLVER_MAX_ITER))
                        .collect()
                };

                // Adaptive step control: a probe that overshoots the target
                // excursion is rejected and retried at half the step, so the
                // accepted path advances in small moves and the final
                // crossing is probed from an adjacent pose. Large probes
                // from far-away poses could tunnel through thin contact
                // barriers into a different basin.
                let mut t = 0.0;
                let mut cur = runs0;
                let mut step = actuator.max_tension / 64.0;
                let min_step = actuator.max_tension * 2.0_f64.powi(-52);
                let mut hi: Option<(f64, Vec<SolveRun>)> = None;
                let mut budget = 512;
                while step > min_step && t < actuator.max_tension && budget > 0 {
                    budget -= 1;
                    let t_next = (t + step).min(actuator.max_tension);
                    let probe = follow(t_next, &cur);
                    if total(&probe) >= target {
                        hi = Some((t_next, probe));
                        step *= 0.5;
                    } else {
                        t = t_next;
                        cur = probe;
                        if hi.is_none() {
                            step = (step * 2.0).min(actuator.max_tension / 64.0);
                        }
                    }
                }
                match hi {
                    Some((t_hi, runs)) => (t_hi, false, runs),
                    None => (actuator.max_tension, true, cur),
                }
            }
        }
    };

    let tb = branch_tension(actuator, t_act);
    let mut states = Vec::with_capacity(problems.len());
    let mut branch_tensions = Vec::new();
    let mut branch_excursions = Vec::new();
    for (i, p) in problems.iter().enumerate() {
        let st = p.state(tb, &runs[i]);
        branch_tensions.push(tb);
        branch_excursions.push(st.branch_excursion);
        states.push((actuator.driven_fingers[i], st, runs[i].clone()));
    }
    let actuator_excursion =
        branch_excursions.iter().sum::<f64>() / branch_excursions.len() as f64;

    Ok(ActuatorSolve {
        states,
        tendon: TendonState {
            actuator_tension: t_act,
            branch_tensions,
            actuator_excursion,
            branch_excursions,
            saturated,
        },
    })
}

/// Solves the whole hand under per-actuator commands (tension or wire
/// excursion), consistent with the pulley tension split and excursion
/// conservation, and populates the sensor readings.
pub fn solve_hand(
    spec: &HandSpec,
    command: &HandCommand,
    obstacles: &[Obstacle],
    loads: &FingerLoads,
) -> Result<HandState> {
    let n_cmd = match command {
        HandCommand::Tensions(v) => v.len(),
        HandCommand::Excursions(v) => v.len(),
    };
    if n_cmd != spec.actuators.len() {
        return Err(SimError::Domain(format!(
            "expected {} actuator commands, got {n_cmd}",
            spec.actuators.len()
        )));
    }

    let mut fingers: Vec<Option<FingerState>> = vec![None; 5];
    let mut tendons = Vec::with_capacity(spec.actuators.len());
    let mut iterations = 0usize;
    let mut residual = 0.0f64;
    let mut converged = true;

    for (ai, actuator) in spec.actuators.iter().enumerate() {
        let solved = solve_actuator(spec, actuator, command, ai, obstacles, loads)?;
        for (name, state, run) in solved.states {
            iterations = iterations.max(run.iterations);
            residual = residual.max(run.residual);
            converged &= run.converged;
            fingers[name.index()] = Some(state);
        }
        tendons.push(solved.tendon);
    }

    let fingers: Vec<FingerState> = fingers
        .into_iter()
        .map(|f| f.expect("every finger driven by exactly one actuator"))
        .collect();

    let mut distal = [0.0; 5];
    for f in &fingers {
        distal[f.name.index()] = f.distal_force();
    }
    let sensors = read_sensors(&distal, obstacles, &spec.palm_sensor_sites, spec.sensor_max);

    Ok(HandState {
        fingers,
        tendons,
        sensors,
        diagnostics: SolveDiagnostics { iterations, residual, converged },
    })
}
