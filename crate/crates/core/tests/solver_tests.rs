//! Equilibrium solver checks against independent oracles: rotation-matrix
//! composition for kinematics, central finite differences for the energy
//! gradient, closed forms and dense grid scans for the minimizer.

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use tendon_hand_sim::contact::{ObjectShape, Obstacle, SPONGE_STIFFNESS};
use tendon_hand_sim::geom::{Pose2, Vec2};
use tendon_hand_sim::hand_model::{default_hand, FingerName, FingerSpec};
use tendon_hand_sim::solver::{
    forward_kinematics, solve_finger, solve_hand, FingerProblem, HandCommand,
};

fn test_finger(links: [f64; 3]) -> FingerSpec {
    let mut f = default_hand().finger(FingerName::Index).clone();
    for (j, len) in f.joints.iter_mut().zip(links) {
        j.link_length = len;
    }
    f.base_pose = Pose2::new(0.0, 0.0, 0.0);
    f
}

/// Independent oracle: chain the links through explicit 2-D rotation
/// matrices instead of the incremental heading used by the implementation.
fn fk_oracle(finger: &FingerSpec, angles: &[f64]) -> Vec<Vec2> {
    fn rot(theta: f64, v: Vec2) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }
    let mut points = vec![finger.base_pose.position];
    for j in 0..angles.len() {
        let cumulative: f64 = finger.base_pose.angle + angles[..=j].iter().sum::<f64>();
        let step = rot(cumulative, Vec2::new(finger.joints[j].link_length, 0.0));
        points.push(*points.last().unwrap() + step);
    }
    points
}

#[test]
fn fk_straight_chain() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let pts = forward_kinematics(&f, &[0.0, 0.0, 0.0]);
    assert_relative_eq!(pts[3].x, 0.085, max_relative = 1e-14);
    assert_relative_eq!(pts[3].y, 0.0, epsilon = 1e-14);
}

#[test]
fn fk_rigid_rotation_about_base() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let pts = forward_kinematics(&f, &[PI / 2.0, 0.0, 0.0]);
    assert_relative_eq!(pts[3].x, 0.0, epsilon = 1e-14);
    assert_relative_eq!(pts[3].y, 0.085, max_relative = 1e-14);
}

#[test]
fn fk_full_curl_matches_rotation_composition() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let angles = [PI / 2.0, PI / 2.0, PI / 2.0];
    let pts = forward_kinematics(&f, &angles);
    assert_relative_eq!(pts[3].x, -0.025, max_relative = 1e-12);
    assert_relative_eq!(pts[3].y, 0.020, max_relative = 1e-12);

    let oracle = fk_oracle(&f, &angles);
    for (p, q) in pts.iter().zip(&oracle) {
        assert_relative_eq!(p.x, q.x, epsilon = 1e-12);
        assert_relative_eq!(p.y, q.y, epsilon = 1e-12);
    }
}

#[test]
fn fk_random_poses_match_rotation_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let mut f = test_finger([0.040, 0.025, 0.020]);
        f.base_pose = Pose2::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-PI..PI));
        let angles: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..PI / 2.0)).collect();
        let pts = forward_kinematics(&f, &angles);
        let oracle = fk_oracle(&f, &angles);
        for (p, q) in pts.iter().zip(&oracle) {
            assert_relative_eq!(p.x, q.x, epsilon = 1e-12);
            assert_relative_eq!(p.y, q.y, epsilon = 1e-12);
        }
    }
}

#[test]
fn energy_zero_at_rest_without_loads() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let p = FingerProblem::new(&f, vec![], &[]).unwrap();
    assert_eq!(p.energy(0.0, &[0.0, 0.0, 0.0]), 0.0);
}

#[test]
fn energy_single_joint_spring_value() {
    // One joint with the 443 deg/Nm spring at 1 rad, no tension.
    let mut f = test_finger([0.040, 0.025, 0.020]);
    f.joints.truncate(1);
    f.joints[0].compliance = 443.0;
    f.joints[0].limits = [0.0, 2.0];
    let p = FingerProblem::new(&f, vec![], &[]).unwrap();
    assert_relative_eq!(p.energy(0.0, &[1.0]), 0.06467, max_relative = 1e-4);
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = test_finger([0.040, 0.025, 0.020]);
    let disk = ObjectShape::disk(Vec2::new(0.05, 0.03), 0.02, 1e4);
    let obstacles = [(0usize, &disk)];

    let mut checked_contact = 0;
    for _ in 0..300 {
        let p = FingerProblem::new(&f, obstacles.to_vec(), &[]).unwrap();
        let tension = rng.gen_range(0.0..200.0);
        let angles: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..PI / 2.0 - 0.05)).collect();

        // Skip samples too close to the contact activation boundary, where
        // the energy is only C1 and finite differences straddle the kink.
        let pts = forward_kinematics(&f, &angles);
        let near_kink = (0..3).any(|l| {
            let c = tendon_hand_sim::contact::link_penetration(&disk, pts[l], pts[l + 1]);
            matches!(c, Some(cp) if cp.penetration < 1e-4)
        });
        if near_kink {
            continue;
        }
        let in_contact = (0..3).any(|l| {
            tendon_hand_sim::contact::link_penetration(&disk, pts[l], pts[l + 1]).is_some()
        });
        if in_contact {
            checked_contact += 1;
        }

        let g = p.gradient(tension, &angles);
        for i in 0..3 {
            let h = 1e-7;
            let mut up = angles.clone();
            let mut dn = angles.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (p.energy(tension, &up) - p.energy(tension, &dn)) / (2.0 * h);
            let scale = g[i].abs().max(fd.abs()).max(1e-3);
            assert!(
                (g[i] - fd).abs() / scale < 1e-5,
                "component {i}: analytic {} vs fd {} at {angles:?}, T={tension}",
                g[i],
                fd
            );
        }
    }
    assert!(checked_contact > 20, "too few in-contact samples: {checked_contact}");
}

#[test]
fn free_finger_at_zero_tension_returns_rest_exactly() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let (state, diag) = solve_finger(&f, 0.0, &[]).unwrap();
    assert_eq!(state.angles, vec![0.0, 0.0, 0.0]);
    assert!(diag.converged);
}

#[test]
fn single_joint_closed_form() {
    // kappa * theta = r * T  =>  theta = r T / kappa, cross-checked by a
    // dense 1-D scan of the energy.
    let mut f = test_finger([0.040, 0.025, 0.020]);
    f.joints.truncate(1);
    f.joints[0].compliance = 443.0;
    f.joints[0].moment_arm = 0.010;
    f.joints[0].limits = [0.0, PI / 2.0];
    let kappa = f.joints[0].stiffness().unwrap();
    let (state, _) = solve_finger(&f, 10.0, &[]).unwrap();
    let expected = 0.010 * 10.0 / kappa;
    assert_relative_eq!(expected, 0.7733, max_relative = 1e-3);
    assert_relative_eq!(state.angles[0], expected, max_relative = 1e-9);

    let p = FingerProblem::new(&f, vec![], &[]).unwrap();
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=10_000 {
        let th = PI / 2.0 * i as f64 / 10_000.0;
        let e = p.energy(10.0, &[th]);
        if e < best.0 {
            best = (e, th);
        }
    }
    assert!((state.angles[0] - best.1).abs() < 2e-4);
    assert!(p.energy(10.0, &state.angles) <= best.0 + 1e-12);
}

#[test]
fn high_tension_clamps_all_joints_at_limits() {
    let f = test_finger([0.040, 0.025, 0.020]);
    // Torque far above every limit torque.
    let (state, _) = solve_finger(&f, 250.0, &[]).unwrap();
    for (i, j) in f.joints.iter().enumerate() {
        assert_relative_eq!(state.angles[i], j.limits[1], max_relative = 1e-12);
    }

    // Oracle: dense grid at 2 degrees confirms the boundary minimum.
    let p = FingerProblem::new(&f, vec![], &[]).unwrap();
    let e_solver = p.energy(250.0, &state.angles);
    let e_grid = grid_min(&p, 250.0, 2.0_f64.to_radians());
    assert!(e_solver <= e_grid + 1e-6);
}

/// Test-side oracle: dense grid scan of the energy over the box limits.
fn grid_min(p: &FingerProblem, tension: f64, step: f64) -> f64 {
    let n = p.finger.joints.len();
    let lims: Vec<[f64; 2]> = p.finger.joints.iter().map(|j| j.limits).collect();
    let counts: Vec<usize> = lims
        .iter()
        .map(|l| ((l[1] - l[0]) / step).ceil() as usize + 1)
        .collect();
    let mut idx = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let x: Vec<f64> = (0..n)
            .map(|i| lims[i][0] + (lims[i][1] - lims[i][0]) * idx[i] as f64 / (counts[i] - 1) as f64)
            .collect();
        best = best.min(p.energy(tension, &x));
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
            return best;
        }
    }
}

#[test]
fn solver_beats_grid_scan_on_random_instances() {
    let hand = default_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..20 {
        let finger = hand.fingers[rng.gen_range(0..5)].clone();
        let tension = rng.gen_range(0.0..294.0);
        let disk;
        let obstacles: Vec<(usize, &ObjectShape)> = if rng.gen_bool(0.5) {
            disk = ObjectShape::disk(
                finger.base_pose.position + Vec2::new(rng.gen_range(0.01..0.07), rng.gen_range(0.0..0.05)),
                rng.gen_range(0.008..0.03),
                *[1e5, SPONGE_STIFFNESS].get(rng.gen_range(0..2)).unwrap(),
            );
            vec![(0, &disk)]
        } else {
            vec![]
        };
        let p = FingerProblem::new(&finger, obstacles, &[]).unwrap();
        let run = p.solve(tension).unwrap();
        let e_grid = grid_min(&p, tension, 2.0_f64.to_radians());
        assert!(
            run.energy <= e_grid + 1e-6,
            "trial {trial}: solver {} > grid {}",
            run.energy,
            e_grid
        );
    }
}

#[test]
fn elastic_return_after_load_sequence() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let disk = ObjectShape::disk(Vec2::new(0.05, 0.02), 0.015, 1e5);
    let obstacles = vec![Obstacle::for_all(disk)];
    for tension in [50.0, 200.0, 450.0, 10.0] {
        let _ = solve_finger(&f, tension, &obstacles).unwrap();
    }
    // Zero-load solve is a pure function of inputs: rest angles exactly.
    let (state, _) = solve_finger(&f, 0.0, &[]).unwrap();
    for a in &state.angles {
        assert!(a.abs() <= 1e-9, "rest angle {a}");
    }
}

#[test]
fn monotone_flexion_in_tension() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let mut last = vec![0.0; 3];
    for i in 0..30 {
        let t = i as f64 * 10.0;
        let (state, _) = solve_finger(&f, t, &[]).unwrap();
        for (a, b) in state.angles.iter().zip(&last) {
            assert!(a + 1e-9 >= *b, "angle decreased on tension ramp: {a} < {b}");
        }
        last = state.angles;
    }
}

#[test]
fn local_minimum_certificate_under_random_perturbations() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let disk = ObjectShape::disk(Vec2::new(0.045, 0.025), 0.018, 1e4);
    let obstacles = vec![Obstacle::for_all(disk)];
    let (state, _) = solve_finger(&f, 120.0, &obstacles).unwrap();
    let p = FingerProblem::for_finger(&f, &obstacles, &[]).unwrap();
    let e0 = p.energy(120.0, &state.angles);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let deg = 1.0_f64.to_radians();
    for _ in 0..100 {
        let perturbed: Vec<f64> = state
            .angles
            .iter()
            .zip(&f.joints)
            .map(|(&a, j)| (a + rng.gen_range(-deg..deg)).clamp(j.limits[0], j.limits[1]))
            .collect();
        assert!(p.energy(120.0, &perturbed) >= e0 - 1e-9);
    }
}

#[test]
fn joint_limits_never_violated() {
    let f = test_finger([0.040, 0.025, 0.020]);
    let disk = ObjectShape::disk(Vec2::new(0.05, 0.02), 0.015, 1e5);
    let obstacles = vec![Obstacle::for_all(disk)];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let t = rng.gen_range(0.0..490.0);
        let (state, _) = solve_finger(&f, t, &obstacles).unwrap();
        for (a, j) in state.angles.iter().zip(&f.joints) {
            assert!(*a >= j.limits[0] - 1e-12 && *a <= j.limits[1] + 1e-12);
        }
    }
}

#[test]
fn hand_all_zero_tension_is_rest_and_silent() {
    let hand = default_hand();
    let state = solve_hand(&hand, &HandCommand::Tensions(vec![0.0; 3]), &[], &Default::default()).unwrap();
    for f in &state.fingers {
        assert_eq!(f.angles, vec![0.0, 0.0, 0.0]);
    }
    assert!(state.sensors.iter().all(|s| s.force == 0.0));
    assert!(state.diagnostics.converged);
}

#[test]
fn hand_pulley_conservation_in_length_mode() {
    let hand = default_hand();
    let cmd = HandCommand::Excursions(vec![0.004, 0.006, 0.002]);
    let state = solve_hand(&hand, &cmd, &[], &Default::default()).unwrap();
    for t in &state.tendons {
        let sum: f64 = t.branch_excursions.iter().sum();
        let expected = t.actuator_excursion * t.branch_excursions.len() as f64;
        assert_relative_eq!(sum, expected, epsilon = 1e-12);
        for pair in t.branch_tensions.windows(2) {
            assert_eq!(pair[0], pair[1]);
        }
    }
    assert!(state.diagnostics.converged);
}

#[test]
fn hand_length_mode_matches_free_excursion() {
    // Without contact the pair fingers split excursion; commanded excursion
    // must be recovered exactly.
    let hand = default_hand();
    let cmd = HandCommand::Excursions(vec![0.005, 0.005, 0.005]);
    let state = solve_hand(&hand, &cmd, &[], &Default::default()).unwrap();
    for t in &state.tendons {
        assert_relative_eq!(t.actuator_excursion, 0.005, max_relative = 1e-6);
        assert!(!t.saturated);
        assert!(t.actuator_tension > 0.0);
    }
}

#[test]
fn tension_and_length_commands_agree_at_the_same_equilibrium() {
    // Contact-free hand: one energy basin, so the tension-to-excursion map
    // is invertible and both command modes must land on the same state.
    // Tensions are kept moderate so no joint clamps at a limit: a fully
    // clamped finger makes excursion constant in tension and the inverse
    // map non-unique.
    let hand = default_hand();
    let obstacles: Vec<Obstacle> = vec![];

    // Solve in tension mode, then command the resulting excursions.
    let tensions = vec![5.0, 12.0, 9.0];
    let by_tension = solve_hand(&hand, &HandCommand::Tensions(tensions), &obstacles, &Default::default()).unwrap();
    let excursions: Vec<f64> = by_tension.tendons.iter().map(|t| t.actuator_excursion).collect();
    let by_length = solve_hand(&hand, &HandCommand::Excursions(excursions), &obstacles, &Default::default()).unwrap();

    for (a, b) in by_tension.fingers.iter().zip(&by_length.fingers) {
        for (x, y) in a.angles.iter().zip(&b.angles) {
            assert!((x - y).abs() < 1e-4, "{} vs {}", x, y);
        }
    }
    for (ta, tb) in by_tension.tendons.iter().zip(&by_length.tendons) {
        assert!((ta.actuator_tension - tb.actuator_tension).abs() < 0.5,
            "{} vs {}", ta.actuator_tension, tb.actuator_tension);
    }
}

#[test]
fn saturation_is_clamped_and_flagged() {
    let hand = default_hand();
    let state = solve_hand(&hand, &HandCommand::Tensions(vec![1000.0, 0.0, 0.0]), &[], &Default::default()).unwrap();
    assert!(state.tendons[0].saturated);
    assert_relative_eq!(state.tendons[0].actuator_tension, hand.actuators[0].max_tension, max_relative = 1e-12);
    assert!(!state.tendons[1].saturated);
}

#[test]
fn conformity_blocked_proximal_still_builds_distal_force() {
    // A large disk stops the index proximal link early; with enough tension
    // the distal joints keep flexing, wrap the disk, and the distal link
    // develops contact force, while the pulley lets the middle finger keep
    // closing against its own plane.
    let hand = default_hand();
    let disk = ObjectShape::disk(Vec2::new(0.090, 0.030), 0.018, 1e5);
    let plane = ObjectShape::half_plane(Vec2::new(0.0, 0.035), Vec2::new(0.0, -1.0), 1e4);
    let obstacles = vec![
        Obstacle::for_fingers(disk, &[FingerName::Index]),
        Obstacle::for_fingers(plane, &[FingerName::Middle]),
    ];

    // Low tension: the proximal link is already stopped by the disk.
    let low = solve_hand(&hand, &HandCommand::Tensions(vec![0.0, 40.0, 0.0]), &obstacles, &Default::default()).unwrap();
    let index_low = low.finger(FingerName::Index);
    assert!(index_low.contacts.iter().any(|c| c.link == 0), "{:?}", index_low.contacts);

    // High tension: the index wraps the disk (contact on several links,
    // force on the distal link) while the middle fingertip loads its plane.
    let high = solve_hand(&hand, &HandCommand::Tensions(vec![0.0, 300.0, 0.0]), &obstacles, &Default::default()).unwrap();
    let index_high = high.finger(FingerName::Index);
    let touched: std::collections::BTreeSet<usize> =
        index_high.contacts.iter().map(|c| c.link).collect();
    assert!(touched.len() >= 2, "contacts {:?}", index_high.contacts);
    assert!(index_high.distal_force() > 0.0, "index distal force {:?}", index_high.contacts);
    assert!(high.finger(FingerName::Middle).distal_force() > 0.0);
    // The disk stops the proximal joint well short of its limit.
    assert!(index_high.angles[0] < 1.0);
}
