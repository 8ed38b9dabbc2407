use nalgebra::{DVector, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::disturbance::HeldDisturbance;
use super::plant::step_plant;
use super::scenario::Scenario;
use super::trace::{Outcome, StepFlags, Trace, TraceHeader, TraceRecord, TraceSummary, TRACE_SCHEMA};
use crate::bounds::BoundMethod;
use crate::error::{invalid, Error, Result};
use crate::governor::{
    free_energy, metric_dist_sq, project_goal, AugmentedState, BoundEvaluator, GovernorState, Path, SafeZone,
};
use crate::linearization::{feedback_linearize, NonlinearPlant};
use crate::world::{dist_to_obstacles, plan_toward, raycast, update_grid, GroundTruthMap, OccupancyGrid, Pose2};

/// Closed-loop run: the trace and the occupancy grid at the end.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub trace: Trace,
    pub grid: OccupancyGrid,
}

const CHAIN_TOL: f64 = 1e-9;

fn vec2(v: &DVector<f64>) -> Vector2<f64> {
    Vector2::new(v[0], v[1])
}

/// Runs the governor-in-the-loop simulation for a plant scenario on `map`.
///
/// Every control period the robot scans, updates its grid, replans on the
/// replan schedule, evaluates the free energy at the current governor
/// position, projects the path into the safe zone and moves the governor.
/// Between control steps the plant is integrated at `dt` under the
/// linearizing law and the held disturbance.
pub fn run_closed_loop(scenario: &Scenario, map: &GroundTruthMap) -> Result<SimResult> {
    let setup = scenario.build()?;
    let (Some(plant), Some(real), Some(gains)) = (&setup.plant, &setup.realization, &setup.gains) else {
        return Err(invalid("closed-loop simulation needs a plant scenario"));
    };
    let x0 = scenario.initial_state.ok_or_else(|| invalid("scenario has no initial state"))?;
    let goal = scenario.goal_point()?;
    let params = scenario.governor_params()?;
    let s = &params.metric;
    let eval = BoundEvaluator::new(setup.system.clone())?;
    let ultimate = eval.ultimate(params.bound_method)?;
    let goal_eps = ultimate / s.min_eigenvalue()?;
    let inflation = scenario.inflation_radius(&eval)?;
    let lidar = scenario.lidar;
    let mut grid = OccupancyGrid::for_map(map, scenario.grid_resolution_m)?;

    let dt = scenario.dt_s;
    let sub = scenario.control_steps();
    let tc = dt * sub as f64;
    let replan_every = ((scenario.replan_period_s / tc).round() as usize).max(1);
    let horizon_steps = (scenario.horizon_s / tc).ceil() as usize;
    // v = -K (z - C^T g): the chain tracks the governor position
    let k = gains.matrix();
    let ct = real.c.transpose();

    let mut x = x0.to_vector();
    let y0 = vec2(&plant.output(&x));
    if map.collides(&y0) {
        return Err(Error::PoseInObstacle { x: y0.x, y: y0.y });
    }
    let mut gov = GovernorState::new(y0);
    let mut disturbance = HeldDisturbance::new(
        scenario.disturbance,
        plant.input_dim(),
        scenario.delta_w,
        ChaCha8Rng::seed_from_u64(scenario.seed),
    );
    let mut path: Option<Path> = None;
    let mut records = Vec::with_capacity(horizon_steps + 1);
    let mut pending = StepFlags::default();
    let mut outcome = Outcome::HorizonReached;
    let mut time = 0.0;

    'control: for step in 0..=horizon_steps {
        let t = step as f64 * tc;
        time = t;
        let y = vec2(&plant.output(&x));
        let pose = Pose2 { x: y.x, y: y.y, heading: x[2] };
        let beams = raycast(map, &pose, &lidar)?;
        update_grid(&mut grid, &y, &beams, lidar.max_range_m);

        let mut flags = std::mem::take(&mut pending);
        if step % replan_every == 0 || path.is_none() {
            match plan_toward(&grid, &gov.g, &goal, inflation) {
                Ok(r) => {
                    path = Some(r.path);
                    gov.sigma = 0.0;
                    flags.replanned = true;
                }
                Err(e) if path.is_none() => return Err(e),
                Err(_) => {}
            }
        }
        let path_ref = path.as_ref().expect("planned above");

        let d = dist_to_obstacles(&grid, &gov.g, s, lidar.max_range_m);
        let dist_sq = d * d;
        let z_tilde = &real.t * plant.coordinate_map(&x);
        let aug = AugmentedState { z_tilde, g: gov.g };
        let fe = free_energy(&aug, dist_sq, &eval, &params)?;
        if step == 0 && fe.bound.delta > dist_sq {
            return Err(Error::InitiallyUnsafe { bound: fe.bound.delta, clearance: dist_sq });
        }
        let bound_sdp = if scenario.record_sdp && params.bound_method != BoundMethod::Sdp {
            Some(eval.bound(&aug.error_state(eval.system()), BoundMethod::Sdp)?.delta)
        } else {
            None
        };
        let zone = SafeZone::new(gov.g, fe.delta_e, s.clone());
        let proj = project_goal(&zone, path_ref, gov.sigma);
        let dist_sq_g_y = metric_dist_sq(s, &(y - gov.g));
        flags.chain_ok = dist_sq_g_y <= fe.bound.delta + CHAIN_TOL
            && fe.bound.delta <= dist_sq - params.eps_e + CHAIN_TOL;

        let g_before = gov.g;
        gov.step(&proj, params.k_g, tc);
        flags.stalled = proj.stalled;
        flags.governor_moved = gov.g != g_before;
        records.push(TraceRecord {
            t,
            state: std::array::from_fn(|i| x[i]),
            y: [y.x, y.y],
            g: [g_before.x, g_before.y],
            g_bar: [proj.g_bar.x, proj.g_bar.y],
            sigma: proj.sigma,
            delta_e: fe.delta_e,
            bound: fe.bound.delta,
            alpha_star: fe.bound.alpha_star,
            bound_sdp,
            dist_sq_g_obstacles: dist_sq,
            dist_sq_g_y,
            clearance_m: map.clearance(&y),
            flags,
        });

        if metric_dist_sq(s, &(y - goal)) <= goal_eps {
            outcome = Outcome::GoalReached;
            break;
        }
        if step == horizon_steps {
            break;
        }

        let g_col = DVector::from_column_slice(gov.g.as_slice());
        let target = &ct * &g_col;
        for j in 0..sub {
            let tj = t + j as f64 * dt;
            let z = plant.coordinate_map(&x);
            let v_cmd = -(k * (z - &target));
            let (xr, clamped) = plant.regularized(&x);
            let u = feedback_linearize(plant, &xr, &v_cmd)?;
            let w = disturbance.at(tj).clone();
            x = step_plant(plant, tj, &x, &u, &w, dt)?;
            pending.steering_stop |= plant.apply_steering_stop(&mut x);
            pending.singular_clamp |= clamped;
            pending.envelope_violation |= !plant.within_envelope(&x);
            let yj = vec2(&plant.output(&x));
            if map.collides(&yj) {
                outcome = Outcome::Collision;
                time = tj + dt;
                break 'control;
            }
        }
    }

    let header = TraceHeader {
        schema: TRACE_SCHEMA,
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        bound_method: params.bound_method,
        ultimate_bound: ultimate,
        inflation_radius_m: inflation,
        goal: [goal.x, goal.y],
        dt_s: dt,
        control_period_s: tc,
    };
    let count = |f: fn(&StepFlags) -> bool| records.iter().filter(|r| f(&r.flags)).count();
    let summary = TraceSummary {
        outcome,
        time_s: time,
        steps: records.len(),
        safety_breaches: count(|f| f.governor_moved && !f.chain_ok),
        envelope_violations: count(|f| f.envelope_violation),
        singular_clamps: count(|f| f.singular_clamp),
        stalled_steps: count(|f| f.stalled),
        min_clearance_m: records.iter().map(|r| r.clearance_m).fold(f64::INFINITY, f64::min),
        final_path: path.map(|p| p.waypoints().iter().map(|q| [q.x, q.y]).collect()).unwrap_or_default(),
    };
    Ok(SimResult { trace: Trace { header, records, summary }, grid })
}
