mod common;

use hdnf_core::deployment::Deployment;
use hdnf_core::pipeline::{DeploymentSource, PipelineOptions, coverage_metrics, objective_value, run_pipeline, run_with_plan};
use hdnf_core::planner::NoPath;
use hdnf_core::scenario::{ScenarioConfig, generate_scenario};
use hdnf_core::tasking::{RoutePlan, assign_tasks};
use proptest::prelude::*;

use common::{full_cover, near_cover, two_task_toy};

fn fixed(p: Vec<hdnf_core::channel::Position3D>) -> DeploymentSource<'static> {
    DeploymentSource::Fixed(Deployment::new(p))
}

#[test]
fn toy_route_visits_far_task_first() {
    let s = two_task_toy();
    assert_eq!(assign_tasks(&s).unwrap().sequences, vec![vec![1, 0]]);
}

#[test]
fn full_coverage_has_no_outage() {
    let s = two_task_toy();
    let out = run_pipeline(&s, fixed(full_cover()), &PipelineOptions::default()).unwrap();
    let m = &out.metrics;
    assert_eq!(m.task_success_rate, 1.0);
    assert_eq!(m.outage_slots, 0);
    let t = &out.trajectories[0];
    assert_eq!(t.waypoints.first(), t.waypoints.last());
    let len: f64 = t.waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum();
    assert!((len - t.length).abs() < 1e-6);
    assert!((t.energy - s.fleet.energy_coeff * t.length * 2.0).abs() < 1e-3);
    // Delivery times follow the flown 3D path; the near task waits for its window.
    let times = &m.uavs[0].delivery_times_s;
    assert!(times[0].unwrap() >= s.tasks[1].location.distance(&s.depot) / s.fleet.max_speed);
    assert!(times[1].unwrap() >= 150.0);
}

#[test]
fn uncovered_first_task_fails_the_rest() {
    let s = two_task_toy();
    let out = run_pipeline(&s, fixed(near_cover()), &PipelineOptions::default()).unwrap();
    let u = &out.metrics.uavs[0];
    assert_eq!(u.failed_leg, Some(1));
    assert_eq!(u.delivery_times_s, vec![None, None]);
    assert_eq!(out.metrics.task_success_rate, 0.0);
    assert!(out.metrics.outage_slots > 0);
}

#[test]
fn covered_prefix_still_counts() {
    let s = two_task_toy();
    // Near task first: delivered, then the far leg fails.
    let plan = RoutePlan::from_sequences(&s, vec![vec![0, 1]]);
    let out = run_with_plan(&s, plan, fixed(near_cover()), &PipelineOptions::default()).unwrap();
    let u = &out.metrics.uavs[0];
    assert_eq!(u.failed_leg, Some(2));
    assert!(u.delivery_times_s[0].is_some() && u.delivery_times_s[1].is_none());
    assert_eq!(out.metrics.tasks_succeeded, 1);
}

#[test]
fn infeasible_stage_one_is_reported() {
    let s = generate_scenario(1, 3000.0, 30, &ScenarioConfig::default()).unwrap();
    let r = run_pipeline(&s, fixed(full_cover()), &PipelineOptions::default());
    assert!(matches!(r, Err(hdnf_core::pipeline::PipelineError::Infeasible(_))));
}

#[test]
fn goal_outage_is_named() {
    let s = two_task_toy();
    let planner = hdnf_core::planner::Planner::new(&s, &near_cover());
    let err = planner.route_to_trajectory(&[1, 0], &s).unwrap_err();
    assert_eq!(err.leg, 1);
    assert!(matches!(err.reason, NoPath::GoalInOutage(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn task_accounting_is_exact(seed in 0u64..1000, n_bs in 0usize..4) {
        let mut cfg = ScenarioConfig::default();
        cfg.fleet.num_delivery_uavs = 2;
        let mut s = generate_scenario(seed, 1000.0, 4, &cfg).unwrap();
        s.sampling.k = 25;
        let out = run_pipeline(&s, DeploymentSource::Grid { n_bs, altitude: 120.0 }, &PipelineOptions::default());
        if let Ok(out) = out {
            let m = &out.metrics;
            let failed: usize = m.uavs.iter().map(|u| u.delivery_times_s.iter().filter(|t| t.is_none()).count()).sum();
            prop_assert_eq!(m.tasks_succeeded + failed, s.tasks.len());
            prop_assert!((0.0..=1.0).contains(&m.task_success_rate));
            prop_assert!(out.deployment.len() <= out.unpruned_bs);
            for (u, t) in m.uavs.iter().zip(&out.trajectories) {
                if u.failed_leg.is_none() {
                    prop_assert_eq!(u.outage_slots, 0);
                    prop_assert_eq!(t.waypoints.first(), t.waypoints.last());
                }
            }
        }
    }

    /// The station and coverage terms of the objective, with trajectory
    /// energy held fixed. Pruned deployments change the comm field, so the
    /// realized energy term can move either way and is not compared.
    #[test]
    fn pruning_does_not_worsen_deployment_terms_beyond_eps(seed in 0u64..1000, n_bs in 1usize..7) {
        let mut s = generate_scenario(seed, 1000.0, 4, &ScenarioConfig::default()).unwrap();
        s.sampling.k = 25;
        let raw = hdnf_core::deployment::grid_baseline(&s, n_bs, 120.0);
        let eps = 0.01;
        let pruned = hdnf_core::deployment::prune_deployment(&raw, &s, eps);
        let w = &s.weights;
        let obj = |d: &Deployment| objective_value(d.len(), 0.0, &coverage_metrics(&d.positions, &s), w);
        prop_assert!(obj(&pruned) <= obj(&raw) + eps * (w.gamma_t + w.gamma_v + w.gamma_c), "{} -> {}", obj(&raw), obj(&pruned));
    }
}
