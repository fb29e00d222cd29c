use entfix::metrics::{best_speed_up, primal_gap, primal_integral, time_to_gap, Trajectory};
use proptest::prelude::*;

fn traj(points: Vec<(f64, f64)>) -> Trajectory {
    Trajectory::new(points, 1000.0, 100.0)
}

/// Strictly decreasing objectives at strictly increasing times.
fn trajectories() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1u32..50, 1u32..40), 0..8).prop_map(|steps| {
        let (mut t, mut c) = (0.0, 300.0);
        steps
            .into_iter()
            .map(|(dt, dc)| {
                t += f64::from(dt);
                c = (c - f64::from(dc)).max(100.0);
                (t, c)
            })
            .collect::<Vec<_>>()
    })
}

fn naive_integral(points: &[(f64, f64)], horizon: f64, reference: f64) -> f64 {
    let mut total = 0.0;
    for step in 0..points.len() + 1 {
        let from = if step == 0 { 0.0 } else { points[step - 1].0 };
        let to = points.get(step).map_or(horizon, |p| p.0);
        let gap = if step == 0 { 1.0 } else { primal_gap(points[step - 1].1, reference) };
        total += gap * (to - from);
    }
    total
}

proptest! {
    #[test]
    fn integral_matches_independent_sum(points in trajectories()) {
        let pi = primal_integral(&traj(points.clone()));
        prop_assert!((pi - naive_integral(&points, 1000.0, 100.0)).abs() <= 1e-12 * pi.max(1.0));
    }

    #[test]
    fn earlier_incumbents_never_increase_the_integral(points in trajectories(), i in 0usize..8, shift in 0.0f64..1.0) {
        prop_assume!(i < points.len());
        let mut earlier = points.clone();
        let lo = if i == 0 { 0.0 } else { points[i - 1].0 };
        earlier[i].0 = lo + (points[i].0 - lo) * shift;
        prop_assert!(primal_integral(&traj(earlier)) <= primal_integral(&traj(points)) + 1e-9);
    }

    #[test]
    fn time_to_gap_is_non_increasing(points in trajectories(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let t = traj(points);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        match (time_to_gap(&t, lo), time_to_gap(&t, hi)) {
            (Some(x), Some(y)) => prop_assert!(y <= x + 1e-9),
            (Some(_), None) => prop_assert!(false, "reached a lower gap but not a higher one"),
            _ => {}
        }
    }

    #[test]
    fn self_speed_up_is_one(points in trajectories()) {
        let t = traj(points);
        if let Ok((s, _)) = best_speed_up(&t, &t) {
            prop_assert_eq!(s, 1.0);
        }
    }
}

#[test]
fn speed_up_domain_follows_the_worse_run() {
    let base = Trajectory::new(vec![(50.0, 100.0)], 100.0, 100.0);
    let heur = Trajectory::new(vec![(5.0, 200.0)], 100.0, 100.0);
    let (_, g) = best_speed_up(&heur, &base).unwrap();
    assert!(g >= 0.5);
}
