use hdmn_transport::*;

/// Drive at 10 m/s, then stop at each `(x, y, minutes)` in turn.
fn trace(stops: &[(f64, f64, f64)]) -> Vec<TracePoint> {
    let mut out = Vec::new();
    let mut time = 0.0;
    for &(x, y, minutes) in stops {
        for _ in 0..10 {
            out.push(TracePoint { time, x: x - 100.0, y, speed: 10.0 });
            time += 5.0;
        }
        let end = time + minutes * 60.0;
        while time <= end {
            out.push(TracePoint { time, x, y, speed: 0.1 });
            time += 5.0;
        }
    }
    out.push(TracePoint { time, x: 0.0, y: 0.0, speed: 10.0 });
    out
}

#[test]
fn default_threshold_is_fifteen_minutes() {
    let o = GoalExtraction::default();
    assert_eq!(o.dwell_threshold, 900.0);
    assert_eq!(o.cluster_radius, 50.0);
    assert_eq!(o.stop_speed, 0.5);
}

#[test]
fn one_long_stop_gives_one_goal() {
    let g = RoadGraph::grid(3, 3, 150.0).unwrap();
    let goals = extract_goals(&g, &trace(&[(75.0, 0.0, 20.0)]), &GoalExtraction::default());
    assert_eq!(goals.len(), 1);
    assert_eq!(goals[0].edges, vec![0]);
    assert!((goals[0].center.0 - 75.0).abs() < 1e-9);
    assert!(goals[0].dwell >= 20.0 * 60.0 - 5.0);
}

#[test]
fn short_stops_are_ignored() {
    let g = RoadGraph::grid(3, 3, 150.0).unwrap();
    let goals = extract_goals(&g, &trace(&[(75.0, 0.0, 10.0)]), &GoalExtraction::default());
    assert!(goals.is_empty());
}

#[test]
fn nearby_stops_merge_and_distant_ones_do_not() {
    let g = RoadGraph::grid(5, 5, 150.0).unwrap();
    let o = GoalExtraction::default();
    let close = extract_goals(&g, &trace(&[(75.0, 0.0, 20.0), (85.0, 0.0, 20.0)]), &o);
    assert_eq!(close.len(), 1);
    assert_eq!(close[0].stops.len(), 2);
    assert!((close[0].center.0 - 80.0).abs() < 1e-9);
    let far = extract_goals(&g, &trace(&[(75.0, 0.0, 20.0), (575.0, 0.0, 20.0)]), &o);
    assert_eq!(far.len(), 2);
    assert_ne!(far[0].edges, far[1].edges);
}

#[test]
fn linkage_is_transitive() {
    // 40 m apart each: the ends are 80 m apart but chained through the middle
    let g = RoadGraph::grid(3, 3, 150.0).unwrap();
    let stops = [(20.0, 0.0, 20.0), (60.0, 0.0, 20.0), (100.0, 0.0, 20.0)];
    let goals = extract_goals(&g, &trace(&stops), &GoalExtraction::default());
    assert_eq!(goals.len(), 1);
}
