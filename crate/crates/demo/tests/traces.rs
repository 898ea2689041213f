use heol_demo::{decay_demo, estimator_demo, moving_disturbance, simulate_example, MAX_POINTS};

#[test]
fn example_trace_tracks() {
    let tr = simulate_example(1.1, true, true, -1.0, -0.15, 30, 0.0, 0);
    assert_eq!(tr.error(), None);
    assert!(tr.len() <= MAX_POINTS && tr.len() > 1000);
    let t = tr.column("t").unwrap();
    assert_eq!(*t.last().unwrap(), 150.0);
    let (y2, r2) = (tr.column("y2").unwrap(), tr.column("y2_ref").unwrap());
    assert!((y2.last().unwrap() - r2.last().unwrap()).abs() < 1e-2);
    assert!(tr.summary().contains("RMS"));
}

#[test]
fn example_without_feedback_reports_divergence() {
    let tr = simulate_example(1.0, false, false, -1.0, -0.15, 30, 0.0, 0);
    assert!(tr.error().unwrap().contains("reached"));
    assert!(!tr.is_empty());
}

#[test]
fn bad_parameters_become_errors() {
    assert!(simulate_example(1.0, false, true, 0.5, -0.15, 30, 0.0, 0)
        .error()
        .is_some());
    assert!(estimator_demo(3, 30, 0.0, 0).error().is_some());
    assert!(estimator_demo(1, 2, 0.0, 0).error().is_some());
    assert!(decay_demo(1.0, 2.0, 1.0, 1).error().is_some());
}

#[test]
fn estimator_follows_disturbance() {
    for order in [1, 2] {
        let tr = estimator_demo(order, 30, 0.0, 0);
        assert_eq!(tr.error(), None);
        let (t, f) = (tr.column("t").unwrap(), tr.column("F_est").unwrap());
        assert!(f[0].is_nan());
        // constant stretch before the step; residual comes from the held input
        let i = t.iter().position(|&x| x >= 2.0).unwrap();
        assert!(
            (f[i] - moving_disturbance(t[i])).abs() < 2e-2,
            "order {order}: {}",
            f[i]
        );
    }
}

#[test]
fn decay_rate_matches_gain() {
    let tr = decay_demo(1.0, 2.0, 1.5, 30);
    assert_eq!(tr.error(), None);
    let rate: f64 = tr.summary().split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((rate - 1.0).abs() < 0.05, "{}", tr.summary());
}
