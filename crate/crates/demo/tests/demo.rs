use gnnlab_demo::{degree_tail_value, edge_thinning_value, flow_gaps_value};

#[test]
fn edge_thinning_tracks_expectation() {
    let v = edge_thinning_value(2000, 3, 6, 20, 4).unwrap();
    let measured = v["measured"].as_array().unwrap();
    let expected = v["expected"].as_array().unwrap();
    assert_eq!(measured.len(), 6);
    assert_eq!(measured[0], v["edges"].as_u64().unwrap() as f64);
    for (a, b) in measured.iter().zip(expected) {
        let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
        assert!((a - b).abs() < 0.05 * b, "{a} vs {b}");
    }
}

#[test]
fn degree_tail_histograms_are_distributions() {
    let v = degree_tail_value(5000, 4, 3, 1).unwrap();
    for key in ["full", "batch"] {
        let total: f64 = v[key].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{key}: {total}");
    }
    assert!(v["alpha_full"].as_f64().unwrap() > 2.0);
    assert!(v["alpha_batch"].as_f64().is_some());
}

#[test]
fn flow_gaps_shrink_at_their_orders() {
    let v = flow_gaps_value(3, 200, 2).unwrap();
    let ratio = |k: &str| {
        let g = v[k]["gap"].as_array().unwrap();
        g[0].as_f64().unwrap() / g[1].as_f64().unwrap()
    };
    assert!((ratio("corrected") - 8.0).abs() < 1.0);
    assert!((ratio("plain") - 4.0).abs() < 0.5);
    assert!((ratio("sgd") - 8.0).abs() < 1.0);
    assert!(edge_thinning_value(10, 20, 3, 1, 0).is_err());
}
