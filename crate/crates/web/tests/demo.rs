use lamp_web::demo::{grid, local_expert, multiscale, signal, simulate, single_scale, SPAN};

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn simulate_is_seeded_and_sorted() {
    let (xs, ys) = simulate(300, 0.8, 0.3, 4);
    assert_eq!((xs.len(), ys.len()), (300, 300));
    assert!(xs.windows(2).all(|w| w[0] <= w[1]));
    assert!(xs.iter().all(|&x| (0.0..=SPAN).contains(&x)));
    assert_eq!(simulate(300, 0.8, 0.3, 4), (xs.clone(), ys));
    assert_ne!(simulate(300, 0.8, 0.3, 5).0, xs);
}

#[test]
fn grid_covers_interval() {
    let g = grid(5);
    assert_eq!(g, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
    assert!(grid(0).is_empty());
}

#[test]
fn expert_band_widens_away_from_center() {
    let (xs, ys) = simulate(400, 0.8, 0.3, 1);
    let g = grid(101);
    let e = local_expert(&xs, &ys, 5.0, 0.5, &g).unwrap();
    assert!(e.n_local > 10);
    assert!((e.mu_tilde - signal(5.0, 0.8)).abs() < 0.5);
    // |mu_hat - ybar| <= |mu_tilde - ybar|: the prior shrinks toward the mean.
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    assert!((e.mu_hat - ybar).abs() <= (e.mu_tilde - ybar).abs() + 1e-12);
    for k in 50..100 {
        assert!(e.sd[k + 1] >= e.sd[k]);
        assert!(e.sd[100 - k - 1] >= e.sd[100 - k]);
    }
}

#[test]
fn single_scale_tracks_signal_at_matching_bandwidth() {
    let (xs, ys) = simulate(600, 0.8, 0.3, 2);
    let g = grid(201);
    let truth: Vec<f64> = g.iter().map(|&x| signal(x, 0.8)).collect();
    let fine = single_scale(&xs, &ys, 0.3, &g, 0).unwrap();
    let coarse = single_scale(&xs, &ys, 5.0, &g, 0).unwrap();
    assert!(rmse(&fine.mean, &truth) < 0.3);
    assert!(rmse(&fine.mean, &truth) < rmse(&coarse.mean, &truth));
    assert!(fine.centers.len() > coarse.centers.len());
    assert!(fine.sd.iter().all(|s| s.is_finite() && *s > 0.0));
}

#[test]
fn multiscale_fit_recovers_signal() {
    let (xs, ys) = simulate(600, 0.8, 0.3, 3);
    let g = grid(201);
    let truth: Vec<f64> = g.iter().map(|&x| signal(x, 0.8)).collect();
    let c = multiscale(&xs, &ys, &g, 0.9, 0).unwrap();
    assert!(!c.bandwidths.is_empty());
    assert!(c.bandwidths.windows(2).all(|w| w[1] < w[0]));
    // Edge points have few neighbors on one side.
    let interior = 10..191;
    assert!(rmse(&c.mean[interior.clone()], &truth[interior]) < 0.3);
    assert_eq!(c, multiscale(&xs, &ys, &g, 0.9, 0).unwrap());
}

#[test]
fn invalid_inputs_are_errors() {
    let (xs, ys) = simulate(50, 0.8, 0.3, 0);
    let g = grid(11);
    assert!(local_expert(&xs, &ys, 5.0, 0.0, &g).is_err());
    assert!(single_scale(&xs, &ys, -1.0, &g, 0).is_err());
    assert!(multiscale(&xs, &ys[..10], &g, 0.9, 0).is_err());
    assert!(multiscale(&xs, &ys, &g, 1.5, 0).is_err());
}
