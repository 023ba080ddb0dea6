use misobc::config::Scenario;
use misobc::experiments::{
    ensemble_bound, grid, mixed_means, mixed_rows, plateau_argmax, run_mixed_traffic, run_online, summarize_online,
};
use misobc::repro;
use misobc::SimError;
use misobc_core::fading::generate;
use misobc_core::throughput::RateProfile;
use misobc_core::UserProfile;

#[test]
fn grids_are_exact() {
    assert_eq!(grid(0.1, 0.9, 0.1), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
    assert_eq!(repro::phi_grid(0.05).len(), 19);
    assert_eq!(repro::phi_grid(0.05)[13], 0.7);
}

#[test]
fn plateau_argmax_takes_the_middle_of_ties() {
    let points = [(0.4, 1.0), (0.5, 2.0), (0.55, 2.0), (0.6, 1.5)];
    assert_eq!(plateau_argmax(&points, 1e-9), Some(0.525));
    assert_eq!(plateau_argmax(&points, 0.6), Some(0.55));
    assert_eq!(plateau_argmax(&[(0.3, 1.0)], 0.0), Some(0.3));
    assert_eq!(plateau_argmax(&[], 0.0), None);
}

#[test]
fn small_mixed_traffic_run() {
    let scenario = repro::mixed(4.0, 8, 1);
    let points = run_mixed_traffic(&scenario, &[0.2, 0.8], &[5, 6]).unwrap();
    assert_eq!(points.len(), 4);
    assert_eq!((points[0].gamma, points[0].seed), (0.2, 5));
    assert_eq!((points[3].gamma, points[3].seed), (0.8, 6));
    for p in &points {
        let proposed = p.proposed.unwrap();
        assert!(p.converged && proposed <= p.tdma.unwrap() + 1e-2 && proposed <= p.zf.unwrap() + 1e-2);
        assert!(p.gap.unwrap() <= 1e-2);
    }
    let means = mixed_means(&points);
    assert_eq!(means.len(), 2);
    assert!((means[0].tdma - 0.5 * (points[0].tdma.unwrap() + points[1].tdma.unwrap())).abs() < 1e-12);
    let rows = mixed_rows("mix", &points);
    assert_eq!(rows.len(), 4 * 4 + 2 * 3);
    assert!(matches!(
        run_mixed_traffic(&scenario, &[1.5], &[1]),
        Err(SimError::Config(_))
    ));
}

#[test]
fn zero_forcing_beyond_antennas_is_flagged() {
    let scenario = Scenario::new(3, 2, 4, 0, &[UserProfile::ndc(0.5), UserProfile::ndc(0.5), UserProfile::dc(0.5)]);
    let points = run_mixed_traffic(&scenario, &[0.5], &[0]).unwrap();
    assert!(points[0].zf.is_none() && points[0].tdma.is_some() && points[0].proposed.is_some());
    let rows = mixed_rows("wide", &points);
    let zf = rows.iter().find(|r| r.metric == "zf_power").unwrap();
    assert_eq!(zf.value, f64::INFINITY);
}

#[test]
fn online_runs_and_summaries() {
    let scenario = repro::online(50, 0);
    let channels = generate(&scenario.fading_spec()).unwrap();
    assert!(run_online(&scenario, &channels, 0).unwrap().is_empty());
    let records = run_online(&scenario, &channels, 120).unwrap();
    assert_eq!(records.len(), 120);
    let summary = summarize_online(&records, &[3.0, 1.0]);
    assert_eq!(summary.final_rbar, records[119].rbar);
    for (k, first) in summary.first_crossing.iter().enumerate() {
        if let Some(t) = first {
            let i = records.iter().position(|r| r.t == *t).unwrap();
            assert!(records[i].rbar[k] >= [3.0, 1.0][k]);
            assert!(records[..i].iter().all(|r| r.rbar[k] < [3.0, 1.0][k]));
        }
    }
    let empty = summarize_online(&[], &[3.0, 1.0]);
    assert_eq!(empty.final_rbar, vec![0.0, 0.0]);

    let dc = Scenario::new(2, 2, 4, 0, &[UserProfile::ndc(1.0), UserProfile::dc(1.0)]);
    let channels = generate(&dc.fading_spec()).unwrap();
    assert!(matches!(run_online(&dc, &channels, 5), Err(SimError::Config(_))));
}

#[test]
fn ensemble_bound_needs_uniform_profile_and_two_antennas() {
    let set = generate(&misobc_core::FadingSpec::symmetric(2, 2, 400, 0)).unwrap();
    let uniform = RateProfile::uniform(2);
    let skewed = RateProfile::new(vec![0.7, 0.3]).unwrap();
    let tight = ensemble_bound(&set, &uniform, 10.0, 0.0).unwrap();
    let loose = ensemble_bound(&set, &uniform, 10.0, 1.0).unwrap();
    assert!(loose > tight);
    assert!(ensemble_bound(&set, &skewed, 10.0, 0.0).is_none());
    let single = generate(&misobc_core::FadingSpec::symmetric(2, 1, 20, 0)).unwrap();
    assert!(ensemble_bound(&single, &uniform, 10.0, 0.0).is_none());
}
