use proptest::prelude::*;
use rrr_analysis::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tails_monotone_in_quorum(ne in 5u32..200, a in 0.0f64..0.45, b in 0.0f64..0.1) {
        let mut prev_bfs = f64::INFINITY;
        let mut prev_alv = f64::NEG_INFINITY;
        let mut prev_blv = f64::NEG_INFINITY;
        let mut prev_afs = f64::INFINITY;
        for q in 1..=ne {
            let bfs = pr_bfs(ne, q, a, b).unwrap().ln();
            let afs = pr_afs(ne, q, a, b, 6, 20.0).unwrap().ln();
            let alv = pr_alv(ne, q, a, b).unwrap().ln();
            let blv = pr_blv(ne, q, b).unwrap().ln();
            prop_assert!(bfs <= prev_bfs + 1e-12);
            prop_assert!(afs <= prev_afs + 1e-12);
            prop_assert!(alv >= prev_alv - 1e-12);
            prop_assert!(blv >= prev_blv - 1e-12);
            prev_bfs = bfs;
            prev_afs = afs;
            prev_alv = alv;
            prev_blv = blv;
        }
    }

    #[test]
    fn exclusion_decreases_with_population(na in 200.0f64..1e6, a in 0.0f64..0.49) {
        let p1 = pr_ae(100.0, na, 20000.0, a).unwrap();
        let p2 = pr_ae(100.0, na * 1.5, 20000.0, a).unwrap();
        prop_assert!(p1 < p2);
    }

    #[test]
    fn log_sum_exp_precision(ps in proptest::collection::vec(1e-30f64..1.0, 1..50)) {
        let total: f64 = ps.iter().sum();
        let scale = total.max(1.0);
        let lps: Vec<_> = ps.iter().map(|&p| LogProb64::from_prob(p / scale)).collect();
        let got = LogProb64::or_sum(lps).prob() * scale;
        prop_assert!(((got - total) / total).abs() < 1e-12);
    }

    #[test]
    fn complement_round_trip(p in 1e-300f64..0.999) {
        let c = LogProb64::from_prob(p).complement().prob();
        prop_assert!(((1.0 - c) - p).abs() <= 1e-15f64.max(p * 1e-9));
    }

    #[test]
    fn sweep_columns_monotone(ne in 20u32..150, a in 0.1f64..0.45, b in 0.0f64..0.05, d in 1u32..20, s in 1u32..12) {
        let sw = quorum_sweep(&SweepConfig::new(ne, a, b, d, s)).unwrap();
        prop_assert_eq!(sw.rows.len() as u32, ne);
        for w in sw.rows.windows(2) {
            prop_assert!(w[1].pr_afs <= w[0].pr_afs);
            prop_assert!(w[1].pr_alv_s >= w[0].pr_alv_s);
        }
    }
}

#[test]
fn empty_range_errors() {
    let mut cfg = SweepConfig::new(100, 0.33, 0.05, 12, 5);
    cfg.q_min = 60;
    cfg.q_max = 50;
    assert_eq!(quorum_sweep(&cfg), Err(AnalysisError::EmptyRange(60, 50)));
}

#[test]
fn csv_has_one_row_per_quorum() {
    let mut cfg = SweepConfig::new(100, 0.33, 0.05, 12, 5);
    cfg.q_min = 40;
    cfg.q_max = 70;
    let sw = quorum_sweep(&cfg).unwrap();
    let csv = sw.to_csv(true);
    assert_eq!(csv.lines().count(), 32);
    assert!(csv.starts_with(SWEEP_CSV_HEADER));
    assert_eq!(csv.lines().filter(|l| l.ends_with(",true")).count(), 1);
}
