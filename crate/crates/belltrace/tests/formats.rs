use belltrace::formats::{
    read_behavior, read_dataset_counts, write_behavior, write_correlators, write_dataset, write_singlet_curve,
    CorrelatorPoint, FormatError,
};
use belltrace::runner::run_parallel;
use belltrace_core::harness::{run_experiment, Allocation, QConfig, TrialContext};
use belltrace_core::models::{pr_box, singlet_behavior, Behavior, Setting};
use belltrace_core::{Angle, Schedule, ScheduleConfig};

fn singlet() -> Behavior {
    let g = [Angle::ZERO, Angle::pi_over(3), Angle::new(-3, 4).unwrap()];
    singlet_behavior(&g, &g[..2]).unwrap()
}

#[test]
fn behavior_round_trip() {
    for b in [singlet(), pr_box()] {
        let mut buf = Vec::new();
        write_behavior(&mut buf, &b).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,a,b,p\n"));
        assert_eq!(read_behavior(&buf[..]).unwrap(), b);
    }
}

#[test]
fn behavior_rows_in_any_order() {
    let text = "x, y, a, b, p\ns1,s0,-1,+1,0.25\ns0,s0,+1,+1,0.5\ns0,s0,-1,-1,0.5\ns0,s0,+1,-1,0\ns0,s0,-1,+1,0\n\
                s1,s0,+1,+1,0.25\ns1,s0,+1,-1,0.25\ns1,s0,-1,-1,0.25\n";
    let b = read_behavior(text.as_bytes()).unwrap();
    assert_eq!(b.settings_a(), [Setting::Index(1), Setting::Index(0)]);
    assert_eq!(b.slice(1, 0), [0.5, 0.0, 0.0, 0.5]);
}

#[test]
fn malformed_behaviors() {
    let bad = |t: &str| read_behavior(t.as_bytes()).unwrap_err();
    assert!(matches!(bad("x,y,a,b,p\ns0,s0,+2,+1,1\n"), FormatError::Row { line: 2, .. }));
    assert!(matches!(bad("x,y,a,b,p\nfoo,s0,+1,+1,1\n"), FormatError::Row { line: 2, .. }));
    assert!(matches!(bad("x,y,a,b,p\ns0,s0,+1,+1,1\n"), FormatError::Model(_)));
    assert!(matches!(bad("x,y,a,b,p\ns0,s0,+1,+1,x\n"), FormatError::Csv(_)));
    let unnormalized = "x,y,a,b,p\ns0,s0,+1,+1,0.5\ns0,s0,+1,-1,0.5\ns0,s0,-1,+1,0.5\ns0,s0,-1,-1,0.5\n";
    assert!(matches!(bad(unnormalized), FormatError::Model(_)));
}

fn ctx(b: Behavior, seed: u64) -> TrialContext {
    TrialContext::new(b, Schedule::build(ScheduleConfig::default()).unwrap(), QConfig::default(), false, None, seed)
        .unwrap()
}

#[test]
fn dataset_export_carries_the_counts() {
    let c = ctx(singlet(), 4);
    let d = run_experiment(&c, &Allocation::PerPair { n: 300 }, true).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &d).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 6 * 300);
    assert!(text.lines().next().unwrap().starts_with("trial,x,y,a,b,alice_own_setting_t"));
    assert!(text.lines().nth(1).unwrap().starts_with("0,0,0,"));
    let counts = read_dataset_counts(&buf[..]).unwrap();
    assert_eq!(counts.len(), 6);
    for (x, y, k) in counts {
        let xi = d.settings_a().iter().position(|s| *s == x).unwrap();
        let yi = d.settings_b().iter().position(|s| *s == y).unwrap();
        assert_eq!(k, d.counts(xi, yi));
    }
}

#[test]
fn parallel_runs_do_not_depend_on_thread_count() {
    let c = ctx(singlet(), 12);
    let plan = Allocation::PerPair { n: 7000 };
    let serial = run_experiment(&c, &plan, true).unwrap();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        assert_eq!(run_parallel(&c, &plan, true, Some(&pool)).unwrap(), serial);
    }
    assert_eq!(run_parallel(&c, &plan, false, None).unwrap().total(), serial.total());
}

#[test]
fn plot_data_columns() {
    let mut buf = Vec::new();
    let pts = [
        CorrelatorPoint {
            x: Setting::Index(0),
            y: Setting::Index(1),
            delta_over_pi: None,
            analytic: 1.0,
            estimate: 1.0,
            se: 0.0,
        },
        CorrelatorPoint {
            x: Setting::Angle(Angle::ZERO),
            y: Setting::Angle(Angle::pi_over(3)),
            delta_over_pi: Some(-1.0 / 3.0),
            analytic: -0.5,
            estimate: -0.49,
            se: 0.01,
        },
    ];
    write_correlators(&mut buf, &pts).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x\ty\tdelta_over_pi\tanalytic\testimate\tse");
    assert_eq!(lines[1], "s0\ts1\tNaN\t1\t1\t0");
    assert_eq!(lines[2].split('\t').count(), 6);

    let mut buf = Vec::new();
    write_singlet_curve(&mut buf, 5).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (d, c) = l.split_once('\t').unwrap();
            (d.parse().unwrap(), c.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0], (0.0, -1.0));
    assert!((rows[2].1).abs() < 1e-15);
    assert_eq!(rows[4], (1.0, 1.0));
}
