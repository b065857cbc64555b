use std::fs;

use qkpack::bench::{
    format_summary, load_suite, read_csv, run_bench, summarize, write_csv, Algorithm, BenchConfig, BenchReport,
    NamedInstance, OracleMode, Preset, CSV_VERSION,
};
use qkpack::instances::gen_random_factor;
use qkpack::io::instance_to_json;

fn suite(count: u64, n: usize, rank: usize) -> Vec<NamedInstance> {
    (0..count)
        .map(|s| NamedInstance {
            id: format!("rand-{s:03}"),
            instance: gen_random_factor(n, rank, 6, 1000 + s).unwrap(),
        })
        .collect()
}

fn strip_time(r: &BenchReport) -> BenchReport {
    let mut r = r.clone();
    for row in &mut r.rows {
        row.time_ms = 0.0;
    }
    for s in &mut r.summary {
        s.mean_time_ms = 0.0;
    }
    r
}

#[test]
fn report_is_deterministic_and_consistent() {
    let mut cfg = BenchConfig::new(suite(10, 9, 3));
    cfg.algorithms = Algorithm::ALL.to_vec();
    cfg.enum_sizes = vec![0, 1, 2, 3];
    cfg.seeds = vec![5, 6];
    let a = run_bench(&cfg);
    let b = run_bench(&cfg);
    assert_eq!(strip_time(&a), strip_time(&b));
    assert_eq!(
        strip_time(&BenchReport {
            rows: a.rows.clone(),
            summary: summarize(&a.rows)
        }),
        strip_time(&a)
    );
    let mut keys: Vec<_> = a
        .rows
        .iter()
        .map(|r| (r.instance_id.clone(), r.algorithm, r.enum_size, r.seed))
        .collect();
    let sorted = {
        let mut k = keys.clone();
        k.sort();
        k
    };
    assert_eq!(keys, sorted);
    keys.dedup();
    assert_eq!(keys.len(), a.rows.len());
    for row in &a.rows {
        if row.algorithm == Algorithm::Greedy && row.enum_size == 3 {
            assert!(row.error.is_some());
            continue;
        }
        assert!(row.error.is_none(), "{row:?}");
        let (v, opt) = (row.value.unwrap(), row.opt_value.unwrap());
        assert!(v <= opt);
        let ratio = row.ratio.unwrap();
        assert!((0.0..=1.0).contains(&ratio));
        if let Some(floor) = row.algorithm.floor(row.enum_size) {
            assert!(v as f64 >= floor * opt as f64 - 1e-6, "{row:?} below floor {floor}");
        }
    }
}

#[test]
fn oracles_agree_and_none_omits_ratios() {
    let mut cfg = BenchConfig::new(suite(6, 11, 2));
    cfg.algorithms = vec![Algorithm::Greedy];
    let brute = run_bench(&cfg);
    cfg.oracle = OracleMode::BranchAndBound;
    let bnb = run_bench(&cfg);
    assert_eq!(strip_time(&brute), strip_time(&bnb));
    cfg.oracle = OracleMode::None;
    let none = run_bench(&cfg);
    assert!(none
        .rows
        .iter()
        .all(|r| r.ratio.is_none() && r.opt_value.is_none() && r.value.is_some()));
    assert!(none.summary.iter().all(|s| s.count == 0));
}

#[test]
fn per_row_errors_do_not_stop_the_run() {
    let mut cfg = BenchConfig::new(suite(2, 6, 2));
    cfg.algorithms = vec![Algorithm::Greedy, Algorithm::Golden];
    cfg.enum_sizes = vec![3];
    let r = run_bench(&cfg);
    assert_eq!(r.rows.len(), 4);
    let greedy: Vec<_> = r.rows.iter().filter(|r| r.algorithm == Algorithm::Greedy).collect();
    assert!(greedy
        .iter()
        .all(|r| r.error.as_deref().is_some_and(|e| e.contains("enumeration size"))));
    let golden: Vec<_> = r.rows.iter().filter(|r| r.algorithm == Algorithm::Golden).collect();
    assert!(golden.iter().all(|r| r.error.is_none() && r.ratio.is_some()));
    let s = r.summary.iter().find(|s| s.algorithm == Algorithm::Greedy).unwrap();
    assert_eq!((s.count, s.errors), (0, 2));
}

#[test]
fn best_of_preset_runs() {
    let mut cfg = BenchConfig::new(suite(4, 8, 2));
    cfg.algorithms = vec![Algorithm::Rrounding];
    cfg.enum_sizes = vec![0, 1];
    cfg.preset = Preset::BestOf;
    cfg.seeds = vec![1, 2, 3];
    let r = run_bench(&cfg);
    assert_eq!(r.rows.len(), 4 * 2 * 3);
    assert!(r.rows.iter().all(|r| r.error.is_none()));
}

#[test]
fn greedy_regression_floor() {
    let mut cfg = BenchConfig::new(suite(50, 12, 3));
    cfg.algorithms = vec![Algorithm::Greedy];
    cfg.enum_sizes = vec![2];
    let r = run_bench(&cfg);
    let s = &r.summary[0];
    assert_eq!(s.count, 50);
    assert!(s.mean >= 0.95, "mean {}", s.mean);
}

#[test]
fn csv_format() {
    let mut cfg = BenchConfig::new(suite(3, 7, 2));
    cfg.oracle = OracleMode::BruteForce;
    let r = run_bench(&cfg);
    let mut buf = Vec::new();
    write_csv(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_VERSION));
    assert_eq!(
        lines.next(),
        Some("instance_id,n,algorithm,enum_size,value,opt_value,ratio,time_ms,seed,error")
    );
    assert_eq!(lines.count(), r.rows.len());
    let back = read_csv(&buf[..]).unwrap();
    for (a, b) in back.summary.iter().zip(&r.summary) {
        assert_eq!((a.algorithm, a.enum_size, a.count), (b.algorithm, b.enum_size, b.count));
        assert!((a.mean - b.mean).abs() < 1e-8 && (a.sd - b.sd).abs() < 1e-8);
    }
    assert!(read_csv(&b"# other\n"[..]).is_err());
    let table = format_summary(&r.summary);
    assert_eq!(table.lines().count(), 2 + 3);
}

#[test]
fn suite_directory() {
    let dir = tempfile::tempdir().unwrap();
    for s in 0..3 {
        let inst = gen_random_factor(5, 2, 3, s).unwrap();
        fs::write(dir.path().join(format!("i{s}.qkp.json")), instance_to_json(&inst)).unwrap();
    }
    fs::write(dir.path().join("readme.txt"), "skip").unwrap();
    let gas = dir.path().join("gas");
    fs::create_dir(&gas).unwrap();
    fs::write(
        gas.join("topology.json"),
        r#"{"beta": [1, 1], "sinks": [{"id": "a", "entry": 0, "exit": 2}, {"id": "b", "entry": 1, "exit": 2}], "c": 40}"#,
    )
    .unwrap();
    fs::write(gas.join("x.csv"), "sink_id,q_hat\na,2\nb,3\n").unwrap();
    let s = load_suite(dir.path()).unwrap();
    let ids: Vec<&str> = s.iter().map(|n| n.id.as_str()).collect();
    assert_eq!(ids, vec!["gas/x", "i0", "i1", "i2"]);
    fs::write(dir.path().join("bad.qkp.json"), "{").unwrap();
    assert!(load_suite(dir.path()).is_err());
}
