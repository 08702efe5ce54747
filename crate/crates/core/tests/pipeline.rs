use std::fs;
use std::path::Path;

use adoption_core::ingest::{
    ingest_snapshot, write_observations, ColumnLayout, SnapshotDescriptor,
};
use adoption_core::report::{analyze_manifest, run_analysis, AnalysisOptions, AnalysisReport};
use adoption_core::{Error, Manifest, VersionPattern};
use rand::{Rng, SeedableRng};

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn noisy_snapshot(seed: u64, rows: usize) -> String {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("url,headers\n");
    for _ in 0..rows {
        let d = rng.gen_range(0..500);
        let header = match rng.gen_range(0..4) {
            0 => "Server: nginx".to_string(),
            _ => format!(
                "X-Powered-By: PHP/{}.{}.{}",
                rng.gen_range(4..8),
                rng.gen_range(0..7),
                rng.gen_range(0..40)
            ),
        };
        s.push_str(&format!(
            "http://d{d}.example/p{},\"{header}\"\n",
            rng.gen::<u16>()
        ));
    }
    s
}

#[test]
fn ingestion_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.csv", &noisy_snapshot(7, 60_000));
    let desc = SnapshotDescriptor {
        index: 0,
        label: "s".into(),
        path: dir.path().join("s.csv"),
    };
    let layout: ColumnLayout = "url=url,raw=headers".parse().unwrap();
    let pattern = VersionPattern::default();
    let mut outputs = Vec::new();
    for threads in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let (obs, stats) = pool
            .install(|| ingest_snapshot(&desc, &pattern, &layout))
            .unwrap();
        assert_eq!(
            stats.rows_read,
            stats.domains_matched
                + stats.duplicates_skipped
                + stats.rows_unmatched
                + stats.rows_malformed
        );
        let mut buf = Vec::new();
        write_observations(&mut buf, &obs).unwrap();
        outputs.push((buf, stats));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

fn manifest_json(entries: &[(&str, &str)]) -> String {
    let items: Vec<String> = entries
        .iter()
        .map(|(label, path)| {
            format!(
                r#"{{"label": "{label}", "path": "{path}", "layout": {{"url_column": "url", "raw_headers_column": "headers"}}}}"#
            )
        })
        .collect();
    format!("[{}]", items.join(","))
}

#[test]
fn single_snapshot_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "url,headers\nhttp://a/,PHP/5.6.1\n");
    write(dir.path(), "m.json", &manifest_json(&[("a", "a.csv")]));
    let err = run_analysis(&dir.path().join("m.json"), &AnalysisOptions::default()).unwrap_err();
    assert!(matches!(err, Error::TooFewSnapshots { found: 1, .. }));
    assert!(err.is_usage());
}

#[test]
fn empty_snapshot_is_skipped_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "a.csv",
        "url,headers\nhttp://a/,X-Powered-By: PHP/5.6.1\n",
    );
    write(dir.path(), "b.csv", "url,headers\n");
    write(
        dir.path(),
        "c.csv",
        "url,headers\nhttp://a/,X-Powered-By: PHP/5.6.2\n",
    );
    write(
        dir.path(),
        "m.json",
        &manifest_json(&[
            ("2016-12-01", "a.csv"),
            ("2017-01-01", "b.csv"),
            ("2017-02-01", "c.csv"),
        ]),
    );
    let analysis = run_analysis(&dir.path().join("m.json"), &AnalysisOptions::default()).unwrap();
    let md = &analysis.report.metadata;
    assert_eq!(md.skipped_snapshots, 1);
    assert!(md.snapshots[1].skipped);
    assert_eq!(md.snapshots[1].label, "2017-01-01");
    assert_eq!(analysis.sequences.len(), 1);
    assert_eq!(analysis.sequences[0].snapshot_indices, vec![0, 2]);
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for (i, seed) in [11u64, 12, 13].iter().enumerate() {
        write(
            dir.path(),
            &format!("s{i}.csv"),
            &noisy_snapshot(*seed, 3000),
        );
    }
    let json = manifest_json(&[("a", "s0.csv"), ("b", "s1.csv"), ("c", "s2.csv")]);
    let manifest = Manifest::from_slice(json.as_bytes(), dir.path()).unwrap();
    let report = analyze_manifest(&manifest, &AnalysisOptions::default())
        .unwrap()
        .report;
    let back = AnalysisReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
    for h in [
        &report.histograms.delta,
        &report.histograms.phi,
        &report.histograms.gamma,
    ] {
        assert_eq!(
            h.iter().map(|b| b.count).sum::<usize>(),
            report.corpus.domain_count
        );
    }
    let total: u64 = report
        .frequencies
        .version_counts
        .iter()
        .map(|c| c.count)
        .sum();
    assert_eq!(total as usize, report.metadata.observations);
}
