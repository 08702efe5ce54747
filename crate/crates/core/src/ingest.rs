//! Snapshot ingestion: one version sighting per domain per snapshot.
//!
//! A snapshot is a CSV file with a header row. Each data row names a crawled
//! URL and carries response header text. The first row (in file order) whose
//! header text matches the version pattern decides the domain's version for
//! that snapshot; every later row for the same domain is skipped.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::version::{Version, VersionPattern};

/// Rows handed to the worker pool at a time.
const CHUNK_ROWS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotDescriptor {
    pub index: usize,
    pub label: String,
    pub path: PathBuf,
}

/// Where header text lives in a snapshot file.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HeaderSource {
    /// A column holding one extracted header value, e.g. `X-Powered-By`.
    Value(String),
    /// A column holding the whole raw response-header block.
    Raw(String),
}

impl HeaderSource {
    pub fn column(&self) -> &str {
        match self {
            HeaderSource::Value(c) | HeaderSource::Raw(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct ColumnLayout {
    pub url_column: String,
    pub headers: HeaderSource,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutRepr {
    url_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    header_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_headers_column: Option<String>,
}

impl TryFrom<LayoutRepr> for ColumnLayout {
    type Error = Error;

    fn try_from(r: LayoutRepr) -> Result<Self> {
        let headers = match (r.header_column, r.raw_headers_column) {
            (Some(c), None) => HeaderSource::Value(c),
            (None, Some(c)) => HeaderSource::Raw(c),
            _ => {
                return Err(Error::InvalidLayout(
                    "exactly one of header_column and raw_headers_column must be set".into(),
                ))
            }
        };
        Ok(ColumnLayout {
            url_column: r.url_column,
            headers,
        })
    }
}

impl From<ColumnLayout> for LayoutRepr {
    fn from(l: ColumnLayout) -> Self {
        let (header_column, raw_headers_column) = match l.headers {
            HeaderSource::Value(c) => (Some(c), None),
            HeaderSource::Raw(c) => (None, Some(c)),
        };
        LayoutRepr {
            url_column: l.url_column,
            header_column,
            raw_headers_column,
        }
    }
}

impl FromStr for ColumnLayout {
    type Err = Error;

    /// Parses `url=<col>,header=<col>` or `url=<col>,raw=<col>`.
    fn from_str(s: &str) -> Result<Self> {
        let mut url = None;
        let mut headers = None;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidLayout(format!("expected key=value, got `{part}`")))?;
            let value = value.trim().to_string();
            if value.is_empty() {
                return Err(Error::InvalidLayout(format!(
                    "empty column name for `{key}`"
                )));
            }
            let slot = match key.trim() {
                "url" => {
                    if url.replace(value).is_some() {
                        return Err(Error::InvalidLayout("`url` given twice".into()));
                    }
                    continue;
                }
                "header" => HeaderSource::Value(value),
                "raw" => HeaderSource::Raw(value),
                other => return Err(Error::InvalidLayout(format!("unknown key `{other}`"))),
            };
            if headers.replace(slot).is_some() {
                return Err(Error::InvalidLayout(
                    "only one of `header` and `raw` may be given".into(),
                ));
            }
        }
        Ok(ColumnLayout {
            url_column: url.ok_or_else(|| Error::InvalidLayout("missing `url=`".into()))?,
            headers: headers
                .ok_or_else(|| Error::InvalidLayout("missing `header=` or `raw=`".into()))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub snapshot_index: usize,
    pub domain: String,
    pub version: Version,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub rows_unmatched: u64,
    pub domains_matched: u64,
    pub duplicates_skipped: u64,
}

/// Network location (`host[:port]`, lowercased) of an absolute URL.
///
/// The scheme is ignored and no name resolution takes place, so IP literals
/// come back unchanged.
pub fn extract_domain(url: &str) -> Option<String> {
    let parsed = Url::parse(url.trim()).ok()?;
    let host = parsed.host_str().filter(|h| !h.is_empty())?;
    let mut domain = host.to_ascii_lowercase();
    if let Some(port) = parsed.port() {
        domain.push(':');
        domain.push_str(&port.to_string());
    }
    Some(domain)
}

enum Row {
    Malformed,
    Parsed {
        domain: String,
        version: Option<Version>,
    },
}

fn classify_row(
    record: &csv::ByteRecord,
    width: usize,
    url_idx: usize,
    header_idx: usize,
    pattern: &VersionPattern,
) -> Row {
    if record.len() != width {
        return Row::Malformed;
    }
    let url = String::from_utf8_lossy(&record[url_idx]);
    let Some(domain) = extract_domain(&url) else {
        return Row::Malformed;
    };
    let text = String::from_utf8_lossy(&record[header_idx]);
    Row::Parsed {
        domain,
        version: pattern.extract(&text),
    }
}

/// Reads one snapshot file.
///
/// Rows are classified in parallel chunk by chunk and then merged in file
/// order, so the result never depends on the number of worker threads.
pub fn ingest_snapshot(
    desc: &SnapshotDescriptor,
    pattern: &VersionPattern,
    layout: &ColumnLayout,
) -> Result<(Vec<Observation>, IngestStats)> {
    let file = File::open(&desc.path).map_err(|source| Error::SnapshotIo {
        path: desc.path.clone(),
        source,
    })?;
    ingest_reader(file, desc, pattern, layout)
}

/// Same as [`ingest_snapshot`] over any reader; `desc.path` is only used in
/// error messages.
pub fn ingest_reader<R: Read>(
    input: R,
    desc: &SnapshotDescriptor,
    pattern: &VersionPattern,
    layout: &ColumnLayout,
) -> Result<(Vec<Observation>, IngestStats)> {
    let io_err = |source: io::Error| Error::SnapshotIo {
        path: desc.path.clone(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = match reader.byte_headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_fatal(e, desc).unwrap_or_else(|| empty(desc))),
    };
    if header.is_empty() {
        return Err(empty(desc));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| String::from_utf8_lossy(h).trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: desc.path.clone(),
                column: name.to_string(),
            })
    };
    let url_idx = find(&layout.url_column)?;
    let header_idx = find(layout.headers.column())?;
    let width = header.len();

    let mut stats = IngestStats::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut observations = Vec::new();
    let mut chunk: Vec<Option<csv::ByteRecord>> = Vec::with_capacity(CHUNK_ROWS);
    let mut records = reader.into_byte_records();

    loop {
        chunk.clear();
        for item in records.by_ref().take(CHUNK_ROWS) {
            match item {
                Ok(r) => chunk.push(Some(r)),
                Err(e) => match e.into_kind() {
                    csv::ErrorKind::Io(source) => return Err(io_err(source)),
                    _ => chunk.push(None),
                },
            }
        }
        if chunk.is_empty() {
            break;
        }
        let rows: Vec<Row> = chunk
            .par_iter()
            .map(|rec| match rec {
                Some(r) => classify_row(r, width, url_idx, header_idx, pattern),
                None => Row::Malformed,
            })
            .collect();
        for row in rows {
            stats.rows_read += 1;
            match row {
                Row::Malformed => stats.rows_malformed += 1,
                Row::Parsed { domain, .. } if seen.contains(&domain) => {
                    stats.duplicates_skipped += 1
                }
                Row::Parsed { version: None, .. } => stats.rows_unmatched += 1,
                Row::Parsed {
                    domain,
                    version: Some(version),
                } => {
                    seen.insert(domain.clone());
                    stats.domains_matched += 1;
                    observations.push(Observation {
                        snapshot_index: desc.index,
                        domain,
                        version,
                    });
                }
            }
        }
    }

    if stats.rows_read == 0 {
        return Err(empty(desc));
    }
    Ok((observations, stats))
}

fn empty(desc: &SnapshotDescriptor) -> Error {
    Error::EmptySnapshot {
        path: desc.path.clone(),
    }
}

fn csv_fatal(e: csv::Error, desc: &SnapshotDescriptor) -> Option<Error> {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Some(Error::SnapshotIo {
            path: desc.path.clone(),
            source,
        }),
        _ => None,
    }
}

/// One snapshot entry in a manifest file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub label: String,
    pub path: PathBuf,
    pub layout: ColumnLayout,
}

/// Chronologically ordered snapshots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Lowercase hex SHA-256 of the manifest bytes.
    pub digest: String,
}

impl Manifest {
    /// Loads a manifest; relative snapshot paths resolve against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_slice(&bytes, base).map_err(|e| match e {
            Error::Json(j) => Error::Manifest {
                path: path.to_path_buf(),
                reason: j.to_string(),
            },
            other => other,
        })
    }

    pub fn from_slice(bytes: &[u8], base: &Path) -> Result<Self> {
        use sha2::{Digest, Sha256};
        let mut entries: Vec<ManifestEntry> = serde_json::from_slice(bytes)?;
        for e in &mut entries {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
        }
        Ok(Manifest {
            entries,
            digest: hex::encode(Sha256::digest(bytes)),
        })
    }

    pub fn descriptors(&self) -> impl Iterator<Item = (SnapshotDescriptor, &ColumnLayout)> {
        self.entries.iter().enumerate().map(|(index, e)| {
            (
                SnapshotDescriptor {
                    index,
                    label: e.label.clone(),
                    path: e.path.clone(),
                },
                &e.layout,
            )
        })
    }
}

/// Result of ingesting every snapshot of a manifest.
#[derive(Debug, Default)]
pub struct CorpusIngest {
    pub observations: Vec<Observation>,
    pub stats: Vec<(SnapshotDescriptor, IngestStats)>,
    pub skipped: Vec<SnapshotDescriptor>,
}

/// Ingests all snapshots in parallel. Empty snapshots are skipped and
/// reported; any other failure aborts.
pub fn ingest_manifest(manifest: &Manifest, pattern: &VersionPattern) -> Result<CorpusIngest> {
    let results: Vec<_> = manifest
        .descriptors()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(desc, layout)| {
            let res = ingest_snapshot(&desc, pattern, layout);
            (desc, res)
        })
        .collect();
    let mut out = CorpusIngest::default();
    for (desc, res) in results {
        match res {
            Ok((obs, stats)) => {
                out.observations.extend(obs);
                out.stats.push((desc, stats));
            }
            Err(Error::EmptySnapshot { path }) => {
                log::warn!(
                    "skipping empty snapshot {} ({})",
                    desc.label,
                    path.display()
                );
                out.skipped.push(desc);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Writes `snapshot_index,domain,version` rows.
pub fn write_observations<W: Write>(out: W, observations: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["snapshot_index", "domain", "version"])?;
    for o in observations {
        w.write_record([
            o.snapshot_index.to_string(),
            o.domain.clone(),
            o.version.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc() -> SnapshotDescriptor {
        SnapshotDescriptor {
            index: 3,
            label: "2016-06-01".into(),
            path: PathBuf::from("mem.csv"),
        }
    }

    fn layout() -> ColumnLayout {
        "url=url,raw=headers".parse().unwrap()
    }

    fn run(data: &str) -> Result<(Vec<Observation>, IngestStats)> {
        ingest_reader(
            data.as_bytes(),
            &desc(),
            &VersionPattern::default(),
            &layout(),
        )
    }

    #[test]
    fn domain_extraction() {
        assert_eq!(
            extract_domain("http://www.vraymaterials.co.uk/index.php").as_deref(),
            Some("www.vraymaterials.co.uk")
        );
        assert_eq!(extract_domain("not a url"), None);
        assert_eq!(
            extract_domain("HTTP://Example.COM:8080/a?b=c").as_deref(),
            Some("example.com:8080")
        );
        assert_eq!(
            extract_domain("http://192.0.2.7/x").as_deref(),
            Some("192.0.2.7")
        );
        assert_eq!(
            extract_domain("http://[::1]:81/").as_deref(),
            Some("[::1]:81")
        );
        assert_eq!(extract_domain("mailto:someone@example.com"), None);
        // www and bare names stay distinct
        assert_ne!(
            extract_domain("http://www.example.com/"),
            extract_domain("http://example.com/")
        );
    }

    #[test]
    fn first_matching_row_wins() {
        let data = "url,headers\n\
            http://d.example/a,X-Powered-By: PHP/5.6.20\n\
            http://d.example/b,X-Powered-By: PHP/7.0.1\n";
        let (obs, stats) = run(data).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].domain, "d.example");
        assert_eq!(obs[0].version, Version::new(5, 6, 20));
        assert_eq!(obs[0].snapshot_index, 3);
        assert_eq!(stats.duplicates_skipped, 1);
        assert_eq!(stats.domains_matched, 1);
    }

    #[test]
    fn header_only_file_is_empty() {
        assert!(matches!(
            run("url,headers\n"),
            Err(Error::EmptySnapshot { .. })
        ));
        assert!(matches!(run(""), Err(Error::EmptySnapshot { .. })));
    }

    #[test]
    fn unmatched_and_malformed_rows() {
        let data = "url,headers\n\
            http://a.example/,Server: nginx\n\
            http://b.example/,X-Powered-By: PHP/5.4.0,extra\n\
            not a url,X-Powered-By: PHP/5.4.0\n\
            http://a.example/x,X-Powered-By: PHP/5.5.9\n";
        let (obs, stats) = run(data).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].domain, "a.example");
        assert_eq!(obs[0].version, Version::new(5, 5, 9));
        assert_eq!(
            stats,
            IngestStats {
                rows_read: 4,
                rows_malformed: 2,
                rows_unmatched: 1,
                domains_matched: 1,
                duplicates_skipped: 0,
            }
        );
    }

    #[test]
    fn invalid_utf8_is_decoded_leniently() {
        let mut data = b"url,headers\nhttp://a.example/,X-Powered-By: PHP/5.6.1\xff\xfe\n".to_vec();
        data.extend_from_slice(b"http://b.\xffexample/,X-Powered-By: PHP/7.0.2\n");
        let (obs, stats) =
            ingest_reader(&data[..], &desc(), &VersionPattern::default(), &layout()).unwrap();
        assert_eq!(obs[0].version, Version::new(5, 6, 1));
        assert_eq!(stats.rows_read, 2);
        assert_eq!(
            stats.rows_read,
            stats.domains_matched
                + stats.duplicates_skipped
                + stats.rows_unmatched
                + stats.rows_malformed
        );
    }

    #[test]
    fn missing_column_is_reported() {
        let err = run("link,headers\nhttp://a/,PHP/5.6.1\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "url"));
    }

    #[test]
    fn missing_file_is_fatal() {
        let d = SnapshotDescriptor {
            index: 0,
            label: "x".into(),
            path: PathBuf::from("/nonexistent/snapshot.csv"),
        };
        assert!(matches!(
            ingest_snapshot(&d, &VersionPattern::default(), &layout()),
            Err(Error::SnapshotIo { .. })
        ));
    }

    #[test]
    fn layout_spec_parsing() {
        let l: ColumnLayout = "url=page, header=x_powered_by".parse().unwrap();
        assert_eq!(l.url_column, "page");
        assert_eq!(l.headers, HeaderSource::Value("x_powered_by".into()));
        for bad in [
            "",
            "url=a",
            "raw=b",
            "url=a,raw=b,header=c",
            "url=a,foo=b",
            "url=,raw=b",
        ] {
            assert!(bad.parse::<ColumnLayout>().is_err(), "{bad}");
        }
    }

    #[test]
    fn manifest_parsing() {
        let json = br#"[
            {"label": "2016-01-01", "path": "a.csv", "layout": {"url_column": "url", "raw_headers_column": "headers"}},
            {"label": "2016-02-01", "path": "/abs/b.csv", "layout": {"url_column": "url", "header_column": "xpb"}}
        ]"#;
        let m = Manifest::from_slice(json, Path::new("/data")).unwrap();
        assert_eq!(m.entries[0].path, PathBuf::from("/data/a.csv"));
        assert_eq!(m.entries[1].path, PathBuf::from("/abs/b.csv"));
        assert_eq!(
            m.entries[1].layout.headers,
            HeaderSource::Value("xpb".into())
        );
        assert_eq!(m.digest.len(), 64);
        let idx: Vec<usize> = m.descriptors().map(|(d, _)| d.index).collect();
        assert_eq!(idx, vec![0, 1]);

        let both = br#"[{"label": "x", "path": "a.csv", "layout": {"url_column": "url", "header_column": "a", "raw_headers_column": "b"}}]"#;
        assert!(Manifest::from_slice(both, Path::new("")).is_err());
    }

    #[test]
    fn observations_export() {
        let obs = vec![Observation {
            snapshot_index: 2,
            domain: "a.example".into(),
            version: Version::new(5, 6, 20),
        }];
        let mut buf = Vec::new();
        write_observations(&mut buf, &obs).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "snapshot_index,domain,version\n2,a.example,5.6.20\n"
        );
    }
}
