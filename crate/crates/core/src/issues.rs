//! Issue records and the canonical issues CSV.
//!
//! The CSV has a fixed five-column header and RFC 4180 quoting. Paths are
//! stored with forward slashes; backslash-separated locations (as exported
//! on Windows) are normalized on read.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact header line of the issues CSV.
pub const CSV_HEADER: [&str; 5] = ["File_Location", "File_Name", "Line", "Message", "Type"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueType {
    #[serde(rename = "BUG")]
    Bug,
    #[serde(rename = "VULNERABILITY")]
    Vulnerability,
    #[serde(rename = "CODE_SMELL")]
    CodeSmell,
}

impl IssueType {
    pub const ALL: [IssueType; 3] = [IssueType::Bug, IssueType::Vulnerability, IssueType::CodeSmell];

    pub fn as_str(self) -> &'static str {
        match self {
            IssueType::Bug => "BUG",
            IssueType::Vulnerability => "VULNERABILITY",
            IssueType::CodeSmell => "CODE_SMELL",
        }
    }
}

impl fmt::Display for IssueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown issue type `{0}`")]
pub struct UnknownIssueType(pub String);

impl FromStr for IssueType {
    type Err = UnknownIssueType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "BUG" => Ok(IssueType::Bug),
            "VULNERABILITY" => Ok(IssueType::Vulnerability),
            "CODE_SMELL" => Ok(IssueType::CodeSmell),
            other => Err(UnknownIssueType(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("file location is empty")]
    EmptyLocation,
    #[error("line number must be >= 1")]
    ZeroLine,
    #[error("message is empty")]
    EmptyMessage,
    #[error("file name `{name}` is not the last segment of `{location}`")]
    NameMismatch { location: String, name: String },
}

/// One analyzer finding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IssueRecord {
    pub file_location: String,
    pub file_name: String,
    pub line: u32,
    pub message: String,
    pub issue_type: IssueType,
}

impl IssueRecord {
    /// Builds a record, normalizing the location and deriving the file name.
    pub fn new(
        file_location: impl AsRef<str>,
        line: u32,
        message: impl Into<String>,
        issue_type: IssueType,
    ) -> Result<Self, RecordError> {
        let file_location = normalize_location(file_location.as_ref());
        if file_location.is_empty() {
            return Err(RecordError::EmptyLocation);
        }
        let record = IssueRecord {
            file_name: basename(&file_location).to_string(),
            file_location,
            line,
            message: message.into(),
            issue_type,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.file_location.is_empty() {
            return Err(RecordError::EmptyLocation);
        }
        if self.line == 0 {
            return Err(RecordError::ZeroLine);
        }
        if self.message.is_empty() {
            return Err(RecordError::EmptyMessage);
        }
        if basename(&self.file_location) != self.file_name {
            return Err(RecordError::NameMismatch {
                location: self.file_location.clone(),
                name: self.file_name.clone(),
            });
        }
        Ok(())
    }

    /// Ordering key used everywhere a deterministic issue order is needed.
    pub fn sort_key(&self) -> (&str, u32, &str) {
        (&self.file_location, self.line, &self.message)
    }
}

/// Forward slashes, no leading `./` or `/`.
pub fn normalize_location(location: &str) -> String {
    let unified = location.replace('\\', "/");
    let mut parts = Vec::new();
    for part in unified.split('/') {
        match part {
            "" | "." => {}
            p => parts.push(p),
        }
    }
    parts.join("/")
}

pub fn basename(location: &str) -> &str {
    location.rsplit('/').next().unwrap_or(location)
}

/// Sorts by (path, line, message) and drops exact duplicates.
pub fn sort_issues(issues: &mut [IssueRecord]) {
    issues.sort_by(|a, b| {
        a.sort_key()
            .cmp(&b.sort_key())
            .then(a.issue_type.cmp(&b.issue_type))
    });
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("row {row}: {reason}")]
    RowParseError { row: usize, reason: String },
    #[error("row {row}: bad line number `{value}`")]
    BadLineNumber { row: usize, value: String },
    #[error("row {row}: bad issue type `{value}`")]
    BadType { row: usize, value: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CsvError {
    /// 1-based data row the error refers to, if any.
    pub fn row(&self) -> Option<usize> {
        match self {
            CsvError::RowParseError { row, .. }
            | CsvError::BadLineNumber { row, .. }
            | CsvError::BadType { row, .. } => Some(*row),
            _ => None,
        }
    }
}

struct CountingWriter<W> {
    inner: W,
    count: usize,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.count += n;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

fn csv_io(err: csv::Error) -> std::io::Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

/// Writes the header and one row per record, in input order. Returns bytes written.
pub fn write_csv<W: Write>(records: &[IssueRecord], sink: W) -> Result<usize, CsvError> {
    let mut counter = CountingWriter { inner: sink, count: 0 };
    {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(&mut counter);
        writer.write_record(CSV_HEADER).map_err(csv_io)?;
        for r in records {
            let line = r.line.to_string();
            writer
                .write_record([
                    r.file_location.as_str(),
                    r.file_name.as_str(),
                    line.as_str(),
                    r.message.as_str(),
                    r.issue_type.as_str(),
                ])
                .map_err(csv_io)?;
        }
        writer.flush()?;
    }
    Ok(counter.count)
}

pub fn to_csv_string(records: &[IssueRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("records are UTF-8")
}

pub fn read_csv<R: Read>(source: R) -> Result<Vec<IssueRecord>, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => {
            return Err(CsvError::HeaderMismatch {
                expected: CSV_HEADER.join(","),
                found: String::new(),
            })
        }
        Some(Err(e)) => {
            return Err(CsvError::HeaderMismatch {
                expected: CSV_HEADER.join(","),
                found: e.to_string(),
            })
        }
        Some(Ok(h)) => h,
    };
    // Tolerate a UTF-8 BOM on the first column.
    let found: Vec<&str> = header
        .iter()
        .enumerate()
        .map(|(i, f)| if i == 0 { f.trim_start_matches('\u{feff}') } else { f })
        .collect();
    if found != CSV_HEADER {
        return Err(CsvError::HeaderMismatch {
            expected: CSV_HEADER.join(","),
            found: found.join(","),
        });
    }

    let mut out = Vec::new();
    for (idx, row) in rows.enumerate() {
        let row_no = idx + 1;
        let row = row.map_err(|e| CsvError::RowParseError {
            row: row_no,
            reason: e.to_string(),
        })?;
        if row.len() != CSV_HEADER.len() {
            return Err(CsvError::RowParseError {
                row: row_no,
                reason: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
            });
        }
        let line_raw = &row[2];
        let line: u32 = match line_raw.trim().parse() {
            Ok(n) if n >= 1 => n,
            _ => {
                return Err(CsvError::BadLineNumber {
                    row: row_no,
                    value: line_raw.to_string(),
                })
            }
        };
        let issue_type: IssueType = row[4].parse().map_err(|_| CsvError::BadType {
            row: row_no,
            value: row[4].to_string(),
        })?;
        let record = IssueRecord {
            file_location: normalize_location(&row[0]),
            file_name: row[1].to_string(),
            line,
            message: row[3].to_string(),
            issue_type,
        };
        record.validate().map_err(|e| CsvError::RowParseError {
            row: row_no,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn sample_records() -> Vec<IssueRecord> {
    vec![
        IssueRecord::new(
            "client/src/App.jsx",
            12,
            "A fragment with only one child is redundant.",
            IssueType::CodeSmell,
        )
        .unwrap(),
        IssueRecord::new(
            "client/src/components/OfflineControl.jsx",
            116,
            "Visible, non-interactive elements with click handlers must have at least one keyboard listener.",
            IssueType::Bug,
        )
        .unwrap(),
        IssueRecord::new(
            "deploy/helm/dis/deployment.yaml",
            20,
            "Specify a CPU limit for this container.",
            IssueType::Vulnerability,
        )
        .unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_list_writes_header_only() {
        assert_eq!(to_csv_string(&[]), "File_Location,File_Name,Line,Message,Type\n");
    }

    #[test]
    fn byte_count_matches_output() {
        let mut buf = Vec::new();
        let n = write_csv(&sample_records(), &mut buf).unwrap();
        assert_eq!(n, buf.len());
    }

    #[test]
    fn quotes_are_doubled() {
        let r = IssueRecord::new("a/b.py", 3, r#"Use "x", not 'y'"#, IssueType::Bug).unwrap();
        let out = to_csv_string(&[r]);
        assert_eq!(out.lines().nth(1).unwrap(), r#"a/b.py,b.py,3,"Use ""x"", not 'y'",BUG"#);
    }

    #[test]
    fn sample_round_trip() {
        let records = sample_records();
        let text = to_csv_string(&records);
        assert_eq!(read_csv(text.as_bytes()).unwrap(), records);
    }

    #[test]
    fn header_only_is_empty() {
        let parsed = read_csv("File_Location,File_Name,Line,Message,Type\n".as_bytes()).unwrap();
        assert!(parsed.is_empty());
    }

    #[test]
    fn bad_line_number_reports_row() {
        let text = "File_Location,File_Name,Line,Message,Type\n\
                    a/x.py,x.py,4,ok,BUG\n\
                    a/y.py,y.py,abc,oops,BUG\n";
        match read_csv(text.as_bytes()) {
            Err(CsvError::BadLineNumber { row, value }) => {
                assert_eq!(row, 2);
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_type_and_header() {
        let text = "File_Location,File_Name,Line,Message,Type\na/x.py,x.py,4,ok,SECURITY_HOTSPOT\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(CsvError::BadType { row: 1, .. })));
        let text = "Path,Name,Line,Message,Type\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(CsvError::HeaderMismatch { .. })));
        assert!(matches!(read_csv("".as_bytes()), Err(CsvError::HeaderMismatch { .. })));
    }

    #[test]
    fn wrong_field_count_is_row_error() {
        let text = "File_Location,File_Name,Line,Message,Type\na/x.py,x.py,4\n";
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(CsvError::RowParseError { row: 1, .. })
        ));
    }

    #[test]
    fn backslash_locations_are_normalized() {
        let text = "File_Location,File_Name,Line,Message,Type\n\
                    client\\src\\App.jsx,App.jsx,12,m,CODE_SMELL\n";
        let parsed = read_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed[0].file_location, "client/src/App.jsx");
    }

    #[test]
    fn mismatched_name_is_rejected() {
        let text = "File_Location,File_Name,Line,Message,Type\na/x.py,y.py,4,m,BUG\n";
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(CsvError::RowParseError { row: 1, .. })
        ));
    }

    fn segment() -> impl Strategy<Value = String> {
        "[A-Za-z0-9_.éü-]{1,8}".prop_filter("not a dot segment", |s| s != "." && s != "..")
    }

    fn record() -> impl Strategy<Value = IssueRecord> {
        (
            prop::collection::vec(segment(), 1..4),
            1u32..100_000,
            "[ -~\u{e9}\u{4e2d}\u{1f600},\"\n\r]{1,40}",
            prop::sample::select(IssueType::ALL.to_vec()),
        )
            .prop_map(|(segs, line, msg, ty)| IssueRecord::new(segs.join("/"), line, msg, ty).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn csv_round_trip(records in prop::collection::vec(record(), 0..6)) {
            let text = to_csv_string(&records);
            prop_assert_eq!(read_csv(text.as_bytes()).unwrap(), records);
        }
    }
}
