use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{
    BpMeasurement, ClinicalEvent, Codebook, DatasetError, Dtype, EventKind, FieldValue, PatientStore, StoreBuilder,
    Table, Uid, Violation,
};

/// File names inside a dataset directory.
pub const DATASET_FILES: [&str; 4] = ["clinical.csv", "bp.csv", "events.csv", "codebook.json"];

const BP_COLUMNS: [&str; 3] = ["t_hours", "sbp", "dbp"];
const EVENT_COLUMNS: [&str; 3] = ["kind", "t_start_hours", "t_end_hours"];

fn read(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })
}

pub fn load_dataset_dir(dir: &Path) -> Result<PatientStore, DatasetError> {
    load_dataset(
        &dir.join(DATASET_FILES[0]),
        &dir.join(DATASET_FILES[1]),
        &dir.join(DATASET_FILES[2]),
        &dir.join(DATASET_FILES[3]),
    )
}

/// Loads and validates the four dataset files. The result depends only on
/// the bytes of the inputs.
pub fn load_dataset(
    clinical_path: &Path,
    bp_path: &Path,
    events_path: &Path,
    codebook_path: &Path,
) -> Result<PatientStore, DatasetError> {
    let codebook_bytes = read(codebook_path)?;
    let codebook: Codebook = serde_json::from_slice(&codebook_bytes).map_err(|e| {
        DatasetError::Invalid(vec![Violation::Format {
            file: codebook_path.display().to_string(),
            line: e.line(),
            reason: e.to_string(),
        }])
    })?;
    let mut builder = StoreBuilder::new(codebook);
    load_clinical(&mut builder, &read(clinical_path)?, &clinical_path.display().to_string());
    load_bp(&mut builder, &read(bp_path)?, &bp_path.display().to_string());
    load_events(&mut builder, &read(events_path)?, &events_path.display().to_string());
    builder.finish()
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(bytes)
}

/// Compares a file header (minus `uid`) to the descriptors of `table`.
fn check_header(builder: &mut StoreBuilder, table: Table, header: &[String], file: &str) {
    if header.first().map(String::as_str) != Some("uid") {
        builder.violate(Violation::Format { file: file.into(), line: 1, reason: "first column must be `uid`".into() });
    }
    let cols: BTreeSet<&str> = header.iter().skip(1).map(String::as_str).collect();
    let missing: Vec<String> =
        cols.iter().filter(|c| builder.codebook().get_in(table, c).is_none()).map(|c| (*c).to_owned()).collect();
    let unused: Vec<String> = builder
        .codebook()
        .fields_in(table)
        .filter(|f| !cols.contains(f.name.as_str()))
        .map(|f| f.name.clone())
        .collect();
    for field in missing {
        builder.violate(Violation::Schema { field, reason: format!("column in {file} has no descriptor") });
    }
    for field in unused {
        builder.violate(Violation::Schema { field, reason: format!("descriptor has no column in {file}") });
    }
}

fn load_clinical(builder: &mut StoreBuilder, bytes: &[u8], file: &str) {
    let mut rdr = reader(bytes);
    let header: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(str::to_owned).collect(),
        Err(e) => {
            builder.violate(Violation::Format { file: file.into(), line: 1, reason: e.to_string() });
            return;
        }
    };
    check_header(builder, Table::Clinical, &header, file);
    let dtypes: Vec<Option<Dtype>> =
        header.iter().map(|h| builder.codebook().get_in(Table::Clinical, h).map(|d| d.dtype)).collect();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                builder.violate(Violation::Format { file: file.into(), line, reason: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let uid = Uid::new(rec.get(0).unwrap_or_default());
        let mut values = Vec::with_capacity(header.len());
        let mut bad = false;
        for (i, cell) in rec.iter().enumerate().skip(1) {
            let Some(dtype) = dtypes[i] else { continue };
            let value = if cell.is_empty() {
                FieldValue::Missing
            } else {
                let parsed = match dtype {
                    Dtype::Numeric => cell.parse::<f64>().ok().map(FieldValue::Numeric),
                    Dtype::Categorical => cell.parse::<i64>().ok().map(FieldValue::Code),
                };
                match parsed {
                    Some(v) => v,
                    None => {
                        builder.violate(Violation::Format {
                            file: file.into(),
                            line,
                            reason: format!("cannot parse `{cell}` as {} for `{}`", dtype.as_str(), header[i]),
                        });
                        bad = true;
                        continue;
                    }
                }
            };
            values.push((header[i].clone(), value));
        }
        if !bad {
            builder.push_patient(uid, values);
        }
    }
}

fn column_index(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

fn parse_num(cell: &str, what: &str, file: &str, line: usize) -> Result<f64, Violation> {
    cell.trim().parse::<f64>().map_err(|_| Violation::Format {
        file: file.into(),
        line,
        reason: format!("cannot parse `{cell}` as number for `{what}`"),
    })
}

fn load_bp(builder: &mut StoreBuilder, bytes: &[u8], file: &str) {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return;
    }
    let mut rdr = reader(bytes);
    let header: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(str::to_owned).collect(),
        Err(e) => {
            builder.violate(Violation::Format { file: file.into(), line: 1, reason: e.to_string() });
            return;
        }
    };
    check_header(builder, Table::Bp, &header, file);
    let idx: Vec<Option<usize>> = BP_COLUMNS.iter().map(|c| column_index(&header, c)).collect();
    let [Some(ti), Some(si), Some(di)] = idx[..] else {
        builder.violate(Violation::Format {
            file: file.into(),
            line: 1,
            reason: "expected uid,t_hours,sbp,dbp".into(),
        });
        return;
    };
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                builder.violate(Violation::Format { file: file.into(), line, reason: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parsed = (|| {
            Ok::<_, Violation>(BpMeasurement {
                t: parse_num(&rec[ti], "t_hours", file, line)?,
                sbp: parse_num(&rec[si], "sbp", file, line)?,
                dbp: parse_num(&rec[di], "dbp", file, line)?,
            })
        })();
        match parsed {
            Ok(m) => builder.push_bp(&rec[0], m),
            Err(v) => builder.violate(v),
        }
    }
}

fn load_events(builder: &mut StoreBuilder, bytes: &[u8], file: &str) {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return;
    }
    let mut rdr = reader(bytes);
    let header: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(str::to_owned).collect(),
        Err(e) => {
            builder.violate(Violation::Format { file: file.into(), line: 1, reason: e.to_string() });
            return;
        }
    };
    check_header(builder, Table::Events, &header, file);
    let (Some(ki), Some(si)) = (column_index(&header, EVENT_COLUMNS[0]), column_index(&header, EVENT_COLUMNS[1]))
    else {
        builder.violate(Violation::Format {
            file: file.into(),
            line: 1,
            reason: "expected uid,kind,t_start_hours[,t_end_hours]".into(),
        });
        return;
    };
    let ei = column_index(&header, EVENT_COLUMNS[2]);
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                builder.violate(Violation::Format { file: file.into(), line, reason: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let kind = rec[ki].trim();
        if kind.is_empty() {
            builder.violate(Violation::Format { file: file.into(), line, reason: "empty event kind".into() });
            continue;
        }
        let t_start = match parse_num(&rec[si], "t_start_hours", file, line) {
            Ok(v) => v,
            Err(v) => {
                builder.violate(v);
                continue;
            }
        };
        let t_end = match ei.map(|i| rec[i].trim()).filter(|c| !c.is_empty()) {
            None => None,
            Some(cell) => match parse_num(cell, "t_end_hours", file, line) {
                Ok(v) => Some(v),
                Err(v) => {
                    builder.violate(v);
                    continue;
                }
            },
        };
        builder.push_event(&rec[0], ClinicalEvent { kind: EventKind::from_label(kind), t_start, t_end });
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

/// Writes a store back out in the four-file layout. Output is a pure
/// function of the store.
pub fn write_dataset(store: &PatientStore, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let clinical_fields: Vec<&str> = store.codebook().fields_in(Table::Clinical).map(|f| f.name.as_str()).collect();

    let mut clinical = String::from("uid");
    for f in &clinical_fields {
        clinical.push(',');
        clinical.push_str(f);
    }
    clinical.push('\n');
    let mut bp = String::from("uid,t_hours,sbp,dbp\n");
    let mut events = String::from("uid,kind,t_start_hours,t_end_hours\n");
    for row in 0..store.len() {
        let uid = store.uid_at(row);
        clinical.push_str(uid.as_str());
        for f in &clinical_fields {
            clinical.push(',');
            match store.value(row, f) {
                FieldValue::Numeric(v) => clinical.push_str(&fmt_num(v)),
                FieldValue::Code(c) => clinical.push_str(&c.to_string()),
                FieldValue::Missing => {}
            }
        }
        clinical.push('\n');
        for m in store.bp_at(row) {
            bp.push_str(&format!("{uid},{},{},{}\n", fmt_num(m.t), fmt_num(m.sbp), fmt_num(m.dbp)));
        }
        for e in store.events_at(row) {
            let end = e.t_end.map(fmt_num).unwrap_or_default();
            events.push_str(&format!("{uid},{},{},{end}\n", e.kind.label(), fmt_num(e.t_start)));
        }
    }
    let codebook = serde_json::to_string_pretty(store.codebook()).expect("codebook serializes");
    for (name, body) in DATASET_FILES.iter().zip([clinical, bp, events, codebook + "\n"]) {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(body.as_bytes()).map_err(io_err(&path))?;
    }
    Ok(())
}
