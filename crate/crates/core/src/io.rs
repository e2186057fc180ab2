//! Schema, array and constraint documents.
//!
//! * schema: JSON `{"attributes": [{"name": ..., "values": [...]}, ...]}`
//! * array: CSV whose header lists the attribute names in schema order,
//!   optionally preceded by an `id` column holding row labels
//! * constraints: JSON `{"hard": [[[attr, value], ...], ...], "soft": [...],
//!   "dont_care": [...], "allowed_column_sets": [[attr, ...], ...]}`; every
//!   field is optional
//!
//! Unknown attribute names or value labels are errors. Values are never
//! added to a domain implicitly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::model::{AccessProfileArray, AttributeDef, AttributeSchema, ColumnSet, Credential};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDocument {
    attributes: Vec<AttributeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeEntry {
    name: String,
    values: Vec<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDocument {
    #[serde(default)]
    hard: Vec<Vec<(String, String)>>,
    #[serde(default)]
    soft: Vec<Vec<(String, String)>>,
    #[serde(default)]
    dont_care: Vec<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allowed_column_sets: Option<Vec<Vec<String>>>,
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// 1-based line and column of the first occurrence of `needle`, or 1:1.
fn locate(text: &str, needle: &str) -> (u64, u64) {
    let Some(offset) = text.find(needle) else {
        return (1, 1);
    };
    let before = &text[..offset];
    let line = before.matches('\n').count() as u64 + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u64 + 1;
    (line, column)
}

fn parse_error(path: &str, line: u64, column: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn json_error(path: &str, e: serde_json::Error) -> Error {
    parse_error(path, e.line() as u64, e.column() as u64, e.to_string())
}

pub fn parse_schema(text: &str, path: &str) -> Result<AttributeSchema> {
    let doc: SchemaDocument = serde_json::from_str(text).map_err(|e| json_error(path, e))?;
    let attrs = doc
        .attributes
        .into_iter()
        .map(|a| AttributeDef {
            name: a.name,
            values: a.values,
        })
        .collect();
    AttributeSchema::new(attrs).map_err(|e| parse_error(path, 1, 1, e.to_string()))
}

pub fn serialize_schema(schema: &AttributeSchema) -> String {
    let doc = SchemaDocument {
        attributes: schema
            .attributes()
            .iter()
            .map(|a| AttributeEntry {
                name: a.name.clone(),
                values: a.values.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("schema serializes") + "\n"
}

pub fn read_schema(path: &Path) -> Result<AttributeSchema> {
    parse_schema(&read_file(path)?, &path.display().to_string())
}

/// Parses an array document. A header without data rows yields an empty
/// array, which is only accepted as a construction base.
pub fn parse_array(text: &str, path: &str, schema: &AttributeSchema) -> Result<AccessProfileArray> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(parse_error(path, 1, 1, "missing header line")),
    };
    let has_id = header.get(0) == Some("id");
    let offset = usize::from(has_id);
    let names: Vec<&str> = header.iter().skip(offset).collect();
    if names.len() != schema.len() {
        return Err(parse_error(
            path,
            1,
            1,
            format!(
                "header has {} attribute columns, schema has {}",
                names.len(),
                schema.len()
            ),
        ));
    }
    for (j, name) in names.iter().enumerate() {
        let expected = &schema.attribute(j).name;
        if name != expected {
            return Err(parse_error(
                path,
                1,
                (j + offset + 1) as u64,
                format!("expected column {expected:?}, found {name:?} (columns must follow schema order)"),
            ));
        }
    }

    let mut array = AccessProfileArray::empty(schema.clone());
    let mut labels = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != schema.len() + offset {
            return Err(parse_error(
                path,
                line,
                1,
                format!("expected {} fields, found {}", schema.len() + offset, record.len()),
            ));
        }
        if has_id {
            labels.push(record[0].to_string());
        }
        let mut row = Vec::with_capacity(schema.len());
        for j in 0..schema.len() {
            let label = &record[j + offset];
            let attr = schema.attribute(j);
            let value = attr.value_index(label).ok_or_else(|| {
                parse_error(
                    path,
                    line,
                    (j + offset + 1) as u64,
                    format!("unknown value {label:?} for attribute {:?}", attr.name),
                )
            })?;
            row.push(value);
        }
        array.push_row(row)?;
    }
    if has_id {
        array = array.with_row_labels(labels)?;
    }
    Ok(array)
}

fn csv_error(path: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_error(path, line, 1, e.to_string())
}

pub fn serialize_array(array: &AccessProfileArray) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let schema = array.schema();
    let mut header: Vec<&str> = Vec::new();
    if array.row_labels().is_some() {
        header.push("id");
    }
    header.extend(schema.attributes().iter().map(|a| a.name.as_str()));
    writer.write_record(&header).expect("in-memory write");
    for (i, row) in array.rows().enumerate() {
        let mut fields: Vec<&str> = Vec::new();
        if let Some(labels) = array.row_labels() {
            fields.push(&labels[i]);
        }
        fields.extend(
            row.iter()
                .enumerate()
                .map(|(j, &v)| schema.attribute(j).values[v].as_str()),
        );
        writer.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 labels")
}

pub fn read_array(path: &Path, schema: &AttributeSchema) -> Result<AccessProfileArray> {
    parse_array(&read_file(path)?, &path.display().to_string(), schema)
}

pub fn parse_constraints(text: &str, path: &str, schema: &AttributeSchema) -> Result<ConstraintSet> {
    let doc: ConstraintDocument = serde_json::from_str(text).map_err(|e| json_error(path, e))?;
    let resolve = |kind: &str, list: &[Vec<(String, String)>]| -> Result<Vec<Credential>> {
        list.iter()
            .enumerate()
            .map(|(i, pairs)| {
                let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, v)| (a.as_str(), v.as_str())).collect();
                Credential::from_labels(schema, &refs).map_err(|e| {
                    let anchor = pairs.first().map_or(String::new(), |p| format!("\"{}\"", p.0));
                    let (line, column) = locate(text, &format!("\"{kind}\""));
                    let (line, column) = if anchor.is_empty() {
                        (line, column)
                    } else {
                        locate_after(text, line, &anchor).unwrap_or((line, column))
                    };
                    parse_error(path, line, column, format!("{kind}[{i}]: {e}"))
                })
            })
            .collect()
    };
    let hard = resolve("hard", &doc.hard)?;
    let soft = resolve("soft", &doc.soft)?;
    let dont_care = resolve("dont_care", &doc.dont_care)?;
    let mut set = ConstraintSet::new(hard, soft, dont_care).map_err(|e| parse_error(path, 1, 1, e.to_string()))?;
    if let Some(allowed) = doc.allowed_column_sets {
        let sets = allowed
            .iter()
            .map(|names| {
                let columns = names
                    .iter()
                    .map(|n| {
                        schema.attribute_index(n).ok_or_else(|| {
                            let (line, column) = locate(text, &format!("\"{n}\""));
                            parse_error(
                                path,
                                line,
                                column,
                                format!("unknown attribute {n:?} in allowed_column_sets"),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ColumnSet::new(schema.len(), columns).map_err(|e| parse_error(path, 1, 1, e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        set = set.with_allowed_column_sets(sets);
    }
    Ok(set)
}

fn locate_after(text: &str, from_line: u64, needle: &str) -> Option<(u64, u64)> {
    let start: usize = text
        .split_inclusive('\n')
        .take(from_line.saturating_sub(1) as usize)
        .map(str::len)
        .sum();
    let (line, column) = locate(&text[start..], needle);
    text[start..].contains(needle).then_some((line + from_line - 1, column))
}

pub fn serialize_constraints(constraints: &ConstraintSet, schema: &AttributeSchema) -> String {
    let list = |set: &std::collections::BTreeSet<Credential>| -> Vec<Vec<(String, String)>> {
        set.iter()
            .map(|c| {
                c.labels(schema)
                    .into_iter()
                    .map(|(a, v)| (a.to_string(), v.to_string()))
                    .collect()
            })
            .collect()
    };
    let doc = ConstraintDocument {
        hard: list(constraints.hard()),
        soft: list(constraints.soft()),
        dont_care: list(constraints.dont_care()),
        allowed_column_sets: constraints.allowed_column_sets().map(|sets| {
            sets.iter()
                .map(|s| s.names(schema).into_iter().map(String::from).collect())
                .collect()
        }),
    };
    serde_json::to_string_pretty(&doc).expect("constraints serialize") + "\n"
}

pub fn read_constraints(path: &Path, schema: &AttributeSchema) -> Result<ConstraintSet> {
    parse_constraints(&read_file(path)?, &path.display().to_string(), schema)
}
