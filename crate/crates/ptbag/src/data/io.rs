//! CSV and ARFF/KEEL file ingestion plus CSV export.
//!
//! CSV: comma-separated, header row, UTF-8, `.` decimal point, empty cell =
//! missing. A column is numeric iff every non-empty cell parses as a finite
//! real; all other columns are nominal with categories ordered by first
//! appearance. Class indices follow first appearance of each label value.
//!
//! ARFF subset: `@relation`, `@attribute name real|integer|numeric|{...}`,
//! optional KEEL `@inputs`/`@outputs`, `@data`, `%` comments, `?` missing.
//! The class attribute is the `@outputs` column when declared, the last
//! attribute otherwise, and must be nominal; class order follows the
//! declaration.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{AttributeKind, AttributeSpec, Cell, DataError, Dataset};

/// Label column selector for CSV files.
#[derive(Debug, Clone)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }
}

impl From<usize> for LabelColumn {
    fn from(i: usize) -> Self {
        LabelColumn::Index(i)
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn load_csv(path: impl AsRef<Path>, label: LabelColumn) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;

    let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();

    let label_idx = match &label {
        LabelColumn::Index(i) => {
            if *i >= header.len() {
                return Err(DataError::Malformed(format!(
                    "label column index {} out of range ({} columns)",
                    i,
                    header.len()
                )));
            }
            *i
        }
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Malformed(format!("label column '{}' not found", name)))?,
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record?; // ragged rows surface here
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }

    let attr_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_idx).collect();

    // Numeric iff every non-empty cell parses as a finite real.
    let numeric: Vec<bool> = attr_cols
        .iter()
        .map(|&c| {
            rows.iter()
                .map(|r| r[c].as_str())
                .filter(|s| !s.is_empty())
                .all(|s| parse_finite(s).is_some())
        })
        .collect();

    let mut attributes = Vec::with_capacity(attr_cols.len());
    let mut categories: Vec<Vec<String>> = vec![Vec::new(); attr_cols.len()];
    for (j, &c) in attr_cols.iter().enumerate() {
        if numeric[j] {
            attributes.push(AttributeSpec::numeric(header[c].clone()));
        } else {
            for r in &rows {
                let v = &r[c];
                if !v.is_empty() && !categories[j].contains(v) {
                    categories[j].push(v.clone());
                }
            }
            attributes.push(AttributeSpec::nominal(
                header[c].clone(),
                categories[j].clone(),
            ));
        }
    }

    let mut class_names: Vec<String> = Vec::new();
    let mut instances = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let y = &r[label_idx];
        if y.is_empty() {
            return Err(DataError::Malformed(format!(
                "row {}: missing class label",
                i
            )));
        }
        let yi = match class_names.iter().position(|c| c == y) {
            Some(k) => k,
            None => {
                class_names.push(y.clone());
                class_names.len() - 1
            }
        };
        labels.push(yi);

        let mut cells = Vec::with_capacity(attr_cols.len());
        for (j, &c) in attr_cols.iter().enumerate() {
            let v = &r[c];
            if v.is_empty() {
                cells.push(Cell::Missing);
            } else if numeric[j] {
                cells.push(Cell::Num(parse_finite(v).expect("checked numeric")));
            } else {
                let k = categories[j]
                    .iter()
                    .position(|x| x == v)
                    .expect("seen value");
                cells.push(Cell::Cat(k));
            }
        }
        instances.push(cells);
    }

    Dataset::new(attributes, instances, labels, class_names)
}

/// Writes a dataset as CSV: attribute columns in order, then the class as a
/// final `class` column. Numerics use the shortest exact representation, so
/// `load_csv(write_csv(d))` reproduces `d` for any CSV-loaded dataset.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = d.attributes().iter().map(|a| a.name.clone()).collect();
    header.push("class".to_string());
    w.write_record(&header)?;
    for i in 0..d.n_rows() {
        let mut record: Vec<String> = Vec::with_capacity(d.n_attrs() + 1);
        for (cell, attr) in d.row(i).iter().zip(d.attributes()) {
            record.push(match (cell, &attr.kind) {
                (Cell::Num(v), _) => format!("{}", v),
                (Cell::Cat(c), AttributeKind::Nominal { categories }) => categories[*c].clone(),
                (Cell::Missing, _) => String::new(),
                _ => unreachable!("dataset invariant"),
            });
        }
        record.push(d.class_names()[d.label(i)].clone());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2
        && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"')))
    {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

#[derive(Debug)]
struct ArffAttribute {
    name: String,
    kind: AttributeKind,
}

pub fn load_arff(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);

    let mut declared: Vec<ArffAttribute> = Vec::new();
    let mut outputs: Option<Vec<String>> = None;
    let mut saw_relation = false;
    let mut in_data = false;
    let mut data_rows: Vec<Vec<String>> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                saw_relation = true;
            } else if lower.starts_with("@attribute") {
                declared.push(parse_attribute_line(line, lineno)?);
            } else if lower.starts_with("@inputs") {
                // Recorded for completeness; attribute selection is driven
                // by @outputs / last-attribute, matching KEEL usage.
            } else if lower.starts_with("@outputs") {
                let rest = &line["@outputs".len()..];
                outputs = Some(
                    rest.split(',')
                        .map(|s| strip_quotes(s).to_string())
                        .filter(|s| !s.is_empty())
                        .collect(),
                );
            } else if lower.starts_with("@data") {
                in_data = true;
            } else {
                return Err(DataError::Malformed(format!(
                    "line {}: unrecognized header line '{}'",
                    lineno + 1,
                    line
                )));
            }
        } else {
            data_rows.push(
                line.split(',')
                    .map(|s| strip_quotes(s).to_string())
                    .collect(),
            );
        }
    }

    if !saw_relation || !in_data {
        return Err(DataError::Malformed(
            "not an ARFF file: missing @relation or @data".into(),
        ));
    }
    if declared.is_empty() {
        return Err(DataError::Malformed("no @attribute declarations".into()));
    }

    let class_pos = match &outputs {
        Some(names) => {
            if names.len() != 1 {
                return Err(DataError::Malformed(format!(
                    "@outputs must name exactly one attribute, got {}",
                    names.len()
                )));
            }
            declared
                .iter()
                .position(|a| a.name == names[0])
                .ok_or_else(|| {
                    DataError::Malformed(format!("@outputs names unknown attribute '{}'", names[0]))
                })?
        }
        None => declared.len() - 1,
    };

    let class_names = match &declared[class_pos].kind {
        AttributeKind::Nominal { categories } => categories.clone(),
        AttributeKind::Numeric => {
            return Err(DataError::Malformed(format!(
                "class attribute '{}' must be nominal",
                declared[class_pos].name
            )));
        }
    };

    let attr_pos: Vec<usize> = (0..declared.len()).filter(|&i| i != class_pos).collect();
    let attributes: Vec<AttributeSpec> = attr_pos
        .iter()
        .map(|&i| AttributeSpec {
            name: declared[i].name.clone(),
            kind: declared[i].kind.clone(),
        })
        .collect();

    let mut instances = Vec::with_capacity(data_rows.len());
    let mut labels = Vec::with_capacity(data_rows.len());
    for (i, row) in data_rows.iter().enumerate() {
        if row.len() != declared.len() {
            return Err(DataError::Malformed(format!(
                "data row {}: {} values, expected {}",
                i,
                row.len(),
                declared.len()
            )));
        }
        let y = row[class_pos].as_str();
        if y == "?" {
            return Err(DataError::Malformed(format!(
                "data row {}: missing class label",
                i
            )));
        }
        let yi = class_names.iter().position(|c| c == y).ok_or_else(|| {
            DataError::Malformed(format!("data row {}: undeclared class '{}'", i, y))
        })?;
        labels.push(yi);

        let mut cells = Vec::with_capacity(attr_pos.len());
        for &p in &attr_pos {
            let v = row[p].as_str();
            if v == "?" {
                cells.push(Cell::Missing);
                continue;
            }
            match &declared[p].kind {
                AttributeKind::Numeric => match parse_finite(v) {
                    Some(x) => cells.push(Cell::Num(x)),
                    None => {
                        return Err(DataError::Malformed(format!(
                            "data row {}: '{}' is not numeric for attribute '{}'",
                            i, v, declared[p].name
                        )));
                    }
                },
                AttributeKind::Nominal { categories } => {
                    let k = categories.iter().position(|c| c == v).ok_or_else(|| {
                        DataError::Malformed(format!(
                            "data row {}: undeclared nominal value '{}' for attribute '{}'",
                            i, v, declared[p].name
                        ))
                    })?;
                    cells.push(Cell::Cat(k));
                }
            }
        }
        instances.push(cells);
    }

    Dataset::new(attributes, instances, labels, class_names)
}

fn parse_attribute_line(line: &str, lineno: usize) -> Result<ArffAttribute, DataError> {
    let rest = line["@attribute".len()..].trim();
    let (name, type_str) = if rest.starts_with('\'') || rest.starts_with('"') {
        let quote = rest.chars().next().unwrap();
        let end = rest[1..].find(quote).ok_or_else(|| {
            DataError::Malformed(format!("line {}: unterminated quoted name", lineno + 1))
        })?;
        (rest[1..1 + end].to_string(), rest[2 + end..].trim())
    } else {
        let mut it = rest.splitn(2, char::is_whitespace);
        let name = it.next().unwrap_or("").to_string();
        (name, it.next().unwrap_or("").trim())
    };
    if name.is_empty() || type_str.is_empty() {
        return Err(DataError::Malformed(format!(
            "line {}: malformed @attribute",
            lineno + 1
        )));
    }

    let kind = if type_str.starts_with('{') {
        let inner = type_str
            .strip_prefix('{')
            .and_then(|s| s.trim_end().strip_suffix('}'))
            .ok_or_else(|| {
                DataError::Malformed(format!("line {}: malformed nominal spec", lineno + 1))
            })?;
        let categories: Vec<String> = inner
            .split(',')
            .map(|s| strip_quotes(s).to_string())
            .collect();
        if categories.iter().any(|c| c.is_empty()) {
            return Err(DataError::Malformed(format!(
                "line {}: empty nominal category",
                lineno + 1
            )));
        }
        AttributeKind::Nominal { categories }
    } else {
        // KEEL appends ranges, e.g. `real [0.0, 1.0]`; only the leading
        // token decides the kind.
        let head = type_str
            .split(|c: char| c.is_whitespace() || c == '[')
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        match head.as_str() {
            "real" | "integer" | "numeric" => AttributeKind::Numeric,
            other => {
                return Err(DataError::Malformed(format!(
                    "line {}: unsupported attribute type '{}'",
                    lineno + 1,
                    other
                )));
            }
        }
    };
    Ok(ArffAttribute { name, kind })
}
