//! Expression matrices, covariate tables and their delimited-text formats.
//!
//! Expression files hold genes as rows and samples as columns, with the gene
//! identifier in the first column. Covariate files hold samples as rows. Both
//! accept tab or comma delimiters, detected from the header line (tab wins
//! when both appear). `NA`, `NaN` and empty cells are missing values and are
//! rejected.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Genes x samples matrix of (log-scale) expression values, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    gene_ids: Vec<String>,
    sample_ids: Vec<String>,
    values: Vec<f64>,
}

impl ExpressionMatrix {
    /// Builds a matrix from row-major values, validating shape, finiteness and
    /// identifier uniqueness.
    pub fn new(gene_ids: Vec<String>, sample_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != gene_ids.len() * sample_ids.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} genes x {} samples",
                values.len(),
                gene_ids.len(),
                sample_ids.len()
            )));
        }
        check_unique("gene identifiers", &gene_ids)?;
        check_unique("sample identifiers", &sample_ids)?;
        let n = sample_ids.len();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                file: "<memory>".into(),
                row: gene_ids[pos / n].clone(),
                column: sample_ids[pos % n].clone(),
            });
        }
        Ok(Self {
            gene_ids,
            sample_ids,
            values,
        })
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// Expression of gene `j` across all samples.
    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.n_samples();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero; an empty sample list has no rows worth iterating
        let n = self.n_samples().max(1);
        self.values.chunks_exact(n)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Samples x covariates table. Binary factors are coded 0/1; continuous
/// covariates are kept as given.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    sample_ids: Vec<String>,
    names: Vec<String>,
    /// Column-major: `columns[k][i]` is covariate `k` for sample `i`.
    columns: Vec<Vec<f64>>,
    /// Original level labels of text-coded factors, `[level for 0, level for 1]`.
    levels: Vec<Option<[String; 2]>>,
}

impl CovariateTable {
    pub fn new(sample_ids: Vec<String>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let levels = vec![None; names.len()];
        Self::with_levels(sample_ids, names, columns, levels)
    }

    fn with_levels(
        sample_ids: Vec<String>,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        levels: Vec<Option<[String; 2]>>,
    ) -> Result<Self> {
        check_unique("sample identifiers", &sample_ids)?;
        check_unique("covariate names", &names)?;
        if columns.len() != names.len() {
            return Err(Error::Dimension(format!(
                "{} columns for {} covariate names",
                columns.len(),
                names.len()
            )));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != sample_ids.len() {
                return Err(Error::Dimension(format!(
                    "covariate '{name}' has {} values for {} samples",
                    col.len(),
                    sample_ids.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    file: "<memory>".into(),
                    row: sample_ids[i].clone(),
                    column: name.clone(),
                });
            }
            if distinct_values(col).len() < 2 {
                return Err(Error::InvalidCovariate {
                    name: name.clone(),
                    reason: "fewer than two distinct values".into(),
                });
            }
        }
        Ok(Self {
            sample_ids,
            names,
            columns,
            levels,
        })
    }

    /// Appends the element-wise product of columns `a` and `b` as `a:b`.
    /// Returns the table unchanged if that column already exists.
    pub fn with_product(&self, a: &str, b: &str) -> Result<Self> {
        let name = format!("{a}:{b}");
        if self.names.contains(&name) {
            return Ok(self.clone());
        }
        let (ca, cb) = (self.column_by_name(a)?, self.column_by_name(b)?);
        let mut names = self.names.clone();
        let mut columns = self.columns.clone();
        let mut levels = self.levels.clone();
        names.push(name);
        columns.push(ca.iter().zip(cb).map(|(x, y)| x * y).collect());
        levels.push(None);
        Self::with_levels(self.sample_ids.clone(), names, columns, levels)
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownCovariate(name.to_string()))
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index_of(name)?])
    }

    pub fn levels(&self, k: usize) -> Option<&[String; 2]> {
        self.levels[k].as_ref()
    }

    /// True when the column takes exactly the values 0 and 1.
    pub fn is_binary(&self, k: usize) -> bool {
        let d = distinct_values(&self.columns[k]);
        d.len() == 2 && d[0] == 0.0 && d[1] == 1.0
    }

    /// Returns a table restricted to the named covariates, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<CovariateTable> {
        let mut cols = Vec::with_capacity(names.len());
        let mut levels = Vec::with_capacity(names.len());
        for name in names {
            let k = self.index_of(name)?;
            cols.push(self.columns[k].clone());
            levels.push(self.levels[k].clone());
        }
        Self::with_levels(
            self.sample_ids.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            cols,
            levels,
        )
    }

    /// Reorders rows to follow `order`, returning the aligned table and the
    /// permutation `perm` with `aligned[i] = self[perm[i]]`.
    pub fn align_to(&self, order: &[String]) -> Result<(CovariateTable, Vec<usize>)> {
        let position: HashMap<&str, usize> = self
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let missing: Vec<&str> = order
            .iter()
            .filter(|s| !position.contains_key(s.as_str()))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::SampleMismatch(format!(
                "samples missing from covariate table: {}",
                missing.join(", ")
            )));
        }
        let wanted: HashSet<&str> = order.iter().map(String::as_str).collect();
        let extra: Vec<&str> = self
            .sample_ids
            .iter()
            .filter(|s| !wanted.contains(s.as_str()))
            .map(String::as_str)
            .collect();
        if !extra.is_empty() {
            return Err(Error::SampleMismatch(format!(
                "covariate samples absent from expression matrix: {}",
                extra.join(", ")
            )));
        }
        let perm: Vec<usize> = order.iter().map(|s| position[s.as_str()]).collect();
        let columns = self
            .columns
            .iter()
            .map(|col| perm.iter().map(|&i| col[i]).collect())
            .collect();
        let table = CovariateTable {
            sample_ids: order.to_vec(),
            names: self.names.clone(),
            columns,
            levels: self.levels.clone(),
        };
        Ok((table, perm))
    }
}

/// Expression matrix and covariate table with matching sample order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub expression: ExpressionMatrix,
    pub covariates: CovariateTable,
}

impl Dataset {
    pub fn new(expression: ExpressionMatrix, covariates: CovariateTable) -> Result<Self> {
        let (covariates, _) = covariates.align_to(expression.sample_ids())?;
        Ok(Self {
            expression,
            covariates,
        })
    }

    pub fn n_genes(&self) -> usize {
        self.expression.n_genes()
    }

    pub fn n_samples(&self) -> usize {
        self.expression.n_samples()
    }

    pub fn summary(&self) -> String {
        format!(
            "{} genes x {} samples, {} covariates ({})",
            self.n_genes(),
            self.n_samples(),
            self.covariates.names().len(),
            self.covariates.names().join(", ")
        )
    }
}

/// Loads an expression file and a covariate file and aligns the covariate
/// rows to the expression sample order.
pub fn load_dataset(expr_path: impl AsRef<Path>, covar_path: impl AsRef<Path>) -> Result<Dataset> {
    let expression = read_expression(expr_path)?;
    let covariates = read_covariates(covar_path)?;
    Dataset::new(expression, covariates)
}

pub fn read_expression(path: impl AsRef<Path>) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_expression(&text, &path.display().to_string())
}

pub fn parse_expression(text: &str, file: &str) -> Result<ExpressionMatrix> {
    let table = RawTable::parse(text, file)?;
    let sample_ids: Vec<String> = table.header[1..].to_vec();
    let n = sample_ids.len();
    let mut gene_ids = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len() * n);
    for (cells, _) in &table.rows {
        let gene = &cells[0];
        for (cell, sample) in cells[1..].iter().zip(&sample_ids) {
            match parse_number(cell) {
                Some(v) => values.push(v),
                None if is_missing(cell) || parse_float_any(cell).is_some() => {
                    return Err(Error::NonFinite {
                        file: file.into(),
                        row: gene.clone(),
                        column: sample.clone(),
                    })
                }
                None => {
                    return Err(Error::Parse {
                        file: file.into(),
                        line: 0,
                        message: format!("gene '{gene}', sample '{sample}': '{cell}' is not a number"),
                    })
                }
            }
        }
        gene_ids.push(gene.clone());
    }
    check_unique("gene identifiers", &gene_ids)?;
    check_unique("sample identifiers", &sample_ids)?;
    ExpressionMatrix::new(gene_ids, sample_ids, values)
}

pub fn read_covariates(path: impl AsRef<Path>) -> Result<CovariateTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_covariates(&text, &path.display().to_string())
}

/// Parses a covariate table. Numeric columns are taken as-is; a text column
/// must have exactly two levels and is coded with the lexicographically
/// smaller level as 0.
pub fn parse_covariates(text: &str, file: &str) -> Result<CovariateTable> {
    let table = RawTable::parse(text, file)?;
    let names: Vec<String> = table.header[1..].to_vec();
    let sample_ids: Vec<String> = table.rows.iter().map(|(c, _)| c[0].clone()).collect();
    check_unique("sample identifiers", &sample_ids)?;
    check_unique("covariate names", &names)?;

    let mut columns = Vec::with_capacity(names.len());
    let mut levels = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let cells: Vec<&str> = table.rows.iter().map(|(c, _)| c[k + 1].as_str()).collect();
        if let Some(i) = cells.iter().position(|c| is_missing(c)) {
            return Err(Error::NonFinite {
                file: file.into(),
                row: sample_ids[i].clone(),
                column: name.clone(),
            });
        }
        let numeric: Vec<Option<f64>> = cells.iter().map(|c| parse_float_any(c)).collect();
        if numeric.iter().all(Option::is_some) {
            let col: Vec<f64> = numeric.into_iter().map(Option::unwrap).collect();
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    file: file.into(),
                    row: sample_ids[i].clone(),
                    column: name.clone(),
                });
            }
            columns.push(col);
            levels.push(None);
        } else {
            let distinct: BTreeSet<&str> = cells.iter().copied().collect();
            if distinct.len() != 2 {
                return Err(Error::InvalidCovariate {
                    name: name.clone(),
                    reason: format!("text column must have exactly 2 levels, found {}", distinct.len()),
                });
            }
            let mut it = distinct.into_iter();
            let low = it.next().unwrap().to_string();
            let high = it.next().unwrap().to_string();
            columns.push(cells.iter().map(|c| if *c == low { 0.0 } else { 1.0 }).collect());
            levels.push(Some([low, high]));
        }
    }
    CovariateTable::with_levels(sample_ids, names, columns, levels)
}

/// Recodes the named two-valued columns to 0/1, mapping the smaller original
/// level to 0. Columns already coded 0/1 are unchanged.
pub fn standardize_factors(table: &CovariateTable, names: &[&str]) -> Result<CovariateTable> {
    let mut out = table.clone();
    for name in names {
        let k = table.index_of(name)?;
        let distinct = distinct_values(&table.columns[k]);
        if distinct.len() != 2 {
            return Err(Error::InvalidCovariate {
                name: name.to_string(),
                reason: format!("expected 2 distinct values, found {}", distinct.len()),
            });
        }
        let low = distinct[0];
        out.columns[k] = table.columns[k]
            .iter()
            .map(|&v| if v == low { 0.0 } else { 1.0 })
            .collect();
        if out.levels[k].is_none() {
            out.levels[k] = Some([fmt_num(distinct[0]), fmt_num(distinct[1])]);
        }
    }
    Ok(out)
}

pub fn write_expression(path: impl AsRef<Path>, m: &ExpressionMatrix) -> Result<()> {
    let mut out = String::with_capacity(m.values.len() * 12);
    out.push_str("gene_id");
    for s in &m.sample_ids {
        out.push('\t');
        out.push_str(s);
    }
    out.push('\n');
    for (gene, row) in m.gene_ids.iter().zip(m.rows()) {
        out.push_str(gene);
        for v in row {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_covariates(path: impl AsRef<Path>, t: &CovariateTable) -> Result<()> {
    let mut out = String::from("sample_id");
    for name in &t.names {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for (i, s) in t.sample_ids.iter().enumerate() {
        out.push_str(s);
        for col in &t.columns {
            let _ = write!(out, "\t{}", col[i]);
        }
        out.push('\n');
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct RawTable {
    header: Vec<String>,
    /// Cells and 1-based source line number.
    rows: Vec<(Vec<String>, usize)>,
}

impl RawTable {
    fn parse(text: &str, file: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
            file: file.into(),
            line: 1,
            message: "empty file".into(),
        })?;
        let delim = if header_line.contains('\t') || !header_line.contains(',') {
            '\t'
        } else {
            ','
        };
        let header: Vec<String> = split(header_line, delim);
        if header.len() < 2 {
            return Err(Error::Parse {
                file: file.into(),
                line: 1,
                message: "header needs an identifier column and at least one data column".into(),
            });
        }
        let mut rows = Vec::new();
        for (line_no, line) in lines {
            let cells = split(line, delim);
            if cells.len() != header.len() {
                return Err(Error::Parse {
                    file: file.into(),
                    line: line_no,
                    message: format!("expected {} fields, found {}", header.len(), cells.len()),
                });
            }
            if cells[0].is_empty() {
                return Err(Error::Parse {
                    file: file.into(),
                    line: line_no,
                    message: "empty identifier".into(),
                });
            }
            rows.push((cells, line_no));
        }
        Ok(Self { header, rows })
    }
}

fn split(line: &str, delim: char) -> Vec<String> {
    line.split(delim)
        .map(|c| c.trim().trim_matches('"').to_string())
        .collect()
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Parses any float, including non-finite spellings.
fn parse_float_any(cell: &str) -> Option<f64> {
    if is_missing(cell) {
        return None;
    }
    cell.parse::<f64>().ok()
}

fn parse_number(cell: &str) -> Option<f64> {
    parse_float_any(cell).filter(|v| v.is_finite())
}

fn check_unique(what: &str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                what: what.into(),
                id: id.clone(),
            });
        }
    }
    Ok(())
}

/// Sorted distinct values of a column.
pub(crate) fn distinct_values(col: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = col.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}
