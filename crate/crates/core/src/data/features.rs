//! Per-entity feature matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::interactions::IndexMap;
use crate::error::{Error, Result};
use crate::Tensor;

/// What a feature column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// 0/1 indicator.
    Binary,
    /// Member of a one-hot group produced by categorization.
    Categorical,
    /// Arbitrary non-negative real; must be categorized before
    /// multi-relational use.
    Real,
}

/// Dense per-entity feature matrix with a per-column schema.
#[derive(Debug, Clone)]
pub struct Features {
    values: Tensor,
    kinds: Vec<ColumnKind>,
}

impl Features {
    pub fn new(values: Tensor, kinds: Vec<ColumnKind>) -> Self {
        assert_eq!(values.cols(), kinds.len(), "one kind per column");
        Self { values, kinds }
    }

    /// All-zero features (entities with no side information).
    pub fn zeros(n_entities: usize, n_features: usize) -> Self {
        Self {
            values: Tensor::zeros(n_entities, n_features),
            kinds: vec![ColumnKind::Binary; n_features],
        }
    }

    pub fn n_entities(&self) -> usize {
        self.values.rows()
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn row(&self, entity: usize) -> &[f64] {
        self.values.row(entity)
    }

    pub fn kind(&self, col: usize) -> ColumnKind {
        self.kinds[col]
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    /// Entities whose feature row is all zero.
    pub fn zero_row_count(&self) -> usize {
        (0..self.n_entities())
            .filter(|&r| self.row(r).iter().all(|&v| v == 0.0))
            .count()
    }

    /// Infers Binary vs Real per column from the stored values.
    fn infer_kinds(values: &Tensor) -> Vec<ColumnKind> {
        (0..values.cols())
            .map(|c| {
                let binary = (0..values.rows()).all(|r| {
                    let v = values.get(r, c);
                    v == 0.0 || v == 1.0
                });
                if binary {
                    ColumnKind::Binary
                } else {
                    ColumnKind::Real
                }
            })
            .collect()
    }

    /// Parses the features TSV contract. The first non-blank line must be
    /// the header `#k=<feature-count>`; other `#` lines are ignored. Each
    /// data line is `entity_id<TAB>f:v[ f:v ...]` with 0-based feature
    /// indices. Entities absent from the file keep all-zero rows.
    pub fn load(path: &Path, ids: &IndexMap) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut k: Option<usize> = None;
        let mut rows: Vec<(u32, Vec<(usize, f64)>)> = Vec::new();

        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if k.is_none() {
                    let rest = rest.trim();
                    let Some(kv) = rest.strip_prefix("k=") else {
                        return Err(Error::Parse {
                            path: path.display().to_string(),
                            line: lineno + 1,
                            msg: "first line must be the header #k=<feature-count>".into(),
                        });
                    };
                    k = Some(kv.parse().map_err(|_| Error::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        msg: format!("bad feature count '{kv}'"),
                    })?);
                }
                continue;
            }
            let Some(k) = k else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: "missing mandatory header #k=<feature-count>".into(),
                });
            };
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default();
            let entity = ids.get(id).ok_or_else(|| Error::Data(format!(
                "feature entity id '{id}' ({path}:{line}) not present in the interaction index map",
                path = path.display(),
                line = lineno + 1,
            )))?;
            let mut pairs = Vec::new();
            if let Some(spec) = fields.next() {
                for tok in spec.split(' ').filter(|t| !t.is_empty()) {
                    let (f, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        msg: format!("expected f:v, got '{tok}'"),
                    })?;
                    let f: usize = f.parse().map_err(|_| Error::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        msg: format!("bad feature index '{f}'"),
                    })?;
                    let v: f64 = v.parse().map_err(|_| Error::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        msg: format!("bad feature value '{v}'"),
                    })?;
                    if f >= k {
                        return Err(Error::Parse {
                            path: path.display().to_string(),
                            line: lineno + 1,
                            msg: format!("feature index {f} out of declared bound k={k}"),
                        });
                    }
                    if v < 0.0 {
                        return Err(Error::Data(format!(
                            "negative feature value {v} at {}:{}",
                            path.display(),
                            lineno + 1
                        )));
                    }
                    pairs.push((f, v));
                }
            }
            rows.push((entity, pairs));
        }

        let k = k.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "missing mandatory header #k=<feature-count>".into(),
        })?;
        let mut values = Tensor::zeros(ids.len(), k);
        for (entity, pairs) in rows {
            for (f, v) in pairs {
                values.set(entity as usize, f, v);
            }
        }
        let kinds = Self::infer_kinds(&values);
        Ok(Self { values, kinds })
    }

    /// Writes the same TSV contract back out (sparse form, zeros omitted).
    pub fn save(&self, path: &Path, ids: &IndexMap) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "#k={}", self.n_features()).expect("string write");
        for e in 0..self.n_entities() {
            let pairs: Vec<String> = self
                .row(e)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(f, &v)| format!("{f}:{v}"))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            writeln!(out, "{}\t{}", ids.raw(e as u32), pairs.join(" ")).expect("string write");
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Replaces one real-valued column with the one-hot encoding produced
    /// by [`categorize_real_feature`]. Columns keep their order; the new
    /// group is appended in place of the old column.
    pub fn categorize_column(
        &self,
        col: usize,
        bin_width: f64,
        bin_count: usize,
    ) -> Result<Features> {
        let vals: Vec<f64> = (0..self.n_entities()).map(|r| self.values.get(r, col)).collect();
        let onehot = categorize_real_feature(&vals, bin_width, bin_count)?;
        let n = self.n_entities();
        let new_k = self.n_features() - 1 + bin_count;
        let mut values = Tensor::zeros(n, new_k);
        let mut kinds = Vec::with_capacity(new_k);
        for c in 0..col {
            kinds.push(self.kinds[c]);
        }
        kinds.extend(std::iter::repeat(ColumnKind::Categorical).take(bin_count));
        for c in col + 1..self.n_features() {
            kinds.push(self.kinds[c]);
        }
        for r in 0..n {
            for c in 0..col {
                values.set(r, c, self.values.get(r, c));
            }
            for b in 0..bin_count {
                values.set(r, col + b, onehot.get(r, b));
            }
            for c in col + 1..self.n_features() {
                values.set(r, c - 1 + bin_count, self.values.get(r, c));
            }
        }
        Ok(Features { values, kinds })
    }
}

/// Buckets non-negative reals into `min(floor(v / bin_width), bin_count - 1)`
/// and returns the one-hot matrix over `bin_count` columns.
pub fn categorize_real_feature(
    values: &[f64],
    bin_width: f64,
    bin_count: usize,
) -> Result<Tensor> {
    if bin_width <= 0.0 {
        return Err(Error::Config(format!("bin width {bin_width} must be > 0")));
    }
    if bin_count == 0 {
        return Err(Error::Config("bin count must be >= 1".into()));
    }
    let mut out = Tensor::zeros(values.len(), bin_count);
    for (r, &v) in values.iter().enumerate() {
        if v < 0.0 {
            return Err(Error::Data(format!(
                "negative value {v} at entity {r} cannot be categorized"
            )));
        }
        let bucket = ((v / bin_width).floor() as usize).min(bin_count - 1);
        out.set(r, bucket, 1.0);
    }
    Ok(out)
}
