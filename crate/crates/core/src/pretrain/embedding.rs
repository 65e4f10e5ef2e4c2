//! Pre-trained embedding sets and their on-disk format.
//!
//! One file per entity side. Line 1 is the header
//! `#pretrained<TAB>side=<user|item><TAB>n=<count><TAB>d=<dim><TAB>seed=<s><TAB>model=<name>`,
//! then one line per entity: `dense_index<TAB>v1<TAB>...<TAB>vd` with reals
//! printed at 17 significant digits, so a save/load round trip is bit-exact.
//! Biases are training-internal and are not serialized; fine-tuners receive
//! only the embedding tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::Tensor;

/// Where an embedding set came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub model: String,
    pub seed: u64,
}

/// Entity embeddings produced by a pre-trainer.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    pub user: Tensor,
    pub item: Tensor,
    pub user_bias: Tensor,
    pub item_bias: Tensor,
    pub provenance: Provenance,
}

impl EmbeddingSet {
    pub fn new(
        user: Tensor,
        item: Tensor,
        user_bias: Tensor,
        item_bias: Tensor,
        provenance: Provenance,
    ) -> Result<Self> {
        if user.cols() != item.cols() {
            return Err(Error::Config(format!(
                "user dim {} != item dim {}",
                user.cols(),
                item.cols()
            )));
        }
        for (t, what) in [
            (&user, "user embeddings"),
            (&item, "item embeddings"),
            (&user_bias, "user biases"),
            (&item_bias, "item biases"),
        ] {
            t.check_finite(what)?;
        }
        Ok(Self {
            user,
            item,
            user_bias,
            item_bias,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.user.cols()
    }

    pub fn n_users(&self) -> usize {
        self.user.rows()
    }

    pub fn n_items(&self) -> usize {
        self.item.rows()
    }

    /// File pair written by [`save_embeddings`] for a given stem.
    pub fn side_paths(stem: &Path) -> (PathBuf, PathBuf) {
        let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let dir = stem.parent().map(Path::to_path_buf).unwrap_or_default();
        (
            dir.join(format!("{name}.user.tsv")),
            dir.join(format!("{name}.item.tsv")),
        )
    }
}

fn write_side(
    path: &Path,
    side: &str,
    table: &Tensor,
    seed: u64,
    model: &str,
) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "#pretrained\tside={side}\tn={}\td={}\tseed={seed}\tmodel={model}",
        table.rows(),
        table.cols()
    )
    .expect("string write");
    for r in 0..table.rows() {
        write!(out, "{r}").expect("string write");
        for &v in table.row(r) {
            write!(out, "\t{v:.16e}").expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Saves both sides next to `stem` as `<stem>.user.tsv` / `<stem>.item.tsv`
/// and returns the two paths.
pub fn save_embeddings(emb: &EmbeddingSet, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let (user_path, item_path) = EmbeddingSet::side_paths(stem);
    write_side(
        &user_path,
        "user",
        &emb.user,
        emb.provenance.seed,
        &emb.provenance.model,
    )?;
    write_side(
        &item_path,
        "item",
        &emb.item,
        emb.provenance.seed,
        &emb.provenance.model,
    )?;
    Ok((user_path, item_path))
}

struct SideFile {
    table: Tensor,
    seed: u64,
    model: String,
}

fn read_side(path: &Path, want_side: &str) -> Result<SideFile> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?;
    let mut fields = header.split('\t');
    if fields.next() != Some("#pretrained") {
        return Err(Error::Format(format!(
            "{}: missing #pretrained header",
            path.display()
        )));
    }
    let (mut side, mut n, mut d, mut seed, mut model) = (None, None, None, None, None);
    for f in fields {
        match f.split_once('=') {
            Some(("side", v)) => side = Some(v.to_string()),
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            Some(("d", v)) => d = v.parse::<usize>().ok(),
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            Some(("model", v)) => model = Some(v.to_string()),
            _ => {
                return Err(Error::Format(format!(
                    "{}: unknown header field '{f}'",
                    path.display()
                )))
            }
        }
    }
    let (side, n, d, seed, model) = match (side, n, d, seed, model) {
        (Some(s), Some(n), Some(d), Some(seed), Some(m)) => (s, n, d, seed, m),
        _ => {
            return Err(Error::Format(format!(
                "{}: incomplete header '{header}'",
                path.display()
            )))
        }
    };
    if side != want_side {
        return Err(Error::Format(format!(
            "{}: expected side={want_side}, found side={side}",
            path.display()
        )));
    }

    let mut table = Tensor::zeros(n, d);
    let mut seen = 0usize;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let idx: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!(
                "{}:{}: bad entity index",
                path.display(),
                lineno + 1
            )))?;
        if idx >= n {
            return Err(Error::Format(format!(
                "{}:{}: entity index {idx} out of range n={n}",
                path.display(),
                lineno + 1
            )));
        }
        let vals: Vec<f64> = parts
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!(
                "{}:{}: bad value: {e}",
                path.display(),
                lineno + 1
            )))?;
        if vals.len() != d {
            return Err(Error::Format(format!(
                "{}:{}: row has {} values, expected d={d}",
                path.display(),
                lineno + 1,
                vals.len()
            )));
        }
        table.row_mut(idx).copy_from_slice(&vals);
        seen += 1;
    }
    if seen != n {
        return Err(Error::Format(format!(
            "{}: {seen} rows for n={n} entities",
            path.display()
        )));
    }
    Ok(SideFile { table, seed, model })
}

/// Loads the file pair written by [`save_embeddings`]. Biases are not part
/// of the format and come back as zeros.
pub fn load_embeddings(stem: &Path) -> Result<EmbeddingSet> {
    let (user_path, item_path) = EmbeddingSet::side_paths(stem);
    let user = read_side(&user_path, "user")?;
    let item = read_side(&item_path, "item")?;
    if user.table.cols() != item.table.cols() {
        return Err(Error::Format(format!(
            "user file d={} but item file d={}",
            user.table.cols(),
            item.table.cols()
        )));
    }
    if user.seed != item.seed || user.model != item.model {
        return Err(Error::Format(
            "user and item files come from different runs".into(),
        ));
    }
    let n = user.table.rows();
    let m = item.table.rows();
    EmbeddingSet::new(
        user.table,
        item.table,
        Tensor::zeros(n, 1),
        Tensor::zeros(m, 1),
        Provenance {
            model: user.model,
            seed: user.seed,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::RngStream;

    fn sample() -> EmbeddingSet {
        let mut rng = RngStream::new(4);
        EmbeddingSet::new(
            Tensor::uniform(5, 3, -1.0, 1.0, &mut rng),
            Tensor::uniform(4, 3, -1.0, 1.0, &mut rng),
            Tensor::uniform(5, 1, -0.1, 0.1, &mut rng),
            Tensor::uniform(4, 1, -0.1, 0.1, &mut rng),
            Provenance {
                model: "gcn-p".into(),
                seed: 4,
            },
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let emb = sample();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("emb");
        save_embeddings(&emb, &stem).unwrap();
        let back = load_embeddings(&stem).unwrap();
        for (a, b) in emb.user.values().iter().zip(back.user.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in emb.item.values().iter().zip(back.item.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.provenance, emb.provenance);
        assert!(back.user_bias.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn corrupted_row_is_named() {
        let emb = sample();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("emb");
        let (user_path, _) = save_embeddings(&emb, &stem).unwrap();
        let mut text = std::fs::read_to_string(&user_path).unwrap();
        // chop a value off the third data row
        let lines: Vec<&str> = text.lines().collect();
        let mut broken: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        let row = broken[3].rsplit_once('\t').unwrap().0.to_string();
        broken[3] = row;
        text = broken.join("\n");
        std::fs::write(&user_path, text).unwrap();
        match load_embeddings(&stem) {
            Err(Error::Format(msg)) => assert!(msg.contains(":4:"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let emb = sample();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("emb");
        let (user_path, item_path) = save_embeddings(&emb, &stem).unwrap();
        // swap the two files: sides no longer match
        let u = std::fs::read_to_string(&user_path).unwrap();
        let i = std::fs::read_to_string(&item_path).unwrap();
        std::fs::write(&user_path, i).unwrap();
        std::fs::write(&item_path, u).unwrap();
        assert!(matches!(load_embeddings(&stem), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_embeddings_are_rejected() {
        let res = EmbeddingSet::new(
            Tensor::from_vec(1, 2, vec![1.0, f64::NAN]),
            Tensor::zeros(1, 2),
            Tensor::zeros(1, 1),
            Tensor::zeros(1, 1),
            Provenance { model: "gmf".into(), seed: 0 },
        );
        assert!(res.is_err());
    }
}
