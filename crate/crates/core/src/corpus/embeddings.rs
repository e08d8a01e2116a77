use std::io::BufRead;
use std::path::Path;

use rand::Rng;

use super::{CorpusError, Vocab};
use crate::engine::{glorot_uniform, Tensor};

/// Word-embedding matrix with one row per vocabulary id (OOV last).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub table: Tensor,
    /// Number of vocabulary words whose row came from the file.
    pub coverage: usize,
}

/// Reads whitespace-separated `token v1 .. v_dim` lines. Vocabulary words
/// found in the file get its vector; every other row stays Glorot-initialised.
pub fn load_embeddings<R: Rng + ?Sized>(
    path: &Path,
    vocab: &Vocab,
    dim: usize,
    rng: &mut R,
) -> Result<EmbeddingTable, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_embeddings(std::io::BufReader::new(file), vocab, dim, rng).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn parse_embeddings<B: BufRead, R: Rng + ?Sized>(
    reader: B,
    vocab: &Vocab,
    dim: usize,
    rng: &mut R,
) -> Result<EmbeddingTable, CorpusError> {
    let mut table = glorot_uniform(vocab.size(), dim, rng);
    let mut filled = vec![false; vocab.size()];
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: Default::default(),
            source,
        })?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            return Err(CorpusError::Embedding {
                line: line_no,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        let Some(row) = vocab.get(token) else { continue };
        if filled[row] {
            continue;
        }
        let dst = &mut table.data_mut()[row * dim..(row + 1) * dim];
        for (d, v) in dst.iter_mut().zip(&values) {
            *d = v.parse().map_err(|_| CorpusError::Embedding {
                line: line_no,
                message: format!("`{v}` is not a number"),
            })?;
        }
        filled[row] = true;
    }
    let coverage = filled.iter().filter(|&&f| f).count();
    Ok(EmbeddingTable { table, coverage })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn vocab() -> Vocab {
        Vocab::from_items(vec!["cat".into(), "dog".into()])
    }

    #[test]
    fn copies_known_rows() {
        let text = "dog 0.5 -1 2\nunrelated 1 1 1\n";
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = parse_embeddings(text.as_bytes(), &vocab(), 3, &mut rng).unwrap();
        assert_eq!(e.coverage, 1);
        assert_eq!(e.table.row_slice(1), &[0.5, -1.0, 2.0]);
        assert_eq!(e.table.rows(), 3);
    }

    #[test]
    fn empty_file_initialises_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = parse_embeddings("".as_bytes(), &vocab(), 4, &mut rng).unwrap();
        assert_eq!(e.coverage, 0);
        assert!(e.table.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn short_line_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = parse_embeddings("cat 1 2 3\ndog 1 2\n".as_bytes(), &vocab(), 3, &mut rng).unwrap_err();
        assert!(matches!(err, CorpusError::Embedding { line: 2, .. }));
    }
}
