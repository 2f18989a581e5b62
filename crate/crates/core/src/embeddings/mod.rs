//! Pre-trained word vectors and vocabulary clustering.

mod kmeans;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, ErrorKind, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub use kmeans::{kmeans, squared_distance, within_cluster_sse, KMeans};

/// Default number of word clusters for word-pair features.
pub const DEFAULT_CLUSTERS: usize = 1000;

/// Word vectors in the word2vec binary layout.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vocab: HashMap<String, usize>,
    vectors: Vec<f32>,
    oov_vector: Vec<f32>,
}

impl EmbeddingTable {
    /// Build from (word, vector) pairs. Duplicate words keep the first vector.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        if dim == 0 {
            return Err(Error::EmbeddingHeader("dimension must be positive".into()));
        }
        let mut table = EmbeddingTable {
            dim,
            words: Vec::new(),
            vocab: HashMap::new(),
            vectors: Vec::new(),
            oov_vector: vec![0.0; dim],
        };
        for (word, vector) in entries {
            if vector.len() != dim {
                return Err(Error::Dimension(format!(
                    "vector for {word:?} has length {}, expected {dim}",
                    vector.len()
                )));
            }
            table.push(word, &vector);
        }
        Ok(table)
    }

    fn push(&mut self, word: String, vector: &[f32]) {
        if self.vocab.contains_key(&word) {
            return;
        }
        self.vocab.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.vectors.extend_from_slice(vector);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.vocab.get(word).copied()
    }

    pub fn vector(&self, index: usize) -> &[f32] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn oov_vector(&self) -> &[f32] {
        &self.oov_vector
    }

    /// Replace the vector returned for unknown words.
    pub fn set_oov_vector(&mut self, v: Vec<f32>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!(
                "oov vector length {} != {}",
                v.len(),
                self.dim
            )));
        }
        self.oov_vector = v;
        Ok(())
    }

    /// Exact match, then lowercase match.
    pub fn resolve(&self, word: &str) -> Option<usize> {
        self.index_of(word).or_else(|| {
            let lower = word.to_lowercase();
            if lower != word {
                self.index_of(&lower)
            } else {
                None
            }
        })
    }

    /// Exact match, then lowercase match, then the OOV vector (zeros unless
    /// replaced).
    pub fn lookup(&self, word: &str) -> &[f32] {
        match self.resolve(word) {
            Some(i) => self.vector(i),
            None => &self.oov_vector,
        }
    }

    /// Decode the binary format: an ASCII header `"<vocab_size> <dim>\n"`,
    /// then per entry the word bytes, a space and `dim` little-endian f32s.
    /// A newline after an entry is tolerated.
    pub fn load_binary<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::EmbeddingHeader(format!(
                "expected two fields, got {:?}",
                header.trim_end()
            )));
        }
        let parse = |s: &str| -> Result<usize> {
            match s.parse::<i64>() {
                Ok(v) if v > 0 => Ok(v as usize),
                _ => Err(Error::EmbeddingHeader(format!("non-positive or invalid value {s:?}"))),
            }
        };
        let count = parse(parts[0])?;
        let dim = parse(parts[1])?;

        let mut table = EmbeddingTable {
            dim,
            words: Vec::with_capacity(count),
            vocab: HashMap::with_capacity(count),
            vectors: Vec::with_capacity(count.min(1 << 20) * dim),
            oov_vector: vec![0.0; dim],
        };
        let mut word = Vec::new();
        let mut vector = vec![0f32; dim];
        for entry in 0..count {
            word.clear();
            loop {
                let byte = match reader.read_u8() {
                    Ok(b) => b,
                    Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Err(Error::Truncated(entry)),
                    Err(e) => return Err(e.into()),
                };
                match byte {
                    b' ' => break,
                    b'\n' if word.is_empty() => continue,
                    b => word.push(b),
                }
            }
            match reader.read_f32_into::<LittleEndian>(&mut vector) {
                Ok(()) => {}
                Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Err(Error::Truncated(entry)),
                Err(e) => return Err(e.into()),
            }
            table.push(String::from_utf8_lossy(&word).into_owned(), &vector);
        }
        Ok(table)
    }

    /// Encode in the canonical binary layout (no newline after entries).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.words.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            w.write_all(word.as_bytes())?;
            w.write_all(b" ")?;
            for &x in self.vector(i) {
                w.write_f32::<LittleEndian>(x)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Word → cluster identity. Unknown words map to the reserved id `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    k: usize,
    dim: usize,
    /// k × dim; empty when the model was read back from its text file.
    centroids: Vec<Vec<f64>>,
    assignment: BTreeMap<String, usize>,
}

impl ClusterModel {
    /// Cluster the given words (those the table can resolve) with k-means.
    pub fn fit<'a, I>(table: &EmbeddingTable, words: I, k: usize, seed: u64, max_iters: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let words: BTreeSet<&str> = words.into_iter().filter(|w| table.resolve(w).is_some()).collect();
        let points: Vec<Vec<f64>> = words
            .iter()
            .map(|w| table.lookup(w).iter().map(|&x| x as f64).collect())
            .collect();
        let result = kmeans(&points, k, seed, max_iters)?;
        let assignment = words
            .iter()
            .zip(&result.labels)
            .map(|(w, &c)| (w.to_string(), c))
            .collect();
        Ok(ClusterModel {
            k,
            dim: table.dim(),
            centroids: result.centroids,
            assignment,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    /// Within-cluster sum of squared distances of the clustered words.
    /// Zero for a model read back from its text file (no centroids).
    pub fn sse(&self, table: &EmbeddingTable) -> f64 {
        if self.centroids.is_empty() {
            return 0.0;
        }
        self.assignment
            .iter()
            .map(|(w, &c)| {
                let v: Vec<f64> = table.lookup(w).iter().map(|&x| x as f64).collect();
                squared_distance(&v, &self.centroids[c])
            })
            .sum()
    }

    pub fn cluster_of(&self, word: &str) -> usize {
        self.assignment.get(word).copied().unwrap_or(self.k)
    }

    /// Text layout: `"k dim"` header, then `word<TAB>cluster_id` lines.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.k, self.dim)?;
        for (word, id) in &self.assignment {
            writeln!(w, "{word}\t{id}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::ClusterFile("missing header".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::ClusterFile(format!("bad header {header:?}: {e}")))?;
        let [k, dim] = nums[..] else {
            return Err(Error::ClusterFile(format!("bad header {header:?}")));
        };
        if k == 0 {
            return Err(Error::ClusterCount("k must be positive".into()));
        }
        let mut assignment = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (word, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::ClusterFile(format!("line {}: missing tab", i + 2)))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::ClusterFile(format!("line {}: bad cluster id {id:?}", i + 2)))?;
            if id >= k {
                return Err(Error::ClusterFile(format!("line {}: cluster id {id} >= k", i + 2)));
            }
            assignment.insert(word.to_string(), id);
        }
        Ok(ClusterModel {
            k,
            dim,
            centroids: Vec::new(),
            assignment,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EmbeddingTable {
        EmbeddingTable::from_entries(
            3,
            vec![
                ("a".to_string(), vec![1.0, 0.0, 0.0]),
                ("b".to_string(), vec![0.0, 1.0, 0.0]),
            ],
        )
        .unwrap()
    }

    fn encode(header: &str, entries: &[(&str, [f32; 3])], newline: bool) -> Vec<u8> {
        let mut bytes = header.as_bytes().to_vec();
        for (w, v) in entries {
            bytes.extend_from_slice(w.as_bytes());
            bytes.push(b' ');
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            if newline {
                bytes.push(b'\n');
            }
        }
        bytes
    }

    #[test]
    fn decodes_two_entries() {
        let bytes = encode("2 3\n", &[("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0])], false);
        let t = EmbeddingTable::load_binary(&bytes[..]).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("b"), &[0.0, 1.0, 0.0]);
        assert_eq!(t, tiny());
    }

    #[test]
    fn tolerates_entry_newlines() {
        let bytes = encode("2 3\n", &[("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0])], true);
        assert_eq!(EmbeddingTable::load_binary(&bytes[..]).unwrap(), tiny());
    }

    #[test]
    fn write_is_byte_identical() {
        let bytes = encode("2 3\n", &[("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0])], false);
        let t = EmbeddingTable::load_binary(&bytes[..]).unwrap();
        let mut out = Vec::new();
        t.write_binary(&mut out).unwrap();
        assert_eq!(out, bytes);
    }

    #[test]
    fn truncated_stream_names_entry() {
        let bytes = encode("3 3\n", &[("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0])], false);
        let err = EmbeddingTable::load_binary(&bytes[..]).unwrap_err();
        assert_eq!(err.to_string(), "truncated at entry 2");
        // cut inside the floats of entry 1
        let err = EmbeddingTable::load_binary(&bytes[..bytes.len() - 2]).unwrap_err();
        assert!(matches!(err, Error::Truncated(1)));
    }

    #[test]
    fn rejects_non_positive_header() {
        for h in ["0 3\n", "2 0\n", "-1 3\n", "2\n", "x y\n"] {
            assert!(matches!(
                EmbeddingTable::load_binary(h.as_bytes()),
                Err(Error::EmbeddingHeader(_))
            ));
        }
    }

    #[test]
    fn duplicate_words_keep_first() {
        let bytes = encode("2 3\n", &[("a", [1.0, 0.0, 0.0]), ("a", [0.0, 1.0, 0.0])], false);
        let t = EmbeddingTable::load_binary(&bytes[..]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.lookup("a"), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn lookup_policy() {
        let t = EmbeddingTable::from_entries(2, vec![("the".to_string(), vec![0.5, -0.5])]).unwrap();
        assert_eq!(t.lookup("the"), &[0.5, -0.5]);
        assert_eq!(t.lookup("The"), &[0.5, -0.5]);
        assert_eq!(t.lookup("zebra"), &[0.0, 0.0]);
    }

    #[test]
    fn cluster_model_round_trip_and_oov_bucket() {
        let t = EmbeddingTable::from_entries(
            2,
            vec![
                ("dog".to_string(), vec![0.0, 0.0]),
                ("cat".to_string(), vec![0.0, 1.0]),
                ("car".to_string(), vec![10.0, 10.0]),
                ("bus".to_string(), vec![10.0, 11.0]),
            ],
        )
        .unwrap();
        let m = ClusterModel::fit(&t, ["dog", "cat", "car", "bus", "unseen"], 2, 7, 50).unwrap();
        assert_eq!(m.assignment().len(), 4);
        assert_eq!(m.cluster_of("dog"), m.cluster_of("cat"));
        assert_eq!(m.cluster_of("car"), m.cluster_of("bus"));
        assert_ne!(m.cluster_of("dog"), m.cluster_of("car"));
        assert_eq!(m.cluster_of("unseen"), 2);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert!(buf.starts_with(b"2 2\n"));
        let back = ClusterModel::load(&buf[..]).unwrap();
        assert_eq!(back.assignment(), m.assignment());
        assert_eq!(back.cluster_of("bus"), m.cluster_of("bus"));
        let mut again = Vec::new();
        back.save(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn cluster_ids_agree_with_nearest_centroid() {
        let entries: Vec<(String, Vec<f32>)> = (0..30)
            .map(|i| {
                let x = (i % 3) as f32 * 5.0 + (i as f32 * 0.37).sin() * 0.3;
                let y = (i as f32 * 1.3).cos() * 0.3;
                (format!("w{i}"), vec![x, y])
            })
            .collect();
        let t = EmbeddingTable::from_entries(2, entries).unwrap();
        let words: Vec<String> = t.words().to_vec();
        let m = ClusterModel::fit(&t, words.iter().map(String::as_str), 3, 1, 100).unwrap();
        for w in &words {
            let v: Vec<f64> = t.lookup(w).iter().map(|&x| x as f64).collect();
            let nearest = (0..3)
                .min_by(|&a, &b| {
                    squared_distance(&v, &m.centroids()[a])
                        .partial_cmp(&squared_distance(&v, &m.centroids()[b]))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(m.cluster_of(w), nearest);
        }
    }
}
