//! Agreement and accuracy metrics between prediction matrices.
//!
//! A prediction matrix holds one trained learner's simplex-valued outputs
//! over a shared test set. The metrics here compare two such matrices (and
//! optionally the true labels): plain consistency, accuracy, correct
//! consistency, their top-k relaxations, row-similarity scores, per-input
//! correctness transitions, and the three-generation averaging protocol.
//!
//! Argmax ties break to the lowest index everywhere, and top-k sets order by
//! (value descending, index ascending), so every metric is deterministic.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::simplex::SimplexVector;

/// Predictions of one trained learner: `n >= 1` simplex rows of dimension `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    rows: Vec<SimplexVector>,
}

impl PredictionMatrix {
    pub fn new(rows: Vec<SimplexVector>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_argument("prediction matrix needs at least one row"));
        }
        let p = rows[0].dim();
        if rows.iter().any(|r| r.dim() != p) {
            return Err(Error::invalid_argument("prediction rows differ in dimension"));
        }
        Ok(PredictionMatrix { rows })
    }

    /// Builds a matrix from raw row values, validating each row.
    pub fn from_raw(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(SimplexVector::new)
            .collect::<Result<Vec<_>>>()?;
        PredictionMatrix::new(rows)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn row(&self, t: usize) -> &SimplexVector {
        &self.rows[t]
    }

    pub fn rows(&self) -> &[SimplexVector] {
        &self.rows
    }

    /// Writes the `n p` header line followed by one space-separated row per
    /// line, each float with 17 significant digits.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n(), self.p())?;
        for row in &self.rows {
            let line: Vec<String> = row.values().iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty prediction matrix file"))?;
        let header = header?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, "expected header `n p`"))?;
        let p: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, "expected header `n p`"))?;
        if parts.next().is_some() {
            return Err(Error::parse(1, "trailing tokens after `n p` header"));
        }
        let mut rows = Vec::with_capacity(n);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::parse(idx + 1, format!("bad float `{tok}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != p {
                return Err(Error::parse(
                    idx + 1,
                    format!("expected {p} values, found {}", values.len()),
                ));
            }
            rows.push(SimplexVector::new(values).map_err(|e| Error::parse(idx + 1, e.to_string()))?);
        }
        if rows.len() != n {
            return Err(Error::parse(0, format!("header declared {n} rows, found {}", rows.len())));
        }
        PredictionMatrix::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(file))
    }
}

/// True class indices aligned with a prediction matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<usize>);

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid_argument("label vector must be non-empty"));
        }
        Ok(LabelVector(labels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    /// Writes one label per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for label in &self.0 {
            writeln!(w, "{label}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut labels = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let tok = line.trim();
            if tok.is_empty() {
                continue;
            }
            labels.push(
                tok.parse::<usize>()
                    .map_err(|_| Error::parse(idx + 1, format!("bad label `{tok}`")))?,
            );
        }
        LabelVector::new(labels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(file))
    }
}

fn check_shapes(a: &PredictionMatrix, b: &PredictionMatrix) -> Result<()> {
    if a.n() != b.n() || a.p() != b.p() {
        return Err(Error::invalid_argument(format!(
            "shape mismatch: {}x{} vs {}x{}",
            a.n(),
            a.p(),
            b.n(),
            b.p()
        )));
    }
    Ok(())
}

fn check_labels(a: &PredictionMatrix, r: &LabelVector) -> Result<()> {
    if a.n() != r.len() {
        return Err(Error::invalid_argument(format!(
            "{} prediction rows but {} labels",
            a.n(),
            r.len()
        )));
    }
    if let Some(&bad) = r.labels().iter().find(|&&l| l >= a.p()) {
        return Err(Error::invalid_argument(format!(
            "label {bad} out of range for {} classes",
            a.p()
        )));
    }
    Ok(())
}

/// Indices of the `k` largest values, ordered by (value desc, index asc).
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order.truncate(k);
    order
}

/// Fraction of rows on which the two learners pick the same class.
pub fn consistency(a: &PredictionMatrix, b: &PredictionMatrix) -> Result<f64> {
    check_shapes(a, b)?;
    let hits = a
        .rows()
        .iter()
        .zip(b.rows())
        .filter(|(x, y)| x.argmax() == y.argmax())
        .count();
    Ok(hits as f64 / a.n() as f64)
}

/// Fraction of rows whose predicted class equals the true label.
pub fn accuracy(a: &PredictionMatrix, r: &LabelVector) -> Result<f64> {
    check_labels(a, r)?;
    let hits = a
        .rows()
        .iter()
        .zip(r.labels())
        .filter(|(row, &label)| row.argmax() == label)
        .count();
    Ok(hits as f64 / a.n() as f64)
}

/// Fraction of rows on which both learners predict the true label.
pub fn correct_consistency(a: &PredictionMatrix, b: &PredictionMatrix, r: &LabelVector) -> Result<f64> {
    check_shapes(a, b)?;
    check_labels(a, r)?;
    let hits = a
        .rows()
        .iter()
        .zip(b.rows())
        .zip(r.labels())
        .filter(|((x, y), &label)| x.argmax() == label && y.argmax() == label)
        .count();
    Ok(hits as f64 / a.n() as f64)
}

/// Fraction of rows whose top-k index sets intersect.
pub fn coarse_consistency(a: &PredictionMatrix, b: &PredictionMatrix, k: usize) -> Result<f64> {
    check_shapes(a, b)?;
    if k < 1 || k > a.p() {
        return Err(Error::invalid_argument(format!(
            "k = {k} out of range [1, {}]",
            a.p()
        )));
    }
    let hits = a
        .rows()
        .iter()
        .zip(b.rows())
        .filter(|(x, y)| {
            let ta = top_k_indices(x.values(), k);
            let tb = top_k_indices(y.values(), k);
            ta.iter().any(|i| tb.contains(i))
        })
        .count();
    Ok(hits as f64 / a.n() as f64)
}

/// Fraction of rows whose true label appears in the top-k index set.
pub fn coarse_accuracy(a: &PredictionMatrix, r: &LabelVector, k: usize) -> Result<f64> {
    check_labels(a, r)?;
    if k < 1 || k > a.p() {
        return Err(Error::invalid_argument(format!(
            "k = {k} out of range [1, {}]",
            a.p()
        )));
    }
    let hits = a
        .rows()
        .iter()
        .zip(r.labels())
        .filter(|(row, &label)| top_k_indices(row.values(), k).contains(&label))
        .count();
    Ok(hits as f64 / a.n() as f64)
}

fn row_pearson(x: &[f64], y: &[f64]) -> f64 {
    let p = x.len() as f64;
    let mx = x.iter().sum::<f64>() / p;
    let my = y.iter().sum::<f64>() / p;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        // A constant row carries no ranking information: count the pair as
        // fully correlated only when the rows are identical.
        return if x == y { 1.0 } else { 0.0 };
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Mean over rows of the Pearson correlation between paired rows.
pub fn pearson_similarity(a: &PredictionMatrix, b: &PredictionMatrix) -> Result<f64> {
    check_shapes(a, b)?;
    let total: f64 = a
        .rows()
        .iter()
        .zip(b.rows())
        .map(|(x, y)| row_pearson(x.values(), y.values()))
        .sum();
    Ok(total / a.n() as f64)
}

/// Mean over rows of the cosine of the angle between paired rows.
pub fn cosine_similarity(a: &PredictionMatrix, b: &PredictionMatrix) -> Result<f64> {
    check_shapes(a, b)?;
    let total: f64 = a
        .rows()
        .iter()
        .zip(b.rows())
        .map(|(x, y)| {
            let dot: f64 = x.values().iter().zip(y.values()).map(|(&u, &v)| u * v).sum();
            let nx: f64 = x.values().iter().map(|&u| u * u).sum::<f64>().sqrt();
            let ny: f64 = y.values().iter().map(|&v| v * v).sum::<f64>().sqrt();
            dot / (nx * ny)
        })
        .sum();
    Ok(total / a.n() as f64)
}

/// Per-input correctness transitions from learner `a` to learner `b`.
///
/// The four buckets partition the test set; `com = cto_c + ito_c - cto_i`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransitionStats {
    pub cto_c: f64,
    pub cto_i: f64,
    pub ito_c: f64,
    pub ito_i: f64,
    pub com: f64,
}

pub fn transition_stats(a: &PredictionMatrix, b: &PredictionMatrix, r: &LabelVector) -> Result<TransitionStats> {
    check_shapes(a, b)?;
    check_labels(a, r)?;
    let mut counts = [0usize; 4];
    for ((x, y), &label) in a.rows().iter().zip(b.rows()).zip(r.labels()) {
        let a_correct = x.argmax() == label;
        let b_correct = y.argmax() == label;
        let bucket = match (a_correct, b_correct) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[bucket] += 1;
    }
    let n = a.n() as f64;
    let cto_c = counts[0] as f64 / n;
    let cto_i = counts[1] as f64 / n;
    let ito_c = counts[2] as f64 / n;
    let ito_i = counts[3] as f64 / n;
    Ok(TransitionStats { cto_c, cto_i, ito_c, ito_i, com: cto_c + ito_c - cto_i })
}

/// Every pairwise metric between two learners on a shared test set.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PairReport {
    pub con: f64,
    pub acc_a: f64,
    pub acc_b: f64,
    pub acc_con: f64,
    pub ccon_k: BTreeMap<usize, f64>,
    pub cacc_k_a: BTreeMap<usize, f64>,
    pub cacc_k_b: BTreeMap<usize, f64>,
    pub pearson: f64,
    pub cosine: f64,
    pub transitions: TransitionStats,
}

impl PairReport {
    /// Flattens to snake_case keys, suitable for the flat JSON report format.
    pub fn to_flat_map(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        map.insert("con".to_string(), self.con);
        map.insert("acc_a".to_string(), self.acc_a);
        map.insert("acc_b".to_string(), self.acc_b);
        map.insert("acc_con".to_string(), self.acc_con);
        for (&k, &v) in &self.ccon_k {
            map.insert(format!("ccon_{k}"), v);
        }
        for (&k, &v) in &self.cacc_k_a {
            map.insert(format!("cacc_{k}_a"), v);
        }
        for (&k, &v) in &self.cacc_k_b {
            map.insert(format!("cacc_{k}_b"), v);
        }
        map.insert("pearson".to_string(), self.pearson);
        map.insert("cosine".to_string(), self.cosine);
        map.insert("cto_c".to_string(), self.transitions.cto_c);
        map.insert("cto_i".to_string(), self.transitions.cto_i);
        map.insert("ito_c".to_string(), self.transitions.ito_c);
        map.insert("ito_i".to_string(), self.transitions.ito_i);
        map.insert("com".to_string(), self.transitions.com);
        map
    }
}

/// Computes the full [`PairReport`] for learners `a` and `b`.
pub fn pair_report(
    a: &PredictionMatrix,
    b: &PredictionMatrix,
    r: &LabelVector,
    ks: &[usize],
) -> Result<PairReport> {
    let mut ccon_k = BTreeMap::new();
    let mut cacc_k_a = BTreeMap::new();
    let mut cacc_k_b = BTreeMap::new();
    for &k in ks {
        ccon_k.insert(k, coarse_consistency(a, b, k)?);
        cacc_k_a.insert(k, coarse_accuracy(a, r, k)?);
        cacc_k_b.insert(k, coarse_accuracy(b, r, k)?);
    }
    Ok(PairReport {
        con: consistency(a, b)?,
        acc_a: accuracy(a, r)?,
        acc_b: accuracy(b, r)?,
        acc_con: correct_consistency(a, b, r)?,
        ccon_k,
        cacc_k_a,
        cacc_k_b,
        pearson: pearson_similarity(a, b)?,
        cosine: cosine_similarity(a, b)?,
        transitions: transition_stats(a, b, r)?,
    })
}

/// Metrics for three successive generations, reduced by the averaging
/// protocol: accuracy-like metrics average over the three learners, pairwise
/// metrics average over the three unordered pairs, and transitions are kept
/// per ordered generation pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AveragedReport {
    pub acc: f64,
    pub con: f64,
    pub acc_con: f64,
    pub ccon_k: BTreeMap<usize, f64>,
    pub cacc_k: BTreeMap<usize, f64>,
    pub pearson: f64,
    pub cosine: f64,
    /// Transitions for generation pairs (1,2), (2,3), (1,3) in that order.
    pub transitions: [TransitionStats; 3],
}

/// Ordered generation pairs reported by [`pairwise_average_report`].
pub const TRANSITION_PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];

pub fn pairwise_average_report(
    matrices: &[PredictionMatrix],
    r: &LabelVector,
    ks: &[usize],
) -> Result<AveragedReport> {
    if matrices.len() != 3 {
        return Err(Error::invalid_argument(format!(
            "pairwise averaging needs exactly 3 prediction matrices, got {}",
            matrices.len()
        )));
    }
    let acc = (accuracy(&matrices[0], r)? + accuracy(&matrices[1], r)? + accuracy(&matrices[2], r)?) / 3.0;

    let mut con = 0.0;
    let mut acc_con = 0.0;
    let mut pearson = 0.0;
    let mut cosine = 0.0;
    let mut ccon_k: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    for &(i, j) in &TRANSITION_PAIRS {
        con += consistency(&matrices[i], &matrices[j])?;
        acc_con += correct_consistency(&matrices[i], &matrices[j], r)?;
        pearson += pearson_similarity(&matrices[i], &matrices[j])?;
        cosine += cosine_similarity(&matrices[i], &matrices[j])?;
        for &k in ks {
            *ccon_k.get_mut(&k).unwrap() += coarse_consistency(&matrices[i], &matrices[j], k)?;
        }
    }
    con /= 3.0;
    acc_con /= 3.0;
    pearson /= 3.0;
    cosine /= 3.0;
    for v in ccon_k.values_mut() {
        *v /= 3.0;
    }

    let mut cacc_k: BTreeMap<usize, f64> = BTreeMap::new();
    for &k in ks {
        let total = coarse_accuracy(&matrices[0], r, k)?
            + coarse_accuracy(&matrices[1], r, k)?
            + coarse_accuracy(&matrices[2], r, k)?;
        cacc_k.insert(k, total / 3.0);
    }

    let transitions = [
        transition_stats(&matrices[0], &matrices[1], r)?,
        transition_stats(&matrices[1], &matrices[2], r)?,
        transition_stats(&matrices[0], &matrices[2], r)?,
    ];

    Ok(AveragedReport { acc, con, acc_con, ccon_k, cacc_k, pearson, cosine, transitions })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// n=4, p=2 fixture: argmax sequences A=[0,0,1,1], B=[0,1,1,0],
    /// truth [0,0,1,0].
    pub(crate) fn fixture() -> (PredictionMatrix, PredictionMatrix, LabelVector) {
        let a = PredictionMatrix::from_raw(vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.3, 0.7],
            vec![0.4, 0.6],
        ])
        .unwrap();
        let b = PredictionMatrix::from_raw(vec![
            vec![0.7, 0.3],
            vec![0.2, 0.8],
            vec![0.1, 0.9],
            vec![0.6, 0.4],
        ])
        .unwrap();
        let r = LabelVector::new(vec![0, 0, 1, 0]).unwrap();
        (a, b, r)
    }

    #[test]
    fn consistency_fixture() {
        let (a, b, _) = fixture();
        assert_eq!(consistency(&a, &b).unwrap(), 0.5);
        assert_eq!(consistency(&a, &a).unwrap(), 1.0);

        let flipped = PredictionMatrix::from_raw(vec![
            vec![0.1, 0.9],
            vec![0.2, 0.8],
            vec![0.7, 0.3],
            vec![0.6, 0.4],
        ])
        .unwrap();
        assert_eq!(consistency(&a, &flipped).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_fixture() {
        let (a, b, r) = fixture();
        assert_eq!(accuracy(&a, &r).unwrap(), 0.75);
        assert_eq!(accuracy(&b, &r).unwrap(), 0.75);

        let perfect = PredictionMatrix::from_raw(vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(accuracy(&perfect, &r).unwrap(), 1.0);
    }

    #[test]
    fn correct_consistency_fixture() {
        let (a, b, r) = fixture();
        assert_eq!(correct_consistency(&a, &b, &r).unwrap(), 0.5);
        let perfect = PredictionMatrix::from_raw(vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(correct_consistency(&perfect, &perfect, &r).unwrap(), 1.0);
        let wrong = PredictionMatrix::from_raw(vec![
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(correct_consistency(&perfect, &wrong, &r).unwrap(), 0.0);
    }

    #[test]
    fn coarse_consistency_cases() {
        let (a, b, _) = fixture();
        assert_eq!(coarse_consistency(&a, &b, 1).unwrap(), consistency(&a, &b).unwrap());
        assert_eq!(coarse_consistency(&a, &b, 2).unwrap(), 1.0);

        let x = PredictionMatrix::from_raw(vec![vec![0.5, 0.3, 0.2]]).unwrap();
        let y = PredictionMatrix::from_raw(vec![vec![0.1, 0.6, 0.3]]).unwrap();
        assert_eq!(coarse_consistency(&x, &y, 2).unwrap(), 1.0);
        assert!(coarse_consistency(&x, &y, 4).is_err());
        assert!(coarse_consistency(&x, &y, 0).is_err());
    }

    #[test]
    fn coarse_accuracy_cases() {
        let (a, _, r) = fixture();
        assert_eq!(coarse_accuracy(&a, &r, 1).unwrap(), accuracy(&a, &r).unwrap());
        assert_eq!(coarse_accuracy(&a, &r, 2).unwrap(), 1.0);

        let x = PredictionMatrix::from_raw(vec![vec![0.2, 0.5, 0.3]]).unwrap();
        let r1 = LabelVector::new(vec![2]).unwrap();
        assert_eq!(coarse_accuracy(&x, &r1, 2).unwrap(), 1.0);
    }

    #[test]
    fn pearson_cases() {
        let (a, _, _) = fixture();
        assert!((pearson_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);

        let x = PredictionMatrix::from_raw(vec![vec![0.7, 0.3]]).unwrap();
        let y = PredictionMatrix::from_raw(vec![vec![0.6, 0.4]]).unwrap();
        assert!((pearson_similarity(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let z = PredictionMatrix::from_raw(vec![vec![0.3, 0.7]]).unwrap();
        assert!((pearson_similarity(&x, &z).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_constant_row_rule() {
        let u = PredictionMatrix::from_raw(vec![vec![0.5, 0.5]]).unwrap();
        let x = PredictionMatrix::from_raw(vec![vec![0.7, 0.3]]).unwrap();
        assert_eq!(pearson_similarity(&u, &u).unwrap(), 1.0);
        assert_eq!(pearson_similarity(&u, &x).unwrap(), 0.0);
        assert_eq!(pearson_similarity(&x, &u).unwrap(), 0.0);
    }

    #[test]
    fn cosine_cases() {
        let (a, _, _) = fixture();
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);

        let x = PredictionMatrix::from_raw(vec![vec![1.0, 0.0]]).unwrap();
        let y = PredictionMatrix::from_raw(vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(cosine_similarity(&x, &y).unwrap(), 0.0);
        let half = PredictionMatrix::from_raw(vec![vec![0.5, 0.5]]).unwrap();
        assert!((cosine_similarity(&x, &half).unwrap() - 0.5_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn transition_fixture() {
        let (a, b, r) = fixture();
        let t = transition_stats(&a, &b, &r).unwrap();
        assert_eq!(t.cto_c, 0.5);
        assert_eq!(t.cto_i, 0.25);
        assert_eq!(t.ito_c, 0.25);
        assert_eq!(t.ito_i, 0.0);
        assert_eq!(t.com, 0.5);

        let self_t = transition_stats(&a, &a, &r).unwrap();
        assert_eq!(self_t.cto_i, 0.0);
        assert_eq!(self_t.ito_c, 0.0);
        assert_eq!(self_t.com, accuracy(&a, &r).unwrap());
    }

    #[test]
    fn transition_all_correct() {
        let r = LabelVector::new(vec![0, 1]).unwrap();
        let m = PredictionMatrix::from_raw(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let t = transition_stats(&m, &m, &r).unwrap();
        assert_eq!(t.com, 1.0);
    }

    #[test]
    fn transition_identities() {
        let (a, b, r) = fixture();
        let t = transition_stats(&a, &b, &r).unwrap();
        assert!((t.cto_c + t.cto_i + t.ito_c + t.ito_i - 1.0).abs() < 1e-12);
        assert!((t.cto_c + t.cto_i - accuracy(&a, &r).unwrap()).abs() < 1e-12);
        assert!((t.cto_c + t.ito_c - accuracy(&b, &r).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn averaged_report_cases() {
        let (a, b, r) = fixture();
        let perfect = PredictionMatrix::from_raw(vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ])
        .unwrap();

        let rep = pairwise_average_report(
            &[perfect.clone(), perfect.clone(), perfect.clone()],
            &r,
            &[1],
        )
        .unwrap();
        assert_eq!(rep.acc, 1.0);
        assert_eq!(rep.con, 1.0);
        assert_eq!(rep.acc_con, 1.0);

        let rep = pairwise_average_report(&[a.clone(), a.clone(), a.clone()], &r, &[1]).unwrap();
        assert_eq!(rep.con, 1.0);
        assert_eq!(rep.acc, 0.75);
        assert_eq!(rep.acc_con, 0.75);

        let rep = pairwise_average_report(&[a.clone(), a.clone(), b.clone()], &r, &[1]).unwrap();
        assert!((rep.con - 2.0 / 3.0).abs() < 1e-12);

        assert!(pairwise_average_report(&[a.clone(), b.clone()], &r, &[1]).is_err());
    }

    #[test]
    fn matrix_file_round_trip() {
        let (a, _, _) = fixture();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let back = PredictionMatrix::read_from(buf.as_slice()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn matrix_file_errors() {
        assert!(PredictionMatrix::read_from(&b""[..]).is_err());
        assert!(PredictionMatrix::read_from(&b"2 2\n0.5 0.5\n"[..]).is_err());
        let err = PredictionMatrix::read_from(&b"1 2\n0.5 bad\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn label_file_round_trip() {
        let labels = LabelVector::new(vec![0, 3, 1, 2]).unwrap();
        let mut buf = Vec::new();
        labels.write_to(&mut buf).unwrap();
        assert_eq!(LabelVector::read_from(buf.as_slice()).unwrap(), labels);
        assert!(LabelVector::read_from(&b"1\nx\n"[..]).is_err());
    }

    #[test]
    fn flat_map_keys() {
        let (a, b, r) = fixture();
        let rep = pair_report(&a, &b, &r, &[1, 2]).unwrap();
        let flat = rep.to_flat_map();
        assert_eq!(flat["con"], 0.5);
        assert_eq!(flat["ccon_1"], rep.con);
        assert_eq!(flat["cacc_1_a"], rep.acc_a);
        assert!(flat.contains_key("com"));
    }
}
