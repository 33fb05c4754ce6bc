//! Dataset generation and ingestion: synthetic Gaussian classification
//! tasks, nested class-imbalanced training streams, stratified resampling,
//! and the CSV formats they travel in.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

/// A feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid_argument("dataset must have at least one row"));
        }
        if features.len() != labels.len() {
            return Err(Error::invalid_argument("features and labels differ in length"));
        }
        let dim = features[0].len();
        if dim == 0 || features.iter().any(|f| f.len() != dim) {
            return Err(Error::invalid_argument("feature rows must share a positive dimension"));
        }
        if labels.iter().any(|&l| l >= class_count) {
            return Err(Error::invalid_argument("label out of range"));
        }
        Ok(LabeledDataset { features, labels, class_count })
    }

    /// A zero-row dataset. Only streams with no held-back evaluation rows
    /// produce these; the ordinary constructor rejects empty data.
    pub fn empty(class_count: usize) -> Self {
        LabeledDataset { features: Vec::new(), labels: Vec::new(), class_count }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Row count per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    fn take(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }
}

/// Gaussian clusters: one unit-variance cluster per class, class means at
/// mutual distance controlled by `separation`. Rows are class-major.
pub fn make_synthetic(
    classes: usize,
    dims: usize,
    per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes < 2 {
        return Err(Error::invalid_argument("need at least 2 classes"));
    }
    if dims == 0 || per_class == 0 {
        return Err(Error::invalid_argument("dims and per_class must be positive"));
    }
    if separation.is_nan() || separation < 0.0 {
        return Err(Error::invalid_argument("separation must be non-negative"));
    }
    let mut rng = stream(seed);
    let mut means = Vec::with_capacity(classes);
    for _ in 0..classes {
        let mut direction: Vec<f64> = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
        let norm: f64 = direction.iter().map(|&x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut direction {
                *x *= separation / norm;
            }
        }
        means.push(direction);
    }
    let mut features = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            let row: Vec<f64> = mean
                .iter()
                .map(|&m| m + rng.sample::<f64, _>(StandardNormal))
                .collect();
            features.push(row);
            labels.push(c);
        }
    }
    LabeledDataset::new(features, labels, classes)
}

/// How a nested three-stage training stream is carved out of a full dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceSpec {
    /// Per-class keep fraction in (0, 1]; the stage counts are
    /// `round(fraction * growth * class_rows)`.
    pub keep_fractions: Vec<f64>,
    /// Growth factors for stage 1 and stages 2/3.
    pub growth: (f64, f64),
    /// Class present only in the third stage, if any.
    pub held_out: Option<usize>,
    /// Rows per first-stage class reserved for each of test and validation.
    pub eval_per_class: usize,
}

impl ImbalanceSpec {
    pub fn validate(&self, class_count: usize) -> Result<()> {
        if self.keep_fractions.len() != class_count {
            return Err(Error::invalid_argument(format!(
                "{} keep fractions for {class_count} classes",
                self.keep_fractions.len()
            )));
        }
        if self.keep_fractions.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::invalid_argument("keep fractions must lie in (0, 1]"));
        }
        for g in [self.growth.0, self.growth.1] {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::invalid_argument("growth fractions must lie in (0, 1]"));
            }
        }
        if self.growth.0 > self.growth.1 {
            return Err(Error::invalid_argument("stage growth must be non-decreasing"));
        }
        if let Some(h) = self.held_out {
            if h >= class_count {
                return Err(Error::invalid_argument("held-out class out of range"));
            }
        }
        Ok(())
    }
}

/// Nested training stages with shared held-back validation and test splits.
#[derive(Debug, Clone)]
pub struct StreamDataset {
    pub d1: LabeledDataset,
    pub d2: LabeledDataset,
    pub d3: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
}

impl StreamDataset {
    pub fn stages(&self) -> [&LabeledDataset; 3] {
        [&self.d1, &self.d2, &self.d3]
    }
}

/// Deterministic half-up rounding of a non-negative fraction count.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Carves a nested imbalanced stream out of `full`.
///
/// Per class the row pool is shuffled once; evaluation rows come off the top
/// (first-stage classes only), then stage 1 takes the first
/// `round(P_c * g1 * n_c)` remaining rows and stage 2 the first
/// `round(P_c * g2 * n_c)`, so the stages nest by row identity. Stage 3
/// reuses stage 2 and adds the held-out class. Validation and test use the
/// same per-class count, giving them identical class distributions over the
/// first stage's class set.
pub fn make_stream(full: &LabeledDataset, spec: &ImbalanceSpec, seed: u64) -> Result<StreamDataset> {
    spec.validate(full.class_count())?;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); full.class_count()];
    for (i, &label) in full.labels().iter().enumerate() {
        by_class[label].push(i);
    }
    let mut rng = stream(derive_seed(seed, &[0]));
    for pool in &mut by_class {
        pool.shuffle(&mut rng);
    }

    let mut d1_rows = Vec::new();
    let mut d2_rows = Vec::new();
    let mut d3_extra = Vec::new();
    let mut test_rows = Vec::new();
    let mut valid_rows = Vec::new();

    for (c, pool) in by_class.iter().enumerate() {
        let n_c = pool.len();
        let p_c = spec.keep_fractions[c];
        let is_held_out = spec.held_out == Some(c);
        let eval_need = if is_held_out { 0 } else { 2 * spec.eval_per_class };
        let count2 = round_half_up(p_c * spec.growth.1 * n_c as f64).min(n_c);
        if count2 + eval_need > n_c {
            return Err(Error::invalid_argument(format!(
                "class {c}: {count2} training rows plus {eval_need} evaluation rows exceed pool of {n_c}"
            )));
        }
        if is_held_out {
            d3_extra.extend_from_slice(&pool[..count2]);
            continue;
        }
        test_rows.extend_from_slice(&pool[..spec.eval_per_class]);
        valid_rows.extend_from_slice(&pool[spec.eval_per_class..eval_need]);
        let train_pool = &pool[eval_need..];
        let count1 = round_half_up(p_c * spec.growth.0 * n_c as f64).min(train_pool.len());
        d1_rows.extend_from_slice(&train_pool[..count1]);
        d2_rows.extend_from_slice(&train_pool[..count2.min(train_pool.len())]);
    }

    let mut d3_rows = d2_rows.clone();
    d3_rows.extend_from_slice(&d3_extra);

    let build = |rows: &[usize]| -> LabeledDataset {
        if rows.is_empty() {
            LabeledDataset::empty(full.class_count())
        } else {
            full.take(rows)
        }
    };
    let stream_set = StreamDataset {
        d1: build(&d1_rows),
        d2: build(&d2_rows),
        d3: build(&d3_rows),
        validation: build(&valid_rows),
        test: build(&test_rows),
    };
    if stream_set.d1.is_empty() || stream_set.d2.is_empty() || stream_set.d3.is_empty() {
        return Err(Error::invalid_argument("a training stage ended up empty"));
    }
    Ok(stream_set)
}

/// Disjoint stratified split into (train, validation) with a shuffled train
/// order. Every class keeps at least one row on each side.
pub fn resample_train_valid(
    d: &LabeledDataset,
    valid_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(Error::invalid_argument("validation fraction must lie in (0, 1)"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.class_count()];
    for (i, &label) in d.labels().iter().enumerate() {
        by_class[label].push(i);
    }
    let mut rng = stream(derive_seed(seed, &[1]));
    let mut train_rows = Vec::new();
    let mut valid_rows = Vec::new();
    for (c, pool) in by_class.iter_mut().enumerate() {
        if pool.is_empty() {
            continue;
        }
        if pool.len() < 2 {
            return Err(Error::invalid_argument(format!(
                "class {c} has {} row(s), need at least 2 for a stratified split",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        let want = round_half_up(valid_fraction * pool.len() as f64).clamp(1, pool.len() - 1);
        valid_rows.extend_from_slice(&pool[..want]);
        train_rows.extend_from_slice(&pool[want..]);
    }
    train_rows.shuffle(&mut rng);
    Ok((d.take(&train_rows), d.take(&valid_rows)))
}

/// Writes the `d k` header line then one `f1,...,fd,label` row per line,
/// floats at 17 significant digits.
pub fn write_csv<W: Write>(dataset: &LabeledDataset, mut w: W) -> Result<()> {
    writeln!(w, "{} {}", dataset.dim(), dataset.class_count())?;
    for (row, &label) in dataset.features().iter().zip(dataset.labels()) {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        fields.push(label.to_string());
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn save_csv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

pub fn read_csv<R: BufRead>(r: R) -> Result<LabeledDataset> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty dataset file"))?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(1, "expected header `d k`"))?;
    let class_count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(1, "expected header `d k`"))?;
    if parts.next().is_some() {
        return Err(Error::parse(1, "trailing tokens after `d k` header"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::parse(
                line_no,
                format!("expected {} fields, found {}", dim + 1, fields.len()),
            ));
        }
        let row = fields[..dim]
            .iter()
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(line_no, format!("bad feature `{tok}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let label: usize = fields[dim]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad label `{}`", fields[dim])))?;
        if label >= class_count {
            return Err(Error::parse(
                line_no,
                format!("label {label} out of range for {class_count} classes"),
            ));
        }
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        // A header-only file is a legitimately empty dataset (a stream with
        // no held-back evaluation rows); a file with no header is not.
        return Ok(LabeledDataset::empty(class_count));
    }
    LabeledDataset::new(features, labels, class_count)
}

pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(BufReader::new(file))
}

const STREAM_MAGIC: &str = "STREAM v1";
const STREAM_PARTS: [&str; 5] = ["d1", "d2", "d3", "validation", "test"];

/// Saves the five stream components as CSVs next to a manifest naming them.
pub fn save_stream(stream_set: &StreamDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let parts = [
        &stream_set.d1,
        &stream_set.d2,
        &stream_set.d3,
        &stream_set.validation,
        &stream_set.test,
    ];
    let mut manifest = String::from(STREAM_MAGIC);
    manifest.push('\n');
    for (name, part) in STREAM_PARTS.iter().zip(parts) {
        let file = format!("{name}.csv");
        save_csv(part, &dir.join(&file))?;
        manifest.push_str(&format!("{name} {file}\n"));
    }
    std::fs::write(dir.join("stream.manifest"), manifest)?;
    Ok(())
}

/// Loads a stream from its manifest file (or a directory containing one).
pub fn load_stream(path: &Path) -> Result<StreamDataset> {
    let manifest_path = if path.is_dir() { path.join("stream.manifest") } else { path.to_path_buf() };
    let dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = std::fs::read_to_string(&manifest_path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, line)) if line.trim() == STREAM_MAGIC => {}
        Some((_, line)) => return Err(Error::parse(1, format!("bad stream magic `{line}`"))),
        None => return Err(Error::parse(1, "empty stream manifest")),
    }
    let mut files: std::collections::BTreeMap<String, String> = Default::default();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (name, file) = match (parts.next(), parts.next()) {
            (Some(n), Some(f)) => (n.to_string(), f.to_string()),
            _ => return Err(Error::parse(idx + 1, "expected `<part> <file>`")),
        };
        files.insert(name, file);
    }
    let load_part = |name: &str| -> Result<LabeledDataset> {
        let file = files
            .get(name)
            .ok_or_else(|| Error::parse(0, format!("stream manifest missing part `{name}`")))?;
        load_csv(&dir.join(file))
    };
    Ok(StreamDataset {
        d1: load_part("d1")?,
        d2: load_part("d2")?,
        d3: load_part("d3")?,
        validation: load_part("validation")?,
        test: load_part("test")?,
    })
}
