//! Synthetic drifting Gaussian streams and CSV ingestion.
//!
//! All generators emit classes in strict round-robin order (sample `t`
//! belongs to class `t mod classes`) and draw each sample from an isotropic
//! Gaussian around its class mean at time `t`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, LabeledPoint, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    /// One class fixed, the other sliding along the main diagonal.
    Translate,
    /// Class means evenly spaced on a circle that turns at a constant rate.
    Rotate,
    /// Every class mean follows a reflected Gaussian random walk.
    RandomWalk,
}

impl FromStr for DriftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "translate" => Ok(DriftKind::Translate),
            "rotate" => Ok(DriftKind::Rotate),
            "random-walk" | "randomwalk" => Ok(DriftKind::RandomWalk),
            other => Err(Error::invalid(format!("unknown stream kind {other:?}"))),
        }
    }
}

impl fmt::Display for DriftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriftKind::Translate => "translate",
            DriftKind::Rotate => "rotate",
            DriftKind::RandomWalk => "random-walk",
        })
    }
}

/// Parameters of a synthetic stream.
///
/// `drift_rate` is a displacement per emitted sample for `Translate` and
/// `RandomWalk` and an angle in radians per emitted sample for `Rotate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub classes: usize,
    pub dimension: usize,
    pub samples: usize,
    pub class_separation: f64,
    pub drift_rate: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl DriftSpec {
    /// Two-class translating stream: 16,000 samples in 2-D, the moving class
    /// travels 24 units over the stream.
    pub fn translating() -> Self {
        DriftSpec {
            kind: DriftKind::Translate,
            classes: 2,
            dimension: 2,
            samples: 16_000,
            class_separation: 8.0,
            drift_rate: 1.0e-3,
            noise_sigma: 0.5,
            seed: 0,
        }
    }

    /// Four classes completing exactly one rotation over the stream.
    pub fn rotating() -> Self {
        let samples = 32_000;
        DriftSpec {
            kind: DriftKind::Rotate,
            classes: 4,
            dimension: 2,
            samples,
            class_separation: 6.0,
            drift_rate: 2.0 * PI / samples as f64,
            noise_sigma: 0.5,
            seed: 0,
        }
    }

    /// Two unimodal Gaussian classes wandering in 5-D.
    pub fn random_walk() -> Self {
        DriftSpec {
            kind: DriftKind::RandomWalk,
            classes: 2,
            dimension: 5,
            samples: 16_000,
            class_separation: 6.0,
            drift_rate: 0.02,
            noise_sigma: 0.5,
            seed: 0,
        }
    }

    pub fn preset(kind: DriftKind) -> Self {
        match kind {
            DriftKind::Translate => Self::translating(),
            DriftKind::Rotate => Self::rotating(),
            DriftKind::RandomWalk => Self::random_walk(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("a stream needs at least 2 classes"));
        }
        if self.samples < self.classes {
            return Err(Error::invalid("samples must be >= classes"));
        }
        if self.dimension == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be > 0"));
        }
        if !self.drift_rate.is_finite() || !self.class_separation.is_finite() {
            return Err(Error::invalid("drift_rate and class_separation must be finite"));
        }
        match self.kind {
            DriftKind::Translate if self.classes != 2 => {
                Err(Error::invalid("the translating stream has exactly 2 classes"))
            }
            DriftKind::Rotate if self.dimension < 2 => Err(Error::invalid("rotation needs dimension >= 2")),
            DriftKind::RandomWalk if self.drift_rate < 0.0 => Err(Error::invalid("drift_rate must be >= 0")),
            _ => Ok(()),
        }
    }

    /// Dispatches to the generator for `kind`.
    pub fn generate(&self) -> Result<Vec<LabeledPoint>> {
        match self.kind {
            DriftKind::Translate => gen_translating(self),
            DriftKind::Rotate => gen_rotating(self),
            DriftKind::RandomWalk => gen_random_walk(self),
        }
    }
}

fn class_labels(n: usize) -> Vec<Label> {
    (0..n).map(|i| Label::new(i.to_string())).collect()
}

fn expect_kind(spec: &DriftSpec, kind: DriftKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::invalid(format!("expected a {kind} spec, got {}", spec.kind)));
    }
    Ok(())
}

fn rng_for(spec: &DriftSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(spec.seed)
}

fn sample_around(mean: &[f64], noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Point {
    Point::from_raw(mean.iter().map(|m| m + noise.sample(rng)).collect())
}

/// Mean of the moving class at sample index `t`.
pub fn translating_mean(spec: &DriftSpec, t: usize) -> Vec<f64> {
    let step = spec.drift_rate * t as f64 / (spec.dimension as f64).sqrt();
    let mut m = vec![step; spec.dimension];
    m[0] += spec.class_separation;
    m
}

/// Class 0 sits at the origin. Class 1 starts `class_separation` along the
/// first axis and moves `drift_rate` per emitted sample along `(1,..,1)/sqrt(D)`.
pub fn gen_translating(spec: &DriftSpec) -> Result<Vec<LabeledPoint>> {
    expect_kind(spec, DriftKind::Translate)?;
    let labels = class_labels(2);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let origin = vec![0.0; spec.dimension];
    let mut rng = rng_for(spec);
    Ok((0..spec.samples)
        .map(|t| {
            let class = t % 2;
            let point = if class == 0 {
                sample_around(&origin, &noise, &mut rng)
            } else {
                sample_around(&translating_mean(spec, t), &noise, &mut rng)
            };
            LabeledPoint::new(point, labels[class].clone())
        })
        .collect())
}

/// Mean of class `class` at sample index `t` on the rotating circle.
pub fn rotating_mean(spec: &DriftSpec, class: usize, t: f64) -> Vec<f64> {
    let theta = 2.0 * PI * class as f64 / spec.classes as f64 + spec.drift_rate * t;
    let mut m = vec![0.0; spec.dimension];
    m[0] = spec.class_separation * theta.cos();
    m[1] = spec.class_separation * theta.sin();
    m
}

/// Class `i` is centred at angle `2*pi*i/classes + drift_rate*t` on a circle
/// of radius `class_separation` in the first two coordinates.
pub fn gen_rotating(spec: &DriftSpec) -> Result<Vec<LabeledPoint>> {
    expect_kind(spec, DriftKind::Rotate)?;
    let labels = class_labels(spec.classes);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_for(spec);
    Ok((0..spec.samples)
        .map(|t| {
            let class = t % spec.classes;
            let mean = rotating_mean(spec, class, t as f64);
            LabeledPoint::new(sample_around(&mean, &noise, &mut rng), labels[class].clone())
        })
        .collect())
}

/// Half-width of the box the random-walk means are reflected into.
pub fn random_walk_bound(spec: &DriftSpec) -> f64 {
    2.0 * spec.class_separation
}

/// Class means start on the main diagonal, `class_separation` apart and
/// centred on the origin. Before each emitted sample every mean moves by
/// `drift_rate * N(0, I)` and is reflected back into
/// `[-bound, bound]^D` with `bound = 2 * class_separation`.
pub fn gen_random_walk(spec: &DriftSpec) -> Result<Vec<LabeledPoint>> {
    expect_kind(spec, DriftKind::RandomWalk)?;
    let labels = class_labels(spec.classes);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let bound = random_walk_bound(spec);
    let diag = 1.0 / (spec.dimension as f64).sqrt();
    let mut means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|c| {
            let offset = (c as f64 - (spec.classes - 1) as f64 / 2.0) * spec.class_separation;
            vec![offset * diag; spec.dimension]
        })
        .collect();
    let mut rng = rng_for(spec);
    let mut out = Vec::with_capacity(spec.samples);
    for t in 0..spec.samples {
        if spec.drift_rate > 0.0 {
            for m in &mut means {
                for x in m.iter_mut() {
                    let step: f64 = StandardNormal.sample(&mut rng);
                    *x = reflect(*x + spec.drift_rate * step, bound);
                }
            }
        }
        let class = t % spec.classes;
        out.push(LabeledPoint::new(
            sample_around(&means[class], &noise, &mut rng),
            labels[class].clone(),
        ));
    }
    Ok(out)
}

fn reflect(mut x: f64, bound: f64) -> f64 {
    while x > bound || x < -bound {
        if x > bound {
            x = 2.0 * bound - x;
        } else {
            x = -2.0 * bound - x;
        }
    }
    x
}

/// Reads a comma-separated stream file.
///
/// Every column except `label_column` (0-based) must parse as a real. Quoted
/// cells are rejected. Empty lines are skipped. Returns the points in file
/// order and the sorted set of labels seen.
pub fn load_csv_stream(
    path: impl AsRef<Path>,
    label_column: usize,
    header: bool,
) -> Result<(Vec<LabeledPoint>, Vec<Label>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        line: 0,
        column: 0,
        message: format!("cannot read file: {e}"),
    })?;
    parse_csv_stream(&text, path, label_column, header)
}

pub fn parse_csv_stream(
    text: &str,
    path: &Path,
    label_column: usize,
    header: bool,
) -> Result<(Vec<LabeledPoint>, Vec<Label>)> {
    let err = |line: usize, column: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut points = Vec::new();
    let mut labels = BTreeSet::new();
    let mut arity: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if header && i == 0 {
            continue;
        }
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if let Some(col) = cells.iter().position(|c| c.contains('"')) {
            return Err(err(line_no, col, "quoted cells are not supported".into()));
        }
        match arity {
            None => {
                if label_column >= cells.len() {
                    return Err(err(
                        line_no,
                        label_column,
                        format!("label column {label_column} out of range for {} columns", cells.len()),
                    ));
                }
                if cells.len() < 2 {
                    return Err(err(line_no, 0, "need at least one feature column".into()));
                }
                arity = Some(cells.len());
            }
            Some(n) if n != cells.len() => {
                return Err(err(
                    line_no,
                    cells.len().min(n),
                    format!("expected {n} columns, found {}", cells.len()),
                ));
            }
            _ => {}
        }

        let mut coords = Vec::with_capacity(cells.len() - 1);
        for (col, cell) in cells.iter().enumerate() {
            if col == label_column {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(line_no, col, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(err(line_no, col, format!("not a finite number: {cell:?}")));
            }
            coords.push(v);
        }
        let label_cell = cells[label_column];
        if label_cell.is_empty() {
            return Err(err(line_no, label_column, "empty label".into()));
        }
        let label = Label::new(label_cell);
        labels.insert(label.clone());
        points.push(LabeledPoint::new(Point::from_raw(coords), label));
    }
    Ok((points, labels.into_iter().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_direct_parse() {
        let text = "1.0,2.0,A\n1.5,2.5,A\n9.0,9.0,B\n";
        let (pts, labels) = parse_csv_stream(text, Path::new("t.csv"), 2, false).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(labels, vec![Label::from("A"), Label::from("B")]);
        assert_eq!(pts[1].point.coords(), &[1.5, 2.5]);
        assert_eq!(pts[2].label.as_str(), "B");
    }

    #[test]
    fn csv_bad_number_names_line_and_column() {
        let e = parse_csv_stream("1.0,x,A\n", Path::new("t.csv"), 2, false).unwrap_err();
        match e {
            Error::Csv { line, column, .. } => assert_eq!((line, column), (1, 1)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn csv_header_skipped() {
        let (pts, _) = parse_csv_stream("f1,f2,y\n1,2,A\n", Path::new("t.csv"), 2, true).unwrap();
        assert_eq!(pts.len(), 1);
    }

    #[test]
    fn csv_label_column_first() {
        let (pts, _) = parse_csv_stream("A,1,2\n", Path::new("t.csv"), 0, false).unwrap();
        assert_eq!(pts[0].point.coords(), &[1.0, 2.0]);
    }

    #[test]
    fn csv_ragged_and_quoted_rows_rejected() {
        let e = parse_csv_stream("1,2,A\n1,A\n", Path::new("t.csv"), 2, false).unwrap_err();
        assert!(matches!(e, Error::Csv { line: 2, .. }));
        let e = parse_csv_stream("1,\"2\",A\n", Path::new("t.csv"), 2, false).unwrap_err();
        assert!(matches!(e, Error::Csv { line: 1, column: 1, .. }));
        let e = parse_csv_stream("1,2,A\n", Path::new("t.csv"), 5, false).unwrap_err();
        assert!(matches!(e, Error::Csv { .. }));
    }

    #[test]
    fn rotation_initial_positions() {
        let spec = DriftSpec {
            class_separation: 1.0,
            ..DriftSpec::rotating()
        };
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (c, e) in expect.iter().enumerate() {
            let m = rotating_mean(&spec, c, 0.0);
            assert!((m[0] - e[0]).abs() < 1e-12 && (m[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_is_periodic() {
        let spec = DriftSpec::rotating();
        let period = 2.0 * PI / spec.drift_rate;
        for c in 0..4 {
            let a = rotating_mean(&spec, c, 0.0);
            let b = rotating_mean(&spec, c, period);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quarter_turn_reaches_neighbour() {
        let spec = DriftSpec::rotating();
        let quarter = (PI / 2.0) / spec.drift_rate;
        for c in 0..4 {
            let moved = rotating_mean(&spec, c, quarter);
            let target = rotating_mean(&spec, (c + 1) % 4, 0.0);
            for (x, y) in moved.iter().zip(&target) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = DriftSpec::translating();
        s.classes = 3;
        assert!(gen_translating(&s).is_err());
        let mut s = DriftSpec::rotating();
        s.dimension = 1;
        assert!(gen_rotating(&s).is_err());
        let mut s = DriftSpec::random_walk();
        s.samples = 1;
        assert!(gen_random_walk(&s).is_err());
        assert!(gen_rotating(&DriftSpec::translating()).is_err());
    }

    #[test]
    fn reflection_stays_in_box() {
        assert_eq!(reflect(5.0, 4.0), 3.0);
        assert_eq!(reflect(-4.5, 4.0), -3.5);
        assert_eq!(reflect(13.0, 4.0), -3.0);
    }
}
