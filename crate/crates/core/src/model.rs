//! Micro-classifier ensembles: the domain types, the classification rule with
//! its fitness side-effects, and initialization from labelled training data.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    /// Validates that the point is non-empty and every coordinate is finite.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Euclidean distance. Both points must share a dimension.
    pub fn distance(&self, other: &Point) -> f64 {
        euclidean(&self.0, &other.0)
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Opaque class identifier. Ordering is only used to keep ensembles in a
/// deterministic order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        Label(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub point: Point,
    pub label: Label,
}

impl LabeledPoint {
    pub fn new(point: Point, label: impl Into<Label>) -> Self {
        LabeledPoint {
            point,
            label: label.into(),
        }
    }
}

/// A labelled hypersphere acting as a one-class classifier.
///
/// Radius and label are fixed at construction; only the centre (moved by the
/// evolvers) and the fitness change afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroClassifier {
    centre: Point,
    radius: f64,
    label: Label,
    fitness: f64,
}

impl MicroClassifier {
    pub fn new(centre: Point, radius: f64, label: impl Into<Label>) -> Result<Self> {
        check_radius(radius)?;
        Ok(MicroClassifier {
            centre,
            radius,
            label: label.into(),
            fitness: 0.0,
        })
    }

    pub fn with_fitness(mut self, fitness: f64) -> Result<Self> {
        if !(fitness >= 0.0 && fitness.is_finite()) {
            return Err(Error::invalid(format!("fitness must be >= 0, got {fitness}")));
        }
        self.fitness = fitness;
        Ok(self)
    }

    pub fn centre(&self) -> &Point {
        &self.centre
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn label(&self) -> &Label {
        &self.label
    }

    pub fn fitness(&self) -> f64 {
        self.fitness
    }

    pub fn recognises(&self, p: &Point) -> bool {
        self.centre.distance(p) <= self.radius
    }

    pub(crate) fn centre_mut(&mut self) -> &mut Point {
        &mut self.centre
    }

    #[cfg(test)]
    pub(crate) fn set_fitness(&mut self, fitness: f64) {
        debug_assert!(fitness >= 0.0);
        self.fitness = fitness;
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("radius must be > 0, got {radius}")))
    }
}

/// The subpopulation of micro-classifiers dedicated to one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    label: Label,
    classifiers: Vec<MicroClassifier>,
}

impl Ensemble {
    pub fn new(label: impl Into<Label>) -> Self {
        Ensemble {
            label: label.into(),
            classifiers: Vec::new(),
        }
    }

    /// Builds an ensemble from existing members, all of which must carry `label`.
    pub fn from_members(label: impl Into<Label>, members: Vec<MicroClassifier>) -> Result<Self> {
        let mut e = Ensemble::new(label);
        for m in members {
            e.push(m)?;
        }
        Ok(e)
    }

    pub fn label(&self) -> &Label {
        &self.label
    }

    pub fn members(&self) -> &[MicroClassifier] {
        &self.classifiers
    }

    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classifiers.is_empty()
    }

    pub fn push(&mut self, classifier: MicroClassifier) -> Result<()> {
        if classifier.label != self.label {
            return Err(Error::invalid(format!(
                "classifier label {} does not match ensemble label {}",
                classifier.label, self.label
            )));
        }
        if let Some(first) = self.classifiers.first() {
            if first.centre.dim() != classifier.centre.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.centre.dim(),
                    found: classifier.centre.dim(),
                });
            }
        }
        self.classifiers.push(classifier);
        Ok(())
    }

    pub(crate) fn members_mut(&mut self) -> &mut [MicroClassifier] {
        &mut self.classifiers
    }

    pub(crate) fn replace_members(&mut self, members: Vec<MicroClassifier>) {
        debug_assert!(members.iter().all(|m| m.label == self.label));
        self.classifiers = members;
    }

    fn any_recognises(&self, p: &Point) -> bool {
        self.classifiers.iter().any(|c| c.recognises(p))
    }
}

/// What to do with a point no classifier recognises.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Report the point as unrecognised.
    #[default]
    Abstain,
    /// Fall back to the label of the nearest centre.
    Force,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abstain" => Ok(Mode::Abstain),
            "force" => Ok(Mode::Force),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Abstain => "abstain",
            Mode::Force => "force",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Label(Label),
    Unrecognised,
}

impl Outcome {
    pub fn label(&self) -> Option<&Label> {
        match self {
            Outcome::Label(l) => Some(l),
            Outcome::Unrecognised => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub outcome: Outcome,
    /// Distance from the winning centre; smaller is more confident.
    pub confidence: f64,
    /// How many classifiers recognised the point.
    pub recognisers: usize,
}

impl Prediction {
    pub fn unrecognised() -> Self {
        Prediction {
            outcome: Outcome::Unrecognised,
            confidence: f64::INFINITY,
            recognisers: 0,
        }
    }
}

/// One ensemble per training class plus the shared configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    ensembles: Vec<Ensemble>,
    num_agents: usize,
    radius: f64,
    dim: usize,
    warnings: Vec<String>,
    #[serde(skip)]
    distance_evals: u64,
}

impl Model {
    /// Assembles a model from hand-built ensembles. Ensembles are reordered by
    /// label; labels must be distinct and every centre must share a dimension.
    pub fn from_ensembles(mut ensembles: Vec<Ensemble>, num_agents: usize, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        if num_agents == 0 {
            return Err(Error::invalid("numAgents must be >= 1"));
        }
        ensembles.sort_by(|a, b| a.label.cmp(&b.label));
        if let Some(w) = ensembles.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(Error::invalid(format!("duplicate ensemble label {}", w[0].label)));
        }
        let dim = ensembles
            .iter()
            .flat_map(|e| e.classifiers.first())
            .map(|c| c.centre.dim())
            .next()
            .ok_or(Error::EmptyModel)?;
        for c in ensembles.iter().flat_map(|e| &e.classifiers) {
            if c.centre.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.centre.dim(),
                });
            }
        }
        Ok(Model {
            ensembles,
            num_agents,
            radius,
            dim,
            warnings: Vec::new(),
            distance_evals: 0,
        })
    }

    pub fn ensembles(&self) -> &[Ensemble] {
        &self.ensembles
    }

    pub(crate) fn ensembles_mut(&mut self) -> &mut [Ensemble] {
        &mut self.ensembles
    }

    pub fn ensemble(&self, label: &Label) -> Option<&Ensemble> {
        self.ensembles
            .binary_search_by(|e| e.label.cmp(label))
            .ok()
            .map(|i| &self.ensembles[i])
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.ensembles.iter().map(|e| &e.label)
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn classifier_count(&self) -> usize {
        self.ensembles.iter().map(Ensemble::len).sum()
    }

    /// Distance evaluations performed by [`Model::classify`] since creation
    /// or the last reset.
    pub fn distance_evaluations(&self) -> u64 {
        self.distance_evals
    }

    pub fn reset_distance_evaluations(&mut self) {
        self.distance_evals = 0;
    }

    /// Classifies `p` and applies the fitness side-effects.
    ///
    /// Every classifier whose sphere contains `p` gains one unit of fitness.
    /// The nearest recogniser wins. When recognisers disagree on the label
    /// all of them are reset to zero fitness, but the winner's label is
    /// still returned. Ties on distance go to the lower label, then to the
    /// earlier member.
    pub fn classify(&mut self, p: &Point, mode: Mode) -> Result<Prediction> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        if self.classifier_count() == 0 {
            return Err(Error::EmptyModel);
        }

        let mut recognised: Vec<(usize, usize)> = Vec::new();
        let mut winner: Option<(usize, f64)> = None;
        let mut nearest: Option<(usize, f64)> = None;
        let mut first_ensemble: Option<usize> = None;
        let mut conflict = false;

        for (ei, ensemble) in self.ensembles.iter_mut().enumerate() {
            for (ci, c) in ensemble.classifiers.iter_mut().enumerate() {
                let d = euclidean(c.centre.coords(), p.coords());
                self.distance_evals += 1;
                if nearest.is_none_or(|(_, best)| d < best) {
                    nearest = Some((ei, d));
                }
                if d <= c.radius {
                    c.fitness += 1.0;
                    recognised.push((ei, ci));
                    match first_ensemble {
                        None => first_ensemble = Some(ei),
                        Some(first) if first != ei => conflict = true,
                        _ => {}
                    }
                    if winner.is_none_or(|(_, best)| d < best) {
                        winner = Some((ei, d));
                    }
                }
            }
        }

        if conflict {
            for &(ei, ci) in &recognised {
                self.ensembles[ei].classifiers[ci].fitness = 0.0;
            }
        }

        let prediction = match (winner, mode) {
            (Some((ei, d)), _) => Prediction {
                outcome: Outcome::Label(self.ensembles[ei].label.clone()),
                confidence: d,
                recognisers: recognised.len(),
            },
            (None, Mode::Abstain) => Prediction::unrecognised(),
            (None, Mode::Force) => {
                let (ei, d) = nearest.expect("model has at least one classifier");
                Prediction {
                    outcome: Outcome::Label(self.ensembles[ei].label.clone()),
                    confidence: d,
                    recognisers: 0,
                }
            }
        };
        Ok(prediction)
    }

    /// Linear fitness decay by one unit, floored at zero.
    pub fn decay_fitness(&mut self) {
        for c in self.ensembles.iter_mut().flat_map(|e| e.classifiers.iter_mut()) {
            c.fitness = (c.fitness - 1.0).max(0.0);
        }
    }
}

/// Builds one ensemble per training class.
///
/// Points of each class are taken in the given order. A point not recognised
/// by the ensemble so far founds a new classifier centred on it. If the cap
/// of `num_agents` is hit while unrecognised points remain, the rest of the
/// class is skipped and a warning is stored on the model. Ensembles left
/// short of `num_agents` are padded with [`pad_subpopulation`].
pub fn initialize_model<R: Rng + ?Sized>(
    training: &[LabeledPoint],
    num_agents: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Model> {
    if training.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if num_agents == 0 {
        return Err(Error::invalid("numAgents must be >= 1"));
    }
    check_radius(radius)?;
    let dim = training[0].point.dim();

    let mut by_class: BTreeMap<&Label, Vec<&Point>> = BTreeMap::new();
    for lp in training {
        if lp.point.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: lp.point.dim(),
            });
        }
        by_class.entry(&lp.label).or_default().push(&lp.point);
    }

    let mut warnings = Vec::new();
    let mut ensembles = Vec::with_capacity(by_class.len());
    for (label, points) in by_class {
        let mut ensemble = Ensemble::new(label.clone());
        for (i, p) in points.iter().enumerate() {
            if ensemble.any_recognises(p) {
                continue;
            }
            if ensemble.len() >= num_agents {
                warnings.push(format!(
                    "class {label}: numAgents={num_agents} reached with {} training points left; \
                     radius {radius} is likely too small",
                    points.len() - i
                ));
                break;
            }
            ensemble
                .classifiers
                .push(MicroClassifier::new((*p).clone(), radius, label.clone())?);
        }
        let shortfall = num_agents - ensemble.len();
        if shortfall > 0 {
            pad_subpopulation(&mut ensemble, shortfall, radius, rng)?;
        }
        ensembles.push(ensemble);
    }

    Ok(Model {
        ensembles,
        num_agents,
        radius,
        dim,
        warnings,
        distance_evals: 0,
    })
}

/// Adds `k` classifiers derived from the existing members.
///
/// Source centres are drawn without replacement; once every original member
/// has been used a new round begins. Each copy has one uniformly chosen
/// coordinate redrawn from a Gaussian centred on its old value with standard
/// deviation `radius`.
pub fn pad_subpopulation<R: Rng + ?Sized>(
    ensemble: &mut Ensemble,
    k: usize,
    radius: f64,
    rng: &mut R,
) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if k == 0 {
        return Err(Error::invalid("padding count must be >= 1"));
    }
    check_radius(radius)?;
    let normal = Normal::new(0.0, radius).map_err(|e| Error::invalid(e.to_string()))?;

    let originals = ensemble.len();
    let dim = ensemble.classifiers[0].centre.dim();
    let mut order: Vec<usize> = Vec::with_capacity(originals);
    let mut added = 0;
    while added < k {
        order.clear();
        order.extend(0..originals);
        order.shuffle(rng);
        for &src in order.iter().take(k - added) {
            let mut centre = ensemble.classifiers[src].centre.clone();
            let d = rng.random_range(0..dim);
            centre.coords_mut()[d] += normal.sample(rng);
            let label = ensemble.label.clone();
            ensemble.classifiers.push(MicroClassifier::new(centre, radius, label)?);
            added += 1;
        }
    }
    Ok(())
}
