//! Stream classification under extreme verification latency.
//!
//! A [`Model`] keeps one ensemble of hypersphere micro-classifiers per class.
//! It is trained once on labelled data and then follows concept drift on an
//! unlabelled stream: classifiers that keep recognising points gain fitness,
//! and after every tumbling window a population-based [`Evolver`] (GA or PSO)
//! reshapes each ensemble.
//!
//! ```
//! use evlstream::datagen::DriftSpec;
//! use evlstream::engine::{run_stream, RunConfig};
//!
//! let data = DriftSpec::translating().with_seed(3).generate().unwrap();
//! let (training, stream) = data.split_at(250);
//! let report = run_stream(training, stream, &RunConfig::default()).unwrap();
//! assert_eq!(report.windows, stream.len().div_ceil(250));
//! ```

pub mod datagen;
pub mod engine;
pub mod error;
pub mod eval;
pub mod evolve;
pub mod experiment;
pub mod model;

pub use engine::{run_stream, RunConfig, RunReport};
pub use error::{Error, Result};
pub use evolve::{Evolver, EvolverConfig, EvolverKind};
pub use model::{Ensemble, Label, LabeledPoint, MicroClassifier, Mode, Model, Outcome, Point, Prediction};

impl Error {
    /// Process exit status for the command-line driver: 1 for configuration
    /// problems, 2 for bad input data, 3 for anything that failed at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 1,
            Error::Csv { .. }
            | Error::UnknownLabel { .. }
            | Error::DimensionMismatch { .. }
            | Error::EmptyStream
            | Error::EmptyTraining
            | Error::EmptyPoint
            | Error::NonFinite { .. } => 2,
            Error::Run { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
