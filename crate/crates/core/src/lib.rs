//! Over-the-air computation (AirComp) of distributed weighted averages.
//!
//! The crate simulates analog aggregation of per-node weighted messages over
//! AWGN or Rayleigh-fading uplinks, including the noise-enhancement problem of
//! the weighted-average denominator and an adaptive weight-truncation scheme
//! whose bounds are tuned by Bayesian optimization. Two end-to-end
//! applications are included: distributed Gaussian-process regression for
//! radio-map construction (product-of-experts fusion over the air) and
//! federated-averaging model aggregation.
//!
//! Module map:
//!
//! * [`channel`] — channel realizations and dB/linear power conversion
//! * [`aircomp`] — the summation primitive and the three averaging protocols
//! * [`gp`] — Gaussian-process regression core (kernel, MLE fit, posterior)
//! * [`bayesopt`] — truncation-bound tuning by expected improvement
//! * [`radiomap`] — path-loss plus correlated-shadowing scenario generation
//! * [`dgpr`] — local experts, product-of-experts fusion, pseudo pools
//! * [`harness`] — experiment orchestration, sweeps, CSV emission
//! * [`fedavg`] — federated averaging with AirComp model aggregation

pub mod aircomp;
pub mod bayesopt;
pub mod channel;
pub mod dgpr;
pub mod error;
pub mod fedavg;
pub mod gp;
pub mod harness;
pub mod radiomap;

pub use aircomp::{AirCompResult, AverageEstimate, NodePayload, TruncationParams};
pub use bayesopt::{BoConfig, BoOutcome, BoState, BoStepRecord};
pub use channel::{ChannelKind, ChannelRealization, SystemConfig};
pub use dgpr::{DgprEstimate, DgprMethod, LocalExpert, PoeFusion, PseudoPools};
pub use error::{Error, Result};
pub use fedavg::{FlConfig, FlData, FlPolicy, FlSpec, MlpShape};
pub use gp::{GpDataset, GpPosterior, KernelParams};
pub use harness::{ExperimentSpec, Method, ResultRecord, SweepAxis};
pub use radiomap::{RadioMapScenario, ScenarioParams};
