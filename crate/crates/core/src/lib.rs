//! Verification lab for a blow-up construction of the Yamabe equation in
//! dimensions 25 to 51: exact certificates, radial and sphere integrals,
//! bubble identities and the perturbed metric.

pub mod bubble;
pub mod certify;
pub mod commands;
pub mod error;
pub mod metric;
pub mod quad;
pub mod radial;
pub mod rational;
pub mod report;
pub mod sphere;
pub mod weyl;

pub use bubble::BubbleParams;
pub use certify::{certify_dimension, sweep, DimensionCoefficients, ExactCheck, Relation, TauCertificate};
pub use error::{LabError, Result};
pub use metric::{GluedBumpSpec, MetricAtPoint, PerturbParams};
pub use radial::AxisModel;
pub use rational::{Rational, SPoly, TauPoly};
pub use report::{Check, CheckReport, Method, Verdict};
pub use sphere::{IdentityCheck, McEstimate, SphereLab};
pub use weyl::{Contractions, TensorField, WeylForm};
