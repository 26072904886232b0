//! Pohozaev boundary forms and the identities built on them.

pub mod checks;
pub mod fields;
pub mod form;

pub use checks::{
    radial_vanishing, roundtrip, surface_integral, surface_integrals, transport, verify_v_identities, volume_integral, Quadrature,
    RoundTrip, RoundTripReport, SurfaceIntegral, TransportReport, VIdentityReport, VanishingReport,
};
pub use fields::{Field, Jet, PolyField, Polynomial, RadialField, ScaledField, SumField};
pub use form::{build_f, build_g, tilde_top, Affine, Deriv, Factor, PohozaevForm, PohozaevTerm, TermKind, Variant, Weight};
