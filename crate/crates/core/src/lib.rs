//! Explicit unitary equivalence of countable operator families to integral
//! operators with arbitrarily smooth Carleman kernels.
//!
//! The crate turns a finite truncation of an operator family `{B_r}` whose
//! adjoints decay along an orthonormal witness sequence into
//!
//! * an orthonormal frame `{f_n}` of the coordinate space, split into the
//!   selected subsequence `{e_k}`, its orthogonal completion `{e_k^⊥}` and the
//!   derived families `{x_k}`, `{x_k^⊥}`;
//! * an orthonormal Lemarié–Meyer wavelet basis `{u_n}` of `L2(R)`, partitioned
//!   into the families `{g_k}` and `{h_k}`;
//! * the unitary `U` pairing the two bases, and for every `r` the kernel
//!   `K = P + F` of `U S_r U^{-1}` sampled on a grid together with its partial
//!   derivatives and Carleman function norms;
//! * a verification suite checking representation, smoothness, vanishing at
//!   infinity and every summability certificate the construction relies on.
//!
//! Module map:
//!
//! | module | role |
//! |---|---|
//! | [`wavelet`] | bell function, mother wavelet, children, `D`/`A` bounds |
//! | [`schedule`] | enumeration of `(j, k)`, `g`/`h` partition, `n(k)` schedule |
//! | [`operator`] | family presets and loading, decay profile, `e`-selection |
//! | [`decomposition`] | frames, `Q_r`/`J_r`/`Γ_r`, the `d` functional, `x`-selection |
//! | [`schmidt`] | Jacobi SVD, quarter-power operator, Schwarz and nuclearity |
//! | [`kernel`] | unitary pairing, `P`/`F`/`K` fields, Carleman norms |
//! | [`verify`] | the verification suite |
//! | [`pipeline`] | end-to-end orchestration from a [`config::RunConfig`] |

pub mod config;
pub mod decomposition;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod operator;
pub mod output;
pub mod pipeline;
pub mod schedule;
pub mod schmidt;
pub mod verify;
pub mod wavelet;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use grid::Grid;
pub use kernel::KernelField;
pub use linalg::{CMatrix, CVector, C64};
pub use operator::OperatorFamily;
pub use pipeline::{Analysis, Construction};
pub use schedule::{BasisPartition, ChildIndex, Enumeration};
pub use schmidt::SchmidtData;
pub use verify::VerificationReport;
pub use wavelet::{BellFunction, MotherWavelet};
