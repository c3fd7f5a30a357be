//! Scalar abstraction the numerical core is generic over.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar type for the whole pipeline.
///
/// `nalgebra::RealField` supplies arithmetic, transcendentals, and ordering;
/// the num-traits bounds supply conversion to and from primitive literals.
/// `num_traits::Float` is deliberately not a supertrait: it duplicates the
/// method names of `RealField` (`ln`, `exp`, `sqrt`, ...) and a double bound
/// would make every call ambiguous.
///
/// `f32` and `f64` implement this trait. Concrete `f64` aliases for the
/// public types live at the crate root.
pub trait Scalar:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync
{
    /// Converts an `f64` literal into the scalar type.
    ///
    /// Every literal used by this crate is representable in `f32` and `f64`,
    /// so the conversion cannot fail for implementors of this trait.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a dimension or index into the scalar type.
    #[inline]
    fn from_dim(n: usize) -> Self {
        Self::from_usize(n).expect("dimension representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
