//! Float intrinsics that are inherent methods under `std` but live in `libm`
//! under `no_std`.
//!
//! Modules that need transcendental math add
//! `#[cfg(not(feature = "std"))] use crate::fmath::F64Ext;` and keep calling
//! the usual method syntax (`x.exp()`, `x.powf(a)`, …); under `std` the
//! import compiles away and the inherent methods are used directly.

#![allow(dead_code)]

#[cfg(not(feature = "std"))]
pub(crate) trait F64Ext {
    fn abs(self) -> f64;
    fn ceil(self) -> f64;
    fn floor(self) -> f64;
    fn round(self) -> f64;
    fn sqrt(self) -> f64;
    fn exp(self) -> f64;
    fn ln(self) -> f64;
    fn log2(self) -> f64;
    fn log10(self) -> f64;
    fn powf(self, n: f64) -> f64;
    fn powi(self, n: i32) -> f64;
    fn cos(self) -> f64;
    fn sin(self) -> f64;
}

#[cfg(not(feature = "std"))]
impl F64Ext for f64 {
    #[inline]
    fn abs(self) -> f64 {
        libm::fabs(self)
    }
    #[inline]
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    #[inline]
    fn round(self) -> f64 {
        libm::round(self)
    }
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        libm::log(self)
    }
    #[inline]
    fn log2(self) -> f64 {
        libm::log2(self)
    }
    #[inline]
    fn log10(self) -> f64 {
        libm::log10(self)
    }
    #[inline]
    fn powf(self, n: f64) -> f64 {
        libm::pow(self, n)
    }
    #[inline]
    fn powi(self, n: i32) -> f64 {
        libm::pow(self, n as f64)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    #[inline]
    fn sin(self) -> f64 {
        libm::sin(self)
    }
}

#[cfg(not(feature = "std"))]
pub(crate) trait F32Ext {
    fn abs(self) -> f32;
}

#[cfg(not(feature = "std"))]
impl F32Ext for f32 {
    #[inline]
    fn abs(self) -> f32 {
        libm::fabsf(self)
    }
}
