//! Small numeric helpers shared across modules.

/// `d^p` with exact handling of the common integer exponents, so that
/// closed-form expectations come out bit-exact where they should.
#[inline]
pub fn dpow(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else if p == 3.0 {
        d * d * d
    } else {
        d.powf(p)
    }
}

/// `x^{1/p}` for a transport cost `x >= 0`; tiny negative inputs from float
/// noise are clamped to zero before taking the root.
#[inline]
pub fn root_p(x: f64, p: f64) -> f64 {
    let x = x.max(0.0);
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / p)
    }
}
