use crate::Real;

/// Positive saturating linear transfer: identity on `[0, 1]`, clamped outside.
#[inline]
pub fn pslt<T: Real>(z: T) -> T {
    if z <= T::zero() {
        T::zero()
    } else if z >= T::one() {
        T::one()
    } else {
        z
    }
}

/// Subgradient of [`pslt`]: 1 strictly inside `(0, 1)`, 0 elsewhere (kinks included).
#[inline]
pub fn pslt_grad<T: Real>(z: T) -> T {
    if z > T::zero() && z < T::one() {
        T::one()
    } else {
        T::zero()
    }
}
