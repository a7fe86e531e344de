//! Explicit Runge-Kutta steps for autonomous three-dimensional systems.

use crate::error::Result;
use crate::scalar::{c, Real};

pub type State<T> = [T; 3];

fn axpy<T: Real>(y: &State<T>, h: T, terms: &[(f64, &State<T>)]) -> State<T> {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (w, k) in terms {
            acc = acc + c::<T>(*w) * k[i];
        }
        *o = *o + h * acc;
    }
    out
}

/// Classic fourth-order step.
pub fn rk4_step<T, F>(f: &mut F, y: &State<T>, h: T) -> Result<State<T>>
where
    T: Real,
    F: FnMut(&State<T>) -> Result<State<T>>,
{
    let k1 = f(y)?;
    let k2 = f(&axpy(y, h, &[(0.5, &k1)]))?;
    let k3 = f(&axpy(y, h, &[(0.5, &k2)]))?;
    let k4 = f(&axpy(y, h, &[(1.0, &k3)]))?;
    Ok(axpy(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]))
}

/// Result of one Dormand-Prince attempt.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddedStep<T> {
    pub y: State<T>,
    /// RMS of the local error scaled by `atol + rtol * max(|y|, |y_new|)`.
    pub error: T,
}

/// Dormand-Prince 5(4) step; the fifth-order solution is propagated.
pub fn dopri5_step<T, F>(f: &mut F, y: &State<T>, h: T, rtol: T, atol: T) -> Result<EmbeddedStep<T>>
where
    T: Real,
    F: FnMut(&State<T>) -> Result<State<T>>,
{
    let k1 = f(y)?;
    let k2 = f(&axpy(y, h, &[(1.0 / 5.0, &k1)]))?;
    let k3 = f(&axpy(y, h, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)]))?;
    let k4 = f(&axpy(y, h, &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]))?;
    let k5 = f(&axpy(
        y,
        h,
        &[(19372.0 / 6561.0, &k1), (-25360.0 / 2187.0, &k2), (64448.0 / 6561.0, &k3), (-212.0 / 729.0, &k4)],
    ))?;
    let k6 = f(&axpy(
        y,
        h,
        &[
            (9017.0 / 3168.0, &k1),
            (-355.0 / 33.0, &k2),
            (46732.0 / 5247.0, &k3),
            (49.0 / 176.0, &k4),
            (-5103.0 / 18656.0, &k5),
        ],
    ))?;
    let y5 = axpy(
        y,
        h,
        &[
            (35.0 / 384.0, &k1),
            (500.0 / 1113.0, &k3),
            (125.0 / 192.0, &k4),
            (-2187.0 / 6784.0, &k5),
            (11.0 / 84.0, &k6),
        ],
    );
    let k7 = f(&y5)?;
    let err = axpy(
        &[T::zero(); 3],
        h,
        &[
            (71.0 / 57600.0, &k1),
            (-71.0 / 16695.0, &k3),
            (71.0 / 1920.0, &k4),
            (-17253.0 / 339200.0, &k5),
            (22.0 / 525.0, &k6),
            (-1.0 / 40.0, &k7),
        ],
    );
    let mut sum = T::zero();
    for i in 0..3 {
        let scale = atol + rtol * y[i].abs().max(y5[i].abs());
        let e = err[i] / scale;
        sum = sum + e * e;
    }
    Ok(EmbeddedStep { y: y5, error: (sum / c(3.0)).sqrt() })
}
