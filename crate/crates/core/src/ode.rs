//! Classical fourth-order Runge-Kutta stepping over small value-type states.

/// A state that supports the `x + h * k` update RK4 needs.
pub trait OdeState: Copy {
    fn add_scaled(&self, k: &Self, h: f64) -> Self;
}

impl<const N: usize> OdeState for [f64; N] {
    fn add_scaled(&self, k: &Self, h: f64) -> Self {
        let mut out = *self;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += h * ki;
        }
        out
    }
}

/// Combines the four RK4 slopes: `x + h/6 (k1 + 2 k2 + 2 k3 + k4)`.
#[inline]
pub fn rk4_combine<S: OdeState>(x: &S, k: &[S; 4], h: f64) -> S {
    let h6 = h / 6.0;
    let h3 = h / 3.0;
    x.add_scaled(&k[0], h6)
        .add_scaled(&k[1], h3)
        .add_scaled(&k[2], h3)
        .add_scaled(&k[3], h6)
}

/// One RK4 step of `dx/dt = f(t, x)`.
pub fn rk4_step<S: OdeState>(t: f64, x: &S, h: f64, mut f: impl FnMut(f64, &S) -> S) -> S {
    let half = 0.5 * h;
    let k1 = f(t, x);
    let k2 = f(t + half, &x.add_scaled(&k1, half));
    let k3 = f(t + half, &x.add_scaled(&k2, half));
    let k4 = f(t + h, &x.add_scaled(&k3, h));
    rk4_combine(x, &[k1, k2, k3, k4], h)
}
