use crate::scalar::Real;

/// One classical fourth-order Runge–Kutta step of an autonomous field.
pub fn rk4_step<T: Real, const N: usize, F>(x: &[T; N], h: T, f: F) -> [T; N]
where
    F: Fn(&[T; N]) -> [T; N],
{
    let half = h / T::lit(2.0);
    let axpy = |base: &[T; N], k: &[T; N], s: T| {
        let mut out = *base;
        for (o, &ki) in out.iter_mut().zip(k) {
            *o = *o + s * ki;
        }
        out
    };
    let k1 = f(x);
    let k2 = f(&axpy(x, &k1, half));
    let k3 = f(&axpy(x, &k2, half));
    let k4 = f(&axpy(x, &k3, h));
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = *x;
    for i in 0..N {
        out[i] = out[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
    }
    out
}
