//! Two-leg buck converter: circuit constants, the averaged bilinear model
//! `K·ẋ = (A0 + d·A1)·x + (B0 + d·B1)·w`, `y = C·x`, and its equilibria.
//!
//! State order is `[I_L1, I_L2, V_C1, V_C2, V_C_IN, V_C_out]`, the exogenous
//! input is `w = [V_IN, δR]`.

use std::path::Path;

use crate::error::{domain, Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::scalar::Real;

pub const STATES: usize = 6;
pub const INPUTS: usize = 2;

pub const STATE_LABELS: [&str; STATES] = ["I_L1", "I_L2", "V_C1", "V_C2", "V_C_IN", "V_C_out"];
pub const INPUT_LABELS: [&str; INPUTS] = ["V_IN", "delta_R"];

pub const I_L1: usize = 0;
pub const I_L2: usize = 1;
pub const V_C1: usize = 2;
pub const V_C2: usize = 3;
pub const V_C_IN: usize = 4;
pub const V_OUT: usize = 5;

pub type State<T> = [T; STATES];

/// Physical constants of the converter, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParameters<T> {
    pub r_var_nominal: T,
    pub l1: T,
    pub l2: T,
    pub c1: T,
    pub c2: T,
    pub r1: T,
    pub r2: T,
    pub v_in_nominal: T,
    pub c_in: T,
    pub r_c: T,
    pub c_out: T,
    pub r_in: T,
    pub r_l1: T,
    pub r_l2: T,
    pub r_c1: T,
    pub r_c2: T,
    pub r_mos_on: T,
    pub tau_meas: T,
    pub tau_comm: T,
    /// Carrier (switching) period.
    pub t_s: T,
    /// Duty-command update period.
    pub t_pwm: T,
    /// PWM comparator time resolution.
    pub dt_pwm: T,
    /// Controller sample time.
    pub t_samp: T,
}

macro_rules! param_table {
    ($($field:ident),* $(,)?) => {
        impl<T: Real> CircuitParameters<T> {
            /// Every configurable key, in file order.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            fn slot(&mut self, key: &str) -> Option<&mut T> {
                match key {
                    $(stringify!($field) => Some(&mut self.$field),)*
                    _ => None,
                }
            }

            /// `(key, value)` pairs in [`Self::KEYS`] order.
            pub fn entries(&self) -> Vec<(&'static str, T)> {
                vec![$((stringify!($field), self.$field)),*]
            }
        }
    };
}

param_table!(
    r_var_nominal,
    l1,
    l2,
    c1,
    c2,
    r1,
    r2,
    v_in_nominal,
    c_in,
    r_c,
    c_out,
    r_in,
    r_l1,
    r_l2,
    r_c1,
    r_c2,
    r_mos_on,
    tau_meas,
    tau_comm,
    t_s,
    t_pwm,
    dt_pwm,
    t_samp,
);

impl<T: Real> Default for CircuitParameters<T> {
    /// OwnTech two-leg converter values.
    fn default() -> Self {
        let l = T::lit;
        Self {
            r_var_nominal: l(2.8),
            l1: l(33e-6),
            l2: l(33e-6),
            c1: l(47e-6),
            c2: l(47e-6),
            r1: l(1.0),
            r2: l(1.0),
            v_in_nominal: l(40.0),
            c_in: l(120e-6),
            r_c: l(0.1),
            c_out: l(240e-6),
            r_in: l(0.1),
            r_l1: l(0.02),
            r_l2: l(0.02),
            r_c1: l(0.4),
            r_c2: l(0.4),
            r_mos_on: l(0.02),
            tau_meas: l(0.2e-6),
            tau_comm: l(2.5e-6),
            t_s: l(5e-6),
            t_pwm: l(100e-6),
            dt_pwm: l(0.1e-6),
            t_samp: l(100e-6),
        }
    }
}

impl<T: Real> CircuitParameters<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_var_nominal", self.r_var_nominal),
            ("l1", self.l1),
            ("l2", self.l2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("c_in", self.c_in),
            ("r_c", self.r_c),
            ("c_out", self.c_out),
            ("r_in", self.r_in),
            ("r_l1", self.r_l1),
            ("r_l2", self.r_l2),
            ("r_c1", self.r_c1),
            ("r_c2", self.r_c2),
            ("r_mos_on", self.r_mos_on),
            ("t_s", self.t_s),
            ("t_pwm", self.t_pwm),
            ("dt_pwm", self.dt_pwm),
            ("t_samp", self.t_samp),
        ];
        for (name, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(domain(name, format!("must be strictly positive, got {v}")));
            }
        }
        if !self.v_in_nominal.is_finite() {
            return Err(domain("v_in_nominal", "must be finite"));
        }
        for (name, v) in [("tau_meas", self.tau_meas), ("tau_comm", self.tau_comm)] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(domain(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.dt_pwm > self.t_s || self.t_s > self.t_samp {
            return Err(domain("t_s", "require dt_pwm <= t_s <= t_samp"));
        }
        Ok(())
    }

    /// Overrides a single parameter by key.
    pub fn set(&mut self, key: &str, value: T) -> Result<()> {
        match self.slot(key) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(domain(key, "unknown circuit parameter")),
        }
    }

    /// Parses flat `key = value` text. Blank lines and `#` comments are
    /// ignored; missing keys keep their current value; unknown keys fail.
    pub fn apply_config_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::Config {
                path: origin.to_string(),
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let key = key.trim();
            let value: T = value
                .trim()
                .parse()
                .map_err(|_| err(format!("cannot parse value for `{key}`")))?;
            let slot = self
                .slot(key)
                .ok_or_else(|| err(format!("unknown key `{key}`")))?;
            *slot = value;
        }
        Ok(())
    }

    /// Defaults overlaid with a configuration file.
    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut p = Self::default();
        p.apply_config_text(&text, &path.display().to_string())?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_config_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v:e}\n"))
            .collect()
    }
}

/// Parallel combination `ra·rb/(ra+rb)`.
pub fn parallel<T: Real>(ra: T, rb: T) -> Result<T> {
    if !(ra > T::zero() && rb > T::zero()) {
        return Err(domain(
            "parallel",
            format!("resistances must be positive ({ra}, {rb})"),
        ));
    }
    Ok(ra * rb / (ra + rb))
}

/// Averaged bilinear model matrices, dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearModel<T> {
    pub k_mat: SquareMatrix<T, STATES>,
    pub a0: SquareMatrix<T, STATES>,
    pub a1: SquareMatrix<T, STATES>,
    pub b0: [[T; INPUTS]; STATES],
    pub b1: [[T; INPUTS]; STATES],
    pub c_row: [T; STATES],
}

impl<T: Real> BilinearModel<T> {
    pub fn state_labels(&self) -> [&'static str; STATES] {
        STATE_LABELS
    }

    pub fn input_labels(&self) -> [&'static str; INPUTS] {
        INPUT_LABELS
    }

    /// `A0 + d·A1`.
    pub fn system_matrix(&self, d: T) -> SquareMatrix<T, STATES> {
        let mut a = self.a0;
        for (row, r1) in a.iter_mut().zip(&self.a1) {
            for (v, &v1) in row.iter_mut().zip(r1) {
                *v = *v + d * v1;
            }
        }
        a
    }

    /// `(B0 + d·B1)·w`.
    pub fn input_term(&self, d: T, w: &[T; INPUTS]) -> [T; STATES] {
        let mut out = [T::zero(); STATES];
        for i in 0..STATES {
            for j in 0..INPUTS {
                out[i] = out[i] + (self.b0[i][j] + d * self.b1[i][j]) * w[j];
            }
        }
        out
    }

    /// Right-hand side `ẋ` at duty `d`.
    pub fn derivative(&self, x: &State<T>, d: T, w: &[T; INPUTS]) -> State<T> {
        let ax = linalg::mat_vec(&self.system_matrix(d), x);
        let bw = self.input_term(d, w);
        let mut dx = [T::zero(); STATES];
        for i in 0..STATES {
            dx[i] = (ax[i] + bw[i]) / self.k_mat[i][i];
        }
        dx
    }

    pub fn output(&self, x: &State<T>) -> T {
        x.iter()
            .zip(&self.c_row)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    /// Checks the structural invariants of the model.
    pub fn check_structure(&self) -> Result<()> {
        for i in 0..STATES {
            for j in 0..STATES {
                if i != j && self.k_mat[i][j] != T::zero() {
                    return Err(domain("k_mat", "must be diagonal"));
                }
            }
            if !(self.k_mat[i][i] > T::zero()) {
                return Err(domain("k_mat", "diagonal must be positive"));
            }
        }
        for row in [V_C1, V_C2, V_OUT] {
            if self.a1[row].iter().any(|&v| v != T::zero()) {
                return Err(domain("a1", format!("row {} must be zero", row + 1)));
            }
        }
        let mut c = [T::zero(); STATES];
        c[V_OUT] = T::one();
        if self.c_row != c {
            return Err(domain("c_row", "must select V_C_out"));
        }
        for (i, row) in self.b1.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let allowed = j == 0 && (i == I_L1 || i == I_L2);
                if !allowed && v != T::zero() {
                    return Err(domain(
                        "b1",
                        format!("unexpected entry ({}, {})", i + 1, j + 1),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Shared sub-expressions of the model matrices.
struct Terms<T> {
    ron1: T,
    ron2: T,
    leg1_par: T,
    leg2_par: T,
    g1: T,
    g2: T,
    k1_r: T,
    k1_c: T,
    k2_r: T,
    k2_c: T,
    in_par: T,
    g_in: T,
    src_share: T,
    cap_share: T,
}

impl<T: Real> Terms<T> {
    fn new(p: &CircuitParameters<T>) -> Result<Self> {
        p.validate()?;
        let s1 = p.r_c1 + p.r1;
        let s2 = p.r_c2 + p.r2;
        let sin = p.r_c + p.r_in;
        Ok(Self {
            ron1: p.r_l1 + p.r_mos_on,
            ron2: p.r_l2 + p.r_mos_on,
            leg1_par: parallel(p.r_c1, p.r1)?,
            leg2_par: parallel(p.r2, p.r_c2)?,
            g1: T::one() / s1,
            g2: T::one() / s2,
            k1_r: p.r1 / s1,
            k1_c: p.r_c1 / s1,
            k2_r: p.r2 / s2,
            k2_c: p.r_c2 / s2,
            in_par: parallel(p.r_c, p.r_in)?,
            g_in: T::one() / sin,
            src_share: p.r_c / sin,
            cap_share: p.r_in / sin,
        })
    }

    fn shared(
        &self,
        p: &CircuitParameters<T>,
    ) -> (SquareMatrix<T, STATES>, SquareMatrix<T, STATES>) {
        let z = T::zero();
        let k = [
            [p.l1, z, z, z, z, z],
            [z, p.l2, z, z, z, z],
            [z, z, p.c1, z, z, z],
            [z, z, z, p.c2, z, z],
            [z, z, z, z, p.c_in, z],
            [z, z, z, z, z, p.c_out],
        ];
        let a0 = [
            [
                -(self.ron1 + self.leg1_par),
                z,
                -self.k1_r,
                z,
                z,
                -self.k1_c,
            ],
            [
                z,
                -(self.ron2 + self.leg2_par),
                z,
                -self.k2_r,
                z,
                -self.k2_c,
            ],
            [self.k1_r, z, -self.g1, z, z, self.g1],
            [z, self.k2_r, z, -self.g2, z, self.g2],
            [z, z, z, z, -self.g_in, z],
            [
                self.k1_c,
                self.k2_c,
                self.g1,
                self.g2,
                z,
                -(self.g1 + self.g2 + T::one() / p.r_var_nominal),
            ],
        ];
        (k, a0)
    }
}

/// Builds the averaged model from circuit constants.
///
/// The input-side entries follow the circuit behind the printed matrix table:
/// the source (`V_IN`, `R_IN`) and the input capacitor branch (`V_C_IN`,
/// `R_C`) form a Thévenin node whose voltage reaches a leg inductor only while
/// that leg conducts, and the switch current `d·(I_L1 + I_L2)` is drawn from it.
/// Rows 3, 4 and 6 and the `K`, `C` matrices are identical to the table.
pub fn build_model<T: Real>(p: &CircuitParameters<T>) -> Result<BilinearModel<T>> {
    let t = Terms::new(p)?;
    let z = T::zero();
    let (k_mat, a0) = t.shared(p);
    let a1 = [
        [-t.in_par, -t.in_par, z, z, t.cap_share, z],
        [-t.in_par, -t.in_par, z, z, t.cap_share, z],
        [z; STATES],
        [z; STATES],
        [-t.cap_share, -t.cap_share, z, z, z, z],
        [z; STATES],
    ];
    let b0 = [[z, z], [z, z], [z, z], [z, z], [t.g_in, z], [z, T::one()]];
    let b1 = [
        [t.src_share, z],
        [t.src_share, z],
        [z, z],
        [z, z],
        [z, z],
        [z, z],
    ];
    Ok(BilinearModel {
        k_mat,
        a0,
        a1,
        b0,
        b1,
        c_row: [z, z, z, z, z, T::one()],
    })
}

/// The matrix table exactly as printed, kept for comparison only: it places
/// the source in `B0` rows 1–2, the input-capacitor coupling in column 4
/// of row 5 and flips the sign of `A1(2,2)`. Its equilibria exceed `d·V_IN`
/// and `A0` is singular, so it is not used by the simulators.
pub fn build_model_as_printed<T: Real>(p: &CircuitParameters<T>) -> Result<BilinearModel<T>> {
    let t = Terms::new(p)?;
    let z = T::zero();
    let (k_mat, mut a0) = t.shared(p);
    a0[V_C_IN] = [z, z, z, -t.g_in, z, z];
    let a1 = [
        [-t.in_par, -t.in_par, z, z, t.k1_c, z],
        [-t.in_par, t.in_par, z, z, t.k2_c, z],
        [z; STATES],
        [z; STATES],
        [-t.cap_share, -t.cap_share, z, t.g_in, -t.g_in, z],
        [z; STATES],
    ];
    let b0 = [
        [t.src_share, z],
        [t.src_share, z],
        [z, z],
        [z, z],
        [t.g_in, z],
        [z, T::one()],
    ];
    let b1 = [
        [t.src_share, z],
        [t.src_share, z],
        [z, z],
        [z, z],
        [z, z],
        [z, z],
    ];
    Ok(BilinearModel {
        k_mat,
        a0,
        a1,
        b0,
        b1,
        c_row: [z, z, z, z, z, T::one()],
    })
}

/// Steady state of the averaged model at constant duty `d` and input `w`.
pub fn equilibrium<T: Real>(m: &BilinearModel<T>, d: T, w: &[T; INPUTS]) -> Result<State<T>> {
    if !(d >= T::zero() && d <= T::one()) {
        return Err(Error::Domain(format!("duty {d} outside [0, 1]")));
    }
    let a = m.system_matrix(d);
    let rhs = m.input_term(d, w).map(|v| -v);
    linalg::solve(&a, &rhs)
}
