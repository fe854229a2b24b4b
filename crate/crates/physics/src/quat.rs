//! SU(2) elements as unit quaternions: q = (w, v) ↔ w·I + i v·σ.

use std::ops::Mul;

use nvq_core::matcore::{C64, CMat};

pub type V3 = [f64; 3];

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub v: V3,
}

impl Quat {
    pub const ONE: Quat = Quat { w: 1.0, v: [0.0; 3] };

    /// exp(i a·σ).
    pub fn exp(a: V3) -> Quat {
        let th = norm(a);
        if th == 0.0 {
            return Quat::ONE;
        }
        let (s, c) = th.sin_cos();
        Quat { w: c, v: scale(a, s / th) }
    }

    pub fn conj(self) -> Quat {
        Quat { w: self.w, v: scale(self.v, -1.0) }
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + dot(self.v, self.v)).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, v: scale(self.v, 1.0 / n) }
    }

    /// U (n·σ) U† as a vector.
    pub fn rotate(self, n: V3) -> V3 {
        let (w, v) = (self.w, self.v);
        let a = scale(n, w * w - dot(v, v));
        let b = scale(cross(v, n), -2.0 * w);
        let c = scale(v, 2.0 * dot(v, n));
        add(add(a, b), c)
    }

    pub fn matrix(self) -> CMat {
        let [x, y, z] = self.v;
        CMat::from_row_slice(
            2,
            2,
            &[C64::new(self.w, z), C64::new(y, x), C64::new(-y, x), C64::new(self.w, -z)],
        )
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - dot(self.v, o.v),
            v: add(add(scale(o.v, self.w), scale(self.v, o.w)), scale(cross(self.v, o.v), -1.0)),
        }
    }
}
