//! Double-double accumulation: an unevaluated sum `hi + lo` carrying about
//! 106 bits of precision, rounded to one f64 at the very end. Sums of
//! identical values survive exactly, which several collapse identities in
//! the attribution methods rely on.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

impl Dd {
    pub(crate) const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub(crate) fn add(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = quick_two_sum(s, self.lo + e);
        Dd { hi, lo }
    }

    pub(crate) fn div_scalar(self, m: f64) -> Dd {
        let q1 = self.hi / m;
        // hi - q1 * m is exact via fused multiply-add.
        let r = (-q1).mul_add(m, self.hi);
        let q2 = (r + self.lo) / m;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub(crate) fn mul_scalar(self, c: f64) -> Dd {
        let p = self.hi * c;
        let e = self.hi.mul_add(c, -p);
        let (hi, lo) = quick_two_sum(p, self.lo.mul_add(c, e));
        Dd { hi, lo }
    }

    pub(crate) fn value(self) -> f64 {
        self.hi + self.lo
    }
}
