//! Interior points that remember their distance to both interval ends.
//!
//! Endpoint-singular functions lose all relative precision when evaluated at
//! `hi − t` for tiny `t`. Carrying `t` explicitly lets them use it directly.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub x: f64,
    /// x − lo (infinite when lo = −∞).
    pub from_lo: f64,
    /// hi − x (infinite when hi = +∞).
    pub to_hi: f64,
}

impl Probe {
    pub fn at(x: f64, lo: f64, hi: f64) -> Self {
        Self { x, from_lo: x - lo, to_hi: hi - x }
    }

    /// The point `lo + t`.
    pub fn near_lo(lo: f64, hi: f64, t: f64) -> Self {
        Self { x: lo + t, from_lo: t, to_hi: hi - lo - t }
    }

    /// The point `hi − t`.
    pub fn near_hi(lo: f64, hi: f64, t: f64) -> Self {
        Self { x: hi - t, from_lo: hi - lo - t, to_hi: t }
    }

    /// Re-expresses the probe relative to a sub- or super-interval, keeping
    /// the exact gap wherever an end is shared.
    pub fn rebase(self, old: (f64, f64), new: (f64, f64)) -> Self {
        Self {
            x: self.x,
            from_lo: if new.0 == old.0 { self.from_lo } else { self.x - new.0 },
            to_hi: if new.1 == old.1 { self.to_hi } else { new.1 - self.x },
        }
    }

    /// x ↦ −x, interval (lo, hi) ↦ (−hi, −lo).
    pub fn reflect(self) -> Self {
        Self { x: -self.x, from_lo: self.to_hi, to_hi: self.from_lo }
    }

    /// Distance to the nearer end.
    pub fn gap(&self) -> f64 {
        self.from_lo.min(self.to_hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rebase_keeps_shared_gap() {
        let p = Probe::near_hi(-1.0, 1.0, 1e-15);
        let r = p.rebase((-1.0, 1.0), (0.0, 1.0));
        assert_eq!(r.to_hi, 1e-15);
        assert_eq!(r.from_lo, p.x);
        let f = p.reflect();
        assert_eq!(f.from_lo, 1e-15);
        assert_eq!(f.x, -p.x);
    }
}
