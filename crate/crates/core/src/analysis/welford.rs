//! Streaming mean/variance with an order-fixed parallel merge.

/// Welford accumulator; [`merge`](Self::merge) is Chan's pairwise update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, o: &Welford) -> Welford {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let (na, nb) = (self.n as f64, o.n as f64);
        Welford {
            n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + o.m2 + d * d * na * nb / n as f64,
        }
    }

    /// Sample variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean; 0 for fewer than two samples.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Merges equal-length accumulator vectors element-wise.
pub fn merge_all(a: &[Welford], b: &[Welford]) -> Vec<Welford> {
    a.iter().zip(b).map(|(x, y)| x.merge(y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass() {
        let xs: Vec<f64> = (0..101).map(|i| ((i * 37) % 17) as f64 * 0.3 + 1e6).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let mut a = Welford::default();
        let mut b = Welford::default();
        for (i, &x) in xs.iter().enumerate() {
            if i < 40 { a.push(x) } else { b.push(x) }
        }
        let w = a.merge(&b);
        assert_eq!(w.n, 101);
        assert!((w.mean - mean).abs() < 1e-9);
        assert!((w.variance() - var).abs() < 1e-9 * var);
    }

    #[test]
    fn constant_samples_have_zero_spread() {
        let mut w = Welford::default();
        for _ in 0..10 {
            w.push(0.1);
        }
        assert_eq!(w.m2, 0.0);
        assert_eq!(w.stderr(), 0.0);
        assert_eq!(Welford::default().stderr(), 0.0);
    }
}
