//! Compensated (Neumaier) summation for real and complex accumulators.

use crate::C64;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator in, keeping both compensation terms.
    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Complex Neumaier sum: independent accumulators for real and imaginary parts.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierC {
    re: Neumaier,
    im: Neumaier,
}

impl NeumaierC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: C64) {
        self.re.add(v.re);
        self.im.add(v.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of an iterator of reals.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Pairwise reduction in index order. The tree shape depends only on
/// `items.len()`, so results do not depend on how the items were produced.
pub fn pairwise<T: Clone>(items: &[T], combine: &impl Fn(&T, &T) -> T) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        n => {
            let (l, r) = items.split_at(n / 2);
            let a = pairwise(l, combine)?;
            let b = pairwise(r, combine)?;
            Some(combine(&a, &b))
        }
    }
}
