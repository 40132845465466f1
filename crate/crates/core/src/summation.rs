/// Sizes at or above this use compensated accumulation.
pub const COMPENSATED_THRESHOLD: usize = 1024;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Running sum that is either naive or compensated, chosen once per problem size.
#[derive(Debug, Clone, Copy)]
pub enum Accumulator {
    Plain(f64),
    Compensated(Neumaier),
}

impl Accumulator {
    #[inline]
    pub fn for_size(n: usize) -> Self {
        if n >= COMPENSATED_THRESHOLD {
            Accumulator::Compensated(Neumaier::default())
        } else {
            Accumulator::Plain(0.0)
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        match self {
            Accumulator::Plain(s) => *s += x,
            Accumulator::Compensated(k) => k.add(x),
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        match self {
            Accumulator::Plain(s) => *s,
            Accumulator::Compensated(k) => k.value(),
        }
    }
}

/// Sum of `f(i)` over `range`, in order.
pub fn sum_by(n: usize, range: impl Iterator<Item = usize>, f: impl Fn(usize) -> f64) -> f64 {
    let mut acc = Accumulator::for_size(n);
    for i in range {
        acc.add(f(i));
    }
    acc.value()
}
