use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathMeta {
    pub system: String,
    pub seed: u64,
    pub stream: u64,
    /// Step at which the state first exceeded the escape magnitude, if it did.
    pub escaped_at: Option<usize>,
}

/// One realization on a time grid. States are stored row-major, `dim` values
/// per timestamp.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub dim: usize,
    pub states: Vec<f64>,
    pub meta: PathMeta,
}

impl SamplePath {
    pub fn new(dim: usize, meta: PathMeta) -> Self {
        Self {
            times: Vec::new(),
            dim,
            states: Vec::new(),
            meta,
        }
    }

    pub fn push(&mut self, t: f64, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.states.extend_from_slice(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn escaped(&self) -> bool {
        self.meta.escaped_at.is_some()
    }

    /// Component `k` of every recorded state.
    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.state(i)[k]).collect()
    }

    /// Trapezoidal integral of `f(state)` over the recorded grid.
    pub fn time_integral<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let vals: Vec<f64> = (0..self.len()).map(|i| f(self.state(i))).collect();
        trapezoid(&self.times, &vals)
    }

    /// Index of the last recorded time `<= t`.
    pub fn index_at(&self, t: f64) -> usize {
        match self
            .times
            .binary_search_by(|s| s.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }
}

pub fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Which steps of a simulation are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Record {
    /// Every `k`-th step (and always the final one).
    Every(usize),
    /// Only the initial and final states.
    Terminal,
}

impl Record {
    pub(crate) fn keep(&self, step: usize, last: usize) -> bool {
        step == 0
            || step == last
            || match *self {
                Record::Every(k) => step % k.max(1) == 0,
                Record::Terminal => false,
            }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> PathMeta {
        PathMeta {
            system: "t".into(),
            seed: 0,
            stream: 0,
            escaped_at: None,
        }
    }

    #[test]
    fn trapezoid_of_linear_path() {
        let mut p = SamplePath::new(1, meta());
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            p.push(t, &[t]);
        }
        assert!((p.time_integral(|s| s[0]) - 0.5).abs() < 1e-12);
        assert_eq!(p.index_at(0.55), 5);
        assert_eq!(p.index_at(1.0), 10);
    }

    #[test]
    fn record_keeps_endpoints() {
        assert!(Record::Terminal.keep(0, 9));
        assert!(Record::Terminal.keep(9, 9));
        assert!(!Record::Terminal.keep(3, 9));
        assert!(Record::Every(3).keep(3, 9));
        assert!(!Record::Every(3).keep(4, 9));
    }
}
