//! Learnable linear-spline activations `σ_c` and their convex integrals `ψ_c`.
//!
//! Knots sit at `t_k = kΔ` for `k = -K..=K` with `σ(t_0) = 0`. Each channel
//! stores `2K` slopes: `d_j` is the slope of `σ` on the segment between
//! `t_{j-1}` and `t_j` (`j > 0`) or between `t_j` and `t_{j+1}` (`j < 0`); the
//! outermost slopes also drive the linear extension past `t_{±K}`. Keeping
//! every slope in `[m_min, m_max]` makes `σ` strictly increasing with
//! Lipschitz constant `m_max`, hence `ψ` strongly convex.

/// `s² · [s > 0]`
#[inline]
pub fn requ(s: f64) -> f64 {
    if s > 0.0 {
        s * s
    } else {
        0.0
    }
}

#[inline]
fn relu(s: f64) -> f64 {
    s.max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBank {
    channels: usize,
    k: usize,
    delta: f64,
    slopes: Vec<f64>,
    pub m_min: f64,
    pub m_max: f64,
}

impl SplineBank {
    /// All slopes equal to one: `σ(t) = t`, `ψ(t) = t²/2`.
    pub fn identity(channels: usize, k: usize, delta: f64, m_min: f64, m_max: f64) -> Self {
        Self {
            channels,
            k,
            delta,
            slopes: vec![1.0; channels * 2 * k],
            m_min,
            m_max,
        }
    }

    pub fn from_slopes(
        channels: usize,
        k: usize,
        delta: f64,
        slopes: Vec<f64>,
        m_min: f64,
        m_max: f64,
    ) -> Self {
        assert_eq!(slopes.len(), channels * 2 * k, "slope table size");
        assert!(k >= 1 && delta > 0.0);
        Self {
            channels,
            k,
            delta,
            slopes,
            m_min,
            m_max,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Knots per side; the bank has `2K + 1` knots.
    pub fn half_knots(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn slopes_mut(&mut self) -> &mut [f64] {
        &mut self.slopes
    }

    /// Flat index of `d_j` (`j ∈ ±1..=±K`) for a channel.
    #[inline]
    pub fn index(&self, channel: usize, j: i64) -> usize {
        debug_assert!(j != 0 && j.unsigned_abs() as usize <= self.k);
        let k = self.k as i64;
        let local = if j < 0 { j + k } else { k + j - 1 };
        channel * 2 * self.k + local as usize
    }

    /// `d_j`, with `d_0 = 0`.
    #[inline]
    pub fn slope(&self, channel: usize, j: i64) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.slopes[self.index(channel, j)]
        }
    }

    #[inline]
    fn knot(&self, k: i64) -> f64 {
        k as f64 * self.delta
    }

    /// `σ_c(t)` as a sum of ReLUs.
    pub fn sigma_eval(&self, channel: usize, t: f64) -> f64 {
        let k = self.k as i64;
        if t >= 0.0 {
            (1..=k)
                .map(|j| {
                    (self.slope(channel, j) - self.slope(channel, j - 1))
                        * relu(t - self.knot(j - 1))
                })
                .sum()
        } else {
            -(-k..=-1)
                .map(|j| {
                    (self.slope(channel, j) - self.slope(channel, j + 1))
                        * relu(self.knot(j + 1) - t)
                })
                .sum::<f64>()
        }
    }

    /// `ψ_c(t) = ∫₀ᵗ σ_c` as a sum of rectified quadratic units.
    pub fn psi_eval(&self, channel: usize, t: f64) -> f64 {
        let k = self.k as i64;
        let s: f64 = if t >= 0.0 {
            (1..=k)
                .map(|j| {
                    (self.slope(channel, j) - self.slope(channel, j - 1))
                        * requ(t - self.knot(j - 1))
                })
                .sum()
        } else {
            (-k..=-1)
                .map(|j| {
                    (self.slope(channel, j) - self.slope(channel, j + 1))
                        * requ(self.knot(j + 1) - t)
                })
                .sum()
        };
        0.5 * s
    }

    /// Accumulate `weight · ∂ψ_c(t)/∂d_j` into the channel's slice of `grad`.
    pub fn psi_slope_grad_acc(&self, channel: usize, t: f64, weight: f64, grad: &mut [f64]) {
        let k = self.k as i64;
        if t >= 0.0 {
            let top = ((t / self.delta).floor() as i64 + 1).min(k);
            for j in 1..=top {
                let mut v = requ(t - self.knot(j - 1));
                if j < k {
                    v -= requ(t - self.knot(j));
                }
                grad[self.index(channel, j)] += weight * 0.5 * v;
            }
        } else {
            let top = ((-t / self.delta).floor() as i64 + 1).min(k);
            for m in 1..=top {
                let j = -m;
                let mut v = requ(self.knot(j + 1) - t);
                if j > -k {
                    v -= requ(self.knot(j) - t);
                }
                grad[self.index(channel, j)] += weight * 0.5 * v;
            }
        }
    }

    /// `weight · Σ_t ∂ψ_c(t)/∂d_j` over a batch of points, accumulated into
    /// `grad` in `O(len + K)` via per-segment sums.
    pub fn psi_slope_grad_batch(&self, channel: usize, ts: &[f64], weight: f64, grad: &mut [f64]) {
        let k = self.k;
        // [side][segment]: Σ ½(s − t_{m−1})², Σ s, count
        let mut quad = [vec![0.0; k + 1], vec![0.0; k + 1]];
        let mut sum = [vec![0.0; k + 2], vec![0.0; k + 2]];
        let mut cnt = [vec![0.0; k + 2], vec![0.0; k + 2]];
        for &t in ts {
            let (side, s) = if t >= 0.0 { (1, t) } else { (0, -t) };
            let m = ((s / self.delta) as usize).min(k - 1) + 1;
            let r = s - (m - 1) as f64 * self.delta;
            quad[side][m] += 0.5 * r * r;
            sum[side][m] += s;
            cnt[side][m] += 1.0;
        }
        let d = self.delta;
        for side in 0..2 {
            let (mut s_above, mut n_above) = (0.0, 0.0);
            for m in (1..=k).rev() {
                let g = quad[side][m] + d * s_above - 0.5 * d * d * (2 * m - 1) as f64 * n_above;
                let j = if side == 1 { m as i64 } else { -(m as i64) };
                grad[self.index(channel, j)] += weight * g;
                s_above += sum[side][m];
                n_above += cnt[side][m];
            }
        }
    }

    /// Clamp every slope into `[m_min, m_max]`.
    pub fn project(&mut self) {
        let (lo, hi) = (self.m_min, self.m_max);
        self.slopes.iter_mut().for_each(|d| *d = d.clamp(lo, hi));
    }

    pub fn is_feasible(&self) -> bool {
        self.slopes
            .iter()
            .all(|&d| d >= self.m_min && d <= self.m_max)
    }

    pub fn table(&self) -> SplineTable {
        SplineTable::new(self)
    }
}

/// Knot values and integrals, for constant-time evaluation of `(ψ, σ)`.
#[derive(Debug, Clone)]
pub struct SplineTable {
    k: usize,
    delta: f64,
    inv_delta: f64,
    /// per channel, `2K + 1` entries indexed by `k + K`
    values: Vec<f64>,
    integrals: Vec<f64>,
    slopes: Vec<f64>,
}

impl SplineTable {
    fn new(bank: &SplineBank) -> Self {
        let k = bank.k;
        let n = 2 * k + 1;
        let mut values = vec![0.0; bank.channels * n];
        let mut integrals = vec![0.0; bank.channels * n];
        for c in 0..bank.channels {
            let base = c * n + k;
            for j in 1..=k as i64 {
                let d = bank.slope(c, j);
                let prev = base + j as usize - 1;
                values[prev + 1] = values[prev] + d * bank.delta;
                integrals[prev + 1] =
                    integrals[prev] + values[prev] * bank.delta + 0.5 * d * bank.delta * bank.delta;
                let d = bank.slope(c, -j);
                let prev = base - (j as usize - 1);
                values[prev - 1] = values[prev] - d * bank.delta;
                integrals[prev - 1] =
                    integrals[prev] - values[prev] * bank.delta + 0.5 * d * bank.delta * bank.delta;
            }
        }
        Self {
            k,
            delta: bank.delta,
            inv_delta: 1.0 / bank.delta,
            values,
            integrals,
            slopes: bank.slopes.clone(),
        }
    }

    /// `(ψ_c(t), σ_c(t))`
    #[inline]
    pub fn eval(&self, channel: usize, t: f64) -> (f64, f64) {
        let k = self.k;
        let n = 2 * k + 1;
        let base = channel * n + k;
        let sbase = channel * 2 * k;
        let (knot, slope) = if t >= 0.0 {
            let l = ((t * self.inv_delta) as usize).min(k);
            let slope = self.slopes[sbase + k + l.min(k - 1)];
            (base + l, slope)
        } else {
            let l = ((-t * self.inv_delta) as usize).min(k);
            let slope = self.slopes[sbase + k - 1 - l.min(k - 1)];
            (base - l, slope)
        };
        let off = knot as f64 - base as f64;
        let s = t - off * self.delta;
        let v = self.values[knot];
        (self.integrals[knot] + s * (v + 0.5 * slope * s), v + slope * s)
    }
}
