use super::CoincidenceModel;

/// Kernel truncation in units of σ.
const TRUNCATION: f64 = 6.0;
/// Simpson panels across the full ±6σ window.
const PANELS: usize = 480;

/// A model blurred by Gaussian timing jitter of standard deviation `sigma`.
#[derive(Clone, Debug)]
pub struct Jittered<M> {
    pub inner: M,
    pub sigma: f64,
}

/// Convolves a model with a normalized Gaussian of width `sigma` (ns).
/// `sigma = 0` leaves the model unchanged.
pub fn convolve_jitter<M: CoincidenceModel>(model: M, sigma: f64) -> Jittered<M> {
    assert!(sigma >= 0.0, "jitter must be non-negative");
    Jittered { inner: model, sigma }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

impl<M: CoincidenceModel> CoincidenceModel for Jittered<M> {
    fn value(&self, dt: f64) -> f64 {
        if self.sigma == 0.0 {
            return self.inner.value(dt);
        }
        let half = TRUNCATION * self.sigma;
        let (lo, hi) = (dt - half, dt + half);
        let mut cuts = vec![lo];
        let mut inner: Vec<f64> = self
            .inner
            .breakpoints()
            .into_iter()
            .filter(|b| *b > lo && *b < hi)
            .collect();
        inner.sort_by(f64::total_cmp);
        cuts.extend(inner);
        cuts.push(hi);

        let kernel = |u: f64| {
            let z = (dt - u) / self.sigma;
            (-0.5 * z * z).exp()
        };
        let (mut num, mut den) = (0.0, 0.0);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            // interior cuts are approached from inside the segment
            let eps = 1e-12 * (b - a).max(1.0);
            let (a_in, b_in) = (a + if a == lo { 0.0 } else { eps }, b - if b == hi { 0.0 } else { eps });
            let panels = ((PANELS as f64 * (b - a) / (2.0 * half)).ceil() as usize).max(8);
            num += simpson(|u| kernel(u) * self.inner.value(u), a_in, b_in, panels);
            den += simpson(kernel, a_in, b_in, panels);
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timecorr::{BeatModelParams, HYPERFINE_BEAT_RAD_PER_NS};

    struct Fringe {
        visibility: f64,
        delta: f64,
    }

    impl CoincidenceModel for Fringe {
        fn value(&self, dt: f64) -> f64 {
            1.0 + self.visibility * (self.delta * dt).cos()
        }
    }

    fn beats() -> BeatModelParams {
        BeatModelParams {
            g0: 10.0,
            tau_x: 5.6,
            tau_y: 13.1,
            r: 1.0,
            phi: 0.0,
            delta: HYPERFINE_BEAT_RAD_PER_NS,
            background: 1.0,
            offset: 0.0,
        }
    }

    #[test]
    fn zero_sigma_is_identity() {
        let m = beats();
        let j = convolve_jitter(m, 0.0);
        for dt in [-1.0, 0.0, 0.3, 5.0] {
            assert_eq!(j.value(dt), m.value(dt));
        }
    }

    #[test]
    fn fringe_contrast_follows_gaussian_factor() {
        let delta = HYPERFINE_BEAT_RAD_PER_NS;
        for sigma in [0.04, 0.5, 1.0] {
            let j = convolve_jitter(Fringe { visibility: 0.8, delta }, sigma);
            // the peak at dt = 0 carries 1 + V·e^{−δ²σ²/2}
            let want = 1.0 + 0.8 * (-0.5 * delta * delta * sigma * sigma).exp();
            assert!((j.value(0.0) - want).abs() < 1e-7, "sigma {sigma}");
        }
    }
}
