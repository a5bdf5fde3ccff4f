use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CoincidenceModel;
use crate::error::{Error, Result};
use crate::tomography::{poisson_draw, stream_rng};

/// Sub-samples per bin for the midpoint rule.
pub const SUBSAMPLES_PER_BIN: usize = 8;

/// Coincidence counts binned in detection delay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width: f64,
    pub t_start: f64,
    pub counts: Vec<u64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl CoincidenceHistogram {
    pub fn new(bin_width: f64, t_start: f64, counts: Vec<u64>) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bin width {bin_width} must be positive"
            )));
        }
        if counts.len() < 2 {
            return Err(Error::InvalidParameter("a histogram needs at least two bins".into()));
        }
        Ok(Self {
            bin_width,
            t_start,
            counts,
            metadata: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_start(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.bin_width
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_start(k) + 0.5 * self.bin_width
    }

    pub fn t_end(&self) -> f64 {
        self.bin_start(self.counts.len())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Multiplies every bin by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        Self {
            counts: self.counts.iter().map(|c| c * k).collect(),
            ..self.clone()
        }
    }
}

/// Mean of the model over `[start, start + width)` by the midpoint rule.
pub fn bin_average<M: CoincidenceModel + ?Sized>(model: &M, start: f64, width: f64) -> f64 {
    let h = width / SUBSAMPLES_PER_BIN as f64;
    (0..SUBSAMPLES_PER_BIN)
        .map(|k| model.value(start + (k as f64 + 0.5) * h))
        .sum::<f64>()
        / SUBSAMPLES_PER_BIN as f64
}

fn bin_count(bin_width: f64, t_range: (f64, f64)) -> Result<usize> {
    let (t0, t1) = t_range;
    if !(bin_width > 0.0) || !(t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "need bin_width > 0 and an ordered range, got {bin_width} and ({t0}, {t1})"
        )));
    }
    Ok(((t1 - t0) / bin_width).round().max(2.0) as usize)
}

/// Expected counts per bin.
pub fn expected_histogram<M: CoincidenceModel + ?Sized>(
    model: &M,
    bin_width: f64,
    t_range: (f64, f64),
) -> Result<Vec<f64>> {
    let n = bin_count(bin_width, t_range)?;
    Ok((0..n)
        .into_par_iter()
        .map(|k| bin_average(model, t_range.0 + k as f64 * bin_width, bin_width))
        .collect())
}

/// Poisson-sampled histogram; bin `k` draws from stream `k` of the seeded
/// generator.
pub fn simulate_histogram<M: CoincidenceModel + ?Sized>(
    model: &M,
    bin_width: f64,
    t_range: (f64, f64),
    seed: u64,
) -> Result<CoincidenceHistogram> {
    let expected = expected_histogram(model, bin_width, t_range)?;
    let counts = expected
        .par_iter()
        .enumerate()
        .map(|(k, mean)| poisson_draw(*mean, &mut stream_rng(seed, k as u64)) as u64)
        .collect();
    let mut h = CoincidenceHistogram::new(bin_width, t_range.0, counts)?;
    h.metadata.insert("seed".into(), seed.to_string());
    Ok(h)
}

/// Writes `bin_start_ns,counts` rows after `# key: value` metadata lines.
pub fn write_histogram_csv<W: Write>(mut w: W, h: &CoincidenceHistogram, metadata: &[(String, String)]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}: {v}")?;
    }
    writeln!(w, "bin_start_ns,counts")?;
    for (k, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{}", (h.bin_start(k) * 1e9).round() / 1e9, c)?;
    }
    Ok(())
}

/// Reads a histogram CSV. Bin starts must be evenly spaced; metadata lines
/// of the form `# key: value` are kept.
pub fn read_histogram_csv<R: Read>(mut r: R) -> Result<CoincidenceHistogram> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut metadata = BTreeMap::new();
    let mut starts = Vec::new();
    let mut counts = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = (idx + 1) as u64;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        if let Some(meta) = row.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once(':') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !saw_header {
            if row.replace(' ', "") != "bin_start_ns,counts" {
                return Err(Error::Parse {
                    line,
                    field: "header".into(),
                    message: "expected `bin_start_ns,counts`".into(),
                });
            }
            saw_header = true;
            continue;
        }
        let mut fields = row.split(',').map(str::trim);
        let (Some(t), Some(c), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line,
                field: "row".into(),
                message: "expected two fields".into(),
            });
        };
        let t: f64 = t
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| Error::Parse {
                line,
                field: "bin_start_ns".into(),
                message: format!("`{t}` is not a number"),
            })?;
        let c: u64 = c.parse().map_err(|_| Error::Parse {
            line,
            field: "counts".into(),
            message: format!("`{c}` is not a non-negative integer"),
        })?;
        starts.push((line, t));
        counts.push(c);
    }
    if counts.len() < 2 {
        return Err(Error::Parse {
            line: 0,
            field: "counts".into(),
            message: "a histogram needs at least two bins".into(),
        });
    }
    let width = starts[1].1 - starts[0].1;
    if !(width > 0.0) {
        return Err(Error::Parse {
            line: starts[1].0,
            field: "bin_start_ns".into(),
            message: "bin starts must increase".into(),
        });
    }
    for w in starts.windows(2) {
        let step = w[1].1 - w[0].1;
        if (step - width).abs() > 1e-6 * width.max(1.0) {
            return Err(Error::Parse {
                line: w[1].0,
                field: "bin_start_ns".into(),
                message: "bins are not evenly spaced".into(),
            });
        }
    }
    let mut h = CoincidenceHistogram::new(width, starts[0].1, counts)?;
    h.metadata = metadata;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timecorr::SinglePathParams;

    fn model(g0: f64, bg: f64) -> SinglePathParams {
        SinglePathParams {
            g0,
            tau_r: 3.1,
            tau_d: 5.6,
            background: bg,
            offset: 0.0,
        }
    }

    #[test]
    fn zero_model_gives_empty_histogram() {
        let h = simulate_histogram(&model(0.0, 0.0), 1.0, (-20.0, 40.0), 5).unwrap();
        assert_eq!(h.len(), 60);
        assert_eq!(h.total(), 0);
    }

    #[test]
    fn seeded_reproducibility() {
        let m = model(500.0, 3.0);
        let a = simulate_histogram(&m, 1.0, (-20.0, 40.0), 11).unwrap();
        let b = simulate_histogram(&m, 1.0, (-20.0, 40.0), 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_histogram(&m, 1.0, (-20.0, 40.0), 12).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn bin_average_integrates_exponential() {
        // exact mean of e^{−t/τ} over [0, 1)
        let m = model(1.0, 0.0);
        let exact = 5.6 * (1.0 - (-1.0 / 5.6f64).exp());
        assert!((bin_average(&m, 0.0, 1.0) - exact).abs() < 1e-3);
    }

    #[test]
    fn invalid_ranges() {
        assert!(simulate_histogram(&model(1.0, 0.0), 0.0, (0.0, 1.0), 0).is_err());
        assert!(simulate_histogram(&model(1.0, 0.0), 1.0, (5.0, 1.0), 0).is_err());
        assert!(CoincidenceHistogram::new(1.0, 0.0, vec![1]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let h = simulate_histogram(&model(100.0, 1.0), 0.5, (-5.0, 5.0), 2).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &h, &[("seed".into(), "2".into())]).unwrap();
        let back = read_histogram_csv(buf.as_slice()).unwrap();
        assert_eq!(back.counts, h.counts);
        assert_eq!(back.bin_width, h.bin_width);
        assert_eq!(back.t_start, h.t_start);
        assert_eq!(back.metadata.get("seed").map(String::as_str), Some("2"));
    }

    #[test]
    fn csv_errors_name_line_and_field() {
        let text = "bin_start_ns,counts\n0,1\n1,-3\n";
        match read_histogram_csv(text.as_bytes()) {
            Err(Error::Parse { line, field, .. }) => assert_eq!((line, field.as_str()), (3, "counts")),
            other => panic!("unexpected {other:?}"),
        }
        let uneven = "bin_start_ns,counts\n0,1\n1,1\n3,1\n";
        assert!(matches!(
            read_histogram_csv(uneven.as_bytes()),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(read_histogram_csv("bin_start_ns,counts\n".as_bytes()).is_err());
    }
}
