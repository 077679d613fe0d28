//! Bundled Hertz and Kalker coefficient tables and their interpolants.

use serde::Deserialize;
use thiserror::Error;

const HERTZ_CSV: &str = include_str!("../../data/hertz_mn.csv");
const KALKER_CSV: &str = include_str!("../../data/kalker_cij.csv");

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("table `{0}` is malformed: {1}")]
    Shape(&'static str, String),
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Shape-preserving piecewise cubic (Fritsch–Carlson slopes).
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let d: Vec<f64> = (0..n - 1)
            .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
            .collect();
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                // weighted harmonic mean
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        Self { x, y, slope: m }
    }

    /// Value at `t`, clamped to the table range; the flag reports clamping.
    pub fn eval(&self, t: f64) -> (f64, bool) {
        let n = self.x.len();
        if t <= self.x[0] {
            return (self.y[0], t < self.x[0]);
        }
        if t >= self.x[n - 1] {
            return (self.y[n - 1], t > self.x[n - 1]);
        }
        let k = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (
            h00 * self.y[k]
                + h10 * h * self.slope[k]
                + h01 * self.y[k + 1]
                + h11 * h * self.slope[k + 1],
            false,
        )
    }
}

#[derive(Deserialize)]
struct HertzRow {
    theta_deg: f64,
    m: f64,
    n: f64,
}

/// `m(θ)`, `n(θ)` with θ in degrees.
#[derive(Clone, Debug)]
pub struct HertzTable {
    m: MonotoneCubic,
    n: MonotoneCubic,
}

impl HertzTable {
    pub fn bundled() -> Self {
        Self::from_csv(HERTZ_CSV).expect("bundled Hertz table is well formed")
    }

    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut th = vec![];
        let mut m = vec![];
        let mut n = vec![];
        for row in reader(text).deserialize() {
            let r: HertzRow = row?;
            th.push(r.theta_deg);
            m.push(r.m);
            n.push(r.n);
        }
        if th.len() < 2 || th.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TableError::Shape(
                "hertz",
                "theta must be ascending, ≥ 2 rows".into(),
            ));
        }
        Ok(Self {
            m: MonotoneCubic::new(th.clone(), m),
            n: MonotoneCubic::new(th, n),
        })
    }

    /// `(m, n)` at `theta_deg`; below the first row the first row is used.
    pub fn coefficients(&self, theta_deg: f64) -> (f64, f64) {
        (self.m.eval(theta_deg).0, self.n.eval(theta_deg).0)
    }
}

#[derive(Deserialize)]
struct KalkerRow {
    side: String,
    g: f64,
    nu: f64,
    c11: f64,
    c22: f64,
    c23: f64,
    c33: f64,
}

/// Kalker coefficients on a grid of `ln(a/b)` × ν, bilinear in both.
#[derive(Clone, Debug)]
pub struct KalkerTable {
    ln_ratio: Vec<f64>,
    nu: Vec<f64>,
    /// `[ratio][nu] -> [c11, c22, c23, c33]`
    c: Vec<Vec<[f64; 4]>>,
}

impl KalkerTable {
    pub fn bundled() -> Self {
        Self::from_csv(KALKER_CSV).expect("bundled Kalker table is well formed")
    }

    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut rows: Vec<(f64, f64, [f64; 4])> = vec![];
        for row in reader(text).deserialize() {
            let r: KalkerRow = row?;
            let a_over_b = match r.side.as_str() {
                "a/b" => r.g,
                "b/a" => 1.0 / r.g,
                other => {
                    return Err(TableError::Shape(
                        "kalker",
                        format!("unknown side `{other}`"),
                    ))
                }
            };
            rows.push((a_over_b.ln(), r.nu, [r.c11, r.c22, r.c23, r.c33]));
        }
        let mut ln_ratio: Vec<f64> = rows.iter().map(|r| r.0).collect();
        ln_ratio.sort_by(f64::total_cmp);
        ln_ratio.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut nu: Vec<f64> = rows.iter().map(|r| r.1).collect();
        nu.sort_by(f64::total_cmp);
        nu.dedup();
        if ln_ratio.len() < 2 || nu.len() < 2 || rows.len() != ln_ratio.len() * nu.len() {
            return Err(TableError::Shape(
                "kalker",
                "rows do not form a full ratio × nu grid".into(),
            ));
        }
        let mut c = vec![vec![[f64::NAN; 4]; nu.len()]; ln_ratio.len()];
        for (lr, v, vals) in rows {
            let i = ln_ratio
                .iter()
                .position(|x| (x - lr).abs() < 1e-12)
                .unwrap();
            let j = nu.iter().position(|&x| x == v).unwrap();
            c[i][j] = vals;
        }
        if c.iter().flatten().any(|v| v[0].is_nan()) {
            return Err(TableError::Shape("kalker", "duplicate grid cells".into()));
        }
        Ok(Self { ln_ratio, nu, c })
    }

    fn bracket(grid: &[f64], x: f64) -> (usize, f64, bool) {
        let n = grid.len();
        if x <= grid[0] {
            return (0, 0.0, x < grid[0]);
        }
        if x >= grid[n - 1] {
            return (n - 2, 1.0, x > grid[n - 1]);
        }
        let k = grid.partition_point(|&g| g <= x) - 1;
        (k, (x - grid[k]) / (grid[k + 1] - grid[k]), false)
    }

    /// `[c11, c22, c23, c33]` at `a_over_b` and `nu`; the flag is raised when
    /// either argument was clamped to the table range.
    pub fn coefficients(&self, a_over_b: f64, nu: f64) -> ([f64; 4], bool) {
        let (i, s, ci) = Self::bracket(&self.ln_ratio, a_over_b.ln());
        let (j, t, cj) = Self::bracket(&self.nu, nu);
        let mut out = [0.0; 4];
        for (k, o) in out.iter_mut().enumerate() {
            let v00 = self.c[i][j][k];
            let v01 = self.c[i][j + 1][k];
            let v10 = self.c[i + 1][j][k];
            let v11 = self.c[i + 1][j + 1][k];
            *o = (1.0 - s) * ((1.0 - t) * v00 + t * v01) + s * ((1.0 - t) * v10 + t * v11);
        }
        (out, ci || cj)
    }

    pub fn ratio_range(&self) -> (f64, f64) {
        (self.ln_ratio[0].exp(), self.ln_ratio.last().unwrap().exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hertz_nodes_are_reproduced() {
        let h = HertzTable::bundled();
        assert_eq!(h.coefficients(90.0), (1.0, 1.0));
        let (m, n) = h.coefficients(30.0);
        assert!((m - 2.731).abs() < 1e-12 && (n - 0.4930).abs() < 1e-12);
    }

    #[test]
    fn hertz_interpolant_is_monotone() {
        let h = HertzTable::bundled();
        let mut prev = h.coefficients(0.5);
        for k in 1..=900 {
            let cur = h.coefficients(0.5 + k as f64 * 0.0995);
            assert!(cur.0 <= prev.0 + 1e-12 && cur.1 >= prev.1 - 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn kalker_grid_nodes_and_clamping() {
        let k = KalkerTable::bundled();
        let (c, cl) = k.coefficients(1.0, 0.25);
        assert!(!cl);
        assert_eq!(c, [4.12, 3.67, 1.47, 1.19]);
        let (c, _) = k.coefficients(2.0, 0.5);
        assert_eq!(c, [6.11, 5.56, 2.96, 0.650]);
        let (c, cl) = k.coefficients(50.0, 0.0);
        assert!(cl);
        assert_eq!(c, [10.7, 10.7, 12.2, 0.795]);
        let (lo, hi) = k.ratio_range();
        assert!((lo - 0.1).abs() < 1e-12 && (hi - 10.0).abs() < 1e-9);
    }

    #[test]
    fn kalker_bilinear_in_nu() {
        let k = KalkerTable::bundled();
        let (c, _) = k.coefficients(1.0, 0.3);
        let want = 4.12 + 0.2 * (5.20 - 4.12);
        assert!((c[0] - want).abs() < 1e-12);
    }
}
