//! Perpendicular frequency of a box orbit in a triaxial halo and extraction of
//! per-cycle Hill parameters from a sampled planar trajectory.
//!
//! `omega_y^2 = (4/b) / (sqrt(c^2 x^2 + a^2 z^2) + b sqrt(x^2 + z^2))`.
//! Cycles run between successive local minima of `omega_y^2` (outer turning
//! points); on each, `af` is the minimum and `q` is the excess area rescaled
//! to a period of `pi`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriaxialHalo {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Density scale; does not enter `omega_y^2`.
    pub rho0: f64,
}

impl TriaxialHalo {
    /// Triaxial halo with `a > b > c > 0`.
    pub fn new(a: f64, b: f64, c: f64, rho0: f64) -> Result<Self> {
        if !(a > b && b > c && c > 0.0) {
            return Err(Error::Domain(format!(
                "triaxial halo needs a > b > c > 0, got ({a}, {b}, {c})"
            )));
        }
        Self::unordered(a, b, c, rho0)
    }

    /// Any positive axes, including the spherical limit `a = b = c`.
    pub fn unordered(a: f64, b: f64, c: f64, rho0: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0 && rho0 > 0.0) {
            return Err(Error::Domain(format!(
                "halo parameters must be positive, got ({a}, {b}, {c}, {rho0})"
            )));
        }
        Ok(Self { a, b, c, rho0 })
    }

    pub fn spherical(r: f64) -> Result<Self> {
        Self::unordered(r, r, r, 1.0)
    }
}

pub fn omega_y_squared(halo: &TriaxialHalo, x: f64, z: f64) -> Result<f64> {
    if x == 0.0 && z == 0.0 {
        return Err(Error::Domain("omega_y^2 is singular at the origin".into()));
    }
    let TriaxialHalo { a, b, c, .. } = *halo;
    Ok((4.0 / b) / ((c * x).hypot(a * z) + b * x.hypot(z)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
}

impl Trajectory {
    /// At least three samples with strictly increasing `t`.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "trajectory needs at least 3 samples, got {}",
                samples.len()
            )));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::Parse(format!(
                    "time must increase strictly (sample {} at t = {})",
                    i + 1,
                    w[1].t
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn from_fn(
        t: impl IntoIterator<Item = f64>,
        f: impl Fn(f64) -> (f64, f64),
    ) -> Result<Self> {
        Self::new(
            t.into_iter()
                .map(|t| {
                    let (x, z) = f(t);
                    Sample { t, x, z }
                })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Reads the `t,x,z` CSV format. Blank lines and `#` comments are skipped.
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter(|(_, l)| {
            l.as_ref()
                .map_or(true, |l| !l.trim().is_empty() && !l.starts_with('#'))
        });
        let header = match lines.next() {
            Some((_, l)) => l?,
            None => return Err(Error::Parse("empty trajectory file".into())),
        };
        let cols: Vec<_> = header.split(',').map(str::trim).collect();
        if cols != ["t", "x", "z"] {
            return Err(Error::Parse(format!(
                "expected header `t,x,z`, got `{header}`"
            )));
        }
        let mut samples = Vec::new();
        for (no, line) in lines {
            let line = line?;
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
            let [t, x, z] = v[..] else {
                return Err(Error::Parse(format!("line {}: expected 3 fields", no + 1)));
            };
            if !(t.is_finite() && x.is_finite() && z.is_finite()) {
                return Err(Error::Parse(format!("line {}: non-finite value", no + 1)));
            }
            samples.push(Sample { t, x, z });
        }
        Self::new(samples)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,x,z")?;
        for s in &self.samples {
            writeln!(w, "{},{},{}", s.t, s.x, s.z)?;
        }
        Ok(())
    }
}

/// Hill parameters of one extracted forcing cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedCycle {
    pub af: f64,
    pub q: f64,
    pub segment_length: f64,
    /// `(omega_y^2 - af) / q` against time rescaled to `[0, pi]`; integrates
    /// to one. Empty when `q = 0`.
    pub shape: Vec<(f64, f64)>,
}

/// Relative tolerance for treating neighbouring samples as equal.
const PLATEAU_RTOL: f64 = 1e-12;

/// Indices of local minima; endpoints count as one-sided minima and a
/// plateau is represented by its first sample.
fn local_minima(w: &[f64]) -> Vec<usize> {
    let n = w.len();
    let eq = |a: f64, b: f64| (a - b).abs() <= PLATEAU_RTOL * a.abs().max(b.abs());
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && eq(w[j + 1], w[i]) {
            j += 1;
        }
        let left_ok = i == 0 || w[i - 1] > w[i];
        let right_ok = j + 1 == n || w[j + 1] > w[i];
        if left_ok && right_ok {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// A cycle boundary: the refined minimum location and value, and the sample
/// it was found at.
#[derive(Debug, Clone, Copy)]
struct Boundary {
    t: f64,
    w: f64,
    index: usize,
}

/// Vertex of the parabola through the minimum and its two neighbours, so
/// cycle boundaries are not quantized to the sampling grid. Endpoint minima
/// stay on their sample.
fn refine_minimum(s: &[Sample], w2: &[f64], i: usize) -> Boundary {
    let at = Boundary {
        t: s[i].t,
        w: w2[i],
        index: i,
    };
    if i == 0 || i + 1 == s.len() {
        return at;
    }
    let (t0, t1, t2) = (s[i - 1].t, s[i].t, s[i + 1].t);
    let (w0, w1, w2v) = (w2[i - 1], w2[i], w2[i + 1]);
    // divided differences of the interpolating quadratic
    let d01 = (w1 - w0) / (t1 - t0);
    let d12 = (w2v - w1) / (t2 - t1);
    let curv = (d12 - d01) / (t2 - t0);
    if !(curv > 0.0) {
        return at;
    }
    let tv = 0.5 * (t0 + t1) - d01 / (2.0 * curv);
    if !(tv > t0 && tv < t2) {
        return at;
    }
    let wv = w1 + d01 * (tv - t1) + curv * (tv - t0) * (tv - t1);
    Boundary {
        t: tv,
        w: wv.min(w1),
        index: i,
    }
}

/// Splits `omega_y^2(t)` at its local minima and reduces each segment to
/// `(af, q)`. A flat series yields a single cycle with `q = 0`.
pub fn extract_cycles(halo: &TriaxialHalo, traj: &Trajectory) -> Result<Vec<ExtractedCycle>> {
    let s = traj.samples();
    let w2: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(i, p)| omega_y_squared(halo, p.x, p.z).map_err(|e| e.at_cycle(i)))
        .collect::<Result<_>>()?;
    let first = w2[0];
    if w2
        .iter()
        .all(|&v| (v - first).abs() <= PLATEAU_RTOL * first)
    {
        return Ok(vec![ExtractedCycle {
            af: first,
            q: 0.0,
            segment_length: s[s.len() - 1].t - s[0].t,
            shape: Vec::new(),
        }]);
    }
    let minima = local_minima(&w2);
    if minima.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "found {} minima of omega_y^2; need at least 2",
            minima.len()
        )));
    }
    let bounds: Vec<Boundary> = minima.iter().map(|&i| refine_minimum(s, &w2, i)).collect();
    Ok(bounds
        .windows(2)
        .map(|b| segment(s, &w2, b[0], b[1]))
        .collect())
}

fn segment(s: &[Sample], w2: &[f64], from: Boundary, to: Boundary) -> ExtractedCycle {
    let lo = from.index.saturating_sub(1);
    let hi = (to.index + 1).min(s.len() - 1);
    let mut pts = vec![(from.t, from.w)];
    pts.extend(
        (lo..=hi)
            .filter(|&i| s[i].t > from.t && s[i].t < to.t)
            .map(|i| (s[i].t, w2[i])),
    );
    pts.push((to.t, to.w));
    let af = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let len = to.t - from.t;
    let area: f64 = pts
        .windows(2)
        .map(|p| 0.5 * (p[0].1 + p[1].1 - 2.0 * af) * (p[1].0 - p[0].0))
        .sum();
    let rescale = PI / len;
    let q = area * rescale;
    let shape = if q > 0.0 {
        // against tau = (t - t0) pi / len, (w2 - af) / q integrates to one
        pts.iter()
            .map(|&(t, v)| ((t - from.t) * rescale, (v - af) / q))
            .collect()
    } else {
        Vec::new()
    };
    ExtractedCycle {
        af,
        q,
        segment_length: len,
        shape,
    }
}

/// Writes `cycle_index,af,q,segment_length`.
pub fn write_cycles_csv(cycles: &[ExtractedCycle], mut w: impl Write) -> Result<()> {
    writeln!(w, "cycle_index,af,q,segment_length")?;
    for (i, c) in cycles.iter().enumerate() {
        writeln!(w, "{i},{},{},{}", c.af, c.q, c.segment_length)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(t_end: f64, dt: f64) -> impl Iterator<Item = f64> {
        let n = (t_end / dt).round() as usize;
        (0..=n).map(move |i| i as f64 * dt)
    }

    #[test]
    fn omega_examples() {
        let sph = TriaxialHalo::spherical(1.0).unwrap();
        assert_eq!(omega_y_squared(&sph, 0.0, 1.0).unwrap(), 2.0);
        assert!((omega_y_squared(&sph, 3.0, 4.0).unwrap() - 0.4).abs() < 1e-15);
        let tri = TriaxialHalo::new(2.0, 1.0, 0.5, 1.0).unwrap();
        assert!((omega_y_squared(&tri, 1.0, 0.0).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        assert!(omega_y_squared(&tri, 0.0, 0.0).is_err());
    }

    #[test]
    fn halo_validation() {
        assert!(TriaxialHalo::new(1.0, 1.0, 0.5, 1.0).is_err());
        assert!(TriaxialHalo::new(2.0, 1.0, 0.0, 1.0).is_err());
        assert!(TriaxialHalo::unordered(1.0, 1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn scale_covariance(s in 0.01f64..100.0, x in -10.0f64..10.0, z in 0.1f64..10.0) {
            // homogeneous of degree -1 in (x, z) and -2 in (a, b, c)
            let h = TriaxialHalo::new(2.0, 1.3, 0.4, 1.0).unwrap();
            let hs = TriaxialHalo::new(2.0 * s, 1.3 * s, 0.4 * s, 1.0).unwrap();
            let w = omega_y_squared(&h, x, z).unwrap();
            let both = omega_y_squared(&hs, x * s, z * s).unwrap();
            let pos = omega_y_squared(&h, x * s, z * s).unwrap();
            let axes = omega_y_squared(&hs, x, z).unwrap();
            prop_assert!((both * s.powi(3) / w - 1.0).abs() < 1e-12);
            prop_assert!((pos * s / w - 1.0).abs() < 1e-12);
            prop_assert!((axes * s * s / w - 1.0).abs() < 1e-12);
            prop_assert!(w > 0.0);
        }
    }

    #[test]
    fn trajectory_validation() {
        let pts = |ts: &[f64]| {
            ts.iter()
                .map(|&t| Sample { t, x: 1.0, z: 0.0 })
                .collect::<Vec<_>>()
        };
        assert!(Trajectory::new(pts(&[0.0, 1.0])).is_err());
        assert!(Trajectory::new(pts(&[0.0, 1.0, 1.0])).is_err());
        assert!(Trajectory::new(pts(&[0.0, 1.0, 2.0])).is_ok());
    }

    #[test]
    fn csv_round_trip() {
        let traj = Trajectory::from_fn(grid(1.0, 0.25), |t| (1.0 + t, -t)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, traj);
        assert!(Trajectory::read_csv("t,y,z\n0,1,1\n".as_bytes()).is_err());
        assert!(Trajectory::read_csv("t,x,z\n0,1\n1,1,1\n2,1,1\n".as_bytes()).is_err());
        assert!(Trajectory::read_csv("t,x,z\n0,1,1\n1,a,1\n2,1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn circular_orbit_has_no_forcing() {
        let sph = TriaxialHalo::spherical(1.0).unwrap();
        let traj =
            Trajectory::from_fn(grid(20.0, 0.01), |t| (2.0 * t.cos(), 2.0 * t.sin())).unwrap();
        let cycles = extract_cycles(&sph, &traj).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].q, 0.0);
        assert!((cycles[0].af - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offset_circle_gives_identical_cycles() {
        let sph = TriaxialHalo::spherical(1.0).unwrap();
        let traj = Trajectory::from_fn(grid(6.0 * PI, 1e-3), |t| (2.0 + t.cos(), t.sin())).unwrap();
        let cycles = extract_cycles(&sph, &traj).unwrap();
        assert_eq!(cycles.len(), 3);
        for c in &cycles[1..] {
            assert!((c.af - cycles[0].af).abs() < 1e-4);
            assert!((c.q - cycles[0].q).abs() < 1e-4);
        }
        // af at the outer turning point r = 3
        assert!((cycles[0].af - 4.0 / 6.0).abs() < 1e-4);
        let shape = &cycles[0].shape;
        let integral: f64 = shape
            .windows(2)
            .map(|p| 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0))
            .sum();
        assert!((integral - 1.0).abs() < 1e-9);
    }

    #[test]
    fn jittered_orbits_vary_per_cycle() {
        let sph = TriaxialHalo::spherical(1.0).unwrap();
        let amps = [0.6, 1.0, 0.8, 1.3, 0.9];
        // each orbit k spans t in [2 pi k, 2 pi (k + 1)); minima at t = 2 pi k
        let traj = Trajectory::from_fn(grid(2.0 * PI * amps.len() as f64, 1e-3), |t| {
            let k = ((t / (2.0 * PI)).floor() as usize).min(amps.len() - 1);
            (2.0 + t.cos(), amps[k] * t.sin())
        })
        .unwrap();
        let cycles = extract_cycles(&sph, &traj).unwrap();
        assert_eq!(cycles.len(), amps.len());
        let qs: Vec<f64> = cycles.iter().map(|c| c.q).collect();
        for w in qs.windows(2) {
            assert!((w[0] - w[1]).abs() > 1e-3, "{qs:?}");
        }
    }

    #[test]
    fn minima_detection() {
        assert_eq!(local_minima(&[3.0, 1.0, 2.0, 1.0, 3.0]), vec![1, 3]);
        assert_eq!(local_minima(&[1.0, 2.0, 1.0]), vec![0, 2]);
        assert_eq!(local_minima(&[2.0, 1.0, 1.0, 2.0]), vec![1]);
        assert_eq!(local_minima(&[1.0, 1.0, 1.0]), vec![0]);
        assert_eq!(local_minima(&[1.0, 2.0, 3.0]), vec![0]);
    }

    #[test]
    fn too_few_minima() {
        let sph = TriaxialHalo::spherical(1.0).unwrap();
        // r decreasing: omega^2 rises monotonically, one endpoint minimum
        let traj = Trajectory::from_fn(grid(1.0, 0.1), |t| (3.0 - t, 0.0)).unwrap();
        assert!(matches!(
            extract_cycles(&sph, &traj),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn output_format() {
        let c = ExtractedCycle {
            af: 0.5,
            q: 1.25,
            segment_length: 6.0,
            shape: vec![],
        };
        let mut buf = Vec::new();
        write_cycles_csv(&[c], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "cycle_index,af,q,segment_length\n0,0.5,1.25,6\n"
        );
    }
}
