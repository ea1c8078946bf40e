//! One cycle of Hill's equation `y'' + [af + q qhat(t)] y = 0` on `[0, pi]`.
//!
//! The principal solutions `y1` (`y1(0) = 1, y1'(0) = 0`) and `y2`
//! (`y2(0) = 0, y2'(0) = 1`) give the fundamental matrix
//! `[[y1, y2], [y1', y2']](pi)`, whose `(h, g) = (y1(pi), y1'(pi))` enter the
//! matrix chain. Barriers are symmetric about `t = pi/2`, so `y1(pi) = y2'(pi)`.
//!
//! The delta barrier is always evaluated in closed form. Square wells have a
//! closed form too, but the default path integrates them with RK4 so the
//! formula can serve as an oracle.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::ensembles::{DistributionSpec, StreamHandle};
use crate::error::{Error, Result};
use crate::symplectic::{CycleParams, Mat2};

pub const BASE_STEP: f64 = PI / 2048.0;
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const WRONSKIAN_TOL: f64 = 1e-10;
pub const MAX_HALVINGS: u32 = 10;

/// Largest `step * sqrt(|k|)` allowed inside a segment.
const MAX_PHASE_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BarrierShape {
    /// `qhat = delta(t - pi/2)`.
    DeltaAtMidpoint,
    /// `qhat = 1/w` on `|t - pi/2| < w/2`.
    SquareWell(f64),
    /// `qhat = (1 - cos 2t) / pi`.
    RaisedCosine,
}

impl BarrierShape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BarrierShape::SquareWell(w) if !(w > 0.0 && w <= PI) => Err(Error::Config(format!(
                "square well width must lie in (0, pi], got {w}"
            ))),
            _ => Ok(()),
        }
    }

    /// Pointwise `qhat(t)`; `None` for the delta barrier.
    pub fn qhat(&self, t: f64) -> Option<f64> {
        match *self {
            BarrierShape::DeltaAtMidpoint => None,
            BarrierShape::SquareWell(w) => Some(if (t - FRAC_PI_2).abs() < 0.5 * w {
                1.0 / w
            } else {
                0.0
            }),
            BarrierShape::RaisedCosine => Some((1.0 - (2.0 * t).cos()) / PI),
        }
    }

    /// Interval boundaries on which `qhat` is smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            BarrierShape::SquareWell(w) if w < PI => {
                vec![0.0, 0.5 * (PI - w), 0.5 * (PI + w), PI]
            }
            _ => vec![0.0, PI],
        }
    }

    /// Bound on `qhat` over `[0, pi]`.
    fn max_qhat(&self) -> f64 {
        match *self {
            BarrierShape::DeltaAtMidpoint => f64::INFINITY,
            BarrierShape::SquareWell(w) => 1.0 / w,
            BarrierShape::RaisedCosine => 2.0 / PI,
        }
    }
}

impl fmt::Display for BarrierShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BarrierShape::DeltaAtMidpoint => write!(f, "delta"),
            BarrierShape::SquareWell(w) => write!(f, "square(w={w})"),
            BarrierShape::RaisedCosine => write!(f, "cosine"),
        }
    }
}

impl FromStr for BarrierShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let shape = match t.as_str() {
            "delta" => BarrierShape::DeltaAtMidpoint,
            "cosine" => BarrierShape::RaisedCosine,
            _ => {
                let inner = t
                    .strip_prefix("square(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Parse(format!("unknown barrier shape `{s}`")))?;
                let w = inner.strip_prefix("w=").unwrap_or(inner);
                let w = w
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad square well width in `{s}`")))?;
                BarrierShape::SquareWell(w)
            }
        };
        shape.validate()?;
        Ok(shape)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillCycleParams {
    pub af: f64,
    pub q: f64,
    pub shape: BarrierShape,
}

impl HillCycleParams {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !self.af.is_finite() || !(self.q >= 0.0) || !self.q.is_finite() {
            return Err(Error::Domain(format!(
                "need finite af and q >= 0, got af = {}, q = {}",
                self.af, self.q
            )));
        }
        Ok(())
    }

    /// `af + q qhat(t)` inside the smooth segment centred on `mid`; the
    /// square well is evaluated at `mid` so edges never pick up the wrong side.
    fn k(&self, t: f64, mid: f64) -> f64 {
        let at = match self.shape {
            BarrierShape::SquareWell(_) => mid,
            _ => t,
        };
        self.af + self.q * self.shape.qhat(at).unwrap_or(0.0)
    }
}

/// Principal solutions of one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillCycle {
    pub params: CycleParams,
    /// `[[y1, y2], [y1', y2']]` at `t = pi`.
    pub fundamental: Mat2,
}

impl HillCycle {
    fn from_fundamental(m: Mat2) -> Self {
        Self {
            params: CycleParams::new(m.m11, m.m21),
            fundamental: m,
        }
    }
}

/// Transfer matrix of `y'' + k y = 0` over a time `tau`.
pub fn segment_transfer(k: f64, tau: f64) -> Mat2 {
    let s2 = k * tau * tau;
    if s2.abs() < 1e-3 {
        // c = sum (-s2)^n/(2n)!, sn = sum (-s2)^n/(2n+1)!
        let (mut c, mut sn, mut term_c, mut term_s) = (0.0, 0.0, 1.0, 1.0);
        for n in 0..8 {
            c += term_c;
            sn += term_s;
            let n = n as f64;
            term_c *= -s2 / ((2.0 * n + 1.0) * (2.0 * n + 2.0));
            term_s *= -s2 / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
        }
        return Mat2::new(c, tau * sn, -k * tau * sn, c);
    }
    if k > 0.0 {
        let w = k.sqrt();
        let (s, c) = (w * tau).sin_cos();
        Mat2::new(c, s / w, -w * s, c)
    } else {
        let w = (-k).sqrt();
        let (s, c) = ((w * tau).sinh(), (w * tau).cosh());
        Mat2::new(c, s / w, w * s, c)
    }
}

/// `(h, g)` for the delta barrier: half a period of free motion, the jump
/// `y' -> y' - q y` at `pi/2`, then the second half.
pub fn delta_barrier_closed_form(af: f64, q: f64) -> CycleParams {
    delta_barrier_matrix(af, q).into_cycle().params
}

pub fn delta_barrier_matrix(af: f64, q: f64) -> Fundamental {
    let half = segment_transfer(af, FRAC_PI_2);
    let jump = Mat2::new(1.0, 0.0, -q, 1.0);
    Fundamental(half * jump * half)
}

/// `(h, g)` for a square well of width `w` and area `q` centred on `pi/2`.
pub fn square_well_closed_form(af: f64, q: f64, w: f64) -> CycleParams {
    square_well_matrix(af, q, w).into_cycle().params
}

pub fn square_well_matrix(af: f64, q: f64, w: f64) -> Fundamental {
    let side = segment_transfer(af, 0.5 * (PI - w));
    Fundamental(side * segment_transfer(af + q / w, w) * side)
}

/// A fundamental matrix at `t = pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fundamental(pub Mat2);

impl Fundamental {
    pub fn into_cycle(self) -> HillCycle {
        HillCycle::from_fundamental(self.0)
    }
}

fn rk4_segment(p: &HillCycleParams, t0: f64, t1: f64, steps: usize, m: Mat2) -> Mat2 {
    let h = (t1 - t0) / steps as f64;
    let mid = 0.5 * (t0 + t1);
    // the two columns evolve independently: (y, v)' = (v, -k y)
    let mut cols = [(m.m11, m.m21), (m.m12, m.m22)];
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let (ka, kb, kc) = (p.k(t, mid), p.k(t + 0.5 * h, mid), p.k(t + h, mid));
        for (y, v) in cols.iter_mut() {
            let (y1, v1) = (*v, -ka * *y);
            let (y2, v2) = (*v + 0.5 * h * v1, -kb * (*y + 0.5 * h * y1));
            let (y3, v3) = (*v + 0.5 * h * v2, -kb * (*y + 0.5 * h * y2));
            let (y4, v4) = (*v + h * v3, -kc * (*y + h * y3));
            *y += h / 6.0 * (y1 + 2.0 * y2 + 2.0 * y3 + y4);
            *v += h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
        }
    }
    Mat2::new(cols[0].0, cols[1].0, cols[0].1, cols[1].1)
}

/// RK4 fundamental matrix with a given base step; returns the matrix and the
/// number of steps taken.
pub fn integrate_fundamental(p: &HillCycleParams, base_step: f64) -> (Mat2, usize) {
    let bp = p.shape.breakpoints();
    let mut m = Mat2::IDENTITY;
    let mut total = 0;
    for w in bp.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let k_max = p.af.abs() + p.q * p.shape.max_qhat();
        let step = base_step.min(MAX_PHASE_STEP / k_max.sqrt().max(1e-300));
        let steps = ((t1 - t0) / step).ceil().max(1.0) as usize;
        m = rk4_segment(p, t0, t1, steps, m);
        total += steps;
    }
    (m, total)
}

fn residuals(m: &Mat2) -> (f64, f64) {
    ((m.m11 - m.m22).abs(), (m.det() - 1.0).abs())
}

/// Principal solutions `(h, g)` of one cycle, with the fundamental matrix.
///
/// Numeric shapes are integrated with step `pi/2048`, halved until both the
/// symmetry residual `|y1 - y2'|` and the Wronskian residual pass.
pub fn solve_cycle(p: &HillCycleParams) -> Result<HillCycle> {
    p.validate()?;
    if p.shape == BarrierShape::DeltaAtMidpoint || p.q == 0.0 {
        // q = 0 is free motion whatever the shape
        let q = if p.shape == BarrierShape::DeltaAtMidpoint {
            p.q
        } else {
            0.0
        };
        return Ok(delta_barrier_matrix(p.af, q).into_cycle());
    }
    let mut step = BASE_STEP;
    let mut last = (f64::NAN, f64::NAN, 0);
    for _ in 0..=MAX_HALVINGS {
        let (m, steps) = integrate_fundamental(p, step);
        let (sym, wr) = residuals(&m);
        // residuals are absolute; scale by the solution size for large growth
        let scale = m.max_abs().max(1.0);
        if sym < SYMMETRY_TOL * scale && wr < WRONSKIAN_TOL * scale * scale {
            return Ok(HillCycle::from_fundamental(m));
        }
        last = (sym, wr, steps);
        step *= 0.5;
    }
    Err(Error::IntegrationAccuracy {
        symmetry: last.0,
        wronskian: last.1,
        steps: last.2,
    })
}

/// `(h, g)` and regime of one cycle.
pub fn principal_solutions(p: &HillCycleParams) -> Result<CycleParams> {
    solve_cycle(p).map(|c| c.params)
}

/// `n` independent cycles with `af_k` and `q_k` drawn from the given specs.
/// `af` uses substream 0 of `seed`, `q` substream 1.
pub fn cycle_stream(
    af_spec: DistributionSpec,
    q_spec: DistributionSpec,
    shape: BarrierShape,
    seed: u64,
    n: usize,
) -> Result<Vec<HillCycle>> {
    shape.validate()?;
    let af = StreamHandle::new(af_spec, seed)?.substream(0);
    let q = StreamHandle::new(q_spec, seed)?.substream(1);
    let results: Vec<Result<HillCycle>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let p = HillCycleParams {
                af: af.sample(k as u64),
                q: q.sample(k as u64),
                shape,
            };
            solve_cycle(&p).map_err(|e| e.at_cycle(k))
        })
        .collect();
    results.into_iter().collect()
}

/// `(x, phi)` inputs of the exact recursion, skipping cycles with `x <= 0`
/// (or `g = 0`). Returns the inputs and the number skipped.
pub fn recursion_inputs(cycles: &[HillCycle]) -> (Vec<(f64, f64)>, usize) {
    let mut skipped = 0;
    let inputs = cycles
        .iter()
        .filter_map(|c| {
            if c.params.has_positive_x() {
                Some((c.params.x, c.params.phi))
            } else {
                skipped += 1;
                None
            }
        })
        .collect();
    (inputs, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::Regime;

    fn cycle(af: f64, q: f64, shape: BarrierShape) -> CycleParams {
        principal_solutions(&HillCycleParams { af, q, shape }).unwrap()
    }

    #[test]
    fn shape_parsing() {
        assert_eq!(
            "delta".parse::<BarrierShape>().unwrap(),
            BarrierShape::DeltaAtMidpoint
        );
        assert_eq!(
            "square(w=0.5)".parse::<BarrierShape>().unwrap(),
            BarrierShape::SquareWell(0.5)
        );
        assert_eq!(
            "square(0.25)".parse::<BarrierShape>().unwrap(),
            BarrierShape::SquareWell(0.25)
        );
        assert_eq!(
            "cosine".parse::<BarrierShape>().unwrap(),
            BarrierShape::RaisedCosine
        );
        for s in ["square(w=0)", "square(w=4)", "gauss", "square(w=x)"] {
            assert!(s.parse::<BarrierShape>().is_err(), "{s}");
        }
        for shape in [
            BarrierShape::DeltaAtMidpoint,
            BarrierShape::SquareWell(0.125),
            BarrierShape::RaisedCosine,
        ] {
            assert_eq!(shape.to_string().parse::<BarrierShape>().unwrap(), shape);
        }
    }

    #[test]
    fn shapes_are_normalized_and_symmetric() {
        for shape in [BarrierShape::SquareWell(0.5), BarrierShape::RaisedCosine] {
            // midpoint rule with breakpoints aligned to the well edges
            let n = 400_000;
            let dt = PI / n as f64;
            let total: f64 = (0..n)
                .map(|i| shape.qhat((i as f64 + 0.5) * dt).unwrap() * dt)
                .sum();
            assert!((total - 1.0).abs() < 1e-5, "{shape}: {total}");
            for t in [0.1, 0.7, 1.3, 1.5] {
                assert!((shape.qhat(t).unwrap() - shape.qhat(PI - t).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn transfer_series_joins_trig_branch() {
        for k in [1e-3 - 1e-12, -1e-3 + 1e-12] {
            let a = segment_transfer(k, 1.0);
            let b = segment_transfer(k * 1.000001, 1.0);
            assert!(a.max_abs_diff(&b) < 1e-8);
        }
        let m = segment_transfer(0.0, 2.0);
        assert_eq!(m, Mat2::new(1.0, 2.0, 0.0, 1.0));
        let m = segment_transfer(-1.0, 1.0);
        assert!((m.m11 - 1f64.cosh()).abs() < 1e-15);
        assert!((m.det() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unforced_examples() {
        let c = cycle(1.0, 0.0, BarrierShape::RaisedCosine);
        assert!((c.h + 1.0).abs() < 1e-15 && c.g.abs() < 1e-15);
        assert_eq!(c.regime, Regime::Parabolic);
        let c = cycle(0.25, 0.0, BarrierShape::SquareWell(0.5));
        assert!(c.h.abs() < 1e-15 && (c.g + 0.5).abs() < 1e-15);
        assert_eq!(c.regime, Regime::Elliptic);
    }

    #[test]
    fn unforced_numeric_integration_matches_free_motion() {
        // force the RK4 path with a vanishing barrier amplitude
        for i in 0..=40 {
            let af = 0.01 * (2500f64).powf(i as f64 / 40.0);
            let p = HillCycleParams {
                af,
                q: 1e-300,
                shape: BarrierShape::RaisedCosine,
            };
            let c = solve_cycle(&p).unwrap().params;
            let w = af.sqrt();
            assert!(
                (c.h - (w * PI).cos()).abs() < 1e-8,
                "af = {af}: h = {}",
                c.h
            );
            assert!(
                (c.g + w * (w * PI).sin()).abs() < 1e-8,
                "af = {af}: g = {}",
                c.g
            );
        }
    }

    #[test]
    fn delta_barrier_examples() {
        let c = delta_barrier_closed_form(0.25, 0.0);
        assert!(c.h.abs() < 1e-15 && (c.g + 0.5).abs() < 1e-15);
        let c = delta_barrier_closed_form(0.25, 2.0);
        assert!((c.h + 2.0).abs() < 1e-14 && (c.g + 1.5).abs() < 1e-14);
        assert_eq!(c.regime, Regime::Hyperbolic);
        for q in [0.0, 0.5, 3.0, 10.0] {
            let c = delta_barrier_closed_form(1.0, q);
            assert!((c.h + 1.0).abs() < 1e-14, "q = {q}: h = {}", c.h);
            let c = delta_barrier_closed_form(0.25, q);
            assert!((c.h + q).abs() < 1e-13);
            assert!((c.g + 0.5 * (1.0 + q)).abs() < 1e-13);
        }
        let m = delta_barrier_matrix(-0.7, 1.3).0;
        assert!((m.det() - 1.0).abs() < 1e-12);
        assert!((m.m11 - m.m22).abs() < 1e-12);
    }

    #[test]
    fn delta_regime_transitions_at_unit_q() {
        assert_eq!(
            delta_barrier_closed_form(0.25, 0.5).regime,
            Regime::Elliptic
        );
        assert_eq!(
            delta_barrier_closed_form(0.25, 1.0).regime,
            Regime::Parabolic
        );
        assert_eq!(
            delta_barrier_closed_form(0.25, 1.5).regime,
            Regime::Hyperbolic
        );
    }

    #[test]
    fn square_well_integration_matches_closed_form() {
        for &(af, q, w) in &[
            (0.25, 2.0, 0.5),
            (1.7, 0.8, 0.05),
            (-0.3, 1.5, 1e-3),
            (0.25, 2.0, PI),
        ] {
            let num = cycle(af, q, BarrierShape::SquareWell(w));
            let exact = square_well_closed_form(af, q, w);
            assert!(
                (num.h - exact.h).abs() < 1e-9,
                "{af} {q} {w}: {} vs {}",
                num.h,
                exact.h
            );
            assert!((num.g - exact.g).abs() < 1e-9);
        }
    }

    #[test]
    fn narrow_square_well_approaches_delta() {
        let delta = delta_barrier_closed_form(0.25, 2.0);
        let mut prev = f64::INFINITY;
        for w in [1e-1, 1e-2, 1e-3, 1e-4] {
            let d = (square_well_closed_form(0.25, 2.0, w).h - delta.h).abs();
            assert!(d < prev);
            // leading correction is q^2 w / 6 at af = 1/4
            assert!((d / (4.0 * w / 6.0) - 1.0).abs() < 0.1, "w = {w}: {d}");
            prev = d;
        }
    }

    #[test]
    fn wronskian_and_symmetry_hold_for_cosine_barrier() {
        for &(af, q) in &[(0.25, 2.0), (3.0, 20.0), (-1.0, 5.0), (10.0, 0.3)] {
            let c = solve_cycle(&HillCycleParams {
                af,
                q,
                shape: BarrierShape::RaisedCosine,
            })
            .unwrap();
            let m = c.fundamental;
            let scale = m.max_abs().max(1.0);
            assert!((m.det() - 1.0).abs() < 1e-10 * scale * scale);
            assert!((m.m11 - m.m22).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn vanishing_g_forces_unit_h() {
        // bisect g(q) = 0 on the cosine barrier at af = 1/4
        let g_of = |q: f64| cycle(0.25, q, BarrierShape::RaisedCosine).g;
        let mut checked = 0;
        let grid: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
        for w in grid.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            if g_of(lo).signum() == g_of(hi).signum() {
                continue;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if g_of(mid).signum() == g_of(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let c = cycle(0.25, 0.5 * (lo + hi), BarrierShape::RaisedCosine);
            if c.g.abs() < 1e-8 {
                assert!((c.h.abs() - 1.0).abs() < 1e-6, "q = {lo}: h = {}", c.h);
                checked += 1;
            }
        }
        assert!(checked >= 1);
    }

    #[test]
    fn cycle_stream_is_deterministic_and_tags_bad_cycles() {
        let af: DistributionSpec = "uniform(0.2,0.3)".parse().unwrap();
        let q: DistributionSpec = "uniform(0,3)".parse().unwrap();
        let a = cycle_stream(af, q, BarrierShape::RaisedCosine, 5, 64).unwrap();
        let b = cycle_stream(af, q, BarrierShape::RaisedCosine, 5, 64).unwrap();
        assert_eq!(a, b);
        let (inputs, skipped) = recursion_inputs(&a);
        assert_eq!(inputs.len() + skipped, 64);
        assert!(inputs.iter().all(|&(x, _)| x > 0.0));

        // free motion at sqrt(af) = 5/4: h = cos(5 pi/4) < 0 < g
        let af = DistributionSpec::Constant(1.5625);
        let zero = DistributionSpec::Constant(0.0);
        let s = cycle_stream(af, zero, BarrierShape::DeltaAtMidpoint, 1, 10).unwrap();
        assert!(s.iter().all(|c| c.params.x < 0.0));
        let (inputs, skipped) = recursion_inputs(&s);
        assert_eq!((inputs.len(), skipped), (0, 10));
    }
}
