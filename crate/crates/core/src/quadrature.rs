//! Globally adaptive Gauss–Kronrod (G10/K21) integration.
//!
//! The interval with the largest error estimate is bisected until the summed
//! error estimate drops below the requested tolerance. The error estimate of
//! a panel is the plain `|K21 - G10|` difference, which is pessimistic for
//! smooth integrands but never optimistic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Absolute tolerance used for every expectation over a fading distribution.
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
/// Relative tolerance; only relevant for integrals much larger than one.
pub const DEFAULT_REL_TOL: f64 = 1e-12;
/// Subdivision cap before a numeric failure is reported.
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 100_000;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

/// Converged integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]` with the default tolerances.
///
/// `label` names the integrand in the error returned on non-convergence.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, label: &str) -> Result<QuadResult> {
    integrate_with(f, a, b, &[], QuadOptions::default(), label)
}

/// Integrates `f` over `[a, b]`, seeding the panel set with `breaks`.
///
/// Break points that fall outside `(a, b)` are ignored. Passing the location
/// of a kink or a support boundary here saves most of the adaptive work.
pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
    label: &str,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain {
            what: "integration bound",
            value: if a.is_finite() { b } else { a },
            domain: "finite reals".into(),
        });
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    if a > b {
        let r = integrate_with(f, b, a, breaks, opts, label)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }

    let mut points: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut edges = Vec::with_capacity(points.len() + 2);
    edges.push(a);
    edges.extend(points);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let (value, error) = kronrod21(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Panel { a: w[0], b: w[1], value, error });
    }

    let mut subdivisions = 0;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Quadrature {
                integrand: label.to_string(),
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            // Re-sum from the panels to shed accumulated update drift.
            let (value, error) = heap
                .iter()
                .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
            return Ok(QuadResult { value, error, subdivisions });
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::Quadrature {
                integrand: label.to_string(),
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("panel set is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel is below floating-point resolution; nothing left to refine.
            return Err(Error::Quadrature {
                integrand: label.to_string(),
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let (lv, le) = kronrod21(&f, worst.a, mid);
        let (rv, re) = kronrod21(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re });
        subdivisions += 1;
    }
}
