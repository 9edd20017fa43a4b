//! Adaptive Gauss–Kronrod (10, 21) on finite intervals with a global
//! error-ordered work queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{IntegralResult, Tolerance};

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

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

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

/// Ten-point Gauss–Legendre rule on `[a, b]` (the Gauss subset of the
/// Kronrod nodes). Used for fixed-cost cell integrals in cumulative tables.
pub fn gauss10<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (k, w) in WG.iter().enumerate() {
        let x = h * XGK[2 * k + 1];
        acc += w * (f(c - x) + f(c + x));
    }
    acc * h
}

/// Single 21-point Kronrod evaluation: (value, error estimate).
pub(crate) fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let ah = h.abs();
    let result = resk * h;
    let resabs = resabs * ah;
    let resasc = resasc * ah;
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> IntegralResult {
    if a == b {
        return IntegralResult::exact(0.0);
    }
    let (v0, e0) = gk21(&mut f, a, b);
    let mut evaluations = 21;
    if !v0.is_finite() {
        return IntegralResult { value: v0, abs_error_estimate: f64::INFINITY, converged: false, evaluations };
    }
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v0, err: e0 });
    let mut total = v0;
    let mut total_err = e0;
    let mut stuck = false;
    loop {
        let target = tol.atol.max(tol.rtol * total.abs());
        if total_err <= target {
            return IntegralResult { value: total, abs_error_estimate: total_err, converged: true, evaluations };
        }
        if heap.len() >= tol.max_subdivisions || stuck {
            break;
        }
        let worst = heap.pop().expect("non-empty work queue");
        let mid = 0.5 * (worst.a + worst.b);
        if (worst.b - worst.a).abs() <= 8.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) || mid == worst.a || mid == worst.b {
            // cannot refine further; keep the piece and stop
            heap.push(worst);
            stuck = true;
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        if !(v1.is_finite() && v2.is_finite()) {
            return IntegralResult { value: f64::NAN, abs_error_estimate: f64::INFINITY, converged: false, evaluations };
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
        if heap.len() % 64 == 0 {
            // re-sum to limit drift in the running totals
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.err).sum();
    let converged = err <= tol.atol.max(tol.rtol * value.abs());
    IntegralResult { value, abs_error_estimate: err, converged, evaluations }
}
