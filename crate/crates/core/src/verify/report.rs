use std::fmt;

use serde::{Deserialize, Serialize};

/// How a report's worst margin is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `worst_margin < tolerance`
    #[serde(rename = "<")]
    Lt,
    /// `worst_margin <= tolerance`
    #[serde(rename = "<=")]
    Le,
}

impl Relation {
    pub fn holds(self, margin: f64, tolerance: f64) -> bool {
        match self {
            Relation::Lt => margin < tolerance,
            Relation::Le => margin <= tolerance,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
        })
    }
}

/// Outcome of one certification check on a finite set of points.
///
/// `worst_margin` is the largest value of the checked quantity (a signed
/// violation, so smaller is better) and `worst_point` is where it occurred.
/// A passing report means the inequality was certified on the listed grid;
/// it is numerical evidence, not a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub check: String,
    /// Description of the sampled domain, grid sizes and seed.
    pub grid: String,
    pub gains: Vec<[f64; 4]>,
    pub seed: Option<u64>,
    /// Coordinate names for `worst_point`.
    pub labels: Vec<String>,
    pub worst_point: Vec<f64>,
    #[serde(with = "extended_f64")]
    pub worst_margin: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub samples: usize,
    /// Points that could not be evaluated in floating point (overflow).
    pub skipped: usize,
    pub violations: usize,
    pub pass: bool,
    pub note: String,
}

impl CertReport {
    /// One-line summary for tables.
    pub fn summary(&self) -> String {
        let point: Vec<String> =
            self.labels.iter().zip(&self.worst_point).map(|(l, v)| format!("{l}={v:.6}")).collect();
        format!(
            "{:<4} {:<44} worst {:>12.4e} {} {:.1e}  n={} at [{}]",
            if self.pass { "PASS" } else { "FAIL" },
            self.check,
            self.worst_margin,
            self.relation,
            self.tolerance,
            self.samples,
            point.join(", ")
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// JSON has no infinities; store them (and NaN) as strings.
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

/// Running worst case over indexed sample points.
///
/// Merging keeps the larger margin and breaks ties by the smaller index, so
/// parallel reductions give the same report as a sequential scan.
#[derive(Debug, Clone)]
pub(crate) struct Tracker {
    relation: Relation,
    tolerance: f64,
    worst: f64,
    index: usize,
    point: Vec<f64>,
    samples: usize,
    skipped: usize,
    violations: usize,
}

impl Tracker {
    pub fn new(relation: Relation, tolerance: f64) -> Self {
        Self {
            relation,
            tolerance,
            worst: f64::NEG_INFINITY,
            index: usize::MAX,
            point: Vec::new(),
            samples: 0,
            skipped: 0,
            violations: 0,
        }
    }

    /// Records a margin; NaN counts as an infinite violation.
    pub fn observe(&mut self, index: usize, margin: f64, point: &[f64]) {
        let margin = if margin.is_nan() { f64::INFINITY } else { margin };
        self.samples += 1;
        if !self.relation.holds(margin, self.tolerance) {
            self.violations += 1;
        }
        if margin > self.worst || (margin == self.worst && index < self.index) {
            self.worst = margin;
            self.index = index;
            self.point = point.to_vec();
        }
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.samples += other.samples;
        self.skipped += other.skipped;
        self.violations += other.violations;
        if other.worst > self.worst || (other.worst == self.worst && other.index < self.index) {
            self.worst = other.worst;
            self.index = other.index;
            self.point = other.point;
        }
        self
    }

    pub fn finish(self, check: &str, grid: String, labels: &[&str]) -> CertReport {
        let pass = self.samples > 0 && self.violations == 0;
        CertReport {
            check: check.to_string(),
            grid,
            gains: Vec::new(),
            seed: None,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            worst_point: self.point,
            worst_margin: self.worst,
            relation: self.relation,
            tolerance: self.tolerance,
            samples: self.samples,
            skipped: self.skipped,
            violations: self.violations,
            pass,
            note: String::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracker_merge_is_order_independent() {
        let points = [(0, -1.0), (1, 0.5), (2, 0.5), (3, -2.0)];
        let mut seq = Tracker::new(Relation::Lt, 0.0);
        for &(i, m) in &points {
            seq.observe(i, m, &[i as f64]);
        }
        let mut a = Tracker::new(Relation::Lt, 0.0);
        let mut b = Tracker::new(Relation::Lt, 0.0);
        for &(i, m) in &points[2..] {
            a.observe(i, m, &[i as f64]);
        }
        for &(i, m) in &points[..2] {
            b.observe(i, m, &[i as f64]);
        }
        let merged = a.merge(b);
        assert_eq!(merged.index, 1);
        assert_eq!(merged.index, seq.index);
        assert_eq!(merged.violations, 2);
    }

    #[test]
    fn nan_margins_are_violations() {
        let mut t = Tracker::new(Relation::Le, 1e-12);
        t.observe(0, f64::NAN, &[]);
        let r = t.finish("x", String::new(), &[]);
        assert!(!r.pass);
        assert_eq!(r.worst_margin, f64::INFINITY);
    }

    #[test]
    fn reports_round_trip_through_json() {
        let mut t = Tracker::new(Relation::Le, 1e-9);
        t.observe(7, -0.123_456_789_012_345_68, &[0.1, std::f64::consts::PI]);
        let mut r = t.finish("demo", "grid".into(), &["delta", "gamma"]);
        r.gains.push([1.0, 0.3, 1e-7, 2.5]);
        r.seed = Some(42);
        let back = CertReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);

        let empty = Tracker::new(Relation::Lt, 0.0).finish("empty", String::new(), &[]);
        let back = CertReport::from_json(&empty.to_json()).unwrap();
        assert_eq!(back.worst_margin, f64::NEG_INFINITY);
        assert!(!back.pass);
    }
}
