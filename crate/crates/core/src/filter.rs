//! Rule-based record discriminator and the dataset filtering pass.
//!
//! A record is kept iff every enabled rule passes. Rules are evaluated in a
//! fixed order and a rejected record is attributed to the first rule it fails.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::LineError;
use crate::error::{Error, Result};
use crate::types::{BBox, ClassLabel, DetectionRecord, FrameDims};

/// Optional `(min, max)` pair applied independently to each view.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerView<T> {
    pub frontal: Option<T>,
    pub birdeye: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleSet {
    pub distance_bounds: Option<(f64, f64)>,
    /// Reject boxes reaching outside their frame.
    pub box_in_frame: bool,
    pub frontal_dims: FrameDims,
    pub birdeye_dims: FrameDims,
    pub min_box_area: PerView<f64>,
    pub max_box_area: PerView<f64>,
    /// Bounds on width / height.
    pub aspect_ratio_bounds: PerView<(f64, f64)>,
    pub model_allowlist: Option<BTreeSet<u64>>,
    pub model_denylist: BTreeSet<u64>,
    pub class_allowlist: Option<BTreeSet<ClassLabel>>,
    /// Require yaw in `[0, 360)`.
    pub yaw_valid: bool,
}

impl Default for RuleSet {
    /// Everything disabled: the identity filter.
    fn default() -> Self {
        Self {
            distance_bounds: None,
            box_in_frame: false,
            frontal_dims: FrameDims::default(),
            birdeye_dims: FrameDims::default(),
            min_box_area: PerView::default(),
            max_box_area: PerView::default(),
            aspect_ratio_bounds: PerView::default(),
            model_allowlist: None,
            model_denylist: BTreeSet::new(),
            class_allowlist: None,
            yaw_valid: false,
        }
    }
}

impl RuleSet {
    /// Rules suited to the synthetic generator's default catalog and cameras.
    pub fn synthetic_defaults() -> Self {
        Self {
            distance_bounds: Some((0.0, 100.0)),
            box_in_frame: true,
            min_box_area: PerView {
                frontal: Some(4.0),
                birdeye: Some(4.0),
            },
            max_box_area: PerView {
                frontal: None,
                birdeye: Some(60_000.0),
            },
            yaw_valid: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, b: Option<(f64, f64)>| match b {
            Some((lo, hi)) if !(lo <= hi) => {
                Err(Error::Config(format!("{name}: min {lo} exceeds max {hi}")))
            }
            _ => Ok(()),
        };
        check("distance_bounds", self.distance_bounds)?;
        check("aspect_ratio_bounds.frontal", self.aspect_ratio_bounds.frontal)?;
        check("aspect_ratio_bounds.birdeye", self.aspect_ratio_bounds.birdeye)?;
        for (view, lo, hi) in [
            ("frontal", self.min_box_area.frontal, self.max_box_area.frontal),
            ("birdeye", self.min_box_area.birdeye, self.max_box_area.birdeye),
        ] {
            check(&format!("box area ({view})"), lo.zip(hi))?;
        }
        Ok(())
    }
}

/// Rules in evaluation (and attribution) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Distance,
    Containment,
    Area,
    Aspect,
    Model,
    Class,
    Yaw,
}

impl Rule {
    pub const ORDER: [Rule; 7] = [
        Rule::Distance,
        Rule::Containment,
        Rule::Area,
        Rule::Aspect,
        Rule::Model,
        Rule::Class,
        Rule::Yaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Distance => "distance",
            Rule::Containment => "containment",
            Rule::Area => "area",
            Rule::Aspect => "aspect",
            Rule::Model => "model",
            Rule::Class => "class",
            Rule::Yaw => "yaw",
        }
    }

    fn passes(self, r: &DetectionRecord, rules: &RuleSet) -> bool {
        match self {
            Rule::Distance => rules
                .distance_bounds
                .is_none_or(|(lo, hi)| (lo..=hi).contains(&r.distance_m)),
            Rule::Containment => {
                !rules.box_in_frame
                    || (r.frontal_box.inside(rules.frontal_dims)
                        && r.birdeye_box.inside(rules.birdeye_dims))
            }
            Rule::Area => {
                let ok = |b: &BBox, lo: Option<f64>, hi: Option<f64>| {
                    lo.is_none_or(|lo| b.area() >= lo) && hi.is_none_or(|hi| b.area() <= hi)
                };
                ok(&r.frontal_box, rules.min_box_area.frontal, rules.max_box_area.frontal)
                    && ok(&r.birdeye_box, rules.min_box_area.birdeye, rules.max_box_area.birdeye)
            }
            Rule::Aspect => {
                let ok = |b: &BBox, bounds: Option<(f64, f64)>| {
                    bounds.is_none_or(|(lo, hi)| {
                        b.height() > 0.0 && (lo..=hi).contains(&(b.width() / b.height()))
                    })
                };
                ok(&r.frontal_box, rules.aspect_ratio_bounds.frontal)
                    && ok(&r.birdeye_box, rules.aspect_ratio_bounds.birdeye)
            }
            Rule::Model => {
                rules
                    .model_allowlist
                    .as_ref()
                    .is_none_or(|allow| allow.contains(&r.model_id))
                    && !rules.model_denylist.contains(&r.model_id)
            }
            Rule::Class => rules
                .class_allowlist
                .as_ref()
                .is_none_or(|allow| allow.contains(&r.class_label)),
            Rule::Yaw => !rules.yaw_valid || (0.0..360.0).contains(&r.yaw_deg),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// First rule the record fails, or `None` if it is reliable.
pub fn first_failure(r: &DetectionRecord, rules: &RuleSet) -> Option<Rule> {
    Rule::ORDER.into_iter().find(|rule| !rule.passes(r, rules))
}

pub fn discriminate(r: &DetectionRecord, rules: &RuleSet) -> bool {
    first_failure(r, rules).is_none()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RejectionReport {
    /// Indexed like [`Rule::ORDER`].
    pub counts: [usize; 7],
    pub parse_errors: Vec<LineError>,
}

impl RejectionReport {
    pub fn count(&self, rule: Rule) -> usize {
        self.counts[rule as usize]
    }

    pub fn total_rejected(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `rule,count` rows, plus a `parse_error` row.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "rule,count")?;
        for rule in Rule::ORDER {
            writeln!(w, "{},{}", rule.name(), self.count(rule))?;
        }
        writeln!(w, "parse_error,{}", self.parse_errors.len())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<DetectionRecord>,
    pub rejected: Vec<(DetectionRecord, Rule)>,
    pub report: RejectionReport,
}

/// Splits a record stream into kept and rejected parts.
pub fn filter_dataset(
    records: impl IntoIterator<Item = DetectionRecord>,
    rules: &RuleSet,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for r in records {
        match first_failure(&r, rules) {
            None => out.kept.push(r),
            Some(rule) => {
                out.report.counts[rule as usize] += 1;
                out.rejected.push((r, rule));
            }
        }
    }
    out
}
