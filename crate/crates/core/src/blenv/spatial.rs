use std::collections::BTreeSet;

use super::{fmt_fixed, SpatialFlag, SpatialReport};
use crate::geometry::Aabb;

/// Tolerance applied on each face when testing box containment.
pub const CONTAINMENT_SLACK: f64 = 1e-6;

/// Euclidean norm of the per-axis clearance between two boxes.
pub fn min_gap(a: &Aabb, b: &Aabb) -> f64 {
    let mut sq = 0.0;
    for i in 0..3 {
        let g = (a.min.axis(i) - b.max.axis(i)).max(b.min.axis(i) - a.max.axis(i)).max(0.0);
        sq += g * g;
    }
    sq.sqrt()
}

/// How a new box relates to one existing box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxRelation {
    /// The new box lies entirely inside the existing one.
    Contained,
    /// The boxes share positive volume but the new one is not enclosed.
    Overlapping,
    /// The closed boxes share boundary points only.
    Touching,
    Separated { gap: f64 },
}

pub fn relate(new: &Aabb, existing: &Aabb) -> BoxRelation {
    if new.is_within(existing, CONTAINMENT_SLACK) {
        return BoxRelation::Contained;
    }
    let overlap: [f64; 3] = std::array::from_fn(|i| {
        new.max.axis(i).min(existing.max.axis(i)) - new.min.axis(i).max(existing.min.axis(i))
    });
    if overlap.iter().all(|&o| o > 0.0) {
        BoxRelation::Overlapping
    } else if overlap.iter().all(|&o| o >= 0.0) {
        BoxRelation::Touching
    } else {
        BoxRelation::Separated { gap: min_gap(new, existing) }
    }
}

/// Runs the continuity and total-overlap checks of a new box against the scene.
pub fn classify_spatial(new_name: &str, new: Aabb, existing: &[(&str, Aabb)], touch_eps: f64) -> SpatialReport {
    debug_assert!(touch_eps > 0.0);
    let mut flags = BTreeSet::new();
    let mut contained_in = None;
    let mut overlapping_with = Vec::new();
    let mut nearest: Option<(&str, f64)> = None;

    for &(name, b) in existing {
        match relate(&new, &b) {
            BoxRelation::Contained => {
                if contained_in.is_none() {
                    contained_in = Some(name.to_string());
                }
            }
            BoxRelation::Overlapping => overlapping_with.push(name.to_string()),
            BoxRelation::Touching | BoxRelation::Separated { .. } => {}
        }
        let gap = min_gap(&new, &b);
        if nearest.is_none_or(|(_, g)| gap < g) {
            nearest = Some((name, gap));
        }
    }

    let mut nearest_gap = None;
    if contained_in.is_some() {
        flags.insert(SpatialFlag::TotalContainment);
    } else if let Some((name, gap)) = nearest {
        if gap > touch_eps {
            flags.insert(SpatialFlag::Disconnected);
            nearest_gap = Some((name.to_string(), gap));
        }
    }

    let summary_text = if let Some(host) = &contained_in {
        format!("'{new_name}' is entirely contained within '{host}'")
    } else if let Some((other, gap)) = &nearest_gap {
        format!("'{new_name}' has a gap of {} to '{other}'", fmt_fixed(*gap, 3))
    } else {
        format!("'{new_name}' placed without spatial problems")
    };

    SpatialReport {
        new_part: new_name.to_string(),
        new_aabb: new,
        flags,
        contained_in,
        nearest_gap,
        overlapping_with,
        summary_text,
    }
}

/// Connectivity of the graph with an edge wherever `min_gap <= touch_eps`.
/// Empty and single-box inputs are connected.
pub fn contact_graph_connected(boxes: &[Aabb], touch_eps: f64) -> bool {
    if boxes.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; boxes.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..boxes.len() {
            if !seen[j] && min_gap(&boxes[i], &boxes[j]) <= touch_eps {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use proptest::prelude::*;

    fn bx(min: [f64; 3], max: [f64; 3]) -> Aabb {
        Aabb::new(min.into(), max.into())
    }

    #[test]
    fn gap_examples() {
        let unit = bx([0.0; 3], [1.0; 3]);
        assert_eq!(min_gap(&unit, &bx([2.0, 0.0, 0.0], [3.0, 1.0, 1.0])), 1.0);
        assert!((min_gap(&unit, &bx([2.0; 3], [3.0; 3])) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(min_gap(&bx([0.0; 3], [2.0; 3]), &bx([1.0; 3], [3.0; 3])), 0.0);
    }

    #[test]
    fn classify_examples() {
        let unit = bx([0.0; 3], [1.0; 3]);
        let r = classify_spatial("n", bx([0.1; 3], [0.2; 3]), &[("e", unit)], 1e-3);
        assert_eq!(r.flags, BTreeSet::from([SpatialFlag::TotalContainment]));

        let r = classify_spatial("n", bx([1.0, 0.0, 0.0], [2.0, 1.0, 1.0]), &[("e", unit)], 1e-3);
        assert!(r.flags.is_empty());
        assert!(r.overlapping_with.is_empty());

        let near = bx([1.0005, 0.0, 0.0], [2.0, 1.0, 1.0]);
        assert!(classify_spatial("n", near, &[("e", unit)], 1e-3).flags.is_empty());
        let r = classify_spatial("n", near, &[("e", unit)], 1e-4);
        assert_eq!(r.flags, BTreeSet::from([SpatialFlag::Disconnected]));
        let (_, gap) = r.nearest_gap.unwrap();
        assert!((gap - 5e-4).abs() < 1e-12);
    }

    #[test]
    fn enclosing_new_part_is_informational() {
        let small = bx([0.4; 3], [0.6; 3]);
        let r = classify_spatial("big", bx([0.0; 3], [1.0; 3]), &[("small", small)], 1e-3);
        assert!(r.flags.is_empty());
        assert_eq!(r.overlapping_with, vec!["small".to_string()]);
    }

    #[test]
    fn connectivity() {
        let a = bx([0.0; 3], [1.0; 3]);
        let b = bx([1.0, 0.0, 0.0], [2.0, 1.0, 1.0]);
        let c = bx([5.0; 3], [6.0; 3]);
        assert!(contact_graph_connected(&[], 1e-3));
        assert!(contact_graph_connected(&[a, b], 1e-3));
        assert!(!contact_graph_connected(&[a, b, c], 1e-3));
    }

    fn arb_box() -> impl Strategy<Value = Aabb> {
        (prop::array::uniform3(-10.0f64..10.0), prop::array::uniform3(0.0f64..5.0)).prop_map(|(lo, ext)| {
            let min = Vec3::from(lo);
            Aabb::new(min, min + Vec3::from(ext))
        })
    }

    proptest! {
        #[test]
        fn gap_symmetric_nonnegative(a in arb_box(), b in arb_box()) {
            let g = min_gap(&a, &b);
            prop_assert!(g >= 0.0);
            prop_assert_eq!(g, min_gap(&b, &a));
        }

        #[test]
        fn flags_are_exclusive(new in arb_box(), olds in prop::collection::vec(arb_box(), 0..6), eps in 1e-6f64..1.0) {
            let named: Vec<(&str, Aabb)> = olds.iter().map(|b| ("p", *b)).collect();
            let r = classify_spatial("n", new, &named, eps);
            prop_assert!(r.flags.len() <= 1);
            prop_assert_eq!(r.nearest_gap.is_some(), r.flags.contains(&SpatialFlag::Disconnected));
            if named.is_empty() {
                prop_assert!(r.flags.is_empty());
            }
        }
    }
}
