use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::StabilizeError;
use crate::mask::{FeatureClass, SegMask};

/// Components smaller than this many pixels are treated as speckle.
pub const DEFAULT_MIN_INSTANCE_AREA: usize = 25;

/// E, SE, S, SW, W, NW, N, NE in image coordinates (y down): clockwise on screen.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Outer border of one 8-connected component, traced clockwise from its
/// top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    points: Vec<(u32, u32)>,
    class: FeatureClass,
    area: usize,
}

impl Contour {
    pub fn new(
        points: Vec<(u32, u32)>,
        class: FeatureClass,
        area: usize,
    ) -> Result<Self, StabilizeError> {
        if points.len() < 3 {
            return Err(StabilizeError::DegenerateContour(points.len()));
        }
        Ok(Self {
            points,
            class,
            area,
        })
    }

    pub fn points(&self) -> &[(u32, u32)] {
        &self.points
    }

    pub fn class(&self) -> FeatureClass {
        self.class
    }

    /// Pixel count of the traced component.
    pub fn area(&self) -> usize {
        self.area
    }

    /// Inclusive `(min_x, min_y, max_x, max_y)`.
    pub fn bounding_box(&self) -> (u32, u32, u32, u32) {
        let mut b = (u32::MAX, u32::MAX, 0, 0);
        for &(x, y) in &self.points {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }

    /// Whether the border reaches the left or right image edge.
    pub fn touches_side_edge(&self, width: u32) -> bool {
        let (min_x, _, max_x, _) = self.bounding_box();
        min_x == 0 || max_x + 1 >= width
    }
}

/// Moore-neighbour border following around the component containing `start`.
///
/// `start` must be the component's first pixel in row-major order, so its
/// west neighbour is outside the component.
pub fn trace_boundary(mask: &SegMask, start: (u32, u32)) -> Vec<(u32, u32)> {
    let class = mask.class_at(start.0, start.1);
    let member = |x: i64, y: i64| mask.get(x, y) == Some(class);
    let mut points = vec![start];
    let mut cur = (start.0 as i64, start.1 as i64);
    let mut backtrack = 4usize;
    let mut first_move: Option<usize> = None;
    let limit = 4 * mask.labels().len() + 8;

    for _ in 0..limit {
        let next = (1..=8)
            .map(|i| (backtrack + i) % 8)
            .find(|&d| member(cur.0 + DIRS[d].0, cur.1 + DIRS[d].1));
        let Some(d) = next else {
            break; // isolated pixel
        };
        if cur == (start.0 as i64, start.1 as i64) {
            match first_move {
                Some(f) if f == d => break,
                None => first_move = Some(d),
                _ => {}
            }
        }
        cur = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
        backtrack = if d % 2 == 0 { (d + 6) % 8 } else { (d + 5) % 8 };
        points.push((cur.0 as u32, cur.1 as u32));
    }
    // the walk ends on the start pixel; the contour is implicitly closed
    if points.len() > 1 && points.last() == Some(&start) {
        points.pop();
    }
    points
}

/// Splits the requested classes into 8-connected instances and traces each
/// one's outer border. Components below `min_area` pixels are dropped.
///
/// Output is ordered by class code, then by descending area, then by the
/// component's first pixel in row-major order.
pub fn extract_instances(
    mask: &SegMask,
    classes: &[FeatureClass],
    min_area: usize,
) -> Vec<Contour> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let wanted = |code: u8| {
        classes
            .iter()
            .any(|c| c.code() == code && *c != FeatureClass::Background)
    };
    let mut seen = vec![false; w * h];
    let mut found: Vec<(Contour, usize)> = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        let code = mask.labels()[start];
        if seen[start] || !wanted(code) {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut area = 0usize;
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !seen[j] && mask.labels()[j] == code {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if area < min_area {
            continue;
        }
        let points = trace_boundary(mask, ((start % w) as u32, (start / w) as u32));
        let class = FeatureClass::from_code(code).unwrap_or(FeatureClass::Background);
        if let Ok(c) = Contour::new(points, class, area) {
            found.push((c, start));
        }
    }
    found.sort_by(|a, b| {
        a.0.class
            .code()
            .cmp(&b.0.class.code())
            .then(b.0.area.cmp(&a.0.area))
            .then(a.1.cmp(&b.1))
    });
    found.into_iter().map(|(c, _)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::instance_pixels;
    use crate::mask::FeatureClass::*;
    use proptest::prelude::*;

    fn blocks(w: u32, h: u32, rects: &[(u32, u32, u32, u32, FeatureClass)]) -> SegMask {
        SegMask::from_fn(w, h, |x, y| {
            rects
                .iter()
                .find(|r| x >= r.0 && x < r.2 && y >= r.1 && y < r.3)
                .map(|r| r.4)
                .unwrap_or(Background)
        })
        .unwrap()
    }

    /// Independent union-find labelling used as the component-count oracle.
    fn oracle_components(mask: &SegMask, class: FeatureClass) -> Vec<usize> {
        let (w, h) = (mask.width() as usize, mask.height() as usize);
        let mut parent: Vec<usize> = (0..w * h).collect();
        fn find(p: &mut Vec<usize>, mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let is = |x: usize, y: usize| mask.class_at(x as u32, y as u32) == class;
        for y in 0..h {
            for x in 0..w {
                if !is(x, y) {
                    continue;
                }
                for (dx, dy) in [(1i64, 0i64), (-1, 1), (0, 1), (1, 1)] {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx >= 0 && nx < w as i64 && ny < h as i64 && is(nx as usize, ny as usize) {
                        let a = find(&mut parent, y * w + x);
                        let b = find(&mut parent, ny as usize * w + nx as usize);
                        parent[a] = b;
                    }
                }
            }
        }
        let mut sizes = std::collections::HashMap::new();
        for y in 0..h {
            for x in 0..w {
                if is(x, y) {
                    *sizes.entry(find(&mut parent, y * w + x)).or_insert(0) += 1;
                }
            }
        }
        let mut v: Vec<usize> = sizes.into_values().collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    }

    #[test]
    fn background_has_no_instances() {
        let m = SegMask::background(16, 16).unwrap();
        assert!(extract_instances(&m, &FeatureClass::MAPPABLE, 1).is_empty());
    }

    #[test]
    fn two_pole_blocks() {
        let m = blocks(40, 20, &[(2, 3, 12, 13, Pole), (25, 5, 35, 15, Pole)]);
        let found = extract_instances(&m, &[Pole], DEFAULT_MIN_INSTANCE_AREA);
        assert_eq!(found.len(), 2);
        assert!(found.iter().all(|c| c.class() == Pole && c.area() == 100));
        assert_eq!(oracle_components(&m, Pole), vec![100, 100]);
        // a 10x10 square has 36 border pixels
        assert_eq!(found[0].points().len(), 36);
        assert_eq!(found[0].bounding_box(), (2, 3, 11, 12));
    }

    #[test]
    fn speck_is_dropped() {
        let m = blocks(10, 10, &[(4, 4, 6, 5, Pole)]);
        assert!(extract_instances(&m, &[Pole], DEFAULT_MIN_INSTANCE_AREA).is_empty());
    }

    #[test]
    fn diagonal_pixels_stay_one_instance() {
        let m = SegMask::from_fn(8, 8, |x, y| if x == y { Pole } else { Background }).unwrap();
        let found = extract_instances(&m, &[Pole], 1);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].area(), 8);
        assert_eq!(instance_pixels(&m, &found[0]).len(), 8);
    }

    #[test]
    fn ordering_is_class_then_area() {
        let m = blocks(
            40,
            20,
            &[
                (0, 0, 5, 5, Pole),
                (10, 0, 20, 10, Pole),
                (25, 0, 30, 6, TrafficSign),
            ],
        );
        let found = extract_instances(&m, &[Pole, TrafficSign], 1);
        let got: Vec<_> = found.iter().map(|c| (c.class(), c.area())).collect();
        assert_eq!(got, vec![(TrafficSign, 30), (Pole, 100), (Pole, 25)]);
    }

    #[test]
    fn unrequested_classes_ignored() {
        let m = blocks(20, 20, &[(0, 0, 10, 10, Building)]);
        assert!(extract_instances(&m, &[Pole], 1).is_empty());
    }

    #[test]
    fn ring_with_hole_traces_outer_border() {
        let m = SegMask::from_fn(9, 9, |x, y| {
            let ring = (1..=7).contains(&x) && (1..=7).contains(&y);
            let hole = (3..=5).contains(&x) && (3..=5).contains(&y);
            if ring && !hole {
                Pole
            } else {
                Background
            }
        })
        .unwrap();
        let found = extract_instances(&m, &[Pole], 1);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].area(), 49 - 9);
        assert_eq!(instance_pixels(&m, &found[0]).len(), 40);
    }

    fn arb_mask() -> impl Strategy<Value = SegMask> {
        (3u32..20, 3u32..20).prop_flat_map(|(w, h)| {
            prop::collection::vec(
                prop::sample::select(vec![0u8, 0, 3, 5, 5]),
                (w * h) as usize,
            )
            .prop_map(move |l| SegMask::new(w, h, l).unwrap())
        })
    }

    proptest! {
        #[test]
        fn areas_match_components_and_are_pure(m in arb_mask(), min_area in 1usize..6) {
            for class in [TrafficSign, Pole] {
                let found = extract_instances(&m, &[class], min_area);
                let oracle: Vec<usize> = oracle_components(&m, class)
                    .into_iter()
                    .filter(|&a| a >= min_area)
                    .collect();
                let traced: Vec<usize> = found.iter().map(|c| c.area()).collect();
                // components of 1-2 pixels cannot form a 3-point contour
                let oracle_big: Vec<usize> = oracle.iter().copied().filter(|&a| a >= 3).collect();
                let traced_big: Vec<usize> = traced.iter().copied().filter(|&a| a >= 3).collect();
                prop_assert_eq!(traced_big, oracle_big);
                let total: usize = traced.iter().sum();
                prop_assert!(total <= m.count(class));
                for c in &found {
                    prop_assert!(c.points().len() >= 3);
                    prop_assert!(c.area() >= min_area);
                    let px = instance_pixels(&m, c);
                    prop_assert!(!px.is_empty());
                    for &(x, y) in c.points().iter().chain(px.iter()) {
                        prop_assert_eq!(m.class_at(x, y), class);
                    }
                    let n = c.points().len();
                    for i in 0..n {
                        let (a, b) = (c.points()[i], c.points()[(i + 1) % n]);
                        let adj = (a.0 as i64 - b.0 as i64).abs() <= 1
                            && (a.1 as i64 - b.1 as i64).abs() <= 1;
                        prop_assert!(adj, "contour not closed/adjacent at {}", i);
                    }
                }
            }
        }
    }
}
