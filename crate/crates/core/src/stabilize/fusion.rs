use super::{Homography, StabilizeError};
use crate::exec::Exec;
use crate::mask::{FeatureClass, SegMask};

/// Re-samples `mask` into the frame `h` maps it to. Each destination pixel
/// takes the nearest source label under `h⁻¹`; pixels whose pre-image leaves
/// the source frame become background.
pub fn warp_mask(mask: &SegMask, h: &Homography) -> Result<SegMask, StabilizeError> {
    warp_mask_with(mask, h, Exec::default())
}

pub fn warp_mask_with(
    mask: &SegMask,
    h: &Homography,
    exec: Exec,
) -> Result<SegMask, StabilizeError> {
    if h.is_identity() {
        return Ok(mask.clone());
    }
    let inv = h.inverse()?;
    let (w, ht) = (mask.width(), mask.height());
    let mut labels = vec![FeatureClass::Background.code(); w as usize * ht as usize];
    exec.fill_rows(&mut labels, w as usize, |y, row| {
        for (x, cell) in row.iter_mut().enumerate() {
            if let Some((sx, sy)) = inv.apply(x as f64, y as f64) {
                let (sx, sy) = (sx.round(), sy.round());
                if sx >= 0.0 && sy >= 0.0 && sx < w as f64 && sy < ht as f64 {
                    *cell = mask.code_at(sx as u32, sy as u32);
                }
            }
        }
    });
    // codes are copied from a validated mask
    Ok(SegMask::new(w, ht, labels).expect("warped labels come from a valid mask"))
}

/// Modal label of one pixel's stack; `labels[0]` is the captured frame.
///
/// Ties go to the captured label when it is among the modes, otherwise to the
/// lowest class code among them.
pub fn vote_pixel(labels: impl IntoIterator<Item = u8>) -> u8 {
    let mut counts = [0u32; FeatureClass::ALL.len()];
    let mut labels = labels.into_iter();
    let Some(captured) = labels.next() else {
        return FeatureClass::Background.code();
    };
    counts[captured as usize] += 1;
    for l in labels {
        counts[l as usize] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    if counts[captured as usize] == best {
        return captured;
    }
    counts.iter().position(|&c| c == best).unwrap_or(0) as u8
}

/// Per-pixel majority vote of the captured mask and the aligned preceding masks.
pub fn majority_vote(
    captured: &SegMask,
    aligned_previous: &[SegMask],
) -> Result<SegMask, StabilizeError> {
    majority_vote_with(captured, aligned_previous, Exec::default())
}

pub fn majority_vote_with(
    captured: &SegMask,
    aligned_previous: &[SegMask],
    exec: Exec,
) -> Result<SegMask, StabilizeError> {
    if let Some(bad) = aligned_previous
        .iter()
        .find(|m| !m.same_dimensions(captured))
    {
        return Err(StabilizeError::DimensionMismatch(format!(
            "captured is {}x{}, previous is {}x{}",
            captured.width(),
            captured.height(),
            bad.width(),
            bad.height()
        )));
    }
    if aligned_previous.is_empty() {
        return Ok(captured.clone());
    }
    let w = captured.width() as usize;
    let mut labels = vec![0u8; captured.labels().len()];
    exec.fill_rows(&mut labels, w, |y, row| {
        let base = y * w;
        for (x, cell) in row.iter_mut().enumerate() {
            let i = base + x;
            *cell = vote_pixel(
                std::iter::once(captured.labels()[i])
                    .chain(aligned_previous.iter().map(|m| m.labels()[i])),
            );
        }
    });
    Ok(SegMask::new(captured.width(), captured.height(), labels)
        .expect("voted labels come from valid masks"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::FeatureClass::*;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    fn mask_from(w: u32, h: u32, codes: &[u8]) -> SegMask {
        SegMask::new(w, h, codes.to_vec()).unwrap()
    }

    #[test]
    fn identity_warp_is_noop() {
        let m = mask_from(3, 2, &[0, 1, 2, 3, 4, 5]);
        assert_eq!(warp_mask(&m, &Homography::identity()).unwrap(), m);
    }

    #[test]
    fn one_pixel_translation_on_4x4() {
        #[rustfmt::skip]
        let m = mask_from(4, 4, &[
            1, 2, 3, 5,
            1, 2, 3, 5,
            1, 2, 3, 5,
            1, 2, 3, 5,
        ]);
        let shifted = warp_mask(&m, &Homography::translation(1.0, 0.0)).unwrap();
        #[rustfmt::skip]
        let expected = mask_from(4, 4, &[
            0, 1, 2, 3,
            0, 1, 2, 3,
            0, 1, 2, 3,
            0, 1, 2, 3,
        ]);
        assert_eq!(shifted, expected);
    }

    #[test]
    fn singular_warp_rejected() {
        assert!(Homography::new(Matrix3::zeros()).is_err());
    }

    #[test]
    fn vote_examples() {
        let m = |c: FeatureClass| mask_from(1, 1, &[c.code()]);
        assert_eq!(majority_vote(&m(Pole), &[]).unwrap(), m(Pole));
        assert_eq!(
            majority_vote(&m(Pole), &[m(Pole), m(TrafficSign)]).unwrap(),
            m(Pole)
        );
        // 2-2 tie, captured label among the modes
        assert_eq!(
            majority_vote(&m(TrafficSign), &[m(Pole), m(Pole), m(TrafficSign)]).unwrap(),
            m(TrafficSign)
        );
        // 2-2 tie, captured label not a mode: lowest code wins
        assert_eq!(
            vote_pixel([
                Building.code(),
                Pole.code(),
                Pole.code(),
                Sidewalk.code(),
                Sidewalk.code()
            ]),
            Sidewalk.code()
        );
    }

    #[test]
    fn vote_rejects_mismatched_dimensions() {
        let a = SegMask::background(2, 2).unwrap();
        let b = SegMask::background(3, 2).unwrap();
        assert!(matches!(
            majority_vote(&a, &[b]),
            Err(StabilizeError::DimensionMismatch(_))
        ));
    }

    fn arb_mask() -> impl Strategy<Value = SegMask> {
        (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
            prop::collection::vec(0u8..6, (w * h) as usize)
                .prop_map(move |l| SegMask::new(w, h, l).unwrap())
        })
    }

    /// Brute-force mode with the documented tie-break.
    fn oracle_vote(stack: &[u8]) -> u8 {
        let count = |c: u8| stack.iter().filter(|&&l| l == c).count();
        let best = (0u8..6).map(count).max().unwrap();
        if count(stack[0]) == best {
            stack[0]
        } else {
            (0u8..6).find(|&c| count(c) == best).unwrap()
        }
    }

    proptest! {
        #[test]
        fn vote_is_idempotent(m in arb_mask(), k in 0usize..5) {
            let copies = vec![m.clone(); k];
            prop_assert_eq!(majority_vote(&m, &copies).unwrap(), m);
        }

        #[test]
        fn vote_matches_oracle_and_invents_nothing(
            (cap, prev) in arb_mask().prop_flat_map(|m| {
                let (w, h) = (m.width(), m.height());
                let prev = prop::collection::vec(
                    prop::collection::vec(0u8..6, (w * h) as usize)
                        .prop_map(move |l| SegMask::new(w, h, l).unwrap()),
                    0..5,
                );
                (Just(m), prev)
            })
        ) {
            let seq = majority_vote_with(&cap, &prev, Exec::Sequential).unwrap();
            let par = majority_vote_with(&cap, &prev, Exec::Parallel).unwrap();
            prop_assert_eq!(&seq, &par);
            for i in 0..cap.labels().len() {
                let stack: Vec<u8> = std::iter::once(cap.labels()[i])
                    .chain(prev.iter().map(|m| m.labels()[i]))
                    .collect();
                prop_assert!(stack.contains(&seq.labels()[i]));
                prop_assert_eq!(seq.labels()[i], oracle_vote(&stack));
            }
        }

        #[test]
        fn integer_translation_round_trips_in_frame(
            m in arb_mask(), dx in -4i32..5, dy in -4i32..5
        ) {
            let h = Homography::translation(dx as f64, dy as f64);
            let there = warp_mask(&m, &h).unwrap();
            let back = warp_mask(&there, &h.inverse().unwrap()).unwrap();
            for y in 0..m.height() as i32 {
                for x in 0..m.width() as i32 {
                    let (tx, ty) = (x + dx, y + dy);
                    let stayed = tx >= 0 && ty >= 0
                        && tx < m.width() as i32 && ty < m.height() as i32;
                    if stayed {
                        prop_assert_eq!(back.code_at(x as u32, y as u32), m.code_at(x as u32, y as u32));
                    }
                }
            }
        }
    }
}
