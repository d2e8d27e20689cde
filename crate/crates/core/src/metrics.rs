use crate::error::{FiestaError, Result};
use crate::image::LabelMap;

/// Dice overlap for every foreground class `1..C`; a class absent from both
/// maps scores 1.
pub fn dice_score(pred: &LabelMap, gt: &LabelMap) -> Result<Vec<f64>> {
    if pred.dims() != gt.dims() {
        return Err(FiestaError::invalid(format!(
            "dice: dimension mismatch {:?} vs {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    if pred.num_classes() != gt.num_classes() {
        return Err(FiestaError::invalid(format!(
            "dice: class count mismatch {} vs {}",
            pred.num_classes(),
            gt.num_classes()
        )));
    }
    let classes = pred.num_classes();
    let mut inter = vec![0usize; classes];
    let mut pred_n = vec![0usize; classes];
    let mut gt_n = vec![0usize; classes];
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        pred_n[p as usize] += 1;
        gt_n[g as usize] += 1;
        if p == g {
            inter[p as usize] += 1;
        }
    }
    Ok((1..classes)
        .map(|c| {
            let denom = pred_n[c] + gt_n[c];
            if denom == 0 {
                1.0
            } else {
                2.0 * inter[c] as f64 / denom as f64
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_maps_score_one() {
        let l = LabelMap::new(2, 3, 3, vec![0, 1, 2, 2, 1, 0]).unwrap();
        assert_eq!(dice_score(&l, &l).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn disjoint_masks_score_zero() {
        let a = LabelMap::new(1, 4, 2, vec![1, 1, 0, 0]).unwrap();
        let b = LabelMap::new(1, 4, 2, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(dice_score(&a, &b).unwrap(), vec![0.0]);
    }

    #[test]
    fn half_overlap() {
        let n = 400;
        let a: Vec<u16> = (0..n).map(|i| (i < 100) as u16).collect();
        let b: Vec<u16> = (0..n).map(|i| (50..150).contains(&i) as u16).collect();
        let a = LabelMap::new(20, 20, 2, a).unwrap();
        let b = LabelMap::new(20, 20, 2, b).unwrap();
        assert_eq!(dice_score(&a, &b).unwrap(), vec![0.5]);
        assert_eq!(dice_score(&b, &a).unwrap(), vec![0.5]);
    }

    #[test]
    fn absent_class_scores_one() {
        let a = LabelMap::new(1, 2, 3, vec![0, 1]).unwrap();
        assert_eq!(dice_score(&a, &a).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn mismatches_rejected() {
        let a = LabelMap::new(1, 2, 2, vec![0, 1]).unwrap();
        let b = LabelMap::new(2, 1, 2, vec![0, 1]).unwrap();
        let c = LabelMap::new(1, 2, 3, vec![0, 1]).unwrap();
        assert!(dice_score(&a, &b).is_err());
        assert!(dice_score(&a, &c).is_err());
    }
}
