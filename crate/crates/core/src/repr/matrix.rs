//! Joint-by-time coordinate matrices and the numeric steps applied to them.
//!
//! Matrices are `J x T x C` arrays: rows follow a chain, columns are frames,
//! channels are coordinate axes.

use ndarray::{Array3, Axis};

use super::{Chain, ReprError};
use crate::skeleton::{Body, JointId, SkeletonSequence};

/// Positions of the chain joints relative to `reference`.
pub fn reference_transform(body: &Body, chain: &Chain, reference: JointId) -> Vec<[f64; 3]> {
    let origin = body.position(reference);
    chain
        .joints()
        .iter()
        .map(|&j| {
            let p = body.position(j);
            [p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]]
        })
        .collect()
}

/// Stacks the chain positions of body `slot` over all frames, optionally
/// relative to a reference joint of the same frame.
pub fn assemble_matrix(
    seq: &SkeletonSequence,
    slot: usize,
    chain: &Chain,
    reference: Option<JointId>,
) -> Result<Array3<f64>, ReprError> {
    let mut m = Array3::zeros((chain.len(), seq.frames.len(), 3));
    for (t, frame) in seq.frames.iter().enumerate() {
        let body = frame
            .bodies
            .get(slot)
            .ok_or(ReprError::MissingBodySlot { frame: t, slot })?;
        let origin = reference.map_or([0.0; 3], |r| body.position(r));
        for (row, &joint) in chain.joints().iter().enumerate() {
            let p = body.position(joint);
            for axis in 0..3 {
                m[[row, t, axis]] = p[axis] - origin[axis];
            }
        }
    }
    Ok(m)
}

/// Forward differences `p(t+1) - p(t)` of body `slot` along `chain`,
/// giving `J x (T-1) x 3`.
pub fn motion_matrix(
    seq: &SkeletonSequence,
    slot: usize,
    chain: &Chain,
) -> Result<Array3<f64>, ReprError> {
    if seq.frames.len() < 2 {
        return Err(ReprError::TooShort {
            frames: seq.frames.len(),
        });
    }
    let abs = assemble_matrix(seq, slot, chain, None)?;
    let t = abs.len_of(Axis(1));
    let later = abs.slice(ndarray::s![.., 1..t, ..]);
    let earlier = abs.slice(ndarray::s![.., 0..t - 1, ..]);
    Ok(&later - &earlier)
}

/// Min-max scaling to `[0, 1]`, per channel over the whole matrix. A
/// channel whose values are all equal becomes 0.5.
pub fn normalize_minmax(m: &Array3<f64>) -> Result<Array3<f64>, ReprError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ReprError::NonFinite);
    }
    let mut out = m.clone();
    for mut channel in out.axis_iter_mut(Axis(2)) {
        let (lo, hi) = channel
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi > lo {
            let span = hi - lo;
            channel.mapv_inplace(|v| ((v - lo) / span).clamp(0.0, 1.0));
        } else {
            channel.fill(0.5);
        }
    }
    Ok(out)
}

/// Linear interpolation along the time axis to `target` columns.
///
/// Output column `k` samples source coordinate `k * (T - 1) / (target - 1)`,
/// so both endpoints are kept exactly. A single target column samples
/// source coordinate 0.
pub fn resize_temporal(m: &Array3<f64>, target: usize) -> Result<Array3<f64>, ReprError> {
    let (rows, frames, channels) = m.dim();
    if frames == 0 || target == 0 {
        return Err(ReprError::EmptyAxis);
    }
    if frames == target {
        return Ok(m.clone());
    }
    let mut out = Array3::zeros((rows, target, channels));
    let scale = if target > 1 {
        (frames - 1) as f64 / (target - 1) as f64
    } else {
        0.0
    };
    for k in 0..target {
        let pos = if k == target - 1 && target > 1 {
            (frames - 1) as f64
        } else {
            k as f64 * scale
        };
        let i0 = (pos.floor() as usize).min(frames - 1);
        let i1 = (i0 + 1).min(frames - 1);
        let frac = pos - i0 as f64;
        for r in 0..rows {
            for c in 0..channels {
                let a = m[[r, i0, c]];
                let b = m[[r, i1, c]];
                out[[r, k, c]] = if frac == 0.0 { a } else { a + (b - a) * frac };
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn minmax_direct_formula() {
        let m = Array3::from_shape_vec((3, 1, 1), vec![-1.0, 0.0, 3.0]).unwrap();
        let n = normalize_minmax(&m).unwrap();
        assert_eq!(n.iter().copied().collect::<Vec<_>>(), [0.0, 0.25, 1.0]);
    }

    #[test]
    fn minmax_constant_channel() {
        let m = Array3::from_elem((4, 5, 3), 2.0);
        assert!(normalize_minmax(&m).unwrap().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn minmax_non_finite() {
        let mut m = Array3::zeros((2, 2, 1));
        m[[1, 1, 0]] = f64::NAN;
        assert!(matches!(normalize_minmax(&m), Err(ReprError::NonFinite)));
    }

    #[test]
    fn resize_midpoint() {
        let m = Array3::from_shape_vec((1, 2, 1), vec![1.0, 4.0]).unwrap();
        let r = resize_temporal(&m, 3).unwrap();
        assert_eq!(r.iter().copied().collect::<Vec<_>>(), [1.0, 2.5, 4.0]);
    }

    #[test]
    fn resize_single_frame_replicates() {
        let m = Array3::from_shape_vec((2, 1, 1), vec![3.0, -1.0]).unwrap();
        let r = resize_temporal(&m, 4).unwrap();
        assert_eq!(r.dim(), (2, 4, 1));
        assert!(r.slice(ndarray::s![0, .., 0]).iter().all(|&v| v == 3.0));
        assert!(r.slice(ndarray::s![1, .., 0]).iter().all(|&v| v == -1.0));
    }

    #[test]
    fn resize_to_one_column_takes_first_frame() {
        let m = Array3::from_shape_vec((1, 3, 1), vec![5.0, 6.0, 7.0]).unwrap();
        let r = resize_temporal(&m, 1).unwrap();
        assert_eq!(r[[0, 0, 0]], 5.0);
    }

    #[test]
    fn resize_rejects_empty() {
        let m = Array3::<f64>::zeros((1, 0, 1));
        assert!(resize_temporal(&m, 10).is_err());
        let m = Array3::<f64>::zeros((1, 3, 1));
        assert!(resize_temporal(&m, 0).is_err());
    }
}
