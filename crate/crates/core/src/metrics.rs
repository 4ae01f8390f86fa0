//! Evaluation protocols: root-aligned MPJPE, rigid-aligned MPJPE, 3DPCK,
//! AUC, and attribute accuracy, with an order-independent shard-and-reduce
//! evaluator that is bitwise identical to the single-pass computation.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{procrustes_align, root_relative, AttributeVector, GeometryError};
use crate::skeleton::{pose_dist, Pose3D, ALL_JOINTS, NUM_JOINTS};

/// AUC averages 3DPCK over 5, 10, ..., 150 mm.
pub const AUC_GRID_START_MM: f64 = 5.0;
pub const AUC_GRID_STEP_MM: f64 = 5.0;
pub const AUC_GRID_POINTS: usize = 30;
/// Default 3DPCK threshold.
pub const PCK_DEFAULT_THRESHOLD_MM: f64 = 150.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("prediction and ground-truth counts differ: {pred} vs {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("sample {index}: {source}")]
    Geometry {
        index: usize,
        #[source]
        source: GeometryError,
    },
}

/// Per-joint and mean root-aligned position error for one pose pair, mm.
pub fn mpjpe_p1(pred: &Pose3D, gt: &Pose3D) -> ([f64; NUM_JOINTS], f64) {
    let p = root_relative(pred);
    let g = root_relative(gt);
    let mut per_joint = [0.0; NUM_JOINTS];
    for &j in &ALL_JOINTS {
        per_joint[j.index()] = pose_dist(p.coords[j.index()], g.coords[j.index()]);
    }
    let mean = per_joint.iter().sum::<f64>() / NUM_JOINTS as f64;
    (per_joint, mean)
}

/// Mean position error after rigid Procrustes alignment, mm.
pub fn mpjpe_p2(pred: &Pose3D, gt: &Pose3D) -> Result<f64, GeometryError> {
    let aligned = procrustes_align(pred, gt, false)?;
    let sum: f64 = (0..NUM_JOINTS)
        .map(|i| pose_dist(aligned.coords[i], gt.coords[i]))
        .sum();
    Ok(sum / NUM_JOINTS as f64)
}

/// Fraction of (sample, joint) pairs with root-aligned error strictly
/// below the threshold.
pub fn pck3d(preds: &[Pose3D], gts: &[Pose3D], threshold_mm: f64) -> Result<f64, MetricError> {
    if threshold_mm <= 0.0 {
        return Err(MetricError::BadThreshold(threshold_mm));
    }
    let errors = joint_errors(preds, gts)?;
    Ok(pck_of_errors(&errors, threshold_mm))
}

/// Mean of 3DPCK over the 5..150 mm grid.
pub fn auc(preds: &[Pose3D], gts: &[Pose3D]) -> Result<f64, MetricError> {
    let errors = joint_errors(preds, gts)?;
    Ok(auc_of_errors(&errors))
}

fn pck_of_errors(errors: &[[f64; NUM_JOINTS]], threshold_mm: f64) -> f64 {
    let total = errors.len() * NUM_JOINTS;
    let hits: usize = errors
        .iter()
        .map(|e| e.iter().filter(|&&d| d < threshold_mm).count())
        .sum();
    hits as f64 / total as f64
}

fn auc_of_errors(errors: &[[f64; NUM_JOINTS]]) -> f64 {
    let mut acc = 0.0;
    for k in 0..AUC_GRID_POINTS {
        let t = AUC_GRID_START_MM + AUC_GRID_STEP_MM * k as f64;
        acc += pck_of_errors(errors, t);
    }
    acc / AUC_GRID_POINTS as f64
}

fn joint_errors(preds: &[Pose3D], gts: &[Pose3D]) -> Result<Vec<[f64; NUM_JOINTS]>, MetricError> {
    if preds.len() != gts.len() {
        return Err(MetricError::LengthMismatch {
            pred: preds.len(),
            gt: gts.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(preds
        .iter()
        .zip(gts)
        .map(|(p, g)| mpjpe_p1(p, g).0)
        .collect())
}

/// Exact-match rate per labeled joint and the mean over the nine.
pub fn attribute_accuracy(
    pred: &[AttributeVector],
    gt: &[AttributeVector],
) -> Result<([f64; 9], f64), MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut hits = [0usize; 9];
    for (p, g) in pred.iter().zip(gt) {
        for j in 0..9 {
            if p.labels[j] == g.labels[j] {
                hits[j] += 1;
            }
        }
    }
    let mut per_joint = [0.0; 9];
    for j in 0..9 {
        per_joint[j] = hits[j] as f64 / pred.len() as f64;
    }
    let mean = per_joint.iter().sum::<f64>() / 9.0;
    Ok((per_joint, mean))
}

/// Full accuracy report of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_joint_mpjpe_mm: [f64; NUM_JOINTS],
    pub mpjpe_p1_mm: f64,
    pub mpjpe_p2_mm: f64,
    pub pck_threshold_mm: f64,
    pub pck3d: f64,
    pub auc: f64,
    pub attr_per_joint: Option<[f64; 9]>,
    pub attr_mean: Option<f64>,
    pub domain_accuracy: Option<f64>,
    pub samples: usize,
}

impl EvalReport {
    /// One row per joint plus summary rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,value\n");
        for &j in &ALL_JOINTS {
            out.push_str(&format!(
                "mpjpe_p1_mm/{},{}\n",
                j.name(),
                self.per_joint_mpjpe_mm[j.index()]
            ));
        }
        out.push_str(&format!("mpjpe_p1_mm/mean,{}\n", self.mpjpe_p1_mm));
        out.push_str(&format!("mpjpe_p2_mm/mean,{}\n", self.mpjpe_p2_mm));
        out.push_str(&format!(
            "pck3d@{}mm,{}\n",
            self.pck_threshold_mm, self.pck3d
        ));
        out.push_str(&format!("auc,{}\n", self.auc));
        if let Some(per) = &self.attr_per_joint {
            for (i, &j) in crate::geometry::ATTRIBUTE_JOINTS.iter().enumerate() {
                out.push_str(&format!("attr_accuracy/{},{}\n", j.name(), per[i]));
            }
        }
        if let Some(m) = self.attr_mean {
            out.push_str(&format!("attr_accuracy/mean,{m}\n"));
        }
        if let Some(d) = self.domain_accuracy {
            out.push_str(&format!("domain_accuracy,{d}\n"));
        }
        out.push_str(&format!("samples,{}\n", self.samples));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report json")
    }
}

/// PCK as a function of threshold over the AUC grid, for plots.
pub fn pck_curve(preds: &[Pose3D], gts: &[Pose3D]) -> Result<Vec<(f64, f64)>, MetricError> {
    let errors = joint_errors(preds, gts)?;
    Ok((0..AUC_GRID_POINTS)
        .map(|k| {
            let t = AUC_GRID_START_MM + AUC_GRID_STEP_MM * k as f64;
            (t, pck_of_errors(&errors, t))
        })
        .collect())
}

/// Per-sample quantities are computed independently (optionally in
/// parallel shards); the reduction collects them in sample order and
/// folds sequentially, so the result is bitwise independent of the shard
/// layout and thread count.
pub fn pose_report(
    preds: &[Pose3D],
    gts: &[Pose3D],
    pck_threshold_mm: f64,
    threads: usize,
) -> Result<EvalReport, MetricError> {
    if preds.len() != gts.len() {
        return Err(MetricError::LengthMismatch {
            pred: preds.len(),
            gt: gts.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    if pck_threshold_mm <= 0.0 {
        return Err(MetricError::BadThreshold(pck_threshold_mm));
    }

    type Row = ([f64; NUM_JOINTS], f64);
    let compute = |(p, g): (&Pose3D, &Pose3D)| -> Result<Row, GeometryError> {
        let (per_joint, _) = mpjpe_p1(p, g);
        let p2 = mpjpe_p2(p, g)?;
        Ok((per_joint, p2))
    };

    let rows: Vec<Result<Row, GeometryError>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| preds.par_iter().zip(gts.par_iter()).map(compute).collect())
    } else {
        preds.iter().zip(gts.iter()).map(compute).collect()
    };

    let mut errors: Vec<[f64; NUM_JOINTS]> = Vec::with_capacity(rows.len());
    let mut p2_sum = 0.0;
    for (i, row) in rows.into_iter().enumerate() {
        let (per_joint, p2) = row.map_err(|source| MetricError::Geometry { index: i, source })?;
        errors.push(per_joint);
        p2_sum += p2;
    }
    let n = errors.len();
    let mut per_joint_mean = [0.0; NUM_JOINTS];
    for e in &errors {
        for j in 0..NUM_JOINTS {
            per_joint_mean[j] += e[j];
        }
    }
    for v in &mut per_joint_mean {
        *v /= n as f64;
    }
    let p1_mean = per_joint_mean.iter().sum::<f64>() / NUM_JOINTS as f64;

    Ok(EvalReport {
        per_joint_mpjpe_mm: per_joint_mean,
        mpjpe_p1_mm: p1_mean,
        mpjpe_p2_mm: p2_sum / n as f64,
        pck_threshold_mm,
        pck3d: pck_of_errors(&errors, pck_threshold_mm),
        auc: auc_of_errors(&errors),
        attr_per_joint: None,
        attr_mean: None,
        domain_accuracy: None,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Attribute;
    use crate::skeleton::{JointId, CANONICAL_REST_POSE};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn canonical() -> Pose3D {
        Pose3D::new(CANONICAL_REST_POSE)
    }

    fn perturbed(rng: &mut StdRng, amp: f64) -> Pose3D {
        let mut p = canonical();
        for c in &mut p.coords {
            for k in 0..3 {
                c[k] += rng.gen_range(-amp..amp);
            }
        }
        p
    }

    #[test]
    fn p1_zero_for_identical_and_translated() {
        let p = canonical();
        let (_, mean) = mpjpe_p1(&p, &p);
        assert_eq!(mean, 0.0);
        let mut moved = p.clone();
        for c in &mut moved.coords {
            c[0] += 123.0;
            c[1] -= 44.0;
            c[2] += 9.0;
        }
        let (_, mean) = mpjpe_p1(&moved, &p);
        assert!(mean < 1e-9);
    }

    #[test]
    fn p1_single_joint_offset() {
        let p = canonical();
        let mut q = p.clone();
        q.coords[JointId::LWrist.index()][0] += 10.0;
        let (per, mean) = mpjpe_p1(&q, &p);
        assert!((per[JointId::LWrist.index()] - 10.0).abs() < 1e-12);
        assert!((mean - 10.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn p2_absorbs_rigid_transforms() {
        let p = canonical();
        assert!(mpjpe_p2(&p, &p).unwrap() < 1e-10);
        let ang: f64 = 0.7;
        let (s, c) = ang.sin_cos();
        let mut moved = p.clone();
        for q in &mut moved.coords {
            let (x, z) = (q[0], q[2]);
            q[0] = c * x - s * z + 500.0;
            q[2] = s * x + c * z - 250.0;
            q[1] += 100.0;
        }
        assert!(mpjpe_p2(&moved, &p).unwrap() < 1e-8);
    }

    #[test]
    fn p2_dominance_over_random_pairs() {
        // Rigid alignment can only reduce the SQUARED error relative to any
        // other rigid placement, root alignment included: that is asserted.
        // The mean-distance version usually drops too, but is not a
        // theorem; violations are counted and must stay rare and small.
        let mut rng = StdRng::seed_from_u64(1);
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let a = perturbed(&mut rng, 120.0);
            let b = perturbed(&mut rng, 120.0);

            let sq = |x: &Pose3D, y: &Pose3D| -> f64 {
                (0..NUM_JOINTS)
                    .map(|i| {
                        let d = pose_dist(x.coords[i], y.coords[i]);
                        d * d
                    })
                    .sum()
            };
            let aligned = procrustes_align(&a, &b, false).unwrap();
            let rooted_a = root_relative(&a);
            let rooted_b = root_relative(&b);
            assert!(
                sq(&aligned, &b) <= sq(&rooted_a, &rooted_b) + 1e-9,
                "squared error not minimal"
            );

            let (_, p1) = mpjpe_p1(&a, &b);
            let p2 = mpjpe_p2(&a, &b).unwrap();
            if p2 > p1 + 1e-9 {
                violations += 1;
                worst = worst.max((p2 - p1) / p1);
            }
        }
        println!("mean-distance dominance violations: {violations}/1000 (worst +{:.2}%)", worst * 100.0);
        assert!(violations < 50, "violations {violations}");
        assert!(worst < 0.05, "worst relative excess {worst}");
    }

    #[test]
    fn pck_counts_strictly_below_threshold() {
        let gt = vec![canonical(); 1];
        let mut pred = canonical();
        // every non-root joint off by exactly the threshold; the root is
        // exact under root alignment, boundary errors do not count
        for (i, c) in pred.coords.iter_mut().enumerate() {
            if i != JointId::Pelvis.index() {
                c[0] += 150.0;
            }
        }
        let frac = pck3d(&[pred], &gt, 150.0).unwrap();
        assert!((frac - 1.0 / 16.0).abs() < 1e-12);
        assert_eq!(pck3d(&gt, &gt, 150.0).unwrap(), 1.0);
    }

    #[test]
    fn pck_hand_built_fraction() {
        // 4 joints moved: 3 stay below 150, 1 goes above
        let gt = canonical();
        let mut pred = canonical();
        pred.coords[0][0] += 50.0;
        pred.coords[1][0] += 100.0;
        pred.coords[2][1] += 149.0;
        pred.coords[3][2] += 200.0;
        let frac = pck3d(&[pred], &[gt], 150.0).unwrap();
        assert!((frac - 15.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn auc_analytic_cases() {
        let gt = vec![canonical(); 2];
        assert_eq!(auc(&gt, &gt).unwrap(), 1.0);

        // all non-root errors beyond the grid end: only the root passes
        let mut far = canonical();
        for (i, c) in far.coords.iter_mut().enumerate() {
            if i != JointId::Pelvis.index() {
                c[0] += 200.0;
            }
        }
        let a = auc(&[far], &[canonical()]).unwrap();
        assert!((a - 1.0 / 16.0).abs() < 1e-12);

        // non-root errors exactly 75 mm: thresholds 80..150 pass, 15 of 30
        let mut at75 = canonical();
        for (i, c) in at75.coords.iter_mut().enumerate() {
            if i != JointId::Pelvis.index() {
                c[1] += 75.0;
            }
        }
        let a75 = auc(&[at75], &[canonical()]).unwrap();
        let want = (15.0 / 16.0) * 0.5 + (1.0 / 16.0) * 1.0;
        assert!((a75 - want).abs() < 1e-12, "auc {a75} want {want}");
    }

    #[test]
    fn attribute_accuracy_cases() {
        let a = AttributeVector::new([Attribute::Front; 9]);
        let (per, mean) = attribute_accuracy(&[a; 4], &[a; 4]).unwrap();
        assert_eq!(per, [1.0; 9]);
        assert_eq!(mean, 1.0);

        // constant OnPlane vs uniform-random labels converges to 1/3
        let mut rng = StdRng::seed_from_u64(2);
        let n = 30_000;
        let pred = vec![AttributeVector::new([Attribute::OnPlane; 9]); n];
        let gt: Vec<AttributeVector> = (0..n)
            .map(|_| {
                let mut labels = [Attribute::OnPlane; 9];
                for l in &mut labels {
                    *l = Attribute::from_class_index(rng.gen_range(0..3)).unwrap();
                }
                AttributeVector::new(labels)
            })
            .collect();
        let (_, mean) = attribute_accuracy(&pred, &gt).unwrap();
        assert!((mean - 1.0 / 3.0).abs() < 0.01, "mean {mean}");

        assert!(attribute_accuracy(&[a], &[a, a]).is_err());
    }

    #[test]
    fn monotonicity_of_pck_and_auc() {
        let mut rng = StdRng::seed_from_u64(3);
        let gts: Vec<Pose3D> = (0..40).map(|_| perturbed(&mut rng, 100.0)).collect();
        let preds: Vec<Pose3D> = gts
            .iter()
            .map(|g| {
                let mut p = g.clone();
                for c in &mut p.coords {
                    for k in 0..3 {
                        c[k] += rng.gen_range(-120.0..120.0);
                    }
                }
                p
            })
            .collect();
        let shrunk: Vec<Pose3D> = preds
            .iter()
            .zip(&gts)
            .map(|(p, g)| {
                let mut s = p.clone();
                for (cs, cg) in s.coords.iter_mut().zip(&g.coords) {
                    for k in 0..3 {
                        cs[k] = cg[k] + 0.5 * (cs[k] - cg[k]);
                    }
                }
                s
            })
            .collect();
        assert!(pck3d(&shrunk, &gts, 150.0).unwrap() >= pck3d(&preds, &gts, 150.0).unwrap());
        assert!(auc(&shrunk, &gts).unwrap() >= auc(&preds, &gts).unwrap());
    }

    #[test]
    fn sharded_report_is_bitwise_single_pass() {
        let mut rng = StdRng::seed_from_u64(4);
        let gts: Vec<Pose3D> = (0..101).map(|_| perturbed(&mut rng, 90.0)).collect();
        let preds: Vec<Pose3D> = (0..101).map(|_| perturbed(&mut rng, 90.0)).collect();
        let single = pose_report(&preds, &gts, 150.0, 1).unwrap();
        for threads in [2, 3, 8] {
            let sharded = pose_report(&preds, &gts, 150.0, threads).unwrap();
            assert_eq!(single, sharded, "threads = {threads}");
            assert_eq!(single.mpjpe_p1_mm.to_bits(), sharded.mpjpe_p1_mm.to_bits());
            assert_eq!(single.mpjpe_p2_mm.to_bits(), sharded.mpjpe_p2_mm.to_bits());
        }
    }

    #[test]
    fn permutation_invariance_of_set_metrics() {
        let mut rng = StdRng::seed_from_u64(5);
        let gts: Vec<Pose3D> = (0..25).map(|_| perturbed(&mut rng, 90.0)).collect();
        let preds: Vec<Pose3D> = (0..25).map(|_| perturbed(&mut rng, 90.0)).collect();
        let mut order: Vec<usize> = (0..25).collect();
        order.reverse();
        let preds_r: Vec<Pose3D> = order.iter().map(|&i| preds[i].clone()).collect();
        let gts_r: Vec<Pose3D> = order.iter().map(|&i| gts[i].clone()).collect();
        assert_eq!(
            pck3d(&preds, &gts, 150.0).unwrap(),
            pck3d(&preds_r, &gts_r, 150.0).unwrap()
        );
        assert_eq!(auc(&preds, &gts).unwrap(), auc(&preds_r, &gts_r).unwrap());
    }

    #[test]
    fn report_csv_has_joint_rows_and_summaries() {
        let gt = vec![canonical(); 3];
        let report = pose_report(&gt, &gt, 150.0, 1).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 16 + 5); // header + joints + summaries
        assert!(csv.contains("mpjpe_p1_mm/r-ankle,"));
        assert!(csv.contains("pck3d@150mm,1"));
        assert!(csv.contains("samples,3"));
    }
}
