//! Evaluation metrics for detection, segmentation and representations.

pub mod detection;
pub mod ksg;
pub mod partition;
pub mod representation;

pub use detection::{detection_scores, DetectionScoreError, DetectionScores};
pub use ksg::{ksg_mi, mi_map, MiMap};
pub use partition::{
    adjusted_mutual_info, cluster_count, expected_mutual_info, homogeneity_completeness, mutual_info,
    ContingencyTable,
};
pub use representation::{amig, lsg, mmi, AmigReport, LogisticModel, LsgReport, RepresentationError};
