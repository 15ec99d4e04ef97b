mod common;

use hornforge::encode::Segment;
use hornforge::masks::{isolated_corrective_mask, prefix_bidirectional_mask};

#[test]
fn all_layouts_up_to_32_match_the_segment_rules() {
    let (checked, bad) = common::mask_violations(32);
    assert!(checked > 1_000_000);
    assert_eq!(bad, 0);
}

#[test]
fn malformed_layouts_are_rejected() {
    use Segment::*;
    assert!(prefix_bidirectional_mask(&[]).is_err());
    assert!(prefix_bidirectional_mask(&[Prefix, DirectBranch, Prefix]).is_err());
    assert!(isolated_corrective_mask(&[Prefix, DirectBranch, CotBranch, DirectBranch]).is_err());
}
