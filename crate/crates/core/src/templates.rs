//! Canonical skeleton templates. Hip at the origin, facing +x, left side
//! toward +y, z up, meters at scale 1.

use crate::scene::{Action, ActionSet, Joint, Vec3, NUM_JOINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Template {
    Stand,
    Sit,
    Reach,
    Bend,
    Phone,
}

impl Template {
    pub const ALL: [Template; 5] = [Template::Stand, Template::Sit, Template::Reach, Template::Bend, Template::Phone];

    pub fn name(self) -> &'static str {
        match self {
            Template::Stand => "stand",
            Template::Sit => "sit",
            Template::Reach => "reach",
            Template::Bend => "bend",
            Template::Phone => "phone",
        }
    }

    /// Template implied by an action label.
    pub fn for_actions(a: ActionSet) -> Template {
        if a.iter().any(Action::is_seated) {
            Template::Sit
        } else if a.contains(Action::MakePhoneCall) {
            Template::Phone
        } else if a.contains(Action::Hold) || a.contains(Action::Read) {
            Template::Reach
        } else if a.contains(Action::Bend) {
            Template::Bend
        } else {
            Template::Stand
        }
    }

    pub fn joints(self) -> [Vec3; NUM_JOINTS] {
        let mut j = stand();
        let mut set = |k: Joint, x: f64, y: f64, z: f64| j[k.index()] = Vec3::new(x, y, z);
        match self {
            Template::Stand => {}
            Template::Sit => {
                set(Joint::Spine, -0.03, 0.0, 0.25);
                set(Joint::Neck, -0.05, 0.0, 0.55);
                set(Joint::Head, -0.05, 0.0, 0.72);
                set(Joint::Nose, 0.05, 0.0, 0.68);
                set(Joint::LeftShoulder, -0.05, 0.18, 0.5);
                set(Joint::RightShoulder, -0.05, -0.18, 0.5);
                set(Joint::LeftElbow, 0.05, 0.22, 0.26);
                set(Joint::RightElbow, 0.05, -0.22, 0.26);
                set(Joint::LeftWrist, 0.28, 0.18, 0.22);
                set(Joint::RightWrist, 0.28, -0.18, 0.22);
                set(Joint::LeftKnee, 0.45, 0.1, 0.02);
                set(Joint::RightKnee, 0.45, -0.1, 0.02);
                set(Joint::LeftAnkle, 0.45, 0.1, -0.45);
                set(Joint::RightAnkle, 0.45, -0.1, -0.45);
            }
            Template::Reach => {
                set(Joint::RightElbow, 0.22, -0.2, 0.42);
                set(Joint::RightWrist, 0.45, -0.2, 0.45);
            }
            Template::Bend => {
                set(Joint::Spine, 0.12, 0.0, 0.2);
                set(Joint::Neck, 0.35, 0.0, 0.4);
                set(Joint::Head, 0.48, 0.0, 0.5);
                set(Joint::Nose, 0.56, 0.0, 0.42);
                set(Joint::LeftShoulder, 0.3, 0.18, 0.38);
                set(Joint::RightShoulder, 0.3, -0.18, 0.38);
                set(Joint::LeftElbow, 0.4, 0.2, 0.1);
                set(Joint::RightElbow, 0.4, -0.2, 0.1);
                set(Joint::LeftWrist, 0.45, 0.2, -0.15);
                set(Joint::RightWrist, 0.45, -0.2, -0.15);
                set(Joint::LeftKnee, 0.08, 0.1, -0.43);
                set(Joint::RightKnee, 0.08, -0.1, -0.43);
                set(Joint::LeftAnkle, 0.0, 0.1, -0.85);
                set(Joint::RightAnkle, 0.0, -0.1, -0.85);
            }
            Template::Phone => {
                set(Joint::RightElbow, 0.05, -0.3, 0.35);
                set(Joint::RightWrist, 0.06, -0.12, 0.68);
            }
        }
        j
    }
}

fn stand() -> [Vec3; NUM_JOINTS] {
    let table: [(Joint, [f64; 3]); NUM_JOINTS] = [
        (Joint::Hip, [0.0, 0.0, 0.0]),
        (Joint::Spine, [0.0, 0.0, 0.25]),
        (Joint::Neck, [0.0, 0.0, 0.55]),
        (Joint::Head, [0.0, 0.0, 0.72]),
        (Joint::LeftShoulder, [0.0, 0.18, 0.5]),
        (Joint::RightShoulder, [0.0, -0.18, 0.5]),
        (Joint::LeftElbow, [0.0, 0.22, 0.22]),
        (Joint::RightElbow, [0.0, -0.22, 0.22]),
        (Joint::LeftWrist, [0.05, 0.22, -0.02]),
        (Joint::RightWrist, [0.05, -0.22, -0.02]),
        (Joint::LeftHip, [0.0, 0.1, 0.0]),
        (Joint::RightHip, [0.0, -0.1, 0.0]),
        (Joint::LeftKnee, [0.02, 0.1, -0.45]),
        (Joint::RightKnee, [0.02, -0.1, -0.45]),
        (Joint::LeftAnkle, [0.0, 0.1, -0.87]),
        (Joint::RightAnkle, [0.0, -0.1, -0.87]),
        (Joint::Nose, [0.1, 0.0, 0.68]),
    ];
    let mut out = [Vec3::zeros(); NUM_JOINTS];
    for (j, [x, y, z]) in table {
        out[j.index()] = Vec3::new(x, y, z);
    }
    out
}

/// Heading of a hip-centred pose, from its left-to-right hip and shoulder
/// axes: a template facing +x returns 0.
pub fn facing_yaw(joints: &[Vec3; NUM_JOINTS]) -> f64 {
    let v = (joints[Joint::RightHip.index()] - joints[Joint::LeftHip.index()])
        + (joints[Joint::RightShoulder.index()] - joints[Joint::LeftShoulder.index()]);
    v.x.atan2(-v.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::rotate_z;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ankles_lowest_and_hip_at_origin() {
        for t in Template::ALL {
            let j = t.joints();
            assert_eq!(j[Joint::Hip.index()], Vec3::zeros());
            let ankle = j[Joint::LeftAnkle.index()].z;
            assert_eq!(ankle, j[Joint::RightAnkle.index()].z);
            assert!(j.iter().all(|p| p.z >= ankle), "{}", t.name());
        }
    }

    #[test]
    fn facing_recovers_rotation() {
        for t in Template::ALL {
            assert_abs_diff_eq!(facing_yaw(&t.joints()), 0.0, epsilon = 1e-12);
            let r = t.joints().map(|p| rotate_z(&p, 1.1));
            assert_abs_diff_eq!(facing_yaw(&r), 1.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn template_choice() {
        assert_eq!(Template::for_actions(ActionSet::from_actions(&[Action::SitAt, Action::Read])), Template::Sit);
        assert_eq!(Template::for_actions(ActionSet::single(Action::Hold)), Template::Reach);
        assert_eq!(Template::for_actions(ActionSet::single(Action::Walk)), Template::Stand);
    }
}
