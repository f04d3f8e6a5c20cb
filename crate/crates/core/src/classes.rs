//! Per-class defaults: 3D size, resting height used to back-project a
//! detection at initialization, and the container flag that exempts an
//! object from object-object collision.

use std::collections::BTreeMap;

use crate::scene::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassInfo {
    pub size: Vec3,
    /// Height of the box center above the floor when at rest.
    pub center_height: f64,
    pub is_container: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    pub classes: BTreeMap<String, ClassInfo>,
}

const TABLE_TOP: f64 = 0.75;

fn info(sx: f64, sy: f64, sz: f64, center_height: f64, is_container: bool) -> ClassInfo {
    ClassInfo { size: Vec3::new(sx, sy, sz), center_height, is_container }
}

impl Default for ClassTable {
    fn default() -> Self {
        let mut classes = BTreeMap::new();
        let mut put = |name: &str, ci: ClassInfo| {
            classes.insert(name.to_string(), ci);
        };
        put("chair", info(0.5, 0.5, 0.9, 0.45, false));
        put("stool", info(0.4, 0.4, 0.45, 0.225, false));
        put("sofa", info(0.9, 1.9, 0.85, 0.425, false));
        put("bed", info(2.0, 1.5, 0.55, 0.275, false));
        put("table", info(0.8, 1.2, TABLE_TOP, 0.5 * TABLE_TOP, false));
        put("desk", info(0.7, 1.3, TABLE_TOP, 0.5 * TABLE_TOP, true));
        put("cabinet", info(0.5, 0.9, 1.2, 0.6, true));
        put("drawer", info(0.45, 0.5, 0.6, 0.3, true));
        put("nightstand", info(0.45, 0.45, 0.55, 0.275, false));
        put("bookshelf", info(0.35, 1.0, 1.8, 0.9, true));
        put("laptop", info(0.25, 0.35, 0.25, TABLE_TOP + 0.125, false));
        put("monitor", info(0.2, 0.55, 0.45, TABLE_TOP + 0.225, false));
        put("bottle", info(0.08, 0.08, 0.25, TABLE_TOP + 0.125, false));
        put("cup", info(0.09, 0.09, 0.11, TABLE_TOP + 0.055, false));
        put("book", info(0.22, 0.16, 0.04, TABLE_TOP + 0.02, false));
        put("notebook", info(0.3, 0.21, 0.02, TABLE_TOP + 0.01, false));
        put("tablet", info(0.25, 0.18, 0.01, TABLE_TOP + 0.005, false));
        put("phone", info(0.075, 0.15, 0.01, TABLE_TOP + 0.005, false));
        Self { classes }
    }
}

impl ClassTable {
    /// Falls back to a half-meter cube resting on the floor.
    pub fn get(&self, class: &str) -> ClassInfo {
        self.classes
            .get(class)
            .cloned()
            .unwrap_or_else(|| info(0.5, 0.5, 0.5, 0.25, false))
    }

    pub fn is_container(&self, class: &str) -> bool {
        self.classes.get(class).is_some_and(|c| c.is_container)
    }
}
