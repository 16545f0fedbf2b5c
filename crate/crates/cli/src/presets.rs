//! Planar test scenes with fixed radio placements.

use clap::ValueEnum;
use pointray_core::oracle::PlanarScene;
use pointray_core::DVec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 4 x 3 x 2.5 m closed room.
    BoxRoom,
    /// 20 m long corridor, 2 m wide, 2.5 m high, open at both ends.
    Corridor,
    /// Two half-planes meeting at an exterior right-angle edge.
    Wedge,
}

impl Preset {
    pub fn default_radios(self) -> (DVec3, DVec3) {
        match self {
            Preset::BoxRoom => (DVec3::new(1.5, 1.2, 1.6), DVec3::new(2.7, 1.9, 1.0)),
            Preset::Corridor => (DVec3::new(3.0, 0.7, 1.6), DVec3::new(13.0, 1.3, 1.2)),
            Preset::Wedge => (DVec3::new(0.0, -1.0, 0.5), DVec3::new(0.5, 1.0, -1.0)),
        }
    }

    pub fn build(self, tx: Option<DVec3>, rx: Option<DVec3>) -> PlanarScene {
        let (dtx, drx) = self.default_radios();
        let (tx, rx) = (tx.unwrap_or(dtx), rx.unwrap_or(drx));
        match self {
            Preset::BoxRoom => PlanarScene::box_room(DVec3::ZERO, DVec3::new(4.0, 3.0, 2.5), tx, rx),
            Preset::Corridor => PlanarScene::corridor(20.0, 2.0, 2.5, tx, rx),
            Preset::Wedge => PlanarScene::wedge(2.0, 2.0, tx, rx),
        }
    }
}

/// Parse `x,y,z`.
pub fn parse_point(s: &str) -> Result<DVec3, String> {
    let values: Vec<f64> =
        s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"))).collect::<Result<_, _>>()?;
    match values.as_slice() {
        [x, y, z] => Ok(DVec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}
