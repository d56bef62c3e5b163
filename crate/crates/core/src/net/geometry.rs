//! Compass geometry and the movement conflict relation (right-hand traffic).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Side of the junction an approach comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Compass {
    N,
    E,
    S,
    W,
}

impl Compass {
    pub const ALL: [Compass; 4] = [Compass::N, Compass::E, Compass::S, Compass::W];

    fn index(self) -> usize {
        match self {
            Compass::N => 0,
            Compass::E => 1,
            Compass::S => 2,
            Compass::W => 3,
        }
    }

    fn from_index(i: usize) -> Compass {
        Compass::ALL[i % 4]
    }

    pub fn opposite(self) -> Compass {
        Compass::from_index(self.index() + 2)
    }

    /// Side a vehicle leaves through when turning in `direction` after
    /// entering from this side. Entering from N means heading south, so a
    /// left turn exits E.
    pub fn exit_for(self, direction: Direction) -> Compass {
        match direction {
            Direction::Straight => self.opposite(),
            Direction::Left => Compass::from_index(self.index() + 1),
            Direction::Right => Compass::from_index(self.index() + 3),
        }
    }

    /// Travel heading of traffic entering from this side.
    pub fn heading(self) -> &'static str {
        match self {
            Compass::N => "southbound",
            Compass::E => "westbound",
            Compass::S => "northbound",
            Compass::W => "eastbound",
        }
    }
}

impl fmt::Display for Compass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Compass::N => "N",
            Compass::E => "E",
            Compass::S => "S",
            Compass::W => "W",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "l")]
    Left,
    #[serde(rename = "s")]
    Straight,
    #[serde(rename = "r")]
    Right,
}

impl Direction {
    pub fn code(self) -> &'static str {
        match self {
            Direction::Left => "l",
            Direction::Straight => "s",
            Direction::Right => "r",
        }
    }

    pub fn is_signalized(self) -> bool {
        self != Direction::Right
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l" => Ok(Direction::Left),
            "s" => Ok(Direction::Straight),
            "r" => Ok(Direction::Right),
            other => Err(format!("unknown direction {other:?}, expected l, s or r")),
        }
    }
}

/// Whether two movements, given as (entry side, turn), cross or merge.
///
/// Right turns are permissive and never part of the relation. Movements from
/// the same side share a stop line and never conflict. Opposing through pairs
/// and opposing left pairs run together; an opposing through/left mix crosses.
/// Every through or left movement crosses every perpendicular through or left.
pub fn movements_conflict(a: (Compass, Direction), b: (Compass, Direction)) -> bool {
    let ((side_a, dir_a), (side_b, dir_b)) = (a, b);
    if !dir_a.is_signalized() || !dir_b.is_signalized() {
        return false;
    }
    if side_a == side_b {
        return false;
    }
    if side_b == side_a.opposite() {
        return dir_a != dir_b;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exits_follow_right_hand_geometry() {
        assert_eq!(Compass::N.exit_for(Direction::Left), Compass::E);
        assert_eq!(Compass::N.exit_for(Direction::Right), Compass::W);
        assert_eq!(Compass::W.exit_for(Direction::Left), Compass::N);
        assert_eq!(Compass::E.exit_for(Direction::Straight), Compass::W);
        assert_eq!(Compass::S.exit_for(Direction::Left), Compass::W);
    }

    #[test]
    fn conflict_relation_is_symmetric_and_irreflexive() {
        let dirs = [Direction::Left, Direction::Straight, Direction::Right];
        for a in Compass::ALL {
            for da in dirs {
                assert!(!movements_conflict((a, da), (a, da)));
                for b in Compass::ALL {
                    for db in dirs {
                        assert_eq!(
                            movements_conflict((a, da), (b, db)),
                            movements_conflict((b, db), (a, da))
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_pairs() {
        use Compass::*;
        use Direction::*;
        assert!(!movements_conflict((N, Straight), (S, Straight)));
        assert!(!movements_conflict((E, Left), (W, Left)));
        assert!(movements_conflict((N, Straight), (E, Straight)));
        assert!(movements_conflict((N, Straight), (S, Left)));
        assert!(movements_conflict((N, Left), (W, Straight)));
        assert!(!movements_conflict((N, Right), (E, Straight)));
    }
}
