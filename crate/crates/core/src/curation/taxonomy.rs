//! Three broad classes, thirteen named sub-categories and one "others"
//! bucket per class.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BroadClass {
    Outdoor,
    Indoor,
    Artificial,
}

impl BroadClass {
    pub const ALL: [BroadClass; 3] = [BroadClass::Outdoor, BroadClass::Indoor, BroadClass::Artificial];
}

impl fmt::Display for BroadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubCategory {
    Animals,
    People,
    Nature,
    Transportation,
    Architecture,
    OutdoorOthers,
    IndoorScenes,
    Furniture,
    Food,
    IndoorObject,
    IndoorOthers,
    Comic,
    Poster,
    Map,
    TextScene,
    ArtificialOthers,
}

impl SubCategory {
    pub const ALL: [SubCategory; 16] = [
        SubCategory::Animals,
        SubCategory::People,
        SubCategory::Nature,
        SubCategory::Transportation,
        SubCategory::Architecture,
        SubCategory::OutdoorOthers,
        SubCategory::IndoorScenes,
        SubCategory::Furniture,
        SubCategory::Food,
        SubCategory::IndoorObject,
        SubCategory::IndoorOthers,
        SubCategory::Comic,
        SubCategory::Poster,
        SubCategory::Map,
        SubCategory::TextScene,
        SubCategory::ArtificialOthers,
    ];

    /// The thirteen named sub-categories (every entry except the "others" buckets).
    pub fn named() -> impl Iterator<Item = SubCategory> {
        Self::ALL.into_iter().filter(|s| !s.is_others())
    }

    pub fn is_others(self) -> bool {
        matches!(
            self,
            SubCategory::OutdoorOthers | SubCategory::IndoorOthers | SubCategory::ArtificialOthers
        )
    }

    pub fn broad_class(self) -> BroadClass {
        use SubCategory::*;
        match self {
            Animals | People | Nature | Transportation | Architecture | OutdoorOthers => BroadClass::Outdoor,
            IndoorScenes | Furniture | Food | IndoorObject | IndoorOthers => BroadClass::Indoor,
            Comic | Poster | Map | TextScene | ArtificialOthers => BroadClass::Artificial,
        }
    }

    pub fn name(self) -> &'static str {
        use SubCategory::*;
        match self {
            Animals => "animals",
            People => "people",
            Nature => "nature",
            Transportation => "transportation",
            Architecture => "architecture",
            OutdoorOthers => "outdoor_others",
            IndoorScenes => "indoor_scenes",
            Furniture => "furniture",
            Food => "food",
            IndoorObject => "indoor_object",
            IndoorOthers => "indoor_others",
            Comic => "comic",
            Poster => "poster",
            Map => "map",
            TextScene => "text_scene",
            ArtificialOthers => "artificial_others",
        }
    }
}

impl fmt::Display for SubCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubCategory::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown sub-category {s:?}"))
    }
}
