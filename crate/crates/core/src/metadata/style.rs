use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use super::bbox::round_px;

/// 8-bit RGBA color. Parsed from `#RRGGBB` or `#RRGGBBAA`, always written as `#RRGGBBAA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Rgba {
    pub const fn new(r: u8, g: u8, b: u8, a: u8) -> Self {
        Rgba { r, g, b, a }
    }

    pub fn to_array(self) -> [u8; 4] {
        [self.r, self.g, self.b, self.a]
    }
}

impl fmt::Display for Rgba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02X}{:02X}{:02X}{:02X}", self.r, self.g, self.b, self.a)
    }
}

impl FromStr for Rgba {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix('#')
            .ok_or_else(|| format!("color {s:?} must start with '#'"))?;
        if !hex.is_ascii() || !(hex.len() == 6 || hex.len() == 8) {
            return Err(format!("color {s:?} must be #RRGGBB or #RRGGBBAA"));
        }
        let byte = |i: usize| {
            u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("bad hex in color {s:?}"))
        };
        let a = if hex.len() == 8 { byte(6)? } else { 0xFF };
        Ok(Rgba::new(byte(0)?, byte(2)?, byte(4)?, a))
    }
}

impl Serialize for Rgba {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgba {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Integral pixel length. Fractional input is rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Px(pub i64);

impl<'de> Deserialize<'de> for Px {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        round_px(v)
            .map(Px)
            .ok_or_else(|| de::Error::custom(format!("length {v} out of range")))
    }
}

impl fmt::Display for Px {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}px", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shadow {
    pub x: Px,
    pub y: Px,
    pub blur: Px,
    pub color: Rgba,
}

impl fmt::Display for Shadow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.x, self.y, self.blur, self.color)
    }
}

impl FromStr for Shadow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let [x, y, blur, color] = parts.as_slice() else {
            return Err(format!("shadow {s:?} must be '<x>px <y>px <blur>px #RRGGBBAA'"));
        };
        let px = |t: &str| {
            t.strip_suffix("px")
                .and_then(|n| n.parse::<i64>().ok())
                .map(Px)
                .ok_or_else(|| format!("bad shadow length {t:?}"))
        };
        Ok(Shadow {
            x: px(x)?,
            y: px(y)?,
            blur: px(blur)?,
            color: color.parse()?,
        })
    }
}

/// Visual attributes of a layer over a closed vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleAttrs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill: Option<Rgba>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub border_color: Option<Rgba>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub border_width: Option<Px>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner_radius: Option<Px>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow: Option<Shadow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opacity: Option<Opacity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<Px>,
}

impl StyleAttrs {
    pub fn is_empty(&self) -> bool {
        *self == StyleAttrs::default()
    }
}

/// Scalar opacity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Opacity(f64);

impl Opacity {
    pub fn new(v: f64) -> Option<Self> {
        (0.0..=1.0).contains(&v).then_some(Opacity(v))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Opacity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Opacity::new(v).ok_or_else(|| de::Error::custom(format!("opacity {v} outside [0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextAttrs {
    pub content: String,
    pub font_family: String,
    pub font_size: Px,
    pub weight: u32,
    pub color: Rgba,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_height: Option<Px>,
}
