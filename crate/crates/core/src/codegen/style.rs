use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

use crate::metadata::{Rgba, Shadow};

/// Declarative style properties, in emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StyleProp {
    Left,
    Top,
    Width,
    Height,
    FontSize,
    FontWeight,
    LineHeight,
    Color,
    BackgroundColor,
    BorderWidth,
    BorderColor,
    CornerRadius,
    Padding,
    Shadow,
    Opacity,
    Overflow,
}

impl StyleProp {
    pub const ALL: [StyleProp; 16] = [
        StyleProp::Left,
        StyleProp::Top,
        StyleProp::Width,
        StyleProp::Height,
        StyleProp::FontSize,
        StyleProp::FontWeight,
        StyleProp::LineHeight,
        StyleProp::Color,
        StyleProp::BackgroundColor,
        StyleProp::BorderWidth,
        StyleProp::BorderColor,
        StyleProp::CornerRadius,
        StyleProp::Padding,
        StyleProp::Shadow,
        StyleProp::Opacity,
        StyleProp::Overflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StyleProp::Left => "left",
            StyleProp::Top => "top",
            StyleProp::Width => "width",
            StyleProp::Height => "height",
            StyleProp::FontSize => "font_size",
            StyleProp::FontWeight => "font_weight",
            StyleProp::LineHeight => "line_height",
            StyleProp::Color => "color",
            StyleProp::BackgroundColor => "background_color",
            StyleProp::BorderWidth => "border_width",
            StyleProp::BorderColor => "border_color",
            StyleProp::CornerRadius => "corner_radius",
            StyleProp::Padding => "padding",
            StyleProp::Shadow => "shadow",
            StyleProp::Opacity => "opacity",
            StyleProp::Overflow => "overflow",
        }
    }

    pub fn parse_name(s: &str) -> Option<StyleProp> {
        StyleProp::ALL.into_iter().find(|p| p.as_str() == s)
    }

    /// Properties whose values are px lengths.
    pub fn is_length(self) -> bool {
        matches!(
            self,
            StyleProp::Left
                | StyleProp::Top
                | StyleProp::Height
                | StyleProp::FontSize
                | StyleProp::LineHeight
                | StyleProp::BorderWidth
                | StyleProp::CornerRadius
                | StyleProp::Padding
        )
    }

    /// Parse a textual value for this property.
    pub fn parse_value(self, s: &str) -> Result<StyleValue, String> {
        let s = s.trim();
        let bad = || format!("invalid value {s:?} for {}", self.as_str());
        match self {
            StyleProp::Left
            | StyleProp::Top
            | StyleProp::Height
            | StyleProp::FontSize
            | StyleProp::LineHeight
            | StyleProp::BorderWidth
            | StyleProp::CornerRadius
            | StyleProp::Padding => s
                .strip_suffix("px")
                .and_then(|n| n.parse::<i64>().ok())
                .filter(|n| n.abs() <= 1_000_000_000)
                .map(StyleValue::Px)
                .ok_or_else(bad),
            StyleProp::Width => parse_percent(s).map(StyleValue::Percent).ok_or_else(bad),
            StyleProp::FontWeight => s.parse().map(StyleValue::Weight).map_err(|_| bad()),
            StyleProp::Color | StyleProp::BackgroundColor | StyleProp::BorderColor => {
                s.parse().map(StyleValue::Color)
            }
            StyleProp::Shadow => s.parse::<Shadow>().map(StyleValue::Shadow),
            StyleProp::Opacity => s
                .parse::<f64>()
                .ok()
                .filter(|v| (0.0..=1.0).contains(v))
                .map(StyleValue::Opacity)
                .ok_or_else(bad),
            StyleProp::Overflow => match s {
                "scroll" => Ok(StyleValue::Overflow(Overflow::Scroll)),
                "visible" => Ok(StyleValue::Overflow(Overflow::Visible)),
                _ => Err(bad()),
            },
        }
    }
}

/// `"12.5%"` → 1250 hundredths of a percent, rounded half-up.
fn parse_percent(s: &str) -> Option<i64> {
    let n = s.strip_suffix('%')?;
    if n.is_empty() || !n.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
        return None;
    }
    let (int, frac) = n.split_once('.').unwrap_or((n, ""));
    if int.is_empty() || int.len() > 6 || frac.contains('.') {
        return None;
    }
    let mut hundredths = int.parse::<i64>().ok()? * 100;
    let digits: Vec<i64> = frac.bytes().map(|b| (b - b'0') as i64).collect();
    hundredths += digits.first().copied().unwrap_or(0) * 10 + digits.get(1).copied().unwrap_or(0);
    if digits.get(2).copied().unwrap_or(0) >= 5 {
        hundredths += 1;
    }
    Some(hundredths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Overflow {
    Visible,
    Scroll,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StyleValue {
    Px(i64),
    /// Hundredths of a percent: 5000 is `50.00%`.
    Percent(i64),
    Color(Rgba),
    Weight(u32),
    Shadow(Shadow),
    Opacity(f64),
    Overflow(Overflow),
}

impl fmt::Display for StyleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StyleValue::Px(v) => write!(f, "{v}px"),
            StyleValue::Percent(h) => write!(f, "{}.{:02}%", h / 100, h % 100),
            StyleValue::Color(c) => write!(f, "{c}"),
            StyleValue::Weight(w) => write!(f, "{w}"),
            StyleValue::Shadow(s) => write!(f, "{s}"),
            StyleValue::Opacity(o) => write!(f, "{o}"),
            StyleValue::Overflow(Overflow::Scroll) => f.write_str("scroll"),
            StyleValue::Overflow(Overflow::Visible) => f.write_str("visible"),
        }
    }
}

/// Ordered property → value map. Serialized as a JSON object of strings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StyleMap(BTreeMap<StyleProp, StyleValue>);

impl StyleMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, prop: StyleProp, value: StyleValue) {
        self.0.insert(prop, value);
    }

    pub fn get(&self, prop: StyleProp) -> Option<&StyleValue> {
        self.0.get(&prop)
    }

    pub fn contains(&self, prop: StyleProp) -> bool {
        self.0.contains_key(&prop)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StyleProp, &StyleValue)> {
        self.0.iter().map(|(k, v)| (*k, v))
    }

    pub fn px(&self, prop: StyleProp) -> Option<i64> {
        match self.get(prop) {
            Some(StyleValue::Px(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn percent(&self) -> Option<i64> {
        match self.get(StyleProp::Width) {
            Some(StyleValue::Percent(v)) => Some(*v),
            _ => None,
        }
    }

    /// Build from `(name, value)` text pairs. Unknown names are returned separately;
    /// a known name with an unparseable value is an error.
    pub fn from_text_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<(StyleMap, Vec<String>), String> {
        let mut map = StyleMap::new();
        let mut unknown = Vec::new();
        for (k, v) in pairs {
            match StyleProp::parse_name(k) {
                Some(p) => map.set(p, p.parse_value(v)?),
                None => unknown.push(k.to_string()),
            }
        }
        Ok((map, unknown))
    }
}

impl Serialize for StyleMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k.as_str(), &v.to_string())?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for StyleMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct MapVisitor;

        impl<'de> Visitor<'de> for MapVisitor {
            type Value = StyleMap;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of style property to value")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<StyleMap, A::Error> {
                let mut map = StyleMap::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    let prop = StyleProp::parse_name(&k)
                        .ok_or_else(|| de::Error::custom(format!("unknown style property {k:?}")))?;
                    map.set(prop, prop.parse_value(&v).map_err(de::Error::custom)?);
                }
                Ok(map)
            }
        }

        d.deserialize_map(MapVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_parsing_rounds_half_up() {
        assert_eq!(parse_percent("50.00%"), Some(5000));
        assert_eq!(parse_percent("50%"), Some(5000));
        assert_eq!(parse_percent("33.335%"), Some(3334));
        assert_eq!(parse_percent("33.334%"), Some(3333));
        assert_eq!(parse_percent("0.5%"), Some(50));
        assert_eq!(parse_percent("-5%"), None);
        assert_eq!(parse_percent(".5%"), None);
        assert_eq!(parse_percent("1.2.3%"), None);
        assert_eq!(StyleValue::Percent(5).to_string(), "0.05%");
    }

    #[test]
    fn serde_round_trip_in_declared_order() {
        let mut m = StyleMap::new();
        m.set(StyleProp::Overflow, StyleValue::Overflow(Overflow::Scroll));
        m.set(StyleProp::Left, StyleValue::Px(10));
        m.set(StyleProp::Width, StyleValue::Percent(5000));
        m.set(StyleProp::Color, StyleValue::Color(Rgba::new(1, 2, 3, 255)));
        m.set(StyleProp::Opacity, StyleValue::Opacity(0.5));
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(
            text,
            r##"{"left":"10px","width":"50.00%","color":"#010203FF","opacity":"0.5","overflow":"scroll"}"##
        );
        let back: StyleMap = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<StyleMap>(r#"{"blend_mode":"x"}"#).is_err());
        assert!(serde_json::from_str::<StyleMap>(r#"{"left":"10"}"#).is_err());
    }
}
