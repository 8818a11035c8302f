//! Scan of wire and export documents for raster or image payloads. Only
//! sparse abstractions (points, contours, attributes) may leave a capture.

use serde_json::Value;

/// Keys that would carry per-pixel data.
pub const FORBIDDEN_KEYS: [&str; 16] = [
    "image",
    "images",
    "raster",
    "pixels",
    "mask",
    "depth",
    "depth_map",
    "labels",
    "rgb",
    "photo",
    "jpeg",
    "jpg",
    "png",
    "bitmap",
    "frame",
    "thumbnail_png",
];

/// A flat numeric array longer than this is treated as a raster.
pub const MAX_NUMERIC_ARRAY: usize = 4096;

/// Returns the JSON paths of every suspicious field; empty means clean.
pub fn raster_fields(doc: &Value) -> Vec<String> {
    let mut found = Vec::new();
    walk(doc, "$", &mut found);
    found
}

fn suspicious_key(k: &str) -> bool {
    let k = k.to_ascii_lowercase();
    FORBIDDEN_KEYS.contains(&k.as_str())
        || k.contains("image")
        || k.contains("raster")
        || k.contains("base64")
}

fn walk(v: &Value, path: &str, found: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let p = format!("{path}.{k}");
                if suspicious_key(k) {
                    found.push(p.clone());
                }
                walk(child, &p, found);
            }
        }
        Value::Array(a) => {
            if a.len() > MAX_NUMERIC_ARRAY && a.iter().all(Value::is_number) {
                found.push(format!("{path}[..{}]", a.len()));
            }
            for (i, child) in a.iter().enumerate() {
                walk(child, &format!("{path}[{i}]"), found);
            }
        }
        Value::String(s) => {
            if s.starts_with("data:") || (s.len() > 1024 && !s.contains(char::is_whitespace)) {
                found.push(path.to_string());
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn clean_geojson_passes() {
        let doc = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "geometry": {"type": "Point", "coordinates": [1.0, 2.0]},
             "properties": {"class": "pole", "width": "2.00"}}
        ]});
        assert!(raster_fields(&doc).is_empty());
    }

    #[test]
    fn payloads_are_flagged() {
        let doc = json!({
            "a": {"depth_map": [1]},
            "b": "data:image/png;base64,AAAA",
            "c": {"Image_Bytes": 1},
            "d": vec![0u8; MAX_NUMERIC_ARRAY + 1],
        });
        let f = raster_fields(&doc);
        assert!(f.contains(&"$.a.depth_map".to_string()));
        assert!(f.contains(&"$.b".to_string()));
        assert!(f.contains(&"$.c.Image_Bytes".to_string()));
        assert!(f.iter().any(|p| p.starts_with("$.d[..")));
    }
}
