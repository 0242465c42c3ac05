//! A minimal JSON-Schema checker covering the subset the shipped schemas
//! use: `type` (with union arrays), `properties`, `required`,
//! `additionalProperties: false`, `items`, and `$ref` into `#/definitions`.

use serde_json::Value;

pub fn validate(schema: &Value, value: &Value) -> Result<(), String> {
    check(schema, schema, value, "$")
}

fn check(root: &Value, node: &Value, value: &Value, path: &str) -> Result<(), String> {
    let node = resolve_ref(root, node)?;

    if let Some(ty) = node.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(|v| v.as_str()).collect(),
            other => return Err(format!("{path}: malformed type specifier {other}")),
        };
        if !allowed.iter().any(|t| type_matches(t, value)) {
            return Err(format!(
                "{path}: expected type {allowed:?}, got {}",
                type_name(value)
            ));
        }
    }

    if let Some(obj) = value.as_object() {
        if let Some(required) = node.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required property {key:?}"));
                }
            }
        }
        let properties = node.get("properties").and_then(Value::as_object);
        if node.get("additionalProperties") == Some(&Value::Bool(false)) {
            for key in obj.keys() {
                if properties.is_none_or(|p| !p.contains_key(key)) {
                    return Err(format!("{path}: unexpected property {key:?}"));
                }
            }
        }
        if let Some(props) = properties {
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    check(root, sub, v, &format!("{path}.{key}"))?;
                }
            }
        }
    }

    if let (Some(items), Some(array)) = (node.get("items"), value.as_array()) {
        for (i, element) in array.iter().enumerate() {
            check(root, items, element, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

fn resolve_ref<'a>(root: &'a Value, node: &'a Value) -> Result<&'a Value, String> {
    let Some(reference) = node.get("$ref").and_then(Value::as_str) else {
        return Ok(node);
    };
    let Some(name) = reference.strip_prefix("#/definitions/") else {
        return Err(format!("unsupported $ref {reference:?}"));
    };
    root.get("definitions")
        .and_then(|d| d.get(name))
        .ok_or_else(|| format!("dangling $ref {reference:?}"))
}

fn type_matches(ty: &str, value: &Value) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "integer" => value.is_i64() || value.is_u64(),
        "number" => value.is_number(),
        _ => false,
    }
}

fn type_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
