use std::path::Path;

use super::{DatasetError, InstructionEntry};

/// Serializes entries as a pretty-printed JSON array. Key order follows the
/// struct declarations, so output is byte-stable.
pub fn dataset_to_json(entries: &[InstructionEntry]) -> String {
    let mut text = serde_json::to_string_pretty(entries).expect("dataset entries always serialize");
    text.push('\n');
    text
}

pub fn dataset_from_json(text: &str) -> Result<Vec<InstructionEntry>, DatasetError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let entries: Vec<InstructionEntry> = serde_path_to_error::deserialize(de).map_err(|e| DatasetError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    for (i, entry) in entries.iter().enumerate() {
        entry.validate().map_err(|(field, message)| DatasetError::Schema {
            path: format!("[{i}].{field}"),
            message,
        })?;
    }
    let mut ids = std::collections::HashSet::new();
    for (i, entry) in entries.iter().enumerate() {
        if !ids.insert(entry.id.as_str()) {
            return Err(DatasetError::Schema {
                path: format!("[{i}].id"),
                message: format!("duplicate id {:?}", entry.id),
            });
        }
    }
    Ok(entries)
}

pub fn write_dataset(entries: &[InstructionEntry], destination: &Path) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: destination.display().to_string(),
        source,
    };
    if let Some(parent) = destination.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    std::fs::write(destination, dataset_to_json(entries)).map_err(io_err)
}

pub fn read_dataset(source: &Path) -> Result<Vec<InstructionEntry>, DatasetError> {
    let text = std::fs::read_to_string(source).map_err(|source_err| DatasetError::Io {
        path: source.display().to_string(),
        source: source_err,
    })?;
    dataset_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, DatasetCounts, ScenarioContext, Vocabulary};

    fn sample() -> Vec<InstructionEntry> {
        generate_dataset(
            42,
            DatasetCounts::per_type(20),
            &Vocabulary::default(),
            &ScenarioContext::default(),
        )
        .unwrap()
    }

    #[test]
    fn round_trips_through_a_file() {
        let entries = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/ds.json");
        write_dataset(&entries, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), entries);
    }

    #[test]
    fn top_level_keys_are_in_schema_order() {
        let text = dataset_to_json(&sample()[..1]);
        let keys = [
            "\"id\"",
            "\"context\"",
            "\"ambiguous_instruction\"",
            "\"unambiguous_instruction\"",
            "\"ambiguity_type\"",
            "\"slots\"",
        ];
        let positions: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");
    }

    #[test]
    fn missing_ambiguity_type_names_the_field() {
        let mut value: serde_json::Value = serde_json::from_str(&dataset_to_json(&sample()[..2])).unwrap();
        value[1].as_object_mut().unwrap().remove("ambiguity_type");
        let err = dataset_from_json(&value.to_string()).unwrap_err();
        match err {
            DatasetError::Schema { path, message } => {
                assert!(message.contains("ambiguity_type"), "{message}");
                assert!(path.starts_with("[1]"), "{path}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverted_span_is_a_schema_error() {
        let mut value: serde_json::Value = serde_json::from_str(&dataset_to_json(&sample()[..1])).unwrap();
        let span = &mut value[0]["slots"]["ambiguous_span"];
        let (start, end) = (span["start"].as_u64().unwrap(), span["end"].as_u64().unwrap());
        span["start"] = end.into();
        span["end"] = start.into();
        let err = dataset_from_json(&value.to_string()).unwrap_err();
        assert!(
            matches!(&err, DatasetError::Schema { path, .. } if path == "[0].slots.ambiguous_span"),
            "{err:?}"
        );
    }

    #[test]
    fn span_past_end_is_a_schema_error() {
        let mut value: serde_json::Value = serde_json::from_str(&dataset_to_json(&sample()[..1])).unwrap();
        value[0]["slots"]["unambiguous_span"]["end"] = 10_000.into();
        let err = dataset_from_json(&value.to_string()).unwrap_err();
        assert!(matches!(&err, DatasetError::Schema { path, .. } if path == "[0].slots.unambiguous_span"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut entries = sample();
        entries[1].id = entries[0].id.clone();
        let err = dataset_from_json(&dataset_to_json(&entries)).unwrap_err();
        assert!(matches!(&err, DatasetError::Schema { path, .. } if path == "[1].id"));
    }

    #[test]
    fn unreadable_source_is_io_error() {
        let err = read_dataset(Path::new("/nonexistent/ds.json")).unwrap_err();
        assert!(matches!(err, DatasetError::Io { .. }));
    }
}
