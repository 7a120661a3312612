use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use super::{Corpus, DatasetName, IntentKey, LabeledExample, Origin, SplitTag};
use crate::error::{Error, Result};

/// The twenty SGD service domains, in canonical form.
pub const SGD_DOMAINS: [&str; 20] = [
    "restaurants", "media", "events", "music", "movies", "flights", "ride_sharing", "rental_cars",
    "buses", "hotels", "services", "homes", "banks", "calendar", "weather", "travel", "alarm",
    "payment", "trains", "messaging",
];

const OFFICIAL_SPLITS: [&str; 3] = ["train", "dev", "test"];

#[derive(Deserialize)]
struct Dialogue {
    turns: Vec<Turn>,
}

#[derive(Deserialize)]
struct Turn {
    speaker: String,
    utterance: String,
    #[serde(default)]
    frames: Vec<Frame>,
}

#[derive(Deserialize)]
struct Frame {
    service: String,
    #[serde(default)]
    state: Option<FrameState>,
}

#[derive(Deserialize)]
struct FrameState {
    active_intent: String,
}

fn camel_to_snake(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 4);
    let chars: Vec<char> = name.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_uppercase() {
            let prev_lower = i > 0 && (chars[i - 1].is_lowercase() || chars[i - 1].is_ascii_digit());
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let prev_upper = i > 0 && chars[i - 1].is_uppercase();
            if i > 0 && (prev_lower || (prev_upper && next_lower)) {
                out.push('_');
            }
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// Map a service name such as `RideSharing_2` to its canonical domain (`ride_sharing`).
pub fn sgd_domain_of_service(service: &str) -> String {
    let base = match service.rsplit_once('_') {
        Some((head, tail)) if !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) => head,
        _ => service,
    };
    super::canonicalize(&camel_to_snake(base))
}

/// Which official split each intent was observed in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SgdStats {
    pub intents_by_split: BTreeMap<String, BTreeSet<IntentKey>>,
}

impl SgdStats {
    /// Intents present in both the official train and test splits.
    pub fn shared_train_test(&self) -> BTreeSet<IntentKey> {
        match (self.intents_by_split.get("train"), self.intents_by_split.get("test")) {
            (Some(a), Some(b)) => a.intersection(b).cloned().collect(),
            _ => BTreeSet::new(),
        }
    }
}

pub fn load_sgd_merged(root: impl AsRef<Path>) -> Result<Corpus> {
    load_sgd_merged_with_stats(root).map(|(c, _)| c)
}

/// Load the SGD dialogue directories under `root` (`train/`, `dev/`, `test/`),
/// merge them, and flatten user turns into single utterances.
///
/// A user turn becomes one example labelled with the active intent of its
/// first frame that has one; system turns and turns without an active intent
/// are dropped.
pub fn load_sgd_merged_with_stats(root: impl AsRef<Path>) -> Result<(Corpus, SgdStats)> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Load {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "SGD root directory not found"),
        });
    }
    let mut examples = Vec::new();
    let mut stats = SgdStats::default();
    let mut found_split = false;
    for split in OFFICIAL_SPLITS {
        let dir = root.join(split);
        if !dir.is_dir() {
            continue;
        }
        found_split = true;
        let mut files: Vec<_> = std::fs::read_dir(&dir)
            .map_err(|source| Error::Load {
                path: dir.clone(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("dialogues_") && n.ends_with(".json"))
            })
            .collect();
        files.sort();
        let seen = stats.intents_by_split.entry(split.to_string()).or_default();
        for file in files {
            let bytes = std::fs::read(&file).map_err(|source| Error::Load {
                path: file.clone(),
                source,
            })?;
            let dialogues: Vec<Dialogue> =
                serde_json::from_slice(&bytes).map_err(|e| Error::parse(&file, &e))?;
            for turn in dialogues.iter().flat_map(|d| &d.turns) {
                if turn.speaker != "USER" || turn.utterance.trim().is_empty() {
                    continue;
                }
                let active = turn.frames.iter().find_map(|f| {
                    f.state
                        .as_ref()
                        .filter(|s| !s.active_intent.is_empty() && s.active_intent != "NONE")
                        .map(|s| (f.service.as_str(), s.active_intent.as_str()))
                });
                let Some((service, intent)) = active else { continue };
                let domain = sgd_domain_of_service(service);
                if !SGD_DOMAINS.contains(&domain.as_str()) {
                    return Err(Error::Schema(format!(
                        "unknown SGD domain `{domain}` (service {service}) in {}",
                        file.display()
                    )));
                }
                let key = IntentKey::new(&camel_to_snake(intent), &domain)?;
                seen.insert(key.clone());
                examples.push(LabeledExample::new(
                    turn.utterance.clone(),
                    key,
                    Origin::Human,
                    SplitTag::Unassigned,
                ));
            }
        }
    }
    if !found_split {
        return Err(Error::Load {
            path: root.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "none of train/, dev/, test/ present",
            ),
        });
    }
    Ok((Corpus::new(DatasetName::Sgd, examples)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn service_names() {
        assert_eq!(sgd_domain_of_service("RideSharing_2"), "ride_sharing");
        assert_eq!(sgd_domain_of_service("RentalCars_1"), "rental_cars");
        assert_eq!(sgd_domain_of_service("Banks_1"), "banks");
        assert_eq!(camel_to_snake("ReserveRestaurant"), "reserve_restaurant");
        assert_eq!(camel_to_snake("GetCarsAvailable"), "get_cars_available");
        assert_eq!(camel_to_snake("SearchOnewayFlight"), "search_oneway_flight");
    }

    fn write_split(root: &Path, split: &str, body: &str) {
        let dir = root.join(split);
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("dialogues_001.json"), body).unwrap();
        std::fs::write(dir.join("schema.json"), "[]").unwrap();
    }

    const ONE_DIALOGUE: &str = r#"[{"dialogue_id": "1_00000", "services": ["Restaurants_1"], "turns": [
        {"speaker": "USER", "utterance": "Find me a sushi place",
         "frames": [{"service": "Restaurants_1", "state": {"active_intent": "FindRestaurants"}}]},
        {"speaker": "SYSTEM", "utterance": "Which city?", "frames": [{"service": "Restaurants_1"}]},
        {"speaker": "USER", "utterance": "Book a table there for two",
         "frames": [{"service": "Restaurants_1", "state": {"active_intent": "ReserveRestaurant"}}]},
        {"speaker": "USER", "utterance": "hmm",
         "frames": [{"service": "Restaurants_1", "state": {"active_intent": "NONE"}}]}
    ]}]"#;

    #[test]
    fn flattens_user_turns() {
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), "train", ONE_DIALOGUE);
        let c = load_sgd_merged(dir.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.examples().iter().all(|e| e.split == SplitTag::Unassigned));
        let keys: Vec<_> = c.intents().map(|k| k.intent().to_string()).collect();
        assert_eq!(keys, ["find_restaurants", "reserve_restaurant"]);
    }

    #[test]
    fn merges_splits_under_one_key() {
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), "train", ONE_DIALOGUE);
        write_split(dir.path(), "test", ONE_DIALOGUE);
        let (c, stats) = load_sgd_merged_with_stats(dir.path()).unwrap();
        assert_eq!(c.by_intent().len(), 2);
        assert_eq!(c.len(), 4);
        assert_eq!(stats.shared_train_test().len(), 2);
    }

    #[test]
    fn unknown_domain_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = ONE_DIALOGUE.replace("Restaurants_1", "Spaceships_1");
        write_split(dir.path(), "dev", &body);
        assert!(matches!(load_sgd_merged(dir.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_root() {
        assert!(matches!(load_sgd_merged("/no/such/sgd"), Err(Error::Load { .. })));
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(load_sgd_merged(empty.path()), Err(Error::Load { .. })));
    }

    #[test]
    fn malformed_dialogue_file() {
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), "train", "[{\"turns\": [}");
        assert!(matches!(load_sgd_merged(dir.path()), Err(Error::Parse { .. })));
    }
}
