//! Synthetic corpora with the shape of the real datasets.
//!
//! The published datasets are not redistributed with this crate. These
//! builders produce corpora with the same domain/intent inventory and
//! per-intent counts so the split protocols, the runner and the Python
//! bindings can be exercised without them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{clinc150_inventory, Corpus, DatasetName, IntentKey, LabeledExample, Origin, SplitTag};
use crate::seed;

/// An SGD-shaped inventory: 20 domains, 46 intents; four domains carry a
/// single intent and three carry four.
pub const SGD_SHAPED_INVENTORY: [(&str, &[&str]); 20] = [
    ("alarm", &["get_alarms", "add_alarm"]),
    ("banks", &["check_balance", "transfer_money"]),
    ("buses", &["find_bus", "buy_bus_ticket"]),
    ("calendar", &["get_available_time", "add_event", "get_events"]),
    ("events", &["find_events", "buy_event_tickets", "get_event_dates"]),
    ("flights", &["search_oneway_flight", "search_roundtrip_flights", "reserve_oneway_flight", "reserve_roundtrip_flights"]),
    ("homes", &["find_apartment", "schedule_visit", "find_home_by_area"]),
    ("hotels", &["reserve_hotel", "search_hotel", "book_house", "search_house"]),
    ("media", &["find_movies", "play_movie"]),
    ("messaging", &["share_location"]),
    ("movies", &["buy_movie_tickets", "find_movies", "get_times_for_movie"]),
    ("music", &["lookup_music", "play_song", "lookup_song", "play_media"]),
    ("payment", &["make_payment", "request_payment"]),
    ("rental_cars", &["get_cars_available", "reserve_car"]),
    ("restaurants", &["reserve_restaurant", "find_restaurants"]),
    ("ride_sharing", &["get_ride"]),
    ("services", &["book_appointment", "find_provider"]),
    ("trains", &["find_trains", "get_train_tickets"]),
    ("travel", &["find_attractions"]),
    ("weather", &["get_weather"]),
];

fn human_text(key: &IntentKey, i: usize) -> String {
    format!("{} please {} request {i}", key.intent().replace('_', " "), key.domain().replace('_', " "))
}

/// A CLINC150-shaped corpus: all 150 intents with `train_per_intent` train
/// and `test_per_intent` test utterances each.
pub fn clinc150_shaped(train_per_intent: usize, test_per_intent: usize) -> Corpus {
    let mut examples = Vec::new();
    for key in clinc150_inventory() {
        for i in 0..train_per_intent {
            examples.push(LabeledExample::new(human_text(&key, i), key.clone(), Origin::Human, SplitTag::Train));
        }
        for i in 0..test_per_intent {
            examples.push(LabeledExample::new(
                human_text(&key, train_per_intent + i),
                key.clone(),
                Origin::Human,
                SplitTag::Test,
            ));
        }
    }
    Corpus::new(DatasetName::Clinc150, examples).expect("fixture is valid")
}

pub fn sgd_shaped_inventory() -> Vec<IntentKey> {
    SGD_SHAPED_INVENTORY
        .iter()
        .flat_map(|(d, intents)| intents.iter().map(move |i| IntentKey::new(i, d).expect("canonical")))
        .collect()
}

/// An SGD-shaped corpus whose per-intent counts span the published range
/// 128..=3291 (both endpoints present) with roughly the published mean.
pub fn sgd_shaped(seed: u64) -> Corpus {
    let inventory = sgd_shaped_inventory();
    let mut rng = seed::rng_from(seed, &["fixture", "sgd"]);
    let mut counts: Vec<usize> = (0..inventory.len()).map(|_| rng.gen_range(300..=2200)).collect();
    counts[0] = 128;
    counts[1] = 3291;
    counts.shuffle(&mut rng);
    let mut examples = Vec::new();
    for (key, n) in inventory.iter().zip(counts) {
        for i in 0..n {
            examples.push(LabeledExample::new(human_text(key, i), key.clone(), Origin::Human, SplitTag::Unassigned));
        }
    }
    Corpus::new(DatasetName::Sgd, examples).expect("fixture is valid")
}

/// A small keyword world: every intent owns a handful of keywords; human
/// utterances mix keywords with shared filler words.
///
/// Used to exercise the full pipeline with scripted generators and
/// lightweight backends where the outcome is predictable.
#[derive(Debug, Clone)]
pub struct KeywordWorld {
    pub keywords: BTreeMap<IntentKey, Vec<String>>,
    pub filler: Vec<String>,
}

const FILLER: [&str; 8] = ["i", "want", "to", "please", "my", "can", "you", "the"];

impl KeywordWorld {
    /// `domains` × `intents_per_domain` intents, `keywords_per_intent` unique keywords each.
    pub fn new(domains: usize, intents_per_domain: usize, keywords_per_intent: usize) -> Self {
        let mut keywords = BTreeMap::new();
        for d in 0..domains {
            for i in 0..intents_per_domain {
                let key = IntentKey::new(&format!("intent_{d}_{i}"), &format!("domain_{d}")).expect("canonical");
                let words = (0..keywords_per_intent).map(|k| format!("kw{d}x{i}x{k}")).collect();
                keywords.insert(key, words);
            }
        }
        Self {
            keywords,
            filler: FILLER.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn intents(&self) -> impl Iterator<Item = &IntentKey> {
        self.keywords.keys()
    }

    /// A keyword utterance for `key`: two filler words around two keywords.
    pub fn utterance(&self, key: &IntentKey, rng: &mut seed::Rng) -> String {
        let kws = &self.keywords[key];
        let mut words: Vec<&str> = kws.choose_multiple(rng, 2.min(kws.len())).map(String::as_str).collect();
        words.insert(0, self.filler.choose(rng).expect("filler"));
        words.push(self.filler.choose(rng).expect("filler"));
        words.join(" ")
    }

    /// Human corpus: `train_per_intent` train and `test_per_intent` test utterances per intent.
    pub fn human_corpus(&self, train_per_intent: usize, test_per_intent: usize, seed_value: u64) -> Corpus {
        let mut examples = Vec::new();
        for key in self.keywords.keys() {
            let mut rng = seed::rng_from(seed_value, &["keyword-world", key.domain(), key.intent()]);
            for (split, n) in [(SplitTag::Train, train_per_intent), (SplitTag::Test, test_per_intent)] {
                for _ in 0..n {
                    examples.push(LabeledExample::new(self.utterance(key, &mut rng), key.clone(), Origin::Human, split));
                }
            }
        }
        Corpus::new(DatasetName::Custom, examples).expect("fixture is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clinc_shape() {
        let c = clinc150_shaped(100, 30);
        assert_eq!(c.len(), 150 * 130);
        assert_eq!(c.descriptor().domains.len(), 10);
        assert!(c.descriptor().intents_per_domain.values().all(|v| v.len() == 15));
    }

    #[test]
    fn sgd_shape() {
        let c = sgd_shaped(0);
        assert_eq!(c.by_intent().len(), 46);
        assert_eq!(c.descriptor().domains.len(), 20);
        let sizes: Vec<usize> = c.by_intent().values().map(Vec::len).collect();
        assert_eq!(*sizes.iter().min().unwrap(), 128);
        assert_eq!(*sizes.iter().max().unwrap(), 3291);
        let singles = SGD_SHAPED_INVENTORY.iter().filter(|(_, i)| i.len() == 1).count();
        let quads = SGD_SHAPED_INVENTORY.iter().filter(|(_, i)| i.len() == 4).count();
        assert_eq!((singles, quads), (4, 3));
    }

    #[test]
    fn keyword_world_corpus() {
        let w = KeywordWorld::new(3, 2, 4);
        let c = w.human_corpus(5, 2, 1);
        assert_eq!(c.len(), 6 * 7);
        assert_eq!(c, w.human_corpus(5, 2, 1));
    }
}
