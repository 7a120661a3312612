use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use super::{Corpus, DatasetName, IntentKey, LabeledExample, Origin, SplitTag};
use crate::error::{Error, Result};

/// CLINC150 domain inventory: ten domains with fifteen intents each.
pub const CLINC150_DOMAINS: [(&str, [&str; 15]); 10] = [
    (
        "banking",
        [
            "transfer", "transactions", "balance", "freeze_account", "pay_bill", "bill_balance",
            "bill_due", "interest_rate", "routing", "min_payment", "order_checks", "pin_change",
            "report_fraud", "account_blocked", "spending_history",
        ],
    ),
    (
        "credit_cards",
        [
            "credit_score", "report_lost_card", "credit_limit", "rewards_balance", "new_card",
            "application_status", "card_declined", "international_fees", "apr", "redeem_rewards",
            "credit_limit_change", "damaged_card", "replacement_card_duration",
            "improve_credit_score", "expiration_date",
        ],
    ),
    (
        "kitchen_and_dining",
        [
            "recipe", "restaurant_reviews", "calories", "nutrition_info", "restaurant_suggestion",
            "ingredients_list", "ingredient_substitution", "cook_time", "food_last",
            "meal_suggestion", "restaurant_reservation", "confirm_reservation", "how_busy",
            "cancel_reservation", "accept_reservations",
        ],
    ),
    (
        "home",
        [
            "shopping_list", "shopping_list_update", "next_song", "play_music", "update_playlist",
            "todo_list", "todo_list_update", "calendar", "calendar_update", "what_song", "order",
            "order_status", "reminder", "reminder_update", "smart_home",
        ],
    ),
    (
        "auto_and_commute",
        [
            "traffic", "directions", "gas", "gas_type", "distance", "current_location", "mpg",
            "oil_change_when", "oil_change_how", "jump_start", "uber", "schedule_maintenance",
            "last_maintenance", "tire_pressure", "tire_change",
        ],
    ),
    (
        "travel",
        [
            "book_flight", "book_hotel", "car_rental", "travel_suggestion", "travel_alert",
            "travel_notification", "carry_on", "timezone", "vaccines", "translate",
            "flight_status", "international_visa", "lost_luggage", "plug_type", "exchange_rate",
        ],
    ),
    (
        "utility",
        [
            "time", "alarm", "share_location", "find_phone", "weather", "text", "spelling",
            "make_call", "timer", "date", "calculator", "measurement_conversion", "flip_coin",
            "roll_dice", "definition",
        ],
    ),
    (
        "work",
        [
            "direct_deposit", "pto_request", "taxes", "payday", "w2", "pto_balance",
            "pto_request_status", "next_holiday", "insurance", "insurance_change",
            "schedule_meeting", "pto_used", "meeting_schedule", "rollover_401k", "income",
        ],
    ),
    (
        "small_talk",
        [
            "greeting", "goodbye", "tell_joke", "where_are_you_from", "how_old_are_you",
            "what_is_your_name", "who_made_you", "thank_you", "what_can_i_ask_you",
            "what_are_your_hobbies", "do_you_have_pets", "are_you_a_bot", "meaning_of_life",
            "who_do_you_work_for", "fun_fact",
        ],
    ),
    (
        "meta",
        [
            "change_ai_name", "change_user_name", "cancel", "user_name", "reset_settings",
            "whisper_mode", "repeat", "no", "yes", "maybe", "change_language", "change_accent",
            "change_volume", "change_speed", "sync_device",
        ],
    ),
];

pub fn clinc150_domain_of(intent: &str) -> Option<&'static str> {
    CLINC150_DOMAINS
        .iter()
        .find(|(_, intents)| intents.contains(&intent))
        .map(|(domain, _)| *domain)
}

/// All 150 CLINC150 intent keys in table order.
pub fn clinc150_inventory() -> Vec<IntentKey> {
    CLINC150_DOMAINS
        .iter()
        .flat_map(|(domain, intents)| {
            intents
                .iter()
                .map(move |intent| IntentKey::new(intent, domain).expect("static table is canonical"))
        })
        .collect()
}

#[derive(Deserialize)]
struct RawClinc {
    train: Vec<(String, String)>,
    test: Vec<(String, String)>,
}

fn is_oos(intent: &str) -> bool {
    intent == "oos" || intent == "out_of_scope"
}

/// Load the published CLINC150 JSON (`{"train": [[text, intent], ...], "test": ...}`).
///
/// Only the `train` and `test` partitions are read; `val` and the `oos_*`
/// partitions are ignored, as are entries labelled `oos` inside them. Every
/// intent that occurs must have utterances in both partitions.
pub fn load_clinc150(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: RawClinc = serde_json::from_slice(&bytes).map_err(|e| Error::parse(path, &e))?;

    let mut examples = Vec::with_capacity(raw.train.len() + raw.test.len());
    let mut counts: BTreeMap<IntentKey, [usize; 2]> = BTreeMap::new();
    let mut unknown = BTreeSet::new();
    for (split, rows) in [(SplitTag::Train, raw.train), (SplitTag::Test, raw.test)] {
        for (text, intent) in rows {
            if is_oos(&intent) {
                continue;
            }
            let Some(domain) = clinc150_domain_of(&intent) else {
                unknown.insert(intent);
                continue;
            };
            let key = IntentKey::new(&intent, domain)?;
            let slot = &mut counts.entry(key.clone()).or_default()[(split == SplitTag::Test) as usize];
            if !text.trim().is_empty() {
                *slot += 1;
                examples.push(LabeledExample::new(text, key, Origin::Human, split));
            }
        }
    }
    if !unknown.is_empty() {
        let names: Vec<_> = unknown.into_iter().collect();
        return Err(Error::Schema(format!("unknown CLINC150 intent(s): {}", names.join(", "))));
    }
    let empty: Vec<String> = counts
        .iter()
        .filter(|(_, c)| c[0] == 0 || c[1] == 0)
        .map(|(k, c)| {
            let part = if c[0] == 0 { "train" } else { "test" };
            format!("{} (no {part} utterances)", k.intent())
        })
        .collect();
    if !empty.is_empty() {
        return Err(Error::Schema(format!("intent(s) without utterances: {}", empty.join(", "))));
    }
    Corpus::new(DatasetName::Clinc150, examples)
}
