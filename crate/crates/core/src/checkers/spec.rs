//! Replay of sequential operation lists against the ledger objects.

use crate::ledger::{AppendResult, Ledger, ValidatedLedger, ValidityPredicate};
use crate::verdict::Property;

use super::history::{OpBody, Operation};
use super::properties::Violation;

/// Replays `seq` through a [`Ledger`]: every get must return the current
/// sequence and every append must succeed. A pending append (no result)
/// is applied like an acknowledged one.
pub fn check_sequential_spec<'a>(seq: impl IntoIterator<Item = &'a Operation>) -> Option<Violation> {
    let mut ledger = Ledger::new();
    for op in seq {
        match &op.body {
            OpBody::Get { returned } => {
                if ledger.sequence().taus() != *returned {
                    return Some(Violation::new(Property::SeqSpec, vec![op.id.clone()]));
                }
            }
            OpBody::Append { record, result } => {
                if *result == Some(AppendResult::Nack) || ledger.append(record.clone()).is_err() {
                    return Some(Violation::new(Property::SeqSpec, vec![op.id.clone(), record.tau.to_string()]));
                }
            }
        }
    }
    None
}

/// Replays `seq` through a [`ValidatedLedger`] and compares every recorded
/// result with the predicate's verdict at that point.
pub fn check_validated_spec<'a>(
    seq: impl IntoIterator<Item = &'a Operation>,
    pred: &ValidityPredicate,
) -> Option<Violation> {
    let mut ledger = ValidatedLedger::new(pred.clone());
    for op in seq {
        match &op.body {
            OpBody::Get { returned } => {
                if ledger.sequence().taus() != *returned {
                    return Some(Violation::new(Property::SeqSpec, vec![op.id.clone()]));
                }
            }
            OpBody::Append { record, result } => {
                let Ok(expected) = ledger.append(record.clone()) else {
                    return Some(Violation::new(Property::SeqSpec, vec![op.id.clone(), record.tau.to_string()]));
                };
                match (result.unwrap_or(AppendResult::Ack), expected) {
                    (AppendResult::Ack, AppendResult::Nack) => {
                        return Some(Violation::new(Property::AckedInvalid, vec![op.id.clone()]));
                    }
                    (AppendResult::Nack, AppendResult::Ack) => {
                        return Some(Violation::new(Property::NackedValid, vec![op.id.clone()]));
                    }
                    _ => {}
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Record, RecordId};
    use std::collections::BTreeMap;

    fn op(i: u64, body: OpBody) -> Operation {
        Operation {
            id: format!("op0:{i}"),
            client: 0,
            c: i,
            invoke: 2 * i as usize,
            response: Some(2 * i as usize + 1),
            invoke_t: 0,
            response_t: Some(0),
            body,
        }
    }

    fn app(i: u64, payload: &str, result: AppendResult) -> Operation {
        op(
            i,
            OpBody::Append {
                record: Record::new(RecordId::new(0, i), payload),
                result: Some(result),
            },
        )
    }

    fn get(i: u64, taus: &[u64]) -> Operation {
        op(
            i,
            OpBody::Get {
                returned: taus.iter().map(|c| RecordId::new(0, *c)).collect(),
            },
        )
    }

    fn balance() -> ValidityPredicate {
        ValidityPredicate::AccountBalance {
            initial: BTreeMap::from([("A".to_string(), 0)]),
        }
    }

    #[test]
    fn append_then_get_passes() {
        let seq = [app(1, "x", AppendResult::Ack), get(2, &[1])];
        assert_eq!(check_sequential_spec(&seq), None);
    }

    #[test]
    fn get_of_unappended_record_fails() {
        let v = check_sequential_spec(&[get(1, &[7])]).unwrap();
        assert_eq!(v.property, Property::SeqSpec);
        assert_eq!(v.witness, vec!["op0:1"]);
    }

    #[test]
    fn empty_sequence_passes() {
        assert_eq!(check_sequential_spec(&[]), None);
    }

    #[test]
    fn validated_replay_with_a_rejected_withdrawal() {
        let seq = [
            app(1, "deposit:A:5", AppendResult::Ack),
            app(2, "withdraw:A:7", AppendResult::Nack),
            get(3, &[1]),
        ];
        assert_eq!(check_validated_spec(&seq, &balance()), None);
    }

    #[test]
    fn ack_for_an_invalid_append_fails_2a() {
        let seq = [
            app(1, "deposit:A:5", AppendResult::Ack),
            app(2, "withdraw:A:7", AppendResult::Ack),
            get(3, &[1]),
        ];
        let v = check_validated_spec(&seq, &balance()).unwrap();
        assert_eq!((v.property, v.witness), (Property::AckedInvalid, vec!["op0:2".to_string()]));
    }

    #[test]
    fn nack_under_always_true_fails_2b() {
        let seq = [app(1, "x", AppendResult::Nack)];
        let v = check_validated_spec(&seq, &ValidityPredicate::AlwaysTrue).unwrap();
        assert_eq!(v.property, Property::NackedValid);
    }
}
