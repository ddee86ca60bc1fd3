use proptest::prelude::*;
use qcoin_core::Verdict;
use qcoin_netplay::frame::{decode_frame, encode_frame, read_message, Message, Role};

fn bit() -> impl Strategy<Value = u8> {
    0u8..2
}

fn angle() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        Just(0.0),
        Just(-0.0),
        Just(f64::MAX),
        Just(f64::MIN_POSITIVE)
    ]
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        angle().prop_map(|angle| Message::Prepare { angle }),
        prop::collection::vec(angle(), 1..6).prop_map(|angles| Message::Measure { angles }),
        prop::collection::vec(bit(), 1..6).prop_map(|outcomes| Message::Detect { outcomes }),
        Just(Message::Lost),
        bit().prop_map(|b| Message::BBit { b }),
        (bit(), bit()).prop_map(|(x, a)| Message::Reveal { x, a }),
        (0u8..3).prop_map(|c| Message::Verdict {
            verdict: Verdict::from_code(c).unwrap()
        }),
        (any::<u8>(), prop::bool::ANY, ".{0,40}").prop_map(|(version, b, config)| Message::Hello {
            version,
            role: if b { Role::Bob } else { Role::Alice },
            config,
        }),
        ".{0,40}".prop_map(|reason| Message::Error { reason }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn round_trip(m in message()) {
        let bytes = encode_frame(&m);
        let len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        prop_assert_eq!(len, bytes.len() - 4);
        prop_assert_eq!(decode_frame(&bytes).unwrap(), m.clone());
        prop_assert_eq!(read_message(&mut &bytes[..]).unwrap(), m);
    }

    #[test]
    fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..32)) {
        let _ = decode_frame(&bytes);
    }

    #[test]
    fn every_strict_prefix_is_truncated(m in message()) {
        let bytes = encode_frame(&m);
        for cut in 0..bytes.len() {
            let err = decode_frame(&bytes[..cut]).unwrap_err();
            prop_assert!(err.to_string().contains("truncated"), "{}", err);
        }
    }
}
