//! The coordination protocol on the wire: encode each of the six message
//! kinds, show the bytes, decode them back, and demonstrate what the five
//! decode error classes look like on malformed input.

use hypercell::wire::{
    decode, encode, ControlMessage, LoadByte, MessageHeader, ServiceKind, WirePower,
};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let header = MessageHeader { sender_id: 0, seq: 1, transaction_id: 42 };
    let messages = [
        ControlMessage::ChannelAppointment { ms_id: 101, service: ServiceKind::MoCall, slot: 0 },
        ControlMessage::AppointmentResponse { accept: true, arfcn: 60, slot: 3 },
        ControlMessage::WakeupCommand { dbs_id: 1 },
        ControlMessage::WakeupAck { dbs_id: 1 },
        ControlMessage::LinkRelease { ms_id: 101 },
        ControlMessage::StatusReport {
            power: WirePower::Active,
            load: LoadByte::from_fraction(0.5).unwrap(),
        },
    ];

    for msg in &messages {
        let bytes = encode(&header, msg);
        println!("{:<60} {}", format!("{msg:?}"), hex(&bytes));
        let (back_header, back_msg) = decode(&bytes).expect("own bytes decode");
        assert_eq!(back_header, header);
        assert_eq!(&back_msg, msg);
    }

    println!();
    println!("malformed inputs:");
    let good = encode(&header, &messages[0]);

    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    println!("  wrong magic      -> {}", decode(&bad_magic).unwrap_err());

    let mut bad_version = good.clone();
    bad_version[4] = 9;
    println!("  wrong version    -> {}", decode(&bad_version).unwrap_err());

    let mut bad_tag = good.clone();
    bad_tag[5] = 0x77;
    println!("  unknown tag      -> {}", decode(&bad_tag).unwrap_err());

    println!("  truncated header -> {}", decode(&good[..10]).unwrap_err());
    println!("  truncated body   -> {}", decode(&good[..good.len() - 2]).unwrap_err());
}
