//! The control/traffic split over the air interface: which of the eleven
//! logical channels each kind of base station may operate, the four
//! permitted channel combinations, and TDMA slot timing.

use hypercell::um::{
    is_permitted_combination, FrameTime, LogicalChannel, Role, RoleSet,
    PERMITTED_COMBINATIONS,
};

fn main() {
    println!("{:<8} {:<10} owner", "channel", "group");
    for ch in LogicalChannel::ALL {
        let roles = ch.allowed_roles();
        let owner = match roles {
            RoleSet::SBS_ONLY => "signaling station",
            RoleSet::DBS_ONLY => "data station",
            RoleSet::BOTH => "both",
            _ => "nobody",
        };
        println!("{:<8} {:<10} {owner}", ch.name(), format!("{:?}", ch.group()));
    }

    println!();
    println!("permitted combinations:");
    for (i, combo) in PERMITTED_COMBINATIONS.iter().enumerate() {
        let names: Vec<&str> = combo.iter().map(|c| c.name()).collect();
        println!("  {}: {}", i + 1, names.join(" + "));
        assert!(is_permitted_combination(*combo));
    }

    // A traffic channel on slot 5 of frame 3 starts at (3*8 + 5) * 577us.
    let t = FrameTime::new(3, 5).expect("slot in range");
    println!();
    println!("frame 3 slot 5 starts at {}us into the hyperframe", t.slot_start_us());

    // The signaling station may never carry traffic.
    assert!(!LogicalChannel::Tch.allowed_roles().contains(Role::Sbs));
    // Both sides can run a standalone dedicated control channel.
    assert!(LogicalChannel::Sdcch.allowed_roles().contains(Role::Sbs));
    assert!(LogicalChannel::Sdcch.allowed_roles().contains(Role::Dbs));
}
