//! Minting and checking TINs, and hashing passwords.
//!
//! ```bash
//! cargo run -p revenue-core --example tin_and_passwords
//! ```

use revenue_core::domain::{mint_tin, validate_tin, verify_password, PasswordHasher};

fn main() {
    for counter in [0, 1, 42, 99_999_999] {
        let tin = mint_tin(counter).unwrap();
        println!("{counter:>9} -> {} ({})", tin.as_str(), tin.display());
    }

    let tin = mint_tin(1234).unwrap().display();
    let mut typo = tin.clone().into_bytes();
    typo[5] = if typo[5] == b'9' { b'0' } else { typo[5] + 1 };
    let typo = String::from_utf8(typo).unwrap();
    println!("{tin} valid: {}", validate_tin(&tin));
    println!("{typo} valid: {}  (one digit off; the check digit catches it)", validate_tin(&typo));

    let hasher = PasswordHasher::with_iterations(10_000);
    let digest = hasher.hash("correct horse", b"per-user-salt").unwrap();
    println!("stored digest: {}", digest.as_str());
    println!("right password: {}", verify_password("correct horse", &digest));
    println!("wrong password: {}", verify_password("correct horse!", &digest));
}
