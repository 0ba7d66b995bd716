fn main() { println!("linres"); }
