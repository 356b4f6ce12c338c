//! Temporary debugging probe; removed before release.
use itrval::seed::derive_seed;
fn main() {
    println!("{}", derive_seed(1, &[3, 200, 0]));
    println!("{}", derive_seed(1, &[3, 200, 99]));
    println!("{}", derive_seed(5, &[1, 40, 3]));
}
