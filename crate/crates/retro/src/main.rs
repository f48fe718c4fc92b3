fn main() {
    std::process::exit(retro::harness::cli(std::env::args()));
}
