fn main() {
    std::process::exit(momentcone::run_cli());
}
