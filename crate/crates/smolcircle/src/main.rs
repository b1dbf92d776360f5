fn main() {
    std::process::exit(smolcircle::run_cli(std::env::args_os()));
}
